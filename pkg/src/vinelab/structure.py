"""
Regular vine tree sequences.

Variables are labelled 1..d. A structure is stored as its explicit tree
sequence: ``trees[k - 1]`` holds the edges of tree T_k. Each edge carries its
conditioned pair ``(a, b)`` with ``a < b`` and its conditioning set.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np


class StructureError(ValueError):
    """Raised for malformed or irregular vine structures."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, order=True)
class Edge:
    a: int
    b: int
    cond: tuple = ()

    def __post_init__(self):
        a, b = int(self.a), int(self.b)
        if a == b:
            raise StructureError(f"conditioned pair must be two distinct variables, got ({a}, {b})")
        cond = tuple(sorted(int(c) for c in self.cond))
        if len(set(cond)) != len(cond):
            raise StructureError(f"duplicate variables in conditioning set {cond}")
        if a in cond or b in cond:
            raise StructureError(f"conditioned variable in conditioning set: ({a},{b}|{cond})")
        if a > b:
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "cond", cond)

    @property
    def level(self):
        return len(self.cond) + 1

    @property
    def pair(self):
        return (self.a, self.b)

    @property
    def constraint(self):
        """All variables touched by the edge."""
        return frozenset((self.a, self.b) + self.cond)

    def __str__(self):
        if not self.cond:
            return f"{self.a},{self.b}"
        return f"{self.a},{self.b}|{','.join(map(str, self.cond))}"

    def to_dict(self):
        return {"pair": [self.a, self.b], "cond": list(self.cond)}

    @classmethod
    def from_dict(cls, obj):
        a, b = obj["pair"]
        return cls(a, b, tuple(obj.get("cond", ())))

    @classmethod
    def parse(cls, text):
        """Parse ``"2,5|1,3,4"`` or ``"1,2"``."""
        head, _, tail = str(text).partition("|")
        a, b = (int(x) for x in head.split(","))
        cond = tuple(int(x) for x in tail.split(",")) if tail.strip() else ()
        return cls(a, b, cond)


def join(e1, e2):
    """
    The edge of the next tree obtained by joining two edges of one tree.

    Returns ``None`` when the two edges cannot be joined (their constraint
    sets do not differ by exactly one variable each).
    """
    s1, s2 = e1.constraint, e2.constraint
    common = s1 & s2
    if len(s1) != len(s2) or len(common) != len(s1) - 1:
        return None
    (a,), (b,) = s1 - common, s2 - common
    return Edge(a, b, tuple(common))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    rule: str = ""
    level: int = 0
    message: str = ""

    def __bool__(self):
        return self.ok


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[max(rx, ry, key=repr)] = min(rx, ry, key=repr)
        return True


def _check_joins(d, trees, partial=False):
    """
    Shared validation routine on a list of trees, where each entry of a tree
    is a pair of node identifiers. Node identifiers of T_1 are variables;
    those of T_k (k >= 2) are constraint sets of edges of T_{k-1}.
    """
    if len(trees) != d - 1 and not partial:
        return ValidationReport(False, "tree-count", len(trees),
                                f"expected {d - 1} trees for d={d}, got {len(trees)}")
    prev_nodes = [frozenset([i]) for i in range(1, d + 1)]
    endpoints = {}  # constraint set of a T_{k-1} edge -> the two nodes it joins
    for k, joins in enumerate(trees, start=1):
        if len(joins) != d - k:
            return ValidationReport(False, "edge-count", k,
                                    f"tree {k} must have {d - k} edges, got {len(joins)}")
        node_set = set(prev_nodes)
        uf = _UnionFind(prev_nodes)
        for n1, n2 in joins:
            if n1 not in node_set or n2 not in node_set:
                missing = n1 if n1 not in node_set else n2
                return ValidationReport(
                    False, "proximity", k,
                    f"tree {k} joins {sorted(missing)}, which is not an edge of tree {k - 1}")
            if k > 1 and not set(endpoints[n1]) & set(endpoints[n2]):
                return ValidationReport(
                    False, "proximity", k,
                    f"tree {k} joins edges {sorted(n1)} and {sorted(n2)} of tree {k - 1}, "
                    "which share no node")
            if not uf.union(n1, n2):
                return ValidationReport(False, "tree", k, f"tree {k} contains a cycle")
        if len({uf.find(n) for n in prev_nodes}) != 1:
            return ValidationReport(False, "tree", k, f"tree {k} is not connected")
        endpoints = {n1 | n2: (n1, n2) for n1, n2 in joins}
        prev_nodes = [n1 | n2 for n1, n2 in joins]
        if len(endpoints) != len(prev_nodes):
            return ValidationReport(False, "tree", k, f"tree {k} has duplicate edges")
    return ValidationReport(True)


def _edge_joins(edge):
    """The two node identifiers an edge connects."""
    if not edge.cond:
        return frozenset([edge.a]), frozenset([edge.b])
    cond = frozenset(edge.cond)
    return cond | {edge.a}, cond | {edge.b}


class RVineStructure:
    """
    Regular vine on ``d`` variables as a tree sequence.

    The constructor only checks edge well-formedness; call ``validate`` to
    check regularity, or use ``check=True``.
    """

    def __init__(self, d, trees, check=False):
        self.d = int(d)
        self.trees = tuple(tuple(sorted(t)) for t in trees)
        if check:
            report = validate(self)
            if not report:
                raise StructureError(report.message, report)

    def __repr__(self):
        return f"RVineStructure(d={self.d}, trees={[[str(e) for e in t] for t in self.trees]})"

    def __eq__(self, other):
        return isinstance(other, RVineStructure) and self.d == other.d and self.trees == other.trees

    def __hash__(self):
        return hash((self.d, self.trees))

    def edges_of(self, k):
        """Edges of tree ``k`` (1-based) in canonical order."""
        if not 1 <= k <= self.d - 1:
            raise IndexError(f"tree level must be in 1..{self.d - 1}, got {k}")
        return list(self.trees[k - 1])

    def edges(self):
        return [e for t in self.trees for e in t]

    def relabel(self, mapping):
        """Structure with variables renamed through ``mapping`` (dict or callable)."""
        f = mapping if callable(mapping) else mapping.__getitem__
        return RVineStructure(self.d, [[Edge(f(e.a), f(e.b), tuple(f(c) for c in e.cond))
                                        for e in t] for t in self.trees])

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {"d": self.d, "trees": [[e.to_dict() for e in t] for t in self.trees]}

    @classmethod
    def from_dict(cls, obj, check=True):
        return cls(obj["d"], [[Edge.from_dict(e) for e in t] for t in obj["trees"]], check=check)

    @classmethod
    def from_joins(cls, d, first_tree, joins):
        """
        Build a structure from the first tree's variable pairs and, for each
        higher tree, pairs of indices into the previous tree's edge list
        (in the order given).
        """
        trees = [[Edge(a, b) for a, b in first_tree]]
        raw = [[(frozenset([a]), frozenset([b])) for a, b in first_tree]]
        for level_joins in joins:
            prev = trees[-1]
            pairs = [(prev[i].constraint, prev[j].constraint) for i, j in level_joins]
            edges = [join(prev[i], prev[j]) for i, j in level_joins]
            raw.append(pairs)
            if any(e is None for e in edges):
                report = _check_joins(d, raw, partial=True)
                raise StructureError(report.message, report)
            trees.append(edges)
        s = cls(d, trees)
        report = validate(s)
        if not report:
            raise StructureError(report.message, report)
        return s

    def to_matrix(self):
        """
        Lower-triangular structure matrix (0 above the diagonal).

        Column j holds diagonal variable ``M[j, j]``; entry ``M[i, j]`` with
        i > j encodes the edge ``(M[j, j], M[i, j] | M[i+1:, j])`` of tree
        ``d - i``. Simulation runs from the last column to the first.
        """
        d = self.d
        m = np.zeros((d, d), dtype=int)
        remaining = [list(t) for t in self.trees]
        for j in range(d - 1):
            top = d - 1 - j  # highest tree still populated
            candidates = sorted({v for e in remaining[top - 1] for v in e.pair})
            chosen = None
            for x in candidates:
                chain = []
                for level in range(top, 0, -1):
                    hits = [e for e in remaining[level - 1] if x in e.pair]
                    if len(hits) != 1:
                        break
                    chain.append(hits[0])
                else:
                    chosen = (x, chain)
                    break
            if chosen is None:
                raise StructureError("structure is not a regular vine; cannot encode as matrix")
            x, chain = chosen
            m[j, j] = x
            for level, e in zip(range(top, 0, -1), chain):
                row = d - level
                m[row, j] = e.b if e.a == x else e.a
                remaining[level - 1].remove(e)
        m[d - 1, d - 1] = next(v for v in range(1, d + 1) if v not in set(np.diag(m)[: d - 1]))
        return m

    @classmethod
    def from_matrix(cls, m, check=True):
        m = np.asarray(m, dtype=int)
        d = m.shape[0]
        trees = [[] for _ in range(d - 1)]
        for j in range(d - 1):
            for i in range(j + 1, d):
                trees[d - i - 1].append(Edge(m[j, j], m[i, j], tuple(m[i + 1:, j])))
        return cls(d, trees, check=check)

    def order(self):
        """Variables in simulation order (first simulated first)."""
        return [int(x) for x in np.diag(self.to_matrix())[::-1]]


def validate(s):
    """
    Check tree counts, tree-ness and the proximity condition.

    Returns a ``ValidationReport`` that is truthy when the structure is a
    regular vine; otherwise it names the first violated rule and tree level.
    """
    d = s.d
    if d < 2:
        return ValidationReport(False, "dimension", 0, f"need d >= 2, got {d}")
    for k, tree in enumerate(s.trees, start=1):
        for e in tree:
            if e.level != k:
                return ValidationReport(False, "edge-level", k,
                                        f"edge {e} has |D| = {len(e.cond)}, expected {k - 1} in tree {k}")
            if not e.constraint <= set(range(1, d + 1)):
                return ValidationReport(False, "variables", k, f"edge {e} uses variables outside 1..{d}")
    return _check_joins(d, [[_edge_joins(e) for e in t] for t in s.trees])


def dvine(d, order=None):
    """D-vine (path) structure; ``order`` defaults to 1..d."""
    if d < 2:
        raise StructureError(f"need d >= 2, got {d}")
    order = list(range(1, d + 1)) if order is None else [int(x) for x in order]
    if sorted(order) != list(range(1, d + 1)):
        raise StructureError(f"order must be a permutation of 1..{d}")
    trees = [[Edge(order[i], order[i + k], tuple(order[i + 1:i + k])) for i in range(d - k)]
             for k in range(1, d)]
    return RVineStructure(d, trees)


def cvine(d, root=1, order=None):
    """
    C-vine (star) structure. Tree k is a star centred on the k-th variable of
    ``order``; by default the order is ``root`` followed by the others in
    increasing label order.
    """
    if d < 2:
        raise StructureError(f"need d >= 2, got {d}")
    if order is None:
        order = [root] + [v for v in range(1, d + 1) if v != root]
    order = [int(x) for x in order]
    if sorted(order) != list(range(1, d + 1)):
        raise StructureError(f"order must be a permutation of 1..{d}")
    trees = []
    for k in range(1, d):
        centre, cond = order[k - 1], tuple(order[: k - 1])
        trees.append([Edge(centre, other, cond) for other in order[k:]])
    return RVineStructure(d, trees)


def edges_of(s, k):
    return s.edges_of(k)


def all_pairs(d):
    return [Edge(a, b) for a, b in combinations(range(1, d + 1), 2)]
