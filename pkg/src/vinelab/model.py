"""
Simplified vine copula models on the copula scale.

The recursion engine (``forward`` and ``inverse_rosenblatt``) takes a
callback ``copula_of(edge, u)`` returning the pair copula for an edge. For a
simplified vine that is a lookup; non-simplified ground-truth models return
copulas whose parameters depend on the conditioning columns of ``u``.
"""
import numpy as np

from .copulas import INDEPENDENCE, PairCopula, clamp
from .structure import Edge, RVineStructure, StructureError, validate


def _key(var, cond):
    return (var, frozenset(cond))


def forward(structure, copula_of, u, levels=None):
    """
    Run the h-function recursion over the trees.

    Returns ``(logdens, cache)``: the per-observation log-density and a dict
    mapping ``(var, frozenset(D))`` to the conditional pseudo-observations
    U_{var|D}.
    """
    u = clamp(u)
    n = u.shape[0]
    cache = {_key(i + 1, ()): u[:, i] for i in range(structure.d)}
    logdens = np.zeros(n)
    levels = range(1, structure.d) if levels is None else levels
    for k in levels:
        for e in structure.edges_of(k):
            x, y = cache[_key(e.a, e.cond)], cache[_key(e.b, e.cond)]
            pc = copula_of(e, u)
            logdens += pc.logpdf(x, y)
            cache[_key(e.a, e.cond + (e.b,))] = pc.hfunc2(x, y)
            cache[_key(e.b, e.cond + (e.a,))] = pc.hfunc1(x, y)
    return logdens, cache


def rosenblatt(structure, copula_of, u):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != structure.d:
        raise ValueError(f"expected {structure.d} columns, got {u.shape[1]}")
    if u.shape[0] == 0:
        return np.empty((0, structure.d))
    _, cache = forward(structure, copula_of, u)
    m = structure.to_matrix()
    d = structure.d
    w = np.empty_like(u)
    for j in range(d):
        x = m[j, j]
        w[:, x - 1] = cache[_key(x, m[j + 1:, j])]
    return w


def inverse_rosenblatt(structure, copula_of, w):
    """Map independent uniforms ``w`` (column i drives variable i) to the model."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    d = structure.d
    if w.shape[1] != d:
        raise ValueError(f"expected {d} columns, got {w.shape[1]}")
    n = w.shape[0]
    if n == 0:
        return np.empty((0, d))
    m = structure.to_matrix()
    u = np.full((n, d), 0.5)
    cache = {}
    for j in range(d - 1, -1, -1):
        x = m[j, j]
        # chain of edges for column j, from tree 1 (bottom row) upwards
        chain = [Edge(x, m[i, j], tuple(m[i + 1:, j])) for i in range(d - 1, j, -1)]
        partners = [m[i, j] for i in range(d - 1, j, -1)]
        p = clamp(w[:, x - 1])
        for e, c in zip(reversed(chain), reversed(partners)):
            cache[_key(x, e.cond + (c,))] = p
            y = cache[_key(c, e.cond)]
            pc = copula_of(e, u)
            p = pc.hinv2(y, p) if x == e.a else pc.hinv1(y, p)
        cache[_key(x, ())] = p
        u[:, x - 1] = p
        for e, c in zip(chain, partners):
            pc = copula_of(e, u)
            ux, uc = cache[_key(x, e.cond)], cache[_key(c, e.cond)]
            if x == e.a:
                cache[_key(c, e.cond + (x,))] = pc.hfunc1(ux, uc)
            else:
                cache[_key(c, e.cond + (x,))] = pc.hfunc2(uc, ux)
    return u


class VineModel:
    """
    Simplified vine copula: a regular vine structure and one pair copula per
    edge. Edges not listed in ``pairs`` default to independence.
    """

    def __init__(self, structure, pairs=None, check=True):
        if check:
            report = validate(structure)
            if not report:
                raise StructureError(report.message, report)
        self.structure = structure
        pairs = dict(pairs or {})
        edges = set(structure.edges())
        unknown = [str(e) for e in pairs if e not in edges]
        if unknown:
            raise StructureError(f"pair copulas given for edges not in the structure: {unknown}")
        self.pairs = {e: pairs.get(e, INDEPENDENCE) for e in structure.edges()}

    @property
    def d(self):
        return self.structure.d

    def __repr__(self):
        body = ", ".join(f"{e}: {pc}" for e, pc in self.pairs.items())
        return f"VineModel(d={self.d}, {{{body}}})"

    def _copula_of(self, edge, u):
        return self.pairs[edge]

    def _check(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.d:
            raise ValueError(f"model has dimension {self.d}, data has {u.shape[1]} columns")
        return u

    def log_density(self, u):
        """Log copula density at each row of ``u``."""
        u = self._check(u)
        if u.shape[0] == 0:
            return np.zeros(0)
        logdens, _ = forward(self.structure, self._copula_of, u)
        return logdens

    def density(self, u):
        return np.exp(self.log_density(u))

    def loglik(self, u):
        return float(np.sum(self.log_density(u)))

    def simulate(self, n, rng):
        return self.inverse_rosenblatt(rng.random((n, self.d)))

    def rosenblatt(self, u):
        return rosenblatt(self.structure, self._copula_of, self._check(u))

    def inverse_rosenblatt(self, w):
        return inverse_rosenblatt(self.structure, self._copula_of, self._check(w))

    def pseudo_obs(self, u, edge):
        """The (n, 2) conditional pseudo-observations entering ``edge``."""
        if isinstance(edge, str):
            edge = Edge.parse(edge)
        if edge not in self.pairs:
            raise KeyError(f"edge {edge} is not part of the structure")
        u = self._check(u)
        _, cache = forward(self.structure, self._copula_of, u, levels=range(1, edge.level))
        return np.column_stack([cache[_key(edge.a, edge.cond)], cache[_key(edge.b, edge.cond)]])

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {
            "structure": self.structure.to_dict(),
            "pairs": [{"tree": e.level, **e.to_dict(), "copula": pc.to_dict()}
                      for e, pc in self.pairs.items()],
        }

    @classmethod
    def from_dict(cls, obj):
        structure = RVineStructure.from_dict(obj["structure"])
        pairs = {}
        for item in obj.get("pairs", []):
            e = Edge.from_dict(item)
            if "tree" in item and int(item["tree"]) != e.level:
                raise StructureError(f"edge {e} listed under tree {item['tree']}")
            pairs[e] = PairCopula.from_dict(item["copula"])
        return cls(structure, pairs)


def independence_model(d):
    from .structure import dvine

    return VineModel(dvine(d))
