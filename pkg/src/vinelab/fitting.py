"""
Sequential (tree-by-tree) maximum likelihood for simplified vines.

Tree 1 is fitted on the raw columns; tree k > 1 on pseudo-observations built
from the *fitted* lower-tree h-functions, which makes the result the sample
analogue of the partial vine copula.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import kendalltau, norm

from .copulas import (INDEPENDENCE, PairCopula, TauRangeError, clamp, family_name,
                      tau_range, tau_to_param)
from .model import VineModel, _key
from .structure import Edge, RVineStructure, join, validate


class FitError(RuntimeError):
    pass


DEFAULT_FAMILIES = ("indep", "gaussian", "clayton", "gumbel", "frank")

# parameter search bounds used by the optimizer
_PAR_BOUNDS = {
    "gaussian": (-0.9999, 0.9999),
    "clayton": (1e-6, 60.0),
    "gumbel": (1.0, 60.0),
    "frank": (-120.0, 120.0),
    "amh": (-0.99999, 0.99999),
}


@dataclass(frozen=True)
class FitConfig:
    """
    family_set : families to consider; independence is always available.
    rotations : allow 90/180/270 degree rotations of asymmetric families.
    criterion : "aic" or "loglik".
    structure : an ``RVineStructure`` or ``"auto"`` for maximum-spanning-tree
        selection.
    indep_test : optional level of a Kendall's tau independence pre-test;
        when the test does not reject, independence is chosen without
        comparing criteria. ``None`` (default) uses the criterion alone.
    """

    family_set: tuple = DEFAULT_FAMILIES
    rotations: bool = True
    criterion: str = "aic"
    structure: object = "auto"
    indep_test: object = None

    def __post_init__(self):
        fams = tuple(dict.fromkeys(family_name(f) for f in self.family_set))
        if not fams:
            raise ValueError("family_set must not be empty")
        object.__setattr__(self, "family_set", fams)
        crit = self.criterion.lower()
        if crit not in ("aic", "loglik"):
            raise ValueError(f"criterion must be 'aic' or 'loglik', got {self.criterion!r}")
        object.__setattr__(self, "criterion", crit)
        if self.indep_test is not None and not 0.0 < float(self.indep_test) < 1.0:
            raise ValueError(f"indep_test must be a level in (0, 1), got {self.indep_test}")


@dataclass
class PairFit:
    copula: PairCopula
    loglik: float
    aic: float
    tau_hat: float
    empirical_tau: float
    n: int
    candidates: list = field(default_factory=list)

    def to_dict(self):
        return {
            "copula": self.copula.to_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "tau": self.tau_hat,
            "empirical_tau": self.empirical_tau,
            "n": self.n,
        }


@dataclass
class FitReport:
    fitted: VineModel
    edges: dict
    structure_source: str
    config: FitConfig

    @property
    def loglik(self):
        return float(sum(f.loglik for f in self.edges.values()))

    @property
    def aic(self):
        return float(sum(f.aic for f in self.edges.values()))

    def to_dict(self):
        return {
            "structure_source": self.structure_source,
            "criterion": self.config.criterion,
            "family_set": list(self.config.family_set),
            "indep_test": self.config.indep_test,
            "loglik": self.loglik,
            "aic": self.aic,
            "edges": [{"tree": e.level, **e.to_dict(), **fit.to_dict()}
                      for e, fit in self.edges.items()],
            "model": self.fitted.to_dict(),
        }

    def table(self):
        rows = []
        for e, fit in self.edges.items():
            rows.append({"tree": e.level, "edge": str(e), "family": fit.copula.family,
                         "rotation": fit.copula.rotation,
                         "param": fit.copula.params[0] if fit.copula.params else "",
                         "tau": fit.tau_hat, "empirical_tau": fit.empirical_tau,
                         "loglik": fit.loglik, "aic": fit.aic})
        return rows


def empirical_tau(s):
    """Sample Kendall's tau-b of an (n, 2) array."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValueError("expected an (n, 2) array")
    if s.shape[0] < 2:
        raise ValueError("need at least 2 observations for Kendall's tau")
    tau = kendalltau(s[:, 0], s[:, 1]).statistic
    return 0.0 if np.isnan(tau) else float(tau)


def tau_independence_pvalue(tau, n):
    """Two-sided p-value of the asymptotic normal test of tau = 0."""
    z = 3.0 * tau * np.sqrt(n * (n - 1.0)) / np.sqrt(2.0 * (2.0 * n + 5.0))
    return float(2.0 * norm.sf(abs(z)))


def _candidate_rotations(family, tau, allow):
    if family in ("clayton", "gumbel"):
        if not allow:
            return (0,)
        return (0, 180) if tau >= 0.0 else (90, 270)
    return (0,)


def _fit_one(family, rotation, u, v, tau):
    """1-d maximum likelihood for one family/rotation; returns (copula, loglik)."""
    lo, hi = _PAR_BOUNDS[family]

    def negll(th):
        with np.errstate(all="ignore"):
            val = -np.sum(PairCopula(family, th, rotation).logpdf(u, v))
        return val if np.isfinite(val) else 1e300

    # start from tau inversion, clipped into the attainable range
    t_lo, t_hi = tau_range(family, rotation)
    t0 = float(np.clip(tau, t_lo + 0.02 * (t_hi - t_lo), t_hi - 0.02 * (t_hi - t_lo)))
    if t0 == 0.0:
        t0 = 0.01 if t_hi > 0 else -0.01
    try:
        th0 = tau_to_param(family, t0).par
    except TauRangeError:
        th0 = 0.5 * (lo + hi)
    th0 = float(np.clip(th0, lo, hi))
    if family in ("frank", "amh"):
        # these densities are undefined (frank) or trivial (amh) at 0; stay on one side
        lo, hi = (1e-6, hi) if th0 > 0 else (lo, -1e-6)

    # bracket around the start value, widened when the optimum hits an inner edge
    width = 0.25 * (hi - lo)
    a, b = max(lo, th0 - width), min(hi, th0 + width)
    if family in ("clayton", "gumbel"):
        a, b = max(lo, th0 / 2.0), min(hi, 2.0 * th0 + 1.0)
    for _ in range(20):
        res = minimize_scalar(negll, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-8, "maxiter": 500})
        x, span = res.x, b - a
        if x - a < 1e-4 * span and a > lo:
            a, b = max(lo, a - 2.0 * span), a + 0.1 * span
        elif b - x < 1e-4 * span and b < hi:
            a, b = b - 0.1 * span, min(hi, b + 2.0 * span)
        else:
            break
    if not res.fun < 1e300:
        raise FitError(f"{family} likelihood not finite")
    pc = PairCopula(family, res.x, rotation)
    return pc, -float(res.fun)


def fit_pair(s, cfg=None):
    """
    Select and fit a pair copula by maximum likelihood.

    Every family/rotation in ``cfg`` gets a 1-d MLE; the best by AIC (or
    log-likelihood) is returned as a ``PairFit``.
    """
    cfg = cfg or FitConfig()
    s = clamp(np.asarray(s, dtype=float))
    n = s.shape[0]
    if n < 10:
        raise FitError(f"need at least 10 observations to fit a pair copula, got {n}")
    u, v = s[:, 0], s[:, 1]
    tau = empirical_tau(s)
    candidates = [(INDEPENDENCE, 0.0)]
    errors = []
    skip = cfg.indep_test is not None and tau_independence_pvalue(tau, n) > cfg.indep_test
    for fam in () if skip else cfg.family_set:
        if fam == "indep":
            continue
        for rot in _candidate_rotations(fam, tau, cfg.rotations):
            try:
                candidates.append(_fit_one(fam, rot, u, v, tau))
            except (FitError, ValueError, FloatingPointError) as exc:
                errors.append(f"{fam}/{rot}: {exc}")
    if len(candidates) == 1 and errors:
        raise FitError("all candidate fits failed: " + "; ".join(errors))
    scored = []
    for pc, ll in candidates:
        aic = -2.0 * ll + 2.0 * pc.n_params
        score = aic if cfg.criterion == "aic" else -ll
        scored.append((score, pc.n_params, pc, ll, aic))
    # ties favour fewer parameters, then candidate order
    best = min(scored, key=lambda t: (t[0], t[1]))
    _, _, pc, ll, aic = best
    return PairFit(pc, ll, aic, float(pc.tau()), tau, n,
                   [{"copula": c.to_dict(), "loglik": l, "aic": a} for _, _, c, l, a in scored])


def _pseudo(cache, e):
    return np.column_stack([cache[_key(e.a, e.cond)], cache[_key(e.b, e.cond)]])


def _update_cache(cache, e, pc):
    x, y = cache[_key(e.a, e.cond)], cache[_key(e.b, e.cond)]
    cache[_key(e.a, e.cond + (e.b,))] = pc.hfunc2(x, y)
    cache[_key(e.b, e.cond + (e.a,))] = pc.hfunc1(x, y)


def _max_spanning_tree(nodes, candidates):
    """
    Kruskal on ``candidates`` = [(weight, tie_key, n1, n2, payload)], maximizing
    weight; ties go to the lexicographically smallest ``tie_key``.
    """
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for w, key, n1, n2, payload in sorted(candidates, key=lambda c: (-c[0], c[1])):
        r1, r2 = find(n1), find(n2)
        if r1 != r2:
            parent[r1] = r2
            chosen.append(payload)
    return chosen


def fit_vine(s, cfg=None):
    """
    Fit a simplified vine tree by tree.

    With ``cfg.structure == "auto"`` each tree is the maximum spanning tree
    of |empirical tau| over the admissible edges (Dissmann's algorithm);
    otherwise the given structure is used.
    """
    cfg = cfg or FitConfig()
    s = clamp(np.atleast_2d(np.asarray(s, dtype=float)))
    n, d = s.shape
    if d < 2:
        raise ValueError("need at least two columns")
    fixed = cfg.structure if isinstance(cfg.structure, RVineStructure) else None
    if fixed is not None:
        if fixed.d != d:
            raise ValueError(f"structure has dimension {fixed.d}, data has {d} columns")
        report = validate(fixed)
        if not report:
            raise ValueError(f"invalid structure: {report.message}")
    elif cfg.structure != "auto":
        raise ValueError(f"structure must be an RVineStructure or 'auto', got {cfg.structure!r}")

    cache = {_key(i + 1, ()): s[:, i] for i in range(d)}
    fits = {}
    trees = []
    prev_edges = None
    for k in range(1, d):
        if fixed is not None:
            edges = fixed.edges_of(k)
        else:
            if k == 1:
                cands = [Edge(a, b) for a in range(1, d + 1) for b in range(a + 1, d + 1)]
                nodes = [frozenset([i]) for i in range(1, d + 1)]
                ends = {e: (frozenset([e.a]), frozenset([e.b])) for e in cands}
            else:
                nodes = [e.constraint for e in prev_edges]
                cands, ends = [], {}
                for i in range(len(prev_edges)):
                    for j in range(i + 1, len(prev_edges)):
                        e = join(prev_edges[i], prev_edges[j])
                        # proximity: the two edges must share a node of the previous tree
                        if e is None or not _share_node(prev_edges[i], prev_edges[j]):
                            continue
                        cands.append(e)
                        ends[e] = (prev_edges[i].constraint, prev_edges[j].constraint)
            weighted = [(abs(empirical_tau(_pseudo(cache, e))), (e.pair, e.cond), *ends[e], e)
                        for e in cands]
            edges = sorted(_max_spanning_tree(nodes, weighted))
        for e in edges:
            try:
                fit = fit_pair(_pseudo(cache, e), cfg)
            except FitError as exc:
                raise FitError(f"edge {e}: {exc}") from exc
            fits[e] = fit
            _update_cache(cache, e, fit.copula)
        trees.append(edges)
        prev_edges = edges
    structure = fixed if fixed is not None else RVineStructure(d, trees, check=True)
    model = VineModel(structure, {e: f.copula for e, f in fits.items()})
    ordered = {e: fits[e] for e in structure.edges()}
    return FitReport(model, ordered, "fixed" if fixed is not None else "auto", cfg)


def _share_node(e1, e2):
    if e1.level == 1:
        return bool(set(e1.pair) & set(e2.pair))
    n1 = {frozenset(e1.cond) | {e1.a}, frozenset(e1.cond) | {e1.b}}
    n2 = {frozenset(e2.cond) | {e2.a}, frozenset(e2.cond) | {e2.b}}
    return bool(n1 & n2)


def fit_sequential(s, structure, cfg=None):
    """Sequential fit on a fixed structure."""
    cfg = cfg or FitConfig()
    cfg = FitConfig(cfg.family_set, cfg.rotations, cfg.criterion, structure, cfg.indep_test)
    return fit_vine(s, cfg)


def select_structure(s, cfg=None):
    """Dissmann-style structure selection; returns the ``RVineStructure``."""
    cfg = cfg or FitConfig()
    s = np.atleast_2d(np.asarray(s, dtype=float))
    if s.shape[0] < 10:
        raise FitError(f"need at least 10 observations, got {s.shape[0]}")
    cfg = FitConfig(cfg.family_set, cfg.rotations, cfg.criterion, "auto", cfg.indep_test)
    return fit_vine(s, cfg).fitted.structure
