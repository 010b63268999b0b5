"""
Simplifying-assumption diagnostics and Monte-Carlo distances between models.

A model argument is anything with ``simulate(n, rng)``; density-based
estimators additionally need ``log_density(u)``.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc, rankdata

from .fitting import FitConfig, empirical_tau, fit_pair


class DiagnosticError(RuntimeError):
    pass


MIN_BIN_COUNT = 30


@dataclass
class BinnedTauReport:
    pair: tuple
    cond: int
    edges: list
    counts: list
    taus: list
    flagged: list
    transform: str
    n: int

    @property
    def range(self):
        vals = [t for t, bad in zip(self.taus, self.flagged) if not bad and np.isfinite(t)]
        return float(max(vals) - min(vals)) if vals else float("nan")

    def to_dict(self):
        out = asdict(self)
        out["pair"] = list(self.pair)
        out["range"] = self.range
        out["taus"] = [None if not np.isfinite(t) else t for t in self.taus]
        return out

    def rows(self):
        return [{"bin": i, "lo": self.edges[i], "hi": self.edges[i + 1], "count": c,
                 "tau": t, "flagged": f}
                for i, (c, t, f) in enumerate(zip(self.counts, self.taus, self.flagged))]


def _h_transform(s, pair, cond, cfg):
    """Conditional pseudo-observations U_{i|k}, U_{j|k} from fitted first-tree copulas."""
    i, j = pair
    k = s[:, cond - 1]
    out = []
    for col in (i, j):
        x = s[:, col - 1]
        # fit on (x, k) so the conditioning variable is the second argument
        pc = fit_pair(np.column_stack([x, k]), cfg).copula
        out.append(pc.hfunc2(x, k))
    return np.column_stack(out)


def conditional_pseudo_obs(s, pair, cond, transform="ranks", cfg=None):
    """
    The (n, 2) pair that gets binned on the conditioning column.

    ``transform="h"`` applies h-functions of pair copulas fitted to
    (i, cond) and (j, cond), giving samples of the conditional copula;
    ``"ranks"`` uses the raw columns i and j.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    d = s.shape[1]
    i, j = (int(x) for x in pair)
    cond = int(cond)
    labels = {i, j, cond}
    if len(labels) != 3 or not labels <= set(range(1, d + 1)):
        raise ValueError(f"pair {pair} and cond {cond} must be distinct columns in 1..{d}")
    if transform == "ranks":
        return s[:, [i - 1, j - 1]]
    if transform == "h":
        return _h_transform(s, (i, j), cond, cfg or FitConfig())
    raise ValueError(f"transform must be 'h' or 'ranks', got {transform!r}")


def _binned(xy, k, edges):
    idx = np.clip(np.searchsorted(edges, k, side="right") - 1, 0, len(edges) - 2)
    counts, taus, flagged = [], [], []
    for b in range(len(edges) - 1):
        sel = idx == b
        m = int(sel.sum())
        counts.append(m)
        if m < 2:
            taus.append(float("nan"))
            flagged.append(True)
            continue
        # ranks scaled by (m + 1); tau is rank-invariant, the scaling is for export
        r = np.column_stack([rankdata(xy[sel, 0]), rankdata(xy[sel, 1])]) / (m + 1.0)
        taus.append(empirical_tau(r))
        flagged.append(m < MIN_BIN_COUNT)
    return counts, taus, flagged


def binned_conditional_tau(s, pair, cond, bins=5, transform="ranks", cfg=None):
    """
    Kendall's tau of the pair within equal-width bins of the conditioning
    column. Bins with fewer than 30 observations are flagged and left out
    of the range statistic.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    bins = int(bins)
    if bins < 1:
        raise ValueError("bins must be positive")
    xy = conditional_pseudo_obs(s, pair, cond, transform, cfg)
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, taus, flagged = _binned(xy, s[:, int(cond) - 1], edges)
    return BinnedTauReport(tuple(int(x) for x in pair), int(cond), edges.tolist(),
                           counts, taus, flagged, transform, s.shape[0])


@dataclass
class PermutationResult:
    statistic: float
    p_value: float
    n_perm: int
    null: list = field(repr=False, default_factory=list)

    def to_dict(self):
        return {"statistic": self.statistic, "p_value": self.p_value, "n_perm": self.n_perm}


def sa_permutation_test(s, pair, cond, bins=5, n_perm=199, rng=None, transform="ranks", cfg=None):
    """
    Permutation test of a constant conditional tau.

    The statistic is the binned-tau range; its null distribution comes from
    permuting the conditioning column against the (transformed) pair.
    p = (1 + #{perm >= observed}) / (1 + n_perm).
    """
    if n_perm < 99:
        raise ValueError("n_perm must be at least 99")
    if rng is None:
        raise ValueError("an explicit random generator is required")
    s = np.atleast_2d(np.asarray(s, dtype=float))
    xy = conditional_pseudo_obs(s, pair, cond, transform, cfg)
    k = s[:, int(cond) - 1]
    edges = np.linspace(0.0, 1.0, int(bins) + 1)

    def stat(kk):
        _, taus, flagged = _binned(xy, kk, edges)
        vals = [t for t, bad in zip(taus, flagged) if not bad]
        return max(vals) - min(vals) if len(vals) > 1 else 0.0

    obs = stat(k)
    null = np.array([stat(rng.permutation(k)) for _ in range(n_perm)])
    p = (1.0 + np.sum(null >= obs)) / (1.0 + n_perm)
    return PermutationResult(float(obs), float(p), int(n_perm), null.tolist())


# ---------------------------------------------------------------------------
# distances


@dataclass
class DivergenceReport:
    metric: str
    estimate: float
    se: float
    n: int
    seed: object = None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _as_sample(x, n, rng):
    if hasattr(x, "simulate"):
        return np.asarray(x.simulate(n, rng), dtype=float)
    return np.atleast_2d(np.asarray(x, dtype=float))


def _ecdf_indicators(sample, points, chunk=256):
    """Boolean (n, m) matrix: sample row <= evaluation point, componentwise."""
    out = np.empty((sample.shape[0], points.shape[0]), dtype=bool)
    for lo in range(0, points.shape[0], chunk):
        p = points[lo:lo + chunk]
        out[:, lo:lo + chunk] = np.all(sample[:, None, :] <= p[None, :, :], axis=2)
    return out


def dinf_estimate(a, b, n=10_000, m_eval=2000, rng=None, n_boot=50, seed=None):
    """
    Sup distance between empirical CDFs of two models (or samples).

    Both CDFs are evaluated at ``m_eval`` points drawn without replacement
    from the pooled sample; the standard error comes from a multinomial
    bootstrap of both samples with fixed evaluation points.
    """
    if rng is None:
        raise ValueError("an explicit random generator is required")
    if n < 1000:
        raise ValueError("n must be at least 1000")
    xa, xb = _as_sample(a, n, rng), _as_sample(b, n, rng)
    if xa.shape[1] != xb.shape[1]:
        raise ValueError(f"dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}")
    pooled = np.vstack([xa, xb])
    m = min(int(m_eval), pooled.shape[0])
    points = pooled[rng.choice(pooled.shape[0], size=m, replace=False)]
    ia, ib = _ecdf_indicators(xa, points), _ecdf_indicators(xb, points)
    fa, fb = ia.mean(axis=0, dtype=np.float64), ib.mean(axis=0, dtype=np.float64)
    ia, ib = ia.astype(np.float32), ib.astype(np.float32)
    est = float(np.max(np.abs(fa - fb)))
    boots = []
    for _ in range(int(n_boot)):
        wa = rng.multinomial(xa.shape[0], np.full(xa.shape[0], 1.0 / xa.shape[0]))
        wb = rng.multinomial(xb.shape[0], np.full(xb.shape[0], 1.0 / xb.shape[0]))
        ga = wa.astype(np.float32) @ ia / xa.shape[0]
        gb = wb.astype(np.float32) @ ib / xb.shape[0]
        boots.append(float(np.max(np.abs(ga - gb))))
    se = float(np.std(boots, ddof=1)) if len(boots) > 1 else float("nan")
    return DivergenceReport("dinf", est, se, int(xa.shape[0]), seed,
                            {"m_eval": m, "n_a": int(xa.shape[0]), "n_b": int(xb.shape[0]),
                             "n_boot": int(n_boot)})


def kl_estimate(truth, model, n=10_000, rng=None, max_nonfinite=1e-3, seed=None):
    """
    Forward KL divergence E_truth[log p_truth - log p_model] by Monte Carlo
    from the truth. Nonfinite log-ratios are dropped and counted; more than
    ``max_nonfinite`` of them raises ``DiagnosticError``.
    """
    if rng is None:
        raise ValueError("an explicit random generator is required")
    if n < 10_000:
        raise ValueError("n must be at least 10000")
    x = np.asarray(truth.simulate(n, rng), dtype=float)
    with np.errstate(all="ignore"):
        r = truth.log_density(x) - model.log_density(x)
    ok = np.isfinite(r)
    bad = int(n - ok.sum())
    if bad > max_nonfinite * n:
        raise DiagnosticError(f"{bad} of {n} log-ratios are not finite")
    r = r[ok]
    return DivergenceReport("kl", float(r.mean()), float(r.std(ddof=1) / np.sqrt(r.size)), n, seed,
                            {"nonfinite": bad})


def integrate_density(model, m=2 ** 18, replicates=4, rng=None):
    """
    Integral of ``exp(log_density)`` over the unit cube by randomized
    quasi-Monte Carlo.

    Sobol points are pushed through the quintic smoothstep map
    t -> t^3 (10 - 15 t + 6 t^2), which concentrates points near the faces
    where copula densities blow up. Returns (mean, standard error) over the
    scrambled replicates.
    """
    if rng is None:
        raise ValueError("an explicit random generator is required")
    d = model.d
    vals = []
    for _ in range(int(replicates)):
        t = qmc.Sobol(d, scramble=True, seed=rng).random(m)
        u = t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)
        logjac = np.sum(np.log(30.0) + 2.0 * np.log(t) + 2.0 * np.log1p(-t), axis=1)
        with np.errstate(all="ignore"):
            f = np.exp(model.log_density(u) + logjac)
        vals.append(float(np.mean(np.where(np.isfinite(f), f, 0.0))))
    vals = np.array(vals)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return float(vals.mean()), se
