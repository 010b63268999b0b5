"""
Ground-truth models that violate the simplifying assumption.

All copula-scale models expose ``d``, ``label``, ``log_density(u)``,
``density(u)`` and ``simulate(n, rng)``.
"""
import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .copulas import INDEPENDENCE, PairCopula, _bisect_increasing, clamp, tau_to_param
from .model import VineModel, forward, inverse_rosenblatt
from .structure import StructureError, cvine, dvine


class GroundTruthModel:
    """Base class; subclasses implement ``log_density`` and ``simulate``."""

    d = None
    label = ""

    def log_density(self, u):
        raise NotImplementedError

    def density(self, u):
        return np.exp(self.log_density(u))

    def exact_density(self, u):
        return self.density(u)

    def simulate(self, n, rng):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r})"


# ---------------------------------------------------------------------------
# exchangeable trivariate Archimedean copulas


class _FrankGenerator:
    def __init__(self, eta):
        self.eta = eta
        self.a = -np.expm1(-eta)

    def phi(self, u):
        return -np.log(np.expm1(-self.eta * u) / np.expm1(-self.eta))

    def log_neg_dphi(self, u):
        # phi'(u) = eta e^{-eta u} / expm1(-eta u) < 0
        return np.log(self.eta) - self.eta * u - np.log(-np.expm1(-self.eta * u))

    def psi_d(self, t, order):
        """Signed derivative of the inverse generator, order 1..3."""
        z = self.a * np.exp(-t)
        if order == 1:
            return -z / (1.0 - z) / self.eta
        if order == 2:
            return z / (1.0 - z) ** 2 / self.eta
        return -z * (1.0 + z) / (1.0 - z) ** 3 / self.eta


class _AMHGenerator:
    def __init__(self, eta):
        self.eta = eta

    def phi(self, u):
        return np.log((1.0 - self.eta * (1.0 - u)) / u)

    def log_neg_dphi(self, u):
        return np.log1p(-self.eta) - np.log(u) - np.log(1.0 - self.eta * (1.0 - u))

    def psi_d(self, t, order):
        e = np.exp(-t)
        w = self.eta * e
        c = (1.0 - self.eta) * e
        if order == 1:
            return -c / (1.0 - w) ** 2
        if order == 2:
            return c * (1.0 + w) / (1.0 - w) ** 3
        return -c * (1.0 + 4.0 * w + w**2) / (1.0 - w) ** 4


class TrivariateArchimedean(GroundTruthModel):
    """
    Exchangeable trivariate Frank or AMH copula.

    Its bivariate margins are the same family with the same parameter, and
    the conditional copula of (U1, U2) given U3 = u3 is available in closed
    form through ``conditional_copula``.
    """

    d = 3

    def __init__(self, family, eta):
        family = family.lower()
        eta = float(eta)
        if family == "frank":
            if not eta > 0.0 or not np.isfinite(eta):
                raise ValueError(f"trivariate frank needs eta > 0, got {eta}")
            self.gen = _FrankGenerator(eta)
        elif family == "amh":
            if not 0.0 < eta < 1.0:
                raise ValueError(f"trivariate amh needs eta in (0, 1), got {eta}")
            self.gen = _AMHGenerator(eta)
        else:
            raise ValueError(f"unsupported trivariate family {family!r}")
        self.family = family
        self.eta = eta
        self.label = f"{family}3:{eta:g}"

    @property
    def margin(self):
        """The common bivariate margin as a pair copula."""
        return PairCopula(self.family, self.eta)

    def log_density(self, u):
        u = clamp(np.atleast_2d(u))
        s = self.gen.phi(u).sum(axis=1)
        return np.log(-self.gen.psi_d(s, 3)) + self.gen.log_neg_dphi(u).sum(axis=1)

    def log_margin_density(self, ui, uj):
        ui, uj = clamp(ui), clamp(uj)
        s = self.gen.phi(ui) + self.gen.phi(uj)
        return np.log(self.gen.psi_d(s, 2)) + self.gen.log_neg_dphi(ui) + self.gen.log_neg_dphi(uj)

    def cond_cdf_1_given_3(self, u1, u3):
        """P(U1 <= u1 | U3 = u3) from the generator."""
        u1, u3 = clamp(u1), clamp(u3)
        p3 = self.gen.phi(u3)
        return self.gen.psi_d(self.gen.phi(u1) + p3, 1) / self.gen.psi_d(p3, 1)

    def cond_cdf_2_given_13(self, u2, u1, u3):
        """P(U2 <= u2 | U1 = u1, U3 = u3) from the generator."""
        u1, u2, u3 = clamp(u1), clamp(u2), clamp(u3)
        s13 = self.gen.phi(u1) + self.gen.phi(u3)
        return self.gen.psi_d(s13 + self.gen.phi(u2), 2) / self.gen.psi_d(s13, 2)

    def simulate(self, n, rng):
        w = rng.random((n, 3))
        return self.inverse_rosenblatt(w)

    def inverse_rosenblatt(self, w):
        w = np.atleast_2d(w)
        u3 = w[:, 2]
        u1 = _bisect_increasing(lambda x: self.cond_cdf_1_given_3(x, u3), w[:, 0])
        u2 = _bisect_increasing(lambda x: self.cond_cdf_2_given_13(x, u1, u3), w[:, 1])
        return np.column_stack([u1, u2, u3])

    def conditional_parameter(self, u3):
        u3 = np.asarray(u3, dtype=float)
        if self.family == "frank":
            return np.minimum(-np.expm1(-self.eta * u3), _AMH_MAX)
        return u3 * self.eta / (1.0 - self.eta + u3 * self.eta)

    def conditional_copula(self, u3):
        """Closed-form copula of (U1, U2) given U3 = u3 (an AMH copula)."""
        par = float(self.conditional_parameter(u3))
        return INDEPENDENCE if par == 0.0 else PairCopula("amh", par)

    def exact_conditional_tau(self, u3):
        """
        Kendall's tau of the conditional copula of (U1, U2) given U3 = u3,
        from the generator alone. That copula is Archimedean with inverse
        generator s -> psi'(s + phi(u3)) / psi'(phi(u3)), so
        tau = 1 - 4 * int_0^inf s * (d/ds of it)^2 ds.
        """
        p3 = float(self.gen.phi(clamp(float(u3))))
        scale = float(self.gen.psi_d(p3, 1))
        val, _ = quad(lambda t: t * (float(self.gen.psi_d(t + p3, 2)) / scale) ** 2,
                      0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=200)
        return 1.0 - 4.0 * val

    def numerical_conditional_density(self, x, y, u3):
        """
        Conditional copula density of (U1, U2) given U3 = u3 at (x, y),
        computed only from the trivariate density and its margins: the
        arguments are mapped back through the conditional CDFs of U1 and U2
        given U3 and the trivariate density is divided by the two bivariate
        margin densities.
        """
        x, y, u3 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, u3)))
        u1 = _bisect_increasing(lambda t: self.cond_cdf_1_given_3(t, u3), x)
        u2 = _bisect_increasing(lambda t: self.cond_cdf_1_given_3(t, u3), y)
        pts = np.column_stack([u1.ravel(), u2.ravel(), u3.ravel()])
        logc = (self.log_density(pts) - self.log_margin_density(pts[:, 0], pts[:, 2])
                - self.log_margin_density(pts[:, 1], pts[:, 2]))
        return np.exp(logc).reshape(x.shape)


def trivariate_frank(eta):
    return TrivariateArchimedean("frank", eta)


def trivariate_amh(eta):
    return TrivariateArchimedean("amh", eta)


_AMH_MAX = np.nextafter(1.0, 0.0)


def conditional_copula_frank(eta, u3):
    """
    AMH copula with parameter 1 - exp(-eta * u3), capped just below 1 where
    the exponential underflows.
    """
    par = min(float(-np.expm1(-eta * u3)), _AMH_MAX)
    return INDEPENDENCE if par == 0.0 else PairCopula("amh", par)


def conditional_copula_amh(eta, u3):
    """AMH copula with parameter u3 * eta / (1 - eta + u3 * eta)."""
    par = u3 * eta / (1.0 - eta + u3 * eta)
    return INDEPENDENCE if par == 0.0 else PairCopula("amh", par)


def conditional_tau_curve(curve, grid=None):
    """
    Kendall's tau of a conditional copula along a grid of conditioning values.

    ``curve`` maps a conditioning value to a ``PairCopula``. Returns an
    (m, 2) array of (u, tau) rows. The default grid is 99 equispaced points
    1/100, ..., 99/100.
    """
    grid = np.arange(1, 100) / 100.0 if grid is None else np.asarray(grid, dtype=float)
    if np.any((grid <= 0.0) | (grid >= 1.0)):
        raise ValueError("conditioning grid must lie inside (0, 1)")
    taus = [curve(float(g)).tau() for g in grid]
    return np.column_stack([grid, taus])


# ---------------------------------------------------------------------------
# non-simplified vines


class _SignAdaptiveGumbel:
    """
    Gumbel copula with observation-wise Kendall's tau; observations with
    negative tau use the 90 degree rotation. tau = 0 gives theta = 1, which is
    the independence copula.
    """

    def __init__(self, tau):
        tau = np.asarray(tau, dtype=float)
        theta = 1.0 / (1.0 - np.abs(tau))
        self.neg = tau < 0.0
        self.pos_cop = PairCopula("gumbel", theta, 0)
        self.neg_cop = PairCopula("gumbel", theta, 90)

    def _pick(self, name, *args):
        return np.where(self.neg, getattr(self.neg_cop, name)(*args),
                        getattr(self.pos_cop, name)(*args))

    def logpdf(self, u, v):
        return self._pick("logpdf", u, v)

    def hfunc1(self, u, v):
        return self._pick("hfunc1", u, v)

    def hfunc2(self, u, v):
        return self._pick("hfunc2", u, v)

    def hinv1(self, u, p):
        return self._pick("hinv1", u, p)

    def hinv2(self, v, p):
        return self._pick("hinv2", v, p)


class NonSimplifiedVine(GroundTruthModel):
    """
    Vine decomposition whose pair copulas may depend on the conditioning
    values: ``copula_of(edge, u)`` returns a pair-copula-like object whose
    parameters are functions of the columns of ``u`` in ``edge.cond``.
    """

    def __init__(self, structure, copula_of, label=""):
        self.structure = structure
        self.copula_of = copula_of
        self.d = structure.d
        self.label = label

    def log_density(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[0] == 0:
            return np.zeros(0)
        logdens, _ = forward(self.structure, self.copula_of, u)
        return logdens

    def inverse_rosenblatt(self, w):
        return inverse_rosenblatt(self.structure, self.copula_of, w)

    def simulate(self, n, rng):
        return self.inverse_rosenblatt(rng.random((n, self.d)))


FIG4_STRENGTH = {"strong": 0.9, "moderate": 0.4}


def fig4_structure():
    """C-vine on 4 variables: tree 1 star on 1, tree 2 star on (1,4)."""
    return cvine(4, order=[1, 4, 2, 3])


def fig4_conditional_copula(strength, u1):
    """Second-tree copula given U1 = u1 (scalar), as a PairCopula."""
    s = FIG4_STRENGTH.get(strength, strength)
    return tau_to_param("gumbel", float(s) * (2.0 * u1 - 1.0))


def fig4_model(strength="strong"):
    """
    Four-variable non-simplified vine: first tree c12 = c13 = c14 Gumbel with
    tau 0.5; second tree c24|1 = c34|1 Gumbel with tau s * (2 u1 - 1),
    rotated by 90 degrees where negative; c23|14 independence.
    """
    if strength not in FIG4_STRENGTH:
        raise ValueError(f"strength must be one of {sorted(FIG4_STRENGTH)}, got {strength!r}")
    s = FIG4_STRENGTH[strength]
    first = tau_to_param("gumbel", 0.5)

    def copula_of(edge, u):
        if edge.level == 1:
            return first
        if edge.level == 2:
            return _SignAdaptiveGumbel(s * (2.0 * clamp(u[:, 0]) - 1.0))
        return INDEPENDENCE

    return NonSimplifiedVine(fig4_structure(), copula_of, label=f"fig4-{strength}")


def fig2_true_model():
    """D-vine 1-2-3 with all three pair copulas Gumbel, tau = 0.8."""
    g = tau_to_param("gumbel", 0.8)
    s = dvine(3)
    return VineModel(s, {e: g for e in s.edges()})


def fig2_mismatched_decomposition():
    """D-vine 1-3-2, whose explicit conditional copula is c_{1,2|3}."""
    return dvine(3, order=[1, 3, 2])


# ---------------------------------------------------------------------------


class GaussianRegression(GroundTruthModel):
    """
    Y = X1 + X2 * eps with (X1, X2, eps) independent standard normals.

    Works on the data scale; columns are ordered (Y, X1, X2).
    """

    d = 3
    label = "gauss-regression"
    columns = ("y", "x1", "x2")
    simplified_covariance = np.array([[2.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    @staticmethod
    def conditional_correlation(x2):
        """Correlation of (Y, X1) given X2 = x2."""
        return 1.0 / np.sqrt(1.0 + np.asarray(x2, dtype=float) ** 2)

    @staticmethod
    def regression_fn(x1, x2):
        x1, _ = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return x1.copy()

    def simulate(self, n, rng):
        z = rng.standard_normal((n, 3))
        x1, x2, eps = z[:, 0], z[:, 1], z[:, 2]
        return np.column_stack([x1 + x2 * eps, x1, x2])

    def log_density(self, x):
        x = np.atleast_2d(x)
        y, x1, x2 = x[:, 0], x[:, 1], x[:, 2]
        scale = np.maximum(np.abs(x2), 1e-300)
        return norm.logpdf(y, loc=x1, scale=scale) + norm.logpdf(x1) + norm.logpdf(x2)

    @staticmethod
    def y_cdf(y):
        """Marginal CDF of Y by Gauss-Hermite quadrature over X2."""
        nodes, weights = np.polynomial.hermite_e.hermegauss(120)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        vals = norm.cdf(y[:, None] / np.sqrt(1.0 + nodes[None, :] ** 2))
        return vals @ weights / np.sqrt(2.0 * np.pi)

    def simplified_log_density(self, x):
        from scipy.stats import multivariate_normal

        return multivariate_normal(cov=self.simplified_covariance).logpdf(np.atleast_2d(x))


def gaussian_regression_example():
    return GaussianRegression()


# ---------------------------------------------------------------------------

BUILTINS = ("fig2-true", "fig2-mismatch", "fig4-strong", "fig4-moderate",
            "frank3:<eta>", "amh3:<eta>", "gauss-regression")


def builtin(name):
    """
    Resolve a builtin model identifier. ``fig2-mismatch`` names the same
    distribution as ``fig2-true`` (it differs only in the decomposition used
    to view it; see ``fig2_mismatched_decomposition``).
    """
    key = name.strip().lower()
    if key in ("fig2-true", "fig2-mismatch"):
        return fig2_true_model()
    if key in ("fig4-strong", "fig4-moderate"):
        return fig4_model(key.split("-")[1])
    if key == "gauss-regression":
        return gaussian_regression_example()
    for prefix, factory in (("frank3:", trivariate_frank), ("amh3:", trivariate_amh)):
        if key.startswith(prefix):
            try:
                eta = float(key[len(prefix):])
            except ValueError:
                raise ValueError(f"bad parameter in builtin model {name!r}") from None
            return factory(eta)
    raise KeyError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")


def builtin_structure(name):
    key = name.strip().lower()
    if key == "fig2-true":
        return dvine(3)
    if key == "fig2-mismatch":
        return fig2_mismatched_decomposition()
    if key in ("fig4-strong", "fig4-moderate", "fig4"):
        return fig4_structure()
    raise StructureError(f"no builtin structure named {name!r}")


def gaussian_copula_sample(corr, n, rng):
    """Sample from the Gaussian copula with correlation matrix ``corr``."""
    from scipy.special import ndtr

    z = rng.multivariate_normal(np.zeros(len(corr)), corr, size=n, method="cholesky")
    return ndtr(z)
