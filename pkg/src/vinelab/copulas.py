"""
Bivariate (pair) copula families.

Every family is exchangeable, so only ``h1`` (the derivative of the CDF in
its first argument) and its inverse are implemented per family; the second
argument versions follow by swapping roles. All functions are vectorized
over ``u``, ``v`` and the parameter.

Rotations are reflections of the unit square::

    90  : c(u, v) -> c(1 - u, v)
    180 : c(u, v) -> c(1 - u, 1 - v)
    270 : c(u, v) -> c(u, 1 - v)

so that composing rotations is an XOR of the two axis flips.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri, owens_t

EPS = 1e-10

FAMILIES = ("indep", "gaussian", "clayton", "gumbel", "frank", "amh")
ROTATIONS = (0, 90, 180, 270)

_ALIASES = {
    "independence": "indep",
    "independent": "indep",
    "ind": "indep",
    "normal": "gaussian",
    "gauss": "gaussian",
    "ali-mikhail-haq": "amh",
}

# rotation -> (flip u, flip v)
_FLIPS = {0: (False, False), 90: (True, False), 180: (True, True), 270: (False, True)}
_FLIPS_INV = {value: key for key, value in _FLIPS.items()}


class DomainError(ValueError):
    """Parameter outside the admissible domain of a family."""


class TauRangeError(ValueError):
    """Kendall's tau not attainable by a family."""


def clamp(u):
    return np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)


def _bisect_increasing(f, target, iters=64):
    """Solve ``f(x) = target`` for x in [0, 1], f increasing, elementwise."""
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = f(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# families on the unrotated scale; ``th`` is the scalar or array parameter


class _Independence:
    name = "indep"
    n_par = 0
    bounds = ()

    @staticmethod
    def check(th):
        pass

    @staticmethod
    def cdf(u, v, th):
        return u * v

    @staticmethod
    def logpdf(u, v, th):
        return np.zeros(np.broadcast(u, v).shape)

    @staticmethod
    def h1(u, v, th):
        return np.broadcast_to(v, np.broadcast(u, v).shape).astype(float)

    @staticmethod
    def hinv1(u, p, th):
        return np.broadcast_to(p, np.broadcast(u, p).shape).astype(float)

    @staticmethod
    def tau(th):
        return 0.0

    @staticmethod
    def lambda_lower(th):
        return 0.0

    @staticmethod
    def lambda_upper(th):
        return 0.0


def _bvn_cdf(x, y, rho):
    """Bivariate standard normal CDF through Owen's T function."""
    x, y, rho = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, rho)))
    x = np.where(x == 0.0, 1e-12, x)
    y = np.where(y == 0.0, 1e-12, y)
    r = np.sqrt(1.0 - rho**2)
    ax = (y - rho * x) / (x * r)
    ay = (x - rho * y) / (y * r)
    beta = np.where(x * y < 0.0, 0.5, 0.0)
    out = 0.5 * (ndtr(x) + ndtr(y)) - owens_t(x, ax) - owens_t(y, ay) - beta
    # infinite arguments (u or v at the clamp) are not reachable; keep it tidy
    return np.clip(out, 0.0, 1.0)


class _Gaussian:
    name = "gaussian"
    n_par = 1
    bounds = (-1.0, 1.0)

    @staticmethod
    def check(th):
        if not np.all(np.abs(th) < 1.0):
            raise DomainError(f"gaussian correlation must lie in (-1, 1), got {th}")

    @staticmethod
    def cdf(u, v, th):
        return _bvn_cdf(ndtri(u), ndtri(v), th)

    @staticmethod
    def logpdf(u, v, th):
        x, y = ndtri(u), ndtri(v)
        r2 = 1.0 - th**2
        return -0.5 * np.log(r2) - (th**2 * (x**2 + y**2) - 2.0 * th * x * y) / (2.0 * r2)

    @staticmethod
    def h1(u, v, th):
        x, y = ndtri(u), ndtri(v)
        return ndtr((y - th * x) / np.sqrt(1.0 - th**2))

    @staticmethod
    def h1c(u, v, th):
        x, y = ndtri(u), ndtri(v)
        return ndtr(-(y - th * x) / np.sqrt(1.0 - th**2))

    @staticmethod
    def hinv1(u, p, th):
        return ndtr(th * ndtri(u) + np.sqrt(1.0 - th**2) * ndtri(p))

    @staticmethod
    def hinv1c(u, q, th):
        return ndtr(th * ndtri(u) - np.sqrt(1.0 - th**2) * ndtri(q))

    @staticmethod
    def tau(th):
        return 2.0 / np.pi * np.arcsin(th)

    @staticmethod
    def param(tau):
        return np.sin(np.pi * tau / 2.0)

    @staticmethod
    def lambda_lower(th):
        return 0.0

    lambda_upper = lambda_lower


def _log_sum_minus_one(a, b):
    """log(exp(a) + exp(b) - 1) for a, b >= 0."""
    m = np.maximum(a, b)
    return m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))


class _Clayton:
    name = "clayton"
    n_par = 1
    bounds = (0.0, np.inf)

    @staticmethod
    def check(th):
        if not np.all(th > 0.0) or not np.all(np.isfinite(th)):
            raise DomainError(f"clayton parameter must be positive, got {th}")

    @staticmethod
    def _log_s(u, v, th):
        return _log_sum_minus_one(-th * np.log(u), -th * np.log(v))

    @classmethod
    def cdf(cls, u, v, th):
        return np.exp(-cls._log_s(u, v, th) / th)

    @classmethod
    def logpdf(cls, u, v, th):
        return (np.log1p(th) - (1.0 + th) * (np.log(u) + np.log(v))
                - (2.0 + 1.0 / th) * cls._log_s(u, v, th))

    @staticmethod
    def _log_h1(u, v, th):
        # h = (1 + a)^(-1 - 1/th) with a = u^th (v^-th - 1)
        log_a = th * np.log(u) + np.log(np.expm1(-th * np.log(v)))
        return -(1.0 + 1.0 / th) * np.logaddexp(0.0, log_a)

    @classmethod
    def h1(cls, u, v, th):
        return np.exp(cls._log_h1(u, v, th))

    @classmethod
    def h1c(cls, u, v, th):
        return -np.expm1(cls._log_h1(u, v, th))

    @staticmethod
    def _hinv_logp(u, log_p, th):
        c = -th / (1.0 + th) * log_p
        log_x = -th * np.log(u) + np.log(np.expm1(c))
        return np.exp(-np.logaddexp(log_x, 0.0) / th)

    @classmethod
    def hinv1(cls, u, p, th):
        return cls._hinv_logp(u, np.log(p), th)

    @classmethod
    def hinv1c(cls, u, q, th):
        return cls._hinv_logp(u, np.log1p(-q), th)

    @staticmethod
    def tau(th):
        return th / (th + 2.0)

    @staticmethod
    def param(tau):
        return 2.0 * tau / (1.0 - tau)

    @staticmethod
    def lambda_lower(th):
        return 2.0 ** (-1.0 / th)

    @staticmethod
    def lambda_upper(th):
        return 0.0


class _Gumbel:
    name = "gumbel"
    n_par = 1
    bounds = (1.0, np.inf)

    @staticmethod
    def check(th):
        if not np.all(th >= 1.0) or not np.all(np.isfinite(th)):
            raise DomainError(f"gumbel parameter must be >= 1, got {th}")

    @staticmethod
    def _parts(u, v, th):
        x, y = -np.log(u), -np.log(v)
        log_a = np.logaddexp(th * np.log(x), th * np.log(y)) / th
        return x, y, log_a

    @classmethod
    def cdf(cls, u, v, th):
        _, _, log_a = cls._parts(u, v, th)
        return np.exp(-np.exp(log_a))

    @classmethod
    def logpdf(cls, u, v, th):
        x, y, log_a = cls._parts(u, v, th)
        a = np.exp(log_a)
        return (-a + x + y + (th - 1.0) * (np.log(x) + np.log(y))
                + (1.0 - 2.0 * th) * log_a + np.log(a + th - 1.0))

    @classmethod
    def h1(cls, u, v, th):
        x, _, log_a = cls._parts(u, v, th)
        return np.exp(-np.exp(log_a) + (1.0 - th) * log_a + (th - 1.0) * np.log(x) + x)

    @classmethod
    def hinv1(cls, u, p, th):
        u, p, th = np.broadcast_arrays(u, p, th)
        return _bisect_increasing(lambda v: cls.h1(u, clamp(v), th), p)

    @staticmethod
    def tau(th):
        return 1.0 - 1.0 / th

    @staticmethod
    def param(tau):
        return 1.0 / (1.0 - tau)

    @staticmethod
    def lambda_lower(th):
        return 0.0

    @staticmethod
    def lambda_upper(th):
        return 2.0 - 2.0 ** (1.0 / th)


@lru_cache(maxsize=4096)
def _frank_tau(eta):
    if abs(eta) < 1e-5:
        return eta / 9.0 - eta**3 / 900.0
    # tau = 1 - 4/eta * (1 - D1(eta)), D1 the first Debye function
    integrand = lambda t: t / np.expm1(t) if t != 0.0 else 1.0  # noqa: E731
    debye, _ = integrate.quad(integrand, 0.0, eta, epsabs=1e-13, epsrel=1e-13)
    debye /= eta
    return 1.0 - 4.0 / eta * (1.0 - debye)


class _Frank:
    """
    Evaluated for |eta| in a cancellation-free log form; negative eta uses
    the reflection c_{-eta}(u, v) = c_{eta}(1 - u, v).
    """

    name = "frank"
    n_par = 1
    bounds = (-np.inf, np.inf)

    @staticmethod
    def check(th):
        if not np.all(np.isfinite(th)) or np.any(th == 0.0):
            raise DomainError(f"frank parameter must be finite and nonzero, got {th}")

    @staticmethod
    def _reflect(u, th):
        return np.where(th < 0.0, 1.0 - u, u), np.abs(th)

    @staticmethod
    def _log_neg_den(x, y, eta):
        # log(e^-x + e^-y - e^-eta - e^-(x+y)) for 0 <= x, y <= eta
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        inner = -np.expm1(-hi) - np.exp(-(hi - lo)) * np.expm1(-(eta - hi))
        return -lo + np.log(inner)

    @classmethod
    def cdf(cls, u, v, th):
        neg = th < 0.0
        a, eta = cls._reflect(u, th)
        x, y = eta * a, eta * v
        c = -(cls._log_neg_den(x, y, eta) - np.log(-np.expm1(-eta))) / eta
        return np.where(neg, v - c, c)

    @classmethod
    def logpdf(cls, u, v, th):
        a, eta = cls._reflect(u, th)
        x, y = eta * a, eta * v
        return (np.log(eta) + np.log(-np.expm1(-eta)) - x - y
                - 2.0 * cls._log_neg_den(x, y, eta))

    @classmethod
    def h1(cls, u, v, th):
        a, eta = cls._reflect(u, th)
        x, y = eta * a, eta * v
        return np.exp(-x + np.log(-np.expm1(-y)) - cls._log_neg_den(x, y, eta))

    @classmethod
    def hinv1(cls, u, p, th):
        a, eta = cls._reflect(u, th)
        x = eta * a
        num = np.logaddexp(-x + np.log1p(-p), -eta + np.log(p))
        den = np.logaddexp(np.log(p), -x + np.log1p(-p))
        return -(num - den) / eta

    @staticmethod
    def tau(th):
        if np.ndim(th):
            return np.vectorize(_frank_tau)(th)
        return _frank_tau(float(th))

    @staticmethod
    def lambda_lower(th):
        return 0.0

    lambda_upper = lambda_lower


class _AMH:
    name = "amh"
    n_par = 1
    bounds = (-1.0, 1.0)

    @staticmethod
    def check(th):
        if not np.all((th > -1.0) & (th < 1.0) & (th != 0.0)):
            raise DomainError(f"amh parameter must lie in (-1, 1) without 0, got {th}")

    @staticmethod
    def cdf(u, v, th):
        return u * v / (1.0 - th * (1.0 - u) * (1.0 - v))

    @staticmethod
    def logpdf(u, v, th):
        d = 1.0 - th * (1.0 - u) * (1.0 - v)
        num = 1.0 + th * ((1.0 + u) * (1.0 + v) - 3.0) + th**2 * (1.0 - u) * (1.0 - v)
        return np.log(num) - 3.0 * np.log(d)

    @staticmethod
    def h1(u, v, th):
        d = 1.0 - th * (1.0 - u) * (1.0 - v)
        return v * (1.0 - th * (1.0 - v)) / d**2

    @classmethod
    def hinv1(cls, u, p, th):
        u, p, th = np.broadcast_arrays(u, p, th)
        return _bisect_increasing(lambda v: cls.h1(u, v, th), p)

    @staticmethod
    def tau(th):
        th = np.asarray(th, dtype=float)
        small = np.abs(th) < 1e-4
        safe = np.where(small, 0.5, th)
        closed = (1.0 - 2.0 / (3.0 * safe)
                  - 2.0 * (1.0 - safe) ** 2 * np.log1p(-safe) / (3.0 * safe**2))
        series = 2.0 * th / 9.0 + th**2 / 18.0 + th**3 / 45.0 + th**4 / 90.0
        out = np.where(small, series, closed)
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def lambda_lower(th):
        return 0.0

    lambda_upper = lambda_lower


_FAMILY_IMPL = {
    "indep": _Independence,
    "gaussian": _Gaussian,
    "clayton": _Clayton,
    "gumbel": _Gumbel,
    "frank": _Frank,
    "amh": _AMH,
}

# attainable Kendall's tau for rotation 0 (open intervals)
TAU_RANGE = {
    "indep": (0.0, 0.0),
    "gaussian": (-1.0, 1.0),
    "clayton": (0.0, 1.0),
    "gumbel": (0.0, 1.0),
    "frank": (-1.0, 1.0),
    "amh": (float(_AMH.tau(-1.0 + 1e-15)), 1.0 / 3.0),
}


def family_name(family):
    name = str(family).strip().lower()
    name = _ALIASES.get(name, name)
    if name not in _FAMILY_IMPL:
        raise ValueError(f"unknown copula family {family!r}; choose from {FAMILIES}")
    return name


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairCopula:
    """
    A parametric bivariate copula with rotation.

    Parameters
    ----------
    family : str
        One of ``FAMILIES``.
    par : float or ndarray, optional
        Family parameter. An array is allowed for observation-wise
        parameters (used by non-simplified ground-truth models); it must
        broadcast against the evaluation points.
    rotation : int
        0, 90, 180 or 270 degrees.
    """

    family: str
    par: object = None
    rotation: int = 0
    _impl: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        name = family_name(self.family)
        object.__setattr__(self, "family", name)
        impl = _FAMILY_IMPL[name]
        object.__setattr__(self, "_impl", impl)
        if self.rotation not in _FLIPS:
            raise ValueError(f"rotation must be one of {ROTATIONS}, got {self.rotation}")
        if impl.n_par == 0:
            if self.par is not None:
                raise DomainError("independence copula has no parameter")
            object.__setattr__(self, "rotation", 0)
        else:
            if self.par is None:
                raise DomainError(f"{name} copula needs a parameter")
            par = self.par
            if np.ndim(par) == 0:
                par = float(par)
            else:
                par = np.asarray(par, dtype=float)
            impl.check(par)
            object.__setattr__(self, "par", par)

    def __eq__(self, other):
        if not isinstance(other, PairCopula):
            return NotImplemented
        return (self.family == other.family and self.rotation == other.rotation
                and np.array_equal(self.par, other.par))

    def __hash__(self):
        return hash((self.family, self.rotation, None if self.par is None else np.asarray(self.par).tobytes()))

    @property
    def params(self):
        return () if self.par is None else (float(self.par),)

    @property
    def n_params(self):
        return self._impl.n_par

    @property
    def _flips(self):
        return _FLIPS[self.rotation]

    def rotate(self, degrees):
        """Compose with another rotation (flips combine by XOR)."""
        if self.family == "indep":
            return self
        fu, fv = self._flips
        gu, gv = _FLIPS[degrees]
        return PairCopula(self.family, self.par, _FLIPS_INV[(fu ^ gu, fv ^ gv)])

    # -- evaluation ---------------------------------------------------------

    def cdf(self, u, v):
        """Copula distribution function C(u, v)."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        base = lambda a, b: self._impl.cdf(clamp(a), clamp(b), self.par)  # noqa: E731
        fu, fv = self._flips
        if fu and fv:
            out = u + v - 1.0 + base(1.0 - u, 1.0 - v)
        elif fu:
            out = v - base(1.0 - u, v)
        elif fv:
            out = u - base(u, 1.0 - v)
        else:
            out = base(u, v)
        # exact margins on the boundary
        out = np.where(u <= 0.0, 0.0, out)
        out = np.where(v <= 0.0, 0.0, out)
        out = np.where(u >= 1.0, v, out)
        out = np.where(v >= 1.0, u, out)
        out = np.clip(out, np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))
        return out[()] if out.ndim == 0 else out

    def _reflect(self, u, v):
        u, v = clamp(u), clamp(v)
        fu, fv = self._flips
        return (1.0 - u if fu else u), (1.0 - v if fv else v)

    def logpdf(self, u, v):
        a, b = self._reflect(u, v)
        out = self._impl.logpdf(a, b, self.par)
        return out[()] if np.ndim(out) == 0 else out

    def pdf(self, u, v):
        """Copula density c(u, v)."""
        return np.exp(self.logpdf(u, v))

    # a flipped output argument turns h into 1 - h; families that can supply
    # the complement without cancellation do so through h1c / hinv1c

    def _h(self, x, y, complement):
        impl = self._impl
        if not complement:
            return impl.h1(x, y, self.par)
        if hasattr(impl, "h1c"):
            return impl.h1c(x, y, self.par)
        return 1.0 - impl.h1(x, y, self.par)

    def _hinv(self, x, p, complement):
        impl = self._impl
        if not complement:
            return impl.hinv1(x, p, self.par)
        if hasattr(impl, "hinv1c"):
            return impl.hinv1c(x, p, self.par)
        return impl.hinv1(x, 1.0 - p, self.par)

    def hfunc1(self, u, v):
        """h(v | u) = dC(u, v) / du, the conditional CDF of V given U = u."""
        a, b = self._reflect(u, v)
        return np.clip(self._h(a, b, self._flips[1]), 0.0, 1.0)

    def hfunc2(self, u, v):
        """h(u | v) = dC(u, v) / dv, the conditional CDF of U given V = v."""
        a, b = self._reflect(u, v)
        return np.clip(self._h(b, a, self._flips[0]), 0.0, 1.0)

    def hinv1(self, u, p):
        """Inverse of ``hfunc1`` in its second argument."""
        fu, fv = self._flips
        a = 1.0 - clamp(u) if fu else clamp(u)
        v = self._hinv(a, clamp(p), fv)
        return np.clip(1.0 - v if fv else v, 0.0, 1.0)

    def hinv2(self, v, p):
        """Inverse of ``hfunc2`` in its first argument."""
        fu, fv = self._flips
        b = 1.0 - clamp(v) if fv else clamp(v)
        u = self._hinv(b, clamp(p), fu)
        return np.clip(1.0 - u if fu else u, 0.0, 1.0)

    def sample(self, n, rng):
        """Draw ``n`` pairs by conditional inversion; returns an (n, 2) array."""
        w = rng.random((n, 2))
        return np.column_stack([w[:, 0], self.hinv1(w[:, 0], w[:, 1])])

    # -- summaries ----------------------------------------------------------

    def tau(self):
        """Kendall's tau; negated for 90 and 270 degree rotations."""
        t = self._impl.tau(self.par)
        return -t if self.rotation in (90, 270) else t

    def tail_lambda_lower(self):
        if self.rotation == 0:
            return float(self._impl.lambda_lower(self.par))
        if self.rotation == 180:
            return float(self._impl.lambda_upper(self.par))
        return 0.0

    def tail_lambda_upper(self):
        if self.rotation == 0:
            return float(self._impl.lambda_upper(self.par))
        if self.rotation == 180:
            return float(self._impl.lambda_lower(self.par))
        return 0.0

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {"family": self.family, "rotation": int(self.rotation),
                "params": [float(p) for p in self.params]}

    @classmethod
    def from_dict(cls, obj):
        params = obj.get("params", [])
        par = params[0] if len(params) else None
        return cls(obj["family"], par, int(obj.get("rotation", 0)))

    def __str__(self):
        rot = f", rot={self.rotation}" if self.rotation else ""
        par = "" if self.par is None else f"{float(np.mean(self.par)):.4g}"
        return f"{self.family}({par}{rot})"


INDEPENDENCE = PairCopula("indep")


def param_to_tau(pc):
    return pc.tau()


def tau_range(family, rotation=0):
    """Open interval of Kendall's tau attainable by ``family`` at ``rotation``."""
    lo, hi = TAU_RANGE[family_name(family)]
    if rotation in (90, 270):
        lo, hi = -hi, -lo
    return lo, hi


def _bisect_scalar(f, target, lo, hi, tol=1e-10, maxiter=500):
    flo = f(lo) - target
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid) - target
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def tau_to_param(family, tau):
    """
    Copula of ``family`` with Kendall's tau equal to ``tau``.

    Negative tau for Clayton and Gumbel is expressed by a 90 degree
    rotation. tau = 0 returns the independence copula.
    """
    name = family_name(family)
    tau = float(tau)
    if tau == 0.0 or name == "indep":
        if tau != 0.0:
            raise TauRangeError(f"indep only attains tau = 0, got {tau}")
        return INDEPENDENCE
    rotation = 0
    if name in ("clayton", "gumbel") and tau < 0.0:
        rotation, tau = 90, -tau
    lo, hi = TAU_RANGE[name]
    if not lo < tau < hi:
        lo_r, hi_r = tau_range(name) if name not in ("clayton", "gumbel") else (-1.0, 1.0)
        raise TauRangeError(
            f"tau = {tau if rotation == 0 else -tau} outside the attainable range "
            f"({lo_r:.6g}, {hi_r:.6g}) of the {name} family")
    impl = _FAMILY_IMPL[name]
    if hasattr(impl, "param"):
        par = impl.param(tau)
    elif name == "frank":
        # tau(eta) is odd and increasing; bracket on |eta|
        hi_eta = 1.0
        while _frank_tau(hi_eta) < abs(tau):
            hi_eta *= 2.0
        par = _bisect_scalar(_frank_tau, abs(tau), 0.0, hi_eta, tol=1e-12)
        par = par if tau > 0 else -par
    else:
        par = _bisect_scalar(lambda x: float(_AMH.tau(x)), tau, -1.0 + 1e-15, 1.0 - 1e-15,
                             tol=1e-13)
    return PairCopula(name, par, rotation)
