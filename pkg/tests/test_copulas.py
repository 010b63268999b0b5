import json

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import dblquad

from vinelab.copulas import (EPS, INDEPENDENCE, DomainError, PairCopula, TauRangeError,
                             param_to_tau, tau_range, tau_to_param)
from vinelab.fitting import empirical_tau

# three parameter values per family, spanning weak to strong dependence
CASES = [
    ("gaussian", -0.5), ("gaussian", 0.3), ("gaussian", 0.8),
    ("clayton", 0.5), ("clayton", 2.0), ("clayton", 6.0),
    ("gumbel", 1.3), ("gumbel", 2.0), ("gumbel", 5.0),
    ("frank", -4.0), ("frank", 2.0), ("frank", 10.0),
    ("amh", -0.5), ("amh", 0.3), ("amh", 0.8),
]
ALL = [INDEPENDENCE] + [PairCopula(f, p, r) for f, p in CASES for r in (0, 90, 180, 270)]

GRID = np.linspace(0.05, 0.95, 10)
U, V = (a.ravel() for a in np.meshgrid(GRID, GRID))


def _id(pc):
    return str(pc)


# -- cdf ---------------------------------------------------------------------


def test_independence_cdf():
    assert INDEPENDENCE.cdf(0.3, 0.7) == pytest.approx(0.21, abs=1e-15)


@pytest.mark.parametrize("pc", ALL, ids=_id)
def test_uniform_margins(pc):
    u = np.array([0.1, 0.5, 0.9])
    assert_allclose(pc.cdf(u, np.ones(3)), u, atol=1e-12)
    assert_allclose(pc.cdf(np.ones(3), u), u, atol=1e-12)
    assert_allclose(pc.cdf(u, np.zeros(3)), 0.0, atol=1e-12)


@pytest.mark.parametrize("pc", ALL, ids=_id)
def test_frechet_bounds_and_two_increasing(pc):
    c = pc.cdf(U, V)
    assert np.all(c >= np.maximum(U + V - 1.0, 0.0) - 1e-12)
    assert np.all(c <= np.minimum(U, V) + 1e-12)
    g = np.linspace(0.0, 1.0, 12)
    C = pc.cdf(*np.meshgrid(g, g, indexing="ij"))
    rect = C[1:, 1:] - C[:-1, 1:] - C[1:, :-1] + C[:-1, :-1]
    assert rect.min() > -1e-12


def test_gumbel_cdf_matches_density_quadrature():
    # oracle: 2-d quadrature of the density over [0, 0.5]^2 (mpmath, 30 digits)
    frozen = 0.45103198307713790653716433087
    pc = PairCopula("gumbel", 5.0)
    assert pc.cdf(0.5, 0.5) == pytest.approx(frozen, abs=1e-12)
    quad, _ = dblquad(lambda v, u: pc.pdf(u, v), 0.0, 0.5, 0.0, 0.5, epsabs=1e-10)
    assert quad == pytest.approx(frozen, abs=1e-6)


def test_domain_errors():
    for fam, bad in [("gaussian", 1.0), ("clayton", 0.0), ("gumbel", 0.9), ("frank", 0.0),
                     ("amh", 1.0), ("amh", 0.0), ("amh", -1.0)]:
        with pytest.raises(DomainError):
            PairCopula(fam, bad)
    with pytest.raises(DomainError):
        PairCopula("gumbel")
    with pytest.raises(ValueError):
        PairCopula("gumbel", 2.0, rotation=45)


# -- pdf and h-functions -----------------------------------------------------


def test_trivial_densities():
    assert_allclose(INDEPENDENCE.pdf(U, V), 1.0)
    assert_allclose(PairCopula("gaussian", 0.0).pdf(U, V), 1.0, atol=1e-14)


def test_frank_pdf_matches_mixed_difference_of_cdf():
    pc, h = PairCopula("frank", 5.0), 1e-4
    u, v = 0.2, 0.8
    fd = (pc.cdf(u + h, v + h) - pc.cdf(u + h, v - h) - pc.cdf(u - h, v + h)
          + pc.cdf(u - h, v - h)) / (4 * h * h)
    assert pc.pdf(u, v) == pytest.approx(fd, rel=1e-6)


def test_h_trivial_values():
    assert_allclose(INDEPENDENCE.hfunc1(U, V), V)
    assert PairCopula("gaussian", 0.5).hfunc1(0.5, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_gumbel_h_matches_difference_quotient():
    pc, h = PairCopula("gumbel", 5.0), 1e-6
    fd = (pc.cdf(0.3 + h, 0.6) - pc.cdf(0.3 - h, 0.6)) / (2 * h)
    assert pc.hfunc1(0.3, 0.6) == pytest.approx(fd, abs=1e-8)


@pytest.mark.parametrize("pc", ALL, ids=_id)
def test_h_functions_are_partial_derivatives(pc):
    h = 1e-6
    fd1 = (pc.cdf(U + h, V) - pc.cdf(U - h, V)) / (2 * h)
    fd2 = (pc.cdf(U, V + h) - pc.cdf(U, V - h)) / (2 * h)
    assert_allclose(pc.hfunc1(U, V), fd1, atol=1e-5)
    assert_allclose(pc.hfunc2(U, V), fd2, atol=1e-5)


@pytest.mark.parametrize("pc", ALL, ids=_id)
def test_pdf_is_derivative_of_h(pc):
    h = 1e-6
    fd = (pc.hfunc1(U, V + h) - pc.hfunc1(U, V - h)) / (2 * h)
    dens = pc.pdf(U, V)
    assert np.all(dens >= 0)
    assert_allclose(dens, fd, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("pc", ALL, ids=_id)
def test_h_boundaries_and_monotone(pc):
    u = np.full(50, 0.37)
    v = np.linspace(0.0, 1.0, 50)
    h = pc.hfunc1(u, v)
    assert h[0] == pytest.approx(0.0, abs=1e-6)
    assert h[-1] == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(h) >= -1e-14)


@pytest.mark.parametrize("pc", ALL, ids=_id)
def test_h_inverse_roundtrip(pc):
    assert_allclose(pc.hinv1(U, pc.hfunc1(U, V)), V, atol=1e-8)
    assert_allclose(pc.hinv2(V, pc.hfunc2(U, V)), U, atol=1e-8)
    assert_allclose(pc.hfunc1(U, pc.hinv1(U, V)), V, atol=1e-8)


def test_clayton_hinv_matches_bisection_oracle():
    # oracle: 200-step bisection of the closed-form h at 30 digits
    assert PairCopula("clayton", 2.0).hinv1(0.5, 0.25) == pytest.approx(
        0.375839778550467320387467170516, abs=1e-12)
    assert INDEPENDENCE.hinv1(0.3, 0.8) == pytest.approx(0.8)


@pytest.mark.parametrize("pc", [PairCopula(f, p) for f, p in CASES] + [INDEPENDENCE], ids=_id)
def test_density_integrates_to_one(pc):
    # 1e5 scrambled-Sobol points on a smoothstep-warped cube (density is unbounded at corners)
    from scipy.stats import qmc

    t = qmc.Sobol(2, scramble=True, seed=7).random(2 ** 17)
    x = t ** 3 * (10 - 15 * t + 6 * t ** 2)
    jac = np.prod(30 * t ** 2 * (1 - t) ** 2, axis=1)
    assert np.mean(pc.pdf(x[:, 0], x[:, 1]) * jac) == pytest.approx(1.0, abs=5e-3)


def test_clamping_at_boundaries():
    pc = PairCopula("clayton", 3.0)
    assert np.isfinite(pc.logpdf(0.0, 0.0))
    assert np.isfinite(pc.logpdf(1.0, 1.0))
    assert pc.hfunc1(0.0, 0.5) == pc.hfunc1(EPS, 0.5)


# -- rotations ---------------------------------------------------------------


@pytest.mark.parametrize("fam,par", CASES)
def test_rotation_convention(fam, par):
    base = PairCopula(fam, par)
    assert_allclose(base.rotate(90).pdf(U, V), base.pdf(1 - U, V), rtol=1e-12)
    assert_allclose(base.rotate(180).pdf(U, V), base.pdf(1 - U, 1 - V), rtol=1e-12)
    assert_allclose(base.rotate(270).pdf(U, V), base.pdf(U, 1 - V), rtol=1e-12)
    assert_allclose(base.rotate(180).cdf(U, V), U + V - 1 + base.cdf(1 - U, 1 - V), atol=1e-12)


@pytest.mark.parametrize("fam,par", CASES)
def test_four_quarter_turns_restore(fam, par):
    base = PairCopula(fam, par)
    pc = base
    for _ in range(4):
        pc = pc.rotate(90)
    assert pc == base
    assert_allclose(pc.pdf(U, V), base.pdf(U, V), rtol=1e-12, atol=0)


# -- sampling and tau --------------------------------------------------------


def test_sample_shapes():
    rng = np.random.default_rng(0)
    assert PairCopula("gumbel", 2.0).sample(0, rng).shape == (0, 2)
    x = INDEPENDENCE.sample(10_000, rng)
    assert x.shape == (10_000, 2)
    assert abs(empirical_tau(x)) < 0.03


def test_gumbel_tau_point_eight_sample():
    pc = tau_to_param("gumbel", 0.8)
    x = pc.sample(10_000, np.random.default_rng(42))
    assert 0.77 <= empirical_tau(x) <= 0.83


def _tau_se(tau, n):
    # upper bound on the standard deviation of sample tau: var <= 2 (1 - tau^2) / n
    return np.sqrt(2.0 * (1.0 - tau ** 2) / n)


@pytest.mark.parametrize("pc", ALL[::3], ids=_id)
def test_sample_tau_agrees_with_param_to_tau(pc):
    n = 10_000
    x = pc.sample(n, np.random.default_rng(11))
    assert abs(empirical_tau(x) - param_to_tau(pc)) < 3 * _tau_se(pc.tau(), n)


@pytest.mark.slow
@pytest.mark.parametrize("fam,par", CASES)
def test_large_sample_tau(fam, par):
    n = 100_000
    pc = PairCopula(fam, par)
    x = pc.sample(n, np.random.default_rng(5))
    assert abs(empirical_tau(x) - pc.tau()) < 3 * _tau_se(pc.tau(), n)


def test_tau_values_against_integral_oracle():
    # oracle: tau = 1 - 4 int int dC/du dC/dv by mpmath quadrature
    assert INDEPENDENCE.tau() == 0.0
    assert PairCopula("gumbel", 5.0).tau() == pytest.approx(0.8, abs=1e-12)
    lo = PairCopula("amh", -0.9999).tau()
    hi = PairCopula("amh", 0.9999).tau()
    assert lo == pytest.approx(-0.181710653846238, abs=1e-9)
    assert hi == pytest.approx(0.333266721413889, abs=1e-9)
    assert tau_range("amh") == pytest.approx(((5 - 8 * np.log(2)) / 3, 1 / 3))


def test_tau_sign_flips_under_quarter_turns():
    pc = PairCopula("clayton", 2.0)
    assert pc.rotate(90).tau() == pytest.approx(-pc.tau())
    assert pc.rotate(270).tau() == pytest.approx(-pc.tau())
    assert pc.rotate(180).tau() == pytest.approx(pc.tau())


@pytest.mark.parametrize("fam", ["gaussian", "clayton", "gumbel", "frank", "amh"])
@pytest.mark.parametrize("tau", [-0.15, 0.05, 0.3])
def test_tau_inversion_roundtrip(fam, tau):
    pc = tau_to_param(fam, tau)
    assert param_to_tau(pc) == pytest.approx(tau, abs=1e-6)


def test_tau_inversion_examples():
    # oracle: tau integral of Gumbel(2) evaluates to 0.5
    assert tau_to_param("gumbel", 0.5).par == pytest.approx(2.0, abs=1e-10)
    assert tau_to_param("gumbel", -0.5).rotation == 90
    for fam in ("gaussian", "clayton", "gumbel", "frank", "amh"):
        assert tau_to_param(fam, 0.0) == INDEPENDENCE
    with pytest.raises(TauRangeError, match="amh"):
        tau_to_param("amh", 0.4)
    with pytest.raises(TauRangeError):
        tau_to_param("gaussian", 1.0)


# -- tail dependence ---------------------------------------------------------


def test_tail_coefficients():
    assert INDEPENDENCE.tail_lambda_lower() == 0.0
    g = PairCopula("gaussian", 0.7)
    assert g.tail_lambda_lower() == 0.0 and g.tail_lambda_upper() == 0.0
    ratios = [g.cdf(t, t) / t for t in (1e-3, 1e-4, 1e-5)]
    assert ratios[0] > ratios[1] > ratios[2]
    # oracle: C(t,t)/t at t = 1e-6 from the closed form at 30 digits
    clay = PairCopula("clayton", 2.0)
    assert clay.tail_lambda_lower() == pytest.approx(0.707106781186724301, abs=1e-3)
    assert clay.tail_lambda_upper() == 0.0
    assert PairCopula("gumbel", 2.0).tail_lambda_upper() == pytest.approx(2 - np.sqrt(2))


@pytest.mark.parametrize("pc", [PairCopula("clayton", 2.0), PairCopula("clayton", 0.5),
                                PairCopula("frank", 5.0), PairCopula("amh", 0.8),
                                PairCopula("gumbel", 3.0, 180), INDEPENDENCE], ids=_id)
def test_tail_lower_matches_numeric_limit(pc):
    t = 1e-6
    assert pc.tail_lambda_lower() == pytest.approx(pc.cdf(t, t) / t, abs=1e-3)
    r = pc.rotate(180)
    assert r.tail_lambda_upper() == pytest.approx(pc.tail_lambda_lower())


# -- serialization -----------------------------------------------------------


@pytest.mark.parametrize("pc", ALL[::5], ids=_id)
def test_json_roundtrip(pc):
    obj = json.loads(json.dumps(pc.to_dict()))
    assert set(obj) == {"family", "rotation", "params"}
    assert obj["family"] == obj["family"].lower()
    assert PairCopula.from_dict(obj) == pc


# -- properties --------------------------------------------------------------

_fam_par = st.sampled_from(CASES)
_unit = st.floats(0.01, 0.99)


@settings(max_examples=200, deadline=None)
@given(_fam_par, st.sampled_from([0, 90, 180, 270]), _unit, _unit)
def test_property_hinv_roundtrip(fp, rot, u, v):
    pc = PairCopula(fp[0], fp[1], rot)
    # probabilities inside the clamp band cannot be inverted beyond the clamp
    h1, h2 = pc.hfunc1(u, v), pc.hfunc2(u, v)
    assume(1e-8 < min(h1, h2) and max(h1, h2) < 1 - 1e-8)
    assert pc.hinv1(u, pc.hfunc1(u, v)) == pytest.approx(v, abs=1e-8)
    assert pc.hinv2(v, pc.hfunc2(u, v)) == pytest.approx(u, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["gaussian", "clayton", "gumbel", "frank"]), st.floats(-0.9, 0.9))
def test_property_tau_inversion(fam, tau):
    pc = tau_to_param(fam, tau)
    assert pc.tau() == pytest.approx(tau, abs=1e-6)
