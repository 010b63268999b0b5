import itertools
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from vinelab.copulas import PairCopula
from vinelab.fitting import (FitConfig, FitError, empirical_tau, fit_pair, fit_sequential,
                             select_structure, tau_independence_pvalue)
from vinelab.generators import fig2_true_model, fig4_model, gaussian_copula_sample
from vinelab.model import VineModel
from vinelab.structure import Edge, dvine, validate

from test_model import mixed_fig1

# mean and sd of the MLE over 20 replicates of n = 10^4 (seeds 1000..1019),
# single family, no rotations; band = mean +- t(0.995, 19) * sd * sqrt(1 + 1/20)
CALIBRATION = {
    ("gaussian", -0.5): (-0.4982, 0.0069), ("gaussian", 0.3): (0.2990, 0.0076),
    ("gaussian", 0.8): (0.7991, 0.0028),
    ("clayton", 0.5): (0.4987, 0.0122), ("clayton", 2.0): (1.9946, 0.0243),
    ("clayton", 6.0): (5.9787, 0.0565),
    ("gumbel", 1.3): (1.2993, 0.0083), ("gumbel", 2.0): (1.9965, 0.0159),
    ("gumbel", 5.0): (4.9870, 0.0445),
    ("frank", -4.0): (-3.9856, 0.0794), ("frank", 2.0): (1.9969, 0.0492),
    ("frank", 10.0): (9.9611, 0.1052),
    ("amh", -0.5): (-0.4985, 0.0381), ("amh", 0.3): (0.3005, 0.0184),
    ("amh", 0.8): (0.7987, 0.0093),
}
BAND = 2.861 * np.sqrt(1 + 1 / 20)


def sample(pc, n, seed):
    rng = np.random.default_rng(seed)
    u, w = rng.random(n), rng.random(n)
    return np.column_stack([u, pc.hinv1(u, w)])


# -- empirical tau -----------------------------------------------------------


def test_empirical_tau_basics():
    x = np.linspace(0.01, 0.99, 50)
    assert empirical_tau(np.column_stack([x, x])) == 1.0
    assert empirical_tau(np.column_stack([x, x[::-1]])) == -1.0
    u = np.random.default_rng(0).random((10_000, 2))
    assert abs(empirical_tau(u)) < 0.03
    g = sample(PairCopula("gumbel", 5.0), 10_000, 1)
    assert 0.77 <= empirical_tau(g) <= 0.83
    with pytest.raises(ValueError):
        empirical_tau(np.zeros((1, 2)))


def test_empirical_tau_handles_ties_and_matches_scipy():
    from scipy.stats import kendalltau

    rng = np.random.default_rng(2)
    s = np.round(rng.random((500, 2)), 1)
    assert empirical_tau(s) == pytest.approx(kendalltau(s[:, 0], s[:, 1]).statistic, abs=1e-12)


def test_independence_pvalue():
    assert tau_independence_pvalue(0.0, 100) == pytest.approx(1.0)
    z = 3 * 0.1 * np.sqrt(1000 * 999) / np.sqrt(2 * 2005)
    from scipy.stats import norm

    assert tau_independence_pvalue(0.1, 1000) == pytest.approx(2 * norm.sf(z))


# -- fit_pair ----------------------------------------------------------------------


def test_gumbel_example():
    fit = fit_pair(sample(PairCopula("gumbel", 2.0), 10_000, 3),
                   FitConfig(family_set=("gumbel",), rotations=False))
    assert fit.copula.family == "gumbel"
    assert 1.9 <= fit.copula.par <= 2.1
    se = np.sqrt(2 * (1 - fit.empirical_tau ** 2) / fit.n)
    assert abs(fit.tau_hat - fit.empirical_tau) < 3 * se


@pytest.mark.parametrize("family,theta", sorted(CALIBRATION))
def test_fit_recovers_parameter_within_calibrated_band(family, theta):
    mean, sd = CALIBRATION[family, theta]
    fit = fit_pair(sample(PairCopula(family, theta), 10_000, 7),
                   FitConfig(family_set=(family,), rotations=False))
    assert fit.copula.family == family
    assert abs(fit.copula.par - mean) <= BAND * sd


def test_rotated_gumbel_selected():
    fit = fit_pair(sample(PairCopula("gumbel", 2.0, 90), 10_000, 4))
    assert fit.copula.family == "gumbel" and fit.copula.rotation == 90
    assert fit.tau_hat < 0


@pytest.mark.parametrize("pc", [PairCopula("clayton", 3.0, 180), PairCopula("gumbel", 1.8, 270),
                                PairCopula("gaussian", -0.6), PairCopula("frank", 6.0)])
def test_family_selection_on_well_specified_data(pc):
    fit = fit_pair(sample(pc, 5_000, 5))
    assert (fit.copula.family, fit.copula.rotation) == (pc.family, pc.rotation)


def test_aic_on_independent_uniforms():
    # pure AIC picks independence in most but not all samples; the optional
    # pre-test makes the choice track a level-alpha test
    aic = [fit_pair(np.random.default_rng(s).random((2_000, 2))).copula.family == "indep"
           for s in range(20)]
    assert sum(aic) >= 10
    cfg = FitConfig(indep_test=0.05)
    pre = [fit_pair(np.random.default_rng(s).random((2_000, 2)), cfg).copula.family == "indep"
           for s in range(20)]
    assert sum(pre) >= 17
    assert fit_pair(sample(PairCopula("gumbel", 2.0), 2_000, 6), cfg).copula.family == "gumbel"


def test_loglik_criterion_never_picks_independence_on_dependent_data():
    fit = fit_pair(sample(PairCopula("frank", 1.0), 1_000, 8), FitConfig(criterion="loglik"))
    assert fit.copula.family != "indep"
    assert fit.loglik == max(c["loglik"] for c in fit.candidates)


def test_fit_pair_errors():
    with pytest.raises(FitError):
        fit_pair(np.random.default_rng(0).random((5, 2)))
    with pytest.raises(ValueError):
        FitConfig(family_set=())
    with pytest.raises(ValueError):
        FitConfig(criterion="bic")
    with pytest.raises(ValueError):
        FitConfig(indep_test=1.5)


# -- sequential fit ----------------------------------------------------------------


def test_fig2_sequential_fit():
    x = fig2_true_model().simulate(10_000, np.random.default_rng(42))
    rep = fit_sequential(x, dvine(3))
    assert rep.structure_source == "fixed"
    assert list(rep.edges) == dvine(3).edges()
    for e, fit in rep.edges.items():
        assert fit.copula.family == "gumbel" and fit.copula.rotation == 0
        assert 0.77 <= fit.tau_hat <= 0.83


def test_first_tree_uses_raw_columns_and_higher_trees_fitted_h():
    x = mixed_fig1().simulate(3_000, np.random.default_rng(9))
    rep = fit_sequential(x, mixed_fig1().structure)
    e12 = Edge(1, 2)
    assert rep.edges[e12].empirical_tau == empirical_tau(x[:, :2])
    e = rep.fitted.structure.edges_of(2)[0]
    assert rep.edges[e].empirical_tau == empirical_tau(rep.fitted.pseudo_obs(x, e))


def test_heldout_loglik_within_two_percent():
    true = mixed_fig1()
    rng = np.random.default_rng(10)
    train, test = true.simulate(10_000, rng), true.simulate(10_000, rng)
    rep = fit_sequential(train, true.structure)
    ll_true = true.loglik(test)
    assert abs(rep.fitted.loglik(test) - ll_true) <= 0.02 * abs(ll_true)


def test_fit_is_deterministic():
    x = mixed_fig1().simulate(2_000, np.random.default_rng(11))
    a = json.dumps(fit_sequential(x, mixed_fig1().structure).to_dict())
    b = json.dumps(fit_sequential(x.copy(), mixed_fig1().structure).to_dict())
    assert a == b
    a = json.dumps(select_structure(x).to_dict())
    assert a == json.dumps(select_structure(x).to_dict())


def test_report_covers_every_edge():
    x = mixed_fig1().simulate(1_000, np.random.default_rng(12))
    rep = fit_sequential(x, mixed_fig1().structure)
    obj = json.loads(json.dumps(rep.to_dict()))
    assert [(*r["pair"], *r["cond"]) for r in obj["edges"]] == \
        [(*e.pair, *e.cond) for e in mixed_fig1().structure.edges()]
    assert VineModel.from_dict(obj["model"]).structure == mixed_fig1().structure
    assert rep.loglik == pytest.approx(rep.fitted.loglik(x), rel=1e-10)
    assert len(rep.table()) == 10


@pytest.mark.parametrize("strength,lo,hi", [("strong", 0.2, 1.0), ("moderate", 0.03, 0.13)])
def test_fig4_spurious_dependence(strength, lo, hi):
    m = fig4_model(strength)
    x = m.simulate(10_000, np.random.default_rng(42))
    rep = fit_sequential(x, m.structure)
    assert lo < rep.edges[Edge(2, 3, (1, 4))].tau_hat < hi


def test_sequential_errors():
    x = np.random.default_rng(0).random((100, 3))
    with pytest.raises(ValueError):
        fit_sequential(x, dvine(4))


# -- structure selection -----------------------------------------------------------


def spanning_trees(d):
    """All labelled trees on 1..d via Pruefer sequences."""
    for seq in itertools.product(range(1, d + 1), repeat=d - 2):
        degree = [1] * (d + 1)
        for v in seq:
            degree[v] += 1
        edges, seq = [], list(seq)
        for v in seq:
            leaf = min(i for i in range(1, d + 1) if degree[i] == 1)
            edges.append(Edge(leaf, v))
            degree[leaf] -= 1
            degree[v] -= 1
        a, b = [i for i in range(1, d + 1) if degree[i] == 1]
        edges.append(Edge(a, b))
        yield sorted(edges)


def test_first_tree_matches_brute_force_mst():
    corr = np.array([[1, .7, .2, .4, .1], [.7, 1, .3, .5, .2], [.2, .3, 1, .6, .1],
                     [.4, .5, .6, 1, .3], [.1, .2, .1, .3, 1]])
    x = gaussian_copula_sample(corr, 3_000, np.random.default_rng(13))
    w = {Edge(a, b): abs(empirical_tau(x[:, [a - 1, b - 1]]))
         for a in range(1, 6) for b in range(a + 1, 6)}
    best = max(spanning_trees(5), key=lambda t: sum(w[e] for e in t))
    assert sorted(select_structure(x).edges_of(1)) == best


def test_fig2_structure_selection():
    # tau(1,3) implied by the model exceeds both generating edges, so the
    # maximum spanning tree keeps (1,3) and drops the weaker of (1,2), (2,3)
    x = fig2_true_model().simulate(10_000, np.random.default_rng(42))
    s = select_structure(x)
    t = {e: abs(empirical_tau(x[:, [e.a - 1, e.b - 1]])) for e in (Edge(1, 2), Edge(1, 3), Edge(2, 3))}
    best = sorted(sorted(t, key=t.get)[1:])
    assert sorted(s.edges_of(1)) == best
    assert validate(s)


def test_select_structure_small_cases():
    x = np.random.default_rng(14).random((50, 2))
    assert select_structure(x) == dvine(2)
    for seed in range(5):
        assert validate(select_structure(np.random.default_rng(seed).random((200, 4))))
    with pytest.raises(FitError):
        select_structure(x[:5])


def test_select_structure_label_equivariant():
    corr = np.array([[1, .6, .3, .2, .4], [.6, 1, .5, .1, .3], [.3, .5, 1, .7, .2],
                     [.2, .1, .7, 1, .1], [.4, .3, .2, .1, 1]])
    x = gaussian_copula_sample(corr, 2_000, np.random.default_rng(15))
    s = select_structure(x)
    perm = [3, 5, 1, 4, 2]  # new column j holds old variable perm[j]
    s_perm = select_structure(x[:, [p - 1 for p in perm]])
    mapping = {new + 1: old for new, old in enumerate(perm)}
    assert s_perm.relabel(mapping) == s
    assert_array_equal(np.sort(s.to_matrix().diagonal()), np.arange(1, 6))
