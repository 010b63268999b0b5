import json

import numpy as np
import pytest

from vinelab.cli import main
from vinelab.fitting import empirical_tau
from vinelab.io import read_samples


def run(*argv):
    return main([str(a) for a in argv])


def outputs(d):
    man = json.loads((d / "manifest.json").read_text())
    return {name: (d / name).read_bytes() for name in man["outputs"]}


def replay_identical(d, tmp_path):
    again = tmp_path / (d.name + "-replay")
    assert run("replay", d / "manifest.json", "--out", again) == 0
    return outputs(d) == outputs(again)


@pytest.fixture(scope="module")
def fig2_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--model", "fig2-true", "--n", 10_000, "--seed", 42, "--out", d) == 0
    return d


def test_simulate(fig2_csv, tmp_path):
    x, header = read_samples(fig2_csv / "samples.csv")
    assert x.shape == (10_000, 3) and header == ["u1", "u2", "u3"]
    man = json.loads((fig2_csv / "manifest.json").read_text())
    assert man["seed"] == 42 and man["command"] == "simulate" and man["outputs"] == ["samples.csv"]
    assert sorted(p.name for p in fig2_csv.iterdir()) == ["manifest.json", "samples.csv"]
    assert replay_identical(fig2_csv, tmp_path)


def test_simulate_fig4_and_empty(tmp_path):
    assert run("simulate", "--model", "fig4-strong", "--n", 10_000, "--out", tmp_path / "a") == 0
    x, _ = read_samples(tmp_path / "a" / "samples.csv")
    assert x.shape == (10_000, 4)
    assert 0.47 <= empirical_tau(x[:, :2]) <= 0.53
    assert run("simulate", "--model", "frank3:2", "--n", 0, "--out", tmp_path / "b") == 0
    assert (tmp_path / "b" / "samples.csv").read_text() == "u1,u2,u3\n"


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("VINELAB_SEED", "7")
    assert run("simulate", "--model", "fig2-true", "--n", 20, "--out", tmp_path / "env") == 0
    monkeypatch.delenv("VINELAB_SEED")
    assert run("simulate", "--model", "fig2-true", "--n", 20, "--seed", 7, "--out", tmp_path / "arg") == 0
    assert (tmp_path / "env" / "samples.csv").read_bytes() == (tmp_path / "arg" / "samples.csv").read_bytes()
    assert json.loads((tmp_path / "env" / "manifest.json").read_text())["seed"] == 7


def test_fit_and_diagnose(fig2_csv, tmp_path):
    d = tmp_path / "fit"
    assert run("fit", "--samples", fig2_csv / "samples.csv", "--structure", "fig2-true", "--out", d) == 0
    rep = json.loads((d / "fit_report.json").read_text())
    assert [e["copula"]["family"] for e in rep["edges"]] == ["gumbel"] * 3
    assert all(0.77 <= e["tau"] <= 0.83 for e in rep["edges"])
    assert replay_identical(d, tmp_path)

    d = tmp_path / "diag"
    assert run("diagnose", "--samples", fig2_csv / "samples.csv", "--pair", "1,2", "--cond", 3,
               "--n-perm", 99, "--seed", 42, "--out", d) == 0
    summary = json.loads((d / "diagnose.json").read_text())
    assert summary["binned"]["range"] > 0.1 and summary["permutation"]["p_value"] <= 0.01
    assert replay_identical(d, tmp_path)


def test_divergence(tmp_path):
    sim, fit = tmp_path / "sim", tmp_path / "fit"
    assert run("simulate", "--model", "fig4-moderate", "--seed", 1, "--out", sim) == 0
    assert run("fit", "--samples", sim / "samples.csv", "--structure", "fig4", "--out", fit) == 0
    d = tmp_path / "div"
    assert run("divergence", "--true", "fig4-moderate", "--fit", fit / "fit_report.json",
               "--m-eval", 500, "--seed", 3, "--out", d) == 0
    res = json.loads((d / "divergence.json").read_text())
    assert [r["metric"] for r in res] == ["dinf", "kl"]
    assert replay_identical(d, tmp_path)


def test_reproduce_fig3(tmp_path):
    d = tmp_path / "fig3"
    assert run("reproduce", "fig3", "--out", d) == 0
    summary = json.loads((d / "summary.json").read_text())
    assert summary["all_within_0_one_third"] and summary["unconditional_taus"] == [0.1, 0.2, 0.3]
    rows = np.genfromtxt(d / "fig3_curves.csv", delimiter=",", names=True, dtype=None, encoding=None)
    assert len(rows) == 6 * 99
    assert np.all((rows["tau_cond"] >= 0) & (rows["tau_cond"] <= 1 / 3 + 1e-9))
    assert replay_identical(d, tmp_path)


def test_input_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("u1,u2\n0.1,0.2\n0.3,x\n")
    assert run("fit", "--samples", bad, "--out", tmp_path / "o") == 2
    assert f"{bad}:3" in capsys.readouterr().err
    model = tmp_path / "model.json"
    model.write_text('{"structure": {"d": 2,\n "trees": [}')
    assert run("simulate", "--model", model, "--out", tmp_path / "o") == 2
    assert f"{model}:2:" in capsys.readouterr().err
    assert run("simulate", "--model", "no-such-model", "--out", tmp_path / "o") == 2
    assert run("diagnose", "--samples", bad, "--pair", "12", "--cond", 3, "--out", tmp_path / "o") == 2
    assert run("replay", tmp_path / "missing.json", "--out", tmp_path / "o") == 2
    assert run("reproduce", "table-divergence", "--n", 100, "--out", tmp_path / "o") == 2


def test_numeric_failure_exit_three(tmp_path):
    p = tmp_path / "short.csv"
    p.write_text("u1,u2\n" + "0.5,0.5\n" * 5)
    assert run("fit", "--samples", p, "--out", tmp_path / "o") == 3
