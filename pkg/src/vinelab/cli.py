"""
vinelab command line: simulate, fit, diagnose, divergence, reproduce, replay.

Every command writes into an output directory together with a
``manifest.json`` recording the full configuration; ``vinelab replay``
re-runs a manifest into a fresh directory.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""
import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .copulas import DomainError, TauRangeError, family_name, tau_to_param
from .diagnostics import (DiagnosticError, binned_conditional_tau, dinf_estimate, kl_estimate,
                          sa_permutation_test)
from .fitting import FitConfig, FitError, fit_sequential, fit_vine
from .generators import (FIG4_STRENGTH, builtin, builtin_structure,
                         conditional_copula_amh, conditional_copula_frank, conditional_tau_curve,
                         fig2_mismatched_decomposition, fig2_true_model, fig4_model, fig4_structure,
                         trivariate_amh, trivariate_frank)
from .io import (InputError, load_model, load_structure, read_json, read_samples, write_json,
                 write_rows, write_samples)
from .structure import Edge, StructureError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
FIG3_TAUS = (0.1, 0.2, 0.3)


class _Input(Exception):
    pass


def _seed(args):
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("VINELAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _Input(f"VINELAB_SEED must be an integer, got {env!r}") from None
    return 0


def _rng(seed, *stream):
    return np.random.default_rng([seed, *stream]) if stream else np.random.default_rng(seed)


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_model(spec):
    """Builtin identifier or path to model JSON."""
    p = Path(spec)
    if p.suffix == ".json" or p.exists():
        return load_model(p)
    try:
        return builtin(spec)
    except (KeyError, ValueError) as exc:
        raise _Input(str(exc).strip("'\"")) from None


def _resolve_structure(spec):
    if spec is None or spec == "auto":
        return "auto"
    p = Path(spec)
    if p.suffix == ".json" or p.exists():
        return load_structure(p)
    return builtin_structure(spec)


def _parse_pair(text):
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise _Input(f"--pair must look like 'i,j', got {text!r}") from None
    return a, b


def _families(text):
    if text is None:
        return FitConfig().family_set
    try:
        return tuple(family_name(f) for f in text.split(",") if f.strip())
    except ValueError as exc:
        raise _Input(str(exc)) from None


# ---------------------------------------------------------------------------
# commands; each returns (outputs, extra manifest fields)


def cmd_simulate(args):
    _absolute(args, "model")
    seed = _seed(args)
    model = _resolve_model(args.model)
    if args.n < 0:
        raise _Input("--n must be nonnegative")
    x = model.simulate(args.n, _rng(seed))
    out = _outdir(args)
    columns = getattr(model, "columns", None)
    write_samples(out / "samples.csv", x if args.n else np.empty((0, model.d)),
                  columns if columns else [f"u{i}" for i in range(1, model.d + 1)])
    return ["samples.csv"], {"seed": seed, "inputs": {"model": args.model}}


def _absolute(args, *names):
    for name in names:
        value = getattr(args, name)
        if value is not None and Path(value).exists():
            setattr(args, name, str(Path(value).resolve()))


def cmd_fit(args):
    _absolute(args, "samples", "structure")
    x, _ = read_samples(args.samples)
    structure = _resolve_structure(args.structure)
    cfg = FitConfig(_families(args.families), not args.no_rotations, args.criterion, structure,
                    args.indep_test)
    report = fit_vine(x, cfg)
    out = _outdir(args)
    write_json(out / "model.json", report.fitted.to_dict())
    write_json(out / "fit_report.json", report.to_dict())
    write_rows(out / "edges.csv", report.table())
    return ["model.json", "fit_report.json", "edges.csv"], {
        "inputs": {"samples": str(Path(args.samples).resolve())}}


def cmd_diagnose(args):
    _absolute(args, "samples")
    seed = _seed(args)
    x, _ = read_samples(args.samples)
    pair = _parse_pair(args.pair)
    d = x.shape[1]
    if not {pair[0], pair[1], args.cond} <= set(range(1, d + 1)) or len({*pair, args.cond}) != 3:
        raise _Input(f"--pair and --cond must name distinct columns in 1..{d}")
    rep = binned_conditional_tau(x, pair, args.cond, args.bins, args.transform)
    res = {"binned": rep.to_dict()}
    if args.n_perm:
        perm = sa_permutation_test(x, pair, args.cond, args.bins, args.n_perm, _rng(seed),
                                   args.transform)
        res["permutation"] = perm.to_dict()
    out = _outdir(args)
    write_json(out / "diagnose.json", res)
    write_rows(out / "bins.csv", rep.rows())
    return ["diagnose.json", "bins.csv"], {"seed": seed, "inputs": {
        "samples": str(Path(args.samples).resolve())}}


def cmd_divergence(args):
    _absolute(args, "true", "fit")
    seed = _seed(args)
    truth = _resolve_model(args.true)
    fitted = load_model(args.fit)
    if truth.d != fitted.d:
        raise _Input(f"dimension mismatch: truth d={truth.d}, fit d={fitted.d}")
    metrics = [m.strip().lower() for m in args.metrics.split(",") if m.strip()]
    bad = [m for m in metrics if m not in ("dinf", "kl")]
    if bad or not metrics:
        raise _Input(f"--metrics must be a subset of dinf,kl; got {args.metrics!r}")
    reports = []
    for i, m in enumerate(metrics):
        rng = _rng(seed, i)
        if m == "dinf":
            reports.append(dinf_estimate(truth, fitted, args.n, args.m_eval, rng, seed=seed))
        else:
            reports.append(kl_estimate(truth, fitted, args.n, rng, seed=seed))
    out = _outdir(args)
    write_json(out / "divergence.json", [r.to_dict() for r in reports])
    write_rows(out / "divergence.csv", [{"metric": r.metric, "estimate": r.estimate, "se": r.se,
                                         "n": r.n} for r in reports])
    inputs = {"true": args.true, "fit": str(Path(args.fit).resolve())}
    return ["divergence.json", "divergence.csv"], {"seed": seed, "inputs": inputs}


# -- reproduce ---------------------------------------------------------------


def _reproduce_fig2(out, seed, n, bins, n_perm):
    x = fig2_true_model().simulate(n, _rng(seed))
    write_samples(out / "fig2_samples.csv", x)
    views = {"explicit": ((1, 3), 2), "mismatched": ((1, 2), 3)}
    rows, scatter, summary = [], [], {"n": n, "bins": bins, "views": {}}
    for view, (pair, cond) in views.items():
        entry = {"pair": list(pair), "cond": cond}
        for transform in ("ranks", "h"):
            rep = binned_conditional_tau(x, pair, cond, bins, transform)
            entry[f"range_{transform}"] = rep.range
            for r in rep.rows():
                rows.append({"view": view, "transform": transform, **r})
        perm = sa_permutation_test(x, pair, cond, bins, n_perm, _rng(seed, 1, len(summary["views"])))
        entry["permutation_p"] = perm.p_value
        summary["views"][view] = entry
        # scatter data: within-bin ranks of the pair
        k = x[:, cond - 1]
        idx = np.clip((k * bins).astype(int), 0, bins - 1)
        for b in range(bins):
            sel = np.flatnonzero(idx == b)
            m = sel.size
            ra = np.argsort(np.argsort(x[sel, pair[0] - 1])) + 1.0
            rb = np.argsort(np.argsort(x[sel, pair[1] - 1])) + 1.0
            for i in range(m):
                scatter.append({"view": view, "bin": b, "x": ra[i] / (m + 1.0),
                                "y": rb[i] / (m + 1.0)})
    summary["structures"] = {"explicit": fig2_true_model().structure.to_dict(),
                             "mismatched": fig2_mismatched_decomposition().to_dict()}
    write_rows(out / "fig2_binned_tau.csv", rows)
    write_rows(out / "fig2_scatter.csv", scatter)
    return ["fig2_samples.csv", "fig2_binned_tau.csv", "fig2_scatter.csv"], summary


def _reproduce_fig3(out):
    grid = np.arange(1, 100) / 100.0
    rows, summary = [], {"unconditional_taus": list(FIG3_TAUS), "curves": []}
    for fam, closed in (("frank", conditional_copula_frank), ("amh", conditional_copula_amh)):
        for t in FIG3_TAUS:
            eta = tau_to_param(fam, t).par
            curve = conditional_tau_curve(lambda u3, e=eta, f=closed: f(e, u3), grid)
            exact = trivariate_amh(eta) if fam == "amh" else trivariate_frank(eta)
            lo, hi = float(curve[:, 1].min()), float(curve[:, 1].max())
            for u3, tc in curve:
                pc = closed(eta, u3)
                rows.append({"family": fam, "tau": t, "eta": eta, "u3": float(u3),
                             "param": pc.par if pc.family != "indep" else 0.0,
                             "tau_cond": float(tc),
                             "tau_cond_generator": exact.exact_conditional_tau(u3)})
            summary["curves"].append({"family": fam, "tau": t, "eta": eta, "min": lo, "max": hi})
    summary["all_within_0_one_third"] = all(0.0 <= c["min"] and c["max"] <= 1 / 3 + 1e-9
                                            for c in summary["curves"])
    write_rows(out / "fig3_curves.csv", rows)
    return ["fig3_curves.csv"], summary


def _fit_fig4(strength, seed, n):
    g = fig4_model(strength)
    x = g.simulate(n, _rng(seed, 4, list(FIG4_STRENGTH).index(strength)))
    return g, x, fit_sequential(x, fig4_structure())


def _reproduce_fig4(out, seed, n):
    files, rows, summary = [], [], {"n": n}
    target = Edge(2, 3, (1, 4))
    for strength in FIG4_STRENGTH:
        _, x, rep = _fit_fig4(strength, seed, n)
        write_samples(out / f"fig4_{strength}_samples.csv", x)
        write_json(out / f"fig4_{strength}_model.json", rep.fitted.to_dict())
        files += [f"fig4_{strength}_samples.csv", f"fig4_{strength}_model.json"]
        for r in rep.table():
            rows.append({"strength": strength, **r})
        fit = rep.edges[target]
        summary[strength] = {"edge": str(target), "family": fit.copula.family,
                             "rotation": fit.copula.rotation, "tau_hat": fit.tau_hat,
                             "empirical_tau": fit.empirical_tau}
    write_rows(out / "fig4_edges.csv", rows)
    return files + ["fig4_edges.csv"], summary


def _reproduce_divergence(out, seed, n, m_eval):
    rows, summary = [], {"n": n, "m_eval": m_eval}
    for i, strength in enumerate(FIG4_STRENGTH):
        g, _, rep = _fit_fig4(strength, seed, n)
        d = dinf_estimate(g, rep.fitted, n, m_eval, _rng(seed, 5, i), seed=seed)
        k = kl_estimate(g, rep.fitted, n, _rng(seed, 6, i), seed=seed)
        for r in (d, k):
            rows.append({"strength": strength, "metric": r.metric, "estimate": r.estimate,
                         "se": r.se, "n": r.n})
        summary[strength] = {"dinf": d.estimate, "dinf_se": d.se, "kl": k.estimate, "kl_se": k.se}
    summary["method_note"] = "parametric sequential fit; published reference values came from a nonparametric fit"
    write_rows(out / "divergence_table.csv", rows)
    return ["divergence_table.csv"], summary


def cmd_reproduce(args):
    seed = _seed(args)
    out = _outdir(args)
    if args.target == "fig2":
        files, summary = _reproduce_fig2(out, seed, args.n, args.bins, args.n_perm)
    elif args.target == "fig3":
        files, summary = _reproduce_fig3(out)
    elif args.target == "fig4":
        files, summary = _reproduce_fig4(out, seed, args.n)
    else:
        files, summary = _reproduce_divergence(out, seed, args.n, args.m_eval)
    summary = {"target": args.target, "seed": seed, **summary}
    write_json(out / "summary.json", summary)
    return files + ["summary.json"], {"seed": seed, "inputs": {}}


# ---------------------------------------------------------------------------


def _config(args):
    return {k: v for k, v in vars(args).items() if k not in ("func", "out")}


def _run(args, argv):
    t0 = time.perf_counter()
    files, extra = args.func(args)
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": _config(args),
        "seed": extra.get("seed"),
        "version": __version__,
        "inputs": extra.get("inputs", {}),
        "outputs": sorted(files),
        "out": str(Path(args.out).resolve()),
        "threads": args.threads,
        "wall_time_s": time.perf_counter() - t0,
    }
    write_json(Path(args.out) / "manifest.json", manifest)
    return manifest


_COMMANDS = {}


def cmd_replay(args):
    man = read_json(args.manifest)
    try:
        command, config = man["command"], dict(man["config"])
    except (KeyError, TypeError):
        raise InputError(f"{args.manifest}: not a vinelab manifest") from None
    if command not in _COMMANDS:
        raise InputError(f"{args.manifest}: unknown command {command!r}")
    ns = argparse.Namespace(**config)
    ns.command, ns.func, ns.out = command, _COMMANDS[command], args.out
    if getattr(ns, "seed", None) is None and man.get("seed") is not None:
        ns.seed = man["seed"]
    return _run(ns, ["replay", str(args.manifest)])


def build_parser():
    p = argparse.ArgumentParser(prog="vinelab", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"vinelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", "--outdir", dest="out", default="vinelab-out",
                        help="output directory (default: vinelab-out)")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker cap; computations are vectorized in one process")
        if seed:
            sp.add_argument("--seed", type=int, default=None,
                            help="random seed (fallback: VINELAB_SEED, then 0)")

    sp = sub.add_parser("simulate", help="draw samples from a builtin or JSON model")
    sp.add_argument("--model", required=True,
                    help="model JSON path or builtin: fig2-true, fig2-mismatch, fig4-strong, "
                         "fig4-moderate, frank3:<eta>, amh3:<eta>, gauss-regression")
    sp.add_argument("--n", type=int, default=10_000)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="sequential maximum-likelihood fit of a simplified vine")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--structure", default="auto",
                    help="'auto', a structure/model JSON path, or a builtin name")
    sp.add_argument("--families", default=None,
                    help="comma-separated families (default: indep,gaussian,clayton,gumbel,frank)")
    sp.add_argument("--criterion", default="aic", choices=("aic", "loglik"))
    sp.add_argument("--no-rotations", action="store_true")
    sp.add_argument("--indep-test", type=float, default=None,
                    help="level of an optional tau independence pre-test")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_fit, seed=None)

    sp = sub.add_parser("diagnose", help="binned conditional tau and permutation test")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--pair", required=True, help="i,j")
    sp.add_argument("--cond", type=int, required=True)
    sp.add_argument("--bins", type=int, default=5)
    sp.add_argument("--n-perm", type=int, default=199, help="0 skips the permutation test")
    sp.add_argument("--transform", default="ranks", choices=("ranks", "h"))
    common(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("divergence", help="d-infinity and KL between a true and a fitted model")
    sp.add_argument("--true", required=True, help="builtin name or model JSON")
    sp.add_argument("--fit", required=True, help="fitted model JSON")
    sp.add_argument("--metrics", default="dinf,kl")
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--m-eval", type=int, default=2000)
    common(sp)
    sp.set_defaults(func=cmd_divergence)

    sp = sub.add_parser("reproduce", help="regenerate figure data and headline numbers")
    sp.add_argument("target", choices=("fig2", "fig3", "fig4", "table-divergence"))
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--bins", type=int, default=5)
    sp.add_argument("--n-perm", type=int, default=199)
    sp.add_argument("--m-eval", type=int, default=2000)
    common(sp)
    sp.set_defaults(func=cmd_reproduce)

    sp = sub.add_parser("replay", help="re-run a manifest into a new output directory")
    sp.add_argument("manifest")
    sp.add_argument("--out", "--outdir", dest="out", required=True)
    sp.set_defaults(func=None)
    _COMMANDS.update(simulate=cmd_simulate, fit=cmd_fit, diagnose=cmd_diagnose,
                     divergence=cmd_divergence, reproduce=cmd_reproduce)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            manifest = cmd_replay(args)
        else:
            manifest = _run(args, argv)
    except (_Input, InputError, StructureError, DomainError, TauRangeError, KeyError,
            FileNotFoundError) as exc:
        print(f"vinelab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, DiagnosticError, FloatingPointError, ArithmeticError) as exc:
        print(f"vinelab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"vinelab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps({"out": manifest["out"], "outputs": manifest["outputs"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
