"""Command-line entry point: ``moment-spectra <command> ...``.

Commands
--------
gen       draw a ground-truth network and a labeled sample file
learn     fit a hypothesis from a sample file
eval      score a hypothesis against a model file
run       gen + learn + eval in one go from a JSON config
verify    run the property suites
schur     evaluate a Schur polynomial or run one of its bound checks

Exit codes: 0 on success, 1 on runtime or assertion failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .datagen import PROFILES, load_model, load_samples, random_network, sample, save_model, save_samples
from .errors import ConfigError, MomentSpectraError
from .evalharness import (
    DEFAULT_EVAL_POINTS,
    EvalReport,
    config_echo,
    l2_error_analytic,
    l2_error_mc,
    run_experiment,
)
from .learner import LearnConfig, learn, load_hypothesis, save_hypothesis
from .schur import Partition, schur_bialternant
from .suites import SUITES, run_suite

THREADS_ENV = "MOMENT_SPECTRA_THREADS"

# gen and learn default to the same directory, so each command has its own manifest name
MANIFESTS = {"gen": "gen_manifest.json", "learn": "manifest.json", "eval": "eval_manifest.json", "run": "manifest.json"}

# LearnConfig fields that may be set from flags; flag value None means "not given"
_LEARN_FLAGS = ("k", "epsilon", "degree_D", "moment_cutoff", "C_D", "seed", "sample_multiplier", "tie_tolerance", "degeneracy_threshold")


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1")
    return value


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return obj


def _merge_learn_config(args, base: dict) -> dict:
    """Config file values, overridden by any flag the user actually passed."""
    merged = dict(base)
    for name in _LEARN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return merged


# -- commands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    out = Path(args.out)
    net = random_network(args.d, args.k, args.profile, args.theta, args.seed)
    samples = sample(net, args.n, args.seed, noise_sigma=args.noise, threads=args.threads)
    out.mkdir(parents=True, exist_ok=True)
    save_model(net, out / "model.json")
    save_samples(samples, out / "samples.bin")
    _write_json(out / MANIFESTS["gen"], {
        "command": "gen",
        "d": args.d,
        "k": args.k,
        "n": args.n,
        "seed": args.seed,
        "profile": args.profile,
        "theta": args.theta,
        "noise": args.noise,
        "files": ["model.json", "samples.bin"],
    })
    print(f"wrote {out / 'model.json'} and {out / 'samples.bin'} ({args.n} samples, d={args.d})")
    return 0


def cmd_learn(args) -> int:
    samples = load_samples(args.samples)
    out = Path(args.out) if args.out else Path(args.samples).parent
    n_sub = int(round(len(samples) * args.split))
    if not 0 < n_sub < len(samples):
        raise ConfigError(f"split {args.split} leaves an empty stage for {len(samples)} samples")
    s_sub, s_reg = samples.split(n_sub)
    obj = _merge_learn_config(args, _load_config_file(args.config))
    obj.update(d=samples.dim, n_subspace=len(s_sub), n_regression=len(s_reg), threads=args.threads)
    if "k" not in obj:
        raise ConfigError("k is required (pass --k or set it in --config)")
    config = LearnConfig.from_json(obj)
    start = time.perf_counter()
    h = learn(s_sub, s_reg, config)
    elapsed = time.perf_counter() - start
    out.mkdir(parents=True, exist_ok=True)
    save_hypothesis(h, out / "hypothesis.bin")
    _write_json(out / "manifest.json", {
        "command": "learn",
        "samples": str(args.samples),
        "split": args.split,
        "config": config_echo(config),
        "degree_D": config.degree_D,
        "degree_capped": config.degree_capped,
        "eigenvalues": h.eigenvalues.tolist(),
        "sample_counts": {"subspace": len(s_sub), "regression": len(s_reg)},
    })
    _write_json(out / "timing.json", {"learn_seconds": elapsed, "threads": args.threads})
    print(f"learned k={h.k} D={h.degree} hypothesis -> {out / 'hypothesis.bin'}")
    print("eigenvalues: " + " ".join(f"{v:.6g}" for v in h.eigenvalues))
    return 0


def cmd_eval(args) -> int:
    net = load_model(args.model)
    h = load_hypothesis(args.hypothesis)
    out = Path(args.out) if args.out else Path(args.hypothesis).parent
    start = time.perf_counter()
    mc = l2_error_mc(net, h, args.n, args.seed, args.threads, args.proposal_scale)
    report = EvalReport(l2_error_mc=mc.value, l2_error_mc_se=mc.se)
    if args.analytic:
        an = l2_error_analytic(net, h)
        report.l2_error_analytic = an.value
        report.tail_bound = an.tail_bound
        report.per_order_errors = an.per_order_errors
    report.runtime = time.perf_counter() - start
    passed = args.assert_epsilon is None or mc.value <= args.assert_epsilon
    body = report.to_json(include_runtime=False)
    _write_json(out / "report.json", body)
    _write_json(out / MANIFESTS["eval"], {
        "command": "eval",
        "model": str(args.model),
        "hypothesis": str(args.hypothesis),
        "n": args.n,
        "seed": args.seed,
        "proposal_scale": args.proposal_scale,
        "analytic": args.analytic,
        "assert_epsilon": args.assert_epsilon,
        "passed": passed,
        "report": body,
    })
    print(f"l2_error_mc = {mc.value:.6g} +/- {mc.se:.2g} (n={args.n})")
    if args.analytic:
        print(f"l2_error_analytic = {report.l2_error_analytic:.6g} (tail bound {report.tail_bound:.3g})")
    if not passed:
        print(f"FAIL: l2_error_mc {mc.value:.6g} exceeds {args.assert_epsilon}", file=sys.stderr)
        return 1
    return 0


def cmd_run(args) -> int:
    obj = _load_config_file(args.config)
    instance = obj.pop("instance", None)
    n_eval = int(obj.pop("n_eval", DEFAULT_EVAL_POINTS))
    obj = _merge_learn_config(args, obj)
    if args.d is not None:
        obj["d"] = args.d
    obj["threads"] = args.threads
    if instance is None:
        instance = {"d": obj.get("d"), "k": obj.get("k"), "profile": args.profile, "theta": args.theta, "seed": obj.get("seed", 0)}
    for key in ("k", "d"):
        if obj.get(key) is None:
            raise ConfigError(f"{key} is required (pass --{key} or set it in --config)")
    config = LearnConfig.from_json(obj)
    report, manifest, _ = run_experiment(config, instance, args.out, n_eval=n_eval, analytic=args.analytic)
    print(f"l2_error_mc = {report.l2_error_mc:.6g} +/- {report.l2_error_mc_se:.2g}")
    if report.l2_error_analytic is not None:
        print(f"l2_error_analytic = {report.l2_error_analytic:.6g}")
    if args.assert_epsilon is not None and report.l2_error_mc > args.assert_epsilon:
        print(f"FAIL: l2_error_mc {report.l2_error_mc:.6g} exceeds {args.assert_epsilon}", file=sys.stderr)
        return 1
    return 0


def _print_reports(reports, out, command, params) -> int:
    for r in reports:
        print(r.summary())
    passed = all(r.passed for r in reports)
    if out is not None:
        _write_json(Path(out) / "manifest.json", {
            "command": command,
            "params": params,
            "passed": passed,
            "reports": [
                {"suite": r.suite, "params": r.params, "trials": r.trials, "worst_ratio": r.worst_ratio, "violations": r.violations}
                for r in reports
            ],
        })
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def cmd_verify(args) -> int:
    reports = run_suite(args.suite, args.seed, args.k, args.t, args.dim, args.trials)
    params = {"suite": args.suite, "seed": args.seed, "k": args.k, "t": args.t, "dim": args.dim, "trials": args.trials}
    return _print_reports(reports, args.out, "verify", params)


def cmd_schur_eval(args) -> int:
    lam = Partition.parse(args.lam)
    x = [float(v) for v in args.x.split(",")]
    value = schur_bialternant(lam, x)
    print(f"{value:.15g}")
    if args.out is not None:
        _write_json(Path(args.out) / "manifest.json", {"command": "schur eval", "lambda": str(lam), "x": x, "value": value})
    return 0


def cmd_schur_verify(args) -> int:
    reports = run_suite(args.suite, args.seed, args.k, args.t, args.dim, args.trials)
    params = {"suite": args.suite, "seed": args.seed, "k": args.k, "t": args.t, "dim": args.dim, "trials": args.trials}
    return _print_reports(reports, args.out, "schur verify", params)


# -- parser -------------------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def _add_learn_flags(p, require_k=False):
    p.add_argument("--config", help="JSON file with LearnConfig keys; flags override it")
    p.add_argument("--k", type=_positive_int, required=require_k, help="number of ReLU units")
    p.add_argument("--epsilon", type=float, help="target L2 error")
    p.add_argument("--degree-D", dest="degree_D", type=int, help="regression degree (default from epsilon)")
    p.add_argument("--moment-cutoff", type=int, help="highest moment order used for the subspace (default 4k)")
    p.add_argument("--C-D", dest="C_D", type=float, help="constant in the default degree formula")
    p.add_argument("--sample-multiplier", type=float)
    p.add_argument("--tie-tolerance", type=float)
    p.add_argument("--degeneracy-threshold", type=float)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moment-spectra", description="Learn sums of ReLUs from Gaussian moment tensors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--threads",
        type=_positive_int,
        default=None,
        help=f"worker threads (default: ${THREADS_ENV} or 1); outputs do not depend on it",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="draw a network and labeled samples")
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=PROFILES, default="generic")
    p.add_argument("--theta", type=float, default=0.01, help="angle bound for near-parallel")
    p.add_argument("--noise", type=float, default=0.0, help="std of additive label noise")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("learn", help="fit a hypothesis from samples.bin")
    p.add_argument("--samples", required=True)
    p.add_argument("--split", type=_fraction, default=0.5, help="fraction of samples used for the subspace stage")
    p.add_argument("--out", help="output directory (default: next to the samples)")
    _add_learn_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="score a hypothesis against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--n", type=_positive_int, default=DEFAULT_EVAL_POINTS)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--assert-epsilon", type=float, help="exit 1 unless the MC error is at most this")
    p.add_argument("--analytic", action="store_true", help="add the closed-form error decomposition")
    p.add_argument("--proposal-scale", type=float, default=1.0, help="importance-sampling scale (1 = plain Gaussian)")
    p.add_argument("--out", help="output directory (default: next to the hypothesis)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="generate, learn and evaluate in one step")
    _add_learn_flags(p)
    p.add_argument("--d", type=_positive_int)
    p.add_argument("--profile", choices=PROFILES, default="generic")
    p.add_argument("--theta", type=float, default=0.01)
    p.add_argument("--analytic", action="store_true")
    p.add_argument("--assert-epsilon", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run property suites")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--t", type=int)
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--out", help="directory for a manifest of the reports")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("schur", help="Schur polynomial tools")
    schur_sub = p.add_subparsers(dest="schur_command", required=True)
    q = schur_sub.add_parser("eval", help="evaluate s_lambda(x)")
    q.add_argument("--lambda", dest="lam", required=True, help="comma-separated parts, e.g. 2,1")
    q.add_argument("--x", required=True, help="comma-separated values")
    q.add_argument("--out")
    q.set_defaults(func=cmd_schur_eval)
    q = schur_sub.add_parser("verify", help="run one bound or recursion check")
    q.add_argument("--suite", choices=("scalar", "recursion", "even"), required=True)
    q.add_argument("--k", type=_positive_int)
    q.add_argument("--t", type=int)
    q.add_argument("--dim", type=_positive_int)
    q.add_argument("--trials", type=_positive_int)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_schur_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is None:
            args.threads = _default_threads()
        # BLAS stays single-threaded so results never depend on the thread count
        with threadpool_limits(limits=1):
            return args.func(args)
    except (MomentSpectraError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _record_failure(args, exc)
        return 1


def _record_failure(args, exc):
    """Best effort: leave a manifest naming the error where outputs would have gone."""
    name = MANIFESTS.get(args.command)
    out = getattr(args, "out", None)
    if out is None and args.command == "learn":
        out = Path(args.samples).parent
    if out is None and args.command == "eval":
        out = Path(args.hypothesis).parent
    if name is None or out is None:
        return
    try:
        _write_json(Path(out) / name, {"command": args.command, "error": f"{type(exc).__name__}: {exc}"})
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
