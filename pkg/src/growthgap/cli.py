"""growthgap command-line front end.

Exit codes: 0 pass, 2 fail, 3 inconclusive, 4 validation error, 5 resource error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def build_parser():
    p = argparse.ArgumentParser(prog="growthgap", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="cap BLAS/OpenMP threads")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("growth", help="ball sizes and growth-rate estimate")
    g.add_argument("--group", required=True)
    g.add_argument("--order")
    g.add_argument("--radius", type=int, default=10)
    g.add_argument("--out", default="-")

    s = sub.add_parser("sft", help="shift of finite type tools")
    ssub = s.add_subparsers(dest="sft_command", required=True)
    scc = ssub.add_parser("scc", help="communicating classes and their dag")
    scc.add_argument("--sft", required=True)
    scc.add_argument("--out", default="-")

    h = sub.add_parser("horocode", help="horofunction coding")
    hsub = h.add_subparsers(dest="horocode_command", required=True)
    hb = hsub.add_parser("build")
    hb.add_argument("--group", required=True)
    hb.add_argument("--order")
    hb.add_argument("--R0", type=int, default=1)
    hb.add_argument("--L0", type=int, default=3)
    hb.add_argument("--backend", choices=["exact", "generic"], default="exact")
    hb.add_argument("--R-stab", dest="R_stab", type=int, default=12)
    hb.add_argument("--out", default="-")

    r = sub.add_parser("rho", help="sup-norm spectral radius of a transfer operator")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--sft")
    src.add_argument("--group")
    r.add_argument("--potential", default="const:1")
    r.add_argument("--depth", type=int)
    r.add_argument("--iters", type=int, default=40)
    r.add_argument("--out", default="-")

    rl = sub.add_parser("rho-lambda", help="twisted spectral radius on a truncated Schreier graph")
    rl.add_argument("--group", required=True)
    rl.add_argument("--subgroup", default="trivial")
    rl.add_argument("--order")
    rl.add_argument("--trunc", type=int, default=8)
    rl.add_argument("--depth", type=int)
    rl.add_argument("--iters", type=int)
    rl.add_argument("--seed-radius", dest="seed_radius", type=int, default=0)
    rl.add_argument("--out", default="-")

    gr = sub.add_parser("gap-report", help="growth-gap / amenability verdict")
    gr.add_argument("--group", required=True)
    gr.add_argument("--subgroup", default="trivial")
    gr.add_argument("--order")
    gr.add_argument("--config")
    gr.add_argument("--out", default="-")

    w = sub.add_parser("walk", help="sphere random-walk return probabilities")
    w.add_argument("--group", required=True)
    w.add_argument("--subgroup", default="trivial")
    w.add_argument("--order")
    w.add_argument("--ell", type=int, default=1)
    w.add_argument("--delta", type=float, default=1.0)
    w.add_argument("--nmax", type=int, default=24)
    w.add_argument("--trunc", type=int)
    w.add_argument("--method", choices=["schreier-dp", "radial-dp"])
    w.add_argument("--out", default="-")

    e = sub.add_parser("experiment", help="run a configured experiment")
    esub = e.add_subparsers(dest="experiment_command", required=True)
    er = esub.add_parser("run")
    er.add_argument("--config", required=True)
    er.add_argument("--out", help="report path (.json or .csv); defaults to the config's outputs")
    return p


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _fmt_of(path, default):
    if path and path.endswith(".csv"):
        return "csv"
    if path and path.endswith(".json"):
        return "json"
    return default


def _emit_report(rep, path, table, default="csv"):
    from .experiments import emit
    fmt = _fmt_of(path, default)
    text = emit(rep, fmt, None, table=table)
    _write(text, path)


def _params(args, *names):
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def dispatch(args):
    from .experiments import ExperimentConfig, emit, run_experiment

    if args.command == "growth":
        cfg = ExperimentConfig("growth", "growth", args.group, None, _params(args, "order", "radius"))
        rep = run_experiment(cfg)
        _emit_report(rep, args.out, "growth")
        return 0
    if args.command == "sft":
        from .sft import Sft, communicating_classes
        dec = communicating_classes(Sft.load(args.sft))
        _write(json.dumps(dec.to_json(), sort_keys=True, indent=2) + "\n", args.out)
        return 0
    if args.command == "horocode":
        from .groups import parse_group
        from .horocode import build_coding
        coding = build_coding(parse_group(args.group, args.order), args.R0, args.L0,
                              args.backend, args.R_stab)
        _write(json.dumps(coding.to_json(), sort_keys=True, indent=2) + "\n", args.out)
        return 0
    if args.command == "rho":
        cfg = ExperimentConfig("rho", "rho", args.group, None,
                               _params(args, "sft", "potential", "depth", "iters"))
        rep = run_experiment(cfg)
        _emit_report(rep, args.out, "rho")
        return rep.exit_status
    if args.command == "rho-lambda":
        cfg = ExperimentConfig("rho-lambda", "rho-lambda", args.group, args.subgroup,
                               _params(args, "order", "trunc", "depth", "iters", "seed_radius"))
        rep = run_experiment(cfg)
        _emit_report(rep, args.out, "rho_lambda")
        return rep.exit_status
    if args.command == "gap-report":
        params = _params(args, "order")
        if args.config:
            with open(args.config) as fh:
                params["config"] = json.load(fh)
        rep = run_experiment(ExperimentConfig("gap-report", "gap-report", args.group, args.subgroup, params))
        _emit_report(rep, args.out, "curve", default="json")
        return rep.exit_status
    if args.command == "walk":
        cfg = ExperimentConfig("walk", "walk", args.group, args.subgroup,
                               _params(args, "order", "ell", "delta", "nmax", "trunc", "method"))
        rep = run_experiment(cfg)
        _emit_report(rep, args.out, "walk")
        return rep.exit_status
    if args.command == "experiment":
        cfg = ExperimentConfig.load(args.config)
        rep = run_experiment(cfg)
        if args.out:
            _emit_report(rep, args.out, None, default="json")
        else:
            for fmt, path in sorted(cfg.outputs.items()):
                emit(rep, fmt, path)
            if not cfg.outputs:
                _emit_report(rep, "-", None, default="json")
        print(f"{cfg.id}: {rep.verdict}", file=sys.stderr)
        return rep.exit_status
    raise AssertionError(args.command)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        # effective only before the numeric libraries load, hence the lazy imports below
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .errors import GrowthGapError
    try:
        return dispatch(args)
    except GrowthGapError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return exc.exit_status
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
