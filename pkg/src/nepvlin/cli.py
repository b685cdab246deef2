"""Command-line driver: ``nepvlin {gen,solve,reference,verify,probe}``.

Standard output carries JSON only; diagnostics go to standard error at the
level named by the ``NEPV_LOG`` environment variable (error, info, debug).
Usage and input errors exit with status 2, numerical failures with 1 and a
``verify`` that finds missing solutions with 3.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import generators
from .arnoldi import RunConfig, run_solver
from .exceptions import NepvError
from .io import (
    BundleError,
    ensure_dir,
    load_bundle,
    load_solutions,
    save_bundle,
    save_solutions,
    solutions_document,
    write_convergence_csv,
    write_json,
)
from .linearization import build_linearization, delta0_probe
from .plotting import convergence_svg, spectrum_svg
from .reference import MAX_DENSE_N, ScfConfig, cross_validate, dense_reference_solve, scf_multistart

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_MISSING = 0, 1, 2, 3

log = logging.getLogger("nepvlin")


class UsageError(Exception):
    pass


def parse_shift(text):
    """``"re"`` or ``"re,im"`` to a complex number."""
    parts = text.split(",")
    if len(parts) > 2:
        raise argparse.ArgumentTypeError(f"bad shift {text!r}; expected re[,im]")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad shift {text!r}; expected re[,im]") from exc
    return complex(vals[0], vals[1] if len(vals) == 2 else 0.0)


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load(path):
    try:
        return load_bundle(path)
    except BundleError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands --------------------------------------------------------------


def cmd_gen(args):
    name = args.example.replace("-", "_")
    if name == "example1":
        problem = generators.gen_example1(args.n, args.seed)
    elif name == "example2":
        problem = generators.gen_example2(args.L, args.n)
    elif name == "example3":
        problem = generators.gen_example3(args.n, args.r, args.seed)
    else:
        problem = generators.GENERATORS[name]()
    out = save_bundle(problem, args.out)
    _emit({"bundle": str(out), "n": problem.n, "generator": problem.meta.get("generator")})
    return EXIT_OK


def cmd_solve(args):
    problem = _load(args.bundle)
    config = RunConfig(
        algorithm=args.algorithm,
        shift=args.shift,
        max_iter=args.max_iter,
        tol_conv=args.tol_conv,
        tol_res=args.tol_res,
        seed=args.seed,
        r_spec=args.r_spec,
        stop_after_genuine=args.stop_after_genuine,
        output_dir=args.out,
    )
    result = run_solver(problem, config)
    out = ensure_dir(args.out)
    meta = {
        "algorithm": args.algorithm,
        "shift": config.shift,
        "max_iter": config.max_iter,
        "iterations": result.state.iteration,
        "seed": config.seed,
        "r_spec": config.r_spec,
        "probe": str(result.probe),
    }
    save_solutions(out / "solutions.json", result.solutions, **meta)
    write_convergence_csv(out / "convergence.csv", result.log)
    if args.plots:
        (out / "convergence.svg").write_text(convergence_svg(result.log, result.genuine_tracks))
        ritz = result.state.last_ritz.lam if result.state.last_ritz is not None else []
        (out / "spectrum.svg").write_text(spectrum_svg(ritz, [s.lam for s in result.solutions]))
    _emit({
        "solutions": len(result.solutions),
        "lambdas": [float(np.real(s.lam)) for s in result.solutions],
        "iterations": result.state.iteration,
        "output": str(out),
    })
    return EXIT_OK


def cmd_reference(args):
    problem = _load(args.bundle)
    scf, stats = scf_multistart(problem, args.trials, ScfConfig(seed=args.seed), return_stats=True)
    doc_meta = {"scf_runs": stats.runs, "scf_converged": stats.converged, "scf_found": len(scf)}
    if problem.n <= MAX_DENSE_N:
        lin = build_linearization(problem, args.r_spec, args.seed)
        ref = dense_reference_solve(lin)
        genuine = ref.genuine()
        doc_meta.update(source="dense", eigenpairs=len(ref), deflated=ref.deflated,
                        counts={c: ref.count(c) for c in sorted({x.classification.value for x in ref.candidates})})
    else:
        genuine = scf
        doc_meta["source"] = "scf"
    doc = solutions_document(genuine, **doc_meta)
    doc["scf"] = solutions_document(scf)["solutions"]
    path = Path(args.out)
    if path.suffix != ".json":
        path = ensure_dir(path) / "reference.json"
    else:
        ensure_dir(path.parent)
    write_json(path, doc)
    _emit({"reference": str(path), "solutions": len(genuine), "scf": len(scf), "source": doc_meta["source"]})
    return EXIT_OK


def _solutions_path(path):
    path = Path(path)
    if path.is_dir():
        for name in ("solutions.json", "reference.json"):
            if (path / name).exists():
                return path / name
    return path


def cmd_verify(args):
    try:
        found = load_solutions(_solutions_path(args.solutions))
        reference = load_solutions(_solutions_path(args.reference))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read solutions: {exc}") from exc
    report = cross_validate(found, reference, args.tol)
    _emit(report.summary())
    return EXIT_MISSING if report.missing else EXIT_OK


def cmd_probe(args):
    problem = _load(args.bundle)
    lin = build_linearization(problem, args.r_spec, args.seed)
    probe = delta0_probe(lin)
    _emit({"verdict": probe.verdict, "rank_C": probe.rank_C, "sigma_min_ratio": probe.sigma_min_ratio,
           "n": problem.n})
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="nepvlin", description="Solve eigenvector-nonlinear eigenproblems "
                                     "through a compact linearization.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a problem bundle")
    g.add_argument("example", choices=sorted(generators.GENERATORS))
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--r", type=int, default=2, help="rank of C for example3")
    g.add_argument("--L", type=float, default=2.0, help="domain length for example2")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run an Arnoldi solver on a bundle")
    s.add_argument("bundle")
    s.add_argument("--algorithm", choices=["filtering", "two-sided", "standard", "auto"], default="filtering")
    s.add_argument("--shift", type=parse_shift, default=0j, help='complex shift as "re[,im]"')
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--tol-conv", type=float, default=1e-8)
    s.add_argument("--tol-res", type=float, default=1e-8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--r-spec", default="random")
    s.add_argument("--stop-after-genuine", type=int, default=None)
    s.add_argument("--out", default="out")
    s.add_argument("--plots", action="store_true")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("reference", help="dense and SCF reference solutions for small problems")
    r.add_argument("bundle")
    r.add_argument("--trials", type=int, default=16)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--r-spec", default="random")
    r.add_argument("--out", default="reference.json")
    r.set_defaults(func=cmd_reference)

    v = sub.add_parser("verify", help="compare solutions against a reference")
    v.add_argument("solutions")
    v.add_argument("reference")
    v.add_argument("--tol", type=float, default=1e-6)
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("probe", help="report whether Delta0 is regular")
    p.add_argument("bundle")
    p.add_argument("--r-spec", default="random")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_probe)
    return parser


def _configure_logging():
    level = os.environ.get("NEPV_LOG", "error").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "max_iter", 1) < 1:
            raise UsageError("--max-iter must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NepvError, np.linalg.LinAlgError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


cli_run = main

if __name__ == "__main__":
    sys.exit(main())
