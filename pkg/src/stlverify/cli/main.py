"""Command-line interface.

Exit codes: 0 safe, 1 unsafe, 2 unknown, 3 invalid problem or arguments,
4 I/O failure. Set ``STLVERIFY_LOG`` (e.g. ``INFO`` or ``DEBUG``) for
progress messages on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from stlverify.cli.benchmarks import GENERATORS, generate_benchmark
from stlverify.cli.outputs import Occupancy, reach_to_json, write_counterexample_csv, write_json
from stlverify.cli.problem import ProblemError, ProblemFile, load_problem, save_problem
from stlverify.stl.parser import StlSyntaxError, parse_stl
from stlverify.stl.transform import formula_horizon
from stlverify.verify import VerifierConfig, monte_carlo_check, predict_safe_behaviors, verify

EXIT = {"safe": 0, "unsafe": 1, "unknown": 2}
EXIT_INPUT = 3
EXIT_IO = 4

log = logging.getLogger("stlverify")


def _common(p: argparse.ArgumentParser, problem: bool = True) -> None:
    if problem:
        p.add_argument("--problem", required=True, help="problem JSON file")
    p.add_argument("--spec", help="STL formula overriding the one in the problem file")
    p.add_argument("--max-iter", type=int, default=12, help="refinement cap (default 12)")
    p.add_argument("--dt-init", type=float, help="initial time step (default: formula horizon)")
    p.add_argument("--epsilon", type=float, default=1e-6, help="strictness margin of the counterexample search")
    p.add_argument("--baseline", choices=["wholeset"], help="also report the whole-set entailment verdict")
    p.add_argument("--emit-reach", action="store_true", help="write reach.json for the last iteration")
    p.add_argument("--out", default="out", help="output directory (default ./out)")
    p.add_argument("--seed", type=int, help="validate a safe verdict with seeded Monte-Carlo simulation")
    p.add_argument("--mc-samples", type=int, default=1000, help="Monte-Carlo trajectories (default 1000)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlverify", description="Verify linear systems against STL formulas.")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("verify", help="prove or falsify the formula"))
    _common(sub.add_parser("falsify-only", help="search for a counterexample only"))
    pr = sub.add_parser("predict", help="occupancy of all behaviours that may satisfy the formula")
    pr.add_argument("--problem", required=True)
    pr.add_argument("--spec")
    pr.add_argument("--dt-init", type=float, help="time step (default: problem's prediction.dt)")
    pr.add_argument("--kappa", type=int, help="truncation order (default: problem's prediction.kappa)")
    pr.add_argument("--out", default="out")
    bn = sub.add_parser("bench", help="generate a benchmark problem and verify it")
    bn.add_argument("name", choices=sorted(GENERATORS))
    bn.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                    help="generator parameter; VALUE is parsed as JSON when possible")
    bn.add_argument("--generate-only", action="store_true", help="only write problem.json")
    _common(bn, problem=False)
    return ap


def _params(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ProblemError(f"--param {item!r}: expected KEY=VALUE")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _config(args, falsify_only: bool) -> VerifierConfig:
    return VerifierConfig(
        max_iterations=args.max_iter,
        epsilon=args.epsilon,
        dt_init=args.dt_init,
        baseline_wholeset=args.baseline == "wholeset",
        falsify_only=falsify_only,
    )


def _run_verify(problem: ProblemFile, args, out: Path, falsify_only: bool) -> int:
    phi = problem.formula
    verdict = verify(problem.system, problem.X0, problem.U, phi, _config(args, falsify_only))
    data = verdict.to_json()
    data["spec"] = problem.spec
    data["history"] = verdict.history
    if verdict.result == "unsafe":
        write_counterexample_csv(out / "counterexample.csv", verdict.counterexample, verdict.counterexample_inputs)
        data["counterexample"] = "counterexample.csv"
    if args.seed is not None and verdict.result == "safe":
        bad = monte_carlo_check(problem.system, problem.X0, problem.U, phi, args.mc_samples,
                                verdict.dt_final, seed=args.seed)
        data["monte_carlo"] = {"seed": args.seed, "samples": args.mc_samples, "violations": bad}
    if args.emit_reach and verdict.reach is not None:
        write_json(out / "reach.json", reach_to_json(verdict.reach[0]))
        data["reach"] = "reach.json"
    write_json(out / "verdict.json", data)
    print(f"{verdict.result} after {verdict.iterations} iteration(s), dt={verdict.dt_final:g}")
    return EXIT[verdict.result]


def _run_predict(problem: ProblemFile, args, out: Path) -> int:
    phi = problem.formula
    defaults = problem.extra.get("prediction", {})
    dt = args.dt_init or defaults.get("dt") or formula_horizon(phi) / 16
    kappa = args.kappa or defaults.get("kappa") or 10
    legal, reach, tuples = predict_safe_behaviors(problem.system, problem.X0, problem.U, phi, dt, kappa)
    occ = Occupancy.from_reach(reach, tuples, legal)
    data = occ.to_json()
    data["kappa"] = kappa
    data["spec"] = problem.spec
    write_json(out / "occupancy.json", data)
    print(f"{len(legal)} legal factor polytope(s) over {occ.steps} step(s)")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("STLVERIFY_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "bench":
            problem = generate_benchmark(args.name, _params(args.param))
            save_problem(problem, out / "problem.json")
            if args.generate_only:
                return 0
        else:
            problem = load_problem(args.problem)
        if args.spec:
            parse_stl(args.spec, problem.system.n)
            problem.spec = args.spec
        if args.command == "predict":
            return _run_predict(problem, args, out)
        return _run_verify(problem, args, out, falsify_only=args.command == "falsify-only")
    except (ProblemError, StlSyntaxError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
