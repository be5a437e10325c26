"""Command-line entry points for scenario runs.

Exit codes: 0 converged, 1 usage or scenario errors, 2 data rank failure,
3 trajectory divergence, 4 non-convergence.
"""

import argparse
import dataclasses
import json
import sys

from .experiments import (ScenarioError, load_scenario, run_compare,
                          run_model_based, run_simulate, run_srl)
from .learning import RankDeficientError
from .model_based import (ConvergenceError, IterateDestabilizedError,
                          NotStabilizingError)
from .system import SimulationDiverged

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RANK = 2
EXIT_DIVERGED = 3
EXIT_NO_CONVERGENCE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="structlqr",
                     description="Structured LQR synthesis, model-based and "
                                 "trajectory-data-driven")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True,
                       help="builtin name (consensus-a, consensus-b, "
                            "consensus-b-declared) or scenario file path")
        p.add_argument("--out", default=None, help="directory for CSV/JSON output")
        p.add_argument("--seed", type=int, default=None,
                       help="override the exploration seed")
        p.add_argument("--tol", type=float, default=None,
                       help="override the solver stopping tolerance")
        p.add_argument("--max-iter", type=int, default=None,
                       help="override the solver iteration budget")

    common(sub.add_parser("srl", help="data-driven structured synthesis"))
    common(sub.add_parser("model-based", help="structured policy iteration"))
    common(sub.add_parser("compare", help="data-driven run plus baselines"))
    common(sub.add_parser("bound", help="suboptimality bound report"))
    sim = sub.add_parser("simulate", help="zero-input simulation from x0")
    common(sim)
    sim.add_argument("--horizon", type=float, default=5.0)
    return parser


def _apply_overrides(spec, args):
    solver = spec.solver
    if args.tol is not None:
        solver = dataclasses.replace(solver, tol=args.tol)
    if args.max_iter is not None:
        solver = dataclasses.replace(solver, max_iter=args.max_iter)
    if solver is not spec.solver:
        spec = dataclasses.replace(spec, solver=solver)
    return spec


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = load_scenario(args.scenario)
        spec = _apply_overrides(spec, args)
        if args.command == "simulate":
            traj = run_simulate(spec, horizon=args.horizon, out_dir=args.out)
            print(json.dumps({
                "scenario": spec.name,
                "samples": len(traj.times),
                "final_state": traj.states[-1].tolist(),
            }, indent=2, sort_keys=True))
            return EXIT_OK

        if args.command == "model-based":
            report = run_model_based(spec, out_dir=args.out)
        elif args.command == "srl":
            report = run_srl(spec, out_dir=args.out, seed=args.seed)
        elif args.command == "compare":
            report = run_compare(spec, out_dir=args.out, seed=args.seed)
        else:  # bound
            report = run_model_based(spec, out_dir=args.out)
            print(json.dumps({"scenario": spec.name, "bound": report.bound},
                             indent=2, sort_keys=True))
            return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE

        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE

    except RankDeficientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANK
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConvergenceError, IterateDestabilizedError, NotStabilizingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
