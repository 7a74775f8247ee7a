"""
Command-line entry point.

    bla-dispatch run accuracy|audit|case-sweep|band-sweep|ppdc|timing \
        --scenario <path> --seed <n> --out <dir>
    bla-dispatch validate --scenario <path>
    bla-dispatch export --scenario <path> --out <dir> [--masked --seed <n>]

Exit status: 0 on success, 2 when the scenario or experiment fails
validation, 3 when a solve or the protocol fails.
"""
import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from app.models.scenario import ExperimentSpec
from app.services.dispatch import DispatchService
from app.services.experiments import run_experiment
from app.services.scenario import load_experiment, load_scenario, with_solver_overrides
from app.solvers.lpfile import write_lp, write_triplets
from app.utils.config import SCENARIO_PATH, SOLVER_GAP_OVERRIDE, SOLVER_TIME_LIMIT_OVERRIDE
from app.utils.exceptions import DispatchError
from app.utils.logs import error_logger_context

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

KINDS = {
    "accuracy": "accuracy",
    "audit": "audit",
    "case-sweep": "case_sweep",
    "band-sweep": "band_sweep",
    "ppdc": "ppdc_sweep",
    "timing": "timing",
}

# error codes that mean the inputs were fine but solving did not work out
SOLVER_CODES = frozenset({"SOLVER_ERROR", "UNAVAILABLE", "PROTOCOL_ABORTED"})


def exit_code_for(code: str) -> int:
    return EXIT_SOLVER if code in SOLVER_CODES else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bla-dispatch", description="Privacy-preserved BLA dispatch toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run an experiment and write its report bundle")
    run.add_argument("kind", choices=sorted(KINDS))
    run.add_argument("--scenario", default=str(SCENARIO_PATH), help="scenario JSON file")
    run.add_argument("--seed", type=int, default=None, help="masking and noise seed")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--spec", default=None, help="experiment knobs as JSON")
    run.add_argument("--gap", type=float, default=None, help="relative MIP gap")
    run.add_argument("--time-limit", type=float, default=None, help="solver time limit in seconds")

    validate = commands.add_parser("validate", help="load and check a scenario file")
    validate.add_argument("--scenario", default=str(SCENARIO_PATH))

    export = commands.add_parser("export", help="write the dispatch problem as an LP file and a triplet dump")
    export.add_argument("--scenario", default=str(SCENARIO_PATH))
    export.add_argument("--out", default="out")
    export.add_argument("--masked", action="store_true", help="export P1 instead of P0")
    export.add_argument("--seed", type=int, default=None, help="masking seed for --masked")
    return parser


def _run(args: argparse.Namespace) -> int:
    with error_logger_context("cli") as logger:
        try:
            scenario = load_scenario(args.scenario)
            scenario = with_solver_overrides(scenario, SOLVER_GAP_OVERRIDE, SOLVER_TIME_LIMIT_OVERRIDE)
            scenario = with_solver_overrides(scenario, args.gap, args.time_limit)
            kind = KINDS[args.kind]
            spec = load_experiment(args.spec, kind) if args.spec else ExperimentSpec(kind=kind)
            bundle = run_experiment(scenario, spec, args.out, seed=args.seed, logger=logger)
        except DispatchError as exc:
            print(str(exc), file=sys.stderr)
            return exit_code_for(exc.code)

    for line in bundle.summary:
        print(line)
    if bundle.failed:
        return exit_code_for(bundle.data["error"]["code"])
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except DispatchError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    print(f"{args.scenario}: ok, {len(scenario.network.buses)} buses, {len(scenario.blas)} BLAs, T={scenario.horizon}")
    return EXIT_OK


def _export(args: argparse.Namespace) -> int:
    mode = "masked" if args.masked else "plaintext"
    try:
        scenario = load_scenario(args.scenario)
        problem = DispatchService(scenario).build(mode, masking_seed=args.seed)
    except DispatchError as exc:
        print(str(exc), file=sys.stderr)
        return exit_code_for(exc.code)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lp = write_lp(problem, out / f"{mode}.lp", title=f"{scenario.name} {mode}")
    triplets = write_triplets(problem, out / f"{mode}_triplets.csv")
    print(f"{lp}: {problem.num_variables} variables, {problem.num_rows} rows, {problem.num_binaries} binaries")
    print(triplets)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _run, "validate": _validate, "export": _export}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
