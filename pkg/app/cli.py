"""
Command-line entry point: prosumer-qaoa {solve|exact|transform|experiment|serve}.

Exit codes: 0 success, 1 usage error or invalid input, 2 size limit exceeded.
JSON results go to stdout (or --output); logs go to stderr.
"""

import argparse
import sys
from pathlib import Path

from pydantic import BaseModel, ValidationError

from app.core.config import settings
from app.core.exceptions import InvalidProblemError, ProsumerQaoaError, SizeLimitExceededError
from app.core.logging_config import get_logger, setup_logging
from app.schemas.experiment import ExperimentSpec
from app.schemas.optimizer import ObjectiveMode
from app.schemas.solve import SolveMethod, SolveRequest, TransformRequest
from app.services.experiment_service import get_experiment_service
from app.services.problem_service import load_problem
from app.services.solve_service import get_solve_service

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SIZE_LIMIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 is reserved for size limits here."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prosumer-qaoa", description="Prosumer load scheduling with QAOA and Recursive QAOA")
    parser.add_argument(
        "--log-level",
        type=str.upper,
        default=settings.LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
    )
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Optimize and sample QAOA or run Recursive QAOA")
    solve.add_argument("--problem", required=True, type=Path)
    solve.add_argument("--method", choices=[m.value for m in SolveMethod], default=SolveMethod.QAOA.value)
    solve.add_argument("--reps", type=int, default=1)
    solve.add_argument("--shots", type=int, default=settings.DEFAULT_SHOTS)
    solve.add_argument("--restarts", type=int, default=settings.DEFAULT_RESTARTS)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--mode", choices=[m.value for m in ObjectiveMode], default=ObjectiveMode.EXACT.value)
    solve.add_argument("--num-min-var", type=int, default=None, help="RQAOA variables left for the exact finish")
    solve.add_argument("--max-evaluations", type=int, default=None, help="Objective evaluations per restart")
    solve.add_argument("--output", type=Path, default=None)

    exact = commands.add_parser("exact", help="Exhaustive optimal schedules and Ising ground states")
    exact.add_argument("--problem", required=True, type=Path)
    exact.add_argument("--output", type=Path, default=None)

    transform = commands.add_parser("transform", help="Compile a problem to QUBO and Ising form")
    transform.add_argument("--problem", required=True, type=Path)
    transform.add_argument("--reps", type=int, default=1, help="Repetitions for the circuit resource estimate")
    transform.add_argument("--output", type=Path, default=None)

    experiment = commands.add_parser("experiment", help="Run a seeded sweep and write CSV/JSON results")
    experiment.add_argument("--spec", required=True, type=Path)
    experiment.add_argument("--out", type=Path, default=None, help="Output directory (defaults to the spec's out_dir)")
    experiment.add_argument("--jobs", type=int, default=1)
    experiment.add_argument("--timing", action="store_true", help="Also run the timing study")

    serve = commands.add_parser("serve", help="Run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


def _emit(payload: BaseModel, output: Path | None) -> None:
    text = payload.model_dump_json(indent=2)
    if output is None:
        sys.stdout.write(text + "\n")
    else:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text + "\n", encoding="utf-8")
        logger.info(f"✅ Wrote {output}")


def _run(args: argparse.Namespace) -> int:
    service = get_solve_service()

    if args.command == "solve":
        request = SolveRequest(
            problem=load_problem(args.problem),
            method=args.method,
            reps=args.reps,
            shots=args.shots,
            restarts=args.restarts,
            seed=args.seed,
            mode=args.mode,
            num_min_var=args.num_min_var,
            max_evaluations=args.max_evaluations,
        )
        _emit(service.solve(request), args.output)

    elif args.command == "exact":
        _emit(service.exact(load_problem(args.problem)), args.output)

    elif args.command == "transform":
        _emit(service.transform(TransformRequest(problem=load_problem(args.problem), reps=args.reps)), args.output)

    elif args.command == "experiment":
        if args.jobs < 1:
            raise ValueError(f"--jobs must be >= 1, got {args.jobs}")
        spec = ExperimentSpec.model_validate_json(args.spec.read_text(encoding="utf-8"))
        experiments = get_experiment_service()
        output = experiments.run_experiment(spec, args.out, args.jobs, spec_dir=args.spec.parent)
        if args.timing:
            experiments.timing_study(spec, args.out, args.jobs, spec_dir=args.spec.parent)
        sys.stdout.write(f"{output.rows_path}\n{output.summary_path}\n")

    elif args.command == "serve":
        import uvicorn

        uvicorn.run("app.main:app", host=args.host, port=args.port, log_level=args.log_level.lower())

    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(log_level=args.log_level)

    try:
        return _run(args)
    except SizeLimitExceededError as e:
        logger.error(f"❌ {e}")
        return EXIT_SIZE_LIMIT
    except InvalidProblemError as e:
        for violation in e.violations:
            sys.stderr.write(f"invalid problem: {violation}\n")
        return EXIT_USAGE
    except (ValidationError, ProsumerQaoaError, ValueError, OSError) as e:
        logger.error(f"❌ {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
