"""
Experiment harness: seeded sweeps over problems, methods and repetitions.

Every (cell, run) becomes one ExperimentRow. Rows are written to rows.csv in
canonical order (independent of worker completion order) and aggregated per
cell into summary.json. timing_study reports median wall time against reps
and against the number of qubits.

On a statevector simulator the time per evaluation grows as 2^N in the number
of qubits; a flat time-vs-qubits curve is a property of quantum hardware and
is not reproduced here.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import UTC, datetime
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import pandas as pd
from scipy.stats import linregress

from app.core.config import settings
from app.schemas.experiment import ExperimentMethod, ExperimentRow, ExperimentSpec
from app.schemas.optimizer import ObjectiveMode, OptimizerConfig
from app.services.bruteforce_service import ground_states
from app.services.problem_service import load_problem
from app.services.qaoa_service import problem_reference, run_qaoa
from app.services.rqaoa_service import run_rqaoa
from app.services.transform_service import compile_problem, decode_solution

logger = logging.getLogger(__name__)

ROWS_FILE = "rows.csv"
SUMMARY_FILE = "summary.json"
TIMING_FILE = "timing.csv"
TIMING_FIT_FILE = "timing_fit.json"

CELL_KEYS = ["problem", "method", "qubits", "reps", "num_min_var"]
METHOD_ORDER = {ExperimentMethod.EXACT: 0, ExperimentMethod.QAOA: 1, ExperimentMethod.RQAOA: 2}


@dataclass(frozen=True)
class RunTask:
    """One seeded run of one cell; picklable so it can cross process boundaries."""

    method: ExperimentMethod
    problem_path: str
    problem_name: str
    reps: int | None
    num_min_var: int | None
    run: int
    seed: int
    shots: int
    restarts: int
    max_evaluations: int | None
    mode: ObjectiveMode

    def sort_key(self) -> tuple:
        return (self.problem_name, METHOD_ORDER[self.method], self.reps or 0, self.num_min_var or 0, self.run)


def _exact_row(task: RunTask) -> ExperimentRow:
    """Brute-force oracle: shares of ground states decoding to optimal / admissible schedules."""
    problem = load_problem(task.problem_path)
    start = time.perf_counter()
    _, spin, registry = compile_problem(problem)
    ground = ground_states(spin)
    reference = problem_reference(problem, registry)
    wall_time_ms = (time.perf_counter() - start) * 1000

    decoded = [decode_solution(registry, bits).schedule.bitstring() for bits in ground.bitstrings]

    return ExperimentRow(
        method=task.method,
        problem=task.problem_name,
        qubits=spin.num_vars,
        run=task.run,
        seed=task.seed,
        p_best=sum(bits in reference.optimal for bits in decoded) / len(decoded),
        p_adm=sum(bits in reference.admissible for bits in decoded) / len(decoded),
        objective=float(ground.energy),
        wall_time_ms=wall_time_ms,
    )


def execute_task(task: RunTask) -> ExperimentRow:
    """Run one task; module-level so ProcessPoolExecutor can pickle it."""
    row = _exact_row(task) if task.method is ExperimentMethod.EXACT else _variational_row(task)
    logger.info(
        f"✅ {task.method} {task.problem_name} reps={task.reps} num_min_var={task.num_min_var} run={task.run}: "
        f"P_best={row.p_best:.4f}, P_adm={row.p_adm:.4f} ({row.wall_time_ms:.0f} ms)"
    )
    return row


def _variational_row(task: RunTask) -> ExperimentRow:
    problem = load_problem(task.problem_path)
    config = OptimizerConfig(
        restarts=task.restarts,
        max_evaluations=task.max_evaluations,
        seed=task.seed,
        mode=task.mode,
        shots_per_evaluation=task.shots,
    )
    reps = task.reps or 1

    if task.method is ExperimentMethod.QAOA:
        result = run_qaoa(problem, reps, task.shots, config)
        return ExperimentRow(
            method=task.method,
            problem=task.problem_name,
            qubits=result.num_qubits,
            reps=reps,
            run=task.run,
            seed=task.seed,
            p_best=result.p_best,
            p_adm=result.p_adm,
            objective=result.objective,
            wall_time_ms=result.wall_time_ms,
        )

    result = run_rqaoa(problem, task.num_min_var, reps, config)
    return ExperimentRow(
        method=task.method,
        problem=task.problem_name,
        qubits=result.num_qubits,
        reps=reps,
        num_min_var=result.num_min_var,
        run=task.run,
        seed=task.seed,
        p_best=result.p_best,
        p_adm=result.p_adm,
        objective=float(Fraction(result.energy)),
        wall_time_ms=result.wall_time_ms,
    )


@dataclass(frozen=True)
class ExperimentOutput:
    rows: list[ExperimentRow]
    frame: pd.DataFrame
    summary: dict
    rows_path: Path
    summary_path: Path


@dataclass(frozen=True)
class TimingOutput:
    frame: pd.DataFrame
    fits: list[dict]
    timing_path: Path
    fit_path: Path


def rows_frame(rows: list[ExperimentRow]) -> pd.DataFrame:
    """Rows as a DataFrame with the fixed ExperimentRow column order; blank cells stay empty in CSV."""
    columns = list(ExperimentRow.model_fields)
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=columns)
    return frame.astype({"reps": "Int64", "num_min_var": "Int64", "qubits": "int64", "run": "int64", "seed": "int64"})


def aggregate_cells(frame: pd.DataFrame) -> list[dict]:
    """Mean, median, min and max of p_best, p_adm and wall time per cell."""
    if frame.empty:
        return []
    grouped = frame.groupby(CELL_KEYS, dropna=False, sort=True)
    stats = grouped[["p_best", "p_adm", "wall_time_ms"]].agg(["mean", "median", "min", "max"])
    stats.columns = [f"{column}_{stat}" for column, stat in stats.columns]
    stats["runs"] = grouped.size()
    return json.loads(stats.reset_index().to_json(orient="records"))


def qubit_growth(timing: pd.DataFrame) -> pd.Series:
    """
    Median wall time of each timing cell divided by that of the same
    (method, reps, num_min_var) cell at the next smaller N; NaN for the smallest N.
    """
    ordered = timing.sort_values(["method", "reps", "num_min_var", "qubits"])
    previous = ordered.groupby(["method", "reps", "num_min_var"], dropna=False)["median_wall_time_ms"].shift(1)
    return (ordered["median_wall_time_ms"] / previous).reindex(timing.index)


def p_adm_by_qubits(frame: pd.DataFrame) -> list[dict]:
    """Mean P_adm as a function of N for each (method, reps, num_min_var)."""
    if frame.empty:
        return []
    table = frame.groupby(["method", "reps", "num_min_var", "qubits"], dropna=False, sort=True)["p_adm"].mean()
    return json.loads(table.rename("p_adm_mean").reset_index().to_json(orient="records"))


class ExperimentService:
    """Builds, executes and aggregates experiment sweeps."""

    def base_seed(self, spec: ExperimentSpec) -> int:
        """PROSUMER_QAOA_SEED overrides the spec's base seed."""
        return settings.SEED if settings.SEED is not None else spec.base_seed

    def build_tasks(self, spec: ExperimentSpec, spec_dir: Path | None = None) -> list[RunTask]:
        """
        Expand the spec into one task per (problem, method, reps, num_min_var, run).

        Run r uses seed base_seed + r. RQAOA thresholds outside [1, N - 1] are
        skipped with a warning.
        """
        base_seed = self.base_seed(spec)
        tasks: list[RunTask] = []

        for problem_file in spec.problems:
            path = Path(problem_file)
            if spec_dir is not None and not path.is_absolute():
                path = spec_dir / path
            problem = load_problem(path)
            _, spin, _ = compile_problem(problem)
            n = spin.num_vars

            for method in spec.methods:
                if method is ExperimentMethod.EXACT:
                    cells = [(None, None)]
                elif method is ExperimentMethod.QAOA:
                    cells = [(reps, None) for reps in spec.reps]
                else:
                    thresholds = spec.num_min_var or [max(1, n - 2)]
                    cells = []
                    for k in thresholds:
                        if not 1 <= k < n:
                            logger.warning(f"⚠️ Skipping rqaoa num_min_var={k} for {path.name} ({n} qubits)")
                            continue
                        cells.extend((reps, k) for reps in spec.reps)

                for reps, k in cells:
                    tasks.extend(
                        RunTask(
                            method=method,
                            problem_path=str(path),
                            problem_name=path.stem,
                            reps=reps,
                            num_min_var=k,
                            run=run,
                            seed=base_seed + run,
                            shots=spec.shots,
                            restarts=spec.restarts,
                            max_evaluations=spec.max_evaluations,
                            mode=spec.mode,
                        )
                        for run in range(spec.runs)
                    )

        return sorted(tasks, key=RunTask.sort_key)

    def execute(self, tasks: list[RunTask], jobs: int = 1) -> list[ExperimentRow]:
        """Run tasks, in worker processes when jobs > 1; the result follows the task order."""
        logger.info(f"🔄 Running {len(tasks)} tasks with {jobs} job(s)")
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                return list(executor.map(execute_task, tasks))
        return [execute_task(task) for task in tasks]

    def run_experiment(
        self, spec: ExperimentSpec, out_dir: Path | None = None, jobs: int = 1, spec_dir: Path | None = None
    ) -> ExperimentOutput:
        """
        Execute the sweep and write rows.csv and summary.json.

        Args:
            spec: Experiment definition
            out_dir: Output directory (defaults to spec.out_dir)
            jobs: Worker processes
            spec_dir: Directory that relative problem paths are resolved against

        Returns:
            Rows, their DataFrame, the summary and the written paths
        """
        out = Path(out_dir or spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)

        tasks = self.build_tasks(spec, spec_dir)
        rows = self.execute(tasks, jobs)
        frame = rows_frame(rows)

        rows_path = out / ROWS_FILE
        frame.to_csv(rows_path, index=False)

        summary = {
            "generated_at": datetime.now(UTC).isoformat(),
            "base_seed": self.base_seed(spec),
            "spec": spec.model_dump(mode="json"),
            "num_rows": len(rows),
            "cells": aggregate_cells(frame),
            "p_adm_vs_qubits": p_adm_by_qubits(frame),
        }
        summary_path = out / SUMMARY_FILE
        summary_path.write_text(json.dumps(summary, indent=2), encoding="utf-8")

        logger.info(f"✅ Wrote {len(rows)} rows to {rows_path} and the summary to {summary_path}")
        return ExperimentOutput(rows, frame, summary, rows_path, summary_path)

    def timing_study(
        self, spec: ExperimentSpec, out_dir: Path | None = None, jobs: int = 1, spec_dir: Path | None = None
    ) -> TimingOutput:
        """
        Median wall time per (method, N, reps), with the exact oracle always included.

        Writes timing.csv and timing_fit.json. timing.csv carries the growth ratio
        against the next smaller N (see qubit_growth); the fit is a least-squares
        line of median time against reps for every (method, N, num_min_var) with
        at least two distinct reps values.
        """
        methods = list(dict.fromkeys([*spec.methods, ExperimentMethod.EXACT]))
        spec = spec.model_copy(update={"methods": methods})
        out = Path(out_dir or spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)

        frame = rows_frame(self.execute(self.build_tasks(spec, spec_dir), jobs))
        keys = ["method", "qubits", "reps", "num_min_var"]
        timing = (
            frame.groupby(keys, dropna=False, sort=True)["wall_time_ms"]
            .agg(median_wall_time_ms="median", runs="size")
            .reset_index()
        )
        timing["ratio_to_previous_qubits"] = qubit_growth(timing)
        timing_path = out / TIMING_FILE
        timing.to_csv(timing_path, index=False)

        fits = []
        for (method, qubits, k), group in timing.dropna(subset=["reps"]).groupby(
            ["method", "qubits", "num_min_var"], dropna=False, sort=True
        ):
            if group["reps"].nunique() < 2:
                continue
            fit = linregress(group["reps"].astype(float), group["median_wall_time_ms"].astype(float))
            fits.append(
                {
                    "method": method,
                    "qubits": int(qubits),
                    "num_min_var": None if pd.isna(k) else int(k),
                    "slope_ms_per_rep": float(fit.slope),
                    "intercept_ms": float(fit.intercept),
                    "r_squared": float(fit.rvalue**2),
                }
            )

        fit_path = out / TIMING_FIT_FILE
        fit_path.write_text(json.dumps(fits, indent=2), encoding="utf-8")
        logger.info(f"✅ Wrote timing for {len(timing)} cells to {timing_path}")
        return TimingOutput(timing, fits, timing_path, fit_path)


@lru_cache
def get_experiment_service() -> ExperimentService:
    """Get cached experiment service instance"""
    return ExperimentService()
