"""Batch runner: scenario lists, repetitions, the 24-scenario grid, CSV reports."""

import csv
import io
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import PROTOCOLS, ScenarioConfig
from .metrics import CSV_HEADER
from .scenario import run_scenario

LISTENER_LEVELS = (10, 20, 40, 60)
SESSION_LEVELS = (5, 10, 20)


def paper_matrix(seed: int = 0, base: ScenarioConfig | None = None) -> list[ScenarioConfig]:
    """Both protocols for every (listeners, sessions) cell.

    The two protocols of a cell share one seed, so they see the same vehicle
    motion, source and session plan.
    """
    base = base or ScenarioConfig()
    out = []
    for listeners in LISTENER_LEVELS:
        for sessions in SESSION_LEVELS:
            for proto in PROTOCOLS:
                out.append(replace(base, protocol=proto, listeners=listeners, sessions=sessions, seed=seed))
    return out


def with_repetitions(configs: list[ScenarioConfig], reps: int) -> list[ScenarioConfig]:
    """Repeat each scenario ``reps`` times with seeds seed, seed+1, ..."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    return [replace(c, seed=c.seed + k) for k in range(reps) for c in configs]


@dataclass
class BatchSpec:
    configs: list[ScenarioConfig]
    out_dir: Path
    workers: int = 1
    eed_per: str = "sent"
    write_traces: bool = True

    def check(self) -> None:
        ids = [c.scenario_id for c in self.configs]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate scenario ids: {', '.join(dupes)}")
        for c in self.configs:
            c.validate()


@dataclass
class BatchResult:
    rows: list[list[str]] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (scenario id, error)
    csv_path: Path | None = None

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_one(config: ScenarioConfig, trace_path, eed_per: str):
    try:
        result = run_scenario(config, trace_path=trace_path, eed_per=eed_per)
        return config.scenario_id, result.csv_row(), None
    except Exception as exc:  # recorded, the batch carries on
        detail = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return config.scenario_id, None, detail


def rows_to_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def run_matrix(spec: BatchSpec, progress=None) -> BatchResult:
    spec.check()
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for c in spec.configs:
        trace = out / f"{c.scenario_id}.tr" if spec.write_traces else None
        jobs.append((c, trace, spec.eed_per))
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_one, *job) for job in jobs]
            outcomes = []
            for f in futures:
                outcomes.append(f.result())
                if progress:
                    progress(outcomes[-1])
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_run_one(*job))
            if progress:
                progress(outcomes[-1])
    result = BatchResult()
    for sid, row, err in outcomes:  # submission order keeps the CSV deterministic
        if err is None:
            result.rows.append(row)
        else:
            result.failures.append((sid, err))
    result.csv_path = out / "results.csv"
    result.csv_path.write_text(rows_to_csv(result.rows), encoding="ascii")
    fail_path = out / "failures.txt"
    if result.failures:
        fail_path.write_text("".join(f"{sid}\t{err}\n" for sid, err in result.failures), encoding="utf-8")
    elif fail_path.exists():
        os.remove(fail_path)
    return result
