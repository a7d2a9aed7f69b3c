"""Corpus benchmarking: run every task of a manifest and emit a scored CSV."""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .cegar import Config, cegar
from .cfa import load_problem

log = logging.getLogger(__name__)

MANIFEST = "manifest.tsv"
CSV_HEADER = ("task", "expected", "verdict", "time_ms", "refinements", "arg_states", "score")
VERDICTS = ("SAFE", "UNSAFE")


@dataclass(frozen=True)
class Scoring:
    correct_safe: int = 2
    correct_unsafe: int = 1
    false_alarm: int = -4  # UNSAFE reported on a safe task
    missed_bug: int = -8  # SAFE reported on an unsafe task

    def score(self, expected: str, verdict: str) -> int:
        if verdict == expected:
            return self.correct_safe if verdict == "SAFE" else self.correct_unsafe
        if verdict == "UNSAFE":
            return self.false_alarm
        if verdict == "SAFE":
            return self.missed_bug
        return 0


@dataclass
class TaskResult:
    task: str
    verdict: str
    time_ms: int
    refinements: int
    arg_states: int  # ARG nodes created, summed over restarts
    peak_arg_states: int
    max_precision: int  # largest tracked-variable set at a single location
    tracked_variables: int
    expected: Optional[str] = None
    score: int = 0


def run_task(path, config: Config) -> TaskResult:
    path = Path(path)
    started = time.perf_counter()
    result = cegar(load_problem(path), config)
    elapsed = time.perf_counter() - started
    return TaskResult(
        task=path.stem,
        verdict=str(result.verdict),
        time_ms=round(elapsed * 1000),
        refinements=result.refinements,
        arg_states=result.arg_nodes_created,
        peak_arg_states=result.peak_arg_nodes,
        max_precision=result.precision.max_size(),
        tracked_variables=len(result.precision.variables()),
    )


def read_manifest(corpus: Path) -> dict:
    """Task name -> expected verdict, in file order."""
    entries = {}
    with open(corpus / MANIFEST, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2 or parts[1] not in VERDICTS:
                raise ValueError(f"{MANIFEST}:{lineno}: expected 'task<TAB>SAFE|UNSAFE'")
            entries[Path(parts[0]).stem] = parts[1]
    return entries


def collect_tasks(corpus: Path) -> list:
    """(task file, expected verdict) pairs in manifest order; unlisted tasks are skipped."""
    corpus = Path(corpus)
    manifest = read_manifest(corpus)
    files = {p.stem: p for p in sorted(corpus.glob("*.ev"))}
    for name in files:
        if name not in manifest:
            log.warning("%s: no manifest entry, skipped", name)
    tasks = []
    for name, expected in manifest.items():
        if name in files:
            tasks.append((files[name], expected))
        else:
            log.warning("%s: listed in manifest but no %s.ev found", name, name)
    return tasks


def _run_one(job):
    path, config = job
    return run_task(path, config)


def run_bench(corpus, config: Config, scoring: Scoring = Scoring(), jobs: int = 1) -> list:
    tasks = collect_tasks(Path(corpus))
    work = [(path, config) for path, _ in tasks]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, work))  # map keeps manifest order
    else:
        results = [_run_one(w) for w in work]
    for res, (_, expected) in zip(results, tasks):
        res.expected = expected
        res.score = scoring.score(expected, res.verdict)
    return results


def write_csv(results, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in results:
        writer.writerow([r.task, r.expected, r.verdict, r.time_ms, r.refinements, r.arg_states, r.score])
    correct = sum(1 for r in results if r.verdict == r.expected)
    writer.writerow(["TOTAL", f"{correct}/{len(results)}", "",
                     sum(r.time_ms for r in results), sum(r.refinements for r in results),
                     sum(r.arg_states for r in results), sum(r.score for r in results)])


def csv_text(results) -> str:
    buf = io.StringIO()
    write_csv(results, buf)
    return buf.getvalue()
