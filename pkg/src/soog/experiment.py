"""Experiment jobs: build maps, solve, record curves and compare abstractions."""

import asyncio
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .abstraction import SEEDED_ALGORITHMS, build_map, build_paoi
from .artifacts import load_game_value, read_curve_rows, write_curve_rows, write_curves, write_summary
from .config import ExperimentConfig
from .evaluator import SCENARIOS, ExperimentCurve, run_asymmetric, run_symmetric
from .games import GameSpec
from .hands import get_hand_tables
from .indexing import get_index
from .plots import write_curve_plots

logger = logging.getLogger(__name__)

# (coarser, finer): mean final exploitability of the first should be at least
# that of the second, minus the slack.
ORDERINGS = (
    ("ehs", "paoi"),
    ("paaemd", "paoi"),
    ("paoi", "froi"),
    ("froi", "li"),
)
ASSERTED_SCENARIOS = ("asymmetric",)
LOSSLESS_ALGORITHMS = ("none", "li")
METRICS = ("eps", "eps1", "eps2")


@dataclass(frozen=True)
class Job:
    scenario: str
    algorithm: str
    seed: int

    @property
    def tag(self) -> str:
        return f"{self.scenario}_{self.algorithm}_s{self.seed}"


def plan_jobs(config: ExperimentConfig, scenarios: Sequence[str] = SCENARIOS) -> List[Job]:
    """One job per scenario and algorithm; clustered algorithms get one job per seed."""
    jobs = []
    for scenario in scenarios:
        for algorithm in config.report_algorithms:
            seeds = config.report_seed_list() if algorithm in SEEDED_ALGORITHMS else [config.abstraction_seed]
            jobs.extend(Job(scenario, algorithm, s) for s in seeds)
    return jobs


def warm_tables(spec: GameSpec) -> None:
    """Build the shared cached tables once before jobs run in worker threads."""
    for phase in range(1, spec.phases + 1):
        get_index(spec, phase)
    get_hand_tables(spec)
    build_paoi(spec)


def run_job(
    config: ExperimentConfig, spec: GameSpec, job: Job, reference: Optional[float] = None
) -> ExperimentCurve:
    amap = build_map(
        spec,
        job.algorithm,
        k=config.abstraction.k,
        buckets=config.abstraction.bucket_counts(spec.game_id),
        seed=job.seed,
    )
    cfr = config.cfr
    if job.scenario == "symmetric":
        curve = run_symmetric(spec, amap, cfr.iterations, cfr.checkpoint_every, cfr.variant,
                              job.algorithm, job.seed, reference)
    else:
        curve = run_asymmetric(spec, (amap, amap), cfr.iterations, cfr.checkpoint_every, cfr.variant,
                               job.algorithm, job.seed, config.unabstracted, reference)
    write_curves([curve], Path(config.out) / "curves" / f"{job.tag}.csv")
    logger.info(f"Job {job.tag} finished: eps={curve.final.eps:.6f}")
    return curve


async def run_jobs(config: ExperimentConfig, jobs: Sequence[Job]) -> List[ExperimentCurve]:
    """Run jobs in worker threads, at most ``config.jobs`` at a time."""
    spec = config.game_spec()
    warm_tables(spec)
    value = load_game_value(spec, config.out, config.value_iterations)
    semaphore = asyncio.Semaphore(config.jobs)
    loop = asyncio.get_running_loop()

    async def guarded(job: Job) -> ExperimentCurve:
        async with semaphore:
            logger.info(f"Starting job {job.tag}")
            return await loop.run_in_executor(None, run_job, config, spec, job, value.value)

    return list(await asyncio.gather(*(guarded(job) for job in jobs)))


def final_rows(rows: Iterable[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Last checkpoint of every (scenario, algorithm, seed) run."""
    last: Dict[tuple, Dict[str, Any]] = {}
    for row in rows:
        key = (row["scenario"], row["algorithm"], row["seed"])
        if key not in last or row["iteration"] > last[key]["iteration"]:
            last[key] = row
    return [last[k] for k in sorted(last)]


def estimate_delta(finals: Iterable[Dict[str, Any]]) -> Dict[str, float]:
    """Per-scenario slack from the lossless runs: how far their CFR stopped short of equilibrium.

    A lossless abstraction converges to zero exploitability, so any metric
    left on its final checkpoint is solver error shared by every run of the
    same length. Scenarios without a lossless run get no slack.
    """
    slack: Dict[str, float] = defaultdict(float)
    for row in finals:
        if row["algorithm"] in LOSSLESS_ALGORITHMS:
            worst = max(abs(row[f"{metric}_chips"]) for metric in METRICS)
            slack[row["scenario"]] = max(slack[row["scenario"]], worst)
    return dict(slack)


def merge_reports(rows: Iterable[Dict[str, Any]], delta: Optional[float] = None) -> Dict[str, Any]:
    """Final values per run, per-algorithm means and the ordering checks.

    Orderings are checked on the average and on each player's exploitability.
    ``delta`` is the slack; None estimates it per scenario with ``estimate_delta``.
    """
    finals = final_rows(rows)
    grouped: Dict[str, Dict[str, Dict[str, List[float]]]] = defaultdict(
        lambda: defaultdict(lambda: defaultdict(list))
    )
    for row in finals:
        for metric in METRICS:
            grouped[row["scenario"]][row["algorithm"]][metric].append(row[f"{metric}_chips"])
    components = {
        scenario: {
            algorithm: {metric: float(np.mean(values)) for metric, values in sorted(by_metric.items())}
            for algorithm, by_metric in sorted(by_alg.items())
        }
        for scenario, by_alg in sorted(grouped.items())
    }
    means = {
        scenario: {algorithm: m["eps"] for algorithm, m in by_alg.items()}
        for scenario, by_alg in components.items()
    }
    if delta is None:
        estimated = estimate_delta(finals)
        slack = {scenario: estimated.get(scenario, 0.0) for scenario in components}
        for scenario in components:
            if scenario not in estimated:
                logger.warning(f"{scenario}: no lossless run to estimate the slack from; using 0")
    else:
        slack = {scenario: delta for scenario in components}
    checks = []
    for scenario, by_alg in components.items():
        for coarse, fine in ORDERINGS:
            if coarse not in by_alg or fine not in by_alg:
                continue
            for metric in METRICS:
                checks.append({
                    "scenario": scenario,
                    "metric": metric,
                    "claim": f"{metric}: {coarse} >= {fine} - {slack[scenario]:.6g}",
                    "holds": by_alg[coarse][metric] >= by_alg[fine][metric] - slack[scenario],
                    "asserted": scenario in ASSERTED_SCENARIOS,
                })
    for check in checks:
        if not check["holds"]:
            level = logging.ERROR if check["asserted"] else logging.WARNING
            logger.log(level, f"{check['scenario']}: ordering {check['claim']} does not hold")
    return {
        "runs": finals,
        "means": means,
        "components": components,
        "delta": slack,
        "delta_source": "configured" if delta is not None else "estimated",
        "checks": checks,
        "ok": all(c["holds"] for c in checks if c["asserted"]),
    }


def collect_curve_rows(out: Path) -> List[Dict[str, Any]]:
    rows = []
    for path in sorted((Path(out) / "curves").glob("*.csv")):
        rows.extend(read_curve_rows(path))
    return rows


def write_comparison(out: Path, rows: List[Dict[str, Any]], delta: Optional[float] = None) -> Dict[str, Any]:
    """Write ``report.csv``, ``summary.json`` and the curve plots under ``out``."""
    out = Path(out)
    ordered = sorted(rows, key=lambda r: (r["scenario"], r["algorithm"], r["seed"], r["iteration"]))
    write_curve_rows(ordered, out / "report.csv")
    summary = merge_reports(ordered, delta)
    write_summary(summary, out / "summary.json")
    write_curve_plots(ordered, out)
    logger.info(f"Merged {len(summary['runs'])} runs into {out / 'report.csv'}")
    return summary


async def run_experiment(
    config: ExperimentConfig, scenarios: Sequence[str] = SCENARIOS
) -> Dict[str, Any]:
    jobs = plan_jobs(config, scenarios)
    logger.info(f"Running {len(jobs)} jobs with up to {config.jobs} in parallel")
    curves = await run_jobs(config, jobs)
    rows = [row for curve in curves for row in curve.rows()]
    return write_comparison(config.out, rows, config.report_delta)
