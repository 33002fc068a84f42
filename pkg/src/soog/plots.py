"""Exploitability curves averaged over seeds, as a table and as linear and log-log plots."""

import csv
import io
import logging
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

MEAN_COLUMNS = ("scenario", "algorithm", "iteration", "eps_milliante", "log10_iteration", "log10_eps_milliante")

Series = Dict[Tuple[str, str], Tuple[np.ndarray, np.ndarray]]


def mean_series(rows: Iterable[Dict[str, Any]]) -> Series:
    """Seed-averaged eps in milli-ante per checkpoint, keyed by (scenario, algorithm)."""
    points: Dict[Tuple[str, str], Dict[int, List[float]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        points[(row["scenario"], row["algorithm"])][int(row["iteration"])].append(float(row["eps_milliante"]))
    series = {}
    for key, by_iteration in sorted(points.items()):
        iterations = np.array(sorted(by_iteration))
        series[key] = (iterations, np.array([np.mean(by_iteration[t]) for t in iterations]))
    return series


def _log10(value: float) -> str:
    return f"{np.log10(value):.6f}" if value > 0 else ""


def mean_csv(series: Series) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=MEAN_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for (scenario, algorithm), (iterations, eps) in series.items():
        for t, e in zip(iterations, eps):
            writer.writerow({
                "scenario": scenario,
                "algorithm": algorithm,
                "iteration": int(t),
                "eps_milliante": f"{e:.6f}",
                "log10_iteration": _log10(t),
                "log10_eps_milliante": _log10(e),
            })
    return buffer.getvalue()


def _plot(series: Series, scenario: str, path: Path, log_scale: bool) -> Path:
    plt.rcParams["svg.hashsalt"] = "soog"
    fig, ax = plt.subplots(figsize=(6, 4))
    for (name, algorithm), (iterations, eps) in series.items():
        if name != scenario:
            continue
        ax.plot(iterations, eps, marker="o", markersize=3, label=algorithm)
    if log_scale:
        ax.set_xscale("log")
        ax.set_yscale("log", nonpositive="mask")
    ax.set_xlabel("iterations")
    ax.set_ylabel("exploitability (mA/hand)")
    ax.set_title(f"{scenario}{' (log-log)' if log_scale else ''}")
    ax.legend(loc="upper right")
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return path


def write_curve_plots(rows: Iterable[Dict[str, Any]], out: Path) -> List[Path]:
    """Write ``report_mean.csv`` and, per scenario, ``plots/<scenario>.svg`` and ``plots/<scenario>_log.svg``."""
    out = Path(out)
    series = mean_series(rows)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report_mean.csv"]
    written[0].write_text(mean_csv(series))
    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    for scenario in sorted({scenario for scenario, _ in series}):
        written.append(_plot(series, scenario, plots / f"{scenario}.svg", log_scale=False))
        written.append(_plot(series, scenario, plots / f"{scenario}_log.svg", log_scale=True))
    logger.info(f"Wrote {len(written) - 1} curve plots under {plots}")
    return written
