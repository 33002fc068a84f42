"""Weighted k-means and earth mover's distance between histograms."""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse
from scipy.optimize import linprog

from .errors import InvariantViolation, ParameterError

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 100
TOLERANCE = 1e-9

Distance = Callable[[np.ndarray, np.ndarray], np.ndarray]


def check_ground(ground: np.ndarray) -> np.ndarray:
    ground = np.asarray(ground, dtype=float)
    if ground.ndim != 2 or ground.shape[0] != ground.shape[1]:
        raise ParameterError(f"Ground metric must be square, got {ground.shape}")
    if (ground < 0).any() or not np.allclose(ground, ground.T) or np.any(np.diag(ground) != 0):
        raise ParameterError("Ground metric must be nonnegative, symmetric, zero on the diagonal")
    return ground


def line_positions(ground: np.ndarray) -> Optional[np.ndarray]:
    """Coordinates on a line reproducing ``ground``, or None when no such embedding exists."""
    if ground.shape[0] == 1:
        return np.zeros(1)
    endpoint = int(np.argmax(ground[0]))
    x = ground[endpoint].astype(float)
    scale = max(float(ground.max()), 1.0)
    if np.allclose(np.abs(x[:, None] - x[None, :]), ground, rtol=1e-9, atol=1e-12 * scale):
        return x
    return None


def _emd_line(points: np.ndarray, centers: np.ndarray, x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    gaps = np.diff(x[order])
    cdf_p = np.cumsum(points[:, order], axis=1)[:, :-1]
    cdf_c = np.cumsum(centers[:, order], axis=1)[:, :-1]
    out = np.empty((points.shape[0], centers.shape[0]))
    for j in range(centers.shape[0]):
        out[:, j] = np.abs(cdf_p - cdf_c[j]) @ gaps
    return out


def _emd_lp(a: np.ndarray, b: np.ndarray, ground: np.ndarray) -> float:
    d = a.shape[0]
    rows = np.repeat(np.arange(d), d)
    cols = np.arange(d * d)
    supply = scipy.sparse.csr_matrix((np.ones(d * d), (rows, cols)), shape=(d, d * d))
    demand = scipy.sparse.csr_matrix((np.ones(d * d), (np.tile(np.arange(d), d), cols)), shape=(d, d * d))
    res = linprog(
        ground.ravel(),
        A_eq=scipy.sparse.vstack([supply, demand]),
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise InvariantViolation(f"Transport problem failed: {res.message}")
    return max(float(res.fun), 0.0)


def emd_1d(a, b, ground) -> float:
    """Minimal cost of moving histogram ``a`` onto ``b`` under ``ground``.

    Uses the cumulative-distribution formula when the ground metric embeds
    on a line and a transport linear program otherwise.

    Raises:
        ParameterError: dimensions disagree or ``ground`` is not a metric matrix
    """
    a = np.asarray(getattr(a, "probabilities", a), dtype=float)
    b = np.asarray(getattr(b, "probabilities", b), dtype=float)
    ground = check_ground(ground)
    if a.shape != b.shape or a.shape[0] != ground.shape[0]:
        raise ParameterError(f"Dimension mismatch: {a.shape}, {b.shape}, ground {ground.shape}")
    x = line_positions(ground)
    if x is not None:
        return float(_emd_line(a[None, :], b[None, :], x)[0, 0])
    return _emd_lp(a, b, ground)


def emd_distance(ground: np.ndarray) -> Distance:
    """Pairwise EMD between rows of two histogram matrices."""
    ground = check_ground(ground)
    x = line_positions(ground)
    if x is not None:
        return lambda points, centers: _emd_line(points, centers, x)
    logger.warning(
        f"Ground metric over {ground.shape[0]} clusters is not a line; solving transport LPs"
    )

    def pairwise(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
        out = np.empty((points.shape[0], centers.shape[0]))
        for i in range(points.shape[0]):
            for j in range(centers.shape[0]):
                out[i, j] = _emd_lp(points[i], centers[j], ground)
        return out

    return pairwise


def squared_l2(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    iterations: int


def weighted_kmeans(
    points: np.ndarray,
    weights: np.ndarray,
    clusters: int,
    distance: Distance,
    rng: np.random.Generator,
    max_iterations: int = MAX_ITERATIONS,
    tolerance: float = TOLERANCE,
) -> KMeansResult:
    """Lloyd iterations with weighted mean centers.

    The first center is drawn from ``rng``; the rest are chosen greedily as
    the point farthest from all chosen centers (lowest index on ties).
    Assignment ties go to the lowest cluster id, empty clusters keep their
    center, and labels are renumbered densely at the end.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = points.shape[0]
    if clusters < 1:
        raise ParameterError("At least one cluster is required")
    if clusters > n:
        logger.warning(f"Reducing cluster count from {clusters} to {n} distinct features")
        clusters = n
    chosen = [int(rng.integers(n))]
    nearest = distance(points, points[chosen])[:, 0]
    while len(chosen) < clusters:
        nxt = int(np.argmax(nearest))
        if nearest[nxt] <= 0:
            logger.warning(f"Only {len(chosen)} separable centers; reducing cluster count")
            break
        chosen.append(nxt)
        nearest = np.minimum(nearest, distance(points, points[[nxt]])[:, 0])
    centers = points[chosen].copy()
    k = centers.shape[0]

    previous = np.inf
    inertia = np.inf
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        d = distance(points, centers)
        labels = np.argmin(d, axis=1)
        inertia = float((weights * d[np.arange(n), labels]).sum())
        mass = np.bincount(labels, weights=weights, minlength=k)
        totals = np.zeros_like(centers)
        np.add.at(totals, labels, weights[:, None] * points)
        filled = mass > 0
        centers[filled] = totals[filled] / mass[filled, None]
        if np.isfinite(previous) and abs(previous - inertia) <= tolerance * max(abs(previous), 1e-300):
            break
        previous = inertia

    labels = np.argmin(distance(points, centers), axis=1)
    used, dense = np.unique(labels, return_inverse=True)
    return KMeansResult(dense.reshape(-1), centers[used], inertia, iterations)
