"""Conditional-independence graph recovery by thresholding the precision matrix.

Pipeline: empirical correlation, applicability check ``||R - I|| < 1``,
precision ``R^-1``, descending magnitudes of its strictly lower triangle,
a Kneedle threshold on that curve, and hard thresholding.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ApplicabilityFailed,
    DegenerateColumn,
    NoKnee,
    NotPositiveDefinite,
    SingularCorrelation,
    TooFewSamples,
)
from .graphgen import GraphStructure
from .matcore import correlation_from_covariance, invert_spd, matrix_to_json, spectral_norm, symmetrize

SINGULAR_EIG = 1e-10


def _cross_product(centered):
    # einsum keeps the reduction order fixed regardless of BLAS threading
    return np.einsum("ni,nj->ij", centered, centered, optimize=False)


def empirical_covariance(batch):
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2:
        raise ValueError("batch must be a 2-D array (n samples by d variables)")
    n = x.shape[0]
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    centered = x - x.mean(axis=0)
    return symmetrize(_cross_product(centered) / (n - 1))


def empirical_correlation(batch):
    """Pearson correlation matrix (denominator ``n - 1``) with exact unit diagonal."""
    cov = empirical_covariance(batch)
    var = np.diag(cov)
    bad = np.flatnonzero(~(var > 0))
    if bad.size:
        raise DegenerateColumn(f"column {int(bad[0])} has zero sample variance")
    return correlation_from_covariance(cov)


def applicability_check(r):
    """``(||r - I|| < 1, ||r - I||)`` for a unit-diagonal matrix ``r``."""
    r = np.asarray(r, dtype=float)
    norm = spectral_norm(r - np.eye(r.shape[0]))
    return norm < 1.0, norm


@dataclass(frozen=True)
class GammaTriangle:
    values: np.ndarray
    pair_index: np.ndarray  # (m, 2) rows (i, j) with i > j

    def to_csv_rows(self):
        return [(k, int(i), int(j), float(v)) for k, ((i, j), v) in enumerate(zip(self.pair_index, self.values))]


def gamma_triangle_of(gamma):
    """Magnitudes of the strictly lower-triangular entries, sorted descending.

    Ties are broken by ascending ``(i, j)`` so the order is deterministic.
    """
    gamma = np.asarray(gamma, dtype=float)
    d = gamma.shape[0]
    if d < 2:
        raise ValueError("need at least a 2x2 matrix")
    i, j = np.tril_indices(d, k=-1)
    vals = np.abs(gamma[i, j])
    order = np.lexsort((j, i, -vals))
    return GammaTriangle(vals[order], np.column_stack((i[order], j[order])))


@dataclass(frozen=True)
class KneeResult:
    index: int
    threshold: float
    found: bool = True


def _local_extrema(d):
    """Indices ``>=`` (maxima) and ``<=`` (minima) both neighbours; ends compare to one side."""
    left = np.concatenate(([d[0]], d[:-1]))
    right = np.concatenate((d[1:], [d[-1]]))
    maxima = np.flatnonzero((d >= left) & (d >= right))
    minima = np.flatnonzero((d <= left) & (d <= right))
    return maxima, minima


def kneedle(values, sensitivity=1.0, online=True):
    """Knee of a convex, decreasing sequence.

    The curve is normalized to the unit square and flipped to concave
    increasing, ``y' = 1 - y``. Local maxima of the difference curve
    ``D = y' - x`` are candidates; a candidate at ``m`` is confirmed once
    ``D`` falls below ``D[m] - sensitivity * mean(diff(x))`` before the
    next local maximum (a local minimum resets the bar to 0). With
    ``online=True`` scanning continues past the first confirmed knee and
    the last one is returned.

    Raises
    ------
    NoKnee
        If no candidate is confirmed.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 3:
        raise NoKnee("need at least 3 values")
    if np.any(np.diff(v) > 0):
        raise ValueError("values must be non-increasing")
    lo, hi = v.min(), v.max()
    if hi == lo:
        raise NoKnee("all values are equal")
    x = np.arange(n) / (n - 1)
    y = 1.0 - (v - lo) / (hi - lo)
    diff = y - x
    maxima, minima = _local_extrema(diff)
    drop = sensitivity * abs(np.diff(x).mean())
    is_max = np.zeros(n, dtype=bool)
    is_max[maxima] = True
    is_min = np.zeros(n, dtype=bool)
    is_min[minima] = True

    knee = None
    threshold = None
    threshold_index = None
    for i in range(int(maxima[0]), n - 1):
        if is_max[i]:
            threshold = diff[i] - drop
            threshold_index = i
        if is_min[i]:
            threshold = 0.0
        if diff[i + 1] < threshold:
            knee = threshold_index
            if not online:
                break
    if knee is None:
        raise NoKnee("no knee confirmed in the difference curve")
    return KneeResult(int(knee), float(v[knee]), True)


def threshold_precision(gamma, t):
    """Zero off-diagonal entries with ``|value| <= t``; return the matrix and its graph."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    gamma = np.asarray(gamma, dtype=float)
    d = gamma.shape[0]
    keep = np.abs(gamma) > t
    np.fill_diagonal(keep, True)
    out = np.where(keep, gamma, 0.0)
    iu, ju = np.nonzero(np.triu(out != 0.0, k=1))
    return out, GraphStructure(d, frozenset(zip(iu.tolist(), ju.tolist())))


@dataclass(frozen=True)
class LearnOptions:
    strict: bool = True
    threshold: Optional[float] = None
    sensitivity: float = 1.0
    online: bool = True
    # "correlation" inverts R; "covariance" inverts the raw sample covariance
    precision_from: str = "correlation"


@dataclass(frozen=True)
class LearnResult:
    r_hat: np.ndarray
    gamma_hat: np.ndarray
    applicability_norm: float
    applicable: bool
    gamma_triangle: GammaTriangle
    knee: KneeResult
    gamma_thresholded: np.ndarray
    graph: GraphStructure

    def to_json(self):
        return {
            "r_hat": matrix_to_json(self.r_hat),
            "gamma_hat": matrix_to_json(self.gamma_hat),
            "applicability_norm": self.applicability_norm,
            "applicable": self.applicable,
            "knee": {"index": self.knee.index, "threshold": self.knee.threshold, "found": self.knee.found},
            "gamma_thresholded": matrix_to_json(self.gamma_thresholded),
            "graph": self.graph.to_json(),
        }


def learn(batch, opts=LearnOptions()):
    """Estimate the conditional-independence graph of transformed Gaussian data.

    In strict mode a failed applicability check raises
    :class:`ApplicabilityFailed`; otherwise the run continues with
    ``applicable=False``. ``opts.threshold`` bypasses Kneedle.
    """
    x = np.asarray(batch, dtype=float)
    n, d = x.shape
    if n < d + 1:
        raise TooFewSamples(f"need at least {d + 1} samples for {d} variables, got {n}")
    r_hat = empirical_correlation(x)
    applicable, norm = applicability_check(r_hat)
    if opts.strict and not applicable:
        raise ApplicabilityFailed(norm)
    # unit diagonal, so the smallest eigenvalue is a scale-free conditioning measure
    if np.linalg.eigvalsh(r_hat)[0] <= SINGULAR_EIG:
        raise SingularCorrelation("sample correlation matrix is numerically singular")
    target = r_hat if opts.precision_from == "correlation" else empirical_covariance(x)
    try:
        gamma_hat = invert_spd(target)
    except NotPositiveDefinite as exc:
        raise SingularCorrelation("sample correlation matrix is not invertible") from exc
    tri = gamma_triangle_of(gamma_hat)
    if opts.threshold is not None:
        knee = KneeResult(-1, float(opts.threshold), False)
    else:
        knee = kneedle(tri.values, opts.sensitivity, opts.online)
    thresholded, graph = threshold_precision(gamma_hat, knee.threshold)
    return LearnResult(r_hat, gamma_hat, norm, applicable, tri, knee, thresholded, graph)
