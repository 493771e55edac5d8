"""Dense symmetric linear algebra and seeded random streams.

Matrices are plain ``numpy.ndarray`` objects of shape ``(d, d)``. Every
function returning a symmetric matrix symmetrizes its result explicitly so
``m[i, j] == m[j, i]`` holds bit for bit.
"""
import json

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonPositiveVariance, NotPositiveDefinite

SYMMETRY_TOL = 1e-9


def symmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def as_symmetric(m, tol=SYMMETRY_TOL):
    """Validate that ``m`` is square and symmetric to ``tol``; return the averaged matrix."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > tol:
        raise ValueError(f"matrix is not symmetric (max |m - m.T| = {asym:.3g})")
    return symmetrize(m)


def invert_spd(m):
    """Inverse of a symmetric positive definite matrix through its Cholesky factor.

    Raises
    ------
    NotPositiveDefinite
        If the factorization meets a non-positive pivot.
    """
    m = as_symmetric(m)
    try:
        factor = scipy.linalg.cho_factor(m, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    inv = scipy.linalg.cho_solve(factor, np.eye(m.shape[0]))
    return symmetrize(inv)


def is_positive_definite(m):
    try:
        np.linalg.cholesky(np.asarray(m, dtype=float))
    except np.linalg.LinAlgError:
        return False
    return True


def spectral_norm(m):
    """Operator 2-norm of a symmetric matrix, ``max_k |eig_k(m)|``."""
    m = as_symmetric(m)
    eig = np.linalg.eigvalsh(m)
    return float(np.max(np.abs(eig)))


def correlation_from_covariance(m):
    """Rescale a covariance matrix to unit diagonal, ``D^-1/2 m D^-1/2``."""
    m = as_symmetric(m)
    var = np.diag(m).copy()
    if np.any(var <= 0):
        raise NonPositiveVariance(f"non-positive variance at index {int(np.argmin(var))}")
    scale = 1.0 / np.sqrt(var)
    r = symmetrize(m * np.outer(scale, scale))
    np.fill_diagonal(r, 1.0)
    return r


def rng_stream(seed, stream_id=0):
    """Independent, reproducible generator for a ``(seed, stream_id)`` pair.

    Streams with different ids are spawned children of one ``SeedSequence``
    and are statistically independent. ``stream_id`` may be an integer or a
    tuple of integers. A generator must not be shared between concurrent
    tasks.
    """
    key = tuple(int(s) for s in stream_id) if isinstance(stream_id, (tuple, list)) else (int(stream_id),)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def matrix_to_json(m):
    m = np.asarray(m, dtype=float)
    return {"dim": int(m.shape[0]), "rows": m.tolist()}


def matrix_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    rows = np.asarray(obj["rows"], dtype=float)
    dim = int(obj.get("dim", rows.shape[0]))
    if rows.shape != (dim, dim):
        raise DimensionMismatch(f"declared dim {dim} does not match rows of shape {rows.shape}")
    return as_symmetric(rows)
