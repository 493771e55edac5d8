"""Exact covariance of a Gaussian vector after a diagonal transformation.

For ``X ~ N(0, S)`` and smooth marginal maps ``f_i``,

    Cov(f_i(X_i), f_j(X_j)) = sum_{k>=1} F_ki(s_ii/2) F_kj(s_jj/2) s_ij**k / k!

with ``F_k(x) = sum_u f^(2u+k)(0) x**u / u!``. ``F_k(v/2)`` equals
``E[f^(k)(Y)]`` for ``Y ~ N(0, v)``. The sum is evaluated here in the
normalized form ``sum_k b_ki b_kj rho**k`` with
``b_k = F_k(v/2) v**(k/2) / sqrt(k!)`` and ``rho = s_ij / sqrt(s_ii s_jj)``,
which is the same series term by term but never overflows.

This module also gives the first-order predictions ``K - L B L`` of the
transformed covariance and ``K^-1 + K^-1 L B L K^-1`` of the transformed
precision, and an independent two-dimensional quadrature oracle.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCovariance, NoDerivativeSequence, QuadratureFailure, SeriesDivergence
from .matcore import invert_spd, symmetrize
from scipy.integrate import quad

from .transforms import QUAD_START, _gh_rule


@dataclass(frozen=True)
class SeriesConfig:
    term_tol: float = 1e-14
    max_k: int = 1000
    taylor_tol: float = 1e-15

    def __post_init__(self):
        if not self.term_tol > 0:
            raise ValueError("term_tol must be positive")
        if self.max_k < 2:
            raise ValueError("max_k must be at least 2")


DEFAULT_CONFIG = SeriesConfig()
# steep CDF profiles (small sigma_f0 against the marginal scale) need 2048 nodes
ORACLE_CAP = 4096
_N_SMALL = 3


def _taylor_f(spec, k, x, cfg):
    c, kk = (spec.bound_c, spec.bound_k) if spec.has_bound else (None, None)
    terms = []
    small = 0
    pow_fact = 1.0  # x**u / u!
    for u in range(cfg.max_k + 1):
        if u:
            pow_fact *= x / u
        try:
            term = spec.deriv_at_zero(2 * u + k) * pow_fact
        except OverflowError:
            term = math.inf
        if not math.isfinite(term):
            raise SeriesDivergence(f"F_{k} series for {spec.name!r} overflowed at term {u}")
        terms.append(term)
        small = small + 1 if abs(term) < cfg.taylor_tol else 0
        if small >= _N_SMALL:
            if c is None:
                return math.fsum(terms)
            # |f^(2u+k)(0)| <= C K**(2u+k): bound the remaining tail
            z = kk * kk * abs(x)
            tail = c * kk ** k * z ** (u + 1) / math.factorial(u + 1) * math.exp(z)
            if tail < cfg.taylor_tol:
                return math.fsum(terms)
    raise SeriesDivergence(f"F_{k} series for {spec.name!r} did not converge within {cfg.max_k} terms")


def f_series(spec, k, x, cfg=DEFAULT_CONFIG):
    """``F_k(x) = sum_u f^(2u+k)(0) x**u / u!``.

    For transforms without a derivative growth bound that provide the
    Gaussian-smoothed closed form (the CDF transform), ``F_k(x)`` for
    ``x > 0`` is taken from it, ``E[f^(k)(Y)]`` with ``Y ~ N(0, 2x)``; this
    is the value the series sums to wherever it converges.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if not spec.has_derivatives:
        raise NoDerivativeSequence(f"transform {spec.name!r} is evaluation-only")
    if x == 0:
        return spec.deriv_at_zero(k)
    if not spec.has_bound and spec.hermite_coefs is not None and x > 0:
        v = 2.0 * x
        b = spec.hermite_coefs(v, k)[k]
        return float(b * math.exp(0.5 * math.lgamma(k + 1) - 0.5 * k * math.log(v)))
    return _taylor_f(spec, k, x, cfg)


def hermite_coefficients(spec, var, kmax, cfg=DEFAULT_CONFIG):
    """``b_k = F_k(var/2) var**(k/2) / sqrt(k!)`` for ``k = 0..kmax``.

    These are the coefficients of ``f(sqrt(var) Z)`` in the orthonormal
    Hermite basis, so ``sum_k b_k**2 = E[f(sqrt(var) Z)**2]``.
    """
    if not spec.has_derivatives:
        raise NoDerivativeSequence(f"transform {spec.name!r} is evaluation-only")
    if not spec.has_bound and spec.hermite_coefs is not None:
        return np.asarray(spec.hermite_coefs(var, kmax), dtype=float)
    out = np.empty(kmax + 1)
    log_v = math.log(var)
    for k in range(kmax + 1):
        f = _taylor_f(spec, k, 0.5 * var, cfg)
        out[k] = f * math.exp(0.5 * k * log_v - 0.5 * math.lgamma(k + 1)) if f else 0.0
    return out


def _check_pair(s_ii, s_jj, s_ij):
    if not (s_ii > 0 and s_jj > 0):
        raise InvalidCovariance("variances must be positive")
    bound = math.sqrt(s_ii * s_jj)
    if abs(s_ij) > bound * (1 + 1e-12):
        raise InvalidCovariance(f"|s_ij| = {abs(s_ij):g} exceeds sqrt(s_ii s_jj) = {bound:g}")
    return max(-1.0, min(1.0, s_ij / bound))


def _tail_bound(spec_i, spec_j, s_ii, s_jj, s_ij, k):
    """Bound on ``sum_{m>k} |G_m(1/2)| |s_ij|**m / m!`` from the growth constants."""
    c = max(spec_i.bound_c, spec_j.bound_c)
    kk = max(spec_i.bound_k, spec_j.bound_k)
    z = kk * kk * abs(s_ij)
    log_tail = (2 * math.log(c) if c > 0 else -math.inf) + kk * kk * (s_ii + s_jj) / 2 + z
    if z > 0:
        log_tail += (k + 1) * math.log(z) - math.lgamma(k + 2)
    else:
        return 0.0
    return math.exp(log_tail)


def exact_tau(spec_i, spec_j, s_ii, s_jj, s_ij, cfg=DEFAULT_CONFIG):
    """Covariance of ``f_i(X_i)`` and ``f_j(X_j)`` for a centered bivariate normal.

    Sums terms in ascending ``k`` and stops once three consecutive terms are
    below ``cfg.term_tol`` and, when both transforms carry growth constants,
    the remaining tail is provably below ``cfg.term_tol`` as well. For the
    variance of one transform pass ``s_ij = s_ii = s_jj``.

    Raises
    ------
    NoDerivativeSequence
        If either transform is evaluation-only.
    SeriesDivergence
        If ``cfg.max_k`` terms do not suffice.
    """
    rho = _check_pair(s_ii, s_jj, s_ij)
    for spec in (spec_i, spec_j):
        if not spec.has_derivatives:
            raise NoDerivativeSequence(f"transform {spec.name!r} is evaluation-only")
    if s_ij == 0:
        return 0.0
    bounded = spec_i.has_bound and spec_j.has_bound
    kmax = min(64, cfg.max_k)
    while True:
        b_i = hermite_coefficients(spec_i, s_ii, kmax, cfg)
        b_j = b_i if (spec_j is spec_i and s_jj == s_ii) else hermite_coefficients(spec_j, s_jj, kmax, cfg)
        k = np.arange(1, kmax + 1)
        terms = b_i[1:] * b_j[1:] * rho ** k
        small = 0
        for idx, term in enumerate(terms):
            small = small + 1 if abs(term) < cfg.term_tol else 0
            if small < _N_SMALL:
                continue
            if not bounded or _tail_bound(spec_i, spec_j, s_ii, s_jj, s_ij, idx + 1) < cfg.term_tol:
                return math.fsum(terms[: idx + 1].tolist())
        if kmax >= cfg.max_k:
            raise SeriesDivergence(
                f"covariance series for ({spec_i.name}, {spec_j.name}) did not converge within {cfg.max_k} terms")
        kmax = min(2 * kmax, cfg.max_k)


def kappa_of(spec, cfg=DEFAULT_CONFIG):
    """``sum_{k>=1} F_k(1/2)**2 / k!``: the transformed variance of a unit normal."""
    return exact_tau(spec, spec, 1.0, 1.0, 1.0, cfg)


def lambda_of(spec, cfg=DEFAULT_CONFIG):
    """``F_1(1/2) = E[f'(Z)]``: the first-order covariance multiplier."""
    return f_series(spec, 1, 0.5, cfg)


def _gauss_integral(h, breaks):
    """``E[h(U)]`` for a standard normal ``U`` by adaptive quadrature split at ``breaks``."""
    edges = [-np.inf] + sorted(set(float(b) for b in breaks)) + [np.inf]
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = quad(lambda u: h(u) * math.exp(-0.5 * u * u), lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400)
        total += val
        err += e
    norm = math.sqrt(2.0 * math.pi)
    return total / norm, err / norm


def _kinked_cov(spec_i, spec_j, a, c, e, rtol):
    """Nested adaptive quadrature for transforms with declared kinks."""
    f = lambda x: float(spec_i.eval(x))  # noqa: E731
    g = lambda y: float(spec_j.eval(y))  # noqa: E731
    u_kinks = [k / a for k in spec_i.kinks]
    if e > 0:
        def h(u):
            return _gauss_integral(lambda v: g(c * u + e * v), [(k - c * u) / e for k in spec_j.kinks])[0]
    else:
        def h(u):
            return g(c * u)
        if c != 0:
            u_kinks += [k / c for k in spec_j.kinks]
    b = math.hypot(c, e)
    e_f, err_f = _gauss_integral(lambda u: f(a * u), [k / a for k in spec_i.kinks])
    e_g, err_g = _gauss_integral(lambda u: g(b * u), [k / b for k in spec_j.kinks])
    e_fg, err_fg = _gauss_integral(lambda u: f(a * u) * h(u), u_kinks)
    scale = math.sqrt(_gauss_integral(lambda u: f(a * u) ** 2, [])[0] * _gauss_integral(lambda u: g(b * u) ** 2, [])[0])
    err = err_fg + abs(e_f) * err_g + abs(e_g) * err_f
    if err > rtol * max(scale, 1e-300):
        raise QuadratureFailure(f"adaptive quadrature error estimate {err:.3g} exceeds {rtol:g} relative")
    return e_fg - e_f * e_g


def quadrature_oracle(spec_i, spec_j, s_ii, s_jj, s_ij, rtol=1e-10, nodes=QUAD_START, cap=ORACLE_CAP):
    """``Cov(f_i(X), f_j(Y))`` by two-dimensional quadrature.

    The pair is whitened as ``X = a u``, ``Y = c u + e v`` with independent
    standard normals ``u, v``. Smooth transforms use tensor Gauss–Hermite,
    doubling the node count until successive estimates agree to ``rtol``
    relative to ``sqrt(E[f_i**2] E[f_j**2])``. Transforms that declare kinks
    (where Gauss–Hermite converges only algebraically) use nested adaptive
    quadrature split at the kinks.
    """
    if not (s_ii > 0 and s_jj > 0):
        raise InvalidCovariance("variances must be positive")
    a = math.sqrt(s_ii)
    c = s_ij / a
    resid = s_jj - c * c
    if resid < -1e-12 * s_jj:
        raise InvalidCovariance(f"s_jj = {s_jj:g} < c**2 = {c * c:g}")
    e = math.sqrt(max(resid, 0.0))
    if spec_i.kinks or spec_j.kinks:
        return _kinked_cov(spec_i, spec_j, a, c, e, rtol)
    prev = None
    n = nodes
    while n <= cap:
        x, w = _gh_rule(n)
        fx = np.asarray(spec_i.eval(a * x), dtype=float)
        gy = np.asarray(spec_j.eval(c * x[:, None] + e * x[None, :]), dtype=float)
        g_given_u = gy @ w
        e_f = float(w @ fx)
        e_g = float(w @ g_given_u)
        e_fg = float(w @ (fx * g_given_u))
        cov = e_fg - e_f * e_g
        scale = math.sqrt(float(w @ fx ** 2) * float(w @ (gy ** 2 @ w)))
        if prev is not None and abs(cov - prev) <= rtol * max(scale, abs(cov)):
            return cov
        prev = cov
        n *= 2
    raise QuadratureFailure(f"2-D Gauss–Hermite did not settle to {rtol:g} within {cap} nodes")


@dataclass(frozen=True)
class GnpnPrediction:
    kappa: np.ndarray
    lambda_vec: np.ndarray
    sigma_pi_first_order: np.ndarray
    gamma_pi_first_order: np.ndarray


def _gamma_of(model):
    return np.asarray(getattr(model, "gamma_rho", model), dtype=float)


def predict(model, specs, cfg=DEFAULT_CONFIG):
    """First-order transformed covariance and precision for ``Gamma_rho = I + B``."""
    gamma = _gamma_of(model)
    d = gamma.shape[0]
    if len(specs) != d:
        raise ValueError(f"{len(specs)} transforms for dimension {d}")
    if not np.all(np.diag(gamma) == 1.0):
        raise ValueError("precision matrix must have unit diagonal")
    b = gamma - np.eye(d)
    cache = {}
    kappa = np.empty(d)
    lam = np.empty(d)
    for i, spec in enumerate(specs):
        if id(spec) not in cache:
            cache[id(spec)] = (kappa_of(spec, cfg), lambda_of(spec, cfg))
        kappa[i], lam[i] = cache[id(spec)]
    lbl = lam[:, None] * b * lam[None, :]
    sigma1 = symmetrize(np.diag(kappa) - lbl)
    inv_k = 1.0 / kappa
    gamma1 = symmetrize(np.diag(inv_k) + inv_k[:, None] * lbl * inv_k[None, :])
    return GnpnPrediction(kappa, lam, sigma1, gamma1)


def exact_sigma_pi(model, specs, cfg=DEFAULT_CONFIG, full_output=False):
    """Exact covariance of the transformed vector.

    Entries whose transforms both carry derivative sequences use the series;
    any entry involving an evaluation-only transform falls back to
    :func:`quadrature_oracle`. With ``full_output=True`` also returns a
    ``(d, d)`` array of ``"series"`` / ``"quadrature"`` labels.
    """
    gamma = _gamma_of(model)
    d = gamma.shape[0]
    if len(specs) != d:
        raise ValueError(f"{len(specs)} transforms for dimension {d}")
    sigma = invert_spd(gamma)
    out = np.zeros((d, d))
    paths = np.empty((d, d), dtype=object)
    for i in range(d):
        for j in range(i + 1):
            si, sj = specs[i], specs[j]
            s_ij = sigma[i, i] if i == j else sigma[i, j]
            if si.has_derivatives and sj.has_derivatives:
                val, path = exact_tau(si, sj, sigma[i, i], sigma[j, j], s_ij, cfg), "series"
            else:
                val, path = quadrature_oracle(si, sj, sigma[i, i], sigma[j, j], s_ij), "quadrature"
            out[i, j] = out[j, i] = val
            paths[i, j] = paths[j, i] = path
    if full_output:
        return out, paths
    return out
