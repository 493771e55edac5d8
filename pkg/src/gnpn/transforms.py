"""Catalog of marginal (diagonal) transformations.

A :class:`TransformSpec` bundles pointwise evaluation with the sequence of
derivatives at the origin, which is what the exact covariance series
consumes. Where a function satisfies the growth bound
``|f^(a)(0)| <= C * K**a`` the constants are recorded as ``bound_c`` and
``bound_k``.
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr, owens_t, roots_hermitenorm

from .errors import DimensionMismatch, NoDerivativeSequence, QuadratureFailure, UnknownTransform

_SQRT_2PI = math.sqrt(2.0 * math.pi)

QUAD_START = 32
QUAD_CAP = 512
QUAD_RTOL = 1e-12


@lru_cache(maxsize=None)
def _gh_rule(nodes):
    x, w = roots_hermitenorm(nodes)
    return x, w / _SQRT_2PI


def gauss_hermite_expectation(g, mu=0.0, sigma=1.0, nodes=QUAD_START, rtol=QUAD_RTOL, cap=QUAD_CAP):
    """``E[g(X)]`` for ``X ~ Normal(mu, sigma**2)`` by Gauss–Hermite quadrature.

    The node count is doubled from ``nodes`` until two successive estimates
    agree to ``rtol`` relative to ``E|g(X)|``, up to ``cap`` nodes.
    ``g`` must accept numpy arrays.
    """
    if nodes < 2:
        raise ValueError("need at least 2 quadrature nodes")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    prev = None
    n = nodes
    while n <= cap:
        x, w = _gh_rule(n)
        vals = np.asarray(g(mu + sigma * x), dtype=float)
        est = float(w @ vals)
        scale = max(abs(est), float(w @ np.abs(vals)))
        if prev is not None and abs(est - prev) <= rtol * scale:
            return est
        prev = est
        n *= 2
    raise QuadratureFailure(f"Gauss–Hermite estimate did not settle to {rtol:g} within {cap} nodes")


@dataclass(frozen=True)
class MarginalParams:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class TransformSpec:
    """A marginal map ``f`` together with what the exact covariance needs about it.

    Attributes
    ----------
    name : str
    func : callable
        Vectorized pointwise map.
    deriv : callable or None
        ``a -> f^(a)(0)``; None for evaluation-only transforms.
    bound_c, bound_k : float or None
        Constants of the derivative growth bound, when it holds.
    parity : {"odd", "even", "neither"}
    hermite_coefs : callable or None
        Optional closed form ``(var, kmax) -> array`` of
        ``E[f^(k)(Y)] * var**(k/2) / sqrt(k!)`` for ``k = 0..kmax`` and
        ``Y ~ N(0, var)``. Used when the Taylor data grow too fast to sum.
    kinks : tuple of float
        Points where ``f`` is not smooth; quadrature splits there.
    """

    name: str
    func: Callable
    deriv: Optional[Callable[[int], float]] = None
    bound_c: Optional[float] = None
    bound_k: Optional[float] = None
    parity: str = "neither"
    hermite_coefs: Optional[Callable[[float, int], np.ndarray]] = None
    kinks: tuple = ()
    params: dict = field(default_factory=dict, compare=False)

    def eval(self, x):
        return self.func(np.asarray(x, dtype=float))

    __call__ = eval

    @property
    def has_derivatives(self):
        return self.deriv is not None

    @property
    def has_bound(self):
        return self.bound_c is not None and self.bound_k is not None

    def deriv_at_zero(self, a):
        if self.deriv is None:
            raise NoDerivativeSequence(f"transform {self.name!r} has no derivative sequence")
        if a < 0:
            raise ValueError("derivative order must be non-negative")
        return float(self.deriv(int(a)))

    def to_json(self):
        return {"name": self.name, **self.params}


_SIN_CYCLE = (0.0, 1.0, 0.0, -1.0)
_COS_CYCLE = (1.0, 0.0, -1.0, 0.0)


def _polynomial(name, coeffs, params=None):
    """Polynomial ``sum c_m x**m`` from a ``{m: c_m}`` mapping."""
    coeffs = {int(m): float(c) for m, c in coeffs.items() if c != 0.0}
    degree = max(coeffs, default=0)
    derivs = [coeffs.get(a, 0.0) * math.factorial(a) for a in range(degree + 1)]

    def func(x):
        out = np.zeros_like(x, dtype=float)
        for m in sorted(coeffs, reverse=True):
            out = out + coeffs[m] * x ** m
        return out

    def deriv(a):
        return derivs[a] if a <= degree else 0.0

    if all(m % 2 == 1 for m in coeffs):
        parity = "odd"
    elif all(m % 2 == 0 for m in coeffs):
        parity = "even"
    else:
        parity = "neither"
    bound_c = max((abs(v) for v in derivs), default=0.0)
    return TransformSpec(name, func, deriv, bound_c, 1.0, parity, params=params or {"name": name})


def _sin():
    return TransformSpec("sin", np.sin, lambda a: _SIN_CYCLE[a % 4], 1.0, 1.0, "odd")


def _cos():
    return TransformSpec("cos", np.cos, lambda a: _COS_CYCLE[a % 4], 1.0, 1.0, "even")


def _sin2x():
    return TransformSpec("sin2x", lambda x: np.sin(2.0 * x), lambda a: 2.0 ** a * _SIN_CYCLE[a % 4], 1.0, 2.0, "odd")


def _abs_moment(p, sigma):
    """``E|T|**p`` for ``T ~ N(0, sigma**2)``."""
    return sigma ** p * 2.0 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


def power_transform(alpha=3.0, mp=MarginalParams()):
    """Signed power ``sign(t)|t|**alpha`` rescaled so that ``E[(f(X) - mu)**2] = sigma**2``.

    The map is ``sigma * f0(z - mu) / sqrt(E[f0(T - mu)**2]) + mu`` with
    ``T ~ N(mu, sigma**2)``. For odd integer ``alpha`` it is a polynomial and
    carries exact derivatives; otherwise it is evaluation-only.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    mu, sigma = mp.mu, mp.sigma
    odd_integer = float(alpha).is_integer() and int(alpha) % 2 == 1
    if float(alpha).is_integer():
        norm2 = gauss_hermite_expectation(lambda t: (t - mu) ** (2 * int(alpha)), mu, sigma)
    else:
        # |t|**(2 alpha) is not smooth at 0; quadrature cannot reach 1e-12 on it
        norm2 = _abs_moment(2.0 * alpha, sigma)
    scale = sigma / math.sqrt(norm2)
    params = {"name": "power", "alpha": alpha, "mu": mu, "sigma": sigma}

    def func(z):
        t = z - mu
        return scale * np.sign(t) * np.abs(t) ** alpha + mu

    if not odd_integer:
        return TransformSpec("power", func, parity="odd" if mu == 0 else "neither", kinks=(mu,), params=params)

    n = int(alpha)
    # scale * (z - mu)**n + mu, expanded around 0
    coeffs = {m: scale * math.comb(n, m) * (-mu) ** (n - m) for m in range(n + 1)}
    coeffs[0] = coeffs.get(0, 0.0) + mu
    spec = _polynomial("power", coeffs, params)
    return TransformSpec("power", func, spec.deriv, spec.bound_c, spec.bound_k, spec.parity, params=params)


def _normalized_hermite(u, n_max):
    """``He_n(u) / sqrt(n!)`` for ``n = 0..n_max``, by the stable scaled recurrence."""
    h = np.empty(n_max + 1)
    h[0] = 1.0
    if n_max >= 1:
        h[1] = u
    for n in range(1, n_max):
        h[n + 1] = (u * h[n] - math.sqrt(n) * h[n - 1]) / math.sqrt(n + 1)
    return h


def _cdf_moments(mu_f0, sigma_f0, mu, sigma):
    """``E[Phi(U)]`` and ``E[Phi(U)**2]`` for ``U = (T - mu_f0)/sigma_f0``, ``T ~ N(mu, sigma**2)``.

    The second moment is the orthant probability ``P(Z1 <= U, Z2 <= U)``,
    written with Owen's T. Gauss–Hermite needs thousands of nodes here once
    ``sigma`` is a few times ``sigma_f0``.
    """
    mean_u = (mu - mu_f0) / sigma_f0
    var_u = (sigma / sigma_f0) ** 2
    h = mean_u / math.sqrt(1.0 + var_u)
    rho = var_u / (1.0 + var_u)
    first = float(ndtr(h))
    second = first - 2.0 * float(owens_t(h, math.sqrt((1.0 - rho) / (1.0 + rho))))
    return first, second


def cdf_transform(mu_f0=0.05, sigma_f0=0.4, mp=MarginalParams()):
    """Gaussian-CDF transform ``Phi((t - mu_f0)/sigma_f0)``, centered and rescaled.

    Centering and variance use expectations under ``N(mp.mu, mp.sigma**2)``,
    evaluated in closed form.
    The derivatives ``Phi^(a)(u) = (-1)**(a-1) He_(a-1)(u) phi(u)`` grow like
    ``sqrt(a!)``, so no growth bound is declared and the Gaussian-smoothed
    derivatives are supplied in closed form instead.
    """
    if not sigma_f0 > 0:
        raise ValueError("sigma_f0 must be positive")
    mu, sigma = mp.mu, mp.sigma

    def f0(t):
        return ndtr((t - mu_f0) / sigma_f0)

    center, second = _cdf_moments(mu_f0, sigma_f0, mu, sigma)
    var = second - center * center
    scale = sigma / math.sqrt(var)
    u0 = -mu_f0 / sigma_f0
    phi_u0 = math.exp(-0.5 * u0 * u0) / _SQRT_2PI

    def func(z):
        return scale * (f0(z) - center) + mu

    def deriv(a):
        if a == 0:
            return scale * (float(ndtr(u0)) - center) + mu
        he = _hermite_prob(u0, a - 1)
        return scale * sigma_f0 ** (-a) * (-1) ** (a - 1) * he * phi_u0

    def hermite_coefs(v, kmax):
        # E[Phi((Y + t - m)/s)] = Phi((t - m)/sqrt(s**2 + v)); differentiate k times in t
        total = sigma_f0 ** 2 + v
        w = -mu_f0 / math.sqrt(total)
        phi_w = math.exp(-0.5 * w * w) / _SQRT_2PI
        h = _normalized_hermite(w, max(kmax - 1, 0))
        k = np.arange(1, kmax + 1)
        out = np.empty(kmax + 1)
        out[0] = scale * (float(ndtr(w)) - center) + mu
        out[1:] = scale * (v / total) ** (k / 2) * (-1.0) ** (k - 1) * h[:kmax] * phi_w / np.sqrt(k)
        return out

    parity = "odd" if mu_f0 == 0 and mu == 0 else "neither"
    params = {"name": "cdf", "mu_f0": mu_f0, "sigma_f0": sigma_f0, "mu": mu, "sigma": sigma}
    return TransformSpec("cdf", func, deriv, None, None, parity, hermite_coefs, params=params)


def _hermite_prob(u, n):
    """Probabilists' Hermite polynomial ``He_n(u)``."""
    h_prev, h = 1.0, u
    if n == 0:
        return 1.0
    for m in range(1, n):
        h_prev, h = h, u * h - m * h_prev
    return h


BUILTIN_NAMES = ("sin", "cos", "square", "cube", "pow7", "cube_minus_square", "sin2x", "power", "cdf", "identity")


def builtin(name, **params):
    """Construct a named transform.

    ``power`` accepts ``alpha``, ``mu``, ``sigma``; ``cdf`` accepts ``mu_f0``,
    ``sigma_f0``, ``mu``, ``sigma``. The rest take no parameters.
    """
    if name == "sin":
        return _sin()
    if name == "cos":
        return _cos()
    if name == "sin2x":
        return _sin2x()
    if name == "identity":
        return _polynomial("identity", {1: 1.0})
    if name == "square":
        return _polynomial("square", {2: 1.0})
    if name == "cube":
        return _polynomial("cube", {3: 1.0})
    if name == "pow7":
        return _polynomial("pow7", {7: 1.0})
    if name == "cube_minus_square":
        return _polynomial("cube_minus_square", {3: 1.0, 2: -1.0})
    mp = MarginalParams(params.pop("mu", 0.0), params.pop("sigma", 1.0))
    if name == "power":
        return power_transform(params.pop("alpha", 3.0), mp)
    if name == "cdf":
        return cdf_transform(params.pop("mu_f0", 0.05), params.pop("sigma_f0", 0.4), mp)
    raise UnknownTransform(name)


def apply_transforms(batch, specs):
    """Map column ``j`` of ``batch`` through ``specs[j]``."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != len(specs):
        raise DimensionMismatch(f"{len(specs)} transforms for a batch of shape {batch.shape}")
    out = np.empty_like(batch)
    for j, spec in enumerate(specs):
        out[:, j] = spec.eval(batch[:, j])
    return out


def resolve_transforms(config, dim, rng=None, sigmas=None):
    """Per-variable transforms from a config object.

    ``config`` is a name, a ``{"name": ..., **params}`` mapping, or
    ``{"name": "mixed", "pool": [...]}`` which draws one entry of the pool
    uniformly at random for each variable (requires ``rng``). ``sigmas``
    supplies per-variable marginal standard deviations to the power and CDF
    transforms.
    """
    if isinstance(config, str):
        config = {"name": config}
    config = dict(config)
    name = config.pop("name")
    if name == "mixed":
        pool = config["pool"]
        if rng is None:
            raise ValueError("a random generator is needed to draw a mixed transform")
        picks = rng.integers(0, len(pool), size=dim)
        return [resolve_transforms(pool[k], 1, sigmas=None if sigmas is None else [sigmas[j]])[0]
                for j, k in enumerate(picks.tolist())]
    specs = []
    cache = {}
    for j in range(dim):
        params = dict(config)
        if name in ("power", "cdf") and sigmas is not None and "sigma" not in params:
            params["sigma"] = float(sigmas[j])
        key = tuple(sorted(params.items()))
        if key not in cache:
            cache[key] = builtin(name, **params)
        specs.append(cache[key])
    return specs
