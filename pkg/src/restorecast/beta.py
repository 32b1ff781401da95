"""Beta(a, b, 0, U) restoration-progress curve and its inverse.

Progress at ``t`` hours is the regularized incomplete beta function at
``t / U``. The inverse maps a progress level back to the planned hour at
which it is reached.

The numerical kernels are numba-compiled scalar loops; the ``*_many``
helpers evaluate whole arrays and are what the sampler and the forecaster
call in their inner loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "BetaRestorationModel",
    "betainc",
    "betainc_inv",
    "beta_cdf",
    "beta_inverse_cdf",
    "beta_pdf",
]

_EPS = 1e-16
_TINY = 1e-300
_MAXIT = 10_000


@nb.njit(cache=True)
def _continued_fraction(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


@nb.njit(cache=True)
def _log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@nb.njit(cache=True)
def _betainc(a, b, x):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _continued_fraction(a, b, x) / a
    return 1.0 - front * _continued_fraction(b, a, 1.0 - x) / b


@nb.njit(cache=True)
def _betapdf(a, b, x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - _log_beta(a, b))


@nb.njit(cache=True)
def _betainc_inv(a, b, q):
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    lo = 0.0
    hi = 1.0
    x = a / (a + b)
    for _ in range(400):
        f = _betainc(a, b, x) - q
        if abs(f) <= 1e-14 * q:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= 1e-300 + 1e-16 * hi:
            return x
        pdf = _betapdf(a, b, x)
        step_ok = False
        if pdf > 0.0 and math.isfinite(pdf):
            x_new = x - f / pdf
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi)
        x = x_new
    return x


@nb.njit(cache=True)
def _betainc_many(a, b, x):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = _betainc(a, b, x[i])
    return out


@nb.njit(cache=True)
def _betapdf_many(a, b, x):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = _betapdf(a, b, x[i])
    return out


@nb.njit(cache=True)
def inverse_hours_many(q, a, b, upper):
    """Planned hours to reach progress ``q`` for each (a, b, U) triple."""
    out = np.empty(a.size)
    for i in range(a.size):
        out[i] = upper[i] * _betainc_inv(a[i], b[i], q)
    return out


def betainc(a: float, b: float, x):
    """Regularized incomplete beta function I_x(a, b); ``x`` may be an array."""
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if np.ndim(x) == 0:
        return _betainc(float(a), float(b), float(x))
    arr = np.asarray(x, dtype=np.float64)
    return _betainc_many(float(a), float(b), arr.ravel()).reshape(arr.shape)


def betainc_inv(a: float, b: float, q: float) -> float:
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"progress level must lie in [0, 1], got {q}")
    return _betainc_inv(float(a), float(b), float(q))


@dataclass(frozen=True)
class BetaRestorationModel:
    """Progress-curve parameters; the lower bound is fixed at hour 0."""

    a: float
    b: float
    U: float

    L = 0.0

    def __post_init__(self):
        for name in ("a", "b", "U"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    def cdf(self, t):
        return beta_cdf(t, self)

    def inverse_cdf(self, q: float) -> float:
        return beta_inverse_cdf(q, self)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.U)


def beta_cdf(t, model: BetaRestorationModel):
    """Normalized progress reached ``t`` hours after restoration start.

    Times outside ``[0, U]`` clamp to 0 or 1.
    """
    x = np.asarray(t, dtype=np.float64) / model.U
    return betainc(model.a, model.b, x if x.ndim else float(x))


def beta_inverse_cdf(q: float, model: BetaRestorationModel) -> float:
    """Planned hour at which progress ``q`` is reached."""
    return model.U * betainc_inv(model.a, model.b, q)


def beta_pdf(t, model: BetaRestorationModel):
    """Progress rate (per hour) at ``t``."""
    x = np.asarray(t, dtype=np.float64) / model.U
    if not x.ndim:
        return _betapdf(model.a, model.b, float(x)) / model.U
    return _betapdf_many(model.a, model.b, x.ravel()).reshape(x.shape) / model.U
