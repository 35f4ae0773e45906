"""Scaled exponential integrals and the expected-delay kernel.

The detection statistic takes values R in [2e-3, 520], so every formula is
evaluated through the exponentially scaled integrals

    e1_scaled(x) = e^x  E1(x),      E1(x) = integral_x^inf e^-t / t dt,
    ei_scaled(x) = e^-x Ei(x),      Ei(x) = PV integral_-inf^x e^t / t dt,

whose values stay O(1) for reciprocal arguments x = 1/R up to 500.  Plain
E1/Ei would overflow or underflow long before that.

Evaluation regimes:

* e1: power series for x <= 1, modified Lentz continued fraction above
  (the continued fraction natively produces the scaled value).
* ei: power series (all terms positive, no cancellation) for x <= 40,
  optimally truncated asymptotic series in 1/x above (natively scaled).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286

_SERIES_EPS = 1e-17
# Update factors of the Lentz recurrence jitter at up to ~9e-16 from
# rounding once converged, so the stop threshold must sit above that;
# the geometric tail below 4e-15 contributes under 2e-14 relative.
_CF_EPS = 4e-15


def _prep(x, name: str = "x"):
    """Coerce to a float array, rejecting non-positive or non-finite input."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} must be positive and finite")
    return arr.copy(), scalar


def _e1_series(x: np.ndarray) -> np.ndarray:
    # E1(x) = -gamma - ln x + sum_{n>=1} (-1)^(n+1) x^n / (n n!).
    # For x <= 1 the n = 25 term is below 3e-27, far past double precision.
    s = -EULER_GAMMA - np.log(x)
    u = np.ones_like(x)
    for n in range(1, 26):
        u *= -x / n
        s -= u / n
    return s


def _e1_cf_scaled(x: np.ndarray, max_iter: int) -> np.ndarray:
    # e^x E1(x) = 1/(x + 1/(1 + 1/(x + 2/(1 + 2/(x + ...))))) via the
    # modified Lentz recurrence.  Convergence is slowest as x -> 1+.
    # Convergence is tracked per element (sticky): frozen entries stop
    # updating, since their deltas only jitter around 1 afterwards.
    tiny = 1e-300
    f = np.full_like(x, tiny)
    c = np.full_like(x, tiny)
    d = np.zeros_like(x)
    done = np.zeros(x.shape, dtype=bool)

    def advance(a: float | np.ndarray, b: float | np.ndarray) -> np.ndarray:
        nonlocal f, c, d
        d = b + a * d
        d[d == 0.0] = tiny
        c = b + a / c
        c[c == 0.0] = tiny
        d = 1.0 / d
        delta = c * d
        f = np.where(done, f, f * delta)
        return delta

    advance(1.0, x)
    ones = np.ones_like(x)
    for k in range(1, max_iter + 1):
        advance(float(k), ones)
        delta = advance(float(k), x)
        done |= np.abs(delta - 1.0) < _CF_EPS
        if done.all():
            return f
    raise RuntimeError("continued fraction for e1_scaled did not converge")


def _e1_scaled_large(x: np.ndarray) -> np.ndarray:
    # Split by magnitude: the fraction needs ~90 terms just above 1 but
    # only a handful for large x, so bucketing avoids wasted vector work.
    out = np.empty_like(x)
    mid = x <= 4.0
    if mid.any():
        out[mid] = _e1_cf_scaled(x[mid], 160)
    if not mid.all():
        out[~mid] = _e1_cf_scaled(x[~mid], 60)
    return out


def e1(x):
    """Exponential integral E1(x), for x > 0.

    Underflows to 0 around x ~ 740; use e1_scaled when the exponential
    scale matters.
    """
    arr, scalar = _prep(x)
    out = np.empty_like(arr)
    lo = arr <= 1.0
    if lo.any():
        out[lo] = _e1_series(arr[lo])
    if not lo.all():
        hi = arr[~lo]
        out[~lo] = np.exp(-hi) * _e1_scaled_large(hi)
    return float(out[0]) if scalar else out


def e1_scaled(x):
    """Exponentially scaled exponential integral e^x E1(x), for x > 0.

    Decreasing in x, with 1/(x+1) < e1_scaled(x) < 1/x.
    """
    arr, scalar = _prep(x)
    out = np.empty_like(arr)
    lo = arr <= 1.0
    if lo.any():
        xs = arr[lo]
        out[lo] = np.exp(xs) * _e1_series(xs)
    if not lo.all():
        out[~lo] = _e1_scaled_large(arr[~lo])
    return float(out[0]) if scalar else out


def _ei_series_scaled(x: np.ndarray) -> np.ndarray:
    # e^-x (gamma + ln x + sum_{n>=1} x^n / (n n!)); every series term is
    # positive, so there is no cancellation even near the Ei zero at ~0.3725
    # where the three leading pieces cancel to O(eps) absolutely.
    s = EULER_GAMMA + np.log(x)
    u = np.ones_like(x)
    for n in range(1, 131):
        u *= x / n
        t = u / n
        s += t
        if np.all(t <= _SERIES_EPS * (np.abs(s) + 1.0)):
            break
    return np.exp(-x) * s


def _ei_asymptotic_scaled(x: np.ndarray) -> np.ndarray:
    # e^-x Ei(x) ~ (1/x) sum_{k>=0} k!/x^k, truncated at the smallest term.
    # For x > 40 the smallest term is below 7e-17 relative.
    s = np.ones_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 81):
        new = term * (k / x)
        active &= new < term
        s = np.where(active, s + new, s)
        term = np.where(active, new, term)
        active &= new > _SERIES_EPS * s
        if not active.any():
            break
    return s / x


def ei_scaled(x):
    """Exponentially scaled integral e^-x Ei(x), for x > 0.

    Crosses zero with Ei near x ~ 0.3725; for large x behaves like
    1/x + 1/x^2 + O(1/x^3).
    """
    arr, scalar = _prep(x)
    out = np.empty_like(arr)
    lo = arr <= 40.0
    if lo.any():
        out[lo] = _ei_series_scaled(arr[lo])
    if not lo.all():
        out[~lo] = _ei_asymptotic_scaled(arr[~lo])
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class ScaledExpIntegrals:
    """Both scaled integrals evaluated on a common set of arguments."""

    x: np.ndarray
    e1_scaled: np.ndarray
    ei_scaled: np.ndarray


def scaled_pair(x) -> ScaledExpIntegrals:
    """Evaluate e1_scaled and ei_scaled together on positive arguments."""
    arr, _ = _prep(x)
    return ScaledExpIntegrals(x=arr, e1_scaled=e1_scaled(arr), ei_scaled=ei_scaled(arr))


def g(R, r_star, gamma):
    """Expected-delay kernel g(R) = e^{1/A} E1(1/A) - e^{1/R} E1(1/R).

    A = r_star + gamma is the alarm threshold.  g acts as the potential for
    the remaining post-change detection delay: it decreases from the finite
    limit e^{1/A} E1(1/A) at R = 0+ to exactly 0 at the threshold R = A.
    """
    if not (np.isfinite(gamma) and gamma > 0.0):
        raise ValueError("gamma must be positive and finite")
    if not (np.isfinite(r_star) and r_star > 0.0):
        raise ValueError("r_star must be positive and finite")
    arr, scalar = _prep(R, "R")
    A = r_star + gamma
    out = e1_scaled(1.0 / A) - e1_scaled(1.0 / arr)
    return float(out[0]) if scalar else out
