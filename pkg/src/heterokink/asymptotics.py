"""Closed-form asymptotic predictions for the het_k branches.

Small-delta laws for both models, all in the epsilon-scaled coordinate of
the numerics (the inner asymptotic variable differs from it by a factor
sqrt(2); the fitted constants 0.71 = 1/sqrt(2) and 0.18 = 1/(4 sqrt(2))
confirm the convention used here):

* fourth-order far field:   A(k, delta) = 1 - (2k+1)/sqrt(2) * delta
* fourth-order hump width:  width = (ln(4 sqrt(2)) - ln delta)/sqrt(2)
* sixth-order far field:    A(k, delta) = 1 - (2k+1) 2^(1/6) delta^(1/3)
  (k = 1 is the derived coefficient; other k use the proposed
  generalization and are flagged "conjectured")
* sixth-order hump width:   Delta = (sqrt(2)/6) ln(beta / W(beta^(1/3))^3),
  beta = 2^11 / (27 delta^2), W the principal Lambert branch.

Documented constants of the derivations: RHO = 4 sqrt(2) (the width-law
constant), B0 = -8/sqrt(2) (far-field forcing coefficient), and the
Lambert argument coefficient BETA_COEF = 2^11/27.

Also provides the leading-order profiles: the exact delta=0 kink
-tanh(x/sqrt(2)) and the alternating tanh-train initial guesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonpositiveWidth
from .systems import ModelKind

__all__ = [
    "SQRT2",
    "RHO",
    "B0",
    "BETA_COEF",
    "AsymptoticPrediction",
    "lambert_w",
    "cch_A_pred",
    "cch_width_pred",
    "hcch_A_pred",
    "hcch_width_pred",
    "tanh_profile",
    "kink_profile",
    "predict",
]

SQRT2 = math.sqrt(2.0)

# width-law constant: cch hump width = (ln RHO - ln delta)/sqrt(2)
RHO = 4.0 * SQRT2

# far-field forcing coefficient of the fourth-order derivation
B0 = -8.0 / SQRT2

# Lambert argument: beta = BETA_COEF / delta^2
BETA_COEF = 2.0**11 / 27.0

# qualitative validity thresholds for the leading-order laws
_VALIDITY_DELTA_MAX = {ModelKind.CCH: 0.05, ModelKind.HCCH: 0.01}

_EXP_NEG1 = math.exp(-1.0)


def lambert_w(x):
    """Principal-branch Lambert W: the w >= -1 solving w*exp(w) = x.

    Halley iteration; initial guess ln x - ln ln x for x > e, the series
    x(1 - x) for |x| < 0.3, a linear blend on [0.3, e], and the
    branch-point expansion -1 + p - p^2/3, p = sqrt(2(e x + 1)), for
    x in [-1/e, -0.3].  Accepts scalars or arrays.

    Raises
    ------
    DomainError
        If any x < -1/e (below the branch point).
    """
    scalar_in = np.isscalar(x)
    x = np.asarray(x, dtype=float)
    if np.any(x < -_EXP_NEG1) or not np.all(np.isfinite(x)):
        raise DomainError("lambert_w requires finite x >= -1/e")
    xr = np.atleast_1d(x)
    w = np.empty_like(xr)

    series = np.abs(xr) < 0.3
    w[series] = xr[series] * (1.0 - xr[series])
    big = xr > math.e
    lx = np.log(xr[big])
    w[big] = lx - np.log(lx)
    mid = ~series & ~big & (xr > 0)
    t = (xr[mid] - 0.3) / (math.e - 0.3)
    w[mid] = (1.0 - t) * 0.21 + t * 1.0
    bp = (xr <= -0.3)
    p = np.sqrt(2.0 * (math.e * xr[bp] + 1.0))
    w[bp] = -1.0 + p * (1.0 - p / 3.0)

    for _ in range(100):
        ew = np.exp(w)
        f = w * ew - xr
        wp1 = w + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        dw = np.where(np.isfinite(dw), dw, 0.0)
        w -= dw
        if np.all(np.abs(dw) <= 2e-16 * (1.0 + np.abs(w))):
            break
    return float(w[0]) if scalar_in else w.reshape(x.shape)


def cch_A_pred(k: int, delta: float) -> float:
    """Far-field law of the fourth-order model: A = 1 - (2k+1)/sqrt(2) delta."""
    _check_family(k, delta)
    return 1.0 - (2 * k + 1) / SQRT2 * delta


def cch_width_pred(delta: float) -> float:
    """Hump width of the fourth-order model: (ln(4 sqrt(2)) - ln delta)/sqrt(2).

    Valid for 0 < delta < 1/(4 sqrt(2)); beyond that the formula gives a
    nonpositive width.
    """
    if not (delta > 0.0) or not math.isfinite(delta):
        raise DomainError(f"width law needs delta > 0, got {delta}")
    if delta >= 1.0 / RHO:
        raise NonpositiveWidth(f"predicted width <= 0 for delta >= 1/(4 sqrt(2)), got {delta}")
    return (math.log(RHO) - math.log(delta)) / SQRT2


def hcch_A_pred(k: int, delta: float) -> float:
    """Far-field law of the sixth-order model: A = 1 - (2k+1) 2^(1/6) delta^(1/3).

    The k=1 coefficient -3*2^(1/6) is the derived one; other k follow the
    proposed generalization (see ``predict`` for the conjectured flag).
    """
    _check_family(k, delta)
    return 1.0 - (2 * k + 1) * 2.0 ** (1.0 / 6.0) * delta ** (1.0 / 3.0)


def hcch_width_pred(delta: float) -> float:
    """Lambert-W hump width of the sixth-order model.

    Delta = (sqrt(2)/6) ln(beta / W(beta^(1/3))^3) with
    beta = 2^11/(27 delta^2).  Since ln W(y) = ln y - W(y), this equals
    (sqrt(2)/2) W(beta^(1/3)), which is how it is evaluated (no overflow
    for extreme delta); the logarithmic form is asserted in the tests.
    """
    if not (delta > 0.0) or not math.isfinite(delta):
        raise DomainError(f"width law needs delta > 0, got {delta}")
    y = BETA_COEF ** (1.0 / 3.0) / delta ** (2.0 / 3.0)  # beta^(1/3)
    return 0.5 * SQRT2 * lambert_w(y)


@dataclass(frozen=True)
class AsymptoticPrediction:
    """Predicted branch point of family het_k at one delta.

    ``width_pred`` is NaN where the width law is undefined (delta = 0, or
    past the fourth-order validity bound).  ``validity`` is the
    qualitative small-delta flag; ``conjectured`` marks the sixth-order
    A-law for k != 1, which generalizes the derived k = 1 coefficient.
    """

    kind: ModelKind
    k: int
    delta: float
    A_pred: float
    width_pred: float
    validity: bool
    conjectured: bool


def predict(kind: ModelKind, k: int, delta: float) -> AsymptoticPrediction:
    """Evaluate both laws for one (kind, k, delta); see AsymptoticPrediction."""
    kind = ModelKind(kind)
    if kind is ModelKind.CCH:
        a = cch_A_pred(k, delta)
        conjectured = False
    else:
        a = hcch_A_pred(k, delta)
        conjectured = k != 1
    try:
        width = cch_width_pred(delta) if kind is ModelKind.CCH else hcch_width_pred(delta)
    except DomainError:
        width = math.nan
    return AsymptoticPrediction(
        kind=kind,
        k=k,
        delta=delta,
        A_pred=a,
        width_pred=width,
        validity=0.0 < delta <= _VALIDITY_DELTA_MAX[kind],
        conjectured=conjectured,
    )


def _check_family(k, delta):
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise DomainError(f"family index k must be a nonnegative integer, got {k}")
    if delta < 0.0 or not math.isfinite(delta):
        raise DomainError(f"delta must be >= 0 and finite, got {delta}")


def _tanh_derivs(xi: np.ndarray) -> np.ndarray:
    """tanh and its first five derivatives, columns (t, t', ..., t^(5))."""
    t = np.tanh(xi)
    s = 1.0 - t * t
    out = np.empty(xi.shape + (6,))
    out[..., 0] = t
    out[..., 1] = s
    out[..., 2] = -2.0 * t * s
    out[..., 3] = -2.0 * s * (1.0 - 3.0 * t * t)
    out[..., 4] = 8.0 * t * s * (2.0 - 3.0 * t * t)
    out[..., 5] = 8.0 * s * (2.0 - 15.0 * t * t + 15.0 * t**4)
    return out


def tanh_profile(k: int, K: float, x: np.ndarray) -> np.ndarray:
    """Alternating tanh train with k interior kinks and spacing K.

    V(x) = sum_{j=-k..k} s_j tanh(x - j K), s_j = (-1)^(j+k+1), so V is
    odd, V(-inf) = +1, V(+inf) = -1; k = 0 is -tanh(x) and k = 1 is
    -tanh(x-K) + tanh(x) - tanh(x+K).  Returns shape (n, 6): V and its
    derivatives through order 5 (slice the first ``dimension(kind)``
    columns for a phase profile).
    """
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    if k >= 1 and not (K > 0.0):
        raise DomainError(f"K must be > 0 for k >= 1, got {K}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape + (6,))
    for j in range(-k, k + 1):
        out += (-1.0) ** (j + k + 1) * _tanh_derivs(x - j * K)
    return out


def kink_profile(x: np.ndarray) -> np.ndarray:
    """The exact delta=0, A=1 stationary kink -tanh(x/sqrt(2)).

    Returns shape (n, 6): c and derivatives through order 5 (each
    differentiation contributes a 1/sqrt(2) chain factor).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tab = -_tanh_derivs(x / SQRT2)
    scale = (1.0 / SQRT2) ** np.arange(6)
    return tab * scale
