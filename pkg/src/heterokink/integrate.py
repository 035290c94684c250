"""Adaptive embedded Runge-Kutta 5(4) integration with events.

Dormand-Prince pair with the standard quartic dense-output interpolant;
the step/event loop is owned here so that event semantics, the step
budget, and the divergence guard behave exactly as documented.  Events
are located by root-polishing the dense interpolant inside the step that
brackets them.

Termination is reported on the returned Trajectory rather than raised:
shooting trajectories that blow up in finite x are an expected outcome,
not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .systems import ModelKind, ModelParams, dimension, rhs_callable

__all__ = [
    "IntegratorConfig",
    "EventKind",
    "EventSpec",
    "EventHit",
    "Termination",
    "Trajectory",
    "integrate",
    "integrate_field",
    "convergence_order",
    "convergence_order_field",
]

# Dormand-Prince 5(4) tableau (exact rationals) and the Shampine quartic
# interpolant coefficients (float64 table).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# error estimate weights, err = h * (K^T E), fifth minus embedded fourth
_E = np.array([
    -71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40,
])
_P = np.array([
    [1.0, -2.8535800653862835, 3.0717434641059005, -1.1270175653862835],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 4.023133379230305, -6.249321565289, 2.675424484351598],
    [0.0, -3.7324019615885042, 10.068970589843675, -5.685526961588504],
    [0.0, 2.5548038301849423, -6.399112377351017, 3.5219323679207912],
    [0.0, -1.3744241142186024, 3.272657752246729, -1.7672812570757455],
    [0.0, 1.3824689317781436, -3.764937863556287, 2.382468931778144],
])

_ORDER_EXP = -1.0 / 5.0
_MAX_FACTOR = 5.0
_MIN_FACTOR = 0.2
_SAFETY = 0.9


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float | None = None
    h_max: float = math.inf
    max_steps: int = 1_000_000
    divergence_bound: float = 1e6

    def __post_init__(self):
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ValueError("rtol and atol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


class EventKind(Enum):
    COMPONENT_CROSSES_ZERO = "component_crosses_zero"
    ABS_COMPONENT_EXCEEDS = "abs_component_exceeds"
    ODD_NORM_LOCAL_MIN = "odd_norm_local_min"


@dataclass(frozen=True)
class EventSpec:
    """Declarative event: which function, which crossings, terminal or not.

    ``index`` is 0-based (component U_1 is index 0).  For
    ODD_NORM_LOCAL_MIN the event function is the x-derivative of
    0.5 * sum of squared odd components, so minima are its rising zeros;
    direction defaults to rising for that kind.
    """

    kind: EventKind
    index: int | None = None
    threshold: float | None = None
    direction: str = "any"
    terminal: bool = False

    def __post_init__(self):
        if self.direction not in ("any", "rising", "falling"):
            raise ValueError(f"bad direction {self.direction!r}")
        if self.kind in (EventKind.COMPONENT_CROSSES_ZERO, EventKind.ABS_COMPONENT_EXCEEDS):
            if self.index is None or self.index < 0:
                raise ValueError(f"{self.kind.value} needs a component index")
        if self.kind is EventKind.ABS_COMPONENT_EXCEEDS:
            if self.threshold is None or not (self.threshold > 0.0):
                raise ValueError("abs_component_exceeds needs threshold > 0")
        if self.kind is EventKind.ODD_NORM_LOCAL_MIN and self.direction == "any":
            object.__setattr__(self, "direction", "rising")


@dataclass(frozen=True)
class EventHit:
    x: float
    state: np.ndarray
    event_index: int
    spec: EventSpec | None = None


class Termination(Enum):
    EVENT_HIT = "event_hit"
    SPAN_END = "span_end"
    STEP_BUDGET = "step_budget"
    DIVERGED = "diverged"


@dataclass
class Trajectory:
    x: np.ndarray
    states: np.ndarray
    events: list[EventHit] = field(default_factory=list)
    termination: Termination = Termination.SPAN_END
    n_steps: int = 0

    def hits(self, event_index: int) -> list[EventHit]:
        return [h for h in self.events if h.event_index == event_index]

    @property
    def end_state(self) -> np.ndarray:
        return self.states[-1]


def _event_callable(spec: EventSpec, kind: ModelKind, params: ModelParams):
    if spec.kind is EventKind.COMPONENT_CROSSES_ZERO:
        i = spec.index
        return lambda y: y[i]
    if spec.kind is EventKind.ABS_COMPONENT_EXCEEDS:
        i, thr = spec.index, spec.threshold
        return lambda y: abs(y[i]) - thr
    # ODD_NORM_LOCAL_MIN: g = d/dx (0.5 * sum over odd components of U_i^2)
    A = params.A
    q = params.drive
    if kind is ModelKind.CCH:
        def g(y):
            f3 = (3.0 * A * y[0] * y[0] - 1.0) * y[1] + q * (y[0] * y[0] - 1.0)
            return y[0] * y[1] + y[2] * f3
        return g

    def g(y):
        f5 = (
            6.0 * A * y[1] ** 3
            + 18.0 * A * y[0] * y[1] * y[2]
            + (3.0 * A * y[0] * y[0] - 1.0) * y[3]
            + q * (1.0 - y[0] * y[0])
        )
        return y[0] * y[1] + y[2] * y[3] + y[4] * f5
    return g


def integrate(
    kind: ModelKind,
    params: ModelParams,
    U0: np.ndarray,
    x_span: tuple[float, float],
    config: IntegratorConfig | None = None,
    events: tuple[EventSpec, ...] = (),
) -> Trajectory:
    """Integrate U' = F(U) over x_span with event detection.

    Events are located to |g| < 1e-10 on the dense interpolant; terminal
    events truncate the trajectory at the hit.  See IntegratorConfig for
    tolerances and the step budget; |U_i| > divergence_bound reports
    Termination.DIVERGED on the result instead of raising.
    """
    kind = ModelKind(kind)
    dim = dimension(kind)
    U0 = np.asarray(U0, dtype=float)
    if U0.shape != (dim,):
        raise ValueError(f"U0 must have shape ({dim},), got {U0.shape}")
    for spec in events:
        if spec.index is not None and spec.index >= dim:
            raise ValueError(f"event index {spec.index} out of range for dimension {dim}")

    f = rhs_callable(kind, params)
    ev = [(_event_callable(s, kind, params), s) for s in events]
    return _solve(f, U0, x_span, config or IntegratorConfig(), ev)


def integrate_field(
    f,
    U0: np.ndarray,
    x_span: tuple[float, float],
    config: IntegratorConfig | None = None,
    events: tuple = (),
) -> Trajectory:
    """Generic-field variant of ``integrate`` for testing and utilities.

    ``f(y) -> dy/dx`` is autonomous; ``events`` are (callable, EventSpec)
    pairs where the spec supplies direction/terminal flags (the spec's
    own kind is ignored).
    """
    U0 = np.asarray(U0, dtype=float)
    return _solve(f, U0, x_span, config or IntegratorConfig(), list(events))


def _initial_step(f, y0, f0, x0, x1, rtol, atol):
    # Hairer-style startup heuristic
    sc = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / sc)
    d1 = _rms(f0 / sc)
    h0 = 1e-6 if d1 <= 1e-15 or d0 <= 1e-15 else 0.01 * d0 / d1
    h0 = min(h0, abs(x1 - x0))
    y1 = y0 + h0 * f0
    f1 = f(y1)
    d2 = _rms((f1 - f0) / sc) / h0
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e-3)
    return min(100.0 * h0, h1, abs(x1 - x0))


def _rms(v):
    return float(np.sqrt(np.mean(v * v)))


def _solve(f, y0, x_span, cfg, ev):
    x0, x1 = float(x_span[0]), float(x_span[1])
    if not x0 < x1:
        raise ValueError("x_span must satisfy x0 < x1")
    if not np.all(np.isfinite(y0)):
        raise ValueError("U0 must be finite")

    y = y0.copy()
    x = x0
    k1 = f(y)
    h = cfg.h_init if cfg.h_init is not None else _initial_step(f, y, k1, x0, x1, cfg.rtol, cfg.atol)
    h = min(h, cfg.h_max)

    xs = [x]
    ys = [y.copy()]
    hits: list[EventHit] = []
    g_prev = [g(y) for g, _ in ev]
    termination = Termination.SPAN_END
    n_steps = 0
    K = np.empty((7, len(y)))

    # blowing up through the divergence bound is normal operation here;
    # overflow in rejected trial stages must not spam warnings
    _err_state = np.seterr(over="ignore", invalid="ignore")
    try:
        termination, n_steps = _step_loop(
            f, cfg, ev, x, x1, y, k1, h, K, xs, ys, hits, g_prev, termination, n_steps
        )
    finally:
        np.seterr(**_err_state)

    return Trajectory(
        x=np.array(xs),
        states=np.array(ys),
        events=hits,
        termination=termination,
        n_steps=n_steps,
    )


def _step_loop(f, cfg, ev, x, x1, y, k1, h, K, xs, ys, hits, g_prev, termination, n_steps):
    while x < x1:
        if n_steps >= cfg.max_steps:
            termination = Termination.STEP_BUDGET
            break
        h = min(h, x1 - x)
        if h < 1e-14 * max(1.0, abs(x)):
            termination = Termination.STEP_BUDGET
            break

        K[0] = k1
        for i in range(1, 6):
            K[i] = f(y + h * (_A[i, :i] @ K[:i]))
        y_new = y + h * (_B @ K[:6])
        if not np.all(np.isfinite(y_new)):
            h *= 0.25
            continue
        K[6] = f(y_new)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = h * (_E @ K) / scale
        err_norm = math.sqrt(float(err @ err) / err.size)
        # an overflowed stage can hide behind zero weights in B and E,
        # but it always contaminates the next stage, so err sees it
        if not err_norm <= 1.0:
            h *= 0.25 if not math.isfinite(err_norm) else max(
                _MIN_FACTOR, _SAFETY * err_norm**_ORDER_EXP
            )
            n_steps += 1
            continue

        # accepted
        n_steps += 1
        h_used = h
        factor = _MAX_FACTOR if err_norm == 0.0 else min(_MAX_FACTOR, _SAFETY * err_norm**_ORDER_EXP)
        h = min(h_used * max(factor, _MIN_FACTOR), cfg.h_max)

        x_new = x + h_used
        step_hits = []
        terminal_theta = None
        dense = None
        for iev, (g, spec) in enumerate(ev):
            g0 = g_prev[iev]
            g1 = g(y_new)
            if g0 == 0.0:
                g_prev[iev] = g1
                continue
            if spec.direction == "rising":
                crossed = g0 < 0.0 < g1
            elif spec.direction == "falling":
                crossed = g0 > 0.0 > g1
            else:
                crossed = (g0 < 0.0 < g1) or (g0 > 0.0 > g1)
            g_prev[iev] = g1
            if not crossed:
                continue
            if dense is None:
                KP = K.T @ _P  # quartic dense-output coefficients, (n, 4)

                def dense(theta, _y=y, _h=h_used, _KP=KP):
                    th = np.array([theta, theta**2, theta**3, theta**4])
                    return _y + _h * (_KP @ th)

            theta = _locate(lambda th: g(dense(th)), g0, g1)
            if theta is None:
                continue
            step_hits.append((theta, iev, spec))
            if spec.terminal and (terminal_theta is None or theta < terminal_theta):
                terminal_theta = theta

        if terminal_theta is not None:
            step_hits = [hh for hh in step_hits if hh[0] <= terminal_theta]
            x_new = x + terminal_theta * h_used
            y_new = dense(terminal_theta)
            termination = Termination.EVENT_HIT
        for theta, iev, spec in sorted(step_hits):
            hits.append(EventHit(x + theta * h_used, dense(theta), iev, spec))

        x = x_new
        y = y_new
        k1 = K[6] if terminal_theta is None else f(y)
        xs.append(x)
        ys.append(y.copy())
        # event caches must describe the (possibly truncated) step end
        if terminal_theta is not None:
            break
        if np.max(np.abs(y)) > cfg.divergence_bound:
            termination = Termination.DIVERGED
            break

    return termination, n_steps


def _locate(G, g0, g1):
    """Root of the event function on the dense interpolant, theta in (0, 1]."""
    a, b = 0.0, 1.0
    ga, gb = G(a), G(b)
    if ga == 0.0:
        return None
    if ga * gb > 0.0:
        # interpolant endpoint roundoff flipped a sign; look for the change
        thetas = np.linspace(0.0, 1.0, 17)
        vals = [G(t) for t in thetas]
        found = False
        for i in range(16):
            if vals[i] != 0.0 and vals[i] * vals[i + 1] <= 0.0:
                a, b, ga, gb = thetas[i], thetas[i + 1], vals[i], vals[i + 1]
                found = True
                break
        if not found:
            return None
    return float(brentq(G, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=200))


def _solve_fixed(f, y0, x_span, n):
    """Fixed-step fifth-order solution value at the right endpoint."""
    x0, x1 = float(x_span[0]), float(x_span[1])
    h = (x1 - x0) / n
    y = np.asarray(y0, dtype=float).copy()
    K = np.empty((7, len(y)))
    k1 = f(y)
    for _ in range(n):
        K[0] = k1
        for i in range(1, 6):
            K[i] = f(y + h * (_A[i, :i] @ K[:i]))
        y = y + h * (_B @ K[:6])
        k1 = f(y)
    return y


def convergence_order_field(f, U0, x_span, n0: int = 64) -> float:
    """Empirical order from fixed-step runs at h, h/2, h/4."""
    y1 = _solve_fixed(f, U0, x_span, n0)
    y2 = _solve_fixed(f, U0, x_span, 2 * n0)
    y4 = _solve_fixed(f, U0, x_span, 4 * n0)
    e1 = float(np.max(np.abs(y1 - y2)))
    e2 = float(np.max(np.abs(y2 - y4)))
    if e2 == 0.0:
        raise ValueError("differences vanished; decrease n0")
    return math.log2(e1 / e2)


def convergence_order(kind: ModelKind, params: ModelParams, U0, x_span, n0: int = 64) -> float:
    """Empirical convergence order on a model trajectory (expect ~5)."""
    f = rhs_callable(ModelKind(kind), params)
    return convergence_order_field(f, np.asarray(U0, dtype=float), x_span, n0)
