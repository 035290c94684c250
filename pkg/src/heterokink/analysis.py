"""Measurement and fitting layer for branch data.

Extracts zero-crossing gaps from profiles, performs the closed-form
least-squares fits for the far-field and width laws, and builds
numeric-versus-asymptotic comparison reports.  Everything here is pure:
no integration, no I/O.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq

from .asymptotics import AsymptoticPrediction
from .errors import (
    DomainError,
    FewerThanTwoCrossings,
    InsufficientRows,
    MismatchedFamilies,
)
from .systems import ModelKind

__all__ = [
    "BranchRow",
    "BranchTable",
    "FitResult",
    "Report",
    "root_distances",
    "fit_linear_A",
    "fit_log_width",
    "fit_cube_root_A",
    "compare_report",
]


def root_distances(x, states=None) -> list[float]:
    """Consecutive gaps between the zero crossings of U_1.

    Accepts a profile object with .x/.states attributes, or (x, states)
    arrays where states is (n, dim) or a bare U_1 column.  Crossings are
    polished on a C^1 interpolant (Hermite when the derivative column is
    available).  Raises FewerThanTwoCrossings when fewer than two zeros
    exist, e.g. for a het_0 profile.
    """
    if states is None:
        states = x.states
        x = x.x
    x = np.asarray(x, dtype=float)
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        u1 = states
        spline = CubicSpline(x, u1)
    else:
        u1 = states[:, 0]
        if states.shape[1] >= 2:
            spline = CubicHermiteSpline(x, u1, states[:, 1])
        else:
            spline = CubicSpline(x, u1)
    zeros: list[float] = []
    for i in range(len(x) - 1):
        a, b = u1[i], u1[i + 1]
        if a == 0.0:
            zeros.append(float(x[i]))
            continue
        if a * b < 0.0:
            zeros.append(float(brentq(spline, x[i], x[i + 1], xtol=1e-14)))
    if u1[-1] == 0.0:
        zeros.append(float(x[-1]))
    if len(zeros) < 2:
        raise FewerThanTwoCrossings(
            f"profile has {len(zeros)} zero crossing(s); need at least two"
        )
    return list(np.diff(zeros))


@dataclass(frozen=True)
class BranchRow:
    kind: ModelKind
    k: int
    delta: float
    A: float
    d_min: float
    root_distances: tuple[float, ...]
    source: str = "shoot"  # or "bvp"

    @property
    def first_gap(self) -> float:
        return self.root_distances[0] if self.root_distances else math.nan


@dataclass
class BranchTable:
    """Rows sorted by delta; duplicates of (delta, k, source) rejected."""

    rows: list[BranchRow] = field(default_factory=list)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.delta, r.k, r.source))
        seen = set()
        for r in self.rows:
            key = (r.delta, r.k, r.source)
            if key in seen:
                raise DomainError(f"duplicate branch row for {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def subset(self, delta_max: float | None = None, delta_min: float | None = None,
               k: int | None = None) -> "BranchTable":
        rows = [
            r
            for r in self.rows
            if (delta_max is None or r.delta <= delta_max)
            and (delta_min is None or r.delta >= delta_min)
            and (k is None or r.k == k)
        ]
        return BranchTable(rows)

    def family(self) -> tuple[ModelKind, int]:
        kinds = {r.kind for r in self.rows}
        ks = {r.k for r in self.rows}
        if len(kinds) != 1 or len(ks) != 1:
            raise MismatchedFamilies(
                f"table mixes families: kinds={sorted(k.value for k in kinds)}, k={sorted(ks)}"
            )
        return next(iter(kinds)), next(iter(ks))


@dataclass(frozen=True)
class FitResult:
    model: str  # LinearA | LogWidth | CubeRootA
    parameters: tuple[float, ...]
    rms_residual: float
    n_points: int

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": list(self.parameters),
            "rms_residual": self.rms_residual,
            "n_points": self.n_points,
        }


def _require_rows(table: BranchTable, n: int):
    if len(table) < n:
        raise InsufficientRows(f"need at least {n} rows, got {len(table)}")


def fit_linear_A(table: BranchTable) -> FitResult:
    """Least squares for mu_1 in A = 1 - mu_1 * delta (closed form).

    The model is linear in mu_1, so the normal equation is one division:
    mu_1 = sum(delta (1-A)) / sum(delta^2).
    """
    _require_rows(table, 3)
    table.family()
    d = np.array([r.delta for r in table])
    A = np.array([r.A for r in table])
    mu1 = float(np.sum(d * (1.0 - A)) / np.sum(d * d))
    res = (1.0 - mu1 * d) - A
    return FitResult("LinearA", (mu1,), float(np.sqrt(np.mean(res**2))), len(table))


def fit_log_width(table: BranchTable) -> FitResult:
    """Least squares for (eta1, eta2) in K = eta1 * ln(eta2 * delta).

    Reparametrized as K = a ln(delta) + b, linear in (a, b), with
    eta1 = a and eta2 = exp(b/a); residuals are unweighted in ln(delta),
    so log-spaced rows contribute uniformly.
    """
    rows = [r for r in table if r.root_distances]
    if len(rows) < 3:
        raise InsufficientRows(f"need at least 3 rows with gap data, got {len(rows)}")
    ln_d = np.log([r.delta for r in rows])
    K = np.array([r.first_gap for r in rows])
    a, b = np.polyfit(ln_d, K, 1)
    if a == 0.0:
        raise DomainError("degenerate log-width fit: zero slope")
    res = (a * ln_d + b) - K
    return FitResult(
        "LogWidth",
        (float(a), float(math.exp(b / a))),
        float(np.sqrt(np.mean(res**2))),
        len(rows),
    )


def fit_cube_root_A(table: BranchTable) -> FitResult:
    """Least squares for A_1 in A = 1 + A_1 * delta^(1/3) (closed form)."""
    _require_rows(table, 3)
    table.family()
    t = np.array([r.delta for r in table]) ** (1.0 / 3.0)
    A = np.array([r.A for r in table])
    a1 = float(np.sum(t * (A - 1.0)) / np.sum(t * t))
    res = (1.0 + a1 * t) - A
    return FitResult("CubeRootA", (a1,), float(np.sqrt(np.mean(res**2))), len(table))


@dataclass
class Report:
    """Per-delta numeric-vs-asymptotic comparison plus fit summaries."""

    kind: ModelKind
    k: int
    rows: list[dict]
    fits: dict[str, FitResult]

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": self.kind.value,
            "k": self.k,
            "rows": self.rows,
            "fits": {name: f.to_json_dict() for name, f in self.fits.items()},
        }

    def to_text(self) -> str:
        head = f"family {self.kind.value} het_{self.k}: {len(self.rows)} matched delta values"
        cols = [
            "delta", "A_num", "A_pred", "A_abs_err",
            "width_num", "width_pred", "width_abs_err",
        ]
        lines = [head, "  ".join(f"{c:>13s}" for c in cols)]
        for r in self.rows:
            lines.append("  ".join(f"{r[c]:>13.6g}" for c in cols))
        for name, f in sorted(self.fits.items()):
            pars = ", ".join(f"{v:.10g}" for v in f.parameters)
            lines.append(
                f"fit {name}: ({pars})  rms={f.rms_residual:.3e}  n={f.n_points}"
            )
        return "\n".join(lines) + "\n"


def compare_report(table: BranchTable, predictions) -> Report:
    """Join branch rows with asymptotic predictions on delta.

    predictions is an iterable of AsymptoticPrediction for the same
    (kind, k) family; rows whose delta has no prediction are dropped,
    and an empty overlap raises MismatchedFamilies.
    """
    kind, k = table.family()
    preds: list[AsymptoticPrediction] = list(predictions)
    for p in preds:
        if ModelKind(p.kind) is not kind or p.k != k:
            raise MismatchedFamilies(
                f"prediction for {ModelKind(p.kind).value} het_{p.k} does not match "
                f"table family {kind.value} het_{k}"
            )
    rows_out: list[dict] = []
    for r in table:
        match = next(
            (p for p in preds if math.isclose(p.delta, r.delta, rel_tol=1e-9)), None
        )
        if match is None:
            continue
        width_num = r.first_gap
        width_pred = match.width_pred
        rows_out.append(
            {
                "delta": r.delta,
                "A_num": r.A,
                "A_pred": match.A_pred,
                "A_abs_err": abs(r.A - match.A_pred),
                "A_rel_err": abs(r.A - match.A_pred) / abs(match.A_pred),
                "width_num": width_num,
                "width_pred": width_pred,
                "width_abs_err": abs(width_num - width_pred),
                "width_rel_err": (
                    abs(width_num - width_pred) / abs(width_pred)
                    if width_pred and math.isfinite(width_pred)
                    else math.nan
                ),
                "conjectured": match.conjectured,
            }
        )
    if not rows_out:
        raise MismatchedFamilies("no prediction matches any table delta")
    fits: dict[str, FitResult] = {}
    try:
        if kind is ModelKind.CCH:
            fits["linear_A"] = fit_linear_A(table)
        else:
            fits["cube_root_A"] = fit_cube_root_A(table)
    except InsufficientRows:
        pass
    try:
        fits["log_width"] = fit_log_width(table)
    except InsufficientRows:
        pass
    return Report(kind=kind, k=k, rows=rows_out, fits=fits)
