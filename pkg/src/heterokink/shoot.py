"""Heteroclinic location by shooting from the unstable manifold of U+.

A probe integrates from a point displaced off U+ along the unstable
manifold until |U_1| exceeds a threshold.  Symmetric heteroclinics are
zeros of the distance function d_A (odd-component norm at its local
minima along the trajectory); the signed detector that makes bisection
possible is U_3 sampled at a prescribed zero crossing of U_1.

CCH has a one-dimensional unstable manifold, so A is the only shooting
parameter.  HCCH has a two-dimensional one parameterized by an angle
phi; roots are found by minimizing d_A over (A, phi) instead of
bisecting.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import BranchLost, DomainError, NotEnoughCrossings
from .integrate import (
    EventKind,
    EventSpec,
    IntegratorConfig,
    Termination,
    integrate,
)
from .systems import ModelKind, ModelParams, dimension, equilibrium_analysis

__all__ = [
    "ShootConfig",
    "DistanceProfile",
    "BranchPoint",
    "ProbeResult",
    "unstable_seed",
    "probe",
    "distance_function",
    "signed_detector",
    "distance_profile",
    "scan_and_refine",
    "branch_point_at",
    "trace_branch",
]


@dataclass(frozen=True)
class ShootConfig:
    """Tunables for shooting probes and the A-scan.

    A_grid is (A_min, A_max, step).  angle is the HCCH unstable-plane
    angle in [0, 2pi); ignored for CCH.
    """

    eps_offset: float = 1e-6
    threshold: float = 1.5
    A_grid: tuple[float, float, float] = (0.55, 0.9999, 1e-3)
    bisect_tol: float = 1e-12
    angle: float | None = None
    x_max: float = 400.0
    refine_below: float = 0.05
    accept_distance: float = 1e-8
    workers: int = 1
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if not (0.0 < self.eps_offset < 1.0):
            raise ValueError("eps_offset must lie in (0, 1)")
        if not self.threshold > 1.0:
            raise ValueError("threshold must exceed 1")
        lo, hi, step = self.A_grid
        if not (lo < hi and step > 0.0):
            raise ValueError("A_grid must be (lo, hi, step) with lo < hi, step > 0")


@dataclass
class DistanceProfile:
    A_values: np.ndarray
    d_values: np.ndarray
    zero_candidates: list[tuple[float, float]]


@dataclass
class BranchPoint:
    kind: ModelKind
    k: int
    A: float
    delta: float
    root_distances: list[float]
    d_min: float
    symmetric_point: tuple[float, np.ndarray]
    angle: float | None = None


@dataclass
class ProbeResult:
    """Everything a scan needs from one shooting integration."""

    crossings_x: np.ndarray      # x at zero crossings of U_1, in order
    crossings_U: np.ndarray      # states there, shape (n_cross, dim)
    d_min: float                 # min odd-norm over local minima and endpoint
    endpoint_only: bool          # True when no local minimum was recorded
    termination: Termination

    def detector(self, crossing_index: int) -> float:
        """U_3 at the crossing_index-th (1-based) zero crossing of U_1."""
        if crossing_index < 1:
            raise ValueError("crossing_index is 1-based")
        if len(self.crossings_x) < crossing_index:
            raise NotEnoughCrossings(crossing_index, len(self.crossings_x))
        return float(self.crossings_U[crossing_index - 1, 2])


def unstable_seed(
    kind: ModelKind,
    params: ModelParams,
    config: ShootConfig | None = None,
) -> np.ndarray:
    """Initial point displaced eps_offset off U+ along its unstable manifold.

    The CCH direction is oriented so U_1 initially decreases into the
    interior; the HCCH direction is cos(phi) b1 + sin(phi) b2 on the
    orthonormalized unstable plane, phi = config.angle.
    """
    cfg = config or ShootConfig()
    kind = ModelKind(kind)
    info = equilibrium_analysis(kind, params, which=+1)
    if info.n_unstable < 1:
        raise DomainError(
            f"U+ has no unstable direction for A={params.A}, delta={params.delta}"
        )
    basis = _unstable_vandermonde(info)
    if kind is ModelKind.CCH:
        if basis.shape[1] != 1:
            raise DomainError("expected a one-dimensional unstable manifold for CCH")
        v = basis[:, 0]
        if v[0] > 0.0:
            v = -v
        return info.point + cfg.eps_offset * v
    if basis.shape[1] != 2:
        raise DomainError("expected a two-dimensional unstable manifold for HCCH")
    phi = 0.0 if cfg.angle is None else float(cfg.angle)
    direction = math.cos(phi) * basis[:, 0] + math.sin(phi) * basis[:, 1]
    return info.point + cfg.eps_offset * direction


def _unstable_vandermonde(info) -> np.ndarray:
    """Orthonormal real basis of the unstable eigenspace.

    The Jacobian at an equilibrium is in companion form, so the
    eigenvector for lambda is exactly (1, lambda, lambda^2, ...); building
    it directly keeps the basis deterministic across platforms.
    """
    dim = len(info.point)
    lams = [lam for lam in info.eigenvalues if lam.real > 1e-9]
    lams.sort(key=lambda z: (-z.real, z.imag))
    cols = []
    seen_conj = set()
    for lam in lams:
        if abs(lam.imag) <= 1e-12:
            cols.append(np.array([lam.real**j for j in range(dim)]))
        else:
            key = (round(lam.real, 12), round(abs(lam.imag), 12))
            if key in seen_conj:
                continue
            seen_conj.add(key)
            v = np.array([lam**j for j in range(dim)])
            cols.append(v.real)
            cols.append(v.imag)
    M = np.column_stack(cols)
    Q, _ = np.linalg.qr(M)
    # fix an overall sign per column for determinism
    for j in range(Q.shape[1]):
        i = int(np.argmax(np.abs(Q[:, j])))
        if Q[i, j] < 0.0:
            Q[:, j] = -Q[:, j]
    return Q


def _probe_events(dim: int, threshold: float) -> tuple[EventSpec, ...]:
    return (
        EventSpec(EventKind.ABS_COMPONENT_EXCEEDS, index=0, threshold=threshold, terminal=True),
        EventSpec(EventKind.COMPONENT_CROSSES_ZERO, index=0, direction="any"),
        EventSpec(EventKind.ODD_NORM_LOCAL_MIN, direction="rising"),
    )


def _odd_norm(U: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.asarray(U)[..., 0::2] ** 2, axis=-1)))


def probe(
    kind: ModelKind,
    params: ModelParams,
    config: ShootConfig | None = None,
    seed: np.ndarray | None = None,
) -> ProbeResult:
    """One shooting integration; records U_1 crossings and the distance."""
    cfg = config or ShootConfig()
    kind = ModelKind(kind)
    if seed is None:
        seed = unstable_seed(kind, params, cfg)
    traj = integrate(
        kind,
        params,
        seed,
        (0.0, cfg.x_max),
        cfg.integrator,
        events=_probe_events(dimension(kind), cfg.threshold),
    )
    crossings = traj.hits(1)
    minima = traj.hits(2)
    cx = np.array([h.x for h in crossings])
    cU = (
        np.array([h.state for h in crossings])
        if crossings
        else np.empty((0, dimension(kind)))
    )
    endpoint_d = _odd_norm(traj.end_state)
    if minima:
        d_min = min(min(_odd_norm(h.state) for h in minima), endpoint_d)
        endpoint_only = False
    else:
        d_min = endpoint_d
        endpoint_only = True
    return ProbeResult(cx, cU, d_min, endpoint_only, traj.termination)


def distance_function(
    kind: ModelKind,
    params: ModelParams,
    config: ShootConfig | None = None,
    with_flag: bool = False,
):
    """d_A: minimum odd-component norm along the shooting trajectory.

    With with_flag=True also returns whether the value came from the
    trajectory endpoint alone (no local minimum was recorded, e.g. the
    probe diverged immediately).
    """
    r = probe(kind, params, config)
    if with_flag:
        return r.d_min, r.endpoint_only
    return r.d_min


def signed_detector(
    kind: ModelKind,
    params: ModelParams,
    config: ShootConfig | None = None,
    crossing_index: int = 1,
) -> float:
    """U_3 at the crossing_index-th zero crossing of U_1 (1-based).

    Zeros of this detector in A, with crossing_index = k + 1, are roots
    of the het_k family: the (k+1)-th crossing of a het_k orbit is its
    symmetric point, where all odd components vanish.  Raises
    NotEnoughCrossings when the trajectory escapes earlier.
    """
    return probe(kind, params, config).detector(crossing_index)


def _label_from_probe(r: ProbeResult) -> tuple[int, int]:
    """(k, index of symmetric crossing) from a converged probe."""
    if len(r.crossings_x) == 0:
        raise NotEnoughCrossings(1, 0)
    tails = np.sqrt(np.sum(r.crossings_U[:, 2::2] ** 2, axis=1))
    s_idx = int(np.argmin(tails))
    return s_idx, s_idx


def _branch_point(kind, delta, A, cfg, angle=None) -> BranchPoint:
    params = ModelParams(A=A, delta=delta)
    use = cfg if angle is None else replace(cfg, angle=angle)
    r = probe(kind, params, use)
    k, s_idx = _label_from_probe(r)
    gaps = list(np.diff(r.crossings_x[: s_idx + 1]))
    return BranchPoint(
        kind=ModelKind(kind),
        k=k,
        A=float(A),
        delta=float(delta),
        root_distances=[float(g) for g in gaps],
        d_min=r.d_min,
        symmetric_point=(float(r.crossings_x[s_idx]), r.crossings_U[s_idx].copy()),
        angle=angle,
    )


def _map_probes(kind, delta, A_values, cfg):
    def one(A):
        return probe(kind, ModelParams(A=float(A), delta=delta), cfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(one, A_values))
    return [one(A) for A in A_values]


def _coarse_config(cfg: ShootConfig) -> ShootConfig:
    """Looser integrator tolerances for survey passes.

    Grid probes only need to localize sign changes and dips whose
    endpoint magnitudes are orders above the integration error, so the
    survey runs at 1e-7/1e-10 while bisection and confirmation keep the
    configured tight tolerances.
    """
    it = cfg.integrator
    loose = replace(it, rtol=max(it.rtol, 1e-7), atol=max(it.atol, 1e-10))
    return replace(cfg, integrator=loose)


def _refined_grid(kind, delta, cfg):
    """Coarse A grid plus step/10 refinement around dips of d_A.

    Refining the whole sub-refine_below plateau would multiply the probe
    count tenfold for nothing: sign changes and near-tangencies only
    live next to local minima of d and next to detector sign changes,
    so only those intervals are subdivided.
    """
    lo, hi, step = cfg.A_grid
    n = int(math.floor((hi - lo) / step + 0.5)) + 1
    coarse = np.linspace(lo, lo + step * (n - 1), n)
    coarse = coarse[coarse <= hi + 1e-15]
    cfg = _coarse_config(cfg)
    results = _map_probes(kind, delta, coarse, cfg)
    d = np.array([r.d_min for r in results])
    refine_iv: set[int] = set()
    for i in range(len(coarse)):
        if d[i] >= cfg.refine_below:
            continue
        left = d[i - 1] if i > 0 else math.inf
        right = d[i + 1] if i + 1 < len(d) else math.inf
        if d[i] <= left and d[i] <= right:
            if i > 0:
                refine_iv.add(i - 1)
            if i + 1 < len(d):
                refine_iv.add(i)
    for a_lo, _a_hi in _brackets_from_results(coarse, results):
        refine_iv.add(int(np.searchsorted(coarse, a_lo + 0.5 * step) - 1))
    extra: list[float] = []
    for i in sorted(refine_iv):
        if 0 <= i < len(coarse) - 1:
            extra.extend(np.linspace(coarse[i], coarse[i + 1], 11)[1:-1])
    if extra:
        fine_results = _map_probes(kind, delta, extra, cfg)
        A_all = np.concatenate([coarse, np.array(extra)])
        all_results = results + fine_results
        order = np.argsort(A_all)
        A_all = A_all[order]
        all_results = [all_results[i] for i in order]
    else:
        A_all, all_results = coarse, results
    return A_all, all_results


def distance_profile(kind: ModelKind, delta: float, config: ShootConfig | None = None) -> DistanceProfile:
    """d_A over the configured A grid (with adaptive refinement near dips)."""
    cfg = config or ShootConfig()
    A_all, results = _refined_grid(kind, delta, cfg)
    d = np.array([r.d_min for r in results])
    candidates = _brackets_from_results(A_all, results)
    return DistanceProfile(A_values=A_all, d_values=d, zero_candidates=candidates)


def _detector_value(r: ProbeResult, j: int) -> float:
    if len(r.crossings_x) < j:
        return math.nan
    return float(r.crossings_U[j - 1, 2])


def _brackets_from_results(A_all, results) -> list[tuple[float, float]]:
    """Sign-change intervals of detector_j for every family index j."""
    max_j = max((len(r.crossings_x) for r in results), default=0)
    out = []
    for j in range(1, max_j + 1):
        vals = np.array([_detector_value(r, j) for r in results])
        for i in range(len(A_all) - 1):
            a, b = vals[i], vals[i + 1]
            if math.isnan(a) or math.isnan(b) or a == 0.0:
                continue
            if a * b < 0.0:
                out.append((float(A_all[i]), float(A_all[i + 1])))
    out.sort()
    return out


def _bisect_detector(kind, delta, j, a_lo, a_hi, cfg, widen: bool = True) -> float | None:
    f_lo = _detector_value(probe(kind, ModelParams(A=a_lo, delta=delta), cfg), j)
    f_hi = _detector_value(probe(kind, ModelParams(A=a_hi, delta=delta), cfg), j)
    if math.isnan(f_lo) or math.isnan(f_hi) or f_lo * f_hi > 0.0:
        # when a survey node sits almost exactly on the root, the loose
        # survey and the tight re-evaluation can disagree about which
        # interval holds the sign change; look one interval outward once
        if widen:
            w = a_hi - a_lo
            return _bisect_detector(
                kind, delta, j,
                max(a_lo - w, 1e-3), min(a_hi + w, 0.999999),
                cfg, widen=False,
            )
        return None
    while a_hi - a_lo > cfg.bisect_tol:
        mid = 0.5 * (a_lo + a_hi)
        if mid in (a_lo, a_hi):
            break
        f_mid = _detector_value(probe(kind, ModelParams(A=mid, delta=delta), cfg), j)
        if math.isnan(f_mid):
            return None
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0.0:
            a_hi, f_hi = mid, f_mid
        else:
            a_lo, f_lo = mid, f_mid
    return 0.5 * (a_lo + a_hi)


def branch_point_at(
    kind: ModelKind,
    delta: float,
    A: float,
    config: ShootConfig | None = None,
    angle: float | None = None,
) -> BranchPoint:
    """Label and package the orbit at known-good (A, delta) as a BranchPoint."""
    return _branch_point(ModelKind(kind), delta, A, config or ShootConfig(), angle=angle)


def scan_and_refine(
    kind: ModelKind,
    delta: float,
    config: ShootConfig | None = None,
    return_profile: bool = False,
):
    """All heteroclinic roots in the configured A window at this delta.

    CCH: brackets sign changes of the per-family detectors over the
    (refined) grid, bisects each to bisect_tol, keeps roots whose
    distance confirms a connection (d_A < accept_distance); k is labeled
    by counting crossings before the symmetric point.  HCCH: coarse
    (A, phi) grid then simplex minimization of d_A, accepted below 1e-7.
    With return_profile=True also returns the DistanceProfile of the
    scanned grid.
    """
    cfg = config or ShootConfig()
    kind = ModelKind(kind)
    if kind is ModelKind.HCCH:
        points = _scan_hcch(delta, cfg)
        if return_profile:
            return points, distance_profile(kind, delta, cfg)
        return points
    A_all, results = _refined_grid(kind, delta, cfg)
    points: list[BranchPoint] = []
    max_j = max((len(r.crossings_x) for r in results), default=0)
    for j in range(1, max_j + 1):
        vals = np.array([_detector_value(r, j) for r in results])
        for i in range(len(A_all) - 1):
            a, b = vals[i], vals[i + 1]
            if math.isnan(a) or math.isnan(b) or a == 0.0 or a * b > 0.0:
                continue
            root = _bisect_detector(kind, delta, j, float(A_all[i]), float(A_all[i + 1]), cfg)
            if root is None:
                continue
            bp = _branch_point(kind, delta, root, cfg)
            # tangency guard: a detector sign change only counts as a
            # heteroclinic if the distance really collapses
            if bp.d_min < cfg.accept_distance and bp.k == j - 1:
                points.append(bp)
    points.sort(key=lambda p: (p.A, p.k))
    deduped: list[BranchPoint] = []
    for p in points:
        if deduped and abs(p.A - deduped[-1].A) < 10 * cfg.bisect_tol and p.k == deduped[-1].k:
            continue
        deduped.append(p)
    if return_profile:
        d = np.array([r.d_min for r in results])
        profile = DistanceProfile(
            A_values=A_all, d_values=d,
            zero_candidates=_brackets_from_results(A_all, results),
        )
        return deduped, profile
    return deduped


def _scan_hcch(delta: float, cfg: ShootConfig) -> list[BranchPoint]:
    lo, hi, step = cfg.A_grid
    n_A = max(int((hi - lo) / step) + 1, 2)
    A_vals = np.linspace(lo, hi, n_A)
    phi_vals = np.linspace(0.0, 2.0 * math.pi, 25, endpoint=False)
    survey = _coarse_config(cfg)
    best: list[tuple[float, float, float]] = []
    for A in A_vals:
        params = ModelParams(A=float(A), delta=delta)
        for phi in phi_vals:
            r = probe(ModelKind.HCCH, params, replace(survey, angle=float(phi)))
            best.append((r.d_min, float(A), float(phi)))
    best.sort()
    points: list[BranchPoint] = []
    seen_A: list[float] = []
    for d0, A0, phi0 in best[:12]:
        if d0 > 10 * cfg.refine_below:
            break
        if any(abs(A0 - a) < 5 * step for a in seen_A):
            continue
        opt = _minimize_hcch(delta, A0, phi0, cfg)
        if opt is None:
            continue
        A_star, phi_star, d_star = opt
        if any(abs(A_star - a) < 1e-6 for a in seen_A):
            continue
        seen_A.append(A_star)
        points.append(_branch_point(ModelKind.HCCH, delta, A_star, cfg, angle=phi_star))
    points.sort(key=lambda p: (p.A, p.k))
    return points


def _minimize_hcch(delta, A0, phi0, cfg, accept=1e-7):
    def obj(z):
        A, phi = z
        if not (0.0 < A):
            return 1e3
        r = probe(ModelKind.HCCH, ModelParams(A=float(A), delta=delta), replace(cfg, angle=float(phi)))
        return r.d_min

    x0 = np.array([A0, phi0])
    scale = np.array([1e-3, 1e-2])
    for _ in range(3):
        res = minimize(
            obj,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-13, "fatol": 1e-14, "maxiter": 400},
        )
        if res.fun < accept:
            return float(res.x[0]), float(res.x[1]) % (2.0 * math.pi), float(res.fun)
        # restart with a jostled simplex around the best point so far
        x0 = res.x + scale * np.array([1.0, -1.0])
        scale *= 0.3
    return None


def trace_branch(
    kind: ModelKind,
    k: int,
    start: BranchPoint,
    delta_schedule,
    config: ShootConfig | None = None,
) -> list[BranchPoint]:
    """Continue family het_k along a schedule of delta values.

    Predicts A by linear extrapolation through the last two accepted
    points, re-brackets the detector inside a trust window around the
    prediction, bisects, and confirms the distance and the label.  Two
    consecutive failed deltas raise BranchLost carrying the points
    accepted so far.
    """
    cfg = config or ShootConfig()
    kind = ModelKind(kind)
    j = k + 1
    accepted = [start]
    failures = 0
    for delta in delta_schedule:
        if len(accepted) >= 2:
            (d1, a1), (d2, a2) = (
                (accepted[-2].delta, accepted[-2].A),
                (accepted[-1].delta, accepted[-1].A),
            )
            A_pred = a2 + (a2 - a1) * (delta - d2) / (d2 - d1) if d2 != d1 else a2
        else:
            # only the start point exists; seed the secant with the
            # leading-order slope of the family's A(delta) law
            d2, a2 = accepted[-1].delta, accepted[-1].A
            A_pred = a2 + _family_slope(kind, k, d2) * (delta - d2)
        window = max(10.0 * abs(A_pred - accepted[-1].A), 1e-4)
        bp = _locate_near(kind, delta, j, A_pred, window, cfg)
        if bp is None or bp.k != k:
            failures += 1
            if failures >= 2:
                raise BranchLost(
                    f"lost het_{k} branch at delta={delta}", points=accepted
                )
            continue
        failures = 0
        accepted.append(bp)
    return accepted


def _family_slope(kind: ModelKind, k: int, delta: float) -> float:
    """dA/ddelta of the leading-order far-field law at this delta."""
    if kind is ModelKind.CCH:
        return -(2 * k + 1) / math.sqrt(2.0)
    # A = 1 - (2k+1) 2^(1/6) delta^(1/3)
    return -(2 * k + 1) * 2.0 ** (1.0 / 6.0) / (3.0 * delta ** (2.0 / 3.0))


def _locate_near(kind, delta, j, A_pred, window, cfg) -> BranchPoint | None:
    lo = max(A_pred - window, 1e-3)
    hi = min(A_pred + window, 0.999999)
    if not lo < hi:
        return None
    # survey at loose tolerance (sign localization only); the bisection
    # and the confirming probe below keep the configured tolerances
    survey = _coarse_config(cfg)
    A_samples = np.linspace(lo, hi, 65)
    vals = [
        _detector_value(probe(kind, ModelParams(A=float(A), delta=delta), survey), j)
        for A in A_samples
    ]
    brackets = []
    for i in range(len(A_samples) - 1):
        a, b = vals[i], vals[i + 1]
        if math.isnan(a) or math.isnan(b) or a == 0.0 or a * b > 0.0:
            continue
        mid = 0.5 * (A_samples[i] + A_samples[i + 1])
        brackets.append((abs(mid - A_pred), float(A_samples[i]), float(A_samples[i + 1])))
    if not brackets:
        return None
    brackets.sort()
    _, a_lo, a_hi = brackets[0]
    root = _bisect_detector(kind, delta, j, a_lo, a_hi, cfg)
    if root is None:
        return None
    bp = _branch_point(kind, delta, root, cfg)
    if bp.d_min >= cfg.accept_distance:
        return None
    return bp
