"""Collocation boundary-value solver for heteroclinic profiles.

Two formulations of the connection problem on the unit interval:

* HalfSymmetric (default): the half profile on [-L, 0] mapped to
  s in [0, 1], ODEs dU/ds = L F(U), far-field values pinned at s=0 and
  the reversibility section (odd components zero) imposed at s=1, with A
  as a free scalar unknown.  The full profile is recovered by
  reflection.
* FullProjected: the full profile with projected boundary conditions at
  both equilibria, an integral phase condition carried as one extra ODE,
  and two free scalars (L and A, or L and delta).

The discretization is a three-stage Lobatto (mono-implicit RK) scheme of
order four with analytic Jacobians, damped Newton, and residual-driven
mesh refinement.  Newton iteration counts are reported on the solution
so convergence behaviour is observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.sparse import csc_matrix, identity as sparse_identity
from scipy.sparse.linalg import spsolve

from .asymptotics import predict, kink_profile, tanh_profile
from .errors import ContinuationStalled, DomainError, MeshBudget, NewtonDiverged
from .systems import (
    ModelKind,
    ModelParams,
    dimension,
    equilibria,
    equilibrium_analysis,
    jacobian,
    reverse,
    rhs,
    rhs_A_derivative,
    rhs_delta_derivative,
)

__all__ = [
    "Formulation",
    "BvpConfig",
    "BvpProblem",
    "Mesh",
    "BvpSolution",
    "FullProfile",
    "default_L",
    "initial_guess",
    "build_half_problem",
    "build_full_problem",
    "reference_from_solution",
    "solve",
    "collocation_defect",
    "reflect",
    "continue_in_delta",
]


class Formulation(Enum):
    HALF_SYMMETRIC = "half_symmetric"
    FULL_PROJECTED = "full_projected"


@dataclass(frozen=True)
class BvpConfig:
    update_tol: float = 1e-10
    residual_tol: float = 1e-9
    mesh_tol: float = 1e-9
    max_newton: int = 30
    damping_floor: float = 2.0**-20
    max_nodes: int = 20_000
    max_mesh_cycles: int = 12
    refine: bool = True
    probes: tuple[float, ...] = (0.25, 0.75)
    # relative Tikhonov ridge for the Newton step; 0 means plain solves.
    # None picks a formulation default (full projected problems are
    # singular along a benign family, see build_full_problem)
    ridge: float | None = None


@dataclass
class Mesh:
    nodes: np.ndarray    # strictly increasing, nodes[0]=0, nodes[-1]=1
    states: np.ndarray   # (n_nodes, n_ode)
    mid_states: np.ndarray | None = None


@dataclass
class BvpProblem:
    """Discretization-ready BVP: vector field, Jacobians, BCs, guess.

    Callables are vectorized over nodes: f(s, Y, p) -> (n, n_ode) with
    Y (n, n_ode); fy -> (n, n_ode, n_ode); fp -> (n, n_ode, n_p).
    bc(y0, y1, p) -> (n_bc,) and bc_jac returns (dBC/dy0, dBC/dy1,
    dBC/dp).  The boundary-condition count must equal n_ode plus the
    number of free scalars.
    """

    kind: ModelKind
    formulation: Formulation
    n_ode: int
    free: tuple[str, ...]
    delta: float
    f: object
    fy: object
    fp: object
    bc: object
    bc_jac: object
    nodes0: np.ndarray
    Y0: np.ndarray
    p0: np.ndarray
    x_of_s: object
    A_value: object
    L_value: object
    k: int | None = None

    def __post_init__(self):
        n_bc = len(self.bc(self.Y0[0], self.Y0[-1], self.p0))
        if n_bc != self.n_ode + len(self.free):
            raise DomainError(
                f"boundary-condition count {n_bc} != n_ode {self.n_ode} "
                f"+ {len(self.free)} free scalars"
            )

    @property
    def n_bc(self) -> int:
        return self.n_ode + len(self.free)


@dataclass
class BvpSolution:
    kind: ModelKind
    formulation: Formulation
    delta: float
    A: float
    L: float
    mesh: Mesh
    p: np.ndarray
    newton_iters: list[int]
    max_residual: float
    k: int | None
    problem: BvpProblem = field(repr=False)
    _spline: CubicHermiteSpline = field(repr=False, default=None)

    def profile(self, s):
        """Dense states at s in [0, 1] (piecewise cubic, C^1)."""
        return self._spline(np.asarray(s, dtype=float))

    def x_nodes(self) -> np.ndarray:
        return self.problem.x_of_s(self.mesh.nodes, self.p)

    def eval_x(self, x):
        """States at physical x, clamped to the computed domain."""
        x = np.asarray(x, dtype=float)
        xs = self.x_nodes()
        lo, hi = xs[0], xs[-1]
        xq = np.clip(x, lo, hi)
        s = (xq - lo) / (hi - lo)
        return self.profile(s)


@dataclass
class FullProfile:
    """Reflected full-domain profile on [-L, L]."""

    kind: ModelKind
    x: np.ndarray
    states: np.ndarray
    A: float
    delta: float
    L: float
    k: int | None = None
    source: str = "bvp"


def default_L(kind: ModelKind, k: int, delta: float) -> float:
    """Half-domain length: room for k+1 humps plus equilibrium approach.

    HCCH tails decay at the slow rate ~ (delta/2)^(1/3), so the run-out
    needed to reach the far-field values grows as delta shrinks; CCH
    tails decay at ~ sqrt(2) and the fixed margin suffices.
    """
    kind = ModelKind(kind)
    pred = predict(kind, k, delta)
    width = pred.width_pred if math.isfinite(pred.width_pred) else 3.0
    L = 12.0 + (k + 1) * max(width, 1.0)
    if kind is ModelKind.HCCH:
        if delta <= 0.0:
            raise DomainError("HCCH default_L needs delta > 0")
        L += 16.0 / (0.5 * delta) ** (1.0 / 3.0)
    return L


def _graded_nodes(n: int, L: float, layer_span: float) -> np.ndarray:
    """Mesh on [0,1] biased toward s=1 where the humps live."""
    frac = min(layer_span / L, 1.0)
    if frac >= 0.6:
        return np.linspace(0.0, 1.0, n)
    n_layer = int(0.65 * n)
    n_tail = n - n_layer
    s_break = 1.0 - frac
    tail = np.linspace(0.0, s_break, n_tail, endpoint=False)
    layer = np.linspace(s_break, 1.0, n_layer)
    return np.concatenate([tail, layer])


def initial_guess(
    kind: ModelKind,
    k: int,
    K: float,
    L: float,
    n: int = 301,
) -> tuple[np.ndarray, np.ndarray]:
    """Half-domain guess: alternating tanh train sampled on a graded mesh.

    Returns (nodes, states) with nodes on [0,1], x = -L(1-s).  The guess
    has its k interior kinks at x = -K, ..., -kK and satisfies the
    symmetric-section conditions at x = 0 exactly.
    """
    kind = ModelKind(kind)
    if not K > 0.0:
        raise DomainError("guess root distance K must be positive")
    if K >= L / 2.0:
        raise DomainError(f"guess root distance K={K} must satisfy K < L/2={L / 2}")
    if k * K > L - 4.0:
        raise DomainError(f"k*K={k * K} leaves no room for the far field on L={L}")
    dim = dimension(kind)
    nodes = _graded_nodes(n, L, k * K + 10.0)
    x = -L * (1.0 - nodes)
    states = tanh_profile(k, K, x)[:, :dim]
    return nodes, states


def _half_bcs(kind: ModelKind, fix_A: bool):
    dim = dimension(kind)
    # left rows pin the far field, right rows impose the symmetric section
    if kind is ModelKind.CCH:
        left = [(0, 1.0), (1, 0.0)]
        right = [0, 2]
    else:
        left = [(0, 1.0), (1, 0.0), (2, 0.0)]
        right = [0, 2, 4]
    if fix_A:
        # the left count must stay equal to the number of modes that grow
        # toward the far field or the linearization loses its dichotomy,
        # so the square fixed-A problem releases the last section pin;
        # the released odd derivative at x=0 measures the het mismatch
        right = right[:-1]
    B0 = np.zeros((len(left) + len(right), dim))
    B1 = np.zeros_like(B0)
    vals = np.zeros(len(left) + len(right))
    for r, (idx, v) in enumerate(left):
        B0[r, idx] = 1.0
        vals[r] = v
    for r, idx in enumerate(right, start=len(left)):
        B1[r, idx] = 1.0
    return B0, B1, vals


def build_half_problem(
    kind: ModelKind,
    delta: float,
    L_fixed: float,
    A0: float,
    guess: tuple[np.ndarray, np.ndarray] | None = None,
    k: int = 0,
    n: int = 301,
    fix_A: bool = False,
) -> BvpProblem:
    """Half-domain symmetric formulation with A free (or fixed).

    Boundary conditions: U1(0)=1, U2(0)=0 (CCH; HCCH also U3(0)=0) at
    the far-field end and U1(1)=U3(1)=0 (HCCH also U5(1)=0) on the
    symmetric section.  The remaining odd derivatives at the far-field
    end are not imposed; converged solutions should satisfy them to
    truncation level (|U4(0)|, |U5(0)| small) as a post-hoc check.
    In fixed-A mode the last section pin is released to keep the count
    square; the released odd derivative at the section is the mismatch
    that vanishes exactly on a symmetric heteroclinic.
    """
    kind = ModelKind(kind)
    if not L_fixed > 0.0:
        raise DomainError("L_fixed must be positive")
    dim = dimension(kind)
    L = float(L_fixed)
    if guess is None:
        pred = predict(kind, k, delta)
        K = pred.width_pred if math.isfinite(pred.width_pred) else 2.5
        nodes, states = initial_guess(kind, k, K, L, n=n)
    else:
        nodes, states = guess
        nodes = np.asarray(nodes, dtype=float)
        states = np.asarray(states, dtype=float)
    B0, B1, vals = _half_bcs(kind, fix_A)
    free = () if fix_A else ("A",)
    n_p = len(free)

    def A_of(p):
        return float(A0) if fix_A else float(p[0])

    def f(s, Y, p):
        return L * rhs(kind, ModelParams(A=A_of(p), delta=delta), Y)

    def fy(s, Y, p):
        return L * jacobian(kind, ModelParams(A=A_of(p), delta=delta), Y)

    def fp(s, Y, p):
        if fix_A:
            return np.zeros(Y.shape[:-1] + (dim, 0))
        dA = rhs_A_derivative(kind, ModelParams(A=A_of(p), delta=delta), Y)
        return L * dA[..., None]

    def bc(y0, y1, p):
        return B0 @ y0 + B1 @ y1 - vals

    def bc_jac(y0, y1, p):
        return B0, B1, np.zeros((len(vals), n_p))

    return BvpProblem(
        kind=kind,
        formulation=Formulation.HALF_SYMMETRIC,
        n_ode=dim,
        free=free,
        delta=float(delta),
        f=f,
        fy=fy,
        fp=fp,
        bc=bc,
        bc_jac=bc_jac,
        nodes0=nodes,
        Y0=states,
        p0=np.array([] if fix_A else [float(A0)]),
        x_of_s=lambda s, p: -L * (1.0 - np.asarray(s, dtype=float)),
        A_value=A_of,
        L_value=lambda p: L,
        k=k,
    )


def reference_from_solution(sol: BvpSolution):
    """Phase-condition reference from a converged half solution.

    Returns (ref, L_full) where ref(s) gives the reflected full profile
    and its x-derivative at x = L_full (s - 1/2).  Since the reference
    solves the ODE, its derivative is the vector field evaluated on it.
    """
    if sol.formulation is not Formulation.HALF_SYMMETRIC:
        raise DomainError("reference profile must come from a half-domain solution")
    kind = sol.kind
    params = ModelParams(A=sol.A, delta=sol.delta)
    L_half = sol.L
    L_full = 2.0 * L_half

    def ref(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x = L_full * (s - 0.5)
        V = np.empty((len(s), dimension(kind)))
        neg = x <= 0.0
        if np.any(neg):
            V[neg] = sol.profile(1.0 + np.clip(x[neg], -L_half, 0.0) / L_half)
        if np.any(~neg):
            mirrored = sol.profile(1.0 - np.clip(x[~neg], 0.0, L_half) / L_half)
            V[~neg] = reverse(kind, mirrored)
        return V, rhs(kind, params, V)

    return ref, L_full


def build_full_problem(
    kind: ModelKind,
    delta: float,
    V,
    L0: float,
    A0: float,
    free: tuple[str, str] = ("L", "A"),
    nodes: np.ndarray | None = None,
) -> BvpProblem:
    """Full-domain formulation with projected BCs and a phase condition.

    V is the reference callable s -> (profile, x-derivative) (see
    reference_from_solution).  One extra unknown U_ph integrates the
    phase density so U_ph(0) = U_ph(1) = 0 pins the translational phase;
    the two free scalars are (L, A), (L, delta) or (A, delta).  Deviations
    at the ends are projected on the stable eigenvectors of U+ and the
    unstable eigenvectors of U-, realified and orthonormalized, frozen at
    (A0, delta).

    On a reversible-symmetric connection the right-end projection basis
    is the reflection of the left-end one, so the right-end conditions
    are implied by the left-end conditions on the symmetric manifold and
    the square system is singular along a benign one-parameter family
    (domain length for the free-L pairings, the branch curve for
    ("A", "delta")).  The Newton loop therefore applies a small
    Gauss-Newton ridge to this formulation (BvpConfig.ridge) and lands
    on a nearby family point; A varies along the family only at
    truncation level, so it stays meaningful on generous domains.
    """
    kind = ModelKind(kind)
    if free not in (("L", "A"), ("L", "delta"), ("A", "delta")):
        raise DomainError(
            "free scalars must be ('L','A'), ('L','delta') or ('A','delta')"
        )
    dim = dimension(kind)
    n_ode = dim + 1
    params0 = ModelParams(A=A0, delta=delta)
    info_p = equilibrium_analysis(kind, params0, which=+1)
    info_m = equilibrium_analysis(kind, params0, which=-1)
    V0 = info_p.stable_basis()
    V1 = info_m.unstable_basis()
    # stable count at U+ plus unstable count at U-; with the two phase
    # pins this matches n_ode + 2 free scalars for both model orders
    n_expected = dim + 1
    if V0.shape[1] + V1.shape[1] != n_expected:
        raise DomainError(
            "degenerate equilibrium spectra: projected BC count "
            f"{V0.shape[1]}+{V1.shape[1]} != {n_expected}"
        )
    up, um = equilibria(kind)
    free_L = "L" in free
    free_delta = "delta" in free

    def L_of(p):
        return float(p[0]) if free_L else float(L0)

    def A_of(p):
        if free == ("L", "A"):
            return float(p[1])
        if free == ("A", "delta"):
            return float(p[0])
        return float(A0)

    def delta_of(p):
        return float(p[1]) if free_delta else float(delta)

    def f(s, Y, p):
        L = L_of(p)
        U = Y[..., :dim]
        pr = ModelParams(A=A_of(p), delta=delta_of(p))
        _, Vd = _ref(s)
        out = np.empty_like(Y)
        out[..., :dim] = L * rhs(kind, pr, U)
        out[..., dim] = L * np.sum(Vd * U, axis=-1)
        return out

    def fy(s, Y, p):
        L = L_of(p)
        U = Y[..., :dim]
        pr = ModelParams(A=A_of(p), delta=delta_of(p))
        _, Vd = _ref(s)
        J = np.zeros(Y.shape[:-1] + (n_ode, n_ode))
        J[..., :dim, :dim] = L * jacobian(kind, pr, U)
        J[..., dim, :dim] = L * Vd
        return J

    def fp(s, Y, p):
        L = L_of(p)
        U = Y[..., :dim]
        pr = ModelParams(A=A_of(p), delta=delta_of(p))
        _, Vd = _ref(s)
        out = np.zeros(Y.shape[:-1] + (n_ode, 2))
        cols = []
        if free_L:
            col_L = np.zeros(Y.shape[:-1] + (n_ode,))
            col_L[..., :dim] = rhs(kind, pr, U)
            col_L[..., dim] = np.sum(Vd * U, axis=-1)
            cols.append(col_L)
        if "A" in free:
            col_A = np.zeros(Y.shape[:-1] + (n_ode,))
            col_A[..., :dim] = L * rhs_A_derivative(kind, pr, U)
            cols.append(col_A)
        if free_delta:
            col_d = np.zeros(Y.shape[:-1] + (n_ode,))
            col_d[..., :dim] = L * rhs_delta_derivative(kind, pr, U)
            cols.append(col_d)
        out[..., 0] = cols[0]
        out[..., 1] = cols[1]
        return out

    def bc(y0, y1, p):
        return np.concatenate(
            [
                [y0[dim], y1[dim]],
                V0.T @ (y0[:dim] - up),
                V1.T @ (y1[:dim] - um),
            ]
        )

    n_bc = 2 + V0.shape[1] + V1.shape[1]
    Bc0 = np.zeros((n_bc, n_ode))
    Bc1 = np.zeros((n_bc, n_ode))
    Bc0[0, dim] = 1.0
    Bc1[1, dim] = 1.0
    Bc0[2 : 2 + V0.shape[1], :dim] = V0.T
    Bc1[2 + V0.shape[1] :, :dim] = V1.T

    def bc_jac(y0, y1, p):
        return Bc0, Bc1, np.zeros((n_bc, 2))

    _ref = V
    if nodes is None:
        nodes = np.linspace(0.0, 1.0, 601)
    nodes = np.asarray(nodes, dtype=float)
    Vn, _ = _ref(nodes)
    # phase unknown along the reference integrates to half the change in
    # squared norm, which vanishes end to end because |U+|=|U-|=1
    ph = 0.5 * (np.sum(Vn * Vn, axis=-1) - np.sum(Vn[0] * Vn[0]))
    Y0 = np.column_stack([Vn, ph])
    if free == ("A", "delta"):
        p0 = np.array([float(A0), float(delta)])
    else:
        p0 = np.array([float(L0), float(delta if free_delta else A0)])

    return BvpProblem(
        kind=kind,
        formulation=Formulation.FULL_PROJECTED,
        n_ode=n_ode,
        free=free,
        delta=float(delta),
        f=f,
        fy=fy,
        fp=fp,
        bc=bc,
        bc_jac=bc_jac,
        nodes0=nodes,
        Y0=Y0,
        p0=p0,
        x_of_s=lambda s, p: L_of(p) * (np.asarray(s, dtype=float) - 0.5),
        A_value=A_of,
        L_value=L_of,
        k=None,
    )


def _interior_residual(problem, nodes, Y, p):
    h = np.diff(nodes)
    s_mid = 0.5 * (nodes[:-1] + nodes[1:])
    fi = problem.f(nodes, Y, p)
    ym = 0.5 * (Y[:-1] + Y[1:]) - (h[:, None] / 8.0) * (fi[1:] - fi[:-1])
    fm = problem.f(s_mid, ym, p)
    R = Y[1:] - Y[:-1] - (h[:, None] / 6.0) * (fi[:-1] + 4.0 * fm + fi[1:])
    return R, (h, s_mid, fi, ym, fm)


def _residual_vector(problem, nodes, Y, p):
    R, cache = _interior_residual(problem, nodes, Y, p)
    bc = problem.bc(Y[0], Y[-1], p)
    return np.concatenate([R.ravel(), bc]), cache


def _scaled_residual(problem, res, cache):
    h, _, fi, _, _ = cache
    m = problem.n_ode
    R = res[: (len(fi) - 1) * m].reshape(-1, m)
    fscale = 1.0 + np.maximum(
        np.max(np.abs(fi[:-1]), axis=1), np.max(np.abs(fi[1:]), axis=1)
    )
    r_int = np.max(np.abs(R) / (h[:, None] * fscale[:, None]))
    r_bc = np.max(np.abs(res[(len(fi) - 1) * m :])) if problem.n_bc else 0.0
    return max(float(r_int), float(r_bc))


def _newton_matrix(problem, nodes, Y, p, cache):
    h, s_mid, fi, ym, fm = cache
    m = problem.n_ode
    n = len(nodes)
    n_p = len(p)
    hh = h[:, None, None]
    Ji = problem.fy(nodes, Y, p)
    Jm = problem.fy(s_mid, ym, p)
    I = np.eye(m)
    Ai = -I - (hh / 6.0) * (Ji[:-1] + 4.0 * (Jm @ (0.5 * I + (hh / 8.0) * Ji[:-1])))
    Bi = I - (hh / 6.0) * (Ji[1:] + 4.0 * (Jm @ (0.5 * I - (hh / 8.0) * Ji[1:])))
    rows_blk = (np.arange(n - 1) * m)[:, None, None] + np.arange(m)[None, :, None]
    cols_i = (np.arange(n - 1) * m)[:, None, None] + np.arange(m)[None, None, :]
    cols_ip1 = cols_i + m
    rows = [np.broadcast_to(rows_blk, Ai.shape).ravel(),
            np.broadcast_to(rows_blk, Bi.shape).ravel()]
    cols = [np.broadcast_to(cols_i, Ai.shape).ravel(),
            np.broadcast_to(cols_ip1, Bi.shape).ravel()]
    data = [Ai.ravel(), Bi.ravel()]
    if n_p:
        Fpi = problem.fp(nodes, Y, p)
        Fpm = problem.fp(s_mid, ym, p)
        Pi = -(hh / 6.0) * (
            Fpi[:-1]
            + 4.0 * (Fpm + Jm @ ((hh / 8.0) * (Fpi[:-1] - Fpi[1:])))
            + Fpi[1:]
        )
        rows_p = (np.arange(n - 1) * m)[:, None, None] + np.arange(m)[None, :, None]
        cols_p = np.broadcast_to(
            n * m + np.arange(n_p)[None, None, :], Pi.shape
        )
        rows.append(np.broadcast_to(rows_p, Pi.shape).ravel())
        cols.append(cols_p.ravel())
        data.append(Pi.ravel())
    dB0, dB1, dBp = problem.bc_jac(Y[0], Y[-1], p)
    n_bc = dB0.shape[0]
    r0 = (n - 1) * m + np.arange(n_bc)
    rows.append(np.repeat(r0, m))
    cols.append(np.tile(np.arange(m), n_bc))
    data.append(np.asarray(dB0, dtype=float).ravel())
    rows.append(np.repeat(r0, m))
    cols.append(np.tile((n - 1) * m + np.arange(m), n_bc))
    data.append(np.asarray(dB1, dtype=float).ravel())
    if n_p:
        rows.append(np.repeat(r0, n_p))
        cols.append(np.tile(n * m + np.arange(n_p), n_bc))
        data.append(np.asarray(dBp, dtype=float).ravel())
    N = n * m + n_p
    return csc_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N),
    )


def _newton(problem, nodes, Y, p, cfg: BvpConfig):
    m = problem.n_ode
    n = len(nodes)
    n_p = len(p)
    ridge = cfg.ridge
    if ridge is None:
        ridge = 1e-8 if problem.formulation is Formulation.FULL_PROJECTED else 0.0
    res, cache = _residual_vector(problem, nodes, Y, p)
    iters = 0
    last_update = np.inf
    while True:
        scaled = _scaled_residual(problem, res, cache)
        if scaled < cfg.residual_tol * 1e-3:
            return Y, p, iters, scaled
        if iters > 0 and scaled < cfg.residual_tol and last_update < cfg.update_tol:
            return Y, p, iters, scaled
        if iters >= cfg.max_newton:
            raise NewtonDiverged(
                f"no convergence in {cfg.max_newton} Newton iterations "
                f"(scaled residual {scaled:.3e})"
            )
        J = _newton_matrix(problem, nodes, Y, p, cache)
        if ridge > 0.0:
            # Gauss-Newton with a small Tikhonov ridge: picks the
            # minimum-norm step when the square system is singular
            # along a benign solution family
            mu2 = (ridge * float(np.max(np.abs(J.data)))) ** 2
            G = (J.T @ J + mu2 * sparse_identity(J.shape[0], format="csc")).tocsc()
            with np.errstate(all="ignore"):
                dz = spsolve(G, J.T @ (-res))
        else:
            dz = spsolve(J, -res)
        if not np.all(np.isfinite(dz)):
            raise NewtonDiverged("singular collocation Jacobian")
        dY = dz[: n * m].reshape(n, m)
        dp = dz[n * m :]
        merit0 = 0.5 * float(res @ res)
        alpha = 1.0
        while True:
            Y_try = Y + alpha * dY
            p_try = p + alpha * dp
            try:
                with np.errstate(all="ignore"):
                    res_try, cache_try = _residual_vector(problem, nodes, Y_try, p_try)
                ok = bool(np.all(np.isfinite(res_try)))
            except (FloatingPointError, ValueError):
                ok = False
            if ok:
                merit = 0.5 * float(res_try @ res_try)
                if merit <= (1.0 - 1e-4 * alpha) * merit0 or merit < 1e-30:
                    break
            alpha *= 0.5
            if alpha < cfg.damping_floor:
                # at machine-noise merits no step can pass the decrease test;
                # the iterate is accepted if it already meets the tolerance
                if scaled < cfg.residual_tol:
                    return Y, p, iters, scaled
                raise NewtonDiverged(
                    f"Armijo damping floor reached (merit {merit0:.3e})"
                )
        z_scale = 1.0 + max(float(np.max(np.abs(Y_try))), float(np.max(np.abs(p_try))) if n_p else 0.0)
        last_update = alpha * float(max(np.max(np.abs(dY)), np.max(np.abs(dp)) if n_p else 0.0)) / z_scale
        Y, p, res, cache = Y_try, p_try, res_try, cache_try
        iters += 1


def _hermite_eval(y0, y1, f0, f1, h, theta):
    t2, t3 = theta * theta, theta**3
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + theta
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    S = h00 * y0 + (h10 * h)[:, None] * f0 + h01 * y1 + (h11 * h)[:, None] * f1
    d00 = 6 * t2 - 6 * theta
    d10 = 3 * t2 - 4 * theta + 1
    d01 = -d00
    d11 = 3 * t2 - 2 * theta
    dS = (d00 * y0 + (d10 * h)[:, None] * f0 + d01 * y1 + (d11 * h)[:, None] * f1) / h[:, None]
    return S, dS


def _defect(problem, nodes, Y, p, probes):
    """Per-interval scaled defect of the C^1 interpolant, max over probes."""
    h = np.diff(nodes)
    fi = problem.f(nodes, Y, p)
    worst = np.zeros(len(h))
    for theta in probes:
        S, dS = _hermite_eval(Y[:-1], Y[1:], fi[:-1], fi[1:], h, theta)
        s_q = nodes[:-1] + theta * h
        fS = problem.f(s_q, S, p)
        r = np.max(np.abs(dS - fS), axis=1) / (1.0 + np.max(np.abs(fS), axis=1))
        worst = np.maximum(worst, r)
    return worst


def _refine(nodes, Y, fi, defect, tol):
    new_nodes = [nodes[0]]
    new_Y = [Y[0]]
    h = np.diff(nodes)
    for i in range(len(h)):
        if defect[i] > tol:
            n_add = 2 if defect[i] > 1e3 * tol else 1
            for j in range(1, n_add + 1):
                theta = j / (n_add + 1)
                S, _ = _hermite_eval(
                    Y[i : i + 1], Y[i + 1 : i + 2], fi[i : i + 1], fi[i + 1 : i + 2],
                    h[i : i + 1], theta,
                )
                new_nodes.append(nodes[i] + theta * h[i])
                new_Y.append(S[0])
        new_nodes.append(nodes[i + 1])
        new_Y.append(Y[i + 1])
    return np.array(new_nodes), np.array(new_Y)


def solve(problem: BvpProblem, config: BvpConfig | None = None) -> BvpSolution:
    """Damped Newton on the collocation equations with mesh refinement.

    Converged when the scaled Newton update is below update_tol and the
    scaled residual below residual_tol; the mesh is refined until the
    interpolant defect is below mesh_tol.  Raises NewtonDiverged when
    the Armijo damping floor is hit and MeshBudget when the node cap or
    the refinement-cycle budget is exhausted.
    """
    cfg = config or BvpConfig()
    nodes = problem.nodes0.copy()
    Y = problem.Y0.copy()
    p = problem.p0.copy()
    iters_log: list[int] = []
    for _ in range(cfg.max_mesh_cycles):
        Y, p, iters, _scaled = _newton(problem, nodes, Y, p, cfg)
        iters_log.append(iters)
        defect = _defect(problem, nodes, Y, p, cfg.probes)
        d_max = float(np.max(defect))
        if not cfg.refine or d_max < cfg.mesh_tol:
            return _finalize(problem, nodes, Y, p, iters_log, d_max)
        fi = problem.f(nodes, Y, p)
        nodes, Y = _refine(nodes, Y, fi, defect, cfg.mesh_tol)
        if len(nodes) > cfg.max_nodes:
            raise MeshBudget(f"mesh grew past {cfg.max_nodes} nodes")
    raise MeshBudget(f"defect above {cfg.mesh_tol} after {cfg.max_mesh_cycles} refinement cycles")


def _finalize(problem, nodes, Y, p, iters_log, d_max) -> BvpSolution:
    fi = problem.f(nodes, Y, p)
    h = np.diff(nodes)
    ym = 0.5 * (Y[:-1] + Y[1:]) - (h[:, None] / 8.0) * (fi[1:] - fi[:-1])
    spline = CubicHermiteSpline(nodes, Y, fi, axis=0)
    return BvpSolution(
        kind=problem.kind,
        formulation=problem.formulation,
        delta=problem.delta if "delta" not in problem.free else float(p[1]),
        A=problem.A_value(p),
        L=problem.L_value(p),
        mesh=Mesh(nodes=nodes, states=Y, mid_states=ym),
        p=p.copy(),
        newton_iters=iters_log,
        max_residual=d_max,
        k=problem.k,
        problem=problem,
        _spline=spline,
    )


def collocation_defect(solution: BvpSolution, probes=(0.25, 0.75)) -> float:
    """Max scaled defect of the converged interpolant (certification)."""
    return float(
        np.max(
            _defect(
                solution.problem,
                solution.mesh.nodes,
                solution.mesh.states,
                solution.p,
                probes,
            )
        )
    )


def reflect(solution: BvpSolution, n: int | None = None) -> FullProfile:
    """Full profile on [-L, L] from a half solution by the reversibility map.

    The computed half covers [-L, 0]; the mirrored half is
    U(x) = R U(-x), which matches value and derivative at x=0 because
    the odd components vanish on the symmetric section.
    """
    if solution.formulation is not Formulation.HALF_SYMMETRIC:
        raise DomainError("reflect applies to half-domain solutions")
    if n is None:
        s = solution.mesh.nodes
    else:
        s = np.linspace(0.0, 1.0, n)
    L = solution.L
    x_half = -L * (1.0 - s)
    U_half = solution.profile(s)
    x_full = np.concatenate([x_half, -x_half[-2::-1]])
    U_full = np.vstack([U_half, reverse(solution.kind, U_half[-2::-1])])
    return FullProfile(
        kind=solution.kind,
        x=x_full,
        states=U_full,
        A=solution.A,
        delta=solution.delta,
        L=L,
        k=solution.k,
        source="bvp",
    )


def _resample_to(sol: BvpSolution, x: np.ndarray) -> np.ndarray:
    """Half-profile states at physical x, equilibrium-padded past the domain."""
    up, _ = equilibria(sol.kind)
    out = np.tile(up, (len(x), 1))
    inside = x >= -sol.L
    xs = np.clip(x[inside], -sol.L, 0.0)
    out[inside] = sol.profile(1.0 + xs / sol.L)
    return out


def _transfer_nodes(
    sol: BvpSolution, L_new: float, n_floor: int = 241, n_cap: int = 2400
) -> np.ndarray:
    x_old = -sol.L * (1.0 - sol.mesh.nodes)
    s = 1.0 + x_old / L_new
    s = s[s > 0.0]
    s_min = s[0] if len(s) else 1.0
    if s_min > 1e-9:
        n_tail = max(12, int(0.1 * len(s)))
        s = np.concatenate([np.linspace(0.0, s_min, n_tail, endpoint=False), s])
    s[-1] = 1.0
    s[0] = 0.0
    s = np.unique(s)
    if len(s) > n_cap:
        # strided decimation keeps the density profile while stopping
        # refined meshes from accumulating across continuation steps
        idx = np.unique(np.round(np.linspace(0, len(s) - 1, n_cap)).astype(int))
        s = s[idx]
    if len(s) < n_floor:
        s = np.unique(np.concatenate([s, np.linspace(0.0, 1.0, n_floor)]))
    return s


def _continuation_guess(kind, k, cur, prev, delta_new):
    L_new = default_L(kind, k, delta_new)
    nodes = _transfer_nodes(cur, L_new)
    x_new = -L_new * (1.0 - nodes)
    U_cur = _resample_to(cur, x_new)
    if prev is None or prev.delta == cur.delta:
        states = U_cur
        A0 = cur.A
    else:
        r = (delta_new - cur.delta) / (cur.delta - prev.delta)
        U_prev = _resample_to(prev, x_new)
        states = U_cur + r * (U_cur - U_prev)
        A0 = cur.A + r * (cur.A - prev.A)
    A0 = min(max(A0, 0.05), 1.5)
    return nodes, states, A0, L_new


def _solve_continued(kind, k, cur, prev, delta_new, cfg) -> BvpSolution:
    nodes, states, A0, L_new = _continuation_guess(kind, k, cur, prev, delta_new)
    problem = build_half_problem(
        kind, delta_new, L_new, A0, guess=(nodes, states), k=k
    )
    return solve(problem, cfg)


def continue_in_delta(
    kind: ModelKind,
    k: int,
    solution: BvpSolution,
    delta_schedule,
    config: BvpConfig | None = None,
) -> list[BvpSolution]:
    """Continue a half-domain branch along a schedule of delta values.

    Secant extrapolation of (A, states) in delta seeds each solve; a
    failed step is retried through up to six geometric bisections of the
    delta increment.  ContinuationStalled carries the solutions obtained
    so far.
    """
    cfg = config or BvpConfig()
    kind = ModelKind(kind)
    if solution.formulation is not Formulation.HALF_SYMMETRIC:
        raise DomainError("continuation is implemented for the half-domain formulation")
    sols = [solution]
    prev: BvpSolution | None = None

    def step(cur, prv, target, depth):
        try:
            return _solve_continued(kind, k, cur, prv, target, cfg)
        except (NewtonDiverged, MeshBudget):
            if depth >= 6:
                raise
            mid = math.sqrt(cur.delta * target) if cur.delta > 0 and target > 0 else 0.5 * (cur.delta + target)
            mid_sol = step(cur, prv, mid, depth + 1)
            return step(mid_sol, cur, target, depth + 1)

    for target in delta_schedule:
        try:
            new = step(sols[-1], prev, float(target), 0)
        except (NewtonDiverged, MeshBudget) as exc:
            raise ContinuationStalled(
                f"continuation stalled toward delta={target}: {exc}", solutions=sols
            ) from exc
        prev = sols[-1]
        sols.append(new)
    return sols


def kink_guess(L: float, n: int = 301) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-drive CCH kink sampled as a half-domain guess."""
    nodes = np.linspace(0.0, 1.0, n)
    x = -L * (1.0 - nodes)
    return nodes, kink_profile(x)[:, :3]
