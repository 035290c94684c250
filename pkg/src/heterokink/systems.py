"""Phase-space form of the stationary driven Cahn-Hilliard models.

Two scaled stationary ODEs are supported, parameterized by the driving
strength ``delta >= 0`` and the nonlinearity coefficient ``A > 0``:

* fourth-order model (``ModelKind.CCH``), third-order stationary equation::

      (1 - c^2) = -(2 / (delta sqrt(A))) * (c'' + c - A c^3)'

* sixth-order model (``ModelKind.HCCH``), fifth-order stationary equation::

      (1 - c^2) = +(2 / (delta sqrt(A))) * (c'' + c - A c^3)'''

Both are written as first-order systems ``U' = F(U)`` with
``U = (c, c', c'', ...)``, of dimension 3 and 5 respectively.  The constant
states ``U+ = (1, 0, ..., 0)`` and ``U- = (-1, 0, ..., 0)`` are equilibria
for every parameter choice, and both systems are reversible under

    ``R U(x) = (-U_1, U_2, -U_3, U_4, -U_5)(-x)``,

so that ``R F(U) = -F(R U)``.  Heteroclinic profiles connecting ``U+`` to
``U-`` intersect the symmetric section ``{U_1 = U_3 = (U_5) = 0}``.

All state functions broadcast over leading axes: passing an ``(n, dim)``
array of states returns ``(n, dim)`` (or ``(n, dim, dim)`` for Jacobians).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "ModelKind",
    "ModelParams",
    "EquilibriumInfo",
    "dimension",
    "equilibria",
    "rhs",
    "jacobian",
    "rhs_A_derivative",
    "rhs_delta_derivative",
    "reverse",
    "equilibrium_analysis",
    "char_poly_coeffs",
    "rhs_callable",
    "profile_residual",
    "fd_weights",
]


class ModelKind(str, Enum):
    """Which stationary model: fourth order (cch) or sixth order (hcch)."""

    CCH = "cch"
    HCCH = "hcch"


_DIMENSION = {ModelKind.CCH: 3, ModelKind.HCCH: 5}

# (sign s, derivative order m) of the scaled residual
#   s * (delta sqrt(A)/2) (1 - c^2) + (c'' + c - A c^3)^(m)
_RESIDUAL_FORM = {ModelKind.CCH: (+1, 1), ModelKind.HCCH: (-1, 3)}


@dataclass(frozen=True)
class ModelParams:
    """Parameter pair (A, delta) with domain validation at construction."""

    A: float
    delta: float

    def __post_init__(self):
        if not (self.A > 0.0) or not np.isfinite(self.A):
            raise ValueError(f"A must be positive and finite, got {self.A}")
        if self.delta < 0.0 or not np.isfinite(self.delta):
            raise ValueError(f"delta must be >= 0 and finite, got {self.delta}")

    @property
    def drive(self) -> float:
        """The combination delta*sqrt(A)/2 appearing in both systems."""
        return 0.5 * self.delta * np.sqrt(self.A)


def dimension(kind: ModelKind) -> int:
    """Phase-space dimension: 3 for the fourth-order model, 5 for the sixth."""
    return _DIMENSION[ModelKind(kind)]


def equilibria(kind: ModelKind) -> tuple[np.ndarray, np.ndarray]:
    """Return (U+, U-), the two constant equilibrium states."""
    dim = dimension(kind)
    up = np.zeros(dim)
    up[0] = 1.0
    um = np.zeros(dim)
    um[0] = -1.0
    return up, um


def rhs(kind: ModelKind, params: ModelParams, U: np.ndarray) -> np.ndarray:
    """Vector field F(U) of the first-order system U' = F(U).

    Parameters
    ----------
    kind : ModelKind
    params : ModelParams
    U : array, shape (..., dim)
        Phase states; broadcasts over leading axes.

    Returns
    -------
    array, shape (..., dim)
    """
    kind = ModelKind(kind)
    U = np.asarray(U, dtype=float)
    A = params.A
    q = params.drive
    F = np.empty_like(U)
    u1 = U[..., 0]
    if kind is ModelKind.CCH:
        F[..., 0] = U[..., 1]
        F[..., 1] = U[..., 2]
        F[..., 2] = (3.0 * A * u1 * u1 - 1.0) * U[..., 1] + q * (u1 * u1 - 1.0)
    else:
        u2, u3, u4 = U[..., 1], U[..., 2], U[..., 3]
        F[..., 0] = u2
        F[..., 1] = u3
        F[..., 2] = u4
        F[..., 3] = U[..., 4]
        F[..., 4] = (
            6.0 * A * u2**3
            + 18.0 * A * u1 * u2 * u3
            + (3.0 * A * u1 * u1 - 1.0) * u4
            + q * (1.0 - u1 * u1)
        )
    return F


def rhs_callable(kind: ModelKind, params: ModelParams):
    """Specialized single-state F(U) for a fixed (kind, params).

    Same values as ``rhs`` but without broadcasting or dispatch
    overhead; this is the integrator's hot path.
    """
    kind = ModelKind(kind)
    A = float(params.A)
    q = float(params.drive)
    if kind is ModelKind.CCH:

        def f(U):
            u1, u2 = U[0], U[1]
            return np.array(
                [u2, U[2], (3.0 * A * u1 * u1 - 1.0) * u2 + q * (u1 * u1 - 1.0)]
            )

        return f

    def f(U):
        u1, u2, u3, u4 = U[0], U[1], U[2], U[3]
        return np.array(
            [
                u2,
                u3,
                u4,
                U[4],
                6.0 * A * u2**3
                + 18.0 * A * u1 * u2 * u3
                + (3.0 * A * u1 * u1 - 1.0) * u4
                + q * (1.0 - u1 * u1),
            ]
        )

    return f


def jacobian(kind: ModelKind, params: ModelParams, U: np.ndarray) -> np.ndarray:
    """Jacobian dF/dU, shape (..., dim, dim)."""
    kind = ModelKind(kind)
    U = np.asarray(U, dtype=float)
    A = params.A
    q = params.drive
    dim = dimension(kind)
    J = np.zeros(U.shape[:-1] + (dim, dim))
    u1 = U[..., 0]
    for i in range(dim - 1):
        J[..., i, i + 1] = 1.0
    if kind is ModelKind.CCH:
        u2 = U[..., 1]
        J[..., 2, 0] = 6.0 * A * u1 * u2 + 2.0 * q * u1
        J[..., 2, 1] = 3.0 * A * u1 * u1 - 1.0
    else:
        u2, u3, u4 = U[..., 1], U[..., 2], U[..., 3]
        J[..., 4, 0] = 18.0 * A * u2 * u3 + 6.0 * A * u1 * u4 - 2.0 * q * u1
        J[..., 4, 1] = 18.0 * A * (u2 * u2 + u1 * u3)
        J[..., 4, 2] = 18.0 * A * u1 * u2
        J[..., 4, 3] = 3.0 * A * u1 * u1 - 1.0
    return J


def rhs_A_derivative(kind: ModelKind, params: ModelParams, U: np.ndarray) -> np.ndarray:
    """Partial derivative dF/dA at fixed U, shape (..., dim).

    Needed when the collocation solver carries A as a free parameter.
    """
    kind = ModelKind(kind)
    U = np.asarray(U, dtype=float)
    A = params.A
    dq_dA = 0.25 * params.delta / np.sqrt(A)
    out = np.zeros_like(U)
    u1 = U[..., 0]
    if kind is ModelKind.CCH:
        out[..., 2] = 3.0 * u1 * u1 * U[..., 1] + dq_dA * (u1 * u1 - 1.0)
    else:
        u2, u3, u4 = U[..., 1], U[..., 2], U[..., 3]
        out[..., 4] = (
            6.0 * u2**3
            + 18.0 * u1 * u2 * u3
            + 3.0 * u1 * u1 * u4
            + dq_dA * (1.0 - u1 * u1)
        )
    return out


def rhs_delta_derivative(kind: ModelKind, params: ModelParams, U: np.ndarray) -> np.ndarray:
    """Partial derivative dF/ddelta at fixed U, shape (..., dim)."""
    kind = ModelKind(kind)
    U = np.asarray(U, dtype=float)
    dq = 0.5 * np.sqrt(params.A)
    out = np.zeros_like(U)
    u1 = U[..., 0]
    if kind is ModelKind.CCH:
        out[..., 2] = dq * (u1 * u1 - 1.0)
    else:
        out[..., 4] = dq * (1.0 - u1 * u1)
    return out


def reverse(kind: ModelKind, U: np.ndarray) -> np.ndarray:
    """Apply the reversibility involution R: negate odd-index components.

    With 1-based component indexing U_j -> (-1)^j U_j, i.e. the sign of
    c, c'', (c'''') flips while c', (c''') survive.  R is an involution and
    satisfies R F(U) = -F(R U).
    """
    dim = dimension(kind)
    signs = np.array([(-1.0) ** (j + 1) for j in range(dim)])
    return np.asarray(U, dtype=float) * signs


def char_poly_coeffs(kind: ModelKind, params: ModelParams, which: int) -> np.ndarray:
    """Characteristic polynomial coefficients (highest degree first) at U+/-.

    which=+1 selects U+, which=-1 selects U-.  The closed forms are

        cch:   lambda^3 + (1 - 3A) lambda    -+ delta sqrt(A)
        hcch:  lambda^5 + (1 - 3A) lambda^3  +- delta sqrt(A)

    with the upper sign at U+.
    """
    kind = ModelKind(kind)
    if which not in (+1, -1):
        raise ValueError("which must be +1 or -1")
    A = params.A
    g = params.delta * np.sqrt(A)
    if kind is ModelKind.CCH:
        return np.array([1.0, 0.0, 1.0 - 3.0 * A, -which * g])
    return np.array([1.0, 0.0, 1.0 - 3.0 * A, 0.0, 0.0, which * g])


@dataclass(frozen=True)
class EquilibriumInfo:
    """Spectral data of the linearization at one equilibrium.

    Eigenvalues are sorted by descending real part (ties by imaginary
    part); ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``.  The
    unstable/stable counts use a small tolerance on the real part, so
    marginal eigenvalues at delta=0 land in ``n_center``.
    """

    point: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_unstable: int
    n_stable: int
    n_center: int
    char_coeffs: np.ndarray = field(repr=False)

    _TOL = 1e-9

    def unstable_basis(self) -> np.ndarray:
        """Real basis of the unstable subspace, one column per dimension.

        Complex-conjugate pairs contribute (Re v, Im v) once.
        """
        return _real_basis(self.eigenvalues, self.eigenvectors, lambda r: r > self._TOL)

    def stable_basis(self) -> np.ndarray:
        """Real basis of the stable subspace (see unstable_basis)."""
        return _real_basis(self.eigenvalues, self.eigenvectors, lambda r: r < -self._TOL)


def _real_basis(lams: np.ndarray, vecs: np.ndarray, keep) -> np.ndarray:
    cols = []
    seen_conj = set()
    for i, lam in enumerate(lams):
        if not keep(lam.real):
            continue
        v = vecs[:, i]
        if abs(lam.imag) <= 1e-12:
            cols.append(np.real(v))
            continue
        key = (round(lam.real, 10), round(abs(lam.imag), 10))
        if key in seen_conj:
            continue
        seen_conj.add(key)
        cols.append(np.real(v))
        cols.append(np.imag(v))
    if not cols:
        return np.zeros((vecs.shape[0], 0))
    B = np.column_stack(cols)
    # orthonormalize for well-conditioned projections
    Q, _ = np.linalg.qr(B)
    for j in range(Q.shape[1]):
        i = int(np.argmax(np.abs(Q[:, j])))
        if Q[i, j] < 0.0:
            Q[:, j] = -Q[:, j]
    return Q


def _normalize_eigenvectors(vecs: np.ndarray) -> np.ndarray:
    """Unit norm, phase fixed so the first significant entry is positive real."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        v = out[:, j]
        v = v / np.linalg.norm(v)
        mags = np.abs(v)
        i = int(np.argmax(mags > 1e-8 * mags.max()))
        phase = v[i] / abs(v[i])
        out[:, j] = v / phase
    return out


def equilibrium_analysis(
    kind: ModelKind, params: ModelParams, which: int = +1
) -> EquilibriumInfo:
    """Eigen-decomposition of the linearization at U+ (which=+1) or U-.

    Uses the dense eigensolver on the companion-form Jacobian; the
    characteristic polynomial coefficients are attached so callers can
    cross-check against polynomial roots.
    """
    kind = ModelKind(kind)
    up, um = equilibria(kind)
    point = up if which == +1 else um
    J = jacobian(kind, params, point)
    lams, vecs = np.linalg.eig(J)
    order = np.lexsort((lams.imag, -lams.real))
    lams = lams[order]
    vecs = _normalize_eigenvectors(vecs[:, order])
    tol = EquilibriumInfo._TOL
    n_un = int(np.sum(lams.real > tol))
    n_st = int(np.sum(lams.real < -tol))
    return EquilibriumInfo(
        point=point,
        eigenvalues=lams,
        eigenvectors=vecs,
        n_unstable=n_un,
        n_stable=n_st,
        n_center=len(lams) - n_un - n_st,
        char_coeffs=char_poly_coeffs(kind, params, which),
    )


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 on nodes x.

    Fornberg's recursion; exact for polynomials up to degree len(x)-1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    if m > n:
        raise ValueError("need at least m+1 nodes")
    c = np.zeros((n + 1, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n + 1):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _derivative_on_grid(x: np.ndarray, g: np.ndarray, m: int, width: int = 9):
    """m-th derivative of samples g on (possibly nonuniform) grid x.

    Sliding centered stencils of `width` points; returns (xi, dg) on the
    interior where a full stencil fits.  Applying this to a near-zero
    combination keeps the roundoff amplification proportional to |g|.
    """
    n = len(x)
    if n < width:
        raise ValueError(f"need at least {width} samples, got {n}")
    half = width // 2
    idx = np.arange(half, n - half)
    dg = np.empty(len(idx))
    for out_i, i in enumerate(idx):
        sl = slice(i - half, i + half + 1)
        w = fd_weights(x[sl], x[i], m)
        dg[out_i] = w @ g[sl]
    return x[idx], dg


def profile_residual(
    kind: ModelKind, params: ModelParams, x: np.ndarray, profile: np.ndarray
) -> float:
    """Max-norm residual of the scaled stationary ODE along a profile.

    Parameters
    ----------
    x : array, shape (n,)
        Sample locations, strictly increasing (nonuniform allowed).
    profile : array, shape (n, dim)
        Phase states (c and derivatives) sampled along x.

    Returns
    -------
    float
        max over interior samples of

            | s * (delta sqrt(A)/2) (1 - c^2) + (c'' + c - A c^3)^(m) |

        with (s, m) = (+1, 1) for cch and (-1, 3) for hcch.

    Notes
    -----
    The combination g = c'' + c - A c^3 is formed pointwise from the phase
    components and only then differentiated numerically, so for profiles
    near a solution the differentiation acts on a small quantity and the
    result is meaningful down to ~1e-13.  Stencil edges are excluded.
    """
    kind = ModelKind(kind)
    x = np.asarray(x, dtype=float)
    profile = np.asarray(profile, dtype=float)
    if profile.ndim != 2 or profile.shape != (len(x), dimension(kind)):
        raise ValueError(
            f"profile must have shape ({len(x)}, {dimension(kind)}), got {profile.shape}"
        )
    s, m = _RESIDUAL_FORM[kind]
    c = profile[:, 0]
    g = profile[:, 2] + c - params.A * c**3
    xi, dg = _derivative_on_grid(x, g, m)
    c_i = c[np.searchsorted(x, xi)]
    r = s * params.drive * (1.0 - c_i * c_i) + dg
    return float(np.max(np.abs(r)))
