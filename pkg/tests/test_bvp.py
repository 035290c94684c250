"""Collocation solver: half and full formulations, continuation, errors."""

import math

import numpy as np
import pytest

from heterokink.analysis import root_distances
from heterokink.asymptotics import cch_width_pred, hcch_width_pred
from heterokink.bvp import (
    BvpConfig,
    Formulation,
    build_full_problem,
    build_half_problem,
    collocation_defect,
    continue_in_delta,
    default_L,
    initial_guess,
    kink_guess,
    reference_from_solution,
    reflect,
    solve,
)
from heterokink.errors import (
    DomainError,
    MeshBudget,
    NewtonDiverged,
)
from heterokink.systems import ModelKind, ModelParams, profile_residual, reverse

ROOT_A = 0.8967  # one-hump fourth-order family at delta = 0.05, 1e-3 window


def test_zero_drive_fixed_point():
    # delta = 0 has the exact kink with A = 1; the solver must land on it
    # and, restarted from its own answer, accept it almost immediately
    L = 18.0
    problem = build_half_problem(ModelKind.CCH, 0.0, L, 0.97, guess=kink_guess(L), k=0)
    sol = solve(problem)
    assert abs(sol.A - 1.0) < 1e-9
    x = np.linspace(-L, 0.0, 2001)
    res = profile_residual(
        ModelKind.CCH, ModelParams(A=sol.A, delta=0.0), x, sol.eval_x(x)
    )
    assert res < 1e-6
    warm = build_half_problem(
        ModelKind.CCH, 0.0, L, sol.A, guess=(sol.mesh.nodes, sol.mesh.states), k=0
    )
    resolved = solve(warm)
    assert sum(resolved.newton_iters) <= 3
    assert abs(resolved.A - sol.A) < 1e-12


def test_half_solution_shape_and_bcs(cch_half_solution):
    sol = cch_half_solution
    assert sol.formulation is Formulation.HALF_SYMMETRIC
    assert abs(sol.A - ROOT_A) < 1e-3
    assert sol.max_residual < 1e-9
    xs = sol.x_nodes()
    assert xs[0] == -sol.L and xs[-1] == 0.0
    U = sol.mesh.states
    assert abs(U[0, 0] - 1.0) < 1e-12 and abs(U[0, 1]) < 1e-12  # far field
    assert abs(U[-1, 0]) < 1e-12 and abs(U[-1, 2]) < 1e-12      # section
    assert collocation_defect(sol) < 1e-9
    # clamped evaluation off the domain returns the boundary states
    assert np.allclose(sol.eval_x(-1e9), U[0])
    assert np.allclose(sol.eval_x(5.0), U[-1])


def test_reflection_produces_symmetric_train(cch_half_solution):
    prof = reflect(cch_half_solution, n=1201)
    assert prof.x[0] == -prof.x[-1] == -cch_half_solution.L
    # reversibility map: U(x) = R U(-x)
    sym = reverse(ModelKind.CCH, prof.states[::-1])
    assert np.max(np.abs(prof.states - sym)) < 1e-12
    assert abs(prof.states[0, 0] - 1.0) < 1e-10
    assert abs(prof.states[-1, 0] + 1.0) < 1e-10
    gaps = root_distances(prof.x, prof.states)
    assert len(gaps) == 2
    assert gaps[0] == pytest.approx(gaps[1], abs=1e-9)
    assert gaps[0] == pytest.approx(cch_width_pred(0.05), abs=0.25)


def test_full_projected_agrees_with_half(cch_half_solution, cch_full_solution):
    full = cch_full_solution
    assert full.formulation is Formulation.FULL_PROJECTED
    assert abs(full.A - cch_half_solution.A) < 1e-7
    assert full.max_residual < 1e-9
    # the computed full profile keeps the reversal symmetry without it
    # being imposed anywhere in the formulation
    s = np.linspace(0.0, 1.0, 801)
    U = full.profile(s)[:, :3]
    sym = reverse(ModelKind.CCH, full.profile(1.0 - s)[:, :3])
    assert np.max(np.abs(U - sym)) < 1e-8


def test_domain_doubling_leaves_A_fixed(cch_half_solution):
    problem = build_half_problem(ModelKind.CCH, 0.05, 44.0, 0.894, k=1)
    wide = solve(problem)
    assert abs(wide.A - cch_half_solution.A) < 1e-8


def test_interior_scheme_is_fourth_order(cch_half_solution):
    A_ref = cch_half_solution.A
    K = cch_width_pred(0.05)
    errs = []
    for n in (61, 121):
        s = np.linspace(0.0, 1.0, n)
        from heterokink.asymptotics import tanh_profile

        states = tanh_profile(1, K, -22.0 * (1.0 - s))[:, :3]
        problem = build_half_problem(
            ModelKind.CCH, 0.05, 22.0, 0.894, guess=(s, states), k=1
        )
        errs.append(abs(solve(problem, BvpConfig(refine=False)).A - A_ref))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0] / 8.0  # halving h cuts the error ~16x


def test_fixed_A_mismatch_brackets_the_root():
    # with A pinned the released section condition measures how far the
    # trajectory is from a symmetric connection; it changes sign across
    # the root located by shooting
    vals = []
    for A in (0.890, 0.903):
        problem = build_half_problem(ModelKind.CCH, 0.05, 22.0, A, k=1, fix_A=True)
        sol = solve(problem)
        assert len(sol.p) == 0 and sol.A == A
        vals.append(sol.mesh.states[-1, 2])
    assert vals[0] * vals[1] < 0.0


def test_continuation_matches_direct_solve(cch_half_solution):
    sols = continue_in_delta(ModelKind.CCH, 1, cch_half_solution, [0.045, 0.04])
    assert [s.delta for s in sols] == [0.05, 0.045, 0.04]
    direct = solve(build_half_problem(ModelKind.CCH, 0.04, sols[-1].L, 0.93, k=1))
    assert abs(sols[-1].A - direct.A) < 1e-8
    assert sols[-1].A > sols[0].A


def test_hcch_half_solution_and_width():
    delta = 1e-3
    A0 = 1.0 - 3.0 * 2.0 ** (1.0 / 6.0) * delta ** (1.0 / 3.0)
    L = default_L(ModelKind.HCCH, 1, delta)
    sol = solve(build_half_problem(ModelKind.HCCH, delta, L, A0, k=1))
    assert sol.max_residual < 1e-9
    assert sol.A == pytest.approx(A0, abs=0.02)
    prof = reflect(sol)
    gaps = root_distances(prof.x, prof.states)
    assert len(gaps) == 2
    assert gaps[0] == pytest.approx(gaps[1], abs=1e-8)
    assert gaps[0] == pytest.approx(hcch_width_pred(delta), abs=0.8)


def test_input_validation():
    with pytest.raises(DomainError, match="L_fixed"):
        build_half_problem(ModelKind.CCH, 0.05, -1.0, 0.9)
    with pytest.raises(DomainError, match="positive"):
        initial_guess(ModelKind.CCH, 1, 0.0, 20.0)
    with pytest.raises(DomainError, match="K < L/2"):
        initial_guess(ModelKind.CCH, 0, 12.0, 20.0)
    with pytest.raises(DomainError, match="no room"):
        initial_guess(ModelKind.CCH, 5, 4.0, 20.0)
    with pytest.raises(DomainError, match="free scalars"):
        build_full_problem(ModelKind.CCH, 0.05, lambda s: None, 40.0, 0.9,
                           free=("A", "L"))
    with pytest.raises(DomainError, match="delta > 0"):
        default_L(ModelKind.HCCH, 1, 0.0)
    assert default_L(ModelKind.HCCH, 1, 1e-5) > default_L(ModelKind.HCCH, 1, 1e-3)


def test_newton_diverged_on_iteration_budget():
    # a deliberately misplaced kink train cannot converge in one step
    s = np.linspace(0.0, 1.0, 101)
    from heterokink.asymptotics import tanh_profile

    states = tanh_profile(1, 8.0, -22.0 * (1.0 - s))[:, :3]
    problem = build_half_problem(
        ModelKind.CCH, 0.05, 22.0, 0.5, guess=(s, states), k=1
    )
    with pytest.raises(NewtonDiverged, match="Newton iterations"):
        solve(problem, BvpConfig(max_newton=1))


def test_mesh_budget_paths():
    problem = build_half_problem(ModelKind.CCH, 0.05, 22.0, 0.894, k=1, n=41)
    with pytest.raises(MeshBudget, match="nodes"):
        solve(problem, BvpConfig(max_nodes=50))
    problem = build_half_problem(ModelKind.CCH, 0.05, 22.0, 0.894, k=1, n=41)
    with pytest.raises(MeshBudget, match="cycles"):
        solve(problem, BvpConfig(mesh_tol=1e-16, max_mesh_cycles=2))


def test_reference_requires_half_solution(cch_full_solution):
    with pytest.raises(DomainError, match="half-domain"):
        reference_from_solution(cch_full_solution)
    with pytest.raises(DomainError, match="half-domain"):
        reflect(cch_full_solution)
