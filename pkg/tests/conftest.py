"""Shared fixtures.

The expensive artifacts (branch traces, scans, continuations) are built
once per session.  Each heavy fixture records its wall-clock seconds in
the session `timings` dict so the end-to-end tests can assert runtime
budgets that include the cost of producing their own inputs.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from heterokink import analysis, asymptotics, bvp, shoot
from heterokink.systems import ModelKind

# ten log-spaced drives spanning the fourth-order branch study
DELTA_SCHEDULE = [float(d) for d in np.geomspace(1e-4, 2e-2, 10)]


def rows_from_points(points) -> analysis.BranchTable:
    return analysis.BranchTable(
        [
            analysis.BranchRow(
                kind=p.kind,
                k=p.k,
                delta=p.delta,
                A=p.A,
                d_min=p.d_min,
                root_distances=tuple(p.root_distances),
                source="shoot",
            )
            for p in points
        ]
    )


@pytest.fixture(scope="session")
def timings():
    return {}


def _trace_cch_family(k: int) -> analysis.BranchTable:
    """Scan a narrow window at the largest delta, then walk down."""
    d0 = DELTA_SCHEDULE[-1]
    pred = asymptotics.predict(ModelKind.CCH, k, d0)
    lo = pred.A_pred - 0.012
    hi = min(pred.A_pred + 0.012, 0.99985)
    cfg = shoot.ShootConfig(A_grid=(lo, hi, 4e-4))
    points = [p for p in shoot.scan_and_refine(ModelKind.CCH, d0, cfg) if p.k == k]
    assert points, f"no het_{k} start at delta={d0}"
    start = min(points, key=lambda p: abs(p.A - pred.A_pred))
    rest = list(reversed(DELTA_SCHEDULE[:-1]))
    traced = shoot.trace_branch(ModelKind.CCH, k, start, rest, shoot.ShootConfig())
    return rows_from_points(traced)


@pytest.fixture(scope="session")
def cch_het1_branch(timings) -> analysis.BranchTable:
    t0 = time.perf_counter()
    table = _trace_cch_family(1)
    timings["cch_het1_branch"] = time.perf_counter() - t0
    return table


@pytest.fixture(scope="session")
def cch_other_branches(timings) -> dict[int, analysis.BranchTable]:
    t0 = time.perf_counter()
    tables = {k: _trace_cch_family(k) for k in (0, 2, 3)}
    timings["cch_other_branches"] = time.perf_counter() - t0
    return tables


@pytest.fixture(scope="session")
def cch_spikey_scan(timings):
    """Wide scan at delta=0.05 where many families coexist."""
    t0 = time.perf_counter()
    cfg = shoot.ShootConfig(A_grid=(0.35, 0.9999, 1e-3))
    points = shoot.scan_and_refine(ModelKind.CCH, 0.05, cfg)
    timings["cch_spikey_scan"] = time.perf_counter() - t0
    return points


@pytest.fixture(scope="session")
def cch_het4_scans(timings):
    """Windowed het_4 roots at the two pinned drives."""
    t0 = time.perf_counter()
    out = {}
    for delta, window in ((0.0289, (0.815, 0.838)), (0.0017, (0.988, 0.9905))):
        cfg = shoot.ShootConfig(A_grid=(window[0], window[1], 2.5e-4))
        points = [p for p in shoot.scan_and_refine(ModelKind.CCH, delta, cfg) if p.k == 4]
        out[delta] = points
    timings["cch_het4_scans"] = time.perf_counter() - t0
    return out


def _hcch_seed(k: int, delta: float, n: int) -> bvp.BvpSolution:
    A0 = asymptotics.hcch_A_pred(k, delta)
    L = bvp.default_L(ModelKind.HCCH, k, delta)
    return bvp.solve(bvp.build_half_problem(ModelKind.HCCH, delta, L, A0, k=k, n=n))


@pytest.fixture(scope="session")
def hcch_continuations(timings) -> dict[int, list[bvp.BvpSolution]]:
    """Sixth-order het_0/1/2 walked down to delta=1e-5.

    k=0 and k=1 seed at delta=1e-3 where the cube-root law is accurate;
    k=2 needs a larger seed drive (its tanh guess has no basin below
    ~2e-3) and a denser mesh for the long slow tails.
    """
    t0 = time.perf_counter()
    out: dict[int, list[bvp.BvpSolution]] = {}
    for k, d_seed, n in ((0, 1e-3, 301), (1, 1e-3, 301), (2, 3e-3, 601)):
        sol0 = _hcch_seed(k, d_seed, n)
        n_steps = 9 if k < 2 else 13
        schedule = [float(d) for d in np.geomspace(d_seed, 1e-5, n_steps)][1:]
        sols = bvp.continue_in_delta(ModelKind.HCCH, k, sol0, schedule)
        out[k] = [sol0] + list(sols)
    timings["hcch_continuations"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def hcch_het2_at_001(timings) -> bvp.BvpSolution:
    """het_2 walked up from its small-drive regime to delta=0.01.

    Small steps through the shape transition keep the solver on the
    branch (high-slope interior parts stay non-monotone long enough for
    the secant predictor to follow them).
    """
    t0 = time.perf_counter()
    sol0 = _hcch_seed(2, 3e-3, 601)
    schedule = [float(d) for d in np.geomspace(3e-3, 1e-2, 25)][1:]
    sols = bvp.continue_in_delta(ModelKind.HCCH, 2, sol0, schedule)
    timings["hcch_het2_at_001"] = time.perf_counter() - t0
    return sols[-1]


@pytest.fixture(scope="session")
def cch_half_solution(timings) -> bvp.BvpSolution:
    """Fourth-order het_1 half-domain solve at delta=0.05."""
    t0 = time.perf_counter()
    pred = asymptotics.predict(ModelKind.CCH, 1, 0.05)
    sol = bvp.solve(bvp.build_half_problem(ModelKind.CCH, 0.05, 22.0, pred.A_pred, k=1))
    timings["cch_half_solution"] = time.perf_counter() - t0
    return sol


@pytest.fixture(scope="session")
def cch_full_solution(timings, cch_half_solution) -> bvp.BvpSolution:
    """Projected full-domain counterpart of cch_half_solution."""
    t0 = time.perf_counter()
    ref, L_full = bvp.reference_from_solution(cch_half_solution)
    problem = bvp.build_full_problem(
        ModelKind.CCH, 0.05, ref, L_full, cch_half_solution.A
    )
    sol = bvp.solve(problem)
    timings["cch_full_solution"] = time.perf_counter() - t0
    return sol


@pytest.fixture(scope="session")
def cch_shoot_point(timings):
    """Shooting root of het_1 at delta=0.05 from a narrow window."""
    t0 = time.perf_counter()
    cfg = shoot.ShootConfig(A_grid=(0.885, 0.905, 5e-4))
    points = [p for p in shoot.scan_and_refine(ModelKind.CCH, 0.05, cfg) if p.k == 1]
    timings["cch_shoot_point"] = time.perf_counter() - t0
    assert points, "no het_1 root in the window"
    return points[0]
