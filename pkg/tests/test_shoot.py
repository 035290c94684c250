"""Shooting probes, detectors, scan labeling, branch continuation."""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from heterokink.errors import BranchLost, NotEnoughCrossings
from heterokink.integrate import IntegratorConfig
from heterokink.shoot import (
    ShootConfig,
    branch_point_at,
    distance_function,
    probe,
    signed_detector,
    trace_branch,
    unstable_seed,
)
from heterokink.systems import ModelKind, ModelParams, equilibrium_analysis

DELTA = 0.05

# loose-but-adequate settings for tests that only need structure, not
# tight roots
FAST = ShootConfig(x_max=60.0, integrator=IntegratorConfig(rtol=1e-8, atol=1e-10))


def test_shoot_config_validation():
    with pytest.raises(ValueError, match="eps_offset"):
        ShootConfig(eps_offset=0.0)
    with pytest.raises(ValueError, match="threshold"):
        ShootConfig(threshold=1.0)
    with pytest.raises(ValueError, match="A_grid"):
        ShootConfig(A_grid=(0.9, 0.5, 1e-3))


def test_unstable_seed_offset_and_orientation():
    params = ModelParams(A=0.9, delta=DELTA)
    for kind, angle in ((ModelKind.CCH, None), (ModelKind.HCCH, 0.3)):
        cfg = ShootConfig(eps_offset=1e-5, angle=angle)
        seed = unstable_seed(kind, params, cfg)
        point = equilibrium_analysis(kind, params, which=+1).point
        assert np.linalg.norm(seed - point) == pytest.approx(1e-5, rel=1e-9)
    # CCH direction points into the interior (U_1 decreasing off U+)
    seed = unstable_seed(ModelKind.CCH, params, ShootConfig(eps_offset=1e-5))
    assert seed[0] < equilibrium_analysis(ModelKind.CCH, params, which=+1).point[0]
    # the HCCH plane angle actually moves the seed
    s0 = unstable_seed(ModelKind.HCCH, params, ShootConfig(angle=0.0))
    s1 = unstable_seed(ModelKind.HCCH, params, ShootConfig(angle=math.pi / 2))
    assert np.linalg.norm(s0 - s1) > 1e-8


def test_probe_structure():
    r = probe(ModelKind.CCH, ModelParams(A=0.89, delta=DELTA), FAST)
    assert len(r.crossings_x) >= 1
    assert np.all(np.diff(r.crossings_x) > 0.0)
    assert r.crossings_U.shape == (len(r.crossings_x), 3)
    assert math.isfinite(r.detector(1))
    with pytest.raises(ValueError, match="1-based"):
        r.detector(0)
    with pytest.raises(NotEnoughCrossings):
        r.detector(50)
    # far from a root the connection distance stays order one
    assert r.d_min > 1e-4


def test_probe_hcch_dimension():
    r = probe(ModelKind.HCCH, ModelParams(A=0.75, delta=0.01), replace(FAST, angle=1.0))
    assert r.crossings_U.shape[1] == 5


def test_distance_function_flag_and_determinism():
    params = ModelParams(A=0.89, delta=DELTA)
    d1 = distance_function(ModelKind.CCH, params, FAST)
    d2, endpoint_only = distance_function(ModelKind.CCH, params, FAST, with_flag=True)
    assert d1 == d2
    assert isinstance(endpoint_only, bool)


@pytest.fixture(scope="module")
def het1_root():
    """Tight detector root of the one-hump family at delta = 0.05."""
    cfg = ShootConfig()
    f = lambda A: signed_detector(
        ModelKind.CCH, ModelParams(A=A, delta=DELTA), cfg, crossing_index=2
    )
    lo, hi = 0.8955, 0.8985
    assert f(lo) * f(hi) < 0.0
    return brentq(f, lo, hi, xtol=1e-11)


def test_detector_zero_is_a_connection(het1_root):
    bp = branch_point_at(ModelKind.CCH, DELTA, het1_root)
    assert bp.k == 1
    assert bp.d_min < 1e-8
    assert len(bp.root_distances) == 1
    # kink spacing follows the slow-logarithm width scale
    assert bp.root_distances[0] == pytest.approx(3.34, abs=0.2)
    x_sym, U_sym = bp.symmetric_point
    assert x_sym > 0.0
    # odd components vanish at the symmetric point
    assert abs(U_sym[0]) < 1e-9 and abs(U_sym[2]) < 1e-7


def test_root_invariant_under_offset_and_tolerance(het1_root):
    # the artificial manifold offset and the integrator tolerance are
    # numerical devices; the root must not depend on them
    cfg = ShootConfig(
        eps_offset=5e-7, integrator=IntegratorConfig(rtol=1e-11, atol=1e-13)
    )
    f = lambda A: signed_detector(
        ModelKind.CCH, ModelParams(A=A, delta=DELTA), cfg, crossing_index=2
    )
    other = brentq(f, 0.8955, 0.8985, xtol=1e-11)
    assert abs(other - het1_root) < 1e-7


def test_scan_finds_and_labels_het1(cch_shoot_point):
    bp = cch_shoot_point
    assert bp.kind is ModelKind.CCH and bp.k == 1
    assert abs(bp.A - 0.8967) < 1e-3
    assert bp.d_min < 1e-8


def test_trace_branch_follows_the_family(cch_shoot_point):
    points = trace_branch(
        ModelKind.CCH, 1, cch_shoot_point, [0.045], ShootConfig()
    )
    assert len(points) == 2
    assert points[0] is cch_shoot_point
    nxt = points[1]
    assert nxt.delta == 0.045 and nxt.k == 1
    assert nxt.A > cch_shoot_point.A
    assert abs(nxt.A - (1.0 - 3.0 / math.sqrt(2.0) * 0.045)) < 5e-3


def test_trace_branch_raises_branch_lost(cch_shoot_point):
    # an unreachable acceptance level rejects every located root, so the
    # trace gives up after two consecutive deltas and reports progress
    cfg = replace(FAST, accept_distance=1e-30)
    with pytest.raises(BranchLost) as ei:
        trace_branch(ModelKind.CCH, 1, cch_shoot_point, [0.048, 0.046], cfg)
    assert ei.value.points == [cch_shoot_point]
