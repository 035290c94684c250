"""Branch tables, root distances, law fits, comparison reports."""

import math

import numpy as np
import pytest

from heterokink import analysis
from heterokink.analysis import (
    BranchRow,
    BranchTable,
    compare_report,
    fit_cube_root_A,
    fit_linear_A,
    fit_log_width,
    root_distances,
)
from heterokink.asymptotics import predict, tanh_profile
from heterokink.errors import (
    DomainError,
    FewerThanTwoCrossings,
    InsufficientRows,
    MismatchedFamilies,
)
from heterokink.systems import ModelKind


def _row(kind=ModelKind.CCH, k=1, delta=0.01, A=0.97, d_min=1e-12, gaps=(4.0,), source="shoot"):
    return BranchRow(kind=kind, k=k, delta=delta, A=A, d_min=d_min,
                     root_distances=tuple(gaps), source=source)


class FakeProfile:
    def __init__(self, x, states):
        self.x = x
        self.states = states


def test_root_distances_on_tanh_train():
    # edge-kink zeros shift by O(exp(-2K)) from tail overlap, so the
    # spacing check is loose while the count is exact
    x = np.linspace(-40.0, 40.0, 8000)
    V = tanh_profile(2, 6.0, x)[:, :3]
    gaps = root_distances(x, V)
    assert len(gaps) == 4
    assert np.allclose(gaps, [6.0, 6.0, 6.0, 6.0], atol=1e-4)
    # object-style input gives the same answer
    gaps2 = root_distances(FakeProfile(x, V))
    assert gaps == gaps2


def test_root_distances_crossing_polish():
    # zeros of sin land between grid points; the Hermite interpolant
    # locates them to O(h^4) even on a coarse mesh
    x = np.linspace(-10.0, 10.0, 501)
    states = np.column_stack([np.sin(x), np.cos(x)])
    gaps = root_distances(x, states)
    assert len(gaps) == 6
    assert np.allclose(gaps, math.pi, atol=1e-7)


def test_root_distances_needs_two_crossings():
    x = np.linspace(-10.0, 10.0, 500)
    V = tanh_profile(0, 0.0, x)[:, :3]
    with pytest.raises(FewerThanTwoCrossings):
        root_distances(x, V)


def test_branch_table_sorted_and_deduplicated():
    rows = [_row(delta=0.03), _row(delta=0.01), _row(delta=0.02)]
    table = BranchTable(rows)
    assert [r.delta for r in table] == [0.01, 0.02, 0.03]
    with pytest.raises(DomainError):
        BranchTable([_row(delta=0.01), _row(delta=0.01)])
    # same delta, different source is distinct
    BranchTable([_row(delta=0.01), _row(delta=0.01, source="bvp")])


def test_branch_table_subset_and_family():
    rows = [_row(delta=d, k=k) for d in (0.01, 0.02) for k in (0, 1)]
    table = BranchTable(rows)
    sub = table.subset(delta_max=0.015, k=1)
    assert len(sub) == 1 and sub.rows[0].k == 1
    assert sub.family() == (ModelKind.CCH, 1)
    with pytest.raises(MismatchedFamilies):
        table.family()


def test_first_gap_nan_without_gaps():
    assert math.isnan(_row(gaps=()).first_gap)
    assert _row(gaps=(3.5, 4.0)).first_gap == 3.5


def test_fit_linear_A_recovers_exact_coefficient():
    mu = 2.121
    rows = [_row(delta=d, A=1.0 - mu * d) for d in np.geomspace(1e-4, 1e-2, 8)]
    fit = fit_linear_A(BranchTable(rows))
    assert fit.model == "LinearA"
    assert fit.parameters[0] == pytest.approx(mu, rel=1e-12)
    assert fit.rms_residual < 1e-14
    assert fit.n_points == 8


def test_fit_log_width_recovers_exact_parameters():
    eta1, eta2 = -1.0 / math.sqrt(2.0), 0.18
    rows = [
        _row(delta=d, gaps=(eta1 * math.log(eta2 * d),))
        for d in np.geomspace(1e-4, 1e-2, 8)
    ]
    fit = fit_log_width(BranchTable(rows))
    assert fit.parameters[0] == pytest.approx(eta1, rel=1e-10)
    assert fit.parameters[1] == pytest.approx(eta2, rel=1e-10)


def test_fit_cube_root_recovers_exact_coefficient():
    a1 = -3.0 * 2.0 ** (1.0 / 6.0)
    rows = [
        _row(kind=ModelKind.HCCH, delta=d, A=1.0 + a1 * d ** (1.0 / 3.0))
        for d in np.geomspace(1e-6, 1e-4, 6)
    ]
    fit = fit_cube_root_A(BranchTable(rows))
    assert fit.parameters[0] == pytest.approx(a1, rel=1e-12)


def test_fits_reject_thin_or_mixed_tables():
    with pytest.raises(InsufficientRows):
        fit_linear_A(BranchTable([_row(delta=0.01), _row(delta=0.02)]))
    mixed = BranchTable([_row(delta=0.01, k=0), _row(delta=0.02, k=1), _row(delta=0.03, k=1)])
    with pytest.raises(MismatchedFamilies):
        fit_linear_A(mixed)
    # log-width needs rows that actually carry gap data
    rows = [_row(delta=d, gaps=()) for d in (0.01, 0.02, 0.03)]
    with pytest.raises(InsufficientRows):
        fit_log_width(BranchTable(rows))


def test_fit_result_serialization():
    rows = [_row(delta=d, A=1.0 - 2.0 * d) for d in (0.01, 0.02, 0.03)]
    d = fit_linear_A(BranchTable(rows)).to_json_dict()
    assert set(d) == {"model", "parameters", "rms_residual", "n_points"}


def test_compare_report_join_and_text():
    deltas = list(np.geomspace(1e-3, 1e-2, 5))
    rows = [
        _row(delta=d, A=1.0 - 3.0 / math.sqrt(2.0) * d, gaps=(4.0 - math.log(d),))
        for d in deltas
    ]
    table = BranchTable(rows)
    preds = [predict(ModelKind.CCH, 1, d) for d in deltas[:4]]
    report = compare_report(table, preds)
    assert len(report.rows) == 4  # unmatched delta dropped
    text = report.to_text()
    assert "het_1" in text and "fit " in text
    payload = report.to_json_dict()
    assert payload["k"] == 1 and len(payload["rows"]) == 4


def test_compare_report_rejects_foreign_predictions():
    rows = [_row(delta=d, A=0.9) for d in (0.01, 0.02, 0.03)]
    preds = [predict(ModelKind.HCCH, 1, 0.01)]
    with pytest.raises(MismatchedFamilies):
        compare_report(BranchTable(rows), preds)


def test_compare_report_requires_overlap():
    rows = [_row(delta=d, A=0.9) for d in (0.01, 0.02, 0.03)]
    preds = [predict(ModelKind.CCH, 1, 0.005)]
    with pytest.raises(MismatchedFamilies):
        compare_report(BranchTable(rows), preds)
