"""CSV schemas, metadata sidecars, exact round trips, error reporting."""

import json

import numpy as np
import pytest

from heterokink.analysis import BranchRow, BranchTable
from heterokink.errors import FileFormatError
from heterokink.fileio import (
    read_branch,
    read_distance,
    read_profile,
    sidecar_path,
    write_branch,
    write_distance,
    write_json,
    write_profile,
)
from heterokink.shoot import DistanceProfile
from heterokink.systems import ModelKind


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_profile_round_trip_is_exact(tmp_path, rng):
    x = np.sort(rng.uniform(-20.0, 20.0, 40))
    states = rng.standard_normal((40, 3)) * np.pi
    p = write_profile(tmp_path / "prof.csv", x, states, meta={"A": 0.5})
    x2, s2, meta = read_profile(p)
    assert np.array_equal(x, x2)
    assert np.array_equal(states, s2)
    assert meta["A"] == 0.5
    assert meta["schema"] == 1 and "tool_version" in meta
    assert sidecar_path(p) == tmp_path / "prof.json"


def test_profile_writes_are_byte_stable(tmp_path, rng):
    x = np.linspace(0.0, 1.0, 9)
    states = rng.standard_normal((9, 5))
    a = write_profile(tmp_path / "a.csv", x, states)
    b = write_profile(tmp_path / "b.csv", x, states)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().endswith("\n")
    # no stray temp files left behind
    assert sorted(q.name for q in tmp_path.iterdir()) == [
        "a.csv", "a.json", "b.csv", "b.json",
    ]


def test_profile_input_validation(tmp_path):
    with pytest.raises(ValueError, match="strictly increasing"):
        write_profile(tmp_path / "p.csv", [0.0, 0.0, 1.0], np.zeros((3, 3)))
    with pytest.raises(ValueError, match="matching x"):
        write_profile(tmp_path / "p.csv", [0.0, 1.0], np.zeros((3, 3)))


def test_profile_read_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("x,U1,U2\n0,1,2\nnope,1,2\n")
    with pytest.raises(FileFormatError) as ei:
        read_profile(p)
    assert ei.value.line == 3
    assert "line 3" in str(ei.value)

    p.write_text("x,U1,U2\n0,1\n")
    with pytest.raises(FileFormatError, match="expected 3 fields"):
        read_profile(p)

    p.write_text("t,U1\n0,1\n")
    with pytest.raises(FileFormatError) as ei:
        read_profile(p)
    assert ei.value.line == 1

    p.write_text("x,U1\n1,0\n0,1\n")
    with pytest.raises(FileFormatError, match="strictly increasing"):
        read_profile(p)

    p.write_text("")
    with pytest.raises(FileFormatError, match="empty"):
        read_profile(p)


def _branch_rows():
    return [
        BranchRow(kind=ModelKind.HCCH, k=1, delta=0.001, A=0.7123456789012345,
                  d_min=3.2e-12, root_distances=(4.25, 5.5, 4.25), source="bvp"),
        BranchRow(kind=ModelKind.HCCH, k=1, delta=0.01, A=0.41,
                  d_min=1e-9, root_distances=(3.75,), source="shoot"),
        BranchRow(kind=ModelKind.HCCH, k=0, delta=0.01, A=0.76,
                  d_min=2e-10, root_distances=(), source="shoot"),
    ]


def test_branch_round_trip_with_ragged_gaps(tmp_path):
    table = BranchTable(_branch_rows())
    p = write_branch(tmp_path / "branch.csv", table, meta={"note": "test"})
    table2 = read_branch(p)
    assert table2.rows == table.rows
    meta = json.loads(sidecar_path(p).read_text())
    assert meta["kind"] == "hcch"
    assert meta["sources"] == ["bvp", "shoot", "shoot"]
    assert meta["note"] == "test"
    # ragged rows pad with empty fields up to the widest gap list
    header, first = p.read_text().splitlines()[:2]
    assert header == "delta,A,k,d_min,gap1,gap2,gap3"
    assert first.count(",") == 6


def test_branch_read_without_sidecar_needs_kind(tmp_path):
    table = BranchTable(_branch_rows())
    p = write_branch(tmp_path / "branch.csv", table)
    sidecar_path(p).unlink()
    with pytest.raises(FileFormatError, match="kind"):
        read_branch(p)
    table2 = read_branch(p, kind=ModelKind.HCCH)
    # numeric payload survives; per-row sources fall back to the default
    assert [r.A for r in table2] == [r.A for r in table]
    assert {r.source for r in table2} == {"shoot"}


def test_branch_read_errors(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("delta,A,k,d_min\n0.01,0.9,one,1e-9\n")
    write_json(sidecar_path(p), {"kind": "cch"})
    with pytest.raises(FileFormatError) as ei:
        read_branch(p)
    assert ei.value.line == 2 and "hump count" in str(ei.value)

    p.write_text("delta,A,k\n")
    with pytest.raises(FileFormatError, match="bad branch header"):
        read_branch(p)


def test_distance_round_trip(tmp_path):
    prof = DistanceProfile(
        A_values=np.array([0.1, 0.2, 0.3]),
        d_values=np.array([1.0, -0.5, 2.0]),
        zero_candidates=[(0.1, 0.2), (0.2, 0.3)],
    )
    p = write_distance(tmp_path / "dist.csv", prof)
    prof2 = read_distance(p)
    assert np.array_equal(prof.A_values, prof2.A_values)
    assert np.array_equal(prof.d_values, prof2.d_values)
    assert prof2.zero_candidates == [(0.1, 0.2), (0.2, 0.3)]


def test_distance_read_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("A,d\n0.2,1.0\n0.1,1.0\n")
    with pytest.raises(FileFormatError, match="nondecreasing"):
        read_distance(p)
    p.write_text("a,b\n")
    with pytest.raises(FileFormatError, match="bad distance header"):
        read_distance(p)
    p.write_text("A,d\n0.1,1.0,9\n")
    with pytest.raises(FileFormatError, match="expected 2 fields"):
        read_distance(p)


def test_malformed_sidecar_is_reported(tmp_path, rng):
    p = write_profile(tmp_path / "p.csv", [0.0, 1.0], rng.standard_normal((2, 3)))
    sidecar_path(p).write_text("{not json")
    with pytest.raises(FileFormatError, match="sidecar"):
        read_profile(p)


def test_write_json_stable_and_sorted(tmp_path):
    p1 = write_json(tmp_path / "x.json", {"b": 1, "a": [1.5, None]})
    p2 = write_json(tmp_path / "y.json", {"a": [1.5, None], "b": 1})
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert text.endswith("\n")
