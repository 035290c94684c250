"""Delimited file formats with JSON metadata sidecars.

Three CSV schemas, each with a `schema: 1` JSON sidecar next to the
data file (same name, .json extension):

* profile:  header `x,U1,...,Udim`, strictly increasing x
* branch:   header `delta,A,k,d_min,gap1,...` (ragged gap lists padded
            with empty fields), row order sorted by delta
* distance: header `A,d`

Floats are written with 17 significant digits so round trips are exact
for double precision.  All writes go through a temp file in the target
directory followed by an atomic rename, and use fixed newline and float
formatting so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ._version import __version__
from .analysis import BranchRow, BranchTable
from .errors import FileFormatError
from .shoot import DistanceProfile
from .systems import ModelKind

__all__ = [
    "sidecar_path",
    "write_profile",
    "read_profile",
    "write_branch",
    "read_branch",
    "write_distance",
    "read_distance",
    "write_json",
]


def write_json(path, payload: dict) -> Path:
    """Atomically write a JSON document (sorted keys, stable bytes)."""
    path = Path(path)
    _atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _write_sidecar(path, meta: dict) -> None:
    payload = {"schema": 1, "tool_version": __version__}
    payload.update(meta)
    _atomic_write_text(sidecar_path(path), json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _read_sidecar(path) -> dict | None:
    sp = sidecar_path(path)
    if not sp.exists():
        return None
    try:
        return json.loads(sp.read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"malformed metadata sidecar {sp}: {exc}") from exc


def _parse_float(token: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise FileFormatError(f"bad numeric field {token!r}", line=line_no) from exc


def write_profile(path, x, states, meta: dict | None = None) -> Path:
    """Write a profile CSV (x,U1..Udim) plus its metadata sidecar."""
    path = Path(path)
    x = np.asarray(x, dtype=float)
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or len(x) != len(states):
        raise ValueError("states must be (n, dim) matching x")
    if not np.all(np.diff(x) > 0.0):
        raise ValueError("profile x values must be strictly increasing")
    dim = states.shape[1]
    lines = ["x," + ",".join(f"U{j + 1}" for j in range(dim))]
    for xi, row in zip(x, states):
        lines.append(",".join([_fmt(xi)] + [_fmt(v) for v in row]))
    _atomic_write_text(path, "\n".join(lines) + "\n")
    _write_sidecar(path, meta or {})
    return path


def read_profile(path) -> tuple[np.ndarray, np.ndarray, dict | None]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise FileFormatError("empty profile file", line=1)
    header = lines[0].split(",")
    if header[0] != "x" or any(h != f"U{j}" for j, h in enumerate(header[1:], start=1)):
        raise FileFormatError(f"bad profile header {lines[0]!r}", line=1)
    dim = len(header) - 1
    xs, rows = [], []
    for ln, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != dim + 1:
            raise FileFormatError(
                f"expected {dim + 1} fields, got {len(parts)}", line=ln
            )
        vals = [_parse_float(tok, ln) for tok in parts]
        xs.append(vals[0])
        rows.append(vals[1:])
    x = np.array(xs)
    if len(x) and not np.all(np.diff(x) > 0.0):
        raise FileFormatError("profile x values must be strictly increasing")
    return x, np.array(rows).reshape(len(xs), dim), _read_sidecar(path)


def write_branch(path, table: BranchTable, meta: dict | None = None) -> Path:
    """Write a branch CSV (delta,A,k,d_min,gap1,...) plus sidecar.

    Gap lists are ragged; rows are padded with empty fields to the
    widest row.  kind and per-row sources live in the sidecar so the
    round trip reconstructs the table exactly.
    """
    path = Path(path)
    rows = list(table)
    n_gap = max((len(r.root_distances) for r in rows), default=0)
    header = "delta,A,k,d_min" + "".join(f",gap{j + 1}" for j in range(n_gap))
    lines = [header]
    for r in rows:
        gaps = [_fmt(g) for g in r.root_distances]
        gaps += [""] * (n_gap - len(gaps))
        lines.append(
            ",".join([_fmt(r.delta), _fmt(r.A), str(r.k), _fmt(r.d_min)] + gaps)
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")
    side = {
        "kind": rows[0].kind.value if rows else None,
        "sources": [r.source for r in rows],
    }
    side.update(meta or {})
    _write_sidecar(path, side)
    return path


def read_branch(path, kind: ModelKind | None = None) -> BranchTable:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise FileFormatError("empty branch file", line=1)
    header = lines[0].split(",")
    if header[:4] != ["delta", "A", "k", "d_min"] or any(
        h != f"gap{j}" for j, h in enumerate(header[4:], start=1)
    ):
        raise FileFormatError(f"bad branch header {lines[0]!r}", line=1)
    meta = _read_sidecar(path) or {}
    if kind is None:
        if not meta.get("kind"):
            raise FileFormatError(
                f"branch file {path} has no kind in its sidecar; pass kind explicitly"
            )
        kind = ModelKind(meta["kind"])
    sources = meta.get("sources")
    rows: list[BranchRow] = []
    for ln, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) < 4:
            raise FileFormatError(f"expected at least 4 fields, got {len(parts)}", line=ln)
        delta = _parse_float(parts[0], ln)
        A = _parse_float(parts[1], ln)
        try:
            k = int(parts[2])
        except ValueError as exc:
            raise FileFormatError(f"bad hump count {parts[2]!r}", line=ln) from exc
        d_min = _parse_float(parts[3], ln)
        gaps = tuple(_parse_float(tok, ln) for tok in parts[4:] if tok != "")
        source = "shoot"
        if isinstance(sources, list) and len(rows) < len(sources):
            source = sources[len(rows)]
        rows.append(
            BranchRow(
                kind=kind, k=k, delta=delta, A=A, d_min=d_min,
                root_distances=gaps, source=source,
            )
        )
    return BranchTable(rows)


def write_distance(path, profile: DistanceProfile, meta: dict | None = None) -> Path:
    """Write a distance-function CSV (A,d) plus sidecar with candidates."""
    path = Path(path)
    lines = ["A,d"]
    for a, d in zip(profile.A_values, profile.d_values):
        lines.append(f"{_fmt(a)},{_fmt(d)}")
    _atomic_write_text(path, "\n".join(lines) + "\n")
    side = {"zero_candidates": [[float(a), float(b)] for a, b in profile.zero_candidates]}
    side.update(meta or {})
    _write_sidecar(path, side)
    return path


def read_distance(path) -> DistanceProfile:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "A,d":
        raise FileFormatError(f"bad distance header {lines[0] if lines else ''!r}", line=1)
    A, d = [], []
    for ln, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 2:
            raise FileFormatError(f"expected 2 fields, got {len(parts)}", line=ln)
        A.append(_parse_float(parts[0], ln))
        d.append(_parse_float(parts[1], ln))
    meta = _read_sidecar(path) or {}
    cands = [tuple(pair) for pair in meta.get("zero_candidates", [])]
    if A and not all(b >= a for a, b in zip(A, A[1:])):
        raise FileFormatError("distance profile A values must be nondecreasing")
    return DistanceProfile(
        A_values=np.array(A), d_values=np.array(d), zero_candidates=cands
    )
