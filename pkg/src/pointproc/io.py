"""File formats: flat CSV for all artefacts, GeoJSON for point input.

Writers emit LF line endings and format floats with '%.17g', which
round-trips IEEE doubles exactly; given identical inputs the bytes are
identical.  Readers validate headers and report malformed content as
file:line messages.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import EventTimes, ParameterError, SpatialPattern, SpaceTimeEvents
from .detect import ScanResult

__all__ = [
    "read_count_values",
    "read_event_times",
    "read_geojson_points",
    "read_points_csv",
    "read_space_time_csv",
    "write_curve_csv",
    "write_event_times",
    "write_grid_csv",
    "write_points_csv",
    "write_scan_csv",
    "write_space_time_csv",
]


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _write_lines(path, lines) -> None:
    Path(path).write_text("\n".join(lines) + "\n")


def _read_rows(path, expected_header: str) -> list[tuple[int, list[str]]]:
    """Rows as (1-based line number, fields), header validated."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ParameterError(f"{path}: empty file, expected header {expected_header!r}")
    header = lines[0].strip()
    if header != expected_header:
        raise ParameterError(
            f"{path}:1: expected header {expected_header!r}, got {header!r}"
        )
    out = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        out.append((i, [f.strip() for f in line.split(",")]))
    return out


def _floats(path, lineno, fields, n) -> list[float]:
    if len(fields) != n:
        raise ParameterError(f"{path}:{lineno}: expected {n} fields, got {len(fields)}")
    vals = []
    for col, f in enumerate(fields, start=1):
        try:
            vals.append(float(f))
        except ValueError:
            raise ParameterError(
                f"{path}:{lineno}: column {col}: not a number: {f!r}"
            ) from None
    return vals


def write_event_times(path, events: EventTimes) -> None:
    _write_lines(path, ["t"] + [_fmt(t) for t in events.times])


def read_event_times(path, horizon: float | None = None) -> EventTimes:
    rows = _read_rows(path, "t")
    times = [_floats(path, i, f, 1)[0] for i, f in rows]
    if horizon is None:
        if not times:
            raise ParameterError(f"{path}: no events and no horizon given")
        horizon = max(times)
    return EventTimes(times, horizon)


def write_points_csv(path, pattern: SpatialPattern) -> None:
    lines = ["x,y"] + [f"{_fmt(x)},{_fmt(y)}" for x, y in pattern.points]
    _write_lines(path, lines)


def read_points_csv(path) -> np.ndarray:
    rows = _read_rows(path, "x,y")
    pts = [_floats(path, i, f, 2) for i, f in rows]
    return np.array(pts, dtype=float) if pts else np.empty((0, 2))


def write_space_time_csv(path, events: SpaceTimeEvents) -> None:
    lines = ["x,y,t"] + [
        f"{_fmt(x)},{_fmt(y)},{_fmt(t)}"
        for (x, y), t in zip(events.xy, events.t)
    ]
    _write_lines(path, lines)


def read_space_time_csv(path) -> np.ndarray:
    rows = _read_rows(path, "x,y,t")
    vals = [_floats(path, i, f, 3) for i, f in rows]
    return np.array(vals, dtype=float) if vals else np.empty((0, 3))


def read_geojson_points(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Point features from a GeoJSON FeatureCollection.

    Returns (points, times); times is None unless every feature carries
    a numeric 't' property.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParameterError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParameterError(f"{path}: expected a GeoJSON FeatureCollection")
    feats = doc.get("features", [])
    pts, times = [], []
    for i, feat in enumerate(feats):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Point":
            raise ParameterError(f"{path}: feature {i}: only Point geometry is supported")
        coords = geom.get("coordinates")
        if not isinstance(coords, (list, tuple)) or len(coords) < 2:
            raise ParameterError(f"{path}: feature {i}: malformed coordinates")
        try:
            pts.append((float(coords[0]), float(coords[1])))
        except (TypeError, ValueError):
            raise ParameterError(f"{path}: feature {i}: malformed coordinates") from None
        props = feat.get("properties") or {}
        if "t" in props:
            try:
                times.append(float(props["t"]))
            except (TypeError, ValueError):
                raise ParameterError(
                    f"{path}: feature {i}: property 't' is not a number"
                ) from None
    points = np.array(pts, dtype=float) if pts else np.empty((0, 2))
    if times and len(times) != len(pts):
        raise ParameterError(f"{path}: property 't' present on only some features")
    return points, (np.array(times, dtype=float) if times else None)


def write_grid_csv(path, spec, values, name: str = "value") -> None:
    """Cell-indexed values, x-major; integer arrays stay integers."""
    arr = np.asarray(values)
    integral = np.issubdtype(arr.dtype, np.integer)
    lines = [f"cell_x,cell_y,{name}"]
    for ixv in range(spec.nx):
        for iyv in range(spec.ny):
            v = arr[ixv, iyv]
            sv = str(int(v)) if integral else _fmt(v)
            lines.append(f"{ixv},{iyv},{sv}")
    _write_lines(path, lines)


def read_count_values(path, spec, name: str = "value") -> np.ndarray:
    """Integer grid values from cell_x,cell_y,<name> rows; missing cells
    are zero."""
    rows = _read_rows(path, f"cell_x,cell_y,{name}")
    counts = np.zeros((spec.nx, spec.ny), dtype=np.int64)
    for i, f in rows:
        vals = _floats(path, i, f, 3)
        ixv, iyv, v = vals
        if ixv != int(ixv) or iyv != int(iyv) or v != int(v):
            raise ParameterError(f"{path}:{i}: cell indices and counts must be integers")
        ixv, iyv, v = int(ixv), int(iyv), int(v)
        if not (0 <= ixv < spec.nx and 0 <= iyv < spec.ny):
            raise ParameterError(f"{path}:{i}: cell ({ixv}, {iyv}) outside the grid")
        if v < 0:
            raise ParameterError(f"{path}:{i}: counts must be non-negative")
        counts[ixv, iyv] = v
    return counts


def write_curve_csv(path, radii, observed, lower=None, upper=None) -> None:
    """r,observed plus optional envelope columns."""
    has_env = lower is not None and upper is not None
    cols = [observed, lower, upper] if has_env else [observed]
    if any(len(c) != len(radii) for c in cols):
        raise ParameterError("curve columns must match the radii in length")
    header = "r,observed,lower,upper" if has_env else "r,observed"
    lines = [header]
    for j, r in enumerate(radii):
        row = [_fmt(r), _fmt(observed[j])]
        if has_env:
            row += [_fmt(lower[j]), _fmt(upper[j])]
        lines.append(",".join(row))
    _write_lines(path, lines)


def write_scan_csv(path, results: list[ScanResult]) -> None:
    lines = ["cx,cy,radius,t_start,t_end,observed,expected,llr,p_value"]
    for res in results:
        c = res.cylinder
        lines.append(
            ",".join(
                [
                    _fmt(c.cx),
                    _fmt(c.cy),
                    _fmt(c.radius),
                    _fmt(c.t_start),
                    _fmt(c.t_end),
                    str(res.observed),
                    _fmt(res.expected),
                    _fmt(res.llr),
                    _fmt(res.p_value),
                ]
            )
        )
    _write_lines(path, lines)
