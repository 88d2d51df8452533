"""JSON files for reachability results and the other CLI inputs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import setrep as S
from .dynamics import NonlinearSystem
from .reach import ReachResult, ReachSettings, time_grid
from .setrep import IntervalVector, PolyZonotope, Zonotope


class ResultFormatError(ValueError):
    """A result file is malformed or internally inconsistent."""


def dumps(obj) -> str:
    """Deterministic JSON text (shortest round-trip float repr, fixed key order)."""
    return json.dumps(obj, indent=1, sort_keys=False, allow_nan=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_initial_set(data: dict, idgen: S.IdGenerator):
    """Initial set from JSON: ``{"center", "radius"}``, an interval, a zonotope or an SPZ."""
    if "center" in data:
        c = np.asarray(data["center"], dtype=float)
        r = np.asarray(data.get("radius", np.zeros_like(c)), dtype=float)
        if c.shape != r.shape:
            raise ValueError("center and radius differ in length")
        if np.any(r < 0):
            raise ValueError("radius must be non-negative")
        return S.from_interval(IntervalVector(c - r, c + r), idgen)
    obj = S.from_json(data)
    if isinstance(obj, IntervalVector):
        return S.from_interval(obj, idgen)
    if isinstance(obj, Zonotope):
        return S.from_zonotope(obj, idgen)
    idgen.reserve_above(obj.id)
    return S.remove_independent(obj, idgen)


def load_input_set(data: dict | None, m: int) -> Zonotope:
    if data is None:
        return Zonotope(np.zeros(m), np.zeros((m, 0)))
    if "center" in data:
        c = np.asarray(data["center"], dtype=float)
        return IntervalVector.from_center_radius(c, data.get("radius", np.zeros_like(c))).to_zonotope()
    obj = S.from_json(data)
    if isinstance(obj, IntervalVector):
        return obj.to_zonotope()
    if isinstance(obj, Zonotope):
        return obj
    raise ValueError("input set must be an interval or a zonotope")


def _iv(iv: IntervalVector) -> dict:
    return {"l": iv.l.tolist(), "u": iv.u.tolist()}


def result_to_json(res: ReachResult) -> dict:
    return {
        "format": "spzreach-result-1",
        "system": res.system.to_dict() if res.system is not None else None,
        "settings": res.settings.to_dict(),
        "U": S.to_json(res.U),
        "x0_ids": [int(i) for i in res.x0_ids],
        "time_points": [{"t": t, "set": S.to_json(pz)} for t, pz in res.time_points],
        "time_intervals": [
            {"t0": t[0], "t1": t[1], "set": S.to_json(pz)} for t, pz in res.time_intervals
        ],
        "abstraction_errors": [_iv(e) for e in res.abstraction_errors],
        "assumed_errors": [_iv(e) for e in res.assumed_errors],
        "expansion_points": [np.asarray(z).tolist() for z in res.expansion_points],
        "iterations": list(res.iterations),
    }


def result_from_json(data: dict, validate: bool = True) -> ReachResult:
    try:
        settings = ReachSettings.from_dict(data["settings"])
        system = NonlinearSystem.from_dict(data["system"]) if data.get("system") else None
        tp = [(float(e["t"]), S.from_json(e["set"])) for e in data["time_points"]]
        ti = [((float(e["t0"]), float(e["t1"])), S.from_json(e["set"])) for e in data["time_intervals"]]
        res = ReachResult(
            tp,
            ti,
            [IntervalVector(e["l"], e["u"]) for e in data["abstraction_errors"]],
            [IntervalVector(e["l"], e["u"]) for e in data.get("assumed_errors", [])],
            [np.asarray(z, dtype=float) for z in data["expansion_points"]],
            np.asarray(data["x0_ids"], dtype=np.int64),
            settings,
            S.from_json(data["U"]),
            system,
            list(data.get("iterations", [])),
        )
    except (KeyError, TypeError) as exc:
        raise ResultFormatError(f"malformed result file: missing or invalid field {exc}") from exc
    if validate:
        validate_result(res)
    return res


def validate_result(res: ReachResult) -> None:
    """Check the time chain and that every stored set keeps the initial factors."""
    grid = time_grid(res.settings.tf, res.settings.r)
    N = grid.size - 1
    if len(res.time_points) != N + 1:
        raise ResultFormatError(f"expected {N + 1} time-point sets, found {len(res.time_points)}")
    if len(res.time_intervals) != N:
        raise ResultFormatError(f"expected {N} time-interval sets, found {len(res.time_intervals)}")
    times = np.array([t for t, _ in res.time_points])
    if not np.allclose(times, grid, rtol=0, atol=1e-9 * max(1.0, res.settings.tf)):
        raise ResultFormatError("time points do not follow the step grid")
    for s, ((t0, t1), _) in enumerate(res.time_intervals):
        if abs(t0 - grid[s]) > 1e-9 or abs(t1 - grid[s + 1]) > 1e-9:
            raise ResultFormatError(f"time interval {s} does not match the step grid")
    for name, seq in (
        ("abstraction_errors", res.abstraction_errors),
        ("expansion_points", res.expansion_points),
    ):
        if len(seq) != N:
            raise ResultFormatError(f"{name} has {len(seq)} entries, expected {N}")
    ids = set(int(i) for i in res.x0_ids)
    for s, (t, pz) in enumerate(res.time_points):
        if not isinstance(pz, PolyZonotope):
            raise ResultFormatError(f"time point {s} is not a polynomial zonotope")
        missing = ids - set(int(i) for i in pz.id)
        if missing:
            raise ResultFormatError(f"time point {s} (t={t}) lost initial factors {sorted(missing)}")
    for s, (_, pz) in enumerate(res.time_intervals):
        missing = ids - set(int(i) for i in pz.id)
        if missing:
            raise ResultFormatError(f"time interval {s} lost initial factors {sorted(missing)}")
