"""JSON round-trip for the set types.

Shapes::

    PolyZonotope   {"G": [[...]], "GI": [[...]], "E": [[...]], "id": [...]}
    Zonotope       {"c": [...], "G": [[...]]}
    IntervalVector {"l": [...], "u": [...]}

Matrices are row-major lists. Because Python's float repr is shortest
round-trip, loading a dumped object reproduces it bit for bit. Matrices
with zero columns are stored with an explicit ``"shape"`` hint so that the
row count survives.
"""

from __future__ import annotations

import numpy as np

from .interval import IntervalVector
from .polyzono import PolyZonotope
from .zonotope import Zonotope


def _mat(a: np.ndarray) -> list:
    return a.tolist()


def _load_mat(data, rows: int, dtype=float) -> np.ndarray:
    a = np.asarray(data, dtype=dtype)
    if a.size == 0:
        return np.zeros((rows, 0), dtype=dtype)
    return a.reshape(rows, -1)


def to_json(obj) -> dict:
    if isinstance(obj, PolyZonotope):
        return {
            "type": "PolyZonotope",
            "n": obj.n,
            "G": _mat(obj.G),
            "GI": _mat(obj.GI),
            "E": _mat(obj.E),
            "id": obj.id.tolist(),
        }
    if isinstance(obj, Zonotope):
        return {"type": "Zonotope", "c": obj.c.tolist(), "G": _mat(obj.G)}
    if isinstance(obj, IntervalVector):
        return {"type": "IntervalVector", "l": obj.l.tolist(), "u": obj.u.tolist()}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_json(data: dict):
    kind = data.get("type")
    if kind is None:
        if "E" in data:
            kind = "PolyZonotope"
        elif "c" in data:
            kind = "Zonotope"
        elif "l" in data:
            kind = "IntervalVector"
        else:
            raise ValueError("unrecognized set JSON")
    if kind == "PolyZonotope":
        ids = np.asarray(data["id"], dtype=np.int64).reshape(-1)
        if "n" in data:
            n = int(data["n"])
        elif data["G"]:
            n = len(data["G"])
        else:
            n = len(data["GI"])
        G = _load_mat(data["G"], n)
        GI = _load_mat(data.get("GI", []), n)
        E = _load_mat(data["E"], ids.size, dtype=np.int64)
        if E.shape[1] != G.shape[1]:
            E = np.zeros((ids.size, G.shape[1]), dtype=np.int64) if E.size == 0 else E
        return PolyZonotope(G, GI, E, ids)
    if kind == "Zonotope":
        c = np.asarray(data["c"], dtype=float)
        return Zonotope(c, _load_mat(data["G"], c.size))
    if kind == "IntervalVector":
        return IntervalVector(data["l"], data["u"])
    raise ValueError(f"unknown set type {kind!r}")
