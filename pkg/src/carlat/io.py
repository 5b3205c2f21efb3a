"""Serialization of lattice functions.

A function is stored as a JSON header plus a data file of (multi-index,
value) rows covering every site of the box, in C (row-major) index order:

* header ``<base>.json``: {"schema", "d", "h", "lo", "hi", "format"}
* binary ``<base>.bin``: per row, d little-endian int64 indices followed by
  one little-endian float64 value
* csv ``<base>.csv``: header ``n_1,...,n_d,value``; values via repr
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .lattice import LatticeFunction, LatticeSpec

HEADER_SCHEMA = "carlat-lattice-function/1"


def _row_table(f: LatticeFunction):
    idx = f.spec.indices().reshape(f.spec.d, -1).T
    return idx, f.values.ravel()


def save_lattice_function(f: LatticeFunction, base: str | Path, fmt: str = "binary"):
    """Write <base>.json plus <base>.bin or <base>.csv; returns the data path."""
    if fmt not in ("binary", "csv"):
        raise ValueError(f"unknown serialization format {fmt!r}")
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "schema": HEADER_SCHEMA,
        "d": f.spec.d,
        "h": f.spec.h,
        "lo": list(f.spec.lo),
        "hi": list(f.spec.hi),
        "format": fmt,
        "byte_order": "little",
    }
    base.with_suffix(".json").write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    idx, vals = _row_table(f)
    if fmt == "binary":
        path = base.with_suffix(".bin")
        rows = np.empty(vals.size, dtype=[("n", "<i8", (f.spec.d,)), ("value", "<f8")])
        rows["n"] = idx
        rows["value"] = vals
        rows.tofile(path)
    else:
        path = base.with_suffix(".csv")
        with open(path, "w") as fh:
            fh.write(",".join(f"n_{a+1}" for a in range(f.spec.d)) + ",value\n")
            for row, v in zip(idx, vals):
                fh.write(",".join(str(int(c)) for c in row) + f",{float(v)!r}\n")
    return path


def load_lattice_function(base: str | Path) -> LatticeFunction:
    base = Path(base)
    header = json.loads(base.with_suffix(".json").read_text())
    if header.get("schema") != HEADER_SCHEMA:
        raise ValueError("unrecognized lattice function header schema")
    spec = LatticeSpec(header["d"], header["h"], tuple(header["lo"]), tuple(header["hi"]))
    values = np.zeros(spec.shape)
    if header["format"] == "binary":
        rows = np.fromfile(base.with_suffix(".bin"),
                           dtype=[("n", "<i8", (spec.d,)), ("value", "<f8")])
        idx = rows["n"]
        vals = rows["value"]
    else:
        data = np.loadtxt(base.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
        idx = data[:, :spec.d].astype(np.int64)
        vals = data[:, spec.d]
    pos = tuple(idx[:, a] - spec.lo[a] for a in range(spec.d))
    values[pos] = vals
    return LatticeFunction(spec, values)
