"""Stencil kernel backends.

Every lattice operator in this package reduces to one of two primitives,
evaluated with zero extension outside the array:

* ``apply_stencil_const``: out(n) = sum_k w_k * f(n + off_k), scalar weights
* ``apply_stencil_var``:   out(n) = sum_k c_k(n) * f(n + off_k), per-site
  coefficient arrays

A compiled (Cython) implementation is preferred and a NumPy one is the
fallback; the choice happens at import time.  Set ``CARLAT_PURE_PYTHON=1``
to force the fallback.  ``backend=`` forces a specific one per call, which
the benchmark and the cross-checking tests use.
"""

import os

import numpy as np

from . import _fallback

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

BACKENDS = ("python",) if _compiled is None else ("compiled", "python")

if os.environ.get("CARLAT_PURE_PYTHON") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def available_backends():
    return BACKENDS


# Plans (pad widths, base-index map, flat offsets) depend only on the array
# shape and the offset set; cache them since sweeps reuse a few shapes.
_PLAN_CACHE = {}
_PLAN_CACHE_MAX = 64


def _flat_plan(shape, offsets):
    key = (shape, offsets.tobytes())
    plan = _PLAN_CACHE.get(key)
    if plan is not None:
        return plan
    pad_lo = np.maximum(0, -offsets.min(axis=0))
    pad_hi = np.maximum(0, offsets.max(axis=0))
    padded = tuple(int(s + l + u) for s, l, u in zip(shape, pad_lo, pad_hi))
    strides = np.ones(len(shape), dtype=np.int64)
    for a in range(len(shape) - 2, -1, -1):
        strides[a] = strides[a + 1] * padded[a + 1]
    base = np.zeros(shape, dtype=np.int64)
    for a, size in enumerate(shape):
        ax = (np.arange(size, dtype=np.int64) + int(pad_lo[a])) * strides[a]
        base += ax.reshape((1,) * a + (size,) + (1,) * (len(shape) - a - 1))
    core = tuple(slice(int(l), int(l) + s) for l, s in zip(pad_lo, shape))
    flat_off = offsets.astype(np.int64) @ strides
    plan = (padded, core, np.ascontiguousarray(base.ravel()), np.ascontiguousarray(flat_off))
    if len(_PLAN_CACHE) >= _PLAN_CACHE_MAX:
        _PLAN_CACHE.clear()
    _PLAN_CACHE[key] = plan
    return plan


def _as_offsets(offsets, ndim):
    off = np.asarray(offsets, dtype=np.int64)
    if off.ndim != 2 or off.shape[1] != ndim:
        raise ValueError("offsets must have shape (k, d)")
    return off


def apply_stencil_const(values, offsets, weights, backend=None):
    values = np.ascontiguousarray(values, dtype=np.float64)
    off = _as_offsets(offsets, values.ndim)
    which = backend or BACKEND
    if which == "python":
        return _fallback.apply_stencil_const(values, off, np.asarray(weights, dtype=np.float64))
    padded, core, base, flat_off = _flat_plan(values.shape, off)
    fpad = np.zeros(padded, dtype=np.float64)
    fpad[core] = values
    out = np.empty(values.size, dtype=np.float64)
    _compiled.stencil_const(fpad.ravel(), base, flat_off,
                            np.ascontiguousarray(weights, dtype=np.float64), out)
    return out.reshape(values.shape)


def apply_stencil_var(values, offsets, coeffs, backend=None):
    values = np.ascontiguousarray(values, dtype=np.float64)
    off = _as_offsets(offsets, values.ndim)
    which = backend or BACKEND
    if which == "python":
        return _fallback.apply_stencil_var(values, off, coeffs)
    padded, core, base, flat_off = _flat_plan(values.shape, off)
    fpad = np.zeros(padded, dtype=np.float64)
    fpad[core] = values
    stack = np.ascontiguousarray(
        np.stack([np.asarray(c, dtype=np.float64).ravel() for c in coeffs]))
    out = np.empty(values.size, dtype=np.float64)
    _compiled.stencil_var(fpad.ravel(), base, flat_off, stack, out)
    return out.reshape(values.shape)
