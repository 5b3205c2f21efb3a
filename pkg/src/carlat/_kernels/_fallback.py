"""NumPy implementation of the stencil kernels (slice-and-accumulate)."""

import numpy as np


def _slices(shape, off):
    """Slice pair (dst, src) so that out[dst] reads f[src] = f(n + off).

    Returns None when the offset moves everything outside the array.
    """
    dst, src = [], []
    for o, size in zip(off, shape):
        o = int(o)
        if abs(o) >= size:
            return None
        if o >= 0:
            dst.append(slice(0, size - o))
            src.append(slice(o, size))
        else:
            dst.append(slice(-o, size))
            src.append(slice(0, size + o))
    return tuple(dst), tuple(src)


def apply_stencil_const(values, offsets, weights):
    out = np.zeros_like(values)
    for off, w in zip(offsets, weights):
        pair = _slices(values.shape, off)
        if pair is None:
            continue
        dst, src = pair
        out[dst] += w * values[src]
    return out


def apply_stencil_var(values, offsets, coeffs):
    out = np.zeros_like(values)
    for off, c in zip(offsets, coeffs):
        pair = _slices(values.shape, off)
        if pair is None:
            continue
        dst, src = pair
        out[dst] += c[dst] * values[src]
    return out
