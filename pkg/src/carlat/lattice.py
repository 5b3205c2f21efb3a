"""Lattice geometry, difference operators, and the discrete Schrodinger operator.

Functions live on a finite index box of the lattice (h*Z)^d and are extended
by zero outside it.  All difference operators are UNSCALED (no 1/h factors);
every h^-1 or h^-2 appears explicitly at the call site, so the Schrodinger
operator reads

    P_h f(n) = h^-2 Lap f(n) + h^-1 sum_j B_j(n) (f(n+h e_j) - f(n)) + V(n) f(n)

with Lap f(n) = sum_j f(n+h e_j) + f(n-h e_j) - 2 f(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import apply_stencil_const, apply_stencil_var


@dataclass(frozen=True)
class LatticeSpec:
    """Dimension, spacing and inclusive index box of a finite lattice patch.

    The physical coordinate of index n is h*n componentwise.
    """

    d: int
    h: float
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if not self.h > 0:
            raise ValueError("spacing h must be positive")
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != self.d or len(hi) != self.d:
            raise ValueError("box endpoints must have length d")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("box must satisfy lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def shape(self):
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def n_sites(self):
        return int(np.prod(self.shape))

    def indices(self):
        """Multi-index array of shape (d,) + shape."""
        grids = np.indices(self.shape, dtype=np.int64)
        for a in range(self.d):
            grids[a] += self.lo[a]
        return grids

    def coords(self):
        """Physical coordinates h*n, shape (d,) + shape."""
        return self.indices() * self.h

    def radii(self):
        """Euclidean distance of every site from the origin."""
        return np.sqrt((self.coords() ** 2).sum(axis=0))

    def covers(self, other: "LatticeSpec") -> bool:
        return (self.d == other.d and self.h == other.h
                and all(a <= b for a, b in zip(self.lo, other.lo))
                and all(a >= b for a, b in zip(self.hi, other.hi)))

    @classmethod
    def ball_box(cls, d: int, h: float, radius: float, pad_sites: int = 0):
        """Smallest box containing the ball of the given radius, plus padding."""
        m = int(np.floor(radius / h)) + pad_sites
        return cls(d, h, (-m,) * d, (m,) * d)


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """Real values on the sites of a box; zero outside it by convention."""

    spec: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.spec.shape:
            raise ValueError("values shape does not match the lattice box")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "LatticeFunction":
        return LatticeFunction(self.spec, values)

    def at(self, n) -> float:
        """Value at multi-index n (zero outside the box)."""
        pos = tuple(int(c) - l for c, l in zip(n, self.spec.lo))
        if any(p < 0 or p >= s for p, s in zip(pos, self.spec.shape)):
            return 0.0
        return float(self.values[pos])

    @classmethod
    def zeros(cls, spec: LatticeSpec) -> "LatticeFunction":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def from_callable(cls, spec: LatticeSpec, fn) -> "LatticeFunction":
        """Sample fn(x) with x the (d,)+shape coordinate array."""
        return cls(spec, np.asarray(fn(spec.coords()), dtype=np.float64))


@dataclass(frozen=True)
class BallRegion:
    """Open Euclidean ball; a site n belongs to it iff |h*n - center| < radius."""

    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def mask(self, spec: LatticeSpec) -> np.ndarray:
        x = spec.coords()
        dist2 = np.zeros(spec.shape)
        for a in range(spec.d):
            dist2 += (x[a] - self.center[a]) ** 2
        return dist2 < self.radius ** 2

    @classmethod
    def origin(cls, d: int, radius: float) -> "BallRegion":
        return cls((0.0,) * d, radius)


@dataclass(frozen=True)
class AnnularRegion:
    """Open annulus outer \\ closure(inner), both balls around a common center."""

    inner: BallRegion
    outer: BallRegion

    def __post_init__(self):
        if self.inner.center != self.outer.center:
            raise ValueError("annulus balls must share a center")
        if not self.inner.radius < self.outer.radius:
            raise ValueError("inner radius must be smaller than outer radius")

    def mask(self, spec: LatticeSpec) -> np.ndarray:
        return self.outer.mask(spec) & ~self.inner.mask(spec)

    @property
    def width(self) -> float:
        return self.outer.radius - self.inner.radius

    @classmethod
    def origin(cls, d: int, r_in: float, r_out: float) -> "AnnularRegion":
        return cls(BallRegion.origin(d, r_in), BallRegion.origin(d, r_out))


@dataclass(frozen=True, eq=False)
class FieldData:
    """Potential V and tensor field B = (B_1, ..., B_d) entering P_h."""

    V: LatticeFunction
    B: tuple

    def __post_init__(self):
        B = tuple(self.B)
        if len(B) != self.V.spec.d:
            raise ValueError("B must have one component per direction")
        for b in B:
            if b.spec != self.V.spec:
                raise ValueError("field components must share one lattice spec")
        object.__setattr__(self, "B", B)

    @property
    def spec(self) -> LatticeSpec:
        return self.V.spec

    @property
    def sup_v(self) -> float:
        return float(np.abs(self.V.values).max())

    @property
    def sup_b(self) -> float:
        return max(float(np.abs(b.values).max()) for b in self.B)

    @classmethod
    def zero(cls, spec: LatticeSpec) -> "FieldData":
        z = LatticeFunction.zeros(spec)
        return cls(z, (z,) * spec.d)


def unit_offset(d: int, j: int, sign: int = 1) -> np.ndarray:
    off = np.zeros(d, dtype=np.int64)
    off[j - 1] = sign
    return off


def _check_direction(spec: LatticeSpec, j: int):
    if not 1 <= j <= spec.d:
        raise ValueError("direction out of range")


def shift_values(values: np.ndarray, off) -> np.ndarray:
    """values(n + off) with zero extension."""
    out = np.zeros_like(values)
    dst, src = [], []
    for o, size in zip(off, values.shape):
        o = int(o)
        if abs(o) >= size:
            return out
        if o >= 0:
            dst.append(slice(0, size - o))
            src.append(slice(o, size))
        else:
            dst.append(slice(-o, size))
            src.append(slice(0, size + o))
    out[tuple(dst)] = values[tuple(src)]
    return out


def diff(f: LatticeFunction, j: int, mode: str = "forward") -> LatticeFunction:
    """Unscaled difference in direction j (1-based).

    forward:   f(n+h e_j) - f(n)
    backward:  f(n) - f(n-h e_j)
    symmetric: (f(n+h e_j) - f(n-h e_j)) / 2
    """
    _check_direction(f.spec, j)
    d = f.spec.d
    e = unit_offset(d, j)
    if mode == "forward":
        offsets, weights = np.stack([e, 0 * e]), [1.0, -1.0]
    elif mode == "backward":
        offsets, weights = np.stack([0 * e, -e]), [1.0, -1.0]
    elif mode == "symmetric":
        offsets, weights = np.stack([e, -e]), [0.5, -0.5]
    else:
        raise ValueError(f"unknown difference mode {mode!r}")
    return f.with_values(apply_stencil_const(f.values, offsets, weights))


def laplacian(f: LatticeFunction) -> LatticeFunction:
    """Unscaled discrete Laplacian sum_j f(n+h e_j) + f(n-h e_j) - 2 f(n)."""
    d = f.spec.d
    offsets = [np.zeros(d, dtype=np.int64)]
    weights = [-2.0 * d]
    for j in range(1, d + 1):
        offsets += [unit_offset(d, j), -unit_offset(d, j)]
        weights += [1.0, 1.0]
    return f.with_values(apply_stencil_const(f.values, np.stack(offsets), weights))


def sym_diff_sum(f: LatticeFunction) -> LatticeFunction:
    """Summed symmetric difference sum_j (f(n+h e_j) - f(n-h e_j)) / 2."""
    d = f.spec.d
    offsets, weights = [], []
    for j in range(1, d + 1):
        offsets += [unit_offset(d, j), -unit_offset(d, j)]
        weights += [0.5, -0.5]
    return f.with_values(apply_stencil_const(f.values, np.stack(offsets), weights))


def _fields_on(fields: FieldData, spec: LatticeSpec):
    """Restrict field arrays to the box of spec; fields must cover it."""
    fs = fields.spec
    if fs.d != spec.d or fs.h != spec.h or not fs.covers(spec):
        raise ValueError("field coverage")
    sl = tuple(slice(a - b, a - b + s)
               for a, b, s in zip(spec.lo, fs.lo, spec.shape))
    return fields.V.values[sl], [b.values[sl] for b in fields.B]


def schrodinger_apply(f: LatticeFunction, fields: FieldData) -> LatticeFunction:
    """P_h f with the h^-2 and h^-1 scalings applied here."""
    spec = f.spec
    h = spec.h
    v, bs = _fields_on(fields, spec)
    out = apply_stencil_const(
        f.values,
        np.stack([np.zeros(spec.d, dtype=np.int64)]
                 + [s * unit_offset(spec.d, j)
                    for j in range(1, spec.d + 1) for s in (1, -1)]),
        [-2.0 * spec.d / h ** 2] + [1.0 / h ** 2] * (2 * spec.d),
    )
    for j in range(1, spec.d + 1):
        b = bs[j - 1]
        if np.any(b):
            e = unit_offset(spec.d, j)
            out += apply_stencil_var(f.values, np.stack([e, 0 * e]), [b / h, -b / h])
    out += v * f.values
    return f.with_values(out)


def l2_norm(f: LatticeFunction, region: BallRegion | AnnularRegion | None = None) -> float:
    """sqrt(h^d * sum of f^2 over the region), whole box when region is None."""
    if region is None:
        total = float((f.values ** 2).sum())
    else:
        total = float((f.values[region.mask(f.spec)] ** 2).sum())
    return float(np.sqrt(f.spec.h ** f.spec.d * total))


def inner_product(f: LatticeFunction, g: LatticeFunction) -> float:
    """h^d weighted dot product; functions vanish outside their boxes."""
    fs, gs = f.spec, g.spec
    if fs.d != gs.d or fs.h != gs.h:
        raise ValueError("lattice spec mismatch")
    lo = tuple(max(a, b) for a, b in zip(fs.lo, gs.lo))
    hi = tuple(min(a, b) for a, b in zip(fs.hi, gs.hi))
    if any(a > b for a, b in zip(lo, hi)):
        return 0.0
    slf = tuple(slice(a - b, a - b + (c - a + 1)) for a, b, c in zip(lo, fs.lo, hi))
    slg = tuple(slice(a - b, a - b + (c - a + 1)) for a, b, c in zip(lo, gs.lo, hi))
    return float(fs.h ** fs.d * np.sum(f.values[slf] * g.values[slg]))


def coarsen(f: LatticeFunction, m: int) -> LatticeFunction:
    """Restriction to the sublattice (m h Z)^d, reindexed with spacing m*h."""
    if m < 1:
        raise ValueError("coarsening factor must be a positive integer")
    spec = f.spec
    if m * spec.h > 2:
        raise ValueError("coarse spacing m*h exceeds the admissible range (m*h <= 2)")
    lo_c = tuple(int(np.ceil(a / m)) for a in spec.lo)
    hi_c = tuple(int(np.floor(b / m)) for b in spec.hi)
    if any(a > b for a, b in zip(lo_c, hi_c)):
        raise ValueError("empty coarse lattice")
    sl = tuple(slice(m * a - l, m * b - l + 1, m)
               for a, b, l in zip(lo_c, hi_c, spec.lo))
    return LatticeFunction(LatticeSpec(spec.d, m * spec.h, lo_c, hi_c),
                           f.values[sl].copy())


def stretch(f: LatticeFunction, m: int) -> LatticeFunction:
    """Same index values reinterpreted on the lattice with spacing m*h.

    This is the rescaling u_m(x) = u(x/m): the value at physical point m*h*n
    of the result is the value of f at h*n.
    """
    if m < 1:
        raise ValueError("stretch factor must be a positive integer")
    spec = f.spec
    return LatticeFunction(LatticeSpec(spec.d, m * spec.h, spec.lo, spec.hi),
                           f.values.copy())


def translate(f: LatticeFunction, v) -> LatticeFunction:
    """Shift the box by the lattice vector v: g(n) = f(n - v) on the moved box."""
    v = tuple(int(c) for c in v)
    spec = f.spec
    return LatticeFunction(
        LatticeSpec(spec.d, spec.h,
                    tuple(a + b for a, b in zip(spec.lo, v)),
                    tuple(a + b for a, b in zip(spec.hi, v))),
        f.values.copy())


def support_mask(f: LatticeFunction) -> np.ndarray:
    return f.values != 0.0


def support_margin(f: LatticeFunction) -> int:
    """Smallest index distance from a nonzero site to the box boundary."""
    nz = np.nonzero(f.values)
    if nz[0].size == 0:
        return min(f.spec.shape)
    margin = None
    for a, size in enumerate(f.spec.shape):
        m = int(min(nz[a].min(), size - 1 - nz[a].max()))
        margin = m if margin is None else min(margin, m)
    return margin
