"""Fourier symbols of the frozen-coefficient operators and margin scans.

Freezing the weight derivatives at a base point turns the symmetric and
antisymmetric parts into constant-coefficient stencils diagonalized by the
lattice Fourier transform, with real symbols (theta_j = h xi_j)

    p_r(xi) = sum_j [-4 h^-2 sin^2(theta_j/2) + g_j^2 cos(theta_j)]
    p_i(xi) = sum_j 2 g_j h^-1 sin(theta_j)

where g = grad phi(x_bar), and the commutator quadratic form has symbol

    q(xi) = sum_jk [4 h^-2 sin(theta_j) sin(theta_k) H_jk
                    + H_jk ((g_j+g_k)^2 cos(theta_j - theta_k)
                            - (g_j-g_k)^2 cos(theta_j + theta_k))]

with H = hess phi(x_bar).  The scan of

    margin(xi) = (p_r^2 + p_i^2 + c0 tau q)
                 / (tau^4 + tau^2 sum_j h^-2 sin^2 + sum_j h^-4 sin^4)

over the frequency torus measures how much ellipticity plus commutator
positivity survive; its minimum sits near the joint characteristic set
{|xi| = |g|, g . xi = 0}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .weight import WeightParams, phi_eval

FREQUENCY_AXES_MIN = 8


@dataclass(frozen=True, eq=False)
class FrozenPoint:
    """Base point with frozen weight gradient/Hessian plus (tau, h)."""

    x_bar: tuple
    grad_phi: np.ndarray
    hess_phi: np.ndarray
    tau: float
    h: float

    def __post_init__(self):
        x = tuple(float(c) for c in self.x_bar)
        g = np.asarray(self.grad_phi, dtype=np.float64)
        hs = np.asarray(self.hess_phi, dtype=np.float64)
        d = len(x)
        if g.shape != (d,) or hs.shape != (d, d):
            raise ValueError("gradient/Hessian shapes do not match the point")
        if not np.allclose(hs, hs.T, rtol=0, atol=1e-14):
            raise ValueError("Hessian must be symmetric")
        if not (self.tau > 0 and self.h > 0):
            raise ValueError("tau and h must be positive")
        object.__setattr__(self, "x_bar", x)
        object.__setattr__(self, "grad_phi", g)
        object.__setattr__(self, "hess_phi", hs)

    @property
    def d(self) -> int:
        return len(self.x_bar)

    @classmethod
    def from_weight(cls, x_bar, params: WeightParams, h: float) -> "FrozenPoint":
        x = np.asarray(x_bar, dtype=np.float64)
        r = float(np.linalg.norm(x))
        if not 0.5 < r < 2.0:
            raise ValueError("base point must lie in the annulus 1/2 < |x| < 2")
        ev = phi_eval(x, params)
        return cls(tuple(x), ev.gradient, ev.hessian, params.tau, h)


@dataclass(frozen=True)
class SymbolGrid:
    """Uniform frequency grid covering the torus (-pi/h, pi/h]^d."""

    d: int
    h: float
    resolution: int = 64

    def __post_init__(self):
        if self.resolution < FREQUENCY_AXES_MIN:
            raise ValueError(f"resolution must be at least {FREQUENCY_AXES_MIN}")

    def axis(self) -> np.ndarray:
        step = 2 * np.pi / (self.h * self.resolution)
        return -np.pi / self.h + step * np.arange(1, self.resolution + 1)

    def mesh(self) -> np.ndarray:
        """Frequency points, shape (d,) + (resolution,)*d."""
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"))

    def refined(self, factor: int = 2) -> "SymbolGrid":
        return SymbolGrid(self.d, self.h, self.resolution * factor)


def _bc(vec, xi):
    """Broadcast a length-d vector against a (d,)+grid frequency array."""
    return np.asarray(vec).reshape((-1,) + (1,) * (np.ndim(xi) - 1))


def symbol_pr(xi, fp: FrozenPoint):
    """Symbol of the frozen symmetric part."""
    xi = np.asarray(xi, dtype=np.float64)
    th = fp.h * xi
    g2 = _bc(fp.grad_phi ** 2, xi)
    out = (-4.0 / fp.h ** 2 * np.sin(th / 2) ** 2 + g2 * np.cos(th)).sum(axis=0)
    return out if np.ndim(out) else float(out)


def symbol_pi(xi, fp: FrozenPoint):
    """Symbol of i times the frozen antisymmetric part."""
    xi = np.asarray(xi, dtype=np.float64)
    th = fp.h * xi
    g = _bc(fp.grad_phi, xi)
    out = (2.0 * g / fp.h * np.sin(th)).sum(axis=0)
    return out if np.ndim(out) else float(out)


def symbol_q(xi, fp: FrozenPoint):
    """Exact trigonometric symbol of the frozen commutator form."""
    xi = np.asarray(xi, dtype=np.float64)
    th = fp.h * xi
    g = fp.grad_phi
    hess = fp.hess_phi
    out = np.zeros(th.shape[1:])
    for j in range(fp.d):
        for k in range(fp.d):
            out += 4.0 / fp.h ** 2 * np.sin(th[j]) * np.sin(th[k]) * hess[j, k]
            out += hess[j, k] * ((g[j] + g[k]) ** 2 * np.cos(th[j] - th[k])
                                 - (g[j] - g[k]) ** 2 * np.cos(th[j] + th[k]))
    return out if np.ndim(out) else float(out)


def symbol_q_taylor(xi, fp: FrozenPoint):
    """Leading-order form 4 (xi.H xi + g.H g), the small-(h xi) limit of q."""
    xi = np.asarray(xi, dtype=np.float64)
    g = fp.grad_phi
    hess = fp.hess_phi
    quad = np.einsum("i...,ij,j...->...", xi, hess, xi)
    out = 4.0 * (quad + float(g @ hess @ g))
    return out if np.ndim(out) else float(out)


def char_set_distance(xi, fp: FrozenPoint):
    """Euclidean distance to the equator set {|z| = |g|, g . z = 0}.

    Splitting xi into components parallel and perpendicular to g, the
    nearest point of the set is the perpendicular direction rescaled to
    radius |g|, so the distance is hypot(parallel, |perp| - |g|); for xi on
    the g axis every equator point is nearest, at hypot(parallel, |g|),
    which the same expression yields.  In one dimension the set is empty.
    """
    rho = float(np.linalg.norm(fp.grad_phi))
    if rho == 0.0:
        raise ValueError("degenerate frozen point")
    xi = np.asarray(xi, dtype=np.float64)
    if fp.d == 1:
        shape = xi.shape[1:] if xi.ndim > 1 else ()
        out = np.full(shape, np.inf)
        return out if shape else float("inf")
    ghat = _bc(fp.grad_phi / rho, xi)
    par = (xi * ghat).sum(axis=0)
    # vector residual instead of sqrt(|xi|^2 - par^2): no cancellation blowup
    # for xi nearly parallel to the gradient
    perp = np.sqrt(((xi - par * ghat) ** 2).sum(axis=0))
    out = np.hypot(par, perp - rho)
    return out if np.ndim(out) else float(out)


def margin_denominator(xi, fp: FrozenPoint):
    th = fp.h * np.asarray(xi, dtype=np.float64)
    s2 = np.sin(th) ** 2
    return (fp.tau ** 4 + fp.tau ** 2 / fp.h ** 2 * s2.sum(axis=0)
            + (s2 ** 2).sum(axis=0) / fp.h ** 4)


@dataclass(frozen=True)
class RegionStat:
    min_margin: float | None
    argmin_xi: tuple | None
    count: int


@dataclass(frozen=True)
class MarginScan:
    """Result of a full-torus margin scan."""

    min_margin: float
    argmin_xi: tuple
    resolution: int
    c0: float
    gamma0: float
    c1_split: float | None
    regions: dict


def scan_table(fp: FrozenPoint, grid: SymbolGrid, c0: float):
    """Flattened per-frequency table used by the CSV emitter and the scans."""
    xi = grid.mesh()
    pr = symbol_pr(xi, fp)
    pi = symbol_pi(xi, fp)
    q = symbol_q(xi, fp)
    margin = (pr ** 2 + pi ** 2 + c0 * fp.tau * q) / margin_denominator(xi, fp)
    return {
        "xi": xi.reshape(fp.d, -1),
        "p_r": pr.ravel(),
        "p_i": pi.ravel(),
        "q": q.ravel(),
        "margin": margin.ravel(),
    }


def empirical_c1(fp: FrozenPoint, grid: SymbolGrid,
                 candidates=tuple(range(1, 41)),
                 floor: float = 1.0 / 256.0) -> float | None:
    """Smallest region-split constant with p_r^2 >= floor * |xi|^4 beyond C1*tau.

    The floor keeps headroom for absorbing the commutator term; bare
    positivity right at the sign change would be useless for the split.
    Returns None when no candidate achieves it on a nonempty region.
    """
    xi = grid.mesh()
    norm = np.sqrt((xi ** 2).sum(axis=0))
    pr2 = symbol_pr(xi, fp) ** 2
    for c1 in candidates:
        mask = norm >= c1 * fp.tau
        if not mask.any():
            return None
        if float((pr2[mask] / norm[mask] ** 4).min()) >= floor:
            return float(c1)
    return None


def lower_bound_margin(fp: FrozenPoint, c0: float, grid: SymbolGrid,
                       gamma0: float = 0.05,
                       c1_split: float | None = None) -> MarginScan:
    """Minimize the normalized symbol margin over the frequency grid.

    The breakdown reports the minimum separately over the high-frequency
    elliptic region |xi| >= C1 tau, the neighborhood of the joint
    characteristic set (distance <= gamma0 tau), and the remaining
    low-frequency region.  Ties resolve to the lexicographically smallest
    grid index (C-order argmin).
    """
    xi = grid.mesh()
    pr = symbol_pr(xi, fp)
    pi = symbol_pi(xi, fp)
    q = symbol_q(xi, fp)
    margin = (pr ** 2 + pi ** 2 + c0 * fp.tau * q) / margin_denominator(xi, fp)

    flat = np.argmin(margin.ravel())
    argmin = tuple(float(v) for v in xi.reshape(fp.d, -1)[:, flat])

    if c1_split is None:
        c1_split = empirical_c1(fp, grid)
    norm = np.sqrt((xi ** 2).sum(axis=0))
    try:
        dist = char_set_distance(xi, fp)
    except ValueError:
        dist = np.full(margin.shape, np.inf)
    high = (norm >= c1_split * fp.tau) if c1_split is not None else np.zeros(margin.shape, bool)
    near = (dist <= gamma0 * fp.tau) & ~high
    low = ~high & ~near

    regions = {}
    for name, mask in (("high_frequency", high),
                       ("characteristic_neighborhood", near),
                       ("low_frequency", low)):
        if mask.any():
            vals = np.where(mask, margin, np.inf)
            j = np.argmin(vals.ravel())
            regions[name] = RegionStat(
                float(vals.ravel()[j]),
                tuple(float(v) for v in xi.reshape(fp.d, -1)[:, j]),
                int(mask.sum()))
        else:
            regions[name] = RegionStat(None, None, 0)

    return MarginScan(float(margin.ravel()[flat]), argmin, grid.resolution,
                      c0, gamma0, c1_split, regions)


def margin_refinement(fp: FrozenPoint, c0: float, base: SymbolGrid,
                      steps: int = 2, rel_tol: float = 0.05):
    """Successive grid refinements of the margin scan.

    Returns the list of scans and whether the last two minima agree within
    rel_tol (relative to the larger magnitude).
    """
    scans = [lower_bound_margin(fp, c0, base)]
    grid = base
    for _ in range(steps):
        grid = grid.refined()
        scans.append(lower_bound_margin(fp, c0, grid))
    a, b = scans[-2].min_margin, scans[-1].min_margin
    scale = max(abs(a), abs(b), 1e-300)
    return scans, abs(a - b) / scale <= rel_tol
