"""The convexified logarithmic weight and its pseudoconvexity margin.

The radial profile is

    varphi(t) = -log t + c_ps * (log t * arctan(log t) - log(1 + log^2 t) / 2)

and the full weight is phi(x) = tau * varphi(|x|).  For c_ps = 0 this is the
limiting weight -tau*log|x| whose pseudoconvexity degenerates; a small
c_ps > 0 restores a positive margin

    (varphi')^2 (varphi'' + varphi'/t)
        = c_ps * (-1 + c_ps*arctan(log t))^2 / (t^4 (1 + log^2 t)).

Closed-form derivatives (s = log t):

    varphi'(t)  = (-1 + c_ps*arctan(s)) / t
    varphi''(t) = (1 - c_ps*arctan(s) + c_ps/(1+s^2)) / t^2

both validated against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_C_PS = 0.01


@dataclass(frozen=True)
class WeightParams:
    """Large parameter tau and convexification strength c_ps."""

    tau: float
    c_ps: float = DEFAULT_C_PS

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError("tau must exceed 1")
        if not self.c_ps >= 0:
            raise ValueError("c_ps must be nonnegative")


@dataclass(frozen=True, eq=False)
class WeightEval:
    """Value, gradient and Hessian of phi = tau*varphi(|x|) at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def varphi(t, order: int = 0, c_ps: float = DEFAULT_C_PS):
    """Radial profile or its first or second derivative; t may be an array."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise ValueError("radial argument must be positive")
    s = np.log(t)
    if order == 0:
        out = -s + c_ps * (s * np.arctan(s) - 0.5 * np.log1p(s ** 2))
    elif order == 1:
        out = (-1.0 + c_ps * np.arctan(s)) / t
    elif order == 2:
        out = (1.0 - c_ps * np.arctan(s) + c_ps / (1.0 + s ** 2)) / t ** 2
    else:
        raise ValueError("order must be 0, 1 or 2")
    return out if out.ndim else float(out)


def phi_eval(x, params: WeightParams) -> WeightEval:
    """Weight value, gradient and Hessian at the point x (away from 0).

    gradient = tau*varphi'(r) x/r and the Hessian has eigenvalue
    tau*varphi''(r) on x/r and tau*varphi'(r)/r on its orthogonal complement.
    """
    x = np.asarray(x, dtype=np.float64)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise ValueError("weight singularity at the origin")
    xh = x / r
    d1 = varphi(r, 1, params.c_ps)
    d2 = varphi(r, 2, params.c_ps)
    grad = params.tau * d1 * xh
    hess = params.tau * (d1 / r * np.eye(x.size)
                         + (d2 - d1 / r) * np.outer(xh, xh))
    return WeightEval(params.tau * varphi(r, 0, params.c_ps), grad, hess)


def pseudoconvexity_margin(x, c_ps: float = DEFAULT_C_PS) -> float:
    """Margin (varphi')^2 (varphi'' + varphi'/|x|) at tau = 1.

    Evaluated through the equivalent closed form
    c_ps*(-1 + c_ps*arctan(log|x|))^2 / (|x|^4 (1+log^2|x|)), which avoids
    the cancellation of the derivative form (and is exactly c_ps at |x|=1).
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise ValueError("weight singularity at the origin")
    return margin_closed_form(r, c_ps)


def margin_closed_form(r, c_ps: float = DEFAULT_C_PS):
    r = np.asarray(r, dtype=np.float64)
    s = np.log(r)
    out = c_ps * (-1.0 + c_ps * np.arctan(s)) ** 2 / (r ** 4 * (1.0 + s ** 2))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Dense-sample check of varphi' < 0 and margin > 0 on an annulus."""

    ok: bool
    min_margin: float
    argmin_margin: float
    max_slope: float
    argmax_slope: float
    n_samples: int
    failures: tuple

    def raise_if_failed(self):
        if not self.ok:
            raise ValueError(
                "inadmissible weight parameters: " + "; ".join(self.failures))


def admissibility_check(params: WeightParams, annulus=(0.25, 4.0),
                        n_samples: int = 4096) -> AdmissibilityReport:
    """Sample the annulus and verify monotonicity and margin positivity."""
    r_in, r_out = annulus
    if not 0 < r_in < r_out:
        raise ValueError("annulus must satisfy 0 < r_in < r_out")
    rs = np.linspace(r_in, r_out, n_samples)
    slope = varphi(rs, 1, params.c_ps)
    margin = margin_closed_form(rs, params.c_ps)
    i_m = int(np.argmin(margin))
    i_s = int(np.argmax(slope))
    failures = []
    if margin[i_m] <= 0:
        failures.append(f"margin {margin[i_m]:.3e} <= 0 at radius {rs[i_m]:.6f}")
    if slope[i_s] >= 0:
        failures.append(f"varphi' {slope[i_s]:.3e} >= 0 at radius {rs[i_s]:.6f}")
    return AdmissibilityReport(
        ok=not failures,
        min_margin=float(margin[i_m]), argmin_margin=float(rs[i_m]),
        max_slope=float(slope[i_s]), argmax_slope=float(rs[i_s]),
        n_samples=n_samples, failures=tuple(failures))


def weight_constants(c_ps: float = DEFAULT_C_PS):
    """Convexity exponents c1 = |varphi(3/2) - varphi(1)|, c2 = varphi(1/4) - varphi(1)
    and the interpolation exponent alpha = c2/(c1+c2)."""
    base = varphi(1.0, 0, c_ps)
    c1 = abs(varphi(1.5, 0, c_ps) - base)
    c2 = varphi(0.25, 0, c_ps) - base
    return c1, c2, c2 / (c1 + c2)
