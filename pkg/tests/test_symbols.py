"""Symbols of the frozen operators: Parseval cross-checks and margin scans."""

import numpy as np
import pytest

from carlat import (
    FrozenPoint,
    SymbolGrid,
    WeightParams,
    char_set_distance,
    lower_bound_margin,
    margin_refinement,
    symbol_pi,
    symbol_pr,
    symbol_q,
)
from carlat.symbols import empirical_c1, margin_denominator, symbol_q_taylor


def frozen(d=2, tau=20.0, h=1 / 128, c_ps=0.01, x_bar=None):
    if x_bar is None:
        x_bar = (1.0,) + (0.0,) * (d - 1)
    return FrozenPoint.from_weight(x_bar, WeightParams(tau, c_ps), h)


# -- periodic-box oracle ----------------------------------------------------

def roll(a, off):
    """a(n + off) on the periodic box."""
    return np.roll(a, shift=[-int(o) for o in off], axis=range(a.ndim))


def frozen_apply_sym(f, fp, h):
    out = np.zeros_like(f)
    d = f.ndim
    for j in range(d):
        e = np.zeros(d, dtype=int)
        e[j] = 1
        out += (roll(f, e) + roll(f, -e) - 2 * f) / h ** 2
        out += fp.grad_phi[j] ** 2 / 2 * (roll(f, e) + roll(f, -e))
    return out


def frozen_apply_anti(f, fp, h):
    out = np.zeros_like(f)
    d = f.ndim
    for j in range(d):
        e = np.zeros(d, dtype=int)
        e[j] = 1
        out += -fp.grad_phi[j] / h * (roll(f, e) - roll(f, -e))
    return out


def frozen_comm_form(f, fp, h):
    d = f.ndim
    total = 0.0
    for j in range(d):
        ej = np.zeros(d, dtype=int)
        ej[j] = 1
        dj = (roll(f, ej) - roll(f, -ej)) / h
        for k in range(d):
            ek = np.zeros(d, dtype=int)
            ek[k] = 1
            dk = (roll(f, ek) - roll(f, -ek)) / h
            gjk = fp.hess_phi[j, k]
            total += gjk * np.sum(dj * dk)
            total += 0.5 * gjk * (
                (fp.grad_phi[j] + fp.grad_phi[k]) ** 2
                * np.sum(roll(f, ej) * roll(f, ek) + roll(f, -ej) * roll(f, -ek))
                - (fp.grad_phi[j] - fp.grad_phi[k]) ** 2
                * np.sum(roll(f, ej) * roll(f, -ek) + roll(f, -ej) * roll(f, ek)))
    return total


@pytest.mark.parametrize("d", [1, 2])
def test_parseval_against_fft_diagonalization(d, rng_seed):
    n = 64
    h = 1 / 128
    fp = frozen(d=d, tau=15.0, h=h)
    rng = np.random.default_rng(rng_seed)
    f = rng.standard_normal((n,) * d)
    fh = np.fft.fftn(f)
    k = np.fft.fftfreq(n, d=1.0) * 2 * np.pi / h
    xi = np.stack(np.meshgrid(*([k] * d), indexing="ij"))

    lhs_s = np.sum(frozen_apply_sym(f, fp, h) ** 2)
    rhs_s = np.sum(symbol_pr(xi, fp) ** 2 * np.abs(fh) ** 2) / n ** d
    assert abs(lhs_s - rhs_s) / lhs_s <= 1e-9

    lhs_a = np.sum(frozen_apply_anti(f, fp, h) ** 2)
    rhs_a = np.sum(symbol_pi(xi, fp) ** 2 * np.abs(fh) ** 2) / n ** d
    assert abs(lhs_a - rhs_a) / lhs_a <= 1e-9

    lhs_c = frozen_comm_form(f, fp, h)
    rhs_c = np.sum(symbol_q(xi, fp) * np.abs(fh) ** 2) / n ** d
    assert abs(lhs_c - rhs_c) / abs(lhs_c) <= 1e-9


class TestPointValues:
    def test_zero_frequency(self):
        fp = frozen()
        assert symbol_pi(np.zeros(2), fp) == 0.0
        assert symbol_pr(np.zeros(2), fp) == pytest.approx(
            float(np.sum(fp.grad_phi ** 2)), rel=1e-14)

    def test_torus_corner(self):
        fp = frozen()
        xi = np.full(2, np.pi / fp.h)
        # sin(pi)=0 up to roundoff, cos(pi)=-1
        assert symbol_pi(xi, fp) == pytest.approx(0.0, abs=1e-8)
        expected = -4 * 2 / fp.h ** 2 - float(np.sum(fp.grad_phi ** 2))
        assert symbol_pr(xi, fp) == pytest.approx(expected, rel=1e-12)

    def test_q_zero_for_linear_weight(self):
        fp = FrozenPoint((1.0, 0.0), np.array([2.0, -1.0]), np.zeros((2, 2)),
                         tau=5.0, h=1 / 64)
        xi = np.array([3.0, -7.0])
        assert symbol_q(xi, fp) == 0.0

    def test_q_at_zero_matches_gradient_square_form(self):
        fp = frozen(d=1, x_bar=(1.0,))
        got = symbol_q(np.zeros(1), fp)
        g, hess = fp.grad_phi, fp.hess_phi
        assert got == pytest.approx(float(4 * hess[0, 0] * g[0] ** 2), rel=1e-13)

    def test_q_small_frequency_taylor_refinement(self):
        # |q - taylor| at fixed xi*h scales like the remainder: halving h
        # with xi fixed shrinks the gap by about 4
        errs = []
        for h in (1 / 64, 1 / 128, 1 / 256):
            fp = frozen(h=h, tau=10.0)
            xi = np.array([3.0, 4.0])
            errs.append(abs(symbol_q(xi, fp) - symbol_q_taylor(xi, fp)))
        assert errs[1] < errs[0] and errs[2] < errs[1]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.3)

    def test_parity(self, rng_seed):
        fp = frozen()
        rng = np.random.default_rng(rng_seed)
        for _ in range(20):
            xi = rng.uniform(-np.pi / fp.h, np.pi / fp.h, size=2)
            assert symbol_pr(-xi, fp) == pytest.approx(symbol_pr(xi, fp), rel=1e-13)
            assert symbol_pi(-xi, fp) == pytest.approx(-symbol_pi(xi, fp), rel=1e-13)
            assert symbol_q(-xi, fp) == pytest.approx(symbol_q(xi, fp), rel=1e-12)


class TestCharSetDistance:
    def test_on_set_distance_zero(self):
        fp = frozen()
        rho = np.linalg.norm(fp.grad_phi)
        ghit = fp.grad_phi / rho
        perp = np.array([-ghit[1], ghit[0]])
        assert char_set_distance(rho * perp, fp) == pytest.approx(0.0, abs=1e-12)

    def test_distance_from_origin(self):
        fp = frozen()
        rho = np.linalg.norm(fp.grad_phi)
        assert char_set_distance(np.zeros(2), fp) == pytest.approx(rho, rel=1e-14)

    def test_parallel_point_against_sampled_minimization(self):
        fp = frozen(d=3, x_bar=(0.8, 0.4, -0.2))
        rho = float(np.linalg.norm(fp.grad_phi))
        xi = fp.grad_phi.copy()  # parallel to the gradient, norm rho
        got = char_set_distance(xi, fp)
        # oracle: dense sampling of the equator circle
        g = fp.grad_phi / rho
        a = np.array([1.0, 0.0, 0.0])
        if abs(g @ a) > 0.9:
            a = np.array([0.0, 1.0, 0.0])
        u = np.cross(g, a)
        u /= np.linalg.norm(u)
        v = np.cross(g, u)
        angles = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
        pts = rho * (np.outer(np.cos(angles), u) + np.outer(np.sin(angles), v))
        oracle = np.linalg.norm(pts - xi, axis=1).min()
        assert got == pytest.approx(oracle, rel=1e-7)
        assert got == pytest.approx(np.sqrt(2.0) * rho, rel=1e-12)

    def test_random_points_against_sampled_minimization(self, rng_seed):
        fp = frozen()
        rho = float(np.linalg.norm(fp.grad_phi))
        g = fp.grad_phi / rho
        perp = np.array([-g[1], g[0]])
        rng = np.random.default_rng(rng_seed)
        # d=2: the characteristic set is the two points +-rho*perp
        for _ in range(50):
            xi = rng.uniform(-3 * rho, 3 * rho, size=2)
            oracle = min(np.linalg.norm(xi - rho * perp), np.linalg.norm(xi + rho * perp))
            assert char_set_distance(xi, fp) == pytest.approx(oracle, rel=1e-12)

    def test_one_dimensional_set_is_empty(self):
        fp = frozen(d=1, x_bar=(1.0,))
        assert char_set_distance(np.array([3.0]), fp) == np.inf

    def test_degenerate_point_rejected(self):
        fp = FrozenPoint((1.0, 0.0), np.zeros(2), np.zeros((2, 2)), tau=2.0, h=0.1)
        with pytest.raises(ValueError, match="degenerate frozen point"):
            char_set_distance(np.ones(2), fp)


class TestMarginScan:
    def test_positive_margin_below_critical_coupling(self):
        # commutator coupling below the pseudoconvexity strength: the scan
        # stays positive and successive refinements agree
        fp = frozen()
        scans, converged = margin_refinement(fp, 0.0025, SymbolGrid(2, fp.h, 256),
                                             steps=2)
        assert converged
        assert scans[-1].min_margin > 0

    def test_characteristic_point_without_commutator(self):
        # at a constructed characteristic frequency with c0 = 0 both symbols
        # nearly vanish: the margin there is tiny compared to tau^4/denominator
        fp = frozen()
        rho = np.linalg.norm(fp.grad_phi)
        g = fp.grad_phi / rho
        xi = rho * np.array([-g[1], g[0]])
        num = symbol_pr(xi, fp) ** 2 + symbol_pi(xi, fp) ** 2
        local = num / margin_denominator(xi, fp)
        assert local <= 1e-4  # leading orders cancel; only h-corrections remain

    def test_monotone_degradation_towards_limiting_weight(self):
        c0 = 0.0005
        margins = {}
        for c_ps in (0.01, 0.001, 0.0):
            fp = frozen(c_ps=c_ps)
            scan = lower_bound_margin(fp, c0, SymbolGrid(2, fp.h, 512))
            margins[c_ps] = scan.min_margin
        assert margins[0.01] > margins[0.001] > margins[0.0]
        assert margins[0.0] >= -1e-5

    def test_limiting_weight_neighborhood_collapses_under_refinement(self):
        # nested refinements can only lower the minimum; for the limiting
        # weight it collapses to 0, which the grid approaches as it starts
        # resolving the characteristic circle
        fp = frozen(c_ps=0.0)
        mins = []
        for res in (128, 256, 512, 1024, 2048):
            scan = lower_bound_margin(fp, 0.0, SymbolGrid(2, fp.h, res), gamma0=0.2)
            near = scan.regions["characteristic_neighborhood"]
            assert near.count > 0
            mins.append(near.min_margin)
        assert all(a >= b for a, b in zip(mins, mins[1:]))
        assert mins[-1] >= 0.0  # c0 = 0 keeps the numerator a sum of squares
        assert mins[-1] <= 1e-5

    def test_high_frequency_ellipticity(self):
        for x_bar in ((1.0, 0.0), (0.6, 0.5), (0.0, 1.4)):
            fp = frozen(x_bar=x_bar)
            grid = SymbolGrid(2, fp.h, 256)
            c1 = empirical_c1(fp, grid)
            assert c1 is not None
            xi = grid.mesh()
            norm = np.sqrt((xi ** 2).sum(axis=0))
            mask = norm >= c1 * fp.tau
            ratio = symbol_pr(xi, fp)[mask] ** 2 / norm[mask] ** 4
            assert ratio.min() >= 1.0 / 256.0

    def test_region_breakdown_covers_grid(self):
        fp = frozen()
        grid = SymbolGrid(2, fp.h, 128)
        scan = lower_bound_margin(fp, 0.0025, grid)
        total = sum(stat.count for stat in scan.regions.values())
        assert total == grid.resolution ** 2
        assert scan.c1_split is not None

    def test_scan_deterministic(self):
        fp = frozen()
        grid = SymbolGrid(2, fp.h, 128)
        a = lower_bound_margin(fp, 0.0025, grid)
        b = lower_bound_margin(fp, 0.0025, grid)
        assert a.min_margin == b.min_margin
        assert a.argmin_xi == b.argmin_xi


class TestFrozenPoint:
    def test_from_weight_consistency(self):
        from carlat import phi_eval

        params = WeightParams(12.0, 0.01)
        fp = FrozenPoint.from_weight((0.9, 0.7), params, 1 / 64)
        ev = phi_eval(np.array([0.9, 0.7]), params)
        np.testing.assert_allclose(fp.grad_phi, ev.gradient, rtol=1e-12)
        np.testing.assert_allclose(fp.hess_phi, ev.hessian, rtol=1e-12)

    def test_annulus_enforced(self):
        with pytest.raises(ValueError, match="annulus"):
            FrozenPoint.from_weight((3.0, 0.0), WeightParams(2.0), 1 / 32)
        with pytest.raises(ValueError, match="annulus"):
            FrozenPoint.from_weight((0.1, 0.0), WeightParams(2.0), 1 / 32)

    def test_asymmetric_hessian_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            FrozenPoint((1.0, 0.0), np.ones(2), np.array([[1.0, 2.0], [0.0, 1.0]]),
                        tau=2.0, h=0.1)
