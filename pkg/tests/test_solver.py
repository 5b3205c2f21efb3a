"""Dirichlet solves, closed-form harmonic polynomials, seeded bumps."""

import numpy as np
import pytest

from carlat import (
    AnnularRegion,
    DirichletProblem,
    FieldData,
    LatticeFunction,
    LatticeSpec,
    SolverError,
    dirichlet_solve,
    harmonic_polynomial,
    laplacian,
    random_bump,
    residual,
)


def ball_spec(d, h, radius=2.0):
    return LatticeSpec.ball_box(d, h, radius, pad_sites=2)


class TestHarmonicPolynomials:
    def test_exact_integer_harmonicity(self):
        # h = 1 keeps all values integral, so the cancellations are exact
        spec = LatticeSpec(2, 1.0, (-6, -6), (6, 6))
        for kind in ("const", "linear_j", "mixed_jk", "diff_squares", "deg3"):
            f = harmonic_polynomial(spec, kind)
            inner = laplacian(f).values[1:-1, 1:-1]
            assert np.all(inner == 0.0), kind

    def test_deg3_expansion_oracle(self):
        # direct expansion: Lap_1 x^3 = 6 x h^2 and Lap_2 (-3 x y^2) = -6 x h^2
        h = 0.25
        spec = LatticeSpec(2, h, (-8, -8), (8, 8))
        x = spec.coords()
        d1 = (x[0] + h) ** 3 + (x[0] - h) ** 3 - 2 * x[0] ** 3
        np.testing.assert_allclose(d1, 6 * x[0] * h ** 2, atol=1e-14)
        d2 = -3 * x[0] * ((x[1] + h) ** 2 + (x[1] - h) ** 2 - 2 * x[1] ** 2)
        np.testing.assert_allclose(d2, -6 * x[0] * h ** 2, atol=1e-14)

    def test_dimension_requirements(self):
        spec = LatticeSpec(1, 1.0, (-3,), (3,))
        with pytest.raises(ValueError, match="dimension"):
            harmonic_polynomial(spec, "mixed_jk")
        with pytest.raises(ValueError, match="unknown"):
            harmonic_polynomial(spec, "quartic")


class TestDirichletSolve:
    def test_reproduces_mixed_polynomial(self):
        spec = ball_spec(2, 1 / 16)
        g = harmonic_polynomial(spec, "mixed_jk")
        problem = DirichletProblem.on_ball(spec, 2.0, g)
        u = dirichlet_solve(problem, tol=1e-10)
        mask = problem.interior
        assert np.abs(u.values[mask] - g.values[mask]).max() <= 1e-10

    def test_constant_boundary_gives_constant(self):
        spec = ball_spec(2, 1 / 16)
        one = LatticeFunction(spec, np.ones(spec.shape))
        problem = DirichletProblem.on_ball(spec, 2.0, one)
        u = dirichlet_solve(problem, tol=1e-12)
        np.testing.assert_allclose(u.values[problem.interior], 1.0, rtol=1e-12)

    def test_reproduces_deg3_polynomial(self):
        spec = LatticeSpec.ball_box(2, 1 / 64, 2.0, pad_sites=2)
        g = harmonic_polynomial(spec, "deg3")
        problem = DirichletProblem.on_ball(spec, 2.0, g)
        u = dirichlet_solve(problem, tol=1e-9)
        mask = problem.interior
        scale = np.abs(g.values[mask]).max()
        assert np.abs(u.values[mask] - g.values[mask]).max() <= 1e-9 * scale

    def test_maximum_principle(self, rng_seed):
        rng = np.random.default_rng(rng_seed)
        spec = ball_spec(2, 1 / 12)
        data = LatticeFunction(spec, rng.uniform(-1.0, 2.0, spec.shape))
        problem = DirichletProblem.on_ball(spec, 2.0, data)
        u = dirichlet_solve(problem, tol=1e-10)
        g = problem.boundary_values[problem.boundary]
        assert u.values[problem.interior].min() >= g.min() - 1e-10
        assert u.values[problem.interior].max() <= g.max() + 1e-10

    def test_linearity(self, rng_seed):
        rng = np.random.default_rng(rng_seed)
        spec = ball_spec(2, 1 / 10)
        g1 = LatticeFunction(spec, rng.standard_normal(spec.shape))
        g2 = LatticeFunction(spec, rng.standard_normal(spec.shape))
        combo = LatticeFunction(spec, 2.0 * g1.values - 0.5 * g2.values)
        u1 = dirichlet_solve(DirichletProblem.on_ball(spec, 2.0, g1), tol=1e-10)
        u2 = dirichlet_solve(DirichletProblem.on_ball(spec, 2.0, g2), tol=1e-10)
        uc = dirichlet_solve(DirichletProblem.on_ball(spec, 2.0, combo), tol=1e-10)
        np.testing.assert_allclose(uc.values, 2.0 * u1.values - 0.5 * u2.values,
                                   atol=1e-9)

    def test_nontrivial_fields_residual_certificate(self, rng_seed):
        rng = np.random.default_rng(rng_seed)
        spec = ball_spec(2, 1 / 12)
        v = LatticeFunction(spec, rng.uniform(-1.0, 1.0, spec.shape))
        b = tuple(LatticeFunction(spec, rng.uniform(-1.0, 1.0, spec.shape))
                  for _ in range(2))
        fields = FieldData(v, b)
        g = harmonic_polynomial(spec, "mixed_jk")
        problem = DirichletProblem.on_ball(spec, 2.0, g, fields)
        u = dirichlet_solve(problem, tol=1e-8)
        assert residual(problem, u) <= 1e-8 * max(1.0, np.abs(g.values).max())

    def test_impossible_tolerance_raises_with_residual(self):
        spec = ball_spec(2, 1 / 8)
        g = harmonic_polynomial(spec, "diff_squares")
        problem = DirichletProblem.on_ball(spec, 2.0, g)
        with pytest.raises(SolverError) as err:
            dirichlet_solve(problem, tol=1e-30)
        assert err.value.residual is not None and err.value.residual > 0

    def test_deterministic(self):
        spec = ball_spec(2, 1 / 12)
        g = harmonic_polynomial(spec, "deg3")
        problem = DirichletProblem.on_ball(spec, 2.0, g)
        a = dirichlet_solve(problem, tol=1e-10)
        b = dirichlet_solve(problem, tol=1e-10)
        assert np.array_equal(a.values, b.values)


class TestRandomBump:
    def annulus(self, d=2):
        return AnnularRegion.origin(d, 0.5, 2.0)

    def test_support_inside_annulus(self):
        spec = LatticeSpec.ball_box(2, 1 / 32, 2.0, pad_sites=4)
        u = random_bump(spec, self.annulus(), seed=5)
        r = spec.radii()
        h = spec.h
        nz = u.values != 0.0
        assert np.all(r[nz] > 0.5 + 2 * h)
        assert np.all(r[nz] < 2.0 - 2 * h)

    def test_seed_determinism(self):
        spec = LatticeSpec.ball_box(2, 1 / 32, 2.0, pad_sites=4)
        a = random_bump(spec, self.annulus(), seed=123)
        b = random_bump(spec, self.annulus(), seed=123)
        c = random_bump(spec, self.annulus(), seed=124)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_site_count_matches_enumeration(self):
        h = 1 / 64
        spec = LatticeSpec.ball_box(2, h, 2.0, pad_sites=4)
        u = random_bump(spec, self.annulus(), seed=9)
        # oracle: window is positive strictly between the shrunk radii
        margin = max(2 * h, 0.05)
        a, b = 0.5 + margin, 2.0 - margin
        count = 0
        for n1 in range(spec.lo[0], spec.hi[0] + 1):
            for n2 in range(spec.lo[1], spec.hi[1] + 1):
                if a < np.hypot(h * n1, h * n2) < b:
                    count += 1
        assert int((u.values != 0).sum()) == count

    def test_region_too_thin(self):
        spec = LatticeSpec.ball_box(2, 1 / 4, 2.0, pad_sites=2)
        with pytest.raises(ValueError, match="too thin"):
            random_bump(spec, AnnularRegion.origin(2, 1.0, 1.5), seed=0)


class TestProblemValidation:
    def test_masks_must_not_overlap(self):
        spec = LatticeSpec(1, 0.5, (-4,), (4,))
        m = np.zeros(spec.shape, dtype=bool)
        m[3:6] = True
        with pytest.raises(ValueError, match="overlap"):
            DirichletProblem(spec, m, m, np.zeros(spec.shape))

    def test_uncovered_neighbor_rejected(self):
        spec = LatticeSpec(1, 0.5, (-4,), (4,))
        interior = np.zeros(spec.shape, dtype=bool)
        interior[4] = True
        boundary = np.zeros(spec.shape, dtype=bool)
        boundary[3] = True  # right neighbor missing
        with pytest.raises(ValueError, match="uncovered"):
            DirichletProblem(spec, interior, boundary, np.zeros(spec.shape))
