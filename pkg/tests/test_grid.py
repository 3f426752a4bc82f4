"""Tests for the ability grid and trapezoid-rule functionals."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridcat import (
    InvalidArgumentError,
    NumericalDegeneracyError,
    build_grid,
    entropy,
    gaussian_prior,
    kl_divergence,
    mean,
    normalized_density,
    trapezoid,
    uniform_density,
    variance,
)

GAUSSIAN_ENTROPY = 0.5 * math.log(2.0 * math.pi * math.e)  # 1.41894...


class TestBuildGrid:
    def test_default_step(self):
        g = build_grid(-6, 6, 200)
        assert g.step == pytest.approx(12 / 199)
        assert len(g.points) == 200
        assert g.points[0] == -6 and g.points[-1] == 6

    def test_three_points(self):
        g = build_grid(0, 1, 3)
        assert np.allclose(g.points, [0.0, 0.5, 1.0])

    def test_equal_spacing(self):
        g = build_grid(-4.3, 2.9, 57)
        diffs = np.diff(g.points)
        assert np.allclose(diffs, g.step, rtol=1e-12)
        assert np.all(diffs > 0)

    def test_degenerate_range(self):
        with pytest.raises(InvalidArgumentError):
            build_grid(1, 1, 200)
        with pytest.raises(InvalidArgumentError):
            build_grid(2, 1, 200)

    def test_too_few_points(self):
        with pytest.raises(InvalidArgumentError):
            build_grid(0, 1, 2)


class TestTrapezoid:
    def test_constant_one(self):
        g = build_grid(0, 1, 50)
        assert trapezoid(g, np.ones(50)) == pytest.approx(1.0, abs=1e-14)

    def test_odd_function(self):
        g = build_grid(-1, 1, 101)
        assert trapezoid(g, g.points.copy()) == pytest.approx(0.0, abs=1e-14)

    def test_quadratic(self):
        g = build_grid(-1, 1, 200)
        assert trapezoid(g, g.points**2) == pytest.approx(2 / 3, abs=1e-4)

    def test_length_mismatch(self):
        g = build_grid(0, 1, 10)
        with pytest.raises(InvalidArgumentError):
            trapezoid(g, np.ones(9))


class TestGaussianPrior:
    def test_normalized(self, grid):
        d = gaussian_prior(grid, 0.0, 1.0)
        assert trapezoid(grid, d.values) == pytest.approx(1.0, abs=1e-9)

    def test_mode_near_mean(self, grid):
        d = gaussian_prior(grid, 0.0, 1.0)
        mode = grid.points[np.argmax(d.values)]
        assert abs(mode) <= grid.step

    def test_entropy_matches_closed_form(self, std_prior):
        assert entropy(std_prior) == pytest.approx(GAUSSIAN_ENTROPY, abs=1e-3)

    def test_variance_matches_closed_form(self, grid):
        d = gaussian_prior(grid, 0.0, math.sqrt(2.0))
        assert variance(d) == pytest.approx(2.0, abs=1e-3)

    def test_mean_recovered(self, grid):
        d = gaussian_prior(grid, 0.7, 0.9)
        assert mean(d) == pytest.approx(0.7, abs=1e-6)

    def test_bad_sd(self, grid):
        with pytest.raises(InvalidArgumentError):
            gaussian_prior(grid, 0.0, 0.0)
        with pytest.raises(InvalidArgumentError):
            gaussian_prior(grid, 0.0, -1.0)


class TestMoments:
    def test_uniform_entropy(self, grid):
        d = uniform_density(grid)
        assert entropy(d) == pytest.approx(math.log(12.0), abs=1e-3)

    def test_concentration_lowers_entropy(self, grid, std_prior):
        spike = np.zeros(grid.n_points)
        spike[grid.n_points // 2] = 1.0
        d = normalized_density(grid, spike)
        assert entropy(d) < entropy(std_prior)

    def test_zero_density_rejected(self, grid):
        with pytest.raises(NumericalDegeneracyError):
            normalized_density(grid, np.zeros(grid.n_points))

    def test_negative_rejected(self, grid):
        values = np.ones(grid.n_points)
        values[3] = -0.5
        with pytest.raises(InvalidArgumentError):
            normalized_density(grid, values)


class TestKL:
    def test_self_divergence_zero(self, std_prior):
        assert abs(kl_divergence(std_prior, std_prior)) < 1e-12

    def test_shifted_gaussians(self, grid):
        p = gaussian_prior(grid, 0.0, 1.0)
        q = gaussian_prior(grid, 0.5, 1.0)
        assert kl_divergence(p, q) == pytest.approx(0.125, abs=1e-3)

    def test_nonnegative_random_densities(self, grid):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = normalized_density(grid, rng.random(grid.n_points))
            q = normalized_density(grid, rng.random(grid.n_points))
            assert kl_divergence(p, q) >= -1e-9

    def test_grid_mismatch(self, grid):
        other = build_grid(-5, 5, 200)
        with pytest.raises(InvalidArgumentError):
            kl_divergence(gaussian_prior(grid, 0, 1), gaussian_prior(other, 0, 1))


@settings(deadline=None, max_examples=50)
@given(seed=st.integers(0, 2**32 - 1))
def test_normalization_property(seed):
    """Any nonnegative non-null vector normalizes to trapezoid integral 1."""
    rng = np.random.default_rng(seed)
    g = build_grid(-6, 6, int(rng.integers(3, 300)))
    values = rng.random(g.n_points) * float(rng.uniform(0.1, 100))
    d = normalized_density(g, values)
    assert trapezoid(g, d.values) == pytest.approx(1.0, abs=1e-9)
    assert np.all(d.values >= 0)
