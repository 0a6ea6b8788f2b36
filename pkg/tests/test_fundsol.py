"""Explicit fundamental solution: symbol, tables, composition, Duhamel."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kineticlab.fields import PhaseGrid
from kineticlab.fundsol import (
    chapman_kolmogorov_residual,
    duhamel_solve,
    j0_hat,
    j0_hat_exponent,
    j0_table,
    modified_convolution,
    peak_decay_exponent,
)

S = 0.5


class TestSymbol:
    def test_worked_exponent(self):
        # int_0^1 |1 - tau|^1 dtau = 1/2
        assert float(j0_hat_exponent(1.0, 1.0, S)) == pytest.approx(0.5, abs=1e-14)

    def test_zero_frequency(self):
        assert float(j0_hat(0.0, 0.0, S)) == 1.0

    def test_pure_velocity_frequency(self):
        # phi = 0: the integral reduces to |xi|^{2s}
        assert float(j0_hat_exponent(0.0, 2.0, 0.3)) == pytest.approx(2.0**0.6, rel=1e-12)

    @given(
        st.floats(-5.0, 5.0),
        st.floats(-5.0, 5.0),
        st.floats(0.05, 0.95),
    )
    @settings(max_examples=60, deadline=None)
    def test_closed_form_matches_quadrature(self, phi, xi, s):
        tau = (np.arange(4000) + 0.5) / 4000.0
        quad = float(np.mean(np.abs(xi - tau * phi) ** (2 * s)))
        got = float(j0_hat_exponent(phi, xi, s))
        assert got == pytest.approx(quad, rel=2e-3, abs=2e-3)

    def test_symbol_bounds(self):
        vals = j0_hat(np.linspace(-3, 3, 11), np.linspace(-3, 3, 11), S)
        assert np.all(vals > 0) and np.all(vals <= 1)


class TestTable:
    def test_unit_mass(self, tab256):
        assert tab256.mass() == pytest.approx(1.0, abs=1e-3)

    def test_peak_frozen_value(self, tab256):
        # independently derived via the Fourier inversion of the symbol
        assert tab256.peak() == pytest.approx(0.7244342658395153, rel=1e-9)

    def test_self_similar_rescaling_exact(self, tab256):
        # beta = 2 d (1+s) / (2s) = 3 at s = 1/2
        assert peak_decay_exponent(S, 1) == 3.0
        assert tab256.at_time(2.0).peak() / tab256.peak() == pytest.approx(2.0**-3, abs=1e-12)

    def test_sample_matches_nodes(self, tab256):
        i, j = 100, 140
        got = float(tab256.sample(tab256.x_axis[i], tab256.v_axis[j]))
        assert got == pytest.approx(tab256.values[i, j], rel=1e-6, abs=1e-9)

    def test_sample_zero_outside_box(self, tab256):
        assert float(tab256.sample(1e6, 0.0)) == 0.0

    def test_positive_correlation_of_x_and_v(self, tab256):
        # transported mass moves toward x ~ t v: E[x v] > 0
        X, V = np.meshgrid(tab256.x_axis, tab256.v_axis, indexing="ij")
        exv = float((tab256.values * X * V).sum() * tab256.dx * tab256.dv)
        assert exv > 0.1

    def test_rejects_bad_time(self):
        with pytest.raises(ValueError):
            j0_table(-1.0, S)


class TestComposition:
    def test_convolution_with_point_mass(self):
        # g concentrated at the origin: f *_t g ~ f shifted by the shear
        n = 64
        dx = dv = 0.25
        x = dx * (np.arange(n) - n // 2)
        f = np.exp(-np.add.outer(x**2, x**2))
        g = np.zeros((n, n))
        g[n // 2, n // 2] = 1.0 / (dx * dv)
        out = modified_convolution(f, g, 0.0, dx, dv, warn=False)
        assert np.max(np.abs(out - f)) < 1e-10

    def test_shear_warning(self):
        n = 32
        f = np.ones((n, n))
        with pytest.warns(UserWarning):
            modified_convolution(f, f, 100.0, 0.1, 0.1)

    def test_chapman_kolmogorov_small_residual(self):
        rep = chapman_kolmogorov_residual(0.5, 0.5, S, n_freq=256)
        assert rep["residual_max"] < 2e-2 * rep["peak"] + 2e-2

    def test_rejects_nonpositive_times(self):
        with pytest.raises(ValueError):
            chapman_kolmogorov_residual(-0.5, 0.5, S)


class TestDuhamel:
    def test_zero_source_matches_propagator(self):
        # the propagator must be resolved by the grid, so keep lags >= 0.5
        grid = PhaseGrid(nt=1, nx=64, nv=128, x_period=16.0, v_extent=8.0)
        X, V = np.meshgrid(grid.x_axis, grid.v_axis, indexing="ij")
        f0 = np.exp(-2 * X**2 - 2 * V**2)
        out = duhamel_solve(f0, None, 1.0, 2, S, grid, n_freq=128)
        assert len(out) == 3
        mass0 = f0.sum() * grid.dx * grid.dv
        mass1 = out[-1].sum() * grid.dx * grid.dv
        assert mass1 == pytest.approx(mass0, rel=2e-2)

    def test_constant_source_adds_mass_linearly(self):
        grid = PhaseGrid(nt=1, nx=64, nv=128, x_period=16.0, v_extent=8.0)
        X, V = np.meshgrid(grid.x_axis, grid.v_axis, indexing="ij")
        f0 = np.zeros_like(X)
        h = np.exp(-4 * X**2 - 4 * V**2)
        T, steps = 2.0, 2
        out = duhamel_solve(f0, h, T, steps, S, grid, n_freq=128)
        h_mass = h.sum() * grid.dx * grid.dv
        got = out[-1].sum() * grid.dx * grid.dv
        # left-endpoint rule over `steps` intervals
        assert got == pytest.approx(h_mass * T, rel=0.1)
