"""Barrier weight, supersolution residual, energy decay, envelopes."""

import math

import numpy as np
import pytest

from kineticlab.aronson import (
    BarrierParams,
    aronson_energy_check,
    barrier_eval,
    barrier_region,
    barrier_residual,
    barrier_residual_parts,
    barrier_values,
    decay_envelope_check,
    gamma_of,
    k_threshold,
    meyers_check,
    region_samples,
    rho_choice,
)
from kineticlab.kernels import FractionalLaplacian, normalized_fractional

S = 0.5


def _params(rho=1.0, k=2.0, tau0=0.0, y0=0.0, w0=0.0):
    sigma = tau0 + rho ** (2 * S) / (4 * k)
    return BarrierParams(rho=rho, k=k, tau0=tau0, sigma=sigma, y0=y0, w0=w0, s=S)


class TestBarrierParams:
    def test_window_constraint(self):
        with pytest.raises(ValueError):
            BarrierParams(rho=1.0, k=2.0, tau0=0.0, sigma=0.5, y0=0.0, w0=0.0, s=S)
        with pytest.raises(ValueError):
            BarrierParams(rho=1.0, k=0.5, tau0=0.0, sigma=0.1, y0=0.0, w0=0.0, s=S)

    def test_log_factor_positive_on_window(self):
        p = _params()
        ts = np.linspace(p.tau0, p.sigma, 9)
        assert np.all(p.log_factor(ts) > 0)


class TestBarrierValues:
    def test_core_value(self):
        # where both branch arguments are below 1, H = k delta(t) / rho^{2s}
        p = _params()
        t = 0.5 * (p.tau0 + p.sigma)
        want = p.k * float(p.delta(t)) / p.rho ** (2 * S)
        assert barrier_eval(p, (t, p.y0 + (p.sigma + t - 2 * p.tau0) * p.w0, p.w0)) == pytest.approx(want, rel=1e-12)

    def test_decays_in_velocity(self):
        p = _params()
        t = 0.5 * (p.tau0 + p.sigma)
        vals = [barrier_eval(p, (t, 0.0, v)) for v in (0.0, 4.0, 8.0, 16.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_time_window_enforced(self):
        p = _params()
        with pytest.raises(ValueError):
            barrier_values(p, p.sigma + 0.1, 0.0, 0.0)


class TestRegions:
    def test_all_regions_reachable(self):
        p = _params()
        zs = region_samples(p, 3, np.random.default_rng(0))
        regions = sorted({barrier_region(p, z) for z in zs})
        assert regions == [1, 2, 3, 4, 5, 6]

    def test_threshold_classification(self):
        p = _params(w0=0.0, y0=0.0)
        t = 0.5 * (p.tau0 + p.sigma)
        x0 = p.y0 + (p.sigma + t - 2 * p.tau0) * p.w0
        assert barrier_region(p, (t, x0, 0.5)) == 1
        assert barrier_region(p, (t, x0 + 5.0**2, 0.5)) == 2
        assert barrier_region(p, (t, x0, 2.5)) == 3
        assert barrier_region(p, (t, x0 + 5.0**2, 2.5)) == 4
        assert barrier_region(p, (t, x0, 5.0)) == 5
        assert barrier_region(p, (t, x0 + 8.0**2, 5.0)) == 6


class TestResidual:
    def test_core_transport_term(self):
        p = _params()
        t = 0.5 * (p.tau0 + p.sigma)
        x0 = p.y0 + (p.sigma + t - 2 * p.tau0) * p.w0
        TH, I, tie = barrier_residual_parts(p, normalized_fractional(S), (t, x0, 0.0))
        assert not tie
        assert TH == pytest.approx(-p.k / p.rho ** (2 * S), rel=1e-12)
        assert I >= 0.0

    def test_residual_nonpositive_at_k2(self):
        p = _params(k=2.0)
        k = normalized_fractional(S)
        rng = np.random.default_rng(7)
        zs = region_samples(p, 10, rng)
        res = [barrier_residual(p, k, z, c=2.0) for z in zs]
        assert max(res) <= 1e-8

    def test_tie_fallback_finite(self):
        # exactly on the kink |v - w0| = 3 rho the analytic branch is one-sided
        p = _params()
        t = 0.5 * (p.tau0 + p.sigma)
        x0 = p.y0 + (p.sigma + t - 2 * p.tau0) * p.w0
        r = barrier_residual(p, normalized_fractional(S), (t, x0, 3.0 * p.rho))
        assert math.isfinite(r)


class TestThreshold:
    def test_normalized_kernel_feasible_at_one(self):
        rep = k_threshold(1.0, 0.1, 0.0, 0.0, S, normalized_fractional(S), c=2.0, n_per_region=8, seed=0)
        assert rep["k_star"] == 1.0
        assert rep["worst_residual"] <= 0.0

    def test_strong_kernel_needs_larger_k(self):
        # a kernel 200x stronger pushes the jump term past the core decay rate
        strong = FractionalLaplacian(c=200.0 / math.pi, s=S)
        rep = k_threshold(1.0, 0.1, 0.0, 0.0, S, strong, c=2.0, n_per_region=6, seed=0)
        assert rep["k_star"] > 1.0
        assert math.isfinite(rep["k_star"])


class TestEnergy:
    def test_kinetic_constant_nonnegative(self, solver_run):
        traj, _ = solver_run
        p = BarrierParams(rho=1.0, k=1.0, tau0=0.2, sigma=0.45, y0=0.0, w0=0.0, s=S)
        rep = aronson_energy_check(traj, p, variant="kinetic")
        assert rep["constant"] >= 0.0
        assert rep["H_sup"] > 0.0
        # decreasing weighted energy: the decay inequality holds with a small constant
        assert rep["sup_weighted"] <= rep["initial_weighted"] + rep["constant"] * rep["norm_term"] + 1e-12

    def test_parabolic_requires_x_constant(self, solver_run):
        traj, _ = solver_run
        p = BarrierParams(rho=1.0, k=1.0, tau0=0.2, sigma=0.45, y0=0.0, w0=0.0, s=S)
        with pytest.raises(ValueError):
            aronson_energy_check(traj, p, variant="parabolic", pointwise_bounded=True)

    def test_window_must_intersect(self, solver_run):
        traj, _ = solver_run
        p = BarrierParams(rho=1.0, k=1.0, tau0=5.0, sigma=5.2, y0=0.0, w0=0.0, s=S)
        with pytest.raises(ValueError):
            aronson_energy_check(traj, p)


class TestGeometryHelpers:
    def test_gamma_of(self):
        gamma, flag = gamma_of(x=2.0, v=1.0, y0=0.0, w0=0.0, sigma=1.0, tau0=0.5, s=S)
        assert gamma == pytest.approx(0.25 * max(1.0, 2.0 ** (1 / 2)))
        assert isinstance(flag, bool)

    def test_rho_choice_closed_form(self):
        # bracket = 1/4 + (2d(1+s)+2s)/(2s) = 1/4 + 4 at s = 1/2
        assert rho_choice(1.0, S) == pytest.approx((1.0 / 12.0) / 4.25)
        with pytest.raises(ValueError):
            rho_choice(-1.0, S)


class TestEnvelopes:
    def test_nash_on_diagonal_time_independent(self, tab256):
        rep = decay_envelope_check(tab256, "NashOnDiag")
        assert rep.extra["variation"] < 1e-6
        assert rep.constant == pytest.approx(tab256.peak(), rel=1e-9)

    def test_upper_envelopes_bracket_table(self, tab256):
        for kind in ("UpperUnconditional", "UpperConditional"):
            rep = decay_envelope_check(tab256, kind)
            assert rep.constant > 0
            # the fitted constant makes the envelope a true upper bound on
            # the evaluation window by construction
            from kineticlab.aronson import _eval_window, _upper_envelope

            X, V, J = _eval_window(tab256)
            env = rep.constant * _upper_envelope(tab256, rep.extra["bracket_exponent"], X, V)
            ring = abs(tab256.meta["ringing"])
            pos = J > 10 * ring
            assert np.all(J[pos] <= env[pos] * (1 + 1e-9))

    def test_lower_exponential_under_table(self, tab256):
        rep = decay_envelope_check(tab256, "LowerExponential")
        ex = rep.extra
        t, s = tab256.t, tab256.s
        X, V = np.meshgrid(np.linspace(-2, 2, 41), np.linspace(-4, 4, 41), indexing="ij")
        J = tab256.sample(X.ravel(), V.ravel()).reshape(X.shape)
        g = np.abs(X) ** (2 * s) / t ** (1 + 2 * s) + np.abs(V) ** (2 * s) / t
        env = ex["C1"] * t ** -3.0 * np.exp(-ex["C2"] * g)
        ring = abs(tab256.meta["ringing"])
        pos = J > 10 * ring
        # fitted on a fixed lattice; allow slack between fit nodes
        assert np.all(env[pos] <= J[pos] * 1.05)

    def test_unknown_kind(self, tab256):
        with pytest.raises(ValueError):
            decay_envelope_check(tab256, "Sideways")


class TestMeyers:
    def test_identical_tables_zero(self):
        J = np.random.default_rng(0).random((8, 8))
        assert meyers_check(J, J, rho=1.0, s=S, d=1, elapsed=0.5) == 0.0

    def test_cutoff_deficit_scaling(self):
        J = np.ones((4, 4))
        Jc = J - 0.1
        # deficit 0.1 against scale elapsed * rho^{-(2d(1+s)+2s)} = elapsed * rho^{-4}
        got = meyers_check(J, Jc, rho=2.0, s=S, d=1, elapsed=0.5)
        assert got == pytest.approx(0.1 / (0.5 * 2.0**-4.0), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            meyers_check(np.ones((2, 2)), np.ones((3, 3)), 1.0, S, 1, 1.0)
        with pytest.raises(ValueError):
            meyers_check(np.ones((2, 2)), np.ones((2, 2)), -1.0, S, 1, 1.0)
