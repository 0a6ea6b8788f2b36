"""Group laws, kinetic scaling and cylinder geometry."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kineticlab.geometry import (
    CylinderKind,
    GalileanElement,
    KineticCylinder,
    PhasePoint,
    cylinder_contains,
    galilean_compose,
    galilean_inverse,
    kinetic_scale_point,
    make_cylinder,
)

coords = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
radii = st.floats(0.05, 2.0)
orders = st.floats(0.05, 0.95)


def _pt(t, x, v):
    return PhasePoint(t, x, v)


class TestPhasePoint:
    def test_dimension_and_types(self):
        z = PhasePoint(1.0, [1.0, 2.0], [3.0, 4.0])
        assert z.d == 2
        assert z.t == 1.0

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            PhasePoint(0.0, [1.0, 2.0], [1.0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            PhasePoint(math.nan, 0.0, 0.0)


class TestGalileanGroup:
    def test_action_formula(self):
        a = GalileanElement.of(1.0, 2.0, 3.0)
        z = _pt(0.5, 0.25, -1.0)
        out = galilean_compose(a, z)
        # (t0 + t, x0 + x + t v0, v0 + v)
        assert out.t == 1.5
        assert out.x[0] == 2.0 + 0.25 + 0.5 * 3.0
        assert out.v[0] == 2.0

    @given(coords, coords, coords, coords, coords, coords)
    @settings(max_examples=50, deadline=None)
    def test_inverse_is_two_sided(self, t0, x0, v0, t, x, v):
        a = GalileanElement.of(t0, x0, v0)
        z = _pt(t, x, v)
        back = galilean_compose(galilean_inverse(a), galilean_compose(a, z))
        assert back.isclose(z, tol=1e-9)

    def test_identity(self):
        e = GalileanElement.identity()
        z = _pt(0.3, -1.0, 2.0)
        assert galilean_compose(e, z).isclose(z)

    @given(coords, coords, coords, orders, st.floats(0.1, 3.0))
    @settings(max_examples=50, deadline=None)
    def test_scaling_is_multiplicative(self, t, x, v, s, r):
        z = _pt(t, x, v)
        once = kinetic_scale_point(kinetic_scale_point(z, r, s), 2.0, s)
        twice = kinetic_scale_point(z, 2.0 * r, s)
        assert once.isclose(twice, tol=1e-7 * (1 + abs(t) + abs(x) + abs(v)))

    def test_scaling_rejects_bad_parameters(self):
        z = _pt(0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            kinetic_scale_point(z, -1.0, 0.5)
        with pytest.raises(ValueError):
            kinetic_scale_point(z, 1.0, 1.5)


class TestCylinders:
    def test_measure_closed_form(self):
        # time length r^{2s}, x interval 2 r^{1+2s}, v interval 2 r
        c = make_cylinder(_pt(0.0, 0.0, 0.0), 0.5, 0.5, CylinderKind.CURRENT)
        r = 0.5
        assert c.measure() == pytest.approx(r * (2 * r**2) * (2 * r), rel=1e-14)

    @given(radii, orders, st.floats(0.1, 0.9))
    @settings(max_examples=50, deadline=None)
    def test_measure_scales_kinetically(self, r0, s, lam):
        z = _pt(0.0, 0.0, 0.0)
        big = make_cylinder(z, r0, s, CylinderKind.CURRENT)
        small = make_cylinder(z, lam * r0, s, CylinderKind.CURRENT)
        # measure ~ r^{2s} * r^{1+2s} * r  =>  ratio lam^{2 + 4s}
        assert small.measure() / big.measure() == pytest.approx(lam ** (2 + 4 * s), rel=1e-9)

    def test_current_window_is_past_of_center(self):
        c = make_cylinder(_pt(1.0, 0.0, 0.0), 0.5, 0.5, CylinderKind.CURRENT)
        lo, hi, closed = c.time_window()
        assert hi == 1.0 and lo == pytest.approx(1.0 - 0.5)
        assert not closed

    def test_slanting_follows_free_flow(self):
        # center with nonzero velocity: membership in x is tested along x0 + (t - t0) v0
        v0 = 2.0
        c = make_cylinder(_pt(0.0, 0.0, v0), 0.1, 0.5, CylinderKind.CURRENT)
        dt = -0.005
        on_flow = _pt(dt, dt * v0, v0)
        off_flow = _pt(dt, dt * v0 + 0.5, v0)
        assert cylinder_contains(c, on_flow)
        assert not cylinder_contains(c, off_flow)

    def test_strict_ball_half_open_time(self):
        c = make_cylinder(_pt(0.0, 0.0, 0.0), 0.5, 0.5, CylinderKind.CURRENT)
        assert not c.contains(_pt(0.0, c.x_radius, 0.0))  # boundary excluded
        assert not c.contains(_pt(0.0, 0.0, c.ball_radius))
        lo, _, _ = c.time_window()
        assert not c.contains(_pt(lo, 0.0, 0.0))  # past end open
        assert c.contains(_pt(0.0, 0.0, 0.0))  # future end closed

    def test_detached_windows_do_not_overlap_current(self):
        r0, s = 0.1, 0.5
        z = _pt(0.0, 0.0, 0.0)
        cur = make_cylinder(z, r0 / 4, s, CylinderKind.CURRENT)
        past = make_cylinder(z, r0, s, CylinderKind.TILDE_PAST_QUARTER)
        lo_c, _, _ = cur.time_window()
        _, hi_p, _ = past.time_window()
        assert hi_p < lo_c

    def test_tilde_quarter_radii(self):
        c = make_cylinder(_pt(0.0, 0.0, 0.0), 0.2, 0.5, CylinderKind.TILDE_PAST_QUARTER)
        assert c.ball_radius == pytest.approx(0.05)
        assert c.x_radius == pytest.approx(0.05**2)

    def test_nodes_weight_matches_measure(self):
        c = make_cylinder(_pt(0.5, 0.3, -0.2), 0.4, 0.5, CylinderKind.CURRENT)
        T, X, V, w = c.nodes(5, 6, 7)
        assert T.size == 5 * 6 * 7
        assert T.size * w == pytest.approx(c.measure(), rel=1e-12)

    def test_nodes_lie_inside(self):
        c = make_cylinder(_pt(0.5, 0.3, -0.7), 0.4, 0.5, CylinderKind.CURRENT)
        T, X, V, _ = c.nodes(4, 4, 4)
        for t, x, v in zip(T, X, V):
            assert c.contains(_pt(t, x, v))

    def test_rejects_invalid_inputs(self):
        z = _pt(0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            make_cylinder(z, -1.0, 0.5, CylinderKind.CURRENT)
        with pytest.raises(ValueError):
            make_cylinder(z, 1.0, 1.5, CylinderKind.CURRENT)
        with pytest.raises(ValueError):
            KineticCylinder(z, 1.0, 0.5, "current")
