import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmlattice import (
    ControlParams,
    GeometryParams,
    SwarmState,
    adapt_normal_gain,
    angular_error,
    control_input,
    control_inputs,
    local_angular_error,
    normal_input,
    normal_interaction,
    radial_input,
    radial_interaction,
)
from swarmlattice.control import adapt_normal_gains, local_angular_errors
from swarmlattice.geometry import adjacency_set, neighbourhood, square_grid

P = ControlParams()  # a=b=0.15, c=5, L=4
GEO = GeometryParams()


class TestRadialInteraction:
    def test_zero_at_unit_root(self):
        # a == b puts the root exactly at distance (a/b)^(1/c) = 1
        assert radial_interaction(1.0, P) == 0.0

    def test_saturates_close_in(self):
        # unsaturated value 0.15*1024 - 0.15*32 = 148.8, clipped to 1
        assert radial_interaction(0.5, P) == 1.0

    def test_attractive_tail(self):
        expected = 0.15 / 32 - 0.15 / 2**2.5
        assert radial_interaction(math.sqrt(2.0), P) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-0.02183, abs=1e-5)

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            radial_interaction(0.0, P)

    @given(st.floats(min_value=1e-3, max_value=1e3))
    def test_bounded_above_by_one(self, d):
        assert radial_interaction(d, P) <= 1.0

    def test_strictly_negative_beyond_root_and_vanishing(self):
        for d in (1.01, 1.5, 2.0, 5.0, 20.0):
            assert radial_interaction(d, P) < 0.0
        assert abs(radial_interaction(1e4, P)) < 1e-15


class TestRadialInput:
    def test_equilibrium_neighbour(self):
        state = SwarmState(np.array([[0.0, 0.0], [1.0, 0.0]]))
        assert np.array_equal(radial_input(state, 0, {1}, P), [0.0, 0.0])

    def test_saturated_repulsion(self):
        p = ControlParams(G_r=1.0, G_n=0.0)
        state = SwarmState(np.array([[0.5, 0.0], [0.0, 0.0]]))
        u = radial_input(state, 0, {1}, p)
        assert u == pytest.approx([1.0, 0.0], abs=1e-15)

    def test_empty_neighbourhood(self):
        state = SwarmState(np.array([[0.0, 0.0], [9.0, 0.0]]))
        assert np.array_equal(radial_input(state, 0, set(), P), [0.0, 0.0])

    def test_coincident_neighbour_skipped(self):
        state = SwarmState(np.array([[0.0, 0.0], [0.0, 0.0]]))
        assert np.array_equal(radial_input(state, 0, {1}, P), [0.0, 0.0])


class TestAngularError:
    def test_exact_lattice_direction(self):
        assert angular_error(math.pi / 3, 6) == 0.0

    def test_small_angle_unchanged(self):
        assert angular_error(0.1, 4) == 0.1

    def test_tie_resolves_to_upper_endpoint(self):
        assert angular_error(math.pi / 4, 4) == math.pi / 4

    def test_codomain(self):
        for L in (4, 6):
            for theta in np.linspace(-7, 7, 400):
                err = angular_error(float(theta), L)
                assert -math.pi / L < err <= math.pi / L + 1e-15

    def test_periodicity(self):
        # equality is modulo the lattice angle: rounding can flip the sign
        # at the tie points, where both endpoints name the same deviation
        for L in (4, 6):
            period = 2 * math.pi / L
            for theta in np.linspace(0, 2 * math.pi, 97):
                a = angular_error(float(theta), L)
                b = angular_error(float(theta) + period, L)
                d = abs(a - b) % period
                assert min(d, period - d) == pytest.approx(0.0, abs=1e-12)

    def test_offset_shifts_reference(self):
        assert angular_error(0.4, 4, orientation_offset=0.4) == 0.0


class TestNormalInteraction:
    def test_zero_at_zero(self):
        assert normal_interaction(0.0, 4) == 0.0

    def test_boundary_value(self):
        assert normal_interaction(math.pi / 4, 4) == pytest.approx(-1.0, abs=1e-15)

    def test_half(self):
        assert normal_interaction(-math.pi / 8, 4) == pytest.approx(0.5, abs=1e-15)

    @given(st.floats(min_value=1e-6, max_value=math.pi / 4 - 1e-9))
    def test_odd_on_open_interval(self, err):
        assert normal_interaction(-err, 4) == -normal_interaction(err, 4)


class TestNormalInput:
    def test_exact_lattice_angles_give_zero(self):
        state = SwarmState(square_grid(3, 3))
        p = ControlParams(G_n=8.0)
        for i in range(9):
            u = normal_input(state, i, adjacency_set(state, i, GEO), p)
            assert np.array_equal(u, [0.0, 0.0])

    def test_torque_reduces_bearing(self):
        # one link just above a lattice direction: the push must rotate the
        # source agent clockwise about its neighbour
        p = ControlParams(G_n=1.0, G_r=0.0)
        r = np.array([math.cos(0.1), math.sin(0.1)])
        state = SwarmState(np.array([r, [0.0, 0.0]]))
        u = normal_input(state, 0, {1}, p)
        assert np.linalg.norm(u) == pytest.approx((4 / math.pi) * 0.1, rel=1e-9)
        # moving along u must decrease the bearing of r
        theta_before = math.atan2(r[1], r[0])
        moved = r + 1e-6 * u
        theta_after = math.atan2(moved[1], moved[0])
        assert theta_after < theta_before

    def test_empty_adjacency(self):
        state = SwarmState(np.array([[0.0, 0.0], [5.0, 0.0]]))
        assert np.array_equal(normal_input(state, 0, set(), P), [0.0, 0.0])

    def test_adaptive_mode_uses_per_agent_gain(self):
        p = ControlParams(G_n=8.0, adaptive=True)
        r = np.array([math.cos(0.1), math.sin(0.1)])
        state = SwarmState(np.array([r, [0.0, 0.0]]), normal_gains=np.array([2.0, 0.0]))
        u = normal_input(state, 0, {1}, p)
        assert np.linalg.norm(u) == pytest.approx(2.0 * (4 / math.pi) * 0.1, rel=1e-9)


class TestControlInput:
    def test_norm_exactly_at_limit(self):
        from swarmlattice.control import clamp_speed

        assert np.array_equal(clamp_speed(np.array([3.0, 4.0]), 5.0), [3.0, 4.0])

    def test_rescaled_to_limit(self):
        from swarmlattice.control import clamp_speed

        assert clamp_speed(np.array([6.0, 8.0]), 5.0) == pytest.approx([3.0, 4.0], abs=1e-12)

    def test_zero_input(self):
        state = SwarmState(np.array([[0.0, 0.0]]))
        assert np.array_equal(control_input(state, 0, P, GEO), [0.0, 0.0])

    def test_speed_never_exceeds_limit(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            state = SwarmState(rng.uniform(-1, 1, size=(8, 2)))
            for i in range(8):
                u = control_input(state, i, P, GEO)
                assert np.linalg.norm(u) <= P.V_max * (1 + 1e-12)

    def test_equivariance_under_rotation(self):
        # rotating the swarm and the reference axis together rotates the input
        rng = np.random.default_rng(6)
        for _ in range(25):
            pts = rng.uniform(-1.5, 1.5, size=(6, 2))
            delta = float(rng.uniform(0, 2 * math.pi))
            c, s = math.cos(delta), math.sin(delta)
            rot = np.array([[c, -s], [s, c]])
            p0 = ControlParams(G_r=5.0, G_n=3.0)
            p1 = ControlParams(G_r=5.0, G_n=3.0, orientation_offset=delta)
            state0 = SwarmState(pts)
            state1 = SwarmState(pts @ rot.T)
            for i in range(6):
                u0 = control_input(state0, i, p0, GEO)
                u1 = control_input(state1, i, p1, GEO)
                assert u1 == pytest.approx(rot @ u0, abs=1e-9)


class TestLocalAngularError:
    def test_exact_lattice_is_zero(self):
        state = SwarmState(square_grid(3, 3))
        for i in range(9):
            assert local_angular_error(state, i, adjacency_set(state, i, GEO), P) == 0.0

    def test_single_link(self):
        r = np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)])
        state = SwarmState(np.array([r, [0.0, 0.0]]))
        e = local_angular_error(state, 0, {1}, P)
        assert e == pytest.approx(0.5, rel=1e-12)

    def test_isolated_agent(self):
        state = SwarmState(np.array([[0.0, 0.0], [9.0, 9.0]]))
        assert local_angular_error(state, 0, set(), P) == 0.0


class TestAdaptNormalGain:
    def test_growth_above_deadzone(self):
        p = ControlParams(alpha=3.0, e_theta_star=0.2)
        g = adapt_normal_gain(0.0, 0.5, p, 0.01)
        assert g == pytest.approx(0.009, abs=1e-15)

    def test_frozen_below_deadzone(self):
        p = ControlParams(alpha=3.0, e_theta_star=0.2)
        assert adapt_normal_gain(1.5, 0.1, p, 0.01) == 1.5

    def test_frozen_at_boundary(self):
        p = ControlParams(alpha=3.0, e_theta_star=0.2)
        assert adapt_normal_gain(1.5, 0.2, p, 0.01) == 1.5

    @settings(max_examples=100)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=50))
    def test_monotone_along_any_error_trace(self, errors):
        p = ControlParams()
        g = 0.0
        for e in errors:
            g_next = adapt_normal_gain(g, e, p, 0.01)
            assert g_next >= g
            g = g_next


class TestVectorisedAgreement:
    def test_matches_per_agent_path(self):
        rng = np.random.default_rng(12)
        for adaptive in (False, True):
            for _ in range(20):
                n = int(rng.integers(2, 10))
                gains = rng.uniform(0, 5, size=n)
                state = SwarmState(rng.uniform(-1.5, 1.5, size=(n, 2)), normal_gains=gains)
                p = ControlParams(G_r=7.0, G_n=2.5, L=6, adaptive=adaptive)
                u_vec = control_inputs(state, p, GEO)
                for i in range(n):
                    assert u_vec[i] == pytest.approx(control_input(state, i, p, GEO), abs=1e-12)

    def test_local_errors_match(self):
        rng = np.random.default_rng(13)
        from swarmlattice.geometry import build_links

        for _ in range(20):
            n = int(rng.integers(2, 10))
            state = SwarmState(rng.uniform(-1.5, 1.5, size=(n, 2)))
            links = build_links(state, GEO)
            vec = local_angular_errors(state, P, links)
            for i in range(n):
                scalar = local_angular_error(state, i, adjacency_set(state, i, GEO), P)
                assert vec[i] == pytest.approx(scalar, abs=1e-12)

    def test_gain_updates_match(self):
        p = ControlParams()
        gains = np.array([0.0, 1.0, 2.0])
        errors = np.array([0.5, 0.1, 0.3])
        vec = adapt_normal_gains(gains, errors, p, 0.01)
        for i in range(3):
            assert vec[i] == adapt_normal_gain(float(gains[i]), float(errors[i]), p, 0.01)


class TestParamValidation:
    def test_rejects_bad_lattice(self):
        with pytest.raises(ValueError):
            ControlParams(L=5)

    def test_rejects_negative_gain(self):
        with pytest.raises(ValueError):
            ControlParams(G_r=-1.0)

    def test_rejects_fractional_c(self):
        with pytest.raises(ValueError):
            ControlParams(c=0)
