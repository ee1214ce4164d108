import math
from dataclasses import replace

import numpy as np
import pytest

from swarmlattice import (
    ControlParams,
    GeometryParams,
    RemoveAgents,
    ScenarioError,
    ScenarioSpec,
    SetLattice,
    SimulationError,
    SwarmState,
    apply_event,
    run_trial,
    sample_initial_positions,
    step,
)
from swarmlattice.engine import trial_rngs
from swarmlattice.metrics import steady_state_scan


def small_spec(**kw):
    defaults = dict(
        N=12,
        seed=1,
        dt=0.01,
        t_max=3.0,
        T_w=1.0,
        control=ControlParams(G_r=15.0, G_n=8.0),
        snapshot_times=(0.0,),
        stop_at_steady_state=False,
    )
    defaults.update(kw)
    return ScenarioSpec(**defaults)


class TestInitialPositions:
    def test_inside_disk(self):
        rng = np.random.default_rng(0)
        pts = sample_initial_positions(5000, 2.0, rng)
        assert (np.linalg.norm(pts, axis=1) <= 2.0).all()

    def test_radial_density_statistics(self):
        # linear radial density: E[d] = 2r/3, Var[d] = r^2/18
        rng = np.random.default_rng(1)
        n, r = 100_000, 2.0
        d = np.linalg.norm(sample_initial_positions(n, r, rng), axis=1)
        se = math.sqrt(r * r / 18.0 / n)
        assert abs(d.mean() - 2 * r / 3) <= 3 * se

    def test_deterministic_per_seed(self):
        a = sample_initial_positions(50, 2.0, np.random.default_rng(7))
        b = sample_initial_positions(50, 2.0, np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_named_streams_are_stable(self):
        rngs = trial_rngs(123)
        assert set(rngs) == {"init", "noise", "events", "spins"}
        again = trial_rngs(123)
        assert np.array_equal(rngs["init"].random(4), again["init"].random(4))


class TestStep:
    def test_single_agent_stationary(self):
        spec = small_spec(N=1)
        state = SwarmState(np.array([[0.3, -0.2]]))
        out = step(state, spec, np.random.default_rng(0))
        assert np.array_equal(out.positions, state.positions)

    def test_euler_displacement(self):
        # saturated radial force with unit gain: unit velocity, dt displacement
        spec = small_spec(N=2, control=ControlParams(G_r=1.0, G_n=0.0))
        state = SwarmState(np.array([[0.0, 0.0], [0.5, 0.0]]))
        out = step(state, spec, np.random.default_rng(0))
        assert out.positions[0] == pytest.approx([-0.01, 0.0], abs=1e-15)
        assert out.positions[1] == pytest.approx([0.51, 0.0], abs=1e-15)

    def test_close_pair_separates_towards_link_length(self):
        spec = small_spec(N=2)
        state = SwarmState(np.array([[0.0, 0.0], [0.5, 0.0]]))
        rng = np.random.default_rng(0)
        dists = [0.5]
        for _ in range(2000):
            state = step(state, spec, rng)
            dists.append(float(abs(state.positions[1, 0] - state.positions[0, 0])))
        assert dists[-1] == pytest.approx(1.0, abs=1e-3)
        assert all(b >= a - 1e-12 for a, b in zip(dists, dists[1:]) if a < 0.99)

    def test_displacement_bounded_by_speed_limit(self):
        rng = np.random.default_rng(5)
        spec = small_spec(N=10)
        state = SwarmState(rng.uniform(-0.5, 0.5, size=(10, 2)))
        for _ in range(50):
            nxt = step(state, spec, rng)
            moved = np.linalg.norm(nxt.positions - state.positions, axis=1)
            assert (moved <= spec.control.V_max * spec.dt * (1 + 1e-12)).all()
            state = nxt

    def test_noise_free_path_ignores_rng(self):
        spec = small_spec(N=6)
        state = SwarmState(np.random.default_rng(3).uniform(-1, 1, (6, 2)))
        a = step(state, spec, np.random.default_rng(0))
        b = step(state, spec, np.random.default_rng(999))
        assert np.array_equal(a.positions, b.positions)

    def test_permutation_equivariance(self):
        # relabelling agents relabels the trajectory (up to float reduction
        # order, which changes sums by ~1 ulp per step)
        rng = np.random.default_rng(8)
        pts = rng.uniform(-1, 1, size=(8, 2))
        perm = rng.permutation(8)
        spec = small_spec(N=8)
        s1 = SwarmState(pts.copy())
        s2 = SwarmState(pts[perm].copy())
        for _ in range(30):
            s1 = step(s1, spec, np.random.default_rng(0))
            s2 = step(s2, spec, np.random.default_rng(0))
        assert s2.positions == pytest.approx(s1.positions[perm], abs=1e-10)

    def test_noise_variance_scaling(self):
        # with zero input the k-step displacement variance is k * sigma^2 * dt
        n, k, sigma, dt = 400, 200, 0.5, 0.01
        spec = ScenarioSpec(
            N=n,
            dt=dt,
            t_max=5.0,
            T_w=1.0,
            noise_sigma=sigma,
            control=ControlParams(G_r=0.0, G_n=0.0),
        )
        rng = np.random.default_rng(11)
        start = np.zeros((n, 2))
        state = SwarmState(start.copy())
        for _ in range(k):
            state = step(state, spec, rng)
        samples = (state.positions - start).ravel()
        var = samples.var()
        expect = k * sigma * sigma * dt
        se = expect * math.sqrt(2.0 / (samples.size - 1))
        assert abs(var - expect) <= 3 * se

    def test_huge_finite_gain_still_clamped(self):
        spec = small_spec(N=2, control=ControlParams(G_r=1e308, G_n=0.0))
        state = SwarmState(np.array([[0.0, 0.0], [0.5, 0.0]]))
        out = step(state, spec, np.random.default_rng(0))
        moved = np.linalg.norm(out.positions - state.positions, axis=1)
        assert moved == pytest.approx([0.05, 0.05], rel=1e-12)

    def test_nonfinite_abort(self):
        spec = small_spec(N=2, control=ControlParams(G_r=math.inf, G_n=0.0))
        state = SwarmState(np.array([[0.0, 0.0], [0.5, 0.0]]))
        # infinite gain drives the clamp through inf*0 -> nan
        with np.errstate(invalid="ignore"), pytest.raises(SimulationError):
            for _ in range(5):
                state = step(state, spec, np.random.default_rng(0))


class TestEvents:
    def test_removal_fraction_rounding(self):
        state = SwarmState(np.random.default_rng(0).uniform(-2, 2, (100, 2)))
        spec = small_spec(N=100)
        out, _ = apply_event(state, spec, RemoveAgents(1.0 * 0, fraction=0.3), np.random.default_rng(1))
        assert out.n_agents == 70

    def test_removal_at_least_one(self):
        state = SwarmState(np.random.default_rng(0).uniform(-2, 2, (100, 2)))
        spec = small_spec(N=100)
        out, _ = apply_event(state, spec, RemoveAgents(0.0, fraction=0.001), np.random.default_rng(1))
        assert out.n_agents == 99

    def test_removing_everyone_rejected(self):
        state = SwarmState(np.zeros((3, 2)))
        spec = small_spec(N=3)
        with pytest.raises(ScenarioError):
            apply_event(state, spec, RemoveAgents(0.0, fraction=1.0), np.random.default_rng(0))

    def test_removal_deterministic(self):
        state = SwarmState(np.random.default_rng(0).uniform(-2, 2, (50, 2)))
        spec = small_spec(N=50)
        a, _ = apply_event(state, spec, RemoveAgents(0.0, fraction=0.3), np.random.default_rng(9))
        b, _ = apply_event(state, spec, RemoveAgents(0.0, fraction=0.3), np.random.default_rng(9))
        assert np.array_equal(a.positions, b.positions)

    def test_explicit_ids(self):
        state = SwarmState(np.arange(10, dtype=float).reshape(5, 2))
        spec = small_spec(N=5)
        out, _ = apply_event(state, spec, RemoveAgents(0.0, ids=(0, 3)), np.random.default_rng(0))
        assert out.n_agents == 3
        assert np.array_equal(out.positions[0], [2.0, 3.0])

    def test_lattice_switch_updates_live_params(self):
        state = SwarmState(np.zeros((2, 2)), normal_gains=np.array([1.0, 2.0]))
        spec = small_spec(N=2)
        out_state, out_spec = apply_event(
            state, spec, SetLattice(0.0, new_L=6, reset_adaptive_gains=False), np.random.default_rng(0)
        )
        assert out_spec.control.L == 6
        assert np.array_equal(out_state.normal_gains, [1.0, 2.0])

    def test_lattice_switch_gain_reset(self):
        state = SwarmState(np.zeros((2, 2)), normal_gains=np.array([1.0, 2.0]))
        spec = small_spec(N=2)
        out_state, _ = apply_event(
            state, spec, SetLattice(0.0, new_L=6, reset_adaptive_gains=True), np.random.default_rng(0)
        )
        assert np.array_equal(out_state.normal_gains, [0.0, 0.0])

    def test_event_validation(self):
        with pytest.raises(ValueError):
            RemoveAgents(0.0)
        with pytest.raises(ValueError):
            RemoveAgents(0.0, fraction=1.5)
        with pytest.raises(ValueError):
            SetLattice(0.0, new_L=5)

    def test_events_must_be_sorted(self):
        with pytest.raises(ValueError):
            small_spec(events=(SetLattice(2.0, 6), SetLattice(1.0, 4)))

    def test_event_beyond_horizon_rejected(self):
        with pytest.raises(ValueError):
            small_spec(events=(SetLattice(99.0, 6),))


class TestRunTrial:
    def test_zero_horizon_returns_initial_state(self):
        spec = small_spec(t_max=0.0)
        run = run_trial(spec)
        assert len(run.trace) == 0
        assert run.final_state.n_agents == spec.N
        assert run.final_state.time == 0.0

    def test_time_grid_is_exact(self):
        run = run_trial(small_spec())
        assert np.array_equal(run.trace.t, np.arange(len(run.trace)) * 0.01)

    def test_reruns_bit_identical(self):
        spec = small_spec(noise_sigma=0.1)
        a = run_trial(spec)
        b = run_trial(spec)
        for field in ("t", "e_theta", "e_L", "g_n_mean", "num_links", "num_agents"):
            assert np.array_equal(getattr(a.trace, field), getattr(b.trace, field))
        assert np.array_equal(a.final_state.positions, b.final_state.positions)
        assert len(a.snapshots) == len(b.snapshots)
        for sa, sb in zip(a.snapshots, b.snapshots):
            assert sa.time == sb.time
            assert np.array_equal(sa.positions, sb.positions)

    def test_different_seeds_differ(self):
        a = run_trial(small_spec(seed=1))
        b = run_trial(small_spec(seed=2))
        assert not np.array_equal(a.final_state.positions, b.final_state.positions)

    def test_trace_matches_repeated_steps(self):
        # the trial loop shares pair geometry between metrics and forces;
        # it must integrate exactly like the public single-step path
        spec = small_spec(N=8, t_max=0.5)
        run = run_trial(spec)
        rngs = trial_rngs(spec.seed)
        state = SwarmState(sample_initial_positions(spec.N, spec.disk_radius, rngs["init"]))
        for _ in range(50):
            state = step(state, spec, rngs["noise"])
        assert np.array_equal(run.final_state.positions, state.positions)

    def test_agent_count_constant_between_events(self):
        spec = small_spec(
            N=20,
            t_max=2.0,
            events=(RemoveAgents(1.0, fraction=0.25),),
        )
        run = run_trial(spec)
        t = run.trace.t
        n = run.trace.num_agents
        assert (n[t < 1.0] == 20).all()
        assert (n[t >= 1.0] == 15).all()

    def test_lattice_switch_changes_metric_target(self):
        from swarmlattice.geometry import square_grid

        # a perfect square patch scores 0 for L=4; switching to L=6 mid-run
        # must make the recorded regularity jump
        spec = small_spec(
            N=9,
            t_max=2.0,
            control=ControlParams(G_r=0.0, G_n=0.0),
            events=(SetLattice(1.0, new_L=6),),
        )
        run = run_trial(spec)
        # overwrite the sampled initial state via a custom run: instead run
        # the metric check directly on the trace of a frozen swarm
        # (gains zero, so positions never move; only L changes at t=1)
        e = run.trace.e_theta
        t = run.trace.t
        assert not np.array_equal(e[t < 1.0], e[t >= 1.0][: (t < 1.0).sum()])

    def test_early_stop_at_steady_state(self):
        spec = small_spec(N=9, control=ControlParams(G_r=0.0, G_n=0.0), stop_at_steady_state=True)
        run = run_trial(spec)
        # frozen swarm: constant metrics, steady after exactly one window
        assert run.trace.t[-1] == pytest.approx(spec.T_w)
        assert run.trace.t_ss == pytest.approx(spec.T_w)

    def test_trial_keeps_running_while_events_pending(self):
        spec = small_spec(
            N=9,
            t_max=3.0,
            control=ControlParams(G_r=0.0, G_n=0.0),
            events=(RemoveAgents(2.0, fraction=0.2),),
            stop_at_steady_state=True,
        )
        run = run_trial(spec)
        assert run.trace.t[-1] > 2.0

    def test_finalized_stats_match_pure_scan(self):
        for seed in (0, 1, 2):
            spec = small_spec(seed=seed, noise_sigma=0.05)
            run = run_trial(spec)
            scan = steady_state_scan(run.trace, spec.metrics_config())
            assert (run.trace.t_ss, run.trace.e_theta_ss, run.trace.e_L_ss) == scan

    def test_snapshots_at_configured_times(self):
        spec = small_spec(snapshot_times=(0.0, 1.0), t_max=2.0)
        run = run_trial(spec)
        times = [s.time for s in run.snapshots]
        assert times[:2] == [0.0, 1.0]

    def test_snapshot_at_steady_state(self):
        spec = small_spec(
            N=9,
            control=ControlParams(G_r=0.0, G_n=0.0),
            snapshot_times=(),
            snapshot_at_steady_state=True,
            stop_at_steady_state=True,
        )
        run = run_trial(spec)
        assert len(run.snapshots) == 1
        assert run.snapshots[0].time == pytest.approx(run.trace.t_ss)

    def test_adaptive_gains_monotone(self):
        spec = small_spec(
            N=12,
            t_max=3.0,
            controller="main-adaptive",
            control=ControlParams(G_r=15.0, adaptive=True),
        )
        run = run_trial(spec)
        g = run.trace.g_n_mean
        assert (np.diff(g) >= -1e-15).all()
        assert (run.trace.g_n_min >= 0).all()

    def test_controller_consistency_enforced(self):
        with pytest.raises(ValueError):
            ScenarioSpec(controller="main-adaptive", control=ControlParams(adaptive=False))
        with pytest.raises(ValueError):
            ScenarioSpec(controller="baseline", baseline=None, control=ControlParams())
