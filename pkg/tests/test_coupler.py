"""Coupled solver tests: steady exactness, contraction, determinism, refinement."""

import dataclasses
import pickle

import numpy as np
import pytest

from bifluidlab import (
    ConfigError,
    InvariantViolation,
    NonConvergenceError,
    RunConfig,
    init_state,
    picard_step,
    run,
    uniform_steady,
)
from conftest import make_random_config


def steady_config(eos, **overrides):
    base = dict(
        n_cells=64, n_modes=4, epsilon=1e-2, dt=1e-3, horizon=0.01,
        eos=eos, u_b=0.5, r_b=1.0, z_b=1.0, r0=1.0, z0=1.0, u0=0.5,
    )
    base.update(overrides)
    return RunConfig(**base)


class TestConfig:
    def test_horizon_must_divide(self, eos2):
        cfg = steady_config(eos2, dt=3e-3, horizon=0.01)
        with pytest.raises(ConfigError):
            cfg.n_steps()

    def test_validation_collects_all_problems(self, eos2):
        with pytest.raises(ConfigError) as exc_info:
            RunConfig(horizon=-1.0, picard_tol=-1.0, picard_max=0, eos=eos2)
        assert len(exc_info.value.violations) == 3

    def test_init_rejects_cone_violation(self, eos2):
        cfg = steady_config(eos2, z0=5.0)  # slope 5 > b_high = 2
        with pytest.raises(ConfigError):
            init_state(cfg)

    def test_init_rejects_vacuum(self, eos2):
        cfg = steady_config(eos2, r0=lambda x: x - 0.5, z0=lambda x: x - 0.5)
        with pytest.raises(ConfigError):
            init_state(cfg)


class TestSteadyState:
    def test_uniform_state_is_exact_fixed_point(self, eos2):
        cfg = steady_config(eos2)
        state = init_state(cfg)
        new_state, info = picard_step(state, cfg)
        assert info.iterations == 1
        assert info.residuals[0] == pytest.approx(0.0, abs=1e-13)
        assert np.max(np.abs(new_state.R - state.R)) < 1e-13
        assert np.max(np.abs(new_state.Z - state.Z)) < 1e-13
        assert np.max(np.abs(new_state.v - state.v)) < 1e-13

    def test_full_run_stays_steady(self, eos2):
        cfg = steady_config(eos2, horizon=0.05)
        traj = run(cfg, reference=uniform_steady(1.0, 1.0, 0.5, cfg))
        last = traj.snapshots[-1]
        assert np.max(np.abs(last.R - 1.0)) < 1e-12
        assert np.max(np.abs(last.Z - 1.0)) < 1e-12
        assert max(abs(r["residual_E7"]) for r in traj.records) < 1e-12
        assert max(r["rel_energy"] for r in traj.records) < 1e-24


class TestPicard:
    def test_residuals_decrease(self, eos2):
        cfg = make_random_config(3, eos2, horizon=1e-3)
        state = init_state(cfg)
        _, info = picard_step(state, cfg)
        res = info.residuals
        assert all(res[i + 1] < res[i] for i in range(len(res) - 1))

    def test_nonconvergence_raises_with_history(self, eos2):
        cfg = dataclasses.replace(make_random_config(1, eos2), picard_max=1, picard_tol=1e-16)
        state = init_state(cfg)
        with pytest.raises(NonConvergenceError) as exc_info:
            picard_step(state, cfg)
        assert len(exc_info.value.residuals) == 1

    def test_relaxation_changes_path_not_limit(self, eos2):
        cfg = make_random_config(5, eos2, horizon=1e-3)
        cfg_relaxed = dataclasses.replace(cfg, picard_relaxation=0.8)
        s1, _ = picard_step(init_state(cfg), cfg)
        s2, _ = picard_step(init_state(cfg_relaxed), cfg_relaxed)
        assert np.max(np.abs(s1.v - s2.v)) < 1e-8


class TestRun:
    def test_determinism(self, eos2):
        cfg = make_random_config(7, eos2, horizon=0.01)
        t1, t2 = run(cfg), run(cfg)
        for a, b in zip(t1.snapshots, t2.snapshots):
            assert np.array_equal(a.R, b.R)
            assert np.array_equal(a.Z, b.Z)
            assert np.array_equal(a.v, b.v)
        assert pickle.dumps(t1.records) == pickle.dumps(t2.records)

    def test_invariant_violation_raised_for_escaping_cone(self, eos2):
        # Boundary data on the cone edge with inflow drives the state to the
        # edge; shrinking the cone after the fact must be caught at init.
        eos_tight = dataclasses.replace(eos2, b_low=0.99, b_high=1.01)
        cfg = steady_config(eos_tight, z0=1.05)
        with pytest.raises((ConfigError, InvariantViolation)):
            run(cfg)

    def test_snapshot_cadence(self, eos2):
        cfg = make_random_config(2, eos2, horizon=0.01)
        cfg = dataclasses.replace(cfg, every_n_steps=4)
        traj = run(cfg)
        # Initial state, steps 4 and 8, and the forced final step 10.
        assert [round(t, 6) for t in traj.times()] == [0.0, 0.004, 0.008, 0.01]

    def test_refinement_coherence(self, eos2):
        # Halving h and quartering dt must shrink the distance to a heavily
        # refined control run.
        cfg = make_random_config(11, eos2, horizon=0.02)
        cfg = dataclasses.replace(cfg, n_cells=32, n_modes=4)
        fine = dataclasses.replace(cfg, n_cells=64, n_modes=4, dt=cfg.dt / 4)
        control = dataclasses.replace(cfg, n_cells=128, n_modes=4, dt=cfg.dt / 16)

        from bifluidlab import restrict

        R_ctrl = run(control).snapshots[-1].R
        err_coarse = np.max(np.abs(run(cfg).snapshots[-1].R - restrict(R_ctrl, 4)))
        err_fine = np.max(np.abs(run(fine).snapshots[-1].R - restrict(R_ctrl, 2)))
        assert err_fine < err_coarse
