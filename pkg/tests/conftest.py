"""Shared fixtures: canonical parameters and the randomized smooth-data suite.

The randomized suite keeps densities and slopes inside the region where the
pressure potential is certified convex along the sampled rays (moderate
densities, slope near one), which is what the stability diagnostics assume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from bifluidlab import EosParams, RunConfig, Trajectory, run

SUITE_SIZE = 20


@pytest.fixture(scope="session")
def eos2() -> EosParams:
    """Quadratic two-power law with unit coefficients and cone [1/2, 2]."""
    return EosParams(a1=1.0, a2=1.0, gamma=2.0, beta=2.0, b_low=0.5, b_high=2.0)


@dataclass
class SuiteRun:
    seed: int
    config: RunConfig
    trajectory: Trajectory
    trajectory_half_dt: Trajectory


def make_random_config(seed: int, eos: EosParams, *, dt: float = 1e-3, horizon: float = 0.2) -> RunConfig:
    """Smooth positive cone-respecting data with inflow/outflow boundaries."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(2.6, 3.2)
    amp_r = rng.uniform(0.05, 0.2)
    amp_s = rng.uniform(0.02, 0.1)
    amp_u = rng.uniform(0.05, 0.3)
    k_r = rng.integers(1, 4)
    k_s = rng.integers(1, 4)
    phase = rng.uniform(0, 2 * np.pi)
    u_b = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 0.4)

    def r0(x, base=base, amp=amp_r, k=k_r, phase=phase):
        return base + amp * np.sin(2 * np.pi * k * x + phase)

    def slope(x, amp=amp_s, k=k_s):
        return 1.0 + amp * np.cos(2 * np.pi * k * x)

    def z0(x):
        return slope(x) * r0(x)

    def u0(x, amp=amp_u, u_b=u_b):
        return u_b + amp * np.sin(np.pi * x)

    return RunConfig(
        n_cells=96,
        n_modes=6,
        epsilon=1e-2,
        dt=dt,
        horizon=horizon,
        eos=eos,
        u_b=float(u_b),
        r_b=float(base),
        z_b=float(base),
        r0=r0,
        z0=z0,
        u0=u0,
        picard_tol=1e-10,
        picard_max=50,
    )


@pytest.fixture(scope="session")
def suite(eos2) -> list:
    """Twenty randomized runs, each also executed at half the time step."""
    runs = []
    for seed in range(SUITE_SIZE):
        cfg = make_random_config(seed, eos2)
        import dataclasses

        cfg_half = dataclasses.replace(cfg, dt=cfg.dt / 2)
        runs.append(
            SuiteRun(
                seed=seed,
                config=cfg,
                trajectory=run(cfg),
                trajectory_half_dt=run(cfg_half),
            )
        )
    return runs
