"""Per-step fixed-point coupling of transport and momentum, and time marching.

Each time step alternates: advance both densities with the current velocity
iterate, then advance the velocity coefficients from the new densities, and
repeat until the coefficient update stalls below tolerance.  Non-convergence
is an error (it signals the step size left the contraction regime), never a
silently accepted state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid1D, GalerkinBasis, build_basis, project, reconstruct
from .eos import EosParams
from .errors import ConfigError, InvariantViolation, NonConvergenceError
from .momentum import MomentumState, StressParams, step_momentum
from .transport import (
    BoundaryData,
    TransportConfig,
    make_boundary_data,
    mass_budget,
    step_transport,
)

__all__ = ["RunConfig", "SimState", "Trajectory", "PicardInfo", "init_state", "picard_step", "run"]

CONE_TOL = 1e-8


@dataclass(frozen=True)
class RunConfig:
    """Fully validated settings for one simulation run."""

    n_cells: int = 128
    n_modes: int = 8
    epsilon: float = 1e-2
    theta: float = 1.0
    dt: float = 1e-3
    horizon: float = 0.1
    mu: float = 1.0
    lam: float = 0.0
    eos: EosParams = field(default_factory=EosParams)
    u_b: object = 0.0  # constant or callable of x
    r_b: float = 1.0
    z_b: float = 1.0
    r0: object = 1.0  # constant or callable of x
    z0: object = 1.0
    u0: object = 0.0
    picard_tol: float = 1e-10
    picard_max: int = 50
    picard_relaxation: float = 1.0
    every_n_steps: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        problems = []
        if not self.horizon > 0:
            problems.append(f"time.horizon must be > 0, got {self.horizon}")
        if not self.picard_tol > 0:
            problems.append(f"picard.tol must be > 0, got {self.picard_tol}")
        if self.picard_max < 1:
            problems.append(f"picard.max must be >= 1, got {self.picard_max}")
        if not 0 < self.picard_relaxation <= 1:
            problems.append(
                f"picard.relaxation must be in (0, 1], got {self.picard_relaxation}"
            )
        if self.every_n_steps < 1:
            problems.append(f"output.every_n_steps must be >= 1, got {self.every_n_steps}")
        if problems:
            raise ConfigError(problems)

    # Derived objects; rebuilt on demand so the config stays a plain value.
    def grid(self) -> Grid1D:
        return Grid1D(self.n_cells)

    def basis(self) -> GalerkinBasis:
        return build_basis(self.n_modes, self.grid())

    def transport_cfg(self) -> TransportConfig:
        return TransportConfig(epsilon=self.epsilon, dt=self.dt, theta=self.theta)

    def stress(self) -> StressParams:
        return StressParams(mu=self.mu, lam=self.lam)

    def boundary(self) -> BoundaryData:
        return make_boundary_data(self.u_b, self.r_b, self.z_b, self.grid(), self.eos)

    def n_steps(self) -> int:
        n = int(round(self.horizon / self.dt))
        if abs(n * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ConfigError(
                f"time.horizon ({self.horizon}) is not an integer multiple of time.dt ({self.dt})"
            )
        return n


@dataclass(frozen=True)
class SimState:
    """Densities on nodes plus velocity coefficients at one time."""

    t: float
    R: np.ndarray
    Z: np.ndarray
    v: np.ndarray


@dataclass
class PicardInfo:
    """Convergence record of one coupled step."""

    iterations: int
    residuals: list
    u_faces: np.ndarray  # converged face velocity actually used for transport


@dataclass
class Trajectory:
    """Snapshots plus per-step diagnostic rows of one run."""

    config: RunConfig
    snapshots: list
    records: list  # one dict per step (module diagnostics)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def _tabulate(spec, x: np.ndarray) -> np.ndarray:
    if callable(spec):
        return np.asarray(spec(x), dtype=float) * np.ones_like(x)
    return float(spec) * np.ones_like(x)


def check_state_invariants(state: SimState, e: EosParams) -> list:
    """Positivity and cone membership; returns a list of violations."""
    problems = []
    if np.any(state.R <= 0):
        problems.append(f"R has a nonpositive node at t={state.t:.6g}")
    if np.any(state.Z <= 0):
        problems.append(f"Z has a nonpositive node at t={state.t:.6g}")
    low = float(np.min(state.Z - e.b_low * state.R))
    high = float(np.min(e.b_high * state.R - state.Z))
    if low < -CONE_TOL:
        problems.append(f"lower cone margin {low:.3g} at t={state.t:.6g}")
    if high < -CONE_TOL:
        problems.append(f"upper cone margin {high:.3g} at t={state.t:.6g}")
    return problems


def init_state(cfg: RunConfig) -> SimState:
    """Tabulate initial data and project the initial velocity excess."""
    grid = cfg.grid()
    basis = cfg.basis()
    bc = cfg.boundary()
    R0 = _tabulate(cfg.r0, grid.nodes)
    Z0 = _tabulate(cfg.z0, grid.nodes)
    problems = []
    if np.any(R0 <= 0) or np.any(Z0 <= 0):
        problems.append("initial densities must be strictly positive at every node")
    if np.any(Z0 < cfg.eos.b_low * R0) or np.any(Z0 > cfg.eos.b_high * R0):
        problems.append(
            "initial densities leave the domination cone "
            f"[{cfg.eos.b_low}, {cfg.eos.b_high}]"
        )
    if problems:
        raise ConfigError(problems)
    u0 = _tabulate(cfg.u0, grid.nodes)
    v0 = project(u0 - bc.u_nodes, basis)
    return SimState(t=0.0, R=R0, Z=Z0, v=v0)


def picard_step(state: SimState, cfg: RunConfig, *, _cache=None) -> tuple:
    """Advance one time step via the segregated fixed-point iteration.

    Returns (new_state, PicardInfo).  Raises NonConvergenceError with the
    residual history when the iteration does not contract to tolerance.
    """
    if _cache is None:
        grid, basis, bc, tcfg, stress = (
            cfg.grid(),
            cfg.basis(),
            cfg.boundary(),
            cfg.transport_cfg(),
            cfg.stress(),
        )
    else:
        grid, basis, bc, tcfg, stress = _cache

    v_k = state.v.copy()
    residuals = []
    omega = cfg.picard_relaxation
    for k in range(cfg.picard_max):
        u_faces = reconstruct(v_k, basis, at="faces") + bc.u_faces
        R_new = step_transport(state.R, u_faces, tcfg, bc, "R", grid)
        Z_new = step_transport(state.Z, u_faces, tcfg, bc, "Z", grid)
        mstate = step_momentum(
            MomentumState(v=state.v),
            R_new,
            Z_new,
            state.R,
            state.Z,
            cfg.dt,
            basis,
            bc,
            cfg.eos,
            stress,
            cfg.epsilon,
            v_iter=v_k,
        )
        v_next = (1.0 - omega) * v_k + omega * mstate.v
        res = float(np.linalg.norm(v_next - v_k))
        residuals.append(res)
        v_k = v_next
        if res < cfg.picard_tol:
            new_state = SimState(t=state.t + cfg.dt, R=R_new, Z=Z_new, v=v_k)
            return new_state, PicardInfo(
                iterations=k + 1, residuals=residuals, u_faces=u_faces
            )
    raise NonConvergenceError(
        f"fixed-point iteration did not converge in {cfg.picard_max} iterations "
        f"at t={state.t:.6g} (last residual {residuals[-1]:.3g}); "
        "the time step is likely too large for the contraction regime",
        residuals,
    )


def run(cfg: RunConfig, reference=None) -> Trajectory:
    """March from t = 0 to the horizon, collecting per-step diagnostics.

    reference, when given, is a callable t -> (r, z, u_nodes) used to attach
    a relative-energy column.  Identical configs produce bit-identical
    trajectories.
    """
    from . import diagnostics  # deferred to avoid an import cycle

    grid = cfg.grid()
    basis = cfg.basis()
    bc = cfg.boundary()
    tcfg = cfg.transport_cfg()
    stress = cfg.stress()
    cache = (grid, basis, bc, tcfg, stress)

    state = init_state(cfg)
    bad = check_state_invariants(state, cfg.eos)
    if bad:
        raise InvariantViolation("; ".join(bad))

    snapshots = [state]
    records = []
    n_steps = cfg.n_steps()
    for step in range(n_steps):
        try:
            new_state, info = picard_step(state, cfg, _cache=cache)
        except NonConvergenceError as exc:
            raise NonConvergenceError(
                f"step {step + 1} (t={state.t + cfg.dt:.6g}): {exc}", exc.residuals
            ) from exc
        bad = check_state_invariants(new_state, cfg.eos)
        if bad:
            raise InvariantViolation("; ".join(bad))

        budget = diagnostics.energy_inequality_residual(
            state, new_state, basis, grid, bc, cfg.eos, stress, cfg.epsilon, cfg.dt
        )
        rec = {
            "t": new_state.t,
            "mass_R": grid.integrate(new_state.R),
            "mass_Z": grid.integrate(new_state.Z),
            "kinetic": budget.kinetic,
            "helmholtz": budget.helmholtz,
            "dissipation_cum": budget.dissipation,
            "residual_E7": budget.residual,
            "residual_E7_aux": budget.residual_aux,
            "min_R": float(np.min(new_state.R)),
            "max_R": float(np.max(new_state.R)),
            "min_Z": float(np.min(new_state.Z)),
            "max_Z": float(np.max(new_state.Z)),
            "cone_margin_low": float(np.min(new_state.Z - cfg.eos.b_low * new_state.R)),
            "cone_margin_high": float(np.min(cfg.eos.b_high * new_state.R - new_state.Z)),
            "picard_iters": info.iterations,
            "picard_residuals": info.residuals,
            "mass_budget_R": mass_budget(
                state.R, new_state.R, info.u_faces, tcfg, bc, "R", grid
            ),
            "mass_budget_Z": mass_budget(
                state.Z, new_state.Z, info.u_faces, tcfg, bc, "Z", grid
            ),
            "eps_dissipation": budget.eps_dissipation,
        }
        if reference is not None:
            r_ref, z_ref, u_ref = reference(new_state.t)
            rec["rel_energy"] = diagnostics.relative_energy(
                new_state, (r_ref, z_ref, u_ref), cfg.eos, basis, grid, bc
            )
        records.append(rec)
        state = new_state
        if (step + 1) % cfg.every_n_steps == 0 or step + 1 == n_steps:
            snapshots.append(state)

    # cumulative dissipation for the trace
    cum = 0.0
    for rec in records:
        cum += rec["dissipation_cum"]
        rec["dissipation_cum"] = cum
    return Trajectory(config=cfg, snapshots=snapshots, records=records)
