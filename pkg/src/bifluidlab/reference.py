"""Reference solutions for relative-energy and convergence studies.

Two kinds are provided: exact uniform steady states (constant densities
carried by a constant boundary velocity) and fine-grid self-reference runs
restricted back to the coarse grid by block averaging.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .coupler import RunConfig, Trajectory, run
from .errors import DomainError

__all__ = ["ReferenceSpec", "uniform_steady", "fine_reference", "restrict"]


@dataclass(frozen=True)
class ReferenceSpec:
    """A callable reference t -> (r, z, u_nodes) with a description."""

    kind: str
    describe: str
    _fn: object

    def __call__(self, t: float):
        return self._fn(t)


def uniform_steady(r_const: float, z_const: float, u_const: float, cfg: RunConfig) -> ReferenceSpec:
    """Spatially uniform state transported by a constant velocity.

    Constant densities with a constant velocity have zero flux divergence,
    zero pressure gradient and zero stress, so the triple is an exact steady
    solution of the semi-discrete scheme whenever the boundary data agree.
    """
    if r_const <= 0 or z_const <= 0:
        raise DomainError("uniform_steady requires strictly positive densities")
    if not cfg.eos.in_cone(r_const, z_const):
        raise DomainError("uniform_steady state lies outside the domination cone")
    grid = cfg.grid()
    r = np.full(grid.n_cells, float(r_const))
    z = np.full(grid.n_cells, float(z_const))
    u = np.full(grid.n_cells, float(u_const))

    def fn(t: float):
        return r, z, u

    return ReferenceSpec(
        kind="uniform_steady",
        describe=f"uniform (R={r_const:g}, Z={z_const:g}, u={u_const:g})",
        _fn=fn,
    )


def restrict(field: np.ndarray, k: int) -> np.ndarray:
    """Block-average a fine cell field onto a grid coarsened by factor k."""
    field = np.asarray(field, dtype=float)
    if k < 1 or field.shape[-1] % k != 0:
        raise DomainError(f"cannot restrict length {field.shape[-1]} by factor {k}")
    return field.reshape(field.shape[:-1] + (-1, k)).mean(axis=-1)


def fine_reference(cfg: RunConfig, refine: int = 2) -> tuple[ReferenceSpec, Trajectory]:
    """Run a refined copy of cfg and expose its restriction as a reference.

    Space is refined by `refine`, the mode count by min(refine, 4), and the
    time step by refine**2 (matching the first-order-in-time, second-order-
    in-space balance).  The returned callable snaps t to the nearest stored
    fine snapshot and block-averages down to the coarse grid.
    """
    if refine < 2:
        raise DomainError("fine_reference requires refine >= 2")
    fine_cfg = dataclasses.replace(
        cfg,
        n_cells=cfg.n_cells * refine,
        n_modes=cfg.n_modes * min(refine, 4),
        dt=cfg.dt / refine**2,
        every_n_steps=cfg.every_n_steps * refine**2,
    )
    traj = run(fine_cfg)
    basis = fine_cfg.basis()
    grid = fine_cfg.grid()
    bc = fine_cfg.boundary()
    times = [s.t for s in traj.snapshots]

    cache: dict[int, tuple] = {}

    def fn(t: float):
        idx = int(np.argmin([abs(t - ts) for ts in times]))
        if idx not in cache:
            snap = traj.snapshots[idx]
            from .discretization import reconstruct

            u_fine = reconstruct(snap.v, basis) + bc.u_nodes
            cache[idx] = (
                restrict(snap.R, refine),
                restrict(snap.Z, refine),
                restrict(u_fine, refine),
            )
        return cache[idx]

    spec = ReferenceSpec(
        kind="fine_reference",
        describe=f"self-reference refined x{refine} ({fine_cfg.n_cells} cells)",
        _fn=fn,
    )
    return spec, traj
