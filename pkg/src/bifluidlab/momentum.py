"""Galerkin update of the velocity coefficients.

The velocity is u = reconstruct(v) + u_B with v the coefficients of the
boundary-vanishing sine modes.  One step solves the backward-difference
momentum identity

    M_new v_new + b_new - (M_old v_old + b_old) = dt * F,

where M is the density-weighted Gram matrix, b the boundary-lift momentum,
and F collects convection, pressure work, Newtonian stress (implicit in
v_new) and the diffusive density-gradient correction.  Everything that is
not viscous is evaluated at the caller-supplied velocity iterate, which is
what makes the per-step fixed-point loop linear in each pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .discretization import GalerkinBasis, reconstruct
from .eos import EosParams, pressure
from .errors import DomainError, SolverError
from .transport import BoundaryData

__all__ = [
    "StressParams",
    "MomentumState",
    "stress_1d",
    "assemble_galerkin_system",
    "step_momentum",
    "boundary_lift_momentum",
    "density_gradient",
]


@dataclass(frozen=True)
class StressParams:
    """Newtonian viscosity coefficients; 2*mu + lambda must be positive."""

    mu: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        if not self.lam + 2.0 * self.mu > 0:
            raise DomainError(
                f"lambda + 2*mu must be > 0, got {self.lam + 2.0 * self.mu}"
            )

    @property
    def total(self) -> float:
        return 2.0 * self.mu + self.lam


@dataclass(frozen=True)
class MomentumState:
    """Velocity coefficients of u - u_B in the sine basis."""

    v: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.v)):
            raise DomainError("velocity coefficients must be finite")


def stress_1d(du_dx, s: StressParams):
    """1D Newtonian stress (2*mu + lambda) * du/dx."""
    return s.total * np.asarray(du_dx, dtype=float)


def density_gradient(rho: np.ndarray, h: float) -> np.ndarray:
    """Second-order central differences, one-sided at the boundary cells."""
    rho = np.asarray(rho, dtype=float)
    out = np.empty_like(rho)
    out[1:-1] = (rho[2:] - rho[:-2]) / (2.0 * h)
    if len(rho) >= 3:
        out[0] = (-3.0 * rho[0] + 4.0 * rho[1] - rho[2]) / (2.0 * h)
        out[-1] = (3.0 * rho[-1] - 4.0 * rho[-2] + rho[-3]) / (2.0 * h)
    else:  # pragma: no cover - degenerate grids
        out[0] = out[-1] = (rho[-1] - rho[0]) / h
    return out


def _quad(basis: GalerkinBasis, integrand: np.ndarray) -> np.ndarray:
    """Vector of midpoint integrals of integrand against each mode table row."""
    return basis.grid.h * (integrand @ basis.modes.T)


def boundary_lift_momentum(rho: np.ndarray, basis: GalerkinBasis, bc: BoundaryData) -> np.ndarray:
    """b_i = integral of (R+Z) u_B w_i."""
    return basis.grid.h * (basis.modes @ (rho * bc.u_nodes))


def assemble_galerkin_system(
    R: np.ndarray,
    Z: np.ndarray,
    u_prev: np.ndarray,
    basis: GalerkinBasis,
    bc: BoundaryData,
    e: EosParams,
    s: StressParams,
    epsilon: float,
    du_prev: np.ndarray | None = None,
):
    """Density-weighted Gram matrix and the full force vector at u_prev.

    u_prev and du_prev are node tabulations of the current velocity and its
    derivative; an omitted du_prev defaults to zero, which drops the viscous
    and density-gradient force contributions.
    """
    rho = np.asarray(R, dtype=float) + np.asarray(Z, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("assembly requires R + Z > 0 at every node")
    h = basis.grid.h
    M = h * (basis.modes * rho) @ basis.modes.T
    M = 0.5 * (M + M.T)

    if du_prev is None:
        du_prev = np.zeros_like(u_prev)
    P = pressure((R, Z), e)
    conv = h * (basis.mode_derivs @ (rho * u_prev * u_prev))
    pres = h * (basis.mode_derivs @ P)
    visc = -s.total * h * (basis.mode_derivs @ du_prev)
    drho = density_gradient(rho, h)
    eps_corr = -epsilon * h * (basis.modes @ (drho * du_prev))
    return M, conv + pres + visc + eps_corr


def step_momentum(
    state: MomentumState,
    R_new: np.ndarray,
    Z_new: np.ndarray,
    R_old: np.ndarray,
    Z_old: np.ndarray,
    dt: float,
    basis: GalerkinBasis,
    bc: BoundaryData,
    e: EosParams,
    s: StressParams,
    epsilon: float,
    v_iter: np.ndarray | None = None,
) -> MomentumState:
    """One backward-difference momentum step.

    The viscous term is implicit in v_new; convection, pressure and the
    density-gradient correction are frozen at v_iter (defaults to the
    incoming state), evaluated with the new densities.
    """
    rho_new = np.asarray(R_new, dtype=float) + np.asarray(Z_new, dtype=float)
    rho_old = np.asarray(R_old, dtype=float) + np.asarray(Z_old, dtype=float)
    if np.any(rho_new <= 0) or np.any(rho_old <= 0):
        raise DomainError("step_momentum requires strictly positive total density")
    if v_iter is None:
        v_iter = state.v
    h = basis.grid.h
    n_modes = basis.n_modes

    u_k = reconstruct(v_iter, basis) + bc.u_nodes
    du_k = reconstruct(v_iter, basis, at="derivs") + bc.du_nodes

    M_new = h * (basis.modes * rho_new) @ basis.modes.T
    M_new = 0.5 * (M_new + M_new.T)
    M_old = h * (basis.modes * rho_old) @ basis.modes.T

    P = pressure((R_new, Z_new), e)
    conv = h * (basis.mode_derivs @ (rho_new * u_k * u_k))
    pres = h * (basis.mode_derivs @ P)
    drho = density_gradient(rho_new, h)
    eps_corr = -epsilon * h * (basis.modes @ (drho * u_k))

    K = h * (basis.mode_derivs @ basis.mode_derivs.T)
    k_B = h * (basis.mode_derivs @ bc.du_nodes)

    b_new = boundary_lift_momentum(rho_new, basis, bc)
    b_old = boundary_lift_momentum(rho_old, basis, bc)

    A = M_new + dt * s.total * K
    rhs = (
        M_old @ state.v
        + b_old
        - b_new
        + dt * (conv + pres + eps_corr - s.total * k_B)
    )
    try:
        c, low = scipy.linalg.cho_factor(A)
        v_new = scipy.linalg.cho_solve((c, low), rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - M is SPD by construction
        raise SolverError(f"momentum system not SPD: {exc}") from exc
    if not np.all(np.isfinite(v_new)) or np.linalg.norm(v_new) > 1e6:
        raise SolverError(
            f"momentum update diverged (|v| = {np.linalg.norm(v_new):.3g})"
        )
    assert v_new.shape == (n_modes,)
    return MomentumState(v=v_new)
