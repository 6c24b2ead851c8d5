"""Executable forms of the energy and stability inequalities.

Provides the per-step energy budget, the relative-energy functional with its
Gronwall fit, the convex kinetic-envelope function, and coarse-graining
defect proxies (Jensen gaps of pressure, potential and kinetic energy over
block averages) together with their compatibility sandwich checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discretization import Grid1D, GalerkinBasis, reconstruct
from .eos import (
    EosParams,
    bregman_h,
    helmholtz_closed,
    helmholtz_hessian,
    pressure,
)
from .errors import DomainError
from .momentum import StressParams, density_gradient
from .transport import BoundaryData

__all__ = [
    "EnergyBudget",
    "RelEnergyRecord",
    "DefectProxy",
    "total_energy",
    "energy_inequality_residual",
    "relative_energy",
    "gronwall_check",
    "kinetic_envelope",
    "defect_proxy",
]


@dataclass(frozen=True)
class EnergyBudget:
    """All terms of the discrete energy inequality for one step.

    Flux and dissipation terms are time-integrated over the step
    (trapezoidal rule).  residual uses the boundary grouping with the plain
    boundary-data potential at inflow; residual_aux uses the relative-form
    inflow grouping instead.
    """

    kinetic: float
    helmholtz: float
    dissipation: float
    outflow_flux: float
    inflow_flux: float
    eps_dissipation: float
    rhs_terms: tuple
    residual: float
    residual_aux: float


@dataclass(frozen=True)
class RelEnergyRecord:
    t: float
    value: float
    gronwall_bound: float = math.nan


@dataclass(frozen=True)
class DefectProxy:
    """Blockwise coarse-graining gaps and sandwich margins for one snapshot."""

    delta_p: np.ndarray
    delta_h: np.ndarray
    delta_kinetic: np.ndarray
    trace_ratio_low: float
    trace_ratio_high: float
    sandwich_ok: bool
    trace_ok: bool


def _velocity(state, basis: GalerkinBasis, bc: BoundaryData):
    u = reconstruct(state.v, basis) + bc.u_nodes
    du = reconstruct(state.v, basis, at="derivs") + bc.du_nodes
    return u, du


def total_energy(state, basis: GalerkinBasis, grid: Grid1D, bc: BoundaryData, e: EosParams):
    """(kinetic, helmholtz) integrals of one state; kinetic uses u - u_B."""
    u, _ = _velocity(state, basis, bc)
    v_field = u - bc.u_nodes
    kinetic = 0.5 * grid.integrate((state.R + state.Z) * v_field**2)
    helm = grid.integrate(helmholtz_closed((state.R, state.Z), e))
    return kinetic, helm


def _boundary_terms(state, bc: BoundaryData, e: EosParams):
    """Outflow and inflow potential fluxes plus the relative-form variant.

    Boundary traces of the densities use the adjacent cell value, matching
    the outflow flux discretization of the transport scheme.
    """
    out_flux = 0.0
    in_flux = 0.0
    in_flux_rel = 0.0
    ends = (
        (0, -float(bc.u_faces[0])),   # x = 0, u_B . n = -u_B(0)
        (-1, float(bc.u_faces[-1])),  # x = 1, u_B . n = +u_B(1)
    )
    for idx, ubn in ends:
        trace = (float(state.R[idx]), float(state.Z[idx]))
        if ubn < 0.0:  # inflow
            hb = helmholtz_closed((bc.R_B, bc.Z_B), e)
            in_flux += hb * ubn
            in_flux_rel += float(bregman_h((bc.R_B, bc.Z_B), trace, e)) * ubn
        else:  # outflow (or tangential)
            out_flux += float(helmholtz_closed(trace, e)) * ubn
    return out_flux, in_flux, in_flux_rel


def energy_inequality_residual(
    state_old,
    state_new,
    basis: GalerkinBasis,
    grid: Grid1D,
    bc: BoundaryData,
    e: EosParams,
    s: StressParams,
    epsilon: float,
    dt: float,
) -> EnergyBudget:
    """Evaluate every term of the discrete energy inequality over one step."""

    def halves(state):
        u, du = _velocity(state, basis, bc)
        R, Z = state.R, state.Z
        rho = R + Z
        dissip = grid.integrate(s.total * du * du)
        h_rr, h_rz, h_zz = helmholtz_hessian((R, Z), e)
        dR = density_gradient(R, grid.h)
        dZ = density_gradient(Z, grid.h)
        eps_term = epsilon * grid.integrate(
            h_rr * dR * dR + 2.0 * h_rz * dR * dZ + h_zz * dZ * dZ
        )
        out_flux, in_flux, in_flux_rel = _boundary_terms(state, bc, e)
        P = pressure((R, Z), e)
        rhs1 = -grid.integrate((rho * u * u + P) * bc.du_nodes)
        rhs2 = grid.integrate(rho * u * bc.du_nodes * bc.u_nodes)
        rhs3 = grid.integrate(s.total * du * bc.du_nodes)
        return dissip, eps_term, out_flux, in_flux, in_flux_rel, rhs1, rhs2, rhs3

    old = halves(state_old)
    new = halves(state_new)
    avg = tuple(0.5 * (a + b) for a, b in zip(old, new))
    dissip, eps_term, out_flux, in_flux, in_flux_rel, rhs1, rhs2, rhs3 = avg

    kin_old, helm_old = total_energy(state_old, basis, grid, bc, e)
    kin_new, helm_new = total_energy(state_new, basis, grid, bc, e)

    lhs = (
        (kin_new + helm_new)
        - (kin_old + helm_old)
        + dt * (dissip + out_flux + in_flux + eps_term)
    )
    rhs = dt * (rhs1 + rhs2 + rhs3)
    residual = lhs - rhs
    # Relative-form grouping: the inflow term carries the Bregman distance to
    # the boundary data instead of the plain boundary-data potential.
    residual_aux = residual + dt * (in_flux_rel - in_flux)

    return EnergyBudget(
        kinetic=kin_new,
        helmholtz=helm_new,
        dissipation=dt * dissip,
        outflow_flux=dt * out_flux,
        inflow_flux=dt * in_flux,
        eps_dissipation=dt * eps_term,
        rhs_terms=(dt * rhs1, dt * rhs2, dt * rhs3),
        residual=float(residual),
        residual_aux=float(residual_aux),
    )


def relative_energy(state, ref, e: EosParams, basis: GalerkinBasis, grid: Grid1D, bc: BoundaryData) -> float:
    """Distance to a reference triple: kinetic difference plus Bregman part."""
    r_ref, z_ref, u_ref = ref
    r_ref = np.asarray(r_ref, dtype=float)
    z_ref = np.asarray(z_ref, dtype=float)
    if np.any(r_ref <= 0) or np.any(z_ref <= 0):
        raise DomainError("relative_energy requires a strictly positive reference")
    u, _ = _velocity(state, basis, bc)
    rho = state.R + state.Z
    kin = 0.5 * rho * (u - np.asarray(u_ref, dtype=float)) ** 2
    breg = bregman_h((state.R, state.Z), (r_ref, z_ref), e)
    return grid.integrate(kin + breg)


def gronwall_check(series, c_max: float = 50.0, atol: float = 1e-12):
    """Fit the smallest exponential envelope over a relative-energy series.

    C = max over t > 0 of log((value(t)+atol)/(value(0)+atol))/t.  Passes iff
    C <= c_max and, when the series starts at zero (within atol), it stays
    below 100*atol throughout.
    """
    if not series:
        raise DomainError("gronwall_check needs a non-empty series")
    v0 = max(series[0].value, 0.0) + atol
    c_fit = 0.0
    for rec in series[1:]:
        if rec.t <= series[0].t:
            continue
        v = max(rec.value, 0.0) + atol
        c_fit = max(c_fit, math.log(v / v0) / (rec.t - series[0].t))
    ok = c_fit <= c_max
    if series[0].value <= atol:
        ok = ok and all(rec.value <= 100.0 * atol for rec in series)
    return c_fit, ok


def kinetic_envelope(r: float, m: float) -> float:
    """Convex lower-semicontinuous envelope of the kinetic energy density."""
    if r < 0:
        raise DomainError("kinetic_envelope requires r >= 0")
    if r > 0:
        return m * m / r
    return 0.0 if m == 0.0 else math.inf


def _block_avg(f: np.ndarray, k: int) -> np.ndarray:
    return np.asarray(f, dtype=float).reshape(-1, k).mean(axis=1)


def defect_proxy(state, k: int, e: EosParams, basis: GalerkinBasis, grid: Grid1D, bc: BoundaryData) -> DefectProxy:
    """Coarse-graining Jensen gaps over k-cell blocks of one snapshot.

    delta_p / delta_h are the pressure and potential gaps, delta_kinetic the
    envelope gap of m^2/rho with m the momentum density.  The convexity
    sandwich a_low*delta_p <= delta_h <= a_high*delta_p is checked blockwise
    with the analytic power-law constants, the trace sandwich with
    min(1, 1/a_high) and max(1, 1/a_low).
    """
    if grid.n_cells % k != 0:
        raise DomainError(f"coarsening factor {k} does not divide n_cells {grid.n_cells}")
    u, _ = _velocity(state, basis, bc)
    rho = state.R + state.Z
    m = rho * u

    P = pressure((state.R, state.Z), e)
    H = helmholtz_closed((state.R, state.Z), e)
    Ek = m * m / rho

    R_a, Z_a = _block_avg(state.R, k), _block_avg(state.Z, k)
    rho_a, m_a = _block_avg(rho, k), _block_avg(m, k)
    delta_p = _block_avg(P, k) - pressure((R_a, Z_a), e)
    delta_h = _block_avg(H, k) - helmholtz_closed((R_a, Z_a), e)
    delta_k = _block_avg(Ek, k) - m_a * m_a / rho_a

    a_low = 1.0 / (max(e.gamma, e.beta) - 1.0)
    a_high = 1.0 / (min(e.gamma, e.beta) - 1.0)
    tol = 1e-8
    sandwich_ok = bool(
        np.all(a_low * delta_p <= delta_h + tol) and np.all(delta_h <= a_high * delta_p + tol)
    )

    e_proxy = delta_h + 0.5 * delta_k
    tr_proxy = delta_p + delta_k
    c_low = min(1.0, 1.0 / a_high)
    c_high = max(1.0, 1.0 / a_low)
    trace_ok = bool(
        np.all(c_low * e_proxy <= tr_proxy + tol)
        and np.all(tr_proxy <= c_high * e_proxy + tol)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(np.abs(e_proxy) > 1e-12, tr_proxy / e_proxy, np.nan)
    finite = ratios[np.isfinite(ratios)]
    lo = float(np.min(finite)) if finite.size else math.nan
    hi = float(np.max(finite)) if finite.size else math.nan
    return DefectProxy(
        delta_p=delta_p,
        delta_h=delta_h,
        delta_kinetic=delta_k,
        trace_ratio_low=lo,
        trace_ratio_high=hi,
        sandwich_ok=sandwich_ok,
        trace_ok=trace_ok,
    )
