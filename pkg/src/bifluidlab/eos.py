"""Two-species isentropic equation of state and its pressure potential.

Implements the two-power pressure law P(R, Z) = a1*R**gamma + a2*Z**beta,
the associated potential H obtained by integrating P along rays of constant
Z/R, analytic derivatives of both, and the certification sweep that measures
the convexity constants the stability diagnostics rely on.

All functions are pure and accept either scalars or numpy arrays for the
density arguments.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificationError, DomainError

__all__ = [
    "EosParams",
    "StatePoint",
    "ConvexityReport",
    "pressure",
    "pressure_grad",
    "helmholtz_quad",
    "helmholtz_closed",
    "helmholtz_grad",
    "helmholtz_hessian",
    "euler_identity_residual",
    "convexity_constants",
    "bregman_h",
    "sample_cone",
]


@dataclass(frozen=True)
class EosParams:
    """Coefficients of the two-power pressure law plus the domination cone.

    a1, a2      pressure coefficients (> 0)
    gamma, beta adiabatic exponents (> 1)
    b_low       lower domination slope (> 0)
    b_high      upper domination slope (> b_low)
    """

    a1: float = 1.0
    a2: float = 1.0
    gamma: float = 2.0
    beta: float = 2.0
    b_low: float = 0.5
    b_high: float = 2.0

    def __post_init__(self):
        problems = []
        if not self.a1 > 0:
            problems.append(f"a1 must be > 0, got {self.a1}")
        if not self.a2 > 0:
            problems.append(f"a2 must be > 0, got {self.a2}")
        if not self.gamma > 1:
            problems.append(f"gamma must be > 1, got {self.gamma}")
        if not self.beta > 1:
            problems.append(f"beta must be > 1, got {self.beta}")
        if not 0 < self.b_low < self.b_high < math.inf:
            problems.append(
                f"slopes must satisfy 0 < b_low < b_high, got "
                f"b_low={self.b_low}, b_high={self.b_high}"
            )
        if problems:
            raise DomainError("; ".join(problems))

    def in_cone(self, R, Z, tol: float = 0.0) -> bool:
        """True iff b_low*R <= Z <= b_high*R everywhere (closed cone)."""
        R = np.asarray(R, dtype=float)
        Z = np.asarray(Z, dtype=float)
        return bool(
            np.all(Z >= self.b_low * R - tol) and np.all(Z <= self.b_high * R + tol)
        )


@dataclass(frozen=True)
class StatePoint:
    """A single (R, Z) density pair in the closed positive quadrant."""

    R: float
    Z: float

    def __post_init__(self):
        if self.R < 0 or self.Z < 0:
            raise DomainError(f"densities must be nonnegative, got ({self.R}, {self.Z})")

    def in_cone(self, e: EosParams) -> bool:
        return e.b_low * self.R <= self.Z <= e.b_high * self.R


@dataclass(frozen=True)
class ConvexityReport:
    """Measured structural constants of the equation of state."""

    a_low: float
    a_high: float
    gamma_coercive: float
    hessian_min_eig: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.hessian_min_eig > 0


def _rz(p) -> tuple:
    """Accept a StatePoint or a (R, Z) pair of scalars/arrays."""
    if isinstance(p, StatePoint):
        return p.R, p.Z
    R, Z = p
    return np.asarray(R, dtype=float), np.asarray(Z, dtype=float)


def pressure(p, e: EosParams):
    """P(R, Z) = a1*R**gamma + a2*Z**beta. Vanishes at the vacuum point."""
    R, Z = _rz(p)
    if np.any(np.asarray(R) < 0) or np.any(np.asarray(Z) < 0):
        raise DomainError("pressure requires R >= 0 and Z >= 0")
    return e.a1 * np.power(R, e.gamma) + e.a2 * np.power(Z, e.beta)


def pressure_grad(p, e: EosParams):
    """(dP/dR, dP/dZ) on the open positive quadrant."""
    R, Z = _rz(p)
    if np.any(np.asarray(R) <= 0) or np.any(np.asarray(Z) <= 0):
        raise DomainError("pressure_grad requires R > 0 and Z > 0")
    return (
        e.a1 * e.gamma * np.power(R, e.gamma - 1.0),
        e.a2 * e.beta * np.power(Z, e.beta - 1.0),
    )


def helmholtz_closed(p, e: EosParams):
    """Antiderivative form of the ray-integral potential.

    H(R, Z) = a1*(R**g - R)/(g-1) + a2*(Z**b - Z**b * R**(1-b))/(b-1),
    continued by 0 at R = 0.
    """
    R, Z = _rz(p)
    R = np.asarray(R, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if np.any(R < 0) or np.any(Z < 0):
        raise DomainError("helmholtz_closed requires R >= 0 and Z >= 0")
    g, b = e.gamma, e.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        term_r = e.a1 * (np.power(R, g) - R) / (g - 1.0)
        zb = np.power(Z, b)
        term_z = e.a2 * (zb - zb * np.power(R, 1.0 - b)) / (b - 1.0)
        out = term_r + term_z
    # R = 0 continuation: both terms -> 0 for Z = 0, and the potential is
    # defined as 0 there for any Z.
    out = np.where(R == 0.0, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


@functools.lru_cache(maxsize=32)
def _leggauss_cached(per: int):
    return np.polynomial.legendre.leggauss(per)


def _gauss_panels(a: float, b: float, quad_points: int, max_per_panel: int = 32):
    """Composite Gauss-Legendre nodes/weights on [a, b], quad_points total."""
    n_panels = max(1, math.ceil(quad_points / max_per_panel))
    per = max(2, quad_points // n_panels)
    x, w = _leggauss_cached(per)
    edges = np.linspace(a, b, n_panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes.append(mid + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def helmholtz_quad(p, e: EosParams, quad_points: int = 64):
    """Ray-integral potential by composite Gauss-Legendre quadrature.

    Evaluates R * integral_1^R P(s, s*Z/R) / s^2 ds with the oriented-integral
    sign convention (for R < 1 the integral from 1 down to R is negative of
    the integral over [R, 1]).  Returns 0 at R = 0.
    """
    if quad_points < 2:
        raise DomainError("quad_points must be >= 2")
    R, Z = _rz(p)
    R = float(R)
    Z = float(Z)
    if R < 0 or Z < 0:
        raise DomainError("helmholtz_quad requires R >= 0 and Z >= 0")
    if R == 0.0 or R == 1.0:
        return 0.0
    lo, hi = min(1.0, R), max(1.0, R)
    s, w = _gauss_panels(lo, hi, quad_points)
    slope = Z / R
    vals = pressure((s, slope * s), e) / (s * s)
    integral = float(np.dot(w, vals))
    if R < 1.0:
        integral = -integral
    return R * integral


def helmholtz_grad(p, e: EosParams):
    """Analytic gradient of helmholtz_closed on the open positive quadrant."""
    R, Z = _rz(p)
    R = np.asarray(R, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if np.any(R <= 0) or np.any(Z < 0):
        raise DomainError("helmholtz_grad requires R > 0 and Z >= 0")
    g, b = e.gamma, e.beta
    zb = np.power(Z, b)
    dR = e.a1 * (g * np.power(R, g - 1.0) - 1.0) / (g - 1.0) + e.a2 * zb * np.power(R, -b)
    zb1 = np.power(Z, b - 1.0)
    dZ = e.a2 * b * zb1 * (1.0 - np.power(R, 1.0 - b)) / (b - 1.0)
    if dR.ndim == 0:
        return float(dR), float(dZ)
    return dR, dZ


def helmholtz_hessian(p, e: EosParams):
    """Analytic 2x2 Hessian entries (h_RR, h_RZ, h_ZZ) of helmholtz_closed."""
    R, Z = _rz(p)
    R = np.asarray(R, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if np.any(R <= 0) or np.any(Z < 0):
        raise DomainError("helmholtz_hessian requires R > 0 and Z >= 0")
    g, b = e.gamma, e.beta
    zb = np.power(Z, b)
    h_rr = e.a1 * g * np.power(R, g - 2.0) - e.a2 * b * zb * np.power(R, -b - 1.0)
    h_rz = e.a2 * b * np.power(Z, b - 1.0) * np.power(R, -b)
    h_zz = e.a2 * b * np.power(Z, b - 2.0) * (1.0 - np.power(R, 1.0 - b))
    return h_rr, h_rz, h_zz


def euler_identity_residual(p, e: EosParams, quad_points: int = 64) -> float:
    """|R*dH/dR + Z*dH/dZ - H - P| on the fully numerical path.

    H is evaluated by quadrature and its gradient by central finite
    differences of the quadrature, so the residual measures only numerics.
    """
    R, Z = _rz(p)
    R = float(R)
    Z = float(Z)
    if R <= 0 or Z <= 0:
        raise DomainError("euler_identity_residual requires a strictly positive point")
    h = helmholtz_quad((R, Z), e, quad_points)
    dr = 1e-5 * max(R, 1.0)
    dz = 1e-5 * max(Z, 1.0)
    dH_dR = (
        helmholtz_quad((R + dr, Z), e, quad_points)
        - helmholtz_quad((R - dr, Z), e, quad_points)
    ) / (2.0 * dr)
    dH_dZ = (
        helmholtz_quad((R, Z + dz), e, quad_points)
        - helmholtz_quad((R, Z - dz), e, quad_points)
    ) / (2.0 * dz)
    return abs(R * dH_dR + Z * dH_dZ - h - pressure((R, Z), e))


def sample_cone(e: EosParams, n: int, seed: int = 0):
    """Uniform samples of the domination cone in (log R, slope) coordinates.

    log R is uniform on [-2, 2] (natural log), the slope Z/R uniform on
    [b_low, b_high]; this covers the multiplicative structure of the cone
    evenly.
    """
    rng = np.random.default_rng(seed)
    R = np.exp(rng.uniform(-2.0, 2.0, size=n))
    slope = rng.uniform(e.b_low, e.b_high, size=n)
    return R, slope * R


def _min_eig_2x2(h_rr, h_rz, h_zz):
    """Smallest eigenvalue of symmetric 2x2 matrices, vectorized."""
    mean = 0.5 * (h_rr + h_zz)
    disc = np.sqrt(0.25 * (h_rr - h_zz) ** 2 + h_rz**2)
    return mean - disc


def convexity_constants(e: EosParams, sample_n: int = 1000, seed: int = 0) -> ConvexityReport:
    """Certify the structural convexity constants of the pressure law.

    For the two-power law the scaling constants are analytic:
    a_low = 1/(max(gamma, beta) - 1), a_high = 1/(min(gamma, beta) - 1),
    and the coercivity exponent is 1 + 1/a_high = min(gamma, beta).
    The Hessian of the potential is sampled over the cone; certification
    fails if it is not positive definite there, or if the sampled Hessians
    of H - a_low*P or a_high*P - H dip below -1e-10.

    Raises CertificationError (with the report attached) on failure.
    """
    if sample_n < 100:
        raise DomainError("sample_n must be >= 100")
    a_low = 1.0 / (max(e.gamma, e.beta) - 1.0)
    a_high = 1.0 / (min(e.gamma, e.beta) - 1.0)
    gamma_coercive = 1.0 + 1.0 / a_high

    R, Z = sample_cone(e, sample_n, seed=seed)
    h_rr, h_rz, h_zz = helmholtz_hessian((R, Z), e)
    hessian_min_eig = float(np.min(_min_eig_2x2(h_rr, h_rz, h_zz)))

    # Hessian of P is diagonal for the power law.
    p_rr = e.a1 * e.gamma * (e.gamma - 1.0) * np.power(R, e.gamma - 2.0)
    p_zz = e.a2 * e.beta * (e.beta - 1.0) * np.power(Z, e.beta - 2.0)

    lo_min = float(np.min(_min_eig_2x2(h_rr - a_low * p_rr, h_rz, h_zz - a_low * p_zz)))
    hi_min = float(np.min(_min_eig_2x2(a_high * p_rr - h_rr, -h_rz, a_high * p_zz - h_zz)))

    report = ConvexityReport(
        a_low=a_low,
        a_high=a_high,
        gamma_coercive=gamma_coercive,
        hessian_min_eig=hessian_min_eig,
        samples=sample_n,
    )
    problems = []
    if hessian_min_eig <= 0:
        problems.append(
            f"potential is not strictly convex on the sampled cone "
            f"(min Hessian eigenvalue {hessian_min_eig:.6g})"
        )
    if lo_min < -1e-10:
        problems.append(
            f"H - a_low*P has a negative sampled Hessian eigenvalue ({lo_min:.6g})"
        )
    if hi_min < -1e-10:
        problems.append(
            f"a_high*P - H has a negative sampled Hessian eigenvalue ({hi_min:.6g})"
        )
    if problems:
        raise CertificationError("; ".join(problems), report=report)
    return report


def bregman_h(p, ref, e: EosParams):
    """Bregman divergence of the potential between p and a reference point.

    H(p) - grad H(ref) . (p - ref) - H(ref).  The reference must be strictly
    positive; p may sit anywhere in the closed positive quadrant.
    """
    Rr, Zr = _rz(ref)
    if np.any(np.asarray(Rr) <= 0) or np.any(np.asarray(Zr) <= 0):
        raise DomainError("bregman_h requires a strictly positive reference")
    R, Z = _rz(p)
    dR, dZ = helmholtz_grad((Rr, Zr), e)
    return (
        helmholtz_closed((R, Z), e)
        - dR * (np.asarray(R, dtype=float) - np.asarray(Rr, dtype=float))
        - dZ * (np.asarray(Z, dtype=float) - np.asarray(Zr, dtype=float))
        - helmholtz_closed((Rr, Zr), e)
    )
