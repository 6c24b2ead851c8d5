"""1D grid, orthonormal velocity basis, projection and quadrature helpers.

Densities live on cell centers of a uniform grid over (0, 1); the velocity
is expanded in sine modes that vanish at both endpoints.  The midpoint rule
is the single quadrature used for every inner product in the package; on
this grid it integrates products of the retained modes exactly, so the
basis is orthonormal to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["Grid1D", "GalerkinBasis", "build_basis", "project", "reconstruct"]


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered grid on the unit interval."""

    n_cells: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False)
    faces: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_cells < 1:
            raise DomainError(f"n_cells must be >= 1, got {self.n_cells}")
        h = 1.0 / self.n_cells
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", (np.arange(self.n_cells) + 0.5) * h)
        object.__setattr__(self, "faces", np.arange(self.n_cells + 1) * h)

    def integrate(self, f: np.ndarray) -> float:
        """Midpoint-rule integral of a grid function over (0, 1)."""
        return float(self.h * np.sum(f))


@dataclass(frozen=True)
class GalerkinBasis:
    """Sine modes w_i(x) = sqrt(2) sin(i pi x), tabulated on a grid.

    modes[i, j]       w_{i+1}(nodes[j])
    mode_derivs[i, j] w'_{i+1}(nodes[j])  (analytic, not differenced)
    mode_faces[i, j]  w_{i+1}(faces[j]); identically 0 at both endpoints
    """

    n_modes: int
    grid: Grid1D
    modes: np.ndarray
    mode_derivs: np.ndarray
    mode_faces: np.ndarray


def build_basis(n_modes: int, grid: Grid1D) -> GalerkinBasis:
    """Tabulate the orthonormal sine basis on the grid.

    Requires n_cells >= 8*n_modes so the midpoint quadrature resolves the
    top retained mode.
    """
    if n_modes < 1:
        raise DomainError(f"n_modes must be >= 1, got {n_modes}")
    if grid.n_cells < 8 * n_modes:
        raise DomainError(
            f"grid too coarse for the basis: need n_cells >= 8*n_modes, "
            f"got n_cells={grid.n_cells}, n_modes={n_modes}"
        )
    i = np.arange(1, n_modes + 1)[:, None]
    arg_nodes = i * np.pi * grid.nodes[None, :]
    arg_faces = i * np.pi * grid.faces[None, :]
    modes = np.sqrt(2.0) * np.sin(arg_nodes)
    derivs = np.sqrt(2.0) * (i * np.pi) * np.cos(arg_nodes)
    faces = np.sqrt(2.0) * np.sin(arg_faces)
    faces[:, 0] = 0.0
    faces[:, -1] = 0.0
    return GalerkinBasis(
        n_modes=n_modes, grid=grid, modes=modes, mode_derivs=derivs, mode_faces=faces
    )


def project(field: np.ndarray, basis: GalerkinBasis) -> np.ndarray:
    """Coefficients of the L2 projection onto the basis (midpoint rule)."""
    return basis.grid.h * (basis.modes @ np.asarray(field, dtype=float))


def reconstruct(c: np.ndarray, basis: GalerkinBasis, at: str = "nodes") -> np.ndarray:
    """Pointwise sum of modes weighted by coefficients.

    at = "nodes" | "faces" | "derivs" selects the tabulation used.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (basis.n_modes,):
        raise DomainError(
            f"coefficient vector has length {c.shape}, expected ({basis.n_modes},)"
        )
    table = {"nodes": basis.modes, "faces": basis.mode_faces, "derivs": basis.mode_derivs}[at]
    return c @ table
