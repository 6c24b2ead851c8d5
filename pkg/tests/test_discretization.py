"""Grid and sine-basis tests.

The midpoint rule on the cell centers integrates products of the retained
sine modes exactly (the aliasing cosine sums vanish below twice the cell
count), so orthonormality and Parseval hold to roundoff and are asserted at
that level, not merely to discretization order.
"""

import numpy as np
import pytest

from bifluidlab import DomainError, Grid1D, build_basis, project, reconstruct


@pytest.fixture
def grid():
    return Grid1D(128)


@pytest.fixture
def basis(grid):
    return build_basis(8, grid)


class TestGrid:
    def test_nodes_are_cell_centers(self, grid):
        assert grid.h == pytest.approx(1.0 / 128)
        assert grid.nodes[0] == pytest.approx(grid.h / 2)
        assert grid.nodes[-1] == pytest.approx(1.0 - grid.h / 2)
        assert len(grid.faces) == grid.n_cells + 1
        assert grid.faces[0] == 0.0 and grid.faces[-1] == 1.0

    def test_midpoint_integration_exact_for_linear(self, grid):
        # Midpoint rule integrates polynomials of degree <= 1 exactly per cell.
        assert grid.integrate(2.0 * grid.nodes + 1.0) == pytest.approx(2.0, abs=1e-14)

    def test_invalid_size(self):
        with pytest.raises(DomainError):
            Grid1D(0)


class TestBasis:
    def test_gram_identity(self, grid, basis):
        # Exact orthonormality under the midpoint rule, not just O(h^2).
        gram = grid.h * (basis.modes @ basis.modes.T)
        assert np.max(np.abs(gram - np.eye(basis.n_modes))) < 1e-13

    def test_stiffness_diagonal(self, grid, basis):
        stiff = grid.h * (basis.mode_derivs @ basis.mode_derivs.T)
        expect = np.diag([(np.pi * (i + 1)) ** 2 for i in range(basis.n_modes)])
        assert np.max(np.abs(stiff - expect)) < 1e-10

    def test_modes_vanish_at_boundary(self, basis):
        assert np.all(basis.mode_faces[:, 0] == 0.0)
        assert np.all(basis.mode_faces[:, -1] == 0.0)

    def test_parseval(self, grid, basis):
        rng = np.random.default_rng(0)
        c = rng.standard_normal(basis.n_modes)
        field = reconstruct(c, basis)
        assert grid.integrate(field * field) == pytest.approx(float(c @ c), rel=1e-13)

    def test_project_reconstruct_roundtrip(self, grid, basis):
        rng = np.random.default_rng(1)
        c = rng.standard_normal(basis.n_modes)
        assert project(reconstruct(c, basis), basis) == pytest.approx(c, abs=1e-12)

    def test_projection_is_best_approximation(self, grid, basis):
        # The L2 error of the projection must be orthogonal to every mode.
        field = np.exp(grid.nodes) * np.sin(3.3 * grid.nodes)
        c = project(field, basis)
        err = field - reconstruct(c, basis)
        assert np.max(np.abs(project(err, basis))) < 1e-12

    def test_derivative_reconstruction(self, grid, basis):
        c = np.zeros(basis.n_modes)
        c[1] = 1.0  # sqrt(2) sin(2 pi x)
        du = reconstruct(c, basis, at="derivs")
        expect = np.sqrt(2.0) * 2 * np.pi * np.cos(2 * np.pi * grid.nodes)
        assert np.max(np.abs(du - expect)) < 1e-10

    def test_resolution_guard(self, grid):
        with pytest.raises(DomainError):
            build_basis(17, grid)  # needs n_cells >= 8 * n_modes
