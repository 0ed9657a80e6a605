import numpy as np
import pytest
from hypothesis import given, strategies as st

from frontchannel.grid import (
    Grid2D,
    ScalarField,
    VectorField2D,
    cross_section_average,
    divergence,
    grad_norm_sq,
    gradient,
    inner,
    laplacian,
    norm,
    pressure_gradient,
    vector_laplacian,
    velocity_grad_norm_sq,
)
from frontchannel.spectral import AxisOperator, shifted_solver


@pytest.mark.parametrize("kw", [
    dict(lx=0.0, lam=1.0, nx=8, ny=8),
    dict(lx=1.0, lam=-1.0, nx=8, ny=8),
    dict(lx=1.0, lam=1.0, nx=1, ny=8),
    dict(lx=1.0, lam=1.0, nx=8, ny=4),
    dict(lx=1.0, lam=1.0, nx=8, ny=8, x_mode="closed"),
])
def test_grid_rejects_bad_geometry(kw):
    with pytest.raises(ValueError):
        Grid2D(**kw)


def test_mac_shapes():
    g = Grid2D(2.0, 1.0, 10, 8)
    assert g.ux_shape == (11, 8) and g.uy_shape == (10, 9)
    gp = Grid2D(2.0, 1.0, 10, 8, "periodic")
    assert gp.ux_shape == (10, 8)
    assert g.dx == pytest.approx(0.2) and g.dy == pytest.approx(0.125)
    assert g.refined().nx == 20


def test_scalar_field_shape_checked():
    g = Grid2D(2.0, 1.0, 10, 8)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((8, 10)))


@pytest.mark.parametrize("kind", ["periodic", "neumann", "dirichlet_cell", "dirichlet_node"])
@pytest.mark.parametrize("n", [8, 13])
def test_axis_operator_matches_dense_stencil(kind, n):
    h = 0.3
    op = AxisOperator(kind, n, h)
    main = -2.0 * np.ones(n)
    if kind == "neumann":
        main[[0, -1]] = -1.0
    elif kind == "dirichlet_cell":
        main[[0, -1]] = -3.0
    D = (np.diag(main) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2
    if kind == "periodic":
        D[0, -1] = D[-1, 0] = 1.0 / h**2
    x = np.random.default_rng(n).standard_normal(n)
    np.testing.assert_allclose(op.apply(x[:, None], 0)[:, 0], D @ x, atol=1e-10)


@pytest.mark.parametrize("kx", ["periodic", "neumann", "dirichlet_cell", "dirichlet_node"])
@pytest.mark.parametrize("ky", ["neumann", "dirichlet_cell", "dirichlet_node"])
def test_shifted_solver_inverts_its_operator(kx, ky, rng):
    s = shifted_solver(kx, 12, 0.25, ky, 9, 0.1, 1.0, 0.7)
    r = rng.standard_normal(s.shape)
    x = s.solve(r)
    np.testing.assert_allclose(s.apply(x), r, atol=1e-9)


def test_pure_neumann_poisson_on_zero_mean_data(rng):
    s = shifted_solver("neumann", 16, 0.5, "neumann", 10, 0.1, 0.0, -1.0)
    r = rng.standard_normal(s.shape)
    r -= r.mean()
    x = s.solve(r)
    np.testing.assert_allclose(s.apply(x), r, atol=1e-8)


def test_summation_by_parts_scalar(small_grid, rng):
    s = ScalarField(small_grid, rng.standard_normal((small_grid.nx, small_grid.ny)))
    assert grad_norm_sq(s) == pytest.approx(-inner(laplacian(s), s), rel=1e-12)


def test_summation_by_parts_dirichlet_walls(rng):
    g = Grid2D(3.0, 1.0, 12, 10)
    s = ScalarField(g, rng.standard_normal((12, 10)), "dirichlet-walls", (0.0, 0.0))
    assert grad_norm_sq(s) == pytest.approx(-inner(laplacian(s), s), rel=1e-12)


def test_pressure_gradient_is_minus_adjoint_of_divergence(small_grid, rng):
    g = small_grid
    p = ScalarField(g, rng.standard_normal((g.nx, g.ny)))
    u = VectorField2D(g, rng.standard_normal(g.ux_shape), rng.standard_normal(g.uy_shape))
    u.enforce_walls()
    assert inner(pressure_gradient(p), u) == pytest.approx(-inner(p, divergence(u)), abs=1e-10)


def test_vector_laplacian_sbp(small_grid, rng):
    g = small_grid
    u = VectorField2D(g, rng.standard_normal(g.ux_shape), rng.standard_normal(g.uy_shape))
    u.enforce_walls()
    w = VectorField2D(g, rng.standard_normal(g.ux_shape), rng.standard_normal(g.uy_shape))
    w.enforce_walls()
    # symmetric and negative definite
    assert inner(vector_laplacian(u), w) == pytest.approx(inner(u, vector_laplacian(w)), rel=1e-10)
    assert velocity_grad_norm_sq(u) > 0


def test_laplacian_second_order_on_cosine():
    errs = []
    for n in (16, 32, 64):
        g = Grid2D(2.0, 1.0, 2 * n, n, "periodic")
        s = ScalarField.from_function(g, lambda X, Y: np.cos(np.pi * X) * np.cos(np.pi * Y))
        exact = -2 * np.pi**2 * s.values
        errs.append(np.abs(laplacian(s).values - exact).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_gradient_of_linear_profile_with_ends():
    g = Grid2D(4.0, 1.0, 16, 8)
    s = ScalarField.from_function(g, lambda X, Y: 1.0 - X / 4.0, ends=(1.0, 0.0))
    gr = gradient(s)
    np.testing.assert_allclose(gr.ux, -0.25, atol=1e-12)
    np.testing.assert_allclose(gr.uy, 0.0)


@given(st.floats(-3, 3), st.integers(8, 20))
def test_norms_of_constants(c, ny):
    g = Grid2D(2.0, 1.0, 10, ny)
    s = ScalarField.constant(g, c)
    assert norm(s, "L1") == pytest.approx(abs(c) * 2.0)
    assert norm(s, "L2") == pytest.approx(abs(c) * np.sqrt(2.0))
    assert norm(s, "Linf") == pytest.approx(abs(c))
    np.testing.assert_allclose(cross_section_average(s), c)


def test_sup_norm_sees_centre_interpolation():
    g = Grid2D(2.0, 1.0, 8, 8, "periodic")
    u = VectorField2D.zeros(g)
    u.ux[:] = 3.0
    u.uy[:, 1:-1] = 4.0
    assert u.sup_norm() == pytest.approx(5.0)
