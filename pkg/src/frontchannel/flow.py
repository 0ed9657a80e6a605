"""Buoyancy-driven Stokes / stationary Navier-Stokes flow in the channel window.

Velocity lives on the MAC faces with no-slip walls; pressure is cell-centred
with a mean-zero gauge. Time stepping is backward Euler for the viscous term
followed by a Helmholtz projection. The buoyancy force is projected before
the viscous solve so that its gradient part is absorbed by the pressure
exactly; otherwise a constant temperature would leak velocity through the
no-slip viscous operator. Stationary problems are solved as one coupled
saddle-point system with a cached sparse LU factorization.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import (
    IterationDiverged,
    NonConvergence,
    PoissonNonConvergence,
    ValidationError,
    ViscousSolveNonConvergence,
)
from .grid import (
    ScalarField,
    VectorField2D,
    divergence,
    grad_norm_sq,
    inner,
    pressure_gradient,
    vector_laplacian,
    velocity_grad_norm_sq,
)
from .spectral import shifted_solver

log = logging.getLogger(__name__)

DIV_TOL = 1e-10


@dataclass(frozen=True)
class GravityForcing:
    rho: float
    g_hat: tuple = (0.0, -1.0)
    allow_axis_aligned: bool = False  # test hook: lets g2 = 0 with rho > 0

    def __post_init__(self):
        g1, g2 = (float(c) for c in self.g_hat)
        object.__setattr__(self, "g_hat", (g1, g2))
        if self.rho < 0:
            raise ValidationError("gravity.rho must be >= 0")
        if abs(math.hypot(g1, g2) - 1.0) > 1e-12:
            raise ValidationError("gravity direction must be a unit vector")
        if self.rho > 0 and g2 == 0.0 and not self.allow_axis_aligned:
            raise ValidationError("gravity.rho > 0 requires g2 != 0 (slanted channel)")

    @classmethod
    def from_angle(cls, rho, angle_degrees):
        a = math.radians(angle_degrees)
        g1, g2 = math.sin(a), -math.cos(a)
        # snap round-off so that 90 degrees gives an exactly axis-aligned vector
        g1 = 0.0 if abs(g1) < 1e-15 else g1
        g2 = 0.0 if abs(g2) < 1e-15 else g2
        norm = math.hypot(g1, g2)
        return cls(rho, (g1 / norm, g2 / norm))

    @property
    def rho_vec(self):
        return (self.rho * self.g_hat[0], self.rho * self.g_hat[1])


@dataclass
class FlowState:
    u: VectorField2D
    p: ScalarField
    nu: float
    u_star: VectorField2D = None  # pre-projection velocity of the last step
    iterations: int = 0
    residual: float = 0.0

    @classmethod
    def at_rest(cls, grid, nu):
        return cls(VectorField2D.zeros(grid), ScalarField.constant(grid, 0.0), nu)


# -- forcing -----------------------------------------------------------------

def buoyancy_force(theta, force):
    """``theta * rho_vec`` averaged onto the velocity faces (wall-normal faces zero)."""
    g = theta.grid
    r1, r2 = force.rho_vec
    v = theta.values
    out = VectorField2D.zeros(g)
    if g.periodic:
        out.ux[:] = r1 * 0.5 * (v + np.roll(v, 1, axis=0))
    else:
        out.ux[1:-1] = r1 * 0.5 * (v[1:] + v[:-1])
    out.uy[:, 1:-1] = r2 * 0.5 * (v[:, 1:] + v[:, :-1])
    return out


# -- projection --------------------------------------------------------------

def _pressure_solver(grid):
    (kx, nx, hx), (ky, ny, hy) = grid.scalar_axes("neumann-walls")
    return shifted_solver(kx, nx, hx, ky, ny, hy, 0.0, -1.0)


def project_divergence_free(u_star):
    """Helmholtz projection: returns ``(u, q)`` with ``u = u_star - grad q`` and ``div u = 0``."""
    g = u_star.grid
    rhs = divergence(u_star).values
    rhs = rhs - rhs.mean()
    q = _pressure_solver(g).solve(rhs)
    q -= q.mean()
    qf = ScalarField(g, q)
    u = u_star - pressure_gradient(qf)
    u.enforce_walls()
    err = np.abs(divergence(u).values).max()
    scale = max(1.0, np.abs(u_star.ux).max(initial=0.0), np.abs(u_star.uy).max(initial=0.0))
    if not np.isfinite(err) or err > DIV_TOL * scale:
        raise PoissonNonConvergence(f"post-projection divergence {err:.3e}")
    return u, qf


# -- time-dependent Stokes ---------------------------------------------------

def _velocity_solvers(grid, a, b):
    (kx, nx, hx), (ky, ny, hy) = grid.ux_axes()
    sx = shifted_solver(kx, nx, hx, ky, ny, hy, a, b)
    (kx, nx, hx), (ky, ny, hy) = grid.uy_axes()
    sy = shifted_solver(kx, nx, hx, ky, ny, hy, a, b)
    return sx, sy


def helmholtz_velocity(rhs, nu, dt):
    """Solve ``(I - dt*nu*L) u = rhs`` componentwise with no-slip closures."""
    g = rhs.grid
    sx, sy = _velocity_solvers(g, 1.0, dt * nu)
    out = VectorField2D.zeros(g)
    if g.periodic:
        out.ux[:] = sx.solve(rhs.ux)
    else:
        out.ux[1:-1] = sx.solve(rhs.ux[1:-1])
    out.uy[:, 1:-1] = sy.solve(rhs.uy[:, 1:-1])
    if not (np.isfinite(out.ux).all() and np.isfinite(out.uy).all()):
        raise ViscousSolveNonConvergence("non-finite viscous solve")
    return out


def step_stokes(state, theta, force, dt):
    """One backward-Euler + projection step of ``u_t - nu Lap u + grad p = theta rho_vec``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = theta.grid
    if force.rho == 0.0 and not state.u.ux.any() and not state.u.uy.any():
        zero = VectorField2D.zeros(g)
        return FlowState(zero, ScalarField.constant(g, 0.0), state.nu, u_star=zero.copy())
    F = buoyancy_force(theta, force)
    PF, phi = project_divergence_free(F)
    u_star = helmholtz_velocity(state.u + dt * PF, state.nu, dt)
    u, q = project_divergence_free(u_star)
    p = ScalarField(g, phi.values + q.values / dt)
    return FlowState(u, p, state.nu, u_star=u_star)


def stokes_energy_terms(u_old, new_state, theta, force, dt):
    """Terms of the discrete energy balance of one :func:`step_stokes` call.

    For this scheme the exact inequality is
    ``(|u1|^2 - |u0|^2)/(2 dt) + nu |grad u*|^2 <= <theta rho_vec, u1>``.
    """
    u1 = new_state.u
    F = buoyancy_force(theta, force)
    return {
        "rate": (inner(u1, u1) - inner(u_old, u_old)) / (2.0 * dt),
        "dissipation": new_state.nu * velocity_grad_norm_sq(new_state.u_star),
        "work": inner(F, u1),
    }


# -- stationary Stokes via a coupled sparse solve ------------------------------

def _axis_matrix(kind, n, h):
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    if kind == "neumann":
        main[0] = main[-1] = -1.0
    elif kind == "dirichlet_cell":
        main[0] = main[-1] = -3.0
    m = sparse.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    if kind == "periodic":
        m[0, n - 1] = 1.0
        m[n - 1, 0] = 1.0
    return (m / h**2).tocsr()


def _laplacian_matrix(axes):
    (kx, nx, hx), (ky, ny, hy) = axes
    Lx = _axis_matrix(kx, nx, hx)
    Ly = _axis_matrix(ky, ny, hy)
    return sparse.kron(Lx, sparse.identity(ny)) + sparse.kron(sparse.identity(nx), Ly)


def _difference_matrix(n_cells, h, periodic):
    """Face differences of cell values: (n_faces x n_cells)."""
    if periodic:
        m = sparse.diags([np.ones(n_cells), -np.ones(n_cells - 1)], [0, -1],
                         shape=(n_cells, n_cells), format="lil")
        m[0, n_cells - 1] = -1.0
    else:
        m = sparse.diags([-np.ones(n_cells - 1), np.ones(n_cells - 1)], [0, 1],
                         shape=(n_cells - 1, n_cells), format="lil")
    return (m / h).tocsr()


class StokesOperator:
    """Factorized ``[[nu*A, G], [G^T, 0]]`` for one grid and viscosity."""

    def __init__(self, grid, nu):
        self.grid = grid
        self.nu = nu
        g = grid
        Au = -_laplacian_matrix(g.ux_axes())
        Av = -_laplacian_matrix(g.uy_axes())
        Gx = sparse.kron(_difference_matrix(g.nx, g.dx, g.periodic), sparse.identity(g.ny))
        Gy = sparse.kron(sparse.identity(g.nx), _difference_matrix(g.ny, g.dy, False))
        self.n_u = Au.shape[0]
        self.n_v = Av.shape[0]
        self.n_p = g.nx * g.ny
        A = sparse.block_diag([nu * Au, nu * Av])
        G = sparse.vstack([Gx, Gy])
        self.A = A.tocsr()
        self.G = G.tocsr()
        K = sparse.bmat([[A, G], [G.T, None]], format="lil")
        pin = self.n_u + self.n_v  # pressure in cell 0 fixes the gauge
        K[pin, :] = 0.0
        K[pin, pin] = 1.0
        self.pin = pin
        self.K = K.tocsr()
        self.lu = splu(K.tocsc(), permc_spec="COLAMD")

    def _pack(self, v):
        g = self.grid
        ux = v.ux if g.periodic else v.ux[1:-1]
        return np.concatenate([ux.ravel(), v.uy[:, 1:-1].ravel()])

    def _unpack(self, x):
        g = self.grid
        out = VectorField2D.zeros(g)
        ux = x[: self.n_u].reshape(-1, g.ny)
        if g.periodic:
            out.ux[:] = ux
        else:
            out.ux[1:-1] = ux
        out.uy[:, 1:-1] = x[self.n_u : self.n_u + self.n_v].reshape(g.nx, g.ny - 1)
        return out

    def solve(self, body):
        rhs = np.concatenate([self._pack(body), np.zeros(self.n_p)])
        rhs[self.pin] = 0.0
        x = self.lu.solve(rhs)
        # iterative refinement: the fill-in round-off grows with the grid
        for _ in range(2):
            x += self.lu.solve(rhs - self.K @ x)
        u = self._unpack(x)
        p = x[self.n_u + self.n_v :].reshape(self.grid.nx, self.grid.ny)
        p = p - p.mean()
        return u, ScalarField(self.grid, p)

    def momentum_residual(self, u, p, body):
        """Face residual ``-nu Lap u + grad p - body`` (wall-normal faces excluded)."""
        lap = vector_laplacian(u)
        gp = pressure_gradient(p)
        r = -self.nu * lap + gp - body
        r.enforce_walls()
        return r


@lru_cache(maxsize=8)
def stokes_operator(grid, nu):
    return StokesOperator(grid, float(nu))


def _relative(r, ref):
    nr = math.sqrt(max(inner(r, r), 0.0))
    nref = math.sqrt(max(inner(ref, ref), 0.0))
    return nr / nref if nref > 0 else nr


def solve_stationary_stokes(theta, force, nu, body_force=None, tol=1e-8):
    """Solve ``-nu Lap u + grad p = theta rho_vec`` (or ``body_force``), ``div u = 0``."""
    g = theta.grid
    body = buoyancy_force(theta, force) if body_force is None else body_force
    if not body.ux.any() and not body.uy.any():
        return FlowState.at_rest(g, nu)
    op = stokes_operator(g, nu)
    u, p = op.solve(body)
    u.enforce_walls()
    res = _relative(op.momentum_residual(u, p, body), body)
    div = np.abs(divergence(u).values).max()
    if not (res <= tol and div <= DIV_TOL * max(1.0, u.sup_norm())):
        raise NonConvergence(f"stationary Stokes residual {res:.2e}, divergence {div:.2e}")
    return FlowState(u, p, nu, iterations=1, residual=res)


# -- stationary Navier-Stokes by Picard iteration ------------------------------

def advection_term(u):
    """``(u . grad) u`` on the faces, central differences, no-slip ghosts."""
    g = u.grid
    dx, dy = g.dx, g.dy
    out = VectorField2D.zeros(g)
    ux, uy = u.ux, u.uy

    # x-momentum on vertical faces
    if g.periodic:
        uxe = np.concatenate([ux[-1:], ux, ux[:1]])
        uye = np.concatenate([uy[-1:], uy], axis=0)  # cells i-1, i around face i
        left, right = uye[:-1], uye[1:]
    else:
        uxe = np.concatenate([np.zeros((1, g.ny)), ux, np.zeros((1, g.ny))])
        pad = np.concatenate([-uy[:1], uy, -uy[-1:]], axis=0)  # no-slip ghosts at x-ends
        left, right = pad[:-1], pad[1:]
    dudx = (uxe[2:] - uxe[:-2]) / (2 * dx)
    ghost = np.concatenate([-ux[:, :1], ux, -ux[:, -1:]], axis=1)
    dudy = (ghost[:, 2:] - ghost[:, :-2]) / (2 * dy)
    vbar = 0.25 * (left[:, :-1] + left[:, 1:] + right[:, :-1] + right[:, 1:])
    adv_x = ux * dudx + vbar * dudy

    # y-momentum on horizontal faces
    if g.periodic:
        ubar_src = np.concatenate([ux, ux[:1]], axis=0)
        vxe = np.concatenate([uy[-1:], uy, uy[:1]], axis=0)
    else:
        ubar_src = ux
        vxe = np.concatenate([-uy[:1], uy, -uy[-1:]], axis=0)
    ub = np.concatenate([-ubar_src[:, :1], ubar_src, -ubar_src[:, -1:]], axis=1)
    # average of the four x-faces around each y-face: faces i, i+1 and rows j-1, j
    ubar = 0.25 * (ub[:-1, :-1] + ub[:-1, 1:] + ub[1:, :-1] + ub[1:, 1:])
    dvdx = (vxe[2:] - vxe[:-2]) / (2 * dx)
    vye = np.concatenate([uy[:, :1], uy, uy[:, -1:]], axis=1)
    dvdy = (vye[:, 2:] - vye[:, :-2]) / (2 * dy)
    adv_y = ubar * dvdx + uy * dvdy

    out.ux[:] = adv_x
    out.uy[:] = adv_y
    out.enforce_walls()
    return out


def solve_stationary_navier_stokes(theta, force, nu, tol=1e-8, max_iter=200,
                                   residual_tol=1e-8):
    """Picard iteration: each step is a Stokes solve with the frozen advection as forcing."""
    g = theta.grid
    lam = g.lam
    thin = thinness_condition(force.rho, nu, lam, force.g_hat)
    if thin >= 1.0:
        warnings.warn(f"thinness value {thin:.3g} >= 1; Picard may not contract", RuntimeWarning)
    body = buoyancy_force(theta, force)
    if not body.ux.any() and not body.uy.any():
        return FlowState(VectorField2D.zeros(g), ScalarField.constant(g, 0.0), nu, iterations=1)
    op = stokes_operator(g, nu)
    u = VectorField2D.zeros(g)
    norms = []
    for k in range(1, max_iter + 1):
        u_new, p = op.solve(body - advection_term(u))
        u_new.enforce_walls()
        diff = u_new - u
        step = math.sqrt(inner(diff, diff))
        norms.append(math.sqrt(inner(u_new, u_new)))
        u = u_new
        if len(norms) > 10 and all(norms[-i] > norms[-i - 1] for i in range(1, 11)) \
                and norms[-1] >= 2.0 * norms[-11]:
            raise IterationDiverged(f"Picard iterate norm doubled over 10 steps (k={k})")
        if not np.isfinite(norms[-1]):
            raise IterationDiverged("Picard iterate is not finite")
        if step < tol:
            r = op.momentum_residual(u, p, body - advection_term(u))
            res = _relative(r, body)
            if res > residual_tol:
                raise NonConvergence(f"Navier-Stokes residual {res:.2e} after {k} iterations")
            return FlowState(u, p, nu, iterations=k, residual=res)
    raise NonConvergence(f"Picard did not converge in {max_iter} iterations")


# -- explicit constants ------------------------------------------------------

def poincare_constants(lam):
    """Interval Poincare (Dirichlet) and Poincare-Wirtinger constants, both lam/pi."""
    return lam / math.pi, lam / math.pi


def transverse_lever(lam, g_hat):
    """``(mean over [0, lam] of |g2 y|^2)^(1/2) = |g2| lam / sqrt(3)``."""
    return abs(g_hat[1]) * lam / math.sqrt(3.0)


def thinness_condition(rho, nu, lam, g_hat):
    if nu <= 0 or lam <= 0:
        raise ValueError("nu and lam must be positive")
    cp, cpw = poincare_constants(lam)
    return (
        math.sqrt(3.0) / 2.0
        * rho / (nu * math.sqrt(math.pi * nu))
        * math.sqrt(lam)
        * cp
        * (cpw + transverse_lever(lam, g_hat))
    )


def gradient_bound_check(state, theta, force):
    """``||grad u|| <= (rho/nu) C_P (C_PW + |g2| lam/sqrt 3) ||grad theta||`` for a stationary Stokes state."""
    lam = theta.grid.lam
    cp, cpw = poincare_constants(lam)
    lhs = math.sqrt(max(velocity_grad_norm_sq(state.u), 0.0))
    rhs = force.rho / state.nu * cp * (cpw + transverse_lever(lam, force.g_hat)) \
        * math.sqrt(grad_norm_sq(theta))
    return {"name": "stokes_gradient_bound", "lhs": lhs, "rhs": rhs,
            "explicit": True, "passed": bool(lhs <= rhs)}


def sup_bound_report(state, g):
    """Quantities entering the Xie-type sup bound for ``-nu Lap u + grad p = g``."""
    nu = state.nu
    sup = state.u.sup_norm()
    grad_u = math.sqrt(max(velocity_grad_norm_sq(state.u), 0.0))
    g_l2 = math.sqrt(max(inner(g, g), 0.0))
    xie = math.sqrt(2.0 / (nu * math.pi)) * math.sqrt(grad_u) * math.sqrt(g_l2)
    implied = (sup - xie) / grad_u if grad_u > 0 else 0.0
    return {
        "u_sup": sup,
        "grad_u_l2": grad_u,
        "g_l2": g_l2,
        "xie_term": xie,
        "implied_constant": implied,
    }
