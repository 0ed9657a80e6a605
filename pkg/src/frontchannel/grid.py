"""Truncated channel grid, staggered fields and discrete operators.

The window ``[0, lx] x [0, lam]`` is split into ``nx x ny`` cells. Scalars live
at cell centres in arrays of shape ``(nx, ny)`` indexed ``[i, j]`` with ``i``
along the channel. Velocities use MAC staggering: ``ux`` on vertical faces,
``uy`` on horizontal faces.

``x_mode == "front"`` closes the window with walls at both x-ends (scalar end
values are imposed as Dirichlet data, velocity vanishes); ``x_mode ==
"periodic"`` wraps around and is only used for operator and conservation
tests. In front mode ``ux`` has ``nx + 1`` face columns (the two end columns
are identically zero); in periodic mode it has ``nx`` (face ``i`` is the left
face of cell ``i``). ``uy`` always has ``ny + 1`` rows with zero wall rows.
"""

from dataclasses import dataclass, replace

import numpy as np

X_MODES = ("front", "periodic")
SCALAR_BCS = ("neumann-walls", "dirichlet-walls")


@dataclass(frozen=True)
class Grid2D:
    lx: float
    lam: float
    nx: int
    ny: int
    x_mode: str = "front"

    def __post_init__(self):
        if self.x_mode not in X_MODES:
            raise ValueError(f"x_mode must be one of {X_MODES}, got {self.x_mode!r}")
        if not (self.lx > 0 and self.lam > 0):
            raise ValueError("channel lengths must be positive")
        if self.nx < 2:
            raise ValueError("nx must be >= 2")
        if self.ny < 8:
            raise ValueError("ny >= 8 required to resolve the cross-section")

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.lam / self.ny

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def periodic(self):
        return self.x_mode == "periodic"

    @property
    def xc(self):
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self):
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def x_faces(self):
        n = self.nx if self.periodic else self.nx + 1
        return np.arange(n) * self.dx

    @property
    def y_faces(self):
        return np.arange(self.ny + 1) * self.dy

    @property
    def ux_shape(self):
        return (self.nx if self.periodic else self.nx + 1, self.ny)

    @property
    def uy_shape(self):
        return (self.nx, self.ny + 1)

    def mesh(self):
        """Cell-centre coordinates ``(X, Y)`` of shape ``(nx, ny)``."""
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def refined(self, factor=2):
        return replace(self, nx=self.nx * factor, ny=self.ny * factor)

    # transform closures used by the fast solvers
    def scalar_axes(self, bc="neumann-walls", x_dirichlet=False):
        kx = "periodic" if self.periodic else ("dirichlet_cell" if x_dirichlet else "neumann")
        ky = "neumann" if bc == "neumann-walls" else "dirichlet_cell"
        return (kx, self.nx, self.dx), (ky, self.ny, self.dy)

    def ux_axes(self):
        if self.periodic:
            ax = ("periodic", self.nx, self.dx)
        else:
            ax = ("dirichlet_node", self.nx - 1, self.dx)
        return ax, ("dirichlet_cell", self.ny, self.dy)

    def uy_axes(self):
        kx = "periodic" if self.periodic else "dirichlet_cell"
        return (kx, self.nx, self.dx), ("dirichlet_node", self.ny - 1, self.dy)


@dataclass
class ScalarField:
    grid: Grid2D
    values: np.ndarray
    bc: str = "neumann-walls"
    ends: tuple = None  # (left, right) Dirichlet values at the x-ends in front mode

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(
                f"values shape {self.values.shape} != {(self.grid.nx, self.grid.ny)}"
            )
        if self.bc not in SCALAR_BCS:
            raise ValueError(f"bc must be one of {SCALAR_BCS}")
        if self.ends is not None:
            self.ends = (float(self.ends[0]), float(self.ends[1]))

    @classmethod
    def from_function(cls, grid, func, **kw):
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(func(X, Y), X.shape).copy(), **kw)

    @classmethod
    def constant(cls, grid, c, **kw):
        return cls(grid, np.full((grid.nx, grid.ny), float(c)), **kw)

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=float))

    def is_finite(self):
        return bool(np.isfinite(self.values).all())


@dataclass
class VectorField2D:
    grid: Grid2D
    ux: np.ndarray
    uy: np.ndarray

    def __post_init__(self):
        self.ux = np.asarray(self.ux, dtype=float)
        self.uy = np.asarray(self.uy, dtype=float)
        if self.ux.shape != self.grid.ux_shape or self.uy.shape != self.grid.uy_shape:
            raise ValueError("face arrays do not match the grid's MAC layout")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.ux_shape), np.zeros(grid.uy_shape))

    @classmethod
    def from_functions(cls, grid, fx, fy):
        """Sample component functions at their own face positions."""
        Xu, Yu = np.meshgrid(grid.x_faces, grid.yc, indexing="ij")
        Xv, Yv = np.meshgrid(grid.xc, grid.y_faces, indexing="ij")
        ux = np.broadcast_to(fx(Xu, Yu), Xu.shape).astype(float)
        uy = np.broadcast_to(fy(Xv, Yv), Xv.shape).astype(float)
        return cls(grid, ux, uy)

    def copy(self):
        return VectorField2D(self.grid, self.ux.copy(), self.uy.copy())

    def enforce_walls(self):
        """Zero the wall-normal faces (no penetration) in place; returns self."""
        self.uy[:, 0] = 0.0
        self.uy[:, -1] = 0.0
        if not self.grid.periodic:
            self.ux[0] = 0.0
            self.ux[-1] = 0.0
        return self

    def __add__(self, other):
        return VectorField2D(self.grid, self.ux + other.ux, self.uy + other.uy)

    def __sub__(self, other):
        return VectorField2D(self.grid, self.ux - other.ux, self.uy - other.uy)

    def __mul__(self, c):
        return VectorField2D(self.grid, self.ux * c, self.uy * c)

    __rmul__ = __mul__

    def sup_norm(self):
        """Pointwise sup of |u|, over faces and over centre-interpolated vectors."""
        face_max = max(np.abs(self.ux).max(initial=0.0), np.abs(self.uy).max(initial=0.0))
        uc, vc = self.cell_centred()
        centre_max = np.sqrt(uc**2 + vc**2).max(initial=0.0)
        return float(max(face_max, centre_max))

    def cell_centred(self):
        ux = self.ux
        if self.grid.periodic:
            uc = 0.5 * (ux + np.roll(ux, -1, axis=0))
        else:
            uc = 0.5 * (ux[:-1] + ux[1:])
        vc = 0.5 * (self.uy[:, :-1] + self.uy[:, 1:])
        return uc, vc


def inner(a, b):
    """Discrete L2 inner product: of two ScalarFields or two VectorField2Ds."""
    g = a.grid
    if isinstance(a, ScalarField):
        return float(np.sum(a.values * b.values) * g.cell_area)
    return float((np.sum(a.ux * b.ux) + np.sum(a.uy * b.uy)) * g.cell_area)


def _x_neighbours(s):
    """Left/right neighbour arrays for the x second difference, with ghosts."""
    g = s.grid
    v = s.values
    if g.periodic:
        return np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
    if s.ends is None:
        gl, gr = v[:1], v[-1:]
    else:
        gl = 2.0 * s.ends[0] - v[:1]
        gr = 2.0 * s.ends[1] - v[-1:]
    return np.concatenate([gl, v[:-1]]), np.concatenate([v[1:], gr])


def _y_neighbours(s):
    v = s.values
    if s.bc == "neumann-walls":
        gb, gt = v[:, :1], v[:, -1:]
    else:
        gb, gt = -v[:, :1], -v[:, -1:]
    return np.concatenate([gb, v[:, :-1]], axis=1), np.concatenate([v[:, 1:], gt], axis=1)


def laplacian(field):
    """5-point Laplacian with ghost cells implementing the field's boundary policy."""
    g = field.grid
    v = field.values
    xl, xr = _x_neighbours(field)
    yb, yt = _y_neighbours(field)
    out = (xl - 2.0 * v + xr) / g.dx**2 + (yb - 2.0 * v + yt) / g.dy**2
    return ScalarField(g, out, field.bc, field.ends)


def divergence(v):
    g = v.grid
    ux = v.ux
    if g.periodic:
        dux = np.roll(ux, -1, axis=0) - ux
    else:
        dux = ux[1:] - ux[:-1]
    duy = v.uy[:, 1:] - v.uy[:, :-1]
    return ScalarField(g, dux / g.dx + duy / g.dy)


def gradient(s):
    """Face-centred differences.

    Wall-normal faces carry the one-sided half-cell difference to the boundary
    value for Dirichlet closures and zero for Neumann closures, so the result
    is a complete face gradient suitable for energy quadrature.
    """
    g = s.grid
    v = s.values
    if g.periodic:
        gx = (v - np.roll(v, 1, axis=0)) / g.dx
    else:
        gx = np.zeros(g.ux_shape)
        gx[1:-1] = (v[1:] - v[:-1]) / g.dx
        if s.ends is not None:
            gx[0] = (v[0] - s.ends[0]) / (0.5 * g.dx)
            gx[-1] = (s.ends[1] - v[-1]) / (0.5 * g.dx)
    gy = np.zeros(g.uy_shape)
    gy[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / g.dy
    if s.bc == "dirichlet-walls":
        gy[:, 0] = v[:, 0] / (0.5 * g.dy)
        gy[:, -1] = -v[:, -1] / (0.5 * g.dy)
    return VectorField2D(g, gx, gy)


def pressure_gradient(p):
    """Gradient with homogeneous Neumann closure on every wall (zero wall-normal faces).

    This is the exact negative adjoint of :func:`divergence` on fields with
    zero wall-normal faces.
    """
    g = p.grid
    v = p.values
    if g.periodic:
        gx = (v - np.roll(v, 1, axis=0)) / g.dx
    else:
        gx = np.zeros(g.ux_shape)
        gx[1:-1] = (v[1:] - v[:-1]) / g.dx
    gy = np.zeros(g.uy_shape)
    gy[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / g.dy
    return VectorField2D(g, gx, gy)


def grad_norm_sq(s):
    """Squared L2 norm of the discrete gradient, summation-by-parts consistent.

    Half-cell wall faces get half weight, so for homogeneous boundary data this
    equals ``-<laplacian(s), s>`` exactly.
    """
    g = s.grid
    grad = gradient(s)
    wx = np.ones(g.ux_shape[0])
    if not g.periodic:
        wx[0] = wx[-1] = 0.5
    wy = np.ones(g.ny + 1)
    wy[0] = wy[-1] = 0.5
    total = np.sum(wx[:, None] * grad.ux**2) + np.sum(wy[None, :] * grad.uy**2)
    return float(total * g.cell_area)


def norm(s, kind="L2"):
    v = s.values
    if kind == "L1":
        return float(np.sum(np.abs(v)) * s.grid.cell_area)
    if kind == "L2":
        return float(np.sqrt(np.sum(v * v) * s.grid.cell_area))
    if kind == "Linf":
        return float(np.abs(v).max())
    raise ValueError(f"unknown norm kind {kind!r}")


def cross_section_average(s):
    """Per-column mean over the cross-section; length ``nx``."""
    return s.values.mean(axis=1)


# -- velocity operators (no-slip closure) ------------------------------------

def _apply_axes(arr, axes):
    from .spectral import AxisOperator

    (kx, nx, hx), (ky, ny, hy) = axes
    return AxisOperator(kx, nx, hx).apply(arr, 0) + AxisOperator(ky, ny, hy).apply(arr, 1)


def vector_laplacian(v):
    """Componentwise Laplacian with no-slip ghosts; wall-normal faces stay zero."""
    g = v.grid
    out = VectorField2D.zeros(g)
    if g.periodic:
        out.ux[:] = _apply_axes(v.ux, g.ux_axes())
    else:
        out.ux[1:-1] = _apply_axes(v.ux[1:-1], g.ux_axes())
    out.uy[:, 1:-1] = _apply_axes(v.uy[:, 1:-1], g.uy_axes())
    return out


def velocity_grad_norm_sq(v):
    """``||grad u||^2`` defined as ``-<vector_laplacian(u), u>`` (no-slip SBP)."""
    return -inner(vector_laplacian(v), v)
