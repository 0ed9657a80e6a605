"""Fast direct solvers for shifted 5-point Laplacians on the channel grid.

Every linear system in the package has the form ``(a - b*L) x = r`` where
``L = Lx (+) Ly`` is a Kronecker sum of 1D second-difference operators with
one of four boundary closures. Each closure is diagonalized by a real
trigonometric transform, so the solve is two transforms and a division.

==================  =============================  ===================
kind                unknowns / closure             transform
==================  =============================  ===================
``periodic``        n points, wrap-around          real FFT
``neumann``         n cell centres, mirror ghost   DCT-II
``dirichlet_cell``  n cell centres, odd ghost      DST-II
``dirichlet_node``  n interior nodes, zero ends    DST-I
==================  =============================  ===================
"""

from functools import lru_cache

import numpy as np
from scipy import fft

KINDS = ("periodic", "neumann", "dirichlet_cell", "dirichlet_node")


class AxisOperator:
    """One-dimensional second difference with a fixed closure."""

    def __init__(self, kind, n, h):
        if kind not in KINDS:
            raise ValueError(f"unknown axis kind {kind!r}")
        self.kind = kind
        self.n = int(n)
        self.h = float(h)
        n = self.n
        if kind == "periodic":
            k = np.arange(n // 2 + 1)
            arg = np.pi * k / n
        elif kind == "neumann":
            arg = np.pi * np.arange(n) / (2 * n)
        elif kind == "dirichlet_cell":
            arg = np.pi * (np.arange(n) + 1) / (2 * n)
        else:
            arg = np.pi * (np.arange(n) + 1) / (2 * (n + 1))
        self.eig = -(4.0 / self.h**2) * np.sin(arg) ** 2

    def forward(self, a, axis):
        if self.kind == "periodic":
            return fft.rfft(a, axis=axis)
        if self.kind == "neumann":
            return fft.dct(a, type=2, axis=axis)
        if self.kind == "dirichlet_cell":
            return fft.dst(a, type=2, axis=axis)
        return fft.dst(a, type=1, axis=axis)

    def inverse(self, a, axis):
        if self.kind == "periodic":
            return fft.irfft(a, n=self.n, axis=axis)
        if self.kind == "neumann":
            return fft.idct(a, type=2, axis=axis)
        if self.kind == "dirichlet_cell":
            return fft.idst(a, type=2, axis=axis)
        return fft.idst(a, type=1, axis=axis)

    def apply(self, a, axis):
        """Explicit stencil application, used to cross-check the transforms."""
        a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
        if self.kind == "periodic":
            lo, hi = np.roll(a, 1, axis=0), np.roll(a, -1, axis=0)
        else:
            if self.kind == "neumann":
                g_lo, g_hi = a[:1], a[-1:]
            elif self.kind == "dirichlet_cell":
                g_lo, g_hi = -a[:1], -a[-1:]
            else:
                g_lo, g_hi = np.zeros_like(a[:1]), np.zeros_like(a[-1:])
            lo = np.concatenate([g_lo, a[:-1]], axis=0)
            hi = np.concatenate([a[1:], g_hi], axis=0)
        out = (lo - 2.0 * a + hi) / self.h**2
        return np.moveaxis(out, 0, axis)


class ShiftedLaplacianSolver:
    """Solve ``(a - b*(Lx + Ly)) x = r`` on an ``(nx, ny)`` array.

    With ``a == 0`` the operator may be singular (pure Neumann/periodic); the
    null-space component is dropped, which gives the mean-zero solution when
    the right side is compatible.
    """

    def __init__(self, ax, ay, a, b):
        if ay.kind == "periodic":
            raise ValueError("only the x axis may be periodic")
        self.ax, self.ay = ax, ay
        self.a, self.b = float(a), float(b)
        denom = self.a - self.b * (ax.eig[:, None] + ay.eig[None, :])
        scale = np.abs(self.a) + np.abs(self.b) * (np.abs(ax.eig).max() + np.abs(ay.eig).max())
        singular = np.abs(denom) <= 1e-13 * scale
        with np.errstate(divide="ignore"):
            inv = np.where(singular, 0.0, 1.0 / np.where(singular, 1.0, denom))
        self.inv_denom = inv
        self.singular = bool(singular.any())

    @property
    def shape(self):
        return (self.ax.n, self.ay.n)

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != self.shape:
            raise ValueError(f"rhs shape {rhs.shape} != {self.shape}")
        work = self.ay.forward(rhs, axis=1)
        work = self.ax.forward(work, axis=0)
        work = work * self.inv_denom
        work = self.ax.inverse(work, axis=0)
        return np.ascontiguousarray(self.ay.inverse(work, axis=1))

    def apply(self, x):
        return self.a * x - self.b * (self.ax.apply(x, 0) + self.ay.apply(x, 1))


@lru_cache(maxsize=64)
def shifted_solver(kx, nx, hx, ky, ny, hy, a, b):
    return ShiftedLaplacianSolver(AxisOperator(kx, nx, hx), AxisOperator(ky, ny, hy), a, b)
