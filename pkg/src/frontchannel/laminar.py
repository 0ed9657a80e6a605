"""Laminar travelling front of the 1D reaction-diffusion equation.

The wave speed comes from shooting in the phase plane ``q(Phi) = -Phi'``,
where the profile equation becomes ``q dq/dPhi = c q - f(Phi)``. Below the
ignition threshold ``f = 0`` so ``q = c Phi`` exactly; above it we integrate
from ``(theta0, c theta0)`` towards ``Phi = 1`` and bisect on ``c``: a
trajectory that hits ``q = 0`` early means ``c`` is too small.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve_banded

from . import reaction
from .errors import FrontLeftWindow, NoFront, NonConvergence, ProfileSingularity

DELTA = 1e-8  # stop the hot-side integration at Phi = 1 - DELTA
RTOL = 1e-11
ATOL = 1e-14


def _hot_rhs(c, f):
    def rhs(phi, y):
        q = y[0]
        return [c - f(phi) / q, -1.0 / q]

    return rhs


def _hits_zero(phi, y):
    return y[0]


_hits_zero.terminal = True
_hits_zero.direction = -1


def _shoot(c, f, dense=False):
    """Integrate the hot side for trial speed ``c``; returns the solve_ivp result."""
    y0 = [c * f.theta0, 0.0]
    return solve_ivp(
        _hot_rhs(c, f),
        (f.theta0, 1.0 - DELTA),
        y0,
        method="RK45",
        rtol=RTOL,
        atol=ATOL,
        events=_hits_zero,
        dense_output=dense,
    )


def speed_too_small(c, f):
    """Bisection predicate: True when the trajectory reaches ``q = 0`` before ``Phi = 1``."""
    sol = _shoot(c, f)
    if sol.status == 1:
        return True
    if sol.status < 0:
        # step size collapse next to q -> 0 is the same event seen too late
        return bool(sol.y[0, -1] <= 0.0 or sol.t[-1] < 1.0 - DELTA)
    return bool(sol.y[0, -1] <= 0.0)


def speed_bracket(f):
    lip = reaction.validate(f).lipschitz if f.kind == "tabulated" else reaction.lipschitz_bound(f)
    return 1e-6, 10.0 * np.sqrt(lip * 1.0) + 10.0


def solve_wave_speed(f, tol=1e-6):
    """Unique laminar speed ``c0`` to absolute accuracy ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not reaction.validate(f).positive:
        raise NoFront("rate vanishes on (theta0, 1); no travelling front")
    lo, hi = speed_bracket(f)
    if not speed_too_small(lo, f) or speed_too_small(hi, f):
        raise NonConvergence(f"no sign change of the shooting predicate on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if speed_too_small(mid, f):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class FrontProfile:
    """Tabulated laminar front anchored at ``Phi(0) = theta0``.

    ``x_samples``/``phi_values`` are uniform samples; calling the profile
    evaluates it anywhere (cubic Hermite on the hot side, closed form on the
    cold side, linearized exponential tail beyond the hot end).
    """

    c0: float
    x_samples: np.ndarray
    phi_values: np.ndarray
    theta0: float
    hot_x: np.ndarray = field(repr=False)
    hot_phi: np.ndarray = field(repr=False)
    hot_q: np.ndarray = field(repr=False)
    hot_rate: float = field(repr=False)
    theta0_anchor: int = 0

    @cached_property
    def _spline(self):
        order = np.argsort(self.hot_x)
        return CubicHermiteSpline(self.hot_x[order], self.hot_phi[order], -self.hot_q[order])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        cold = x >= 0.0
        out[cold] = self.theta0 * np.exp(-self.c0 * x[cold])
        x_end = self.hot_x[-1]
        phi_end = self.hot_phi[-1]
        tail = x < x_end
        out[tail] = 1.0 - (1.0 - phi_end) * np.exp(self.hot_rate * (x[tail] - x_end))
        mid = ~cold & ~tail
        out[mid] = self._spline(x[mid])
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        cold = x >= 0.0
        out[cold] = -self.c0 * self.theta0 * np.exp(-self.c0 * x[cold])
        x_end = self.hot_x[-1]
        tail = x < x_end
        out[tail] = -(1.0 - self.hot_phi[-1]) * self.hot_rate * np.exp(
            self.hot_rate * (x[tail] - x_end)
        )
        mid = ~cold & ~tail
        out[mid] = self._spline(x[mid], 1)
        return out

    def shifted(self, a):
        """Samples of ``Phi(x - a)`` on the same abscissae (for translation tests)."""
        return self(self.x_samples - a)

    def dirichlet_energy(self):
        """``int |Phi'|^2 dx`` computed in the phase plane as ``int q dPhi``."""
        cold = 0.5 * self.c0 * self.theta0**2
        order = np.argsort(self.hot_phi)
        hot = trapezoid(self.hot_q[order], self.hot_phi[order])
        return float(cold + hot)

    def level_crossing(self, level=0.5):
        xs = self.x_samples[::-1]
        ps = self.phi_values[::-1]
        return float(np.interp(level, ps, xs))


def _hot_tail_rate(c0, f):
    """Decay rate of ``1 - Phi`` as ``x -> -inf`` from the linearization at 1."""
    eps = 1e-7
    slope = reaction.evaluate(f, 1.0 - eps) / eps  # -f'(1)
    return 0.5 * (-c0 + np.sqrt(c0 * c0 + 4.0 * max(slope, 0.0)))


def reconstruct_profile(c0, f, h=1e-3, cold_floor=1e-12, d_start=1e-9):
    """Tabulate the front for speed ``c0`` on a uniform grid of spacing ``h``.

    The hot side is integrated from the saddle at ``Phi = 1`` down to the
    ignition point, starting on the linearized separatrix: in that direction
    neighbouring trajectories converge, whereas the forward shot used for the
    speed drifts off the separatrix close to ``Phi = 1``.
    """
    fwd = _shoot(c0, f)
    if fwd.status == 1 or np.any(fwd.y[0] <= 0.0):
        raise ProfileSingularity("q vanishes inside (theta0, 1); c0 is below the front speed")
    rate = _hot_tail_rate(c0, f)
    if rate <= 0:
        raise ProfileSingularity("no decaying hot tail: f'(1) must be negative")

    def hits_zero(phi, y):
        return y[0]

    hits_zero.terminal = True
    back = solve_ivp(
        _hot_rhs(c0, f),
        (1.0 - d_start, f.theta0),
        [rate * d_start, 0.0],
        method="RK45",
        rtol=RTOL,
        atol=1e-16,
        events=hits_zero,
        dense_output=True,
    )
    if back.status != 0 or np.any(back.y[0] <= 0.0):
        raise ProfileSingularity("q vanishes inside (theta0, 1)")
    q_ign = back.y[0, -1]
    if abs(q_ign - c0 * f.theta0) > 1e-4 * c0 * f.theta0:
        raise ProfileSingularity(
            f"hot and cold branches do not meet (q={q_ign:.6g} vs c0*theta0={c0 * f.theta0:.6g})"
        )
    # nodes clustered towards Phi = 1 where x(Phi) is logarithmic
    s = np.linspace(0.0, 1.0, 6001)
    phis = 1.0 - (1.0 - f.theta0) * (d_start / (1.0 - f.theta0)) ** s
    q, x = back.sol(phis)
    x = x - back.y[1, -1]  # anchor Phi(0) = theta0

    x_cold_end = np.log(f.theta0 / cold_floor) / c0
    n_hot = int(np.ceil(-x[-1] / h))
    n_cold = int(np.ceil(x_cold_end / h))
    xs = np.arange(-n_hot, n_cold + 1) * h
    prof = FrontProfile(
        c0=float(c0),
        x_samples=xs,
        phi_values=np.empty(0),
        theta0=f.theta0,
        hot_x=x,
        hot_phi=phis,
        hot_q=q,
        hot_rate=float(rate),
        theta0_anchor=n_hot,
    )
    prof.phi_values = prof(xs)
    prof.phi_values[n_hot] = f.theta0
    return prof


def laminar_front(f, tol=1e-8, h=1e-3):
    c0 = solve_wave_speed(f, tol)
    return reconstruct_profile(c0, f, h)


def ode_residual(profile, f, exclude_ignition=True):
    """Max of ``|-c0 Phi' - Phi'' - f(Phi)|`` by central differences on the samples.

    Stencils that straddle ``x = 0`` are skipped by default: ``f'`` jumps at the
    ignition point, so the profile is only C^2 there and the difference quotient
    is first order on those two samples.
    """
    xs, p = profile.x_samples, profile.phi_values
    h = xs[1] - xs[0]
    d1 = (p[2:] - p[:-2]) / (2 * h)
    d2 = (p[2:] - 2 * p[1:-1] + p[:-2]) / h**2
    res = -profile.c0 * d1 - d2 - reaction.evaluate(f, p[1:-1])
    xm = xs[1:-1]
    keep = np.ones_like(xm, dtype=bool)
    if exclude_ignition:
        keep &= np.abs(xm) > 1.5 * h
    # the far cold tail is below round-off relative to h^2
    keep &= p[1:-1] > 1e-9
    return float(np.abs(res[keep]).max())


def laminar_burning_rate(profile, f):
    """``int f(Phi(x)) dx`` by quadrature in ``x`` over the hot side (f = 0 elsewhere)."""
    x0, x1 = profile.hot_x[-1], 0.0
    n = max(20001, int((x1 - x0) / 2e-4))
    xs = np.linspace(x0, x1, n)
    vals = reaction.evaluate(f, profile(xs))
    tail = vals[0] / profile.hot_rate  # exponential tail beyond the hot end
    return float(trapezoid(vals, xs) + tail)


# -- independent 1D PDE oracle ------------------------------------------------

def _level_crossing(theta, xc, level=0.5):
    above = theta >= level
    idx = np.flatnonzero(above[:-1] & ~above[1:])
    if idx.size == 0:
        return None
    i = idx[-1]
    t0, t1 = theta[i], theta[i + 1]
    return xc[i] + (t0 - level) / (t0 - t1) * (xc[i + 1] - xc[i])


def oracle_1d_speed(f, n=2048, T=None, length=64.0, dt=None, smoothing=1.0,
                    travel=40.0, return_track=False):
    """Measure the front speed by evolving ``theta_t = theta_xx + f(theta)``.

    Backward-Euler diffusion with Dirichlet ends (1 left, 0 right) plus an
    explicit reaction substep, on a window recentred by whole cells. The run
    stops at time ``T`` or once the front has moved ``travel`` units, whichever
    comes first; the speed is the least-squares slope of the level-1/2
    crossing over the last half of the run.
    """
    if n < 512:
        raise ValueError("oracle needs n >= 512")
    dx = length / n
    lip = reaction.lipschitz_bound(f)
    if dt is None:
        dt = min(0.1 * dx, 0.02 / max(lip, 1e-12))
    max_steps = int(np.ceil(T / dt)) if T is not None else 10_000_000
    xc = (np.arange(n) + 0.5) * dx
    theta = 0.5 * (1.0 - np.tanh((xc - 0.3 * length) / smoothing))

    r = dt / dx**2
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    ab[1, 0] = ab[1, -1] = 1.0 + 3.0 * r  # Dirichlet at the end faces via odd ghosts

    shift = 0.0
    start = _level_crossing(theta, xc)
    times, pos = [], []
    k = 0
    while k < max_steps:
        k += 1
        rhs = theta.copy()
        rhs[0] += 2.0 * r * 1.0
        theta = solve_banded((1, 1), ab, rhs, check_finite=False)
        theta = theta + dt * reaction.evaluate(f, theta)
        xf = _level_crossing(theta, xc)
        if xf is None or xf < 0.1 * length or xf > 0.9 * length:
            raise FrontLeftWindow("1D oracle front left the window")
        if xf > 0.6 * length:
            m = int(round((xf - 0.4 * length) / dx))
            theta = np.concatenate([theta[m:], np.zeros(m)])
            shift += m * dx
            xf -= m * dx
        times.append(k * dt)
        pos.append(shift + xf)
        if T is None and shift + xf - start >= travel:
            break
    times = np.asarray(times)
    pos = np.asarray(pos)
    late = times >= 0.5 * times[-1]
    slope = float(np.polyfit(times[late], pos[late], 1)[0])
    if return_track:
        return slope, times, pos
    return slope
