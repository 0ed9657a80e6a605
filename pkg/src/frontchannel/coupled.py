"""Coupled reaction-advection-diffusion / Boussinesq time stepping.

One step is Lie splitting of the temperature equation (conservative upwind
advection, backward-Euler diffusion, explicit reaction) followed by the flow
update driven by the new temperature. The front is kept inside a finite
window by shifting whole cells when it passes ``recenter_threshold * lx``.

Checkpoints are flat little-endian float64 files::

    [nx, ny, t, shift] theta(nx*ny) ux uy p [int_B, int_N, int_U, steps]

with arrays in C order. The trailing four values carry the running
time-integrals so that restarted runs keep their time averages.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics as dg
from . import reaction as rx
from .errors import (
    AmbiguousFront,
    CFLViolation,
    FrontLeftWindow,
    NumericalFailure,
    PerturbationOutOfRange,
    UnburnedExit,
    ValidationError,
)
from .flow import (
    FlowState,
    GravityForcing,
    project_divergence_free,
    solve_stationary_navier_stokes,
    solve_stationary_stokes,
    step_stokes,
)
from .grid import Grid2D, ScalarField, VectorField2D, cross_section_average, divergence, grad_norm_sq, inner
from .spectral import shifted_solver

log = logging.getLogger(__name__)

FLOW_MODELS = ("stokes-evolution", "stokes-stationary", "navier-stokes-stationary")
OVERSHOOT = 1e-3


@dataclass(frozen=True)
class PrescribedFlow:
    kind: str = "zero"
    amplitude: float = 0.0
    wavelength: float = 4.0

    def __post_init__(self):
        if self.kind not in ("zero", "cellular"):
            raise ValidationError("decay.flow must be 'zero' or 'cellular'")
        if self.kind == "cellular" and self.wavelength <= 0:
            raise ValidationError("decay.wavelength must be positive")

    def velocity(self, grid):
        """Face velocities from a corner streamfunction, so the discrete divergence vanishes."""
        if self.kind == "zero" or self.amplitude == 0.0:
            return VectorField2D.zeros(grid)
        periods = grid.lx / self.wavelength
        if not grid.periodic:
            periods *= 2.0  # psi must vanish at both x-ends
        if abs(periods - round(periods)) > 1e-9:
            raise ValidationError("cellular wavelength must fit the window")
        lam = grid.lam
        xn = np.arange(grid.nx + 1) * grid.dx
        yn = grid.y_faces
        X, Y = np.meshgrid(xn, yn, indexing="ij")
        psi = self.amplitude * np.sin(np.pi * Y / lam) ** 2 * np.sin(2 * np.pi * X / self.wavelength)
        psi[:, [0, -1]] = 0.0  # walls are streamlines
        if grid.periodic:
            psi[-1] = psi[0]
        else:
            psi[[0, -1]] = 0.0
        ux = (psi[:, 1:] - psi[:, :-1]) / grid.dy
        uy = -(psi[1:, :] - psi[:-1, :]) / grid.dx
        if grid.periodic:
            ux = ux[:-1]
        v = VectorField2D(grid, ux, uy)
        div = np.abs(divergence(v).values).max()
        scale = max(1.0, self.amplitude / min(grid.dx, grid.dy))
        if div > 1e-12 * scale or np.abs(v.uy[:, [0, -1]]).max() > 0:
            raise ValidationError("prescribed cellular flow failed its sampled invariants")
        if not grid.periodic and np.abs(v.ux[[0, -1]]).max() > 1e-12 * scale:
            raise ValidationError("prescribed cellular flow does not vanish at the x-ends")
        return v

    def analytic(self, x, y, lam):
        a, ell = self.amplitude, self.wavelength
        if self.kind == "zero":
            return np.zeros_like(x), np.zeros_like(x)
        ux = a * (np.pi / lam) * np.sin(2 * np.pi * y / lam) * np.sin(2 * np.pi * x / ell)
        uy = -a * (2 * np.pi / ell) * np.sin(np.pi * y / lam) ** 2 * np.cos(2 * np.pi * x / ell)
        return ux, uy


@dataclass
class SimConfig:
    # grid
    lx: float = 128.0
    lam: float = 1.0
    nx: int = 512
    ny: int = 64
    x_mode: str = "front"
    # physics
    reaction: rx.IgnitionNonlinearity = field(
        default_factory=lambda: rx.IgnitionNonlinearity("quadratic-ignition", 0.25, 2.0)
    )
    flow_model: str = "stokes-evolution"
    nu: float = 1.0
    gravity: GravityForcing = field(default_factory=lambda: GravityForcing(0.0))
    # time
    dt: float = None  # None: CFL-limited
    cfl_safety: float = 0.4
    T: float = 30.0
    n_flow: int = 1
    advection: str = "upwind"
    sample_interval: float = 0.1
    snapshot_interval: float = 1.0
    # window
    recenter_threshold: float = 0.6
    recenter_target: float = 0.4
    # initial data
    mode: str = "front"  # front | decay
    front_center: float = None  # default recenter_target * lx
    perturbation_amplitude: float = 0.0
    perturbation_width: float = 2.0
    perturbation_center: float = None  # default front_center
    noise_amplitude: float = 0.0
    seed: int = 0
    # decay mode
    decay_flow: PrescribedFlow = field(default_factory=PrescribedFlow)
    decay_width: float = 1.0
    decay_amplitude: float = 1.0
    decay_center: float = None  # default lx / 2
    decay_samples: int = 40
    decay_t_start: float = 0.5
    # sandwich
    t_min: float = None  # default T / 2

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.flow_model not in FLOW_MODELS:
            raise ValidationError(f"flow.model must be one of {FLOW_MODELS}")
        if self.nu <= 0:
            raise ValidationError("flow.nu must be positive")
        if self.mode not in ("front", "decay"):
            raise ValidationError("init.mode must be 'front' or 'decay'")
        if self.mode == "front" and self.x_mode != "front":
            raise ValidationError("front-like runs need grid.x_mode = front")
        if self.gravity.rho > 0 and self.gravity.g_hat[1] == 0.0:
            raise ValidationError("gravity.rho > 0 requires g2 != 0 (slanted channel)")
        if self.dt is not None and self.dt <= 0:
            raise ValidationError("time.dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValidationError("time.cfl_safety must lie in (0, 1]")
        if self.T <= 0:
            raise ValidationError("time.T must be positive")
        if self.advection not in ADVECTION_SCHEMES:
            raise ValidationError(f"advection.scheme must be one of {ADVECTION_SCHEMES}")
        if self.n_flow < 1:
            raise ValidationError("flow.n_flow must be >= 1")
        if not 0 < self.recenter_target < self.recenter_threshold < 1:
            raise ValidationError("need 0 < window.target < window.threshold < 1")
        if self.perturbation_width <= 0 or self.decay_width <= 0:
            raise ValidationError("widths must be positive")
        if self.sample_interval <= 0 or self.snapshot_interval <= 0:
            raise ValidationError("sampling intervals must be positive")
        self.grid  # noqa: B018 - grid invariants raise here
        return self

    @property
    def grid(self):
        try:
            return Grid2D(self.lx, self.lam, self.nx, self.ny, self.x_mode)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    @property
    def x_center(self):
        return self.recenter_target * self.lx if self.front_center is None else self.front_center


@dataclass
class SimState:
    t: float
    theta: ScalarField
    flow: FlowState
    shift: float = 0.0
    steps: int = 0
    int_B: float = 0.0
    int_N: float = 0.0
    int_U: float = 0.0
    last: tuple = None  # (B, N, u_inf) at time t
    max_div: float = 0.0
    theta_range: tuple = (0.0, 1.0)

    @property
    def grid(self):
        return self.theta.grid

    def averages(self):
        if self.t <= 0:
            b, n, u = self.last
            return b, n, u
        return self.int_B / self.t, self.int_N / self.t, self.int_U / self.t


def _instant(theta, flow, f):
    lam = theta.grid.lam
    return (dg.burning_rate(theta, f, lam), dg.nusselt(theta, lam), flow.u.sup_norm())


def init_front_like(config, profile, u0=None):
    """Front-like data ``Phi(x - x_c)`` plus an optional compact perturbation."""
    g = config.grid
    xc = config.x_center
    X, Y = g.mesh()
    theta = profile(X - xc)
    amp, noise = config.perturbation_amplitude, config.noise_amplitude
    if amp or noise:
        pc = xc if config.perturbation_center is None else config.perturbation_center
        r = (X - pc) / config.perturbation_width
        bump = np.where(np.abs(r) < 1.0, np.cos(0.5 * np.pi * r) ** 2, 0.0)
        pert = amp * bump * np.cos(np.pi * Y / g.lam)
        if noise:
            rng = np.random.default_rng(config.seed)
            pert = pert + noise * bump * rng.uniform(-1.0, 1.0, size=X.shape)
        theta = theta + pert
    lo, hi = theta.min(), theta.max()
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise PerturbationOutOfRange(f"initial theta spans [{lo:.4g}, {hi:.4g}], outside [0, 1]")
    theta = np.clip(theta, 0.0, 1.0)
    th = ScalarField(g, theta, "neumann-walls", (1.0, 0.0))
    flow = FlowState.at_rest(g, config.nu)
    if u0 is not None:
        flow = replace(flow, u=u0.copy())
    elif config.flow_model != "stokes-evolution":
        flow = _stationary_flow(th, config)
    state = SimState(0.0, th, flow)
    state.last = _instant(th, flow, config.reaction)
    state.max_div = float(np.abs(divergence(flow.u).values).max())
    state.theta_range = (float(theta.min()), float(theta.max()))
    return state


def _stationary_flow(theta, config):
    if config.flow_model == "stokes-stationary":
        return solve_stationary_stokes(theta, config.gravity, config.nu)
    return solve_stationary_navier_stokes(theta, config.gravity, config.nu)


# -- substeps ----------------------------------------------------------------

def cfl_limit(u, grid, f=None, safety=0.4):
    """``safety * min(1/(|ux|/dx + |uy|/dy), dx^2/4, 1/L_f)`` with dx the along-channel spacing."""
    rate = np.abs(u.ux).max(initial=0.0) / grid.dx + np.abs(u.uy).max(initial=0.0) / grid.dy
    limits = [grid.dx**2 / 4.0]
    if rate > 0:
        limits.append(1.0 / rate)
    if f is not None:
        lip = rx.lipschitz_bound(f)
        if lip > 0:
            limits.append(1.0 / lip)
    return safety * min(limits)


ADVECTION_SCHEMES = ("upwind", "central")


def _face_states(values, axis, periodic):
    """Cell values on either side of the interior faces along ``axis``."""
    v = np.moveaxis(values, axis, 0)
    if periodic:  # face i sits between cells i-1 and i
        a, b = np.roll(v, 1, axis=0), v
    else:
        a, b = v[:-1], v[1:]
    return np.moveaxis(a, 0, axis), np.moveaxis(b, 0, axis)


def _flux(w, a, b, scheme):
    if scheme == "upwind":
        return np.where(w > 0, w * a, w * b)
    return 0.5 * w * (a + b)


def advect(values, u, dt, scheme="upwind"):
    """One explicit step of ``phi_t + div(u phi) = 0`` in conservative flux form.

    ``upwind`` is first-order donor cell (monotone, numerical diffusion
    ``|u| dx / 2``); ``central`` averages the two neighbours, which adds no
    numerical diffusion and is safe while the cell Peclet number stays small.
    """
    if scheme not in ADVECTION_SCHEMES:
        raise ValueError(f"unknown advection scheme {scheme!r}")
    g = u.grid
    ux, uy = u.ux, u.uy
    a, b = _face_states(values, 0, g.periodic)
    if g.periodic:
        fx = _flux(ux, a, b, scheme)
        dfx = np.roll(fx, -1, axis=0) - fx
    else:
        fx = np.zeros(g.ux_shape)
        fx[1:-1] = _flux(ux[1:-1], a, b, scheme)
        dfx = fx[1:] - fx[:-1]
    a, b = _face_states(values, 1, False)
    fy = np.zeros(g.uy_shape)
    fy[:, 1:-1] = _flux(uy[:, 1:-1], a, b, scheme)
    dfy = fy[:, 1:] - fy[:, :-1]
    return values - dt * (dfx / g.dx + dfy / g.dy)


def diffuse_implicit(field_, dt):
    """Backward-Euler ``(I - dt L) phi = phi*`` honouring the field's x-end data."""
    g = field_.grid
    dirichlet = field_.ends is not None and not g.periodic
    (kx, nx, hx), (ky, ny, hy) = g.scalar_axes(field_.bc, x_dirichlet=dirichlet)
    solver = shifted_solver(kx, nx, hx, ky, ny, hy, 1.0, dt)
    rhs = field_.values.copy()
    if dirichlet:
        rhs[0] += dt * 2.0 * field_.ends[0] / g.dx**2
        rhs[-1] += dt * 2.0 * field_.ends[1] / g.dx**2
    return solver.solve(rhs)


def react(values, f, dt):
    return values + dt * rx.evaluate(f, values)


def _flow_update(state, theta, config, dt):
    if config.flow_model == "stokes-evolution":
        return step_stokes(state.flow, theta, config.gravity, dt)
    if config.gravity.rho == 0.0:
        return state.flow
    if (state.steps + 1) % config.n_flow == 0:
        return _stationary_flow(theta, config)
    return state.flow


def step_coupled(state, config, dt=None):
    """Advance one Lie-splitting step; returns a new :class:`SimState`."""
    g = state.grid
    f = config.reaction
    limit = cfl_limit(state.flow.u, g, f, config.cfl_safety)
    if dt is None:
        dt = config.dt if config.dt is not None else limit
    if dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.3e} exceeds the stability limit {limit:.3e}")
    th = advect(state.theta.values, state.flow.u, dt, config.advection)
    th = diffuse_implicit(state.theta.with_values(th), dt)
    th = react(th, f, dt)
    if not np.isfinite(th).all():
        raise NumericalFailure("temperature became non-finite")
    lo, hi = float(th.min()), float(th.max())
    if lo < -OVERSHOOT or hi > 1.0 + OVERSHOOT:
        raise NumericalFailure(f"temperature left [-{OVERSHOOT}, 1+{OVERSHOOT}]: [{lo:.4g}, {hi:.4g}]")
    theta = state.theta.with_values(th)
    flow = _flow_update(state, theta, config, dt)
    div = float(np.abs(divergence(flow.u).values).max())

    b, n, u = _instant(theta, flow, f)
    b0, n0, u0 = state.last
    return SimState(
        t=state.t + dt,
        theta=theta,
        flow=flow,
        shift=state.shift,
        steps=state.steps + 1,
        int_B=state.int_B + 0.5 * dt * (b0 + b),
        int_N=state.int_N + 0.5 * dt * (n0 + n),
        int_U=state.int_U + 0.5 * dt * (u0 + u),
        last=(b, n, u),
        max_div=max(state.max_div, div),
        theta_range=(min(state.theta_range[0], lo), max(state.theta_range[1], hi)),
    )


# -- window bookkeeping ------------------------------------------------------

def level_crossings(profile, level=0.5):
    above = profile >= level
    return np.flatnonzero(above[:-1] != above[1:])


def front_position_in_window(theta):
    g = theta.grid
    psi = cross_section_average(theta)
    idx = level_crossings(psi)
    if idx.size == 0:
        raise FrontLeftWindow("no level-1/2 crossing inside the window")
    if idx.size > 1:
        raise AmbiguousFront(f"{idx.size} level-1/2 crossings of the cross-section mean")
    i = idx[0]
    a, b = psi[i], psi[i + 1]
    return float(g.xc[i] + (a - 0.5) / (a - b) * g.dx)


def front_position(state):
    return state.shift + front_position_in_window(state.theta)


def _shift_faces(arr, k):
    out = np.zeros_like(arr)
    out[: arr.shape[0] - k] = arr[k:]
    return out


def recenter_window(state, config):
    """Shift the fields left by whole cells once the front passes the threshold."""
    g = state.grid
    xf = front_position_in_window(state.theta)
    if xf < 2 * g.dx or xf > g.lx - 2 * g.dx:
        raise FrontLeftWindow(f"front at {xf:.3f} reached the end of the window")
    if xf <= config.recenter_threshold * g.lx:
        return state
    k = int(round((xf - config.recenter_target * g.lx) / g.dx))
    if k <= 0:
        return state
    th = state.theta.values
    if th[:k].min() <= 1.0 - 1e-6:
        raise UnburnedExit(f"discarded cells not fully burned (min {th[:k].min():.6g})")
    new_th = np.zeros_like(th)
    new_th[: g.nx - k] = th[k:]
    theta = state.theta.with_values(new_th)

    flow = state.flow
    if flow.u.ux.any() or flow.u.uy.any():
        ux = _shift_faces(flow.u.ux, k)
        uy = _shift_faces(flow.u.uy, k)
        u = VectorField2D(g, ux, uy).enforce_walls()
        if config.flow_model == "stokes-evolution":
            u, _ = project_divergence_free(u)
            p = np.zeros_like(flow.p.values)
            p[: g.nx - k] = flow.p.values[k:]
            flow = FlowState(u, ScalarField(g, p - p.mean()), flow.nu)
        else:
            flow = _stationary_flow(theta, config)
    new = replace(state, theta=theta, flow=flow, shift=state.shift + k * g.dx)
    new.max_div = max(state.max_div, float(np.abs(divergence(flow.u).values).max()))
    return new


# -- drivers -----------------------------------------------------------------

@dataclass
class Snapshot:
    t: float
    shift: float
    theta: np.ndarray


@dataclass
class RunResult:
    series: "dg.DiagnosticsSeries"
    snapshots: list
    state: SimState
    config: SimConfig


def _sample(series, state):
    b, n, u = state.last
    bb, nb, ub = state.averages()
    th = state.theta
    series.append(
        t=state.t,
        B=b,
        N=n,
        u_inf=u,
        Bbar=bb,
        Nbar=nb,
        Ubar=ub,
        front_pos=front_position(state),
        mass=dg.norm_l1(th),
        l2theta=math.sqrt(inner(th, th)),
        grad_theta_l2=math.sqrt(grad_norm_sq(th)),
        grad_u_l2=dg.velocity_grad_l2(state.flow.u),
        div_max=float(np.abs(divergence(state.flow.u).values).max()),
    )


def run_simulation(config, profile=None, state=None, progress=None):
    """Integrate a front-like run to ``config.T``, sampling diagnostics and snapshots."""
    if config.mode != "front":
        raise ValidationError("run_simulation needs init.mode = front")
    if state is None:
        if profile is None:
            from .laminar import laminar_front

            profile = laminar_front(config.reaction)
        state = init_front_like(config, profile)
    series = dg.DiagnosticsSeries()
    snaps = [Snapshot(state.t, state.shift, state.theta.values.copy())]
    _sample(series, state)
    eps = 1e-12 * config.T
    next_sample = state.t + config.sample_interval
    next_snap = state.t + config.snapshot_interval
    while state.t < config.T - eps:
        limit = cfl_limit(state.flow.u, state.grid, config.reaction, config.cfl_safety)
        dt = config.dt if config.dt is not None else limit
        dt = min(dt, config.T - state.t)
        state = step_coupled(state, config, dt)
        state = recenter_window(state, config)
        done = state.t >= config.T - eps
        if state.t >= next_sample - eps or done:
            _sample(series, state)
            next_sample += config.sample_interval
        if state.t >= next_snap - eps or done:
            snaps.append(Snapshot(state.t, state.shift, state.theta.values.copy()))
            next_snap += config.snapshot_interval
        if progress is not None:
            progress(state)
    return RunResult(series, snaps, state, config)


def gaussian_initial(config):
    """Cross-section uniform Gaussian ``a * exp(-(x - x_c)^2 / w^2)``."""
    g = config.grid
    xc = g.lx / 2 if config.decay_center is None else config.decay_center
    w, a = config.decay_width, config.decay_amplitude
    return ScalarField.from_function(g, lambda X, Y: a * np.exp(-((X - xc) ** 2) / w**2))


def run_decay(config, flow=None, phi0=None, sample_times=None):
    """Advection-diffusion without reaction or feedback; records norm decay."""
    g = config.grid
    flow = config.decay_flow if flow is None else flow
    phi = gaussian_initial(config) if phi0 is None else phi0
    if phi.ends is not None:
        phi = replace(phi, ends=None)
    u = flow.velocity(g)
    dt_max = cfl_limit(u, g, None, config.cfl_safety)
    dt = dt_max if config.dt is None else config.dt
    if dt > dt_max * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.3e} exceeds the stability limit {dt_max:.3e}")
    if sample_times is None:
        sample_times = np.geomspace(config.decay_t_start, config.T, config.decay_samples)
    sample_times = np.asarray(sample_times, dtype=float)
    series = dg.DecaySeries(l1_initial=dg.norm_l1(phi))
    series.record(0.0, phi)
    t, k = 0.0, 0
    values = phi.values
    for ts in sample_times:
        while t < ts - 1e-12 * ts:
            h = min(dt, ts - t)
            star = advect(values, u, h, config.advection)
            new = diffuse_implicit(phi.with_values(star), h)
            a = phi.with_values(star)
            b = phi.with_values(new)
            excess = (inner(b, b) - inner(a, a)) / h + 2.0 * grad_norm_sq(b)
            series.note_dissipation(excess)
            values = new
            t += h
            k += 1
        series.record(t, phi.with_values(values))
    return series


# -- checkpoints -------------------------------------------------------------

def dump_checkpoint(state, path):
    g = state.grid
    header = np.array([g.nx, g.ny, state.t, state.shift], dtype="<f8")
    trailer = np.array([state.int_B, state.int_N, state.int_U, state.steps], dtype="<f8")
    parts = [header, state.theta.values.ravel(), state.flow.u.ux.ravel(),
             state.flow.u.uy.ravel(), state.flow.p.values.ravel(), trailer]
    np.concatenate([np.asarray(p, dtype="<f8") for p in parts]).tofile(path)


def restore_checkpoint(path, config):
    data = np.fromfile(path, dtype="<f8")
    g = config.grid
    nx, ny = int(data[0]), int(data[1])
    if (nx, ny) != (g.nx, g.ny):
        raise ValidationError(f"checkpoint grid {nx}x{ny} does not match config {g.nx}x{g.ny}")
    t, shift = float(data[2]), float(data[3])
    sizes = [g.nx * g.ny, int(np.prod(g.ux_shape)), int(np.prod(g.uy_shape)), g.nx * g.ny, 4]
    if data.size != 4 + sum(sizes):
        raise ValidationError("checkpoint size does not match the declared layout")
    chunks = np.split(data[4:], np.cumsum(sizes)[:-1])
    ends = (1.0, 0.0) if config.mode == "front" else None
    theta = ScalarField(g, chunks[0].reshape(g.nx, g.ny), "neumann-walls", ends)
    u = VectorField2D(g, chunks[1].reshape(g.ux_shape), chunks[2].reshape(g.uy_shape))
    p = ScalarField(g, chunks[3].reshape(g.nx, g.ny))
    ib, in_, iu, steps = chunks[4]
    flow = FlowState(u, p, config.nu)
    state = SimState(t, theta, flow, shift, int(steps), ib, in_, iu)
    state.last = _instant(theta, flow, config.reaction)
    state.theta_range = (float(theta.values.min()), float(theta.values.max()))
    return state
