"""Ignition-type reaction rates.

A rate ``f`` vanishes at and below the ignition threshold ``theta0`` and at and
above 1, and is positive in between. Values of ``theta`` outside ``[0, 1]``
(discretization overshoot) map to a zero rate.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import TabulatedNonMonotoneSupport, ValidationError

KINDS = ("quadratic-ignition", "linear-ignition", "tabulated")


@dataclass(frozen=True)
class IgnitionNonlinearity:
    kind: str = "quadratic-ignition"
    theta0: float = 0.25
    amplitude: float = 1.0
    table: tuple = None  # ((theta...), (f...)) for kind == "tabulated"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"reaction.kind must be one of {KINDS}")
        if not 0.0 < self.theta0 < 1.0:
            raise ValidationError("reaction.theta0 must lie in (0, 1)")
        if not self.amplitude > 0:
            raise ValidationError("reaction.amplitude must be positive")
        if self.kind == "tabulated":
            if self.table is None:
                raise ValidationError("tabulated reaction requires a table")
            th, fv = (np.asarray(a, dtype=float) for a in self.table)
            if th.ndim != 1 or th.shape != fv.shape or th.size < 2:
                raise ValidationError("reaction table must be two equal-length columns")
            if np.any(np.diff(th) <= 0):
                raise ValidationError("reaction table abscissae must be strictly increasing")
            object.__setattr__(self, "table", (tuple(th), tuple(fv)))

    @classmethod
    def from_csv(cls, path, theta0, amplitude=1.0):
        """Load ``theta,f`` pairs (header optional) and scale by ``amplitude``."""
        th, fv = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    a, b = float(row[0]), float(row[1])
                except ValueError:
                    continue  # header
                th.append(a)
                fv.append(amplitude * b)
        return cls("tabulated", theta0, amplitude, (tuple(th), tuple(fv)))

    def __call__(self, theta):
        return evaluate(self, theta)

    @property
    def conforming(self):
        return self.kind != "linear-ignition"


def evaluate(f, theta):
    """Rate ``f(theta)``; works elementwise on arrays and returns a float for scalars."""
    if isinstance(theta, float) and f.kind != "tabulated":
        # scalar fast path, hit once per right-hand-side call of the shooting ODE
        if not f.theta0 < theta < 1.0:
            return 0.0
        if f.kind == "quadratic-ignition":
            return f.amplitude * (theta - f.theta0) * (1.0 - theta)
        return f.amplitude * (1.0 - theta)
    th = np.asarray(theta, dtype=float)
    active = (th > f.theta0) & (th < 1.0)
    if f.kind == "quadratic-ignition":
        rate = f.amplitude * (th - f.theta0) * (1.0 - th)
    elif f.kind == "linear-ignition":
        rate = f.amplitude * (1.0 - th)
    else:
        tx, fy = f.table
        rate = np.interp(th, tx, fy, left=0.0, right=0.0)
    out = np.where(active, rate, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def lipschitz_bound(f):
    """Analytic Lipschitz constant on ``(theta0, 1)`` (used by the time-step limit)."""
    if f.kind == "quadratic-ignition":
        return f.amplitude * (1.0 - f.theta0)
    if f.kind == "linear-ignition":
        return f.amplitude
    tx, fy = (np.asarray(a) for a in f.table)
    return float(np.max(np.abs(np.diff(fy) / np.diff(tx))))


@dataclass
class ValidationReport:
    lipschitz: float
    max_jump: float
    slope_at_one: float
    positive: bool
    conforming: bool
    notes: list


def validate(f, n_samples=10_000):
    """Sample-based checks of the ignition conditions.

    Raises :class:`TabulatedNonMonotoneSupport` if a tabulated rate is nonzero
    outside ``(theta0, 1)``.
    """
    notes = []
    if f.kind == "tabulated":
        tx, fy = (np.asarray(a) for a in f.table)
        outside = (tx <= f.theta0) | (tx >= 1.0)
        if np.any(fy[outside] != 0.0):
            raise TabulatedNonMonotoneSupport(
                "tabulated rate is nonzero outside (theta0, 1)"
            )
    th = np.linspace(0.0, 1.0, n_samples)
    fv = evaluate(f, th)
    h = th[1] - th[0]
    jumps = np.abs(np.diff(fv))
    lip = float(jumps.max() / h)
    max_jump = float(jumps.max())

    inner = th[(th > f.theta0) & (th < 1.0)]
    positive = bool(inner.size and np.all(evaluate(f, inner) > 0.0))
    if not positive:
        notes.append("rate is not positive on (theta0, 1)")

    eps = 1e-7
    slope_at_one = (evaluate(f, 1.0 - eps / 2) - evaluate(f, 1.0 - eps)) / (eps / 2)

    # a jump shows up as a sample difference that does not shrink with h
    lip_ref = lipschitz_bound(f) if f.kind != "linear-ignition" else f.amplitude
    continuous = max_jump <= 2.0 * lip_ref * h + 1e-12
    if not continuous:
        notes.append(f"discontinuity of size {max_jump:.3g}")
    conforming = positive and continuous and slope_at_one < 0.0 and f.conforming
    if f.kind == "linear-ignition":
        notes.append("linear-ignition is not Lipschitz; oracle use only")
    return ValidationReport(lip, max_jump, float(slope_at_one), positive, conforming, notes)
