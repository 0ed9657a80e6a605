import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from frontchannel import diagnostics as dg
from frontchannel.coupled import Snapshot
from frontchannel.errors import InsufficientDecade, MissingBaseline, ZeroField
from frontchannel.flow import GravityForcing
from frontchannel.grid import Grid2D, ScalarField
from frontchannel.laminar import laminar_front
from frontchannel.reaction import IgnitionNonlinearity

F = IgnitionNonlinearity("quadratic-ignition", 0.25, 2.0)


@pytest.fixture(scope="module")
def profile():
    return laminar_front(F)


def series_from(t, **cols):
    n = len(t)
    full = {k: np.zeros(n) for k in dg.SERIES_FIELDS}
    full["t"] = np.asarray(t, dtype=float)
    full.update(cols)
    return dg.DiagnosticsSeries.from_arrays(**full)


def test_burning_rate_and_nusselt_of_laminar_profile(profile):
    g = Grid2D(64.0, 1.0, 4096, 8)
    X, _ = g.mesh()
    th = ScalarField(g, profile(X - 40.0), ends=(1.0, 0.0))
    assert dg.burning_rate(th, F) == pytest.approx(profile.c0, rel=1e-3)
    assert dg.nusselt(th) == pytest.approx(profile.dirichlet_energy(), rel=1e-3)


def test_series_append_rules():
    s = dg.DiagnosticsSeries()
    row = {k: 0.0 for k in dg.SERIES_FIELDS}
    s.append(**row)
    with pytest.raises(ValueError):
        s.append(**row)  # t not increasing
    with pytest.raises(ValueError):
        s.append(t=1.0)
    assert len(s) == 1 and s.final()["t"] == 0.0


def test_time_averages_trapezoid():
    t = np.linspace(0, 2, 21)
    s = series_from(t, B=t, N=np.ones_like(t), u_inf=t**2)
    b, n, u = dg.time_averages(s)
    assert b == pytest.approx(1.0) and n == pytest.approx(1.0)
    assert u == pytest.approx(4 / 3, rel=1e-2)


def test_check_record_rules():
    with pytest.raises(ValueError):
        dg.CheckRecord("x", 1.0, explicit=True)
    with pytest.raises(ValueError):
        dg.CheckRecord("x", 1.0, fitted=1.0, passed=True)
    with pytest.raises(ValueError):
        dg.CheckRecord("x", 1.0, fitted=math.inf)


def test_bound_report_round_trip():
    rep = dg.BoundReport()
    rep.add(dg.CheckRecord("hard", 1.0, rhs=2.0, explicit=True, passed=True))
    rep.add(dg.CheckRecord("soft", 0.5, fitted=0.25, stability=0.1))
    d = json.loads(rep.to_json())
    assert d["passed"] is True and len(d["records"]) == 2
    assert "hard" in rep.table() and "fit" in rep.table()
    rep.add(dg.CheckRecord("bad", 3.0, rhs=2.0, explicit=True, passed=False))
    assert not rep.passed and [r.name for r in rep.hard_failures] == ["bad"]


@given(st.integers(0, 10_000), st.floats(0.01, 2.0), st.floats(0, 80))
def test_lemma_h_holds_on_random_smooth_fields(seed, rho, angle):
    g = Grid2D(8.0, 1.0, 64, 16)
    r = np.random.default_rng(seed)
    X, Y = g.mesh()
    v = sum(r.uniform(-1, 1) * np.cos(k * np.pi * X / 8) * np.cos(m * np.pi * Y)
            for k in range(4) for m in range(3))
    rec = dg.lemma_h_check(ScalarField(g, v), GravityForcing.from_angle(rho, angle))
    assert rec.passed and rec.lhs <= rec.rhs


def test_lemma_h_zero_rho():
    g = Grid2D(8.0, 1.0, 32, 8)
    rec = dg.lemma_h_check(ScalarField(g, np.random.default_rng(0).uniform(size=(32, 8))),
                           GravityForcing(0.0))
    assert rec.lhs == 0.0 and rec.rhs == 0.0 and rec.passed


def rows(cb, c0=0.8, base=0.79, cu=0.01):
    out = [{"rho": 0.0, "nu": 1.0, "Bbar": base, "Nbar": 0.2, "Ubar": 0.0}]
    for rho in (0.05, 0.1, 0.2):
        eps = rho + rho**2
        out.append({"rho": rho, "nu": 1.0, "Bbar": base + cb * eps, "Nbar": 0.2, "Ubar": cu * eps})
    return out


def test_theorem_fit_recovers_constants():
    rep = dg.theorem_main_check(rows(0.5), 0.8)
    assert rep.get("fit_C_B").fitted == pytest.approx(0.5)
    assert rep.get("fit_C_U").fitted == pytest.approx(0.01)
    assert rep.get("fit_C_N").fitted == 0.0  # 0.2 <= c0/2
    assert rep.passed  # baseline within 5% and Ubar = 0


def test_theorem_fit_refinement_stability():
    rep = dg.theorem_main_check(rows(0.5), 0.8, refined_rows=rows(0.55))
    assert rep.get("fit_C_B").stability == pytest.approx(0.1)


def test_theorem_fit_against_c0():
    rep = dg.theorem_main_check(rows(0.0), 0.8, reference="c0")
    assert rep.get("fit_C_B").fitted == pytest.approx(0.01 / (0.05 + 0.0025))


def test_baseline_only_sweep():
    rep = dg.theorem_main_check(rows(0.5)[:1], 0.8)
    assert [r.name for r in rep.records] == ["baseline_Bbar(nu=1)", "baseline_Ubar(nu=1)"]


def test_missing_baseline():
    with pytest.raises(MissingBaseline):
        dg.theorem_main_check(rows(0.5)[1:], 0.8)


def test_nusselt_constant_bisection():
    c = dg._n_constant(1.0, 0.1, 1.0, 0.8)
    assert (c * 0.1 + math.sqrt(0.4 + c * 0.01)) ** 2 == pytest.approx(1.0, rel=1e-9)


def test_lemma31_constants_zero_for_exact_averages():
    t = np.linspace(0, 10, 101)
    s = series_from(t, Bbar=np.full_like(t, 0.8), Nbar=np.full_like(t, 0.3), Ubar=np.zeros_like(t))
    rep = dg.lemma31_check(s, 0.8)
    assert rep.get("lemma31_nusselt").fitted == 0.0
    assert rep.get("lemma32_burning_two_sided").fitted == 0.0


@given(st.floats(0.1, 10), st.floats(0.2, 0.8))
def test_decay_fit_recovers_power_law(a, alpha):
    t = np.geomspace(0.5, 50, 40)
    s = dg.DecaySeries(l1_initial=1.0, times=list(t), linf=list(a * t**-alpha))
    fit = dg.decay_analysis(s)
    assert fit.alpha == pytest.approx(alpha, rel=1e-9)
    assert fit.prefactor == pytest.approx(a, rel=1e-9)


def test_decay_fit_needs_a_decade():
    t = np.geomspace(1, 5, 40)
    with pytest.raises(InsufficientDecade):
        dg.decay_analysis(dg.DecaySeries(1.0, list(t), linf=list(t**-0.5)))


def test_mann_kendall():
    assert dg.mann_kendall_increasing(np.arange(10.0))[0]
    assert not dg.mann_kendall_increasing(np.arange(10.0)[::-1])[0]
    assert not dg.mann_kendall_increasing(np.ones(10))[0]


def test_nash_ratio_scale_invariant(rng):
    g = Grid2D(4.0, 1.0, 16, 8)
    s = ScalarField(g, rng.uniform(size=(16, 8)))
    assert dg.nash_ratio(s.with_values(3 * s.values)) == pytest.approx(dg.nash_ratio(s))
    with pytest.raises(ZeroField):
        dg.nash_ratio(ScalarField.constant(g, 0.0))


def test_sandwich_of_exact_travelling_wave(profile):
    g = Grid2D(64.0, 1.0, 512, 8)
    xc = 25.0
    snaps, ts = [], np.arange(0, 11.0)
    for t in ts:
        X, _ = g.mesh()
        snaps.append(Snapshot(t, 0.0, profile(X - xc - profile.c0 * t)))
    series = series_from(np.linspace(0, 10, 101))
    rep = dg.sandwich_check(snaps, series, profile, g, xc)
    rec = rep.get("sandwich")
    assert rec.lhs == 0.0 and rec.fitted <= 1e-5
    assert not rec.details["upward_trend"]
