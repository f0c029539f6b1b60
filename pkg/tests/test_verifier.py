import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatwalk.distributions import make_step_distribution, moment_abs
from heatwalk.heatref import HeatReference
from heatwalk.lattice_scheme import build_field
from heatwalk.testfn import constant, gauss_bump, make_test_function, sine_bump
from heatwalk.verifier import (
    HypothesisError, InfiniteMoment, cor22_audit, doubling_explore, epsilon_n, fit_rate,
    lemma21_check, point_gap_exact, sup_gap, theorem12_check,
)

GAP4 = 2**-0.5 - (6 + 8 * math.exp(-0.5) + 2 * math.exp(-2)) / 16


class _C2Only(type(gauss_bump())):
    smoothness = 2


# -- lemma ---------------------------------------------------------------

def test_lemma21_examples(bump, rad):
    assert lemma21_check(constant(2.0), rad).lhs == 0.0
    res = lemma21_check(bump, rad, scale=0.5)
    assert res.rhs == pytest.approx(bump.ck_norm(2) * 0.25 / 2)
    x = np.arange(-8, 8.0001, 0.01)
    direct = np.abs(0.5 * bump(x - 0.5) + 0.5 * bump(x + 0.5) - bump(x)).max()
    assert res.lhs == pytest.approx(direct, abs=1e-15)
    assert res.passed and not res.vacuous
    quad = lemma21_check(make_test_function("square"), rad)
    assert quad.vacuous and quad.passed
    assert quad.lhs == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("g", [gauss_bump(1.0), gauss_bump(0.5), sine_bump(1.0), sine_bump(3.0)],
                         ids=lambda g: g.name)
@pytest.mark.parametrize("dist", ["rademacher", "asym_lattice", "lazy_walk", "gaussian"])
def test_lemma21_catalog(g, dist):
    Y = make_step_distribution(dist)
    for scale in (1.0, 0.25):
        res = lemma21_check(g, Y, scale=scale, delta=0.02)
        assert res.lhs <= res.rhs + 1e-10


# -- corollary -----------------------------------------------------------

def test_cor22_rademacher(bump, rad, rad_ref):
    aud = cor22_audit(build_field(bump, rad, 16, derivs=2), rad_ref)
    assert aud.passed
    assert max(aud.ratio_step, aud.ratio_trace_step, aud.ratio_heat_time) <= 1.0
    assert aud.vacuous == []


def test_cor22_quadratic_vacuous(rad):
    f = make_test_function("square")
    aud = cor22_audit(build_field(f, rad, 8, derivs=2), HeatReference(f, rad.cov))
    assert set(aud.vacuous) == {"step", "trace_step", "heat_time"}
    assert aud.passed


# -- consistency error ---------------------------------------------------

@pytest.mark.parametrize("name", ["rademacher", "asym_lattice", "lazy_walk", "lattice2d_corr"])
def test_epsilon_quadratic_vanishes(name):
    d = make_step_distribution(name)
    f = make_test_function("square", d.dim)
    assert epsilon_n(f, d, 4, delta=0.2).epsilon <= 1e-12


def test_epsilon_decreasing(bump, rad):
    eps = [epsilon_n(bump, rad, n).epsilon for n in (4, 8, 16, 32)]
    assert all(b < a for a, b in zip(eps, eps[1:]))


def test_epsilon_needs_c3(rad):
    with pytest.raises(HypothesisError):
        epsilon_n(_C2Only(gauss_bump().atoms, "c2", {}), rad, 4)


# -- sup gap -------------------------------------------------------------

def test_gap_point_component(bump, rad, rad_ref):
    assert GAP4 == pytest.approx(0.0119246, abs=1e-7)
    assert point_gap_exact(bump, rad, 4, rad_ref) == pytest.approx(GAP4, abs=1e-14)
    rep = sup_gap(bump, rad, 4, rad_ref)
    assert rep.gap_sup >= GAP4
    assert rep.gap_sup == max(rep.sigma_n, rep.sigma_tilde_n)


def test_gap_gaussian_steps(bump):
    g = make_step_distribution("gaussian")
    rep = sup_gap(bump, g, 16, HeatReference(bump, g.cov), mc_samples=10**5, seed=2)
    assert rep.backend == "monte-carlo"
    assert rep.gap_sup <= 3 * rep.max_stderr


def test_gap_monotone_trend(bump, asym, asym_ref):
    gaps = [sup_gap(bump, asym, n, asym_ref).gap_sup for n in (8, 16, 32, 64)]
    assert all(b <= a + 1e-10 for a, b in zip(gaps, gaps[1:]))


def test_gap_hypotheses(rad):
    f = make_test_function("square")
    with pytest.raises(HypothesisError):
        sup_gap(f, rad, 4, HeatReference(f, rad.cov))


# -- rate fit ------------------------------------------------------------

def test_fit_rate_examples():
    fit = fit_rate([(4, 0.5), (16, 0.25), (64, 0.125)])
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


@given(c=st.floats(1e-3, 1e3), p=st.floats(-2, 2))
def test_fit_rate_power_law(c, p):
    fit = fit_rate([(n, c * n**p) for n in (3, 10, 40, 200)])
    assert fit.slope == pytest.approx(p, abs=1e-9)


def test_fit_rate_rejects():
    with pytest.raises(ValueError):
        fit_rate([(1, 1.0), (2, 0.0), (4, 1.0)])
    with pytest.raises(ValueError):
        fit_rate([(1, 1.0), (2, 1.0)])
    fit = fit_rate([(1, 1.0), (2, 0.5), (4, 0.25), (8, 0.1, 0.05)])
    assert fit.excluded == [[8.0, 0.1, 0.05]]
    assert fit.slope == pytest.approx(-1.0)


# -- doubling ------------------------------------------------------------

def test_doubling_gaussian_degenerate(bump):
    g = make_step_distribution("gaussian")
    rep = doubling_explore(bump, g, 8, HeatReference(bump, g.cov))
    assert rep.degenerate and rep.case == "degenerate"


@pytest.mark.parametrize("n", [8, 16])
def test_doubling_rademacher(bump, rad, rad_ref, n):
    rep = doubling_explore(bump, rad, n, rad_ref)
    assert rep.sigma_n > 1e-9 and not rep.degenerate
    assert rep.c_n == rep.sigma_n / 8
    assert rep.C_n == pytest.approx(2 * math.sqrt(n))
    assert rep.grid_sup_phi > rep.sigma_n / 2
    assert rep.sup_phi >= rep.grid_sup_phi
    assert 0 <= rep.s0 <= 2 and 0 <= rep.k0 <= 2 * n
    assert rep.time_gap <= rep.time_gap_bound
    if rep.interior_x:
        assert rep.hessian_gap >= -1e-8
    if 0 < rep.s0 < 2:
        # first-order condition in s at an interior maximizer
        assert abs(rep.residual_s) <= 1e-6


def test_doubling_sine(rad):
    f = sine_bump(1.0)
    rep = doubling_explore(f, rad, 8, HeatReference(f, rad.cov))
    assert rep.claim_sup_phi
    if rep.interior_x:
        assert rep.hessian_gap >= -1e-8


# -- rate at a point -----------------------------------------------------

def test_theorem12_asym(bump, asym, asym_ref):
    rec = theorem12_check(bump, asym, asym_ref, [8, 16, 32, 64, 128], 1.0)
    assert rec.bounded and rec.spread < 10 and rec.growth == 1.0
    assert rec.moment == pytest.approx(10 / 3)
    assert rec.constants[2] == pytest.approx(rec.gaps[2] * math.sqrt(32) / (10 / 3))


def test_theorem12_decay_is_bounded(bump, asym, asym_ref):
    # at x = 0 the gap decays like 1/n, so the sqrt(n)-scaled constant tends to 0
    rec = theorem12_check(bump, asym, asym_ref, [8 * 2**i for i in range(8)], 1.0)
    assert rec.spread > 10 and rec.growth == 1.0 and rec.bounded


def test_theorem12_gaussian(bump):
    g = make_step_distribution("gaussian")
    rec = theorem12_check(bump, g, HeatReference(bump, g.cov), [4, 16, 64], 1.0, N=10**5, seed=3)
    assert rec.bounded
    assert all(gap <= 3 * se for gap, se in zip(rec.gaps, rec.stderrs))


def test_theorem12_errors(bump):
    p = make_step_distribution("pareto_sym")
    with pytest.raises(InfiniteMoment):
        theorem12_check(bump, p, HeatReference(bump, p.cov), [8, 16, 32], 1.0)
    with pytest.raises(HypothesisError):
        theorem12_check(bump, p, HeatReference(bump, p.cov), [8, 16, 32], 1.5)
    assert math.isfinite(moment_abs(p, 2.4))


def test_records_serialize(bump, rad, rad_ref):
    import json
    rep = doubling_explore(bump, rad, 8, rad_ref)
    json.dumps(rep.as_dict(), allow_nan=False)
    json.dumps(sup_gap(bump, rad, 4, rad_ref).as_dict(), allow_nan=False)
