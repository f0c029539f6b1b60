import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatwalk.heatref import HeatReference, QuadratureError, heat_hessian_trace, heat_value, pde_residual, semigroup_check
from heatwalk.testfn import LorentzProduct, gauss_bump, make_test_function, sine_bump


def test_heat_value_examples(bump, rad_ref):
    assert heat_value(rad_ref, 0.0, 1.0) == pytest.approx(2**-0.5, abs=1e-10)
    assert heat_value(rad_ref, 1.0, 1.0) == pytest.approx(2**-0.5 * math.exp(-0.25), abs=1e-10)
    x = np.linspace(-3, 3, 7)
    assert np.array_equal(heat_value(rad_ref, x, 0.0), bump(x))


def test_closed_form_matches_quadrature(bump):
    closed = HeatReference(bump, [[1.3]])
    quad = HeatReference(bump, [[1.3]], quad_order=128, backend="quadrature")
    x = np.linspace(-4, 4, 17)
    for t in (0.1, 1.0, 2.0):
        for a in range(5):
            assert np.allclose(closed.deriv((a,), x, t), quad.deriv((a,), x, t), atol=1e-10)


def test_hessian_trace_examples(rad_ref):
    assert heat_hessian_trace(rad_ref, 0.0, 1.0) == pytest.approx(-2**-1.5, abs=1e-10)
    sq = HeatReference(make_test_function("square"), [[1.0]])
    assert heat_hessian_trace(sq, 0.3, 0.7) == pytest.approx(2.0, abs=1e-14)


@given(st.floats(1e-3, 1.0))
def test_hessian_trace_linear_in_cov(eps):
    f = sine_bump(1.0)
    a = HeatReference(f, [[eps]]).hessian_trace(0.4, 0.0)
    b = HeatReference(f, [[1.0]]).hessian_trace(0.4, 0.0)
    assert a == pytest.approx(eps * b, rel=1e-12)


def test_pde_residual(rad_ref):
    assert abs(pde_residual(rad_ref, 0.0, 1.0, 1e-4)) <= 1e-6
    r1 = abs(pde_residual(rad_ref, 0.5, 1.0, 0.1))
    r2 = abs(pde_residual(rad_ref, 0.5, 1.0, 0.05))
    assert r1 / r2 >= 3.5
    sq = HeatReference(make_test_function("square"), [[1.0]])
    for h in (0.5, 0.1, 1e-3):
        assert abs(pde_residual(sq, 1.7, 1.0, h)) <= 1e-12
    with pytest.raises(ValueError):
        pde_residual(rad_ref, 0.0, 0.1, 0.2)


def test_semigroup(rad_ref):
    assert semigroup_check(rad_ref, 0.0, 0.5, 0.5) <= 1e-8
    assert semigroup_check(rad_ref, 0.3, 0.5, 0.0) == 0.0
    assert semigroup_check(rad_ref, 0.3, 0.0, 0.4) <= 1e-10


def test_quadrature_refuses_to_miss_tolerance():
    ref = HeatReference(LorentzProduct(1.0), [[1.0]])
    with pytest.raises(QuadratureError):
        ref.value(0.0, 1.0)
    loose = HeatReference(LorentzProduct(1.0), [[1.0]], tol=1e-4)
    assert float(loose.value(0.0, 1.0)) == pytest.approx(0.6557, abs=1e-3)


def test_time_continuity_and_contraction():
    f = sine_bump(1.0)
    ref = HeatReference(f, [[2.0]])
    x = np.linspace(-6, 6, 241)
    c2 = f.ck_norm(2)
    for t in (0.0, 0.3, 1.0):
        for h in (0.01, 0.2, 1.0):
            gap = np.abs(ref.value(x, t + h) - ref.value(x, t)).max()
            assert gap <= h * c2 * 2.0 / 2
        for a in range(5):
            assert np.abs(ref.deriv((a,), x, t)).max() <= f.sup_abs_deriv((a,)) + 1e-8


def test_vanishing_shell():
    f = gauss_bump(1.0)
    ref = HeatReference(f, [[1.0]])
    # u(., t) is a Gaussian of variance 1 + t; shell bound from the closed form
    for t in (0.5, 2.0):
        R = 8.0
        shell = np.abs(ref.value(np.array([-R, R]), t)).max()
        assert shell <= math.exp(-R * R / (2 * (1 + t))) + 1e-15


def test_two_dim_reference():
    f = gauss_bump(scales=[1.0, 1.0])
    cov = np.array([[1.0, 0.5], [0.5, 0.5]])
    ref = HeatReference(f, cov)
    quad = HeatReference(f, cov, quad_order=32, backend="quadrature")
    x = np.array([[0.0, 0.0], [0.5, -1.0]])
    assert np.allclose(ref.value(x, 1.0), quad.value(x, 1.0), atol=1e-10)
    # closed form at 0: det(I + t cov)^(-1/2)
    assert ref.value(x[0], 1.0) == pytest.approx(np.linalg.det(np.eye(2) + cov) ** -0.5, abs=1e-14)
