import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkdg.fluxes import (
    InteriorPenalty,
    default_penalty,
    get_flux,
    hll,
    interior_penalty,
    llf,
    register_flux,
)
from rkdg.models import ModelError, euler_model, heat_model, linear_advection_model
from rkdg.riemann import godunov_flux

states = st.tuples(st.floats(0.2, 4.0), st.floats(-1.5, 1.5), st.floats(0.2, 4.0))


def cons(gas, V):
    return gas.to_cons(np.array([V], dtype=float))


@pytest.mark.parametrize("flux", [llf, hll])
@settings(max_examples=40, deadline=None)
@given(V=states)
def test_consistency(flux, V):
    m = euler_model(1.4, 1)
    U = cons(m.gas, V)
    n = np.array([[1.0]])
    F, lam = flux(m, 0.0, None, U, U, n)
    np.testing.assert_allclose(F, m.F_c(0, None, U)[..., 0], rtol=1e-12, atol=1e-12)
    assert lam[0] > 0


@pytest.mark.parametrize("flux", [llf, hll])
@settings(max_examples=40, deadline=None)
@given(VL=states, VR=states)
def test_conservation_under_normal_flip(flux, VL, VR):
    m = euler_model(1.4, 1)
    UL, UR = cons(m.gas, VL), cons(m.gas, VR)
    F1, _ = flux(m, 0.0, None, UL, UR, np.array([[1.0]]))
    F2, _ = flux(m, 0.0, None, UR, UL, np.array([[-1.0]]))
    np.testing.assert_allclose(F1, -F2, rtol=1e-12, atol=1e-12)


def test_llf_hand_value():
    m = linear_advection_model((2.0,))
    UL, UR = np.array([[1.0]]), np.array([[3.0]])
    F, lam = llf(m, 0.0, np.zeros((1, 1)), UL, UR, np.array([[1.0]]))
    # central 4, dissipation 0.5 * 2 * (1 - 3) = -2
    assert F[0, 0] == pytest.approx(2.0) and lam[0] == 2.0


def test_upwinding_for_linear_advection():
    m = linear_advection_model((1.5, -0.5))
    UL, UR = np.array([[1.0]]), np.array([[-2.0]])
    n = np.array([[1.0, 0.0]])
    F, _ = llf(m, 0.0, np.zeros((1, 2)), UL, UR, n)
    assert F[0, 0] == pytest.approx(1.5 * 1.0)


def test_hll_supersonic_is_upwind():
    m = euler_model(1.4, 1)
    UL, UR = cons(m.gas, (1.0, 5.0, 1.0)), cons(m.gas, (0.5, 4.0, 0.5))
    F, _ = hll(m, 0.0, None, UL, UR, np.array([[1.0]]))
    np.testing.assert_allclose(F, m.F_c(0, None, UL)[..., 0])


def test_hll_hand_value_on_sod():
    m = euler_model(1.4, 1)
    left, right = (1.0, 0.0, 1.0), (0.125, 0.0, 0.1)
    UL, UR = cons(m.gas, left), cons(m.gas, right)
    F, lam = hll(m, 0.0, None, UL, UR, np.array([[1.0]]))
    c = np.sqrt(1.4)
    sl, sr = -c, c
    FL = np.array([0.0, 1.0, 0.0])
    FR = np.array([0.0, 0.1, 0.0])
    mid = (sr * FL - sl * FR + sl * sr * (UR[0] - UL[0])) / (sr - sl)
    np.testing.assert_allclose(F[0], mid, rtol=1e-14)
    assert lam[0] == pytest.approx(c)
    # the Godunov mass flux is smaller: HLL smears the transonic rarefaction
    assert godunov_flux(1.4, left, right)[0] < F[0, 0]


def test_hll_needs_gas():
    m = linear_advection_model()
    with pytest.raises(ModelError):
        hll(m, 0, np.zeros((1, 1)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))


def test_registry():
    assert get_flux("default") is llf and get_flux("hll") is hll
    register_flux("mine", llf)
    assert get_flux("mine") is llf
    with pytest.raises(ModelError):
        get_flux("roe")


@pytest.mark.parametrize("k, d, eta", [(1, 1, 4.0), (2, 1, 9.0), (1, 2, 3.0), (4, 2, 15.0)])
def test_default_penalty(k, d, eta):
    assert default_penalty(k, d) == eta


def test_penalty_must_be_positive():
    with pytest.raises(ModelError):
        InteriorPenalty(0.0)


def test_interior_penalty_heat():
    eps = 0.5
    m = heat_model(eps)
    UL, UR = np.array([[2.0]]), np.array([[1.0]])
    DUL, DUR = np.array([[[1.0]]]), np.array([[[3.0]]])
    n = np.array([[1.0]])
    F, sL, sR = interior_penalty(m, 0.0, None, UL, UR, DUL, DUR, n, np.array([0.1]), 4.0)
    # {eps du}.n - pen/h eps [[u]]
    assert F[0, 0] == pytest.approx(eps * 2.0 - 40.0 * eps * 1.0)
    np.testing.assert_allclose(sL, eps * 1.0 * np.ones((1, 1, 1)))
    np.testing.assert_allclose(sR, sL)


def test_interior_penalty_continuous_data():
    m = heat_model(1.0)
    U = np.array([[1.5]])
    DU = np.array([[[0.7]]])
    F, _, _ = interior_penalty(m, 0.0, None, U, U, DU, DU, np.array([[1.0]]), np.array([0.1]), 4.0)
    assert F[0, 0] == pytest.approx(0.7)
