import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subband_ffc import (Identifier, RegionOrders, TransferFunction, filter_signal,
                         in_band_fit_report, make_synthetic_scenario)
from subband_ffc.plantsim import identify_region
from subband_ffc.rls import batch_solution
from subband_ffc.sysid import RegionModel, RegionRegressor, extract_model, predict_error

FS = 41760.0


def arx_data(theta_A, theta_B, theta_M, K, seed=0, noise=0.0):
    """Samples of ``e(k) = theta_A.e(k-1..) + theta_B.u(k-1..) + theta_M.a(k..)``."""
    rng = np.random.default_rng(seed)
    u, a = rng.standard_normal((2, K))
    e = np.zeros(K)
    for k in range(K):
        acc = sum(theta_A[j] * e[k - 1 - j] for j in range(len(theta_A)) if k - 1 - j >= 0)
        acc += sum(theta_B[j] * u[k - 1 - j] for j in range(len(theta_B)) if k - 1 - j >= 0)
        acc += sum(theta_M[j] * a[k - j] for j in range(len(theta_M)) if k - j >= 0)
        e[k] = acc + noise * rng.standard_normal()
    return e, u, a


def identify(orders, e, u, a, lam=1.0, sigma=1e4):
    ident = Identifier(orders, lam=lam, sigma=sigma, fs=FS)
    rows = []
    for ek, uk, ak in zip(e, u, a):
        ident.begin(ak)
        rows.append(ident.reg.phi_S.copy())
        ident.observe(ek, uk)
    return ident, np.array(rows)


# -- regressor ----------------------------------------------------------------------

def test_zero_history_gives_zero_regressor():
    reg = RegionRegressor(RegionOrders(2, 2, 2))
    reg.push(0.0, 0.0, 0.0)
    np.testing.assert_array_equal(reg.phi_S, 0.0)


def test_regressor_ordering():
    reg = RegionRegressor(RegionOrders(2, 1, 3))
    reg.push(4.0, 0.0, 1.0)
    reg.push(3.0, 0.0, 2.0)
    reg.push(9.0, 0.0, 3.0)
    np.testing.assert_array_equal(reg.phi_e, [9.0, 3.0])
    np.testing.assert_array_equal(reg.phi_a, [3.0, 2.0, 1.0])
    reg2 = RegionRegressor(RegionOrders(2, 1, 1))
    reg2.push(4.0, 0.0, 0.0)
    reg2.push(3.0, 0.0, 0.0)
    np.testing.assert_array_equal(reg2.phi_e, [3.0, 4.0])


# -- prediction --------------------------------------------------------------------------

def test_zero_model_predicts_zero():
    orders = RegionOrders(2, 2, 2)
    reg = RegionRegressor(orders)
    reg.push(1.0, 2.0, 3.0)
    assert predict_error(extract_model(np.zeros(orders.p), orders), reg) == 0.0


def test_exact_model_has_zero_a_priori_error():
    tA, tB, tM = [0.8], [0.3, 0.1], [0.5, 0.2]
    e, u, a = arx_data(tA, tB, tM, 200)
    orders = RegionOrders(1, 2, 2)
    model = RegionModel(np.array(tA), np.array(tB), np.array(tM))
    reg = RegionRegressor(orders)
    e_prev = u_prev = 0.0
    for ek, uk, ak in zip(e, u, a):
        reg.push(e_prev, u_prev, ak)
        assert abs(ek - predict_error(model, reg)) <= 1e-12
        e_prev, u_prev = ek, uk


def test_m_only_model_predicts_from_reference():
    orders = RegionOrders(2, 2, 3)
    reg = RegionRegressor(orders)
    for ak in (1.0, -2.0, 0.5):
        reg.push(0.0, 0.0, ak)
    theta_M = np.array([0.3, -0.1, 0.7])
    model = RegionModel(np.zeros(2), np.zeros(2), theta_M)
    assert predict_error(model, reg) == pytest.approx(theta_M @ reg.phi_a, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prediction_is_linear_in_theta(seed):
    rng = np.random.default_rng(seed)
    orders = RegionOrders(3, 2, 4)
    reg = RegionRegressor(orders)
    for _ in range(6):
        reg.push(*rng.standard_normal(3))
    t1, t2 = rng.standard_normal((2, orders.p))
    alpha, beta = rng.standard_normal(2)
    lhs = predict_error(extract_model(alpha * t1 + beta * t2, orders), reg)
    rhs = (alpha * predict_error(extract_model(t1, orders), reg)
           + beta * predict_error(extract_model(t2, orders), reg))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


# -- identification ----------------------------------------------------------------

def test_noiseless_identification_matches_batch_oracle():
    tA, tB, tM = [0.8], [0.3, 0.1], [0.5, 0.2]
    e, u, a = arx_data(tA, tB, tM, 500)
    ident, Phi = identify(RegionOrders(1, 2, 2), e, u, a)
    truth = np.r_[tA, tB, tM]
    np.testing.assert_allclose(ident.theta, truth, rtol=0, atol=1e-4)
    np.testing.assert_allclose(ident.theta, batch_solution(Phi, e, 1.0, 1e4),
                               rtol=1e-8, atol=1e-10)


def test_consistency_after_ten_p_samples():
    tA, tB, tM = [0.5, -0.2], [0.4, 0.1], [0.3, 0.2]
    orders = RegionOrders(2, 2, 2)
    e, u, a = arx_data(tA, tB, tM, 10 * orders.p, seed=7)
    ident, _ = identify(orders, e, u, a, sigma=1e8)
    np.testing.assert_allclose(ident.theta, np.r_[tA, tB, tM], rtol=0, atol=1e-4)


def test_zero_excitation_leaves_theta_unchanged():
    ident = Identifier(RegionOrders(2, 2, 2), fs=FS)
    ident.est.theta[:] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    before = ident.theta.copy()
    for _ in range(50):
        ident.begin(0.0)
        ident.observe(0.0, 0.0)
    np.testing.assert_array_equal(ident.theta, before)


def test_forgetting_tracks_a_parameter_step():
    K = 3000
    e1, u1, a1 = arx_data([0.5], [0.4], [0.3], K, seed=1, noise=0.01)
    e2, u2, a2 = arx_data([0.5], [-0.4], [0.3], K, seed=2, noise=0.01)
    e, u, a = np.r_[e1, e2], np.r_[u1, u2], np.r_[a1, a2]
    orders = RegionOrders(1, 1, 1)
    forgetting, Phi = identify(orders, e, u, a, lam=0.995)
    plain, _ = identify(orders, e, u, a, lam=1.0)
    assert abs(forgetting.theta[1] + 0.4) < 0.02
    assert abs(plain.theta[1] + 0.4) > 0.2
    np.testing.assert_allclose(forgetting.theta, batch_solution(Phi, e, 0.995, 1e4),
                               rtol=1e-6, atol=1e-8)


# -- model extraction ---------------------------------------------------------------

def test_extract_model_mapping():
    orders = RegionOrders(1, 1, 1)
    model = extract_model([0.8, 0.3, 0.0], orders, FS)
    np.testing.assert_array_equal(model.Rhat.b, [0.0, 0.3])
    np.testing.assert_array_equal(model.Rhat.a, [1.0, -0.8])
    fir = extract_model([0.0, 0.3, 0.0], orders, FS)
    assert fir.Rhat.is_fir


def test_identification_round_trip():
    orders = RegionOrders(2, 2, 1)
    theta = np.array([0.6, -0.2, 0.5, 0.25, 0.0])
    model = extract_model(theta, orders, FS)
    u = np.random.default_rng(4).standard_normal(400)
    e = filter_signal(model.Rhat, u)
    ident, _ = identify(orders, e, u, np.zeros_like(u), sigma=1e6)
    np.testing.assert_allclose(ident.theta[:4], theta[:4], rtol=0, atol=1e-6)


# -- fit report ---------------------------------------------------------------------

def test_fit_report_examples():
    tf = TransferFunction([0.0, 0.3], [1.0, -0.8], FS)
    rep = in_band_fit_report(tf, tf, (0.0, 5220.0))
    assert rep["mag_db"] == 0.0 and rep["phase_deg"] == 0.0
    zero = extract_model(np.zeros(3), RegionOrders(1, 1, 1), FS)
    rep = in_band_fit_report(zero, TransferFunction([1.0], [1.0], FS), (0.0, 5220.0))
    assert math.isinf(rep["mag_db"]) and rep["max_abs_error"] == pytest.approx(1.0)


def test_fifth_order_fit_to_higher_order_plant_in_band():
    scenario = make_synthetic_scenario(difficulty="desk")
    bank = scenario.make_bank()
    assert len(scenario.plants[0].poles()) > 5
    ident = identify_region(scenario, 1, 10_000, bank=bank)
    rep = in_band_fit_report(ident.model, scenario.plants[0], bank.band_edges[1])
    assert rep["mag_db"] <= 1.0 and rep["phase_deg"] <= 5.0
