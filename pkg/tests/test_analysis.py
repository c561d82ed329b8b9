from dataclasses import replace
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subband_ffc import (BankSpec, TransferFunction, attenuation_report, cascade,
                         design_bank, evaluation_window, freq_response, frf_compare,
                         make_fullband_scenario, make_synthetic_scenario,
                         optimal_controller, welch_psd)

FS = 41760.0


@pytest.fixture(scope="module")
def bank4():
    return design_bank(BankSpec(4, 64, 110.0, FS))


# -- PSD -----------------------------------------------------------------------------

def test_white_noise_psd_level():
    x = np.random.default_rng(0).standard_normal(2 ** 17)
    psd = welch_psd(x, 1024, 0.5, FS)
    level = np.mean(psd.density[1:-1])
    assert abs(10 * math.log10(level * FS / 2)) <= 1.5


def test_sinusoid_dominates_its_bin():
    f0 = 3000.0
    x = np.sin(2 * np.pi * f0 / FS * np.arange(2 ** 15))
    x += 1e-3 * np.random.default_rng(1).standard_normal(x.size)
    psd = welch_psd(x, 4096, 0.5, FS)
    peak = int(np.argmax(psd.density))
    assert abs(psd.freqs_hz[peak] - f0) <= psd.df
    assert 10 * math.log10(psd.density[peak] / np.median(psd.density)) >= 30.0


def test_zero_signal_psd():
    np.testing.assert_array_equal(welch_psd(np.zeros(8192), 1024, 0.5, FS).density, 0.0)


def test_parseval_for_white_noise():
    x = np.random.default_rng(2).standard_normal(60 * 1024)
    psd = welch_psd(x, 1024, 0.0, FS)
    assert psd.total_power() == pytest.approx(np.var(x), rel=0.10)


# -- attenuation ---------------------------------------------------------------------

def test_attenuation_examples(bank4):
    x = np.random.default_rng(3).standard_normal(2 ** 14)
    assert attenuation_report(x, x, bank4) == [0.0] * 4
    np.testing.assert_allclose(attenuation_report(x, x / 10, bank4), 20.0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_attenuation_is_antisymmetric(seed):
    bank = design_bank(BankSpec(4, 64, 110.0, FS))
    x, y = np.random.default_rng(seed).standard_normal((2, 8192))
    y *= np.linspace(0.1, 3.0, y.size)
    fwd = attenuation_report(x, y, bank)
    back = attenuation_report(y, x, bank)
    assert fwd == [-v for v in back]


def test_evaluation_window():
    events = [{"k": 10, "event": "frozen"}, {"k": 500, "region": None, "event": "all_frozen"}]
    assert evaluation_window(events, 10_000, settle=100) == (601, 10_000)
    assert evaluation_window([], 10_000) == (0, 10_000)
    assert evaluation_window(events, 520, settle=100) == (0, 520)


# -- FRF comparison -----------------------------------------------------------------

def test_frf_compare_examples():
    tf = TransferFunction([0.3, 0.2, -0.1], [1.0, -0.5], FS)
    same = frf_compare(tf, tf, (1000.0, 5000.0))
    assert same["mag_db"] == 0.0 and same["phase_deg"] == 0.0
    double = frf_compare(tf.scaled(2.0), tf, (1000.0, 5000.0))
    assert double["mag_db"] == pytest.approx(6.0206, abs=1e-4)
    assert double["phase_deg"] == pytest.approx(0.0, abs=1e-9)


def test_unit_delay_phase_error_grows_linearly():
    tf = TransferFunction([0.5, 0.25], [1.0], FS)
    delayed = TransferFunction([0.0, 0.5, 0.25], [1.0], FS)
    for hi in (2000.0, 6000.0, 10000.0):
        rep = frf_compare(delayed, tf, (0.0, hi), fraction=1.0)
        assert rep["phase_deg"] == pytest.approx(180.0 * hi / (FS / 2), rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6),
       st.floats(0, 15000), st.floats(100, 5000))
def test_frf_compare_self_is_zero(b, lo, width):
    tf = TransferFunction(b, [1.0], FS)
    rep = frf_compare(tf, tf, (lo, lo + width))
    assert rep["mag_db"] == 0.0 and rep["phase_deg"] == 0.0


# -- optimal controller ----------------------------------------------------------------

def test_zero_primary_path_gives_zero_controller():
    sc = make_fullband_scenario()
    zero = replace(sc, primary_path=TransferFunction([0.0], [1.0], FS))
    ref = optimal_controller(zero, 0, 4)
    np.testing.assert_allclose(ref.fir, 0.0, atol=1e-15)


def test_matching_paths_give_minus_one():
    sc = make_fullband_scenario()
    same = replace(sc, primary_path=cascade(sc.sensor_path, sc.plants[0]))
    ref = optimal_controller(same, 0, 4)
    np.testing.assert_allclose(ref.target, -1.0, rtol=1e-10)
    np.testing.assert_allclose(ref.fir, [-1.0, 0.0, 0.0, 0.0], atol=1e-10)


def test_fullband_optimum_is_exact_fir():
    sc = make_fullband_scenario()
    # R = 0.8 q^-1 / A_R and P = S_D (0.9 q^-1 - 0.4 q^-2), so -P / (S_D R) = -(0.9 - 0.4 q^-1) A_R / 0.8
    expected = -np.convolve([0.9, -0.4], sc.plants[0].a) / 0.8
    ref = optimal_controller(sc, 0, 4)
    np.testing.assert_allclose(ref.fir, expected, atol=1e-10)
    assert ref.residual_max < 1e-10


def test_fitted_controller_within_reported_residual():
    sc = make_synthetic_scenario(difficulty="desk")
    bank = sc.make_bank()
    for i in range(4):
        ref = optimal_controller(sc, i, 4, bank)
        w = 2 * np.pi * ref.freqs_hz / FS
        fitted = freq_response(ref.tf, ref.freqs_hz)
        err = np.abs(fitted - ref.target * np.exp(-1j * w * ref.delay))
        assert np.max(err) <= ref.residual_max * (1 + 1e-9)
