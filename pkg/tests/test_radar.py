import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqradar.dataset import builtin_profiles
from hqradar.errors import ParameterError
from hqradar.radar import (
    ComplexTimeSeries,
    DroneProfile,
    RadarConfig,
    TargetGeometry,
    add_awgn,
    blade_coefficients,
    coherent_gain_db,
    noise_only,
    noise_variance,
    sinc,
    synthesize_mm,
)
from hqradar.spectrogram import stft

DISCO = DroneProfile("Parrot Disco", 2, 0.010, 0.104, 40.0)
RADAR = RADAR_DEFAULT = RadarConfig()


def test_disco_series_length():
    ts = synthesize_mm(DISCO, RADAR, TargetGeometry(0.5, 0.15))
    assert len(ts) == 2000
    assert ts.sample_rate == 10_000.0


def test_value_at_origin_matches_scalar_evaluation():
    # at t=0 with two blades, sin(Omega_n) = 0 so the sum collapses to 2*alpha
    ts = synthesize_mm(DISCO, RADAR, TargetGeometry(0.5, 0.2, range_m=0.0))
    assert ts.samples[0] == pytest.approx(1.8794757877980612, abs=1e-12)


def test_value_off_grid_matches_scalar_evaluation():
    # independent cmath evaluation at t = 1.23 ms, R = 100 m, v = 5 m/s
    radar = RadarConfig(prf=1 / 0.00123, duration=2 * 0.00123)
    ts = synthesize_mm(DISCO, radar, TargetGeometry(0.5, 0.2, range_m=100.0, v_rad=5.0))
    assert ts.samples[1].real == pytest.approx(-0.26543766067647695, abs=1e-9)
    assert ts.samples[1].imag == pytest.approx(0.14991545176120985, abs=1e-9)


def test_zero_aspect_is_exactly_null():
    # alpha = sin(p) + sin(-p) = 0 and beta = 0 when theta = 0
    for p in builtin_profiles():
        ts = synthesize_mm(p, RADAR, TargetGeometry(0.0, 0.2))
        assert np.all(ts.samples == 0)


def test_blade_coefficients_symmetry():
    a, b = blade_coefficients(0.7, 0.2)
    a2, b2 = blade_coefficients(-0.7, 0.2)
    assert a == a2 and b == -b2
    assert a == pytest.approx(math.sin(0.9) + math.sin(0.5), abs=1e-15)
    assert b == pytest.approx(math.sin(0.9) - math.sin(0.5), abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(-1.4, 1.4), st.floats(0.0, 0.3))
def test_amplitude_linearity(amp, theta, pitch):
    g1 = TargetGeometry(theta, pitch, amplitude=1.0)
    ga = TargetGeometry(theta, pitch, amplitude=amp)
    base = synthesize_mm(DISCO, RADAR, g1).samples
    scaled = synthesize_mm(DISCO, RADAR, ga).samples
    np.testing.assert_allclose(scaled, amp * base, rtol=1e-12, atol=1e-12 * amp)


def test_rotor_periodicity_in_time():
    # with two blades the pattern repeats every 1/(N f_rot) = 12.5 ms = 125 samples
    ts = synthesize_mm(DISCO, RADAR, TargetGeometry(0.4, 0.1, range_m=0.0))
    np.testing.assert_allclose(ts.samples[125:], ts.samples[:-125], atol=1e-9)


def test_body_doppler_is_a_pure_phase_ramp():
    g0 = TargetGeometry(0.4, 0.1, range_m=0.0, v_rad=0.0)
    g1 = TargetGeometry(0.4, 0.1, range_m=0.0, v_rad=3.0)
    a = synthesize_mm(DISCO, RADAR, g0).samples
    b = synthesize_mm(DISCO, RADAR, g1).samples
    t = np.arange(2000) / 10_000.0
    np.testing.assert_allclose(b, a * np.exp(-1j * 4 * np.pi / 0.03 * 3.0 * t), atol=1e-12)


def test_carrier_option_only_adds_phase():
    g = TargetGeometry(0.4, 0.1)
    a = synthesize_mm(DISCO, RADAR, g)
    b = synthesize_mm(DISCO, RADAR, g, baseband=False)
    np.testing.assert_allclose(np.abs(a.samples), np.abs(b.samples), atol=1e-12)


def test_blade_flash_period_from_spectrogram_energy():
    ts = add_awgn(synthesize_mm(DISCO, RADAR, TargetGeometry(0.5, 0.15)), 30.0, 1.0, 0)
    energy = (np.abs(stft(ts).complex()) ** 2).sum(axis=0)
    e = energy - energy.mean()
    ac = np.correlate(e, e, "full")[len(e) - 1 :]
    # first prominent local maximum once the zero-lag lobe has dropped below zero
    start = int(np.argmax(ac < 0))
    lag = next(
        k for k in range(start + 1, len(ac) - 1)
        if ac[k] >= ac[k - 1] and ac[k] > ac[k + 1] and ac[k] > 0.25 * ac[0]
    )
    assert abs(lag - 15.625) <= 1


def test_sinc_small_argument_branch():
    x = np.array([0.0, 1e-8, -1e-7, 1e-3, 2.0])
    expect = np.array([1.0, 1.0, 1.0, math.sin(1e-3) / 1e-3, math.sin(2.0) / 2.0])
    np.testing.assert_allclose(sinc(x), expect, rtol=1e-14)


@pytest.mark.parametrize("snr", [-5.0, -10.0, -15.0, -20.0])
def test_noise_variance_calibration(snr):
    sigma2 = noise_variance(snr, 1.0)
    assert sigma2 == pytest.approx(10 ** (-snr / 10), rel=1e-15)
    n = noise_only(200_000, sigma2, 7).samples
    assert np.mean(np.abs(n) ** 2) == pytest.approx(sigma2, rel=0.02)
    # circular: equal power in both quadratures
    assert np.var(n.real) == pytest.approx(np.var(n.imag), rel=0.02)


def test_awgn_is_calibrated_to_amplitude_not_measured_power():
    clean = synthesize_mm(DISCO, RADAR, TargetGeometry(0.5, 0.15, amplitude=2.0))
    noisy = add_awgn(clean, -10.0, 2.0, 1)
    residual = noisy.samples - clean.samples
    assert np.mean(np.abs(residual) ** 2) == pytest.approx(4.0 * 10.0, rel=0.1)


def test_noise_is_seed_deterministic():
    a = noise_only(100, 1.0, 3).samples
    b = noise_only(100, 1.0, 3).samples
    c = noise_only(100, 1.0, 4).samples
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_coherent_gain():
    assert coherent_gain_db(2000) == pytest.approx(33.0103, abs=1e-4)
    assert coherent_gain_db(1) == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(name="x", n_blades=0, l1=0.0, l2=0.1, f_rot=10.0),
        dict(name="x", n_blades=2, l1=0.2, l2=0.1, f_rot=10.0),
        dict(name="x", n_blades=2, l1=0.0, l2=0.1, f_rot=0.0),
        dict(name="x", n_blades=2, l1=0.0, l2=float("nan"), f_rot=10.0),
    ],
)
def test_profile_validation(kwargs):
    with pytest.raises(ParameterError):
        DroneProfile(**kwargs)


def test_geometry_and_radar_validation():
    with pytest.raises(ParameterError):
        TargetGeometry(math.pi / 2, 0.1)
    with pytest.raises(ParameterError):
        TargetGeometry(0.2, 0.1, amplitude=0.0)
    with pytest.raises(ParameterError):
        RadarConfig(prf=-1.0)
    with pytest.raises(ParameterError):
        noise_only(10, -1.0, 0)
    with pytest.raises(ParameterError):
        noise_variance(float("inf"))
    with pytest.raises(ParameterError):
        ComplexTimeSeries(np.array([1.0, np.nan]), 1.0)


def test_unit_snr_variance_and_bad_length():
    n = noise_only(1_000_000, noise_variance(0.0, 1.0), 11).samples
    assert np.mean(np.abs(n) ** 2) == pytest.approx(1.0, rel=0.01)
    assert coherent_gain_db(10) == pytest.approx(10.0)
    with pytest.raises(ParameterError):
        noise_only(0, 1.0, 0)
    with pytest.raises(ParameterError):
        coherent_gain_db(0)
