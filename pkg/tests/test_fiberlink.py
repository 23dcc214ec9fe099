import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpm import fiberlink as fl
from lpm.signalgen import SignalSpec, Waveform, generate


def _tx(n=1 << 12, bw=128e9, sps=4, seed=0):
    return generate(SignalSpec("GaussRect", n, sps * bw, bw, seed=seed))


def test_units():
    assert fl.dbm_to_w(0.0) == pytest.approx(1e-3)
    assert fl.w_to_dbm(fl.dbm_to_w(2.0)) == pytest.approx(2.0)
    assert fl.ps2_per_km(-21) == pytest.approx(-21e-27)
    assert fl.per_w_km(1.3) == pytest.approx(1.3e-3)


def test_span_end_power():
    link = fl.reference_link(n_spans=1)
    assert fl.w_to_dbm(fl.power_at(link, 50e3)[0]) == pytest.approx(-8.0, abs=1e-9)


def test_lossless_profile_constant():
    span = fl.SpanSpec(20e3, alpha_db_per_km=0.0)
    link = fl.LinkSpec((span,), launch_power_w=1e-3)
    prof = fl.true_profile(link, 1e3)
    assert np.allclose(prof.values, 1.3e-3 * 1e-3, rtol=0, atol=1e-18)


def test_lumped_event_ratio():
    link = fl.reference_link(n_spans=1).with_events([(25e3, 1.0)])
    before, after = fl.gamma_prime_at(link, [25e3 - 1e-6, 25e3])
    assert after / before == pytest.approx(10**-0.1, rel=1e-6)


@given(pos=st.floats(1e3, 149e3), loss=st.floats(0.1, 5.0))
def test_event_acts_downstream_only(pos, loss):
    base = fl.reference_link()
    ev = base.with_events([(pos, loss)])
    z = np.linspace(0, 150e3, 301)
    a, b = fl.gamma_prime_at(base, z), fl.gamma_prime_at(ev, z)
    assert np.array_equal(a[z < pos], b[z < pos])
    assert np.allclose(b[z >= pos] / a[z >= pos], 10 ** (-loss / 10))


def test_amplifiers_restore_launch_power():
    link = fl.reference_link()
    assert np.allclose(fl.power_at(link, [0.0, 50e3, 100e3]), link.launch_power_w)
    # P(L) is before the final amplifier
    assert fl.w_to_dbm(fl.power_at(link, 150e3)[0]) == pytest.approx(-8.0)


@given(z0=st.floats(0, 150e3), z1=st.floats(0, 150e3), z2=st.floats(0, 150e3))
def test_dispersion_accumulation_additive(z0, z1, z2):
    d = fl.DispersionMap((0.0, 40e3, 150e3), (-21e-27, -5e-27), (1e-40, 0.0))
    a = np.add(d.accumulated(z0, z1), d.accumulated(z1, z2))
    # forward and backward parts may cancel; compare at the scale of a full-link integral
    scale = np.array([21e-27, 1e-40]) * 150e3
    assert np.all(np.abs(a - d.accumulated(z0, z2)) <= 1e-12 * scale)


def test_cd_roundtrip_linear():
    span = fl.SpanSpec(80e3, beta3_s3_per_m=0.1e-39, gamma_per_w_m=0.0)
    link = fl.LinkSpec((span,))
    tx = _tx()
    rx = fl.propagate(tx, link)
    omega = fl.angular_frequency(tx.n_samples, tx.dt)
    back = np.fft.ifft(np.fft.fft(rx.samples) / fl.cd_multiplier(omega, *link.dispersion_map().accumulated(0, 80e3)))
    assert np.max(np.abs(back - tx.samples)) < 1e-10


def test_cd_multiplier_sign():
    # a positive-frequency tone delayed by beta2 acquires phase -(b2/2) w^2 z
    n, dt = 64, 1e-12
    w = fl.angular_frequency(n, dt)
    m = fl.cd_multiplier(w, -21e-27 * 1e3, 0.0)
    assert np.allclose(m, np.exp(1j * 21e-24 / 2 * w**2))


def test_pure_spm():
    span = fl.SpanSpec(30e3, alpha_db_per_km=0.0, beta2_s2_per_m=0.0)
    link = fl.LinkSpec((span,), launch_power_w=fl.dbm_to_w(3))
    tx = _tx()
    rx = fl.propagate(tx, link)
    phi = span.gamma_per_w_m * link.launch_power_w * span.length_m
    expect = tx.samples * np.exp(-1j * phi * np.abs(tx.samples) ** 2)
    assert np.max(np.abs(rx.samples - expect)) < 1e-12


def test_field_power_preserved():
    link = fl.reference_link()
    tx = _tx()
    assert abs(fl.propagate(tx, link).mean_power - 1.0) < 1e-10


def test_ssfm_self_convergence():
    link = fl.reference_link()
    tx = _tx(1 << 13)
    a = fl.propagate(tx, link, 100.0).samples
    b = fl.propagate(tx, link, 50.0).samples
    assert np.sqrt(np.mean(np.abs(a - b) ** 2)) < 1e-4


def test_first_order_power_scaling():
    tx = _tx(1 << 12)
    powers = np.array([-10.0, -5.0, 0.0])
    energy = []
    for p in powers:
        link = fl.reference_link(launch_dbm=p)
        rx = fl.propagate(tx, link, 200.0)
        omega = fl.angular_frequency(tx.n_samples, tx.dt)
        a0 = np.fft.ifft(np.fft.fft(tx.samples) * fl.cd_multiplier(omega, *link.dispersion_map().accumulated(0, 150e3)))
        energy.append(np.sum(np.abs(rx.samples - a0) ** 2))
    slope = np.polyfit(np.log10(fl.dbm_to_w(powers)), np.log10(energy), 1)[0]
    assert slope == pytest.approx(2.0, rel=0.05)


def test_step_longer_than_span():
    with pytest.raises(ValueError):
        fl.kick_schedule(fl.reference_link(), 60e3)


def test_nan_aborts():
    bad = np.full(64, np.nan + 0j)
    with pytest.raises(FloatingPointError):
        fl.split_step(bad, 1e-12, fl.DispersionMap.uniform(1e3, -21e-27), np.array([500.0]), np.array([0.1]), 1e3)


def test_rx_noise_variance():
    rx = Waveform(np.ones(1_000_000), 1e9)
    noisy = fl.add_rx_noise(rx, 17.0, seed=4)
    v = np.var(noisy.samples - rx.samples)
    assert v == pytest.approx(10**-1.7, rel=0.02)


def test_rx_noise_infinite_snr():
    rx = _tx()
    assert fl.add_rx_noise(rx, math.inf, 0) is rx
    assert fl.noise_variance(math.inf) == 0.0


def test_rx_noise_seeds_uncorrelated():
    rx = Waveform(np.ones(100_000), 1e9)
    a = fl.add_rx_noise(rx, 0.0, 1).samples - 1
    b = fl.add_rx_noise(rx, 0.0, 2).samples - 1
    rho = abs(np.vdot(a, b)) / np.sqrt(np.vdot(a, a).real * np.vdot(b, b).real)
    assert rho < 3 / np.sqrt(a.size)
    assert np.array_equal(a, fl.add_rx_noise(rx, 0.0, 1).samples - 1)


def test_profile_validation():
    with pytest.raises(ValueError):
        fl.PowerProfile(np.array([0.0, 1.0, 3.0]), np.zeros(3))
    with pytest.raises(ValueError):
        fl.PowerProfile(np.array([0.0, 1.0]), np.array([0.0, np.nan]))
