import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpm import design
from lpm import estimator as est
from lpm import experiments as ex
from lpm import fiberlink as fl
from lpm.perturbation import ModelOperator, MonitorGrid, accumulate_normal_equations, project
from lpm.signalgen import SignalSpec, circular_gaussian, generate, make_rng

DS = design.DetectionSpec


@pytest.fixture(scope="module")
def inputs():
    return ex.design_inputs()


def _db(x):
    return 10 * math.log10(x)


def test_required_snr_one_db():
    r = design.required_snr(DS(1.0, 3))
    assert r == pytest.approx((3 / (1 - 10**-0.1)) ** 2, rel=1e-14)
    assert _db(r) == pytest.approx(23.3, abs=0.05)


def test_required_snr_three_db():
    r = design.required_snr(DS(3.0, 3))
    assert r == pytest.approx(36.17, abs=0.01)
    assert _db(r) == pytest.approx(15.58, abs=0.01)


def test_required_snr_limits():
    assert design.required_snr(DS(400.0, 3)) == pytest.approx(9.0, rel=1e-12)
    assert design.required_snr(DS(0.0, 3)) == math.inf
    with pytest.raises(ValueError):
        DS(1.0, 0.0)
    with pytest.raises(ValueError):
        DS(-1.0)


def test_detectable_loss_examples():
    assert design.detectable_loss(9.0, 3) == 0.0
    t = design.detectable_loss(design.required_snr(DS(1.0, 3)), 3)
    assert design.loss_linear_to_db(t) == pytest.approx(1.0, abs=1e-12)
    assert design.loss_linear_to_db(design.detectable_loss(212.8, 3)) == pytest.approx(1.0, abs=0.01)
    with pytest.raises(design.NotDetectableError):
        design.detectable_loss(8.99, 3)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(0.5, 5))
def test_round_trip(t, a):
    snr = design.required_snr(DS(float(design.loss_linear_to_db(t)), a))
    assert design.detectable_loss(snr, a) == pytest.approx(t, abs=1e-12)


@pytest.mark.parametrize("a", [1, 2, 3, 4])
def test_snr_curves_monotone_and_converge(a):
    loss = np.linspace(0.1, 60, 400)
    r = np.array([design.required_snr(DS(l, a)) for l in loss])
    assert np.all(np.diff(r) < 0)
    assert r[-1] == pytest.approx(a * a, rel=1e-5)


def test_required_samples_reference(inputs):
    s2, g, dz, integral = inputs
    n3 = design.required_samples(DS(1.0), g * fl.dbm_to_w(3), s2, dz, integral)
    n0 = design.required_samples(DS(1.0), g * fl.dbm_to_w(0), s2, dz, integral)
    n5 = design.required_samples(DS(1.0), g * fl.dbm_to_w(-5), s2, dz, integral)
    assert n3 == pytest.approx(2.1e5, rel=0.2)
    assert n0 == pytest.approx(8.5e5, rel=0.2)
    assert 8.5e6 <= n5 <= 1e7


def test_minus_three_db_quadruples_samples(inputs):
    s2, g, dz, integral = inputs
    n1 = design.required_samples(DS(1.0), g * 2e-3, s2, dz, integral)
    n2 = design.required_samples(DS(1.0), g * 1e-3, s2, dz, integral)
    assert n2 / n1 == pytest.approx(4.0, rel=1e-5)


def test_required_power_reference(inputs):
    s2, g, dz, integral = inputs
    p = design.required_power(DS(1.0), 1e7, s2, dz, integral, g)
    assert fl.w_to_dbm(p) == pytest.approx(-5.0, abs=0.5)
    p4 = design.required_power(DS(1.0), 4e7, s2, dz, integral, g)
    assert fl.w_to_dbm(p) - fl.w_to_dbm(p4) == pytest.approx(10 * math.log10(2), abs=1e-10)


@given(st.floats(1e4, 1e9))
def test_power_samples_inverse(n):
    s2, g, dz, integral = 0.02, 1.3e-3, 1e3, 8.5
    p = design.required_power(DS(1.0), n, s2, dz, integral, g)
    back = design.required_samples(DS(1.0), g * p, s2, dz, integral)
    assert abs(back - n) <= 1 + 1e-9 * n


def test_dynamic_range_reference(inputs):
    s2, g, dz, integral = inputs
    dr = design.dynamic_range(DS(2.0), 1e7, fl.dbm_to_w(2), s2, dz, integral, g)
    assert dr == pytest.approx(10.0, abs=1.0)
    p = design.required_power(DS(2.0), 1e7, s2, dz, integral, g)
    assert fl.w_to_dbm(p) == pytest.approx(-8.0, abs=1.0)
    dr2 = design.dynamic_range(DS(2.0), 2e7, fl.dbm_to_w(2), s2, dz, integral, g)
    assert dr2 - dr == pytest.approx(1.5, abs=0.01)
    assert design.dynamic_range(DS(1.0), 1e7, fl.dbm_to_w(2), s2, dz, integral, g) < dr
    assert design.dynamic_range(DS(2.0), 10, fl.dbm_to_w(2), s2, dz, integral, g) == 0.0


@given(st.floats(1e-3, 1e3))
def test_sigma2_over_n_invariance(c):
    s2, g, dz, integral = 0.02, 1.3e-3, 1e3, 8.5
    base = design.snr_pp(1e6, g, s2, dz, integral)
    assert design.snr_pp(c * 1e6, g, c * s2, dz, integral) == pytest.approx(base, rel=1e-12)
    p1 = design.required_power(DS(1.5), 1e6, s2, dz, integral, 1.3)
    p2 = design.required_power(DS(1.5), c * 1e6, c * s2, dz, integral, 1.3)
    assert p2 == pytest.approx(p1, rel=1e-12)


def test_loss_profile_slope_along_span(inputs):
    s2, g, dz, integral = inputs
    link = fl.reference_link()
    prof = fl.true_profile(link, dz)
    loss = design.detectable_loss_profile(prof.values, 2.5e7, s2, 3, dz, integral)
    deficit = 1 - 10 ** (-loss[:50] / 10)
    slope = np.polyfit(prof.z_m[:50] / 1e3, 10 * np.log10(deficit), 1)[0]
    assert slope == pytest.approx(0.2, rel=0.05)


def test_loss_profile_marks_undetectable(inputs):
    s2, g, dz, integral = inputs
    prof = fl.true_profile(fl.reference_link(), dz)
    loss = design.detectable_loss_profile(prof.values, 1e3, s2, 3, dz, integral)
    assert np.isnan(loss).any()


def test_loss_profile_span_output_n6p1e6(inputs):
    s2, g, dz, integral = inputs
    prof = fl.true_profile(fl.reference_link(), dz)
    loss = design.detectable_loss_profile(prof.values, 6.1e6, s2, 3, dz, integral)
    assert loss[49] == pytest.approx(2.7, rel=0.25)


def test_loss_profile_span_input_n6p1e6(inputs):
    s2, g, dz, integral = inputs
    prof = fl.true_profile(fl.reference_link(), dz)
    loss = design.detectable_loss_profile(prof.values, 6.1e6, s2, 3, dz, integral)
    assert loss[0] == pytest.approx(0.4, rel=0.25)


def test_large_n_detects_about_one_db_everywhere(inputs):
    s2, g, dz, integral = inputs
    prof = fl.true_profile(fl.reference_link(), dz)
    loss = design.detectable_loss_profile(prof.values, 2.5e7, s2, 3, dz, integral)
    assert np.nanmax(loss) <= 1.25


def test_monte_carlo_miss_rate_at_design_point():
    n, m, pos, trials = 1 << 14, 30, 15, 400
    tx = generate(SignalSpec("GaussRect", n, 512e9, 128e9, seed=11))
    op = ModelOperator(tx, MonitorGrid(1e3, m), fl.DispersionMap.uniform(m * 1e3, fl.ps2_per_km(-21)))
    ne = accumulate_normal_equations(op)
    spec = DS(1.0, 3)
    t = spec.loss_linear
    before = 1.3e-6
    truth = np.full(m, before)
    truth[pos:] *= t
    # noise level that puts the post-event position exactly on the design threshold
    unit = est.variance_profile(ne, 1.0).variance[pos]
    snr_target = design.required_snr(spec)
    s2 = before**2 / (snr_target * unit)
    noise = np.stack([circular_gaussian(make_rng(3, "miss", k), n, s2) for k in range(trials)], axis=1)
    y = (op.dense() @ truth)[:, None] + noise
    gh = est.solve(ne.with_proj(project(op, y)))
    missed = np.mean(gh[pos] >= before)
    p = 0.5 * math.erfc(3 / math.sqrt(2))
    assert missed <= p + 3 * math.sqrt(p * (1 - p) / trials)
    drop = before - gh[pos].mean()
    assert drop == pytest.approx((1 - t) * before, rel=0.1)


def test_csv_writers(tmp_path):
    p = tmp_path / "a.csv"
    design.write_snr_curve_csv(p, [1.0, 3.0], 3)
    lines = p.read_text().splitlines()
    assert lines[0] == "# a=3" and lines[1] == "loss_db,required_snr_db"
    assert float(lines[2].split(",")[1]) == pytest.approx(23.28, abs=0.01)
    design.write_samples_curve_csv(p, [1.0], [217719])
    assert p.read_text().splitlines() == ["loss_db,required_N", "1,217719"]
    design.write_loss_profile_csv(p, [0.0, 1000.0], [0.2, float("nan")])
    assert p.read_text().splitlines()[2] == "1,nan"
