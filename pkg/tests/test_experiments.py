import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpm import experiments as ex
from lpm import fiberlink as fl
from lpm.signalgen import make_rng

TINY = """
[link]
n_spans = 1
span_length_km = 12
[signal]
n_samples = 4096
[monitor]
dz_km = 1.0
[run]
trials = 3
seed = 7
[sweep]
beta2_ps2_per_km = -21, -10
[output]
write_binary = false
"""


def test_reference_config_values():
    sw = ex.parse_config(ex.reference_config_text())
    b = sw.base
    assert (b.n_spans, b.span_length_km, b.alpha_db_per_km) == (3, 50.0, 0.2)
    assert (b.beta2_ps2_per_km, b.gamma_per_w_per_km, b.ssfm_step_m, b.rx_snr_db) == (-21.0, 1.3, 100.0, 17.0)
    assert b.edge_trim is None and b.phase_correction is True
    assert sw.axes["beta2_ps2_per_km"] == [-5, -10, -15, -20, -25, -30]
    assert sw.axes["length_km"] == [100, 250, 500]
    assert sw.axes["bandwidth_ghz"] == [64, 128, 256]
    assert sw.axes["dz_km"] == [0.5, 1, 2, 4]
    assert sw.axes["n_samples"] == [69000, 5000000]


def test_desk_scale_caps():
    sw = ex.parse_config(ex.reference_config_text())
    full = sw.points()
    desk = sw.points(desk_scale=True)
    assert max(p.n_samples for p in full) == 5_000_000
    assert max(p.n_samples for p in desk) <= ex.DESK_MAX_N
    assert max(p.length_km for p in desk) <= ex.DESK_MAX_LENGTH_KM
    assert len(desk) < len(full)


@pytest.mark.parametrize("text,msg", [
    ("[link]\nbogus = 1\n", "unknown key"),
    ("[nowhere]\nx = 1\n", "unknown section"),
    ("[sweep]\nalpha = 1\n", "unknown sweep axis"),
    ("[sweep]\ndz_km =\n", "empty"),
    ("[link]\nn_spans = abc\n", "cannot parse"),
    ("[run]\ntrials = 0\n", "trials"),
    ("[signal]\nformat = OOK\n", "format"),
    ("not an ini", "section"),
])
def test_config_errors(text, msg):
    with pytest.raises(ex.ConfigError, match=msg):
        ex.parse_config(text)


def test_load_config_missing(tmp_path):
    with pytest.raises(ex.ConfigError):
        ex.load_config(tmp_path / "none.ini")


def test_eta_and_trim():
    cfg = ex.ScenarioConfig(beta2_ps2_per_km=-30, bandwidth_ghz=64)
    assert cfg.eta == pytest.approx(2.03, abs=0.005)
    assert cfg.trim == 3
    assert dataclasses.replace(cfg, edge_trim=1).trim == 1
    g = ex.ScenarioConfig(format="GaussSpectrum", sigma_omega_ghz=54.4, dz_km=0.1)
    assert g.eta == pytest.approx(1 / (21e-27 * (2 * math.pi * 54.4e9) ** 2) / 100)
    assert g.sample_rate_hz == pytest.approx(12 * 54.4e9)


@given(v=st.floats(1e-10, 1e-4), dz=st.floats(100, 4000), n=st.integers(1000, 10**7))
def test_measure_normalized_variance_exact_construction(v, dz, n):
    # 500 deviations rescaled so their mean square is exactly v
    z = make_rng(1, "mnv", n).normal(size=(20, 25))
    z *= math.sqrt(v / np.mean(z**2))
    ideal = np.linspace(1e-3, 2e-4, 25)
    s2 = 0.02
    got = ex.measure_normalized_variance(ideal + z, ideal, n, dz, s2)
    assert got == pytest.approx(4 * n * dz**2 / s2 * v, rel=1e-9)


@pytest.mark.parametrize("mode", ["positions", "trials"])
def test_measure_normalized_variance_iid(mode):
    # 5000 iid draws: relative sd of the estimate is about 2%
    est = make_rng(2, "mnv-iid").normal(0, 1e-3, (50, 100))
    got = ex.measure_normalized_variance(est, np.zeros(100), 1000, 1.0, 1.0, mode=mode)
    assert got == pytest.approx(4000 * 1e-6, rel=0.05)


def test_measure_normalized_variance_errors():
    with pytest.raises(ValueError):
        ex.measure_normalized_variance(np.zeros((1, 5)), np.zeros(5), 10, 1.0, 1.0)
    with pytest.raises(ValueError):
        ex.measure_normalized_variance(np.zeros((1, 20)), np.zeros(20), 10, 1.0, 1.0, mode="trials")
    with pytest.raises(ValueError):
        ex.measure_normalized_variance(np.zeros((3, 20)), np.zeros(20), 10, 1.0, 1.0, trim=10)
    with pytest.raises(ValueError):
        ex.measure_normalized_variance(np.zeros((3, 20)), np.zeros(20), 10, 1.0, 1.0, mode="median")


@pytest.fixture(scope="module")
def point():
    cfg = ex.ScenarioConfig(n_spans=1, span_length_km=40, n_samples=1 << 15, trials=30, seed=3)
    return ex.run_point(cfg)


def test_run_point_shapes_and_truth(point):
    assert point.estimates.shape == (30, 40)
    assert point.ideal.shape == (40,)
    link = point.config.link()
    assert np.allclose(point.true_gamma_prime, fl.gamma_prime_at(link, point.z_m))
    assert point.sigma2 > 0
    assert point.stats.trials == 30


def test_trim_sensitivity(point):
    cfg = point.config
    assert cfg.eta <= 2
    kw = dict(n_samples=point.ne.n_samples, dz_m=point.ne.dz, sigma2=point.sigma2)
    v0 = ex.measure_normalized_variance(point.estimates, point.ideal, trim=0, **kw)
    vt = ex.measure_normalized_variance(point.estimates, point.ideal, trim=cfg.trim, **kw)
    assert abs(v0 / vt - 1) < 0.10


def test_measured_variance_tracks_trace_metric(point):
    ratio = point.normalized_variance / point.trace_metric
    assert 10 ** (-1.5 / 10) <= ratio <= 10 ** (1.5 / 10)


def test_run_point_deterministic():
    cfg = ex.ScenarioConfig(n_spans=1, span_length_km=10, n_samples=4096, trials=2, seed=9)
    a, b = ex.run_point(cfg), ex.run_point(cfg)
    assert np.array_equal(a.estimates, b.estimates)
    c = ex.run_point(dataclasses.replace(cfg, seed=10))
    assert not np.array_equal(a.estimates, c.estimates)


def test_run_scenario_byte_identical(tmp_path):
    sw = ex.parse_config(TINY)
    s1 = ex.run_scenario(sw, out_dir=tmp_path / "a")
    s2 = ex.run_scenario(sw, out_dir=tmp_path / "b")
    assert s1.read_bytes() == s2.read_bytes()
    for f in sorted((tmp_path / "a").glob("point*_profile.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    lines = s1.read_text().splitlines()
    assert lines[0].startswith("# points=2")
    assert lines[-1].endswith(",ok")
    head = (tmp_path / "a" / "point0000_profile.csv").read_text().splitlines()
    assert "# seed=7" in head and "# beta2_ps2_per_km=-21.0" in head


def test_run_scenario_records_failures(tmp_path):
    # no dispersion makes the normal matrix singular for this point only
    sw = ex.parse_config(TINY.replace("-21, -10", "-21, 0"))
    lines = ex.run_scenario(sw, out_dir=tmp_path).read_text().splitlines()
    assert lines[-2].endswith(",ok")
    assert "NonPositiveDefiniteError" in lines[-1]


def test_max_workers(monkeypatch):
    monkeypatch.setenv("LPM_THREADS", "1")
    assert ex.max_workers() == 1
    monkeypatch.setenv("LPM_THREADS", "many")
    with pytest.raises(ex.ConfigError):
        ex.max_workers()


def test_reproduce_snr_curves(tmp_path):
    paths = ex.reproduce(9, tmp_path)
    assert len(paths) == 4
    rows = [l.split(",") for l in (tmp_path / "fig9_a3.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == ["loss_db", "required_snr_db"]
    one = [r for r in rows[1:] if float(r[0]) == 1.0]
    assert float(one[0][1]) == pytest.approx(23.3, abs=0.05)


def test_reproduce_unknown(tmp_path):
    with pytest.raises(ex.ConfigError):
        ex.reproduce(3, tmp_path)


def test_fig8_rows_bound_above_metric():
    rows = ex.fig8_rows((1, 2), m=101)
    for eta, bound, tm, sz in rows:
        assert bound >= tm
