"""Simulation pipeline and experiment harness.

One *point* is: draw a waveform, propagate it by split-step, build the
perturbation model on a monitor grid, and estimate gamma' for a noiseless
run and for ``trials`` noisy receptions. Noisy trials reuse the noiseless
received field and only redraw receiver noise, so the model is built once.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import design, estimator, fiberlink, gaussian, scf
from .perturbation import (
    ModelOperator,
    MonitorGrid,
    NormalEquations,
    accumulate_normal_equations,
    observation,
    project,
    write_normal_equations,
)
from .signalgen import SignalFormat, SignalSpec, circular_gaussian, generate, make_rng

DEFAULT_SPS = 4
DESK_MAX_N = 500_000
DESK_MAX_LENGTH_KM = 150.0
TRIAL_CHUNK = 10
# Gaussian spectra are sampled at 12 sigma_f (+-6 sigma of the PSD)
GAUSS_SPECTRUM_FS_PER_SIGMA = 12.0


class ConfigError(ValueError):
    pass


# -- configuration --------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation point in engineering units (converted to SI on use)."""

    n_spans: int = 3
    span_length_km: float = 50.0
    alpha_db_per_km: float = 0.2
    beta2_ps2_per_km: float = -21.0
    gamma_per_w_per_km: float = 1.3
    launch_power_dbm: float = 2.0
    rx_snr_db: float = 17.0
    ssfm_step_m: float = 100.0
    format: str = "GaussRect"
    bandwidth_ghz: float = 128.0
    sigma_omega_ghz: float | None = None  # sigma_omega / 2pi
    samples_per_symbol: float = DEFAULT_SPS
    n_samples: int = 1 << 18
    dz_km: float = 1.0
    edge_trim: int | None = None  # None: ceil(eta)
    lam: float = 0.0
    trials: int = 50
    seed: int = 0
    phase_correction: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n_spans < 1 or self.span_length_km <= 0:
            raise ConfigError("link needs at least one span of positive length")
        if self.dz_km <= 0:
            raise ConfigError("dz_km must be positive")
        try:
            SignalFormat(self.format)
        except ValueError as exc:
            raise ConfigError(f"unknown signal format {self.format!r}") from exc

    @property
    def length_km(self) -> float:
        return self.n_spans * self.span_length_km

    @property
    def is_gaussian_spectrum(self) -> bool:
        return SignalFormat(self.format) is SignalFormat.GAUSS_SPECTRUM

    @property
    def sample_rate_hz(self) -> float:
        if self.is_gaussian_spectrum:
            return GAUSS_SPECTRUM_FS_PER_SIGMA * self.sigma_omega_ghz * 1e9
        return self.samples_per_symbol * self.bandwidth_ghz * 1e9

    @property
    def sigma_omega(self) -> float:
        if self.sigma_omega_ghz is None:
            raise ConfigError("GaussSpectrum needs sigma_omega_ghz")
        return 2 * math.pi * self.sigma_omega_ghz * 1e9

    @property
    def z_cd(self) -> float:
        b2 = abs(fiberlink.ps2_per_km(self.beta2_ps2_per_km))
        if self.is_gaussian_spectrum:
            return scf.z_cd_gauss(b2, self.sigma_omega)
        return scf.z_cd_rect(b2, self.bandwidth_ghz * 1e9)

    @property
    def eta(self) -> float:
        return self.z_cd / (self.dz_km * 1e3)

    @property
    def trim(self) -> int:
        return int(math.ceil(self.eta)) if self.edge_trim is None else int(self.edge_trim)

    def link(self) -> fiberlink.LinkSpec:
        return fiberlink.reference_link(
            self.n_spans,
            self.span_length_km,
            self.launch_power_dbm,
            self.beta2_ps2_per_km,
            self.alpha_db_per_km,
            self.gamma_per_w_per_km,
            self.rx_snr_db,
        )

    def signal(self) -> SignalSpec:
        if self.is_gaussian_spectrum:
            return SignalSpec(self.format, self.n_samples, self.sample_rate_hz, None, self.sigma_omega, self.seed)
        return SignalSpec(self.format, self.n_samples, self.sample_rate_hz, self.bandwidth_ghz * 1e9, None, self.seed)

    def grid(self) -> MonitorGrid:
        return MonitorGrid.for_length(self.length_km * 1e3, self.dz_km * 1e3)

    def manifest(self) -> dict:
        return dataclasses.asdict(self)


# keys in the INI file map onto ScenarioConfig fields section by section
_SECTIONS = {
    "link": ["n_spans", "span_length_km", "alpha_db_per_km", "beta2_ps2_per_km", "gamma_per_w_per_km",
             "launch_power_dbm", "rx_snr_db", "ssfm_step_m"],
    "signal": ["format", "bandwidth_ghz", "sigma_omega_ghz", "samples_per_symbol", "n_samples"],
    "monitor": ["dz_km", "edge_trim"],
    "estimator": ["lam"],
    "run": ["trials", "seed", "phase_correction"],
}
_SWEEP_KEYS = {
    "beta2_ps2_per_km": "beta2_ps2_per_km",
    "bandwidth_ghz": "bandwidth_ghz",
    "sigma_omega_ghz": "sigma_omega_ghz",
    "dz_km": "dz_km",
    "n_samples": "n_samples",
    "length_km": None,  # handled through n_spans
}


@dataclass(frozen=True)
class SweepConfig:
    base: ScenarioConfig
    axes: dict = field(default_factory=dict)
    output_dir: str = "lpm_out"
    write_binary: bool = True

    def points(self, desk_scale: bool = False) -> list[ScenarioConfig]:
        names = list(self.axes)
        out, seen = [], set()
        for combo in itertools.product(*(self.axes[n] for n in names)) if names else [()]:
            kw = {}
            for n, v in zip(names, combo):
                if n == "length_km":
                    kw["n_spans"] = max(1, int(round(v / self.base.span_length_km)))
                else:
                    kw[n] = v
            cfg = dataclasses.replace(self.base, **kw)
            if desk_scale:
                cfg = _desk_cap(cfg)
            key = tuple(sorted(dataclasses.asdict(cfg).items()))
            if key not in seen:
                seen.add(key)
                out.append(cfg)
        return out


def _desk_cap(cfg: ScenarioConfig) -> ScenarioConfig:
    n = min(cfg.n_samples, DESK_MAX_N)
    spans = cfg.n_spans
    while spans > 1 and spans * cfg.span_length_km > DESK_MAX_LENGTH_KM:
        spans -= 1
    return dataclasses.replace(cfg, n_samples=n, n_spans=spans)


def _convert(name: str, raw: str):
    ftype = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}[name]
    raw = raw.strip()
    if raw.lower() in ("", "none", "auto"):
        return None
    if "bool" in str(ftype):
        return raw.lower() in ("1", "true", "yes", "on")
    if "int" in str(ftype) and "float" not in str(ftype):
        return int(float(raw))
    if "str" in str(ftype):
        return raw
    return float(raw)


def parse_config(text: str) -> SweepConfig:
    """Parse an INI scenario. Keys carry their units; unknown keys are errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    kw = {}
    for section in cp.sections():
        if section in ("sweep", "output"):
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp[section].items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                kw[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc
    try:
        base = ScenarioConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    axes = {}
    if cp.has_section("sweep"):
        for key, raw in cp["sweep"].items():
            if key not in _SWEEP_KEYS:
                raise ConfigError(f"unknown sweep axis {key!r}")
            try:
                vals = [float(v) for v in raw.replace(",", " ").split()]
            except ValueError as exc:
                raise ConfigError(f"sweep axis {key}: {raw!r}") from exc
            if not vals:
                raise ConfigError(f"sweep axis {key} is empty")
            if key == "n_samples":
                vals = [int(v) for v in vals]
            axes[key] = vals
    out_dir = cp.get("output", "directory", fallback="lpm_out")
    binary = cp.getboolean("output", "write_binary", fallback=True)
    return SweepConfig(base, axes, out_dir, binary)


def load_config(path: str | Path) -> SweepConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def reference_config_text() -> str:
    return (Path(__file__).with_name("reference.ini")).read_text()


# -- ensemble statistics --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Statistics of gamma' estimates over trials (rows) and positions (columns)."""

    z_m: np.ndarray
    mean: np.ndarray
    variance: np.ndarray  # over trials, ddof=1; nan for one trial
    ideal: np.ndarray
    trials: int
    trim: int
    v_bar_positions: float  # mean squared deviation from ideal over interior positions and trials
    v_bar_trials: float  # per-position trial variance, averaged over interior positions

    @property
    def snr(self) -> np.ndarray:
        return self.mean**2 / self.variance

    @property
    def snr_db(self) -> np.ndarray:
        return 10 * np.log10(self.snr)


def _interior(m: int, trim: int) -> slice:
    if 2 * trim >= m:
        raise ValueError(f"trim {trim} leaves no interior positions for M={m}")
    return slice(trim, m - trim)


def ensemble_stats(estimates: np.ndarray, ideal: np.ndarray, z_m: np.ndarray, trim: int) -> EnsembleStats:
    est = np.atleast_2d(estimates)
    t, m = est.shape
    sl = _interior(m, trim)
    dev = est - ideal[None, :]
    var = est.var(axis=0, ddof=1) if t > 1 else np.full(m, np.nan)
    return EnsembleStats(
        z_m,
        est.mean(axis=0),
        var,
        ideal,
        t,
        trim,
        float(np.mean(dev[:, sl] ** 2)),
        float(np.mean(var[sl])) if t > 1 else float("nan"),
    )


def measure_normalized_variance(estimates, ideal, n_samples: int, dz_m: float, sigma2: float,
                                trim: int = 0, mode: str = "positions") -> float:
    """(4 N dz^2 / sigma2) V_bar.

    ``positions``: V_bar is the mean squared deviation from the noiseless
    estimate over interior positions and all trials (the ideal is known, so
    no mean is removed). ``trials``: per-position variance over trials,
    averaged over interior positions.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    ideal = np.asarray(ideal, dtype=float)
    sl = _interior(est.shape[1], trim)
    if mode == "positions":
        if est[:, sl].size < 10 and est.shape[0] < 2:
            raise ValueError("degenerate ensemble: need >= 2 trials or >= 10 interior positions")
        v = float(np.mean((est[:, sl] - ideal[None, sl]) ** 2))
    elif mode == "trials":
        if est.shape[0] < 2:
            raise ValueError("degenerate ensemble: trial variance needs >= 2 trials")
        v = float(np.mean(est[:, sl].var(axis=0, ddof=1)))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return 4 * n_samples * dz_m**2 / sigma2 * v


# -- the point pipeline ---------------------------------------------------------


@dataclass(eq=False)
class PointResult:
    config: ScenarioConfig
    ne: NormalEquations
    z_m: np.ndarray
    true_gamma_prime: np.ndarray
    ideal: np.ndarray
    estimates: np.ndarray  # (T, M)
    sigma2: float
    trace_metric: float
    stats: EnsembleStats
    elapsed_s: float

    @property
    def normalized_variance(self) -> float:
        return measure_normalized_variance(self.estimates, self.ideal, self.ne.n_samples, self.ne.dz,
                                           self.sigma2, self.config.trim)

    @property
    def variance_report(self) -> estimator.VarianceReport:
        return estimator.variance_profile(self.ne, self.sigma2, self.true_gamma_prime)


def _noise_seed(cfg: ScenarioConfig) -> int:
    return int(np.random.SeedSequence([cfg.seed, 0x5EED]).generate_state(1)[0])


def run_point(cfg: ScenarioConfig, trials: int | None = None) -> PointResult:
    """Simulate one configuration end to end."""
    t0 = time.perf_counter()
    trials = cfg.trials if trials is None else trials
    link = cfg.link()
    disp = link.dispersion_map()
    tx = generate(cfg.signal())
    rx = fiberlink.propagate(tx, link, cfg.ssfm_step_m)
    phase = fiberlink.mean_nonlinear_phase(link, cfg.ssfm_step_m) if cfg.phase_correction else 0.0
    y0 = observation(tx, rx, disp, link.length_m, phase)

    grid = cfg.grid()
    op = ModelOperator(tx, grid, disp, link.length_m)
    ne = accumulate_normal_equations(op, y0)
    opts = estimator.EstimatorOptions(cfg.lam)
    ideal = estimator.solve(ne, opts)

    sigma2 = rx.mean_power * fiberlink.noise_variance(cfg.rx_snr_db)
    rot = np.exp(1j * phase)
    nseed = _noise_seed(cfg)
    est = np.empty((trials, grid.m_count))
    for start in range(0, trials, TRIAL_CHUNK):
        idx = range(start, min(trials, start + TRIAL_CHUNK))
        noise = np.stack([circular_gaussian(make_rng(nseed, "rx-noise", t), tx.n_samples, sigma2) for t in idx], axis=1)
        # y_t = (rx + nu_t) e^{j phase} - A0 = y0 + nu_t e^{j phase}; the model part is shared
        proj = project(op, noise * rot)
        est[start : start + len(idx)] = (ideal[:, None] + estimator.solve(ne.with_proj(proj), opts)).T
    z = grid.z_positions
    stats = ensemble_stats(est, ideal, z, cfg.trim)
    return PointResult(
        cfg,
        ne,
        z,
        fiberlink.gamma_prime_at(link, z),
        ideal,
        est,
        sigma2,
        estimator.trace_metric(ne),
        stats,
        time.perf_counter() - t0,
    )


# -- output helpers -------------------------------------------------------------


def write_csv(path: str | Path, columns, rows, manifest: dict | None = None) -> None:
    """CSV with ``# key=value`` manifest lines ahead of the header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for k, v in (manifest or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{x:.10g}" if isinstance(x, (float, np.floating)) else x for x in row])


def max_workers() -> int:
    raw = os.environ.get("LPM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"LPM_THREADS={raw!r} is not an integer")
    return max(1, min(n, os.cpu_count() or 1))


def _sweep_task(args):
    i, cfg, out_dir, write_binary = args
    try:
        res = run_point(cfg)
    except Exception as exc:  # recorded, the sweep continues
        return i, cfg, None, f"{type(exc).__name__}: {exc}"
    tag = f"point{i:04d}"
    man = cfg.manifest()
    s = res.stats
    rep = res.variance_report
    write_csv(
        Path(out_dir) / f"{tag}_profile.csv",
        ["z_km", "true_gamma_prime_per_km", "ideal_per_km", "mean_per_km", "trial_variance_per_km2",
         "predicted_variance_per_km2"],
        zip(res.z_m / 1e3, res.true_gamma_prime * 1e3, res.ideal * 1e3, s.mean * 1e3, s.variance * 1e6,
            rep.variance * 1e6),
        man,
    )
    if write_binary:
        write_normal_equations(Path(out_dir) / f"{tag}.lpmn", res.ne)
    return i, cfg, (res.trace_metric, res.normalized_variance,
                    measure_normalized_variance(res.estimates, res.ideal, res.ne.n_samples, res.ne.dz,
                                                res.sigma2, cfg.trim, "trials") if cfg.trials > 1 else float("nan"),
                    res.elapsed_s), "ok"


def run_scenario(sweep: SweepConfig, desk_scale: bool = False, out_dir: str | Path | None = None) -> Path:
    """Run every sweep point; failures are recorded in the summary, not raised."""
    out = Path(out_dir or sweep.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pts = sweep.points(desk_scale)
    tasks = [(i, cfg, str(out), sweep.write_binary) for i, cfg in enumerate(pts)]
    workers = max_workers()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    rows = []
    for i, cfg, vals, status in results:
        tm, nv_pos, nv_tr, _ = vals if vals else (math.nan,) * 4
        rows.append((i, cfg.format, cfg.beta2_ps2_per_km, cfg.bandwidth_ghz, cfg.sigma_omega_ghz or "",
                     cfg.dz_km, cfg.length_km, cfg.n_samples, cfg.eta, tm, nv_pos, nv_tr, status))
    write_csv(
        out / "summary.csv",
        ["point", "format", "beta2_ps2_per_km", "bandwidth_ghz", "sigma_omega_ghz", "dz_km", "length_km",
         "n_samples", "eta", "trace_metric", "measured_norm_var_positions", "measured_norm_var_trials", "status"],
        rows,
        {"points": len(pts), "desk_scale": desk_scale, "base_seed": sweep.base.seed},
    )
    return out / "summary.csv"


# -- shared analysis used by figures, the CLI and design ----------------------------


def rect_model(beta2_ps2_per_km: float, bandwidth_ghz: float, dz_km: float, m_count: int,
               n_samples: int = 1 << 17, fmt: str = "GaussRect", sps: float = DEFAULT_SPS,
               seed: int = 0) -> NormalEquations:
    """Normal matrix of a uniform-dispersion model (no propagation needed)."""
    bw = bandwidth_ghz * 1e9
    tx = generate(SignalSpec(fmt, n_samples, sps * bw, bw, seed=seed))
    grid = MonitorGrid(dz_km * 1e3, m_count)
    length = m_count * grid.dz_m
    disp = fiberlink.DispersionMap.uniform(length, fiberlink.ps2_per_km(beta2_ps2_per_km))
    return accumulate_normal_equations(ModelOperator(tx, grid, disp, length))


def gauss_model(beta2_ps2_per_km: float, sigma_omega_ghz: float, dz_km: float, m_count: int,
                n_samples: int = 1 << 17, seed: int = 0) -> NormalEquations:
    so = 2 * math.pi * sigma_omega_ghz * 1e9
    fs = GAUSS_SPECTRUM_FS_PER_SIGMA * sigma_omega_ghz * 1e9
    tx = generate(SignalSpec("GaussSpectrum", n_samples, fs, None, so, seed))
    grid = MonitorGrid(dz_km * 1e3, m_count)
    length = m_count * grid.dz_m
    disp = fiberlink.DispersionMap.uniform(length, fiberlink.ps2_per_km(beta2_ps2_per_km))
    return accumulate_normal_equations(ModelOperator(tx, grid, disp, length))


def empirical_reciprocal_integral(ne: NormalEquations, max_lag: int | None = None, n_points: int = 4096) -> float:
    """int 1/h~ dkappa from the diagonal-averaged SCF of a model."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scf.NonToeplitzWarning)
        s = scf.scf_from_model(ne)
    if max_lag is not None:
        s = scf.ScfSeries(s.values[: max_lag + 1], s.eta, s.source, s.label)
    return scf.symbol_dtft(s, max(n_points, 2 * s.max_lag + 1)).integral_reciprocal


_RECT_INTEGRAL_CACHE: dict = {}


def reference_reciprocal_integral(beta2_ps2_per_km: float = -21.0, bandwidth_ghz: float = 128.0,
                                  dz_km: float = 1.0, m_count: int = 101, n_samples: int = 1 << 17) -> float:
    key = (beta2_ps2_per_km, bandwidth_ghz, dz_km, m_count, n_samples)
    if key not in _RECT_INTEGRAL_CACHE:
        ne = rect_model(beta2_ps2_per_km, bandwidth_ghz, dz_km, m_count, n_samples)
        _RECT_INTEGRAL_CACHE[key] = empirical_reciprocal_integral(ne)
    return _RECT_INTEGRAL_CACHE[key]


# -- figure reproduction ----------------------------------------------------------


FIGURES = (1, 2, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13)

# (bandwidth GHz, beta2 ps^2/km) at dz = 1 km; eta from 0.5 to 2.5
TRACE_SWEEP = ((128, -30), (128, -25), (128, -20), (128, -15), (128, -10), (64, -30), (64, -25))


def figure_points(n_samples: int = 1 << 18, trials: int = 8, length_km: float = 100.0, seed: int = 0):
    for bw, b2 in TRACE_SWEEP:
        yield ScenarioConfig(
            n_spans=int(round(length_km / 50)), span_length_km=50.0, beta2_ps2_per_km=b2, bandwidth_ghz=bw,
            n_samples=n_samples, dz_km=1.0, trials=trials, seed=seed,
        )


def reproduce(figure: int, out_dir: str | Path, full: bool = False, seed: int = 0) -> list[Path]:
    """Write the CSV dataset(s) for one figure; returns the paths written."""
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure}; choose from {FIGURES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _FIGURE_FUNCS[figure](out, full, seed)


def _fig1(out, full, seed):
    n = 1 << (19 if full else 17)
    combos = [(128, -15, 1.0), (128, -30, 0.5), (64, -30, 1.0), (64, -15, 2.0), (64, -20, 1.0)]
    paths = []
    for bw, b2, dz in combos:
        m = int(round(100 / dz))
        ne = rect_model(b2, bw, dz, m, n, seed=seed)
        d = estimator.normalized_inverse_diagonal(ne)
        eta = scf.eta_rect(abs(fiberlink.ps2_per_km(b2)), bw * 1e9, dz * 1e3)
        p = out / f"fig1_bw{bw}_b2{-b2}_dz{dz:g}.csv"
        write_csv(p, ["z_km", "diag_inverse"], zip(np.arange(m) * dz, d),
                  {"figure": 1, "bandwidth_ghz": bw, "beta2_ps2_per_km": b2, "dz_km": dz, "n_samples": n,
                   "eta": f"{eta:.4f}", "seed": seed})
        paths.append(p)
    return paths


def _fig2(out, full, seed):
    n = 5_000_000 if full else 1 << 18
    rows = []
    for cfg in figure_points(n, seed=seed):
        r = run_point(cfg)
        rows.append((cfg.eta, cfg.bandwidth_ghz, cfg.beta2_ps2_per_km, r.trace_metric, r.normalized_variance))
    p = out / "fig2_trace_metric.csv"
    write_csv(p, ["eta", "bandwidth_ghz", "beta2_ps2_per_km", "trace_metric", "measured_normalized_variance"],
              rows, {"figure": 2, "n_samples": n, "dz_km": 1.0, "length_km": 100, "seed": seed})
    return [p]


def _fig4(out, full, seed):
    n = 1 << (18 if full else 17)
    ne51 = rect_model(-21, 128, 1.0, 51, n, seed=seed)
    ne_big = rect_model(-21, 128, 1.0, 101, n, seed=seed)
    s = scf.scf_from_model(ne_big)
    ev51 = np.linalg.eigvalsh(ne51.normalized_gram.real)[::-1]
    ev501 = scf.toeplitz_eigs(s, 501)
    sym = scf.symbol_dtft(s, 501)
    man = {"figure": 4, "beta2_ps2_per_km": -21, "bandwidth_ghz": 128, "dz_km": 1.0, "n_samples": n, "seed": seed}
    p1, p2, p3 = out / "fig4_eig_M51.csv", out / "fig4_eig_M501.csv", out / "fig4_symbol_sorted.csv"
    scf.write_eigen_csv(p1, ev51, man)
    scf.write_eigen_csv(p2, ev501, man)
    scf.write_eigen_csv(p3, np.sort(sym.values)[::-1], man)
    return [p1, p2, p3]


def _fig5(out, full, seed):
    n = 3_100_000 if full else 1 << 18
    cfg = ScenarioConfig(n_samples=n, trials=1, seed=seed)
    r = run_point(cfg)
    rep = r.variance_report
    sd = np.sqrt(rep.variance)
    p = out / "fig5_profile.csv"
    write_csv(p, ["z_km", "estimate_per_km", "ideal_per_km", "lower_1sigma_per_km", "upper_1sigma_per_km"],
              zip(r.z_m / 1e3, r.estimates[0] * 1e3, r.ideal * 1e3, (r.ideal - sd) * 1e3, (r.ideal + sd) * 1e3),
              cfg.manifest())
    return [p]


def fig6_data(n_samples: int = 500_000, trials: int = 50, seed: int = 0):
    """Measured ensemble SNR and the symbol-based prediction on the reference link."""
    cfg = ScenarioConfig(n_samples=n_samples, trials=trials, seed=seed)
    r = run_point(cfg)
    integral = empirical_reciprocal_integral(r.ne, max_lag=50)
    pred = design.snr_pp(n_samples, r.true_gamma_prime, r.sigma2, r.ne.dz, integral)
    return cfg, r, pred


def _fig6(out, full, seed):
    cfg, r, pred = fig6_data(3_100_000 if full else 500_000, 50, seed)
    p = out / "fig6_snr.csv"
    write_csv(p, ["z_km", "measured_snr_db", "predicted_snr_db"],
              zip(r.z_m / 1e3, r.stats.snr_db, 10 * np.log10(pred)), cfg.manifest())
    return [p]


def _fig7(out, full, seed):
    m = 501 if full else 201
    n = 1 << (18 if full else 17)
    ne = gauss_model(-21, 54.4, 0.1, m, n, seed)
    eta = scf.eta_gauss(21e-27, 2 * math.pi * 54.4e9, 100.0)
    s = scf.scf_from_model(ne, eta)
    man = {"figure": 7, "beta2_ps2_per_km": -21, "sigma_omega_ghz": 54.4, "dz_km": 0.1, "m": m, "n_samples": n,
           "eta": f"{eta:.4f}", "seed": seed}
    lags = np.arange(m)
    ana = gaussian.scf_analytic(eta, lags)
    p1 = out / "fig7a_scf.csv"
    write_csv(p1, ["m", "re_h", "im_h", "re_h_analytic", "im_h_analytic"],
              zip(lags, s.values.real, s.values.imag, ana.real, ana.imag), man)
    sym = scf.symbol_dtft(s, 2 * m)
    case = gaussian.GaussianCase(21e-27, 2 * math.pi * 54.4e9, 100.0)
    k = sym.kappa
    with np.errstate(divide="ignore"):
        cont = gaussian.symbol_continuous(case, k / case.dz) / case.dz
        asym = gaussian.symbol_asymptotic(case, k / case.dz) / case.dz
    alias = gaussian.symbol_aliased(case, k)
    p2 = out / "fig7b_symbol.csv"
    write_csv(p2, ["kappa", "dft", "continuous", "aliased", "asymptotic"], zip(k, sym.values, cont, alias, asym), man)
    return [p1, p2]


def fig8_rows(etas=(0.5, 1, 2, 4, 8), m: int = 501):
    """eta, bound, Toeplitz trace metric (analytic SCF), Szego value of the aliased symbol."""
    rows = []
    for eta in etas:
        case = gaussian.GaussianCase.from_eta(eta)
        s = scf.scf_from_analytic(eta, m - 1)
        tm = float(np.mean(1.0 / scf.toeplitz_eigs(s, m)))
        sz = scf.szego_from_function(lambda k: gaussian.symbol_aliased(case, k, 16))
        rows.append((eta, gaussian.normalized_trace_bound(eta), tm, sz))
    return rows


def _fig8(out, full, seed):
    etas = np.round(np.geomspace(0.5, 8, 9 if full else 5), 4)
    p = out / "fig8_bound.csv"
    write_csv(p, ["eta", "bound", "trace_metric_toeplitz", "szego_aliased"], fig8_rows(etas),
              {"figure": 8, "m": 501, "format": "GaussSpectrum"})
    return [p]


def _fig9(out, full, seed):
    loss = np.round(np.linspace(0.1, 10, 100), 3)
    paths = []
    for a in (1, 2, 3, 4):
        p = out / f"fig9_a{a}.csv"
        design.write_snr_curve_csv(p, loss, a, {"figure": 9})
        paths.append(p)
    return paths


def design_inputs():
    """(sigma2, gamma [1/(W m)], dz [m], reciprocal integral) for the reference link at 17 dB rx SNR."""
    sigma2 = fiberlink.noise_variance(17.0)
    gamma = fiberlink.per_w_km(1.3)
    return sigma2, gamma, 1e3, reference_reciprocal_integral()


def _fig10(out, full, seed):
    sigma2, gamma, dz, integral = design_inputs()
    loss = np.round(np.linspace(0.2, 5, 49), 3)
    paths = []
    for p_dbm in (-6, -3, 0, 3, 6):
        gp = gamma * fiberlink.dbm_to_w(p_dbm)
        n = [design.required_samples(design.DetectionSpec(l, 3), gp, sigma2, dz, integral) for l in loss]
        p = out / f"fig10_p{p_dbm:+d}dbm.csv"
        design.write_samples_curve_csv(p, loss, n, {"figure": 10, "power_dbm": p_dbm, "a": 3,
                                                    "reciprocal_integral": f"{integral:.6g}"})
        paths.append(p)
    return paths


def _fig11(out, full, seed):
    sigma2, gamma, dz, integral = design_inputs()
    prof = fiberlink.true_profile(fiberlink.reference_link(), dz)
    paths = []
    for n in (1e6, 6.1e6, 2.5e7, 1e8):
        loss = design.detectable_loss_profile(prof.values, n, sigma2, 3, dz, integral)
        p = out / f"fig11_n{n:.2g}.csv"
        design.write_loss_profile_csv(p, prof.z_m, loss, {"figure": 11, "n_samples": f"{n:g}", "a": 3,
                                                          "reciprocal_integral": f"{integral:.6g}"})
        paths.append(p)
    return paths


def _rows_csv(out, name, fmt, n, seed, figure):
    ne = rect_model(-21, 128, 1.0, 50, n, fmt=fmt, seed=seed)
    re = ne.normalized_gram.real
    rows = [(j, *(re[i, j] for i in (0, 5, 10, 20, 30))) for j in range(50)]
    p = out / name
    write_csv(p, ["column", "row0", "row5", "row10", "row20", "row30"], rows,
              {"figure": figure, "format": fmt, "beta2_ps2_per_km": -21, "bandwidth_ghz": 128, "dz_km": 1.0,
               "length_km": 50, "n_samples": n, "seed": seed})
    return p


def _fig12(out, full, seed):
    n = 1 << (19 if full else 17)
    return [_rows_csv(out, "fig12_qpsk_rows.csv", "QPSK", n, seed, 12),
            _rows_csv(out, "fig3_gauss_rows.csv", "GaussRect", n, seed, 3)]


def _fig13(out, full, seed):
    n = 1 << (19 if full else 18)
    link = fiberlink.reference_link(n_spans=1)
    d = scf.diag_inverse_by_format(["GaussRect", "QPSK", "QAM16"], link, 1e3, n, 128e9, seed=seed)
    p = out / "fig13_formats.csv"
    write_csv(p, ["z_km", *d], zip(np.arange(50), *d.values()),
              {"figure": 13, "beta2_ps2_per_km": -21, "bandwidth_ghz": 128, "dz_km": 1.0, "length_km": 50,
               "n_samples": n, "seed": seed})
    return [p]


_FIGURE_FUNCS = {1: _fig1, 2: _fig2, 4: _fig4, 5: _fig5, 6: _fig6, 7: _fig7, 8: _fig8, 9: _fig9,
                 10: _fig10, 11: _fig11, 12: _fig12, 13: _fig13}
