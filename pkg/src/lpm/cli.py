"""Command-line front end.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import design, estimator, experiments, fiberlink, gaussian, scf
from .experiments import ConfigError, ScenarioConfig, write_csv
from .perturbation import (
    ModelOperator,
    accumulate_normal_equations,
    observation,
    write_normal_equations,
)
from .signalgen import SignalSpec, generate, read_waveform, write_waveform

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _scenario(args) -> ScenarioConfig:
    text = Path(args.config).read_text() if args.config else experiments.reference_config_text()
    return experiments.parse_config(text).base


def _add_config(p):
    p.add_argument("--config", help="INI scenario (default: shipped reference link)")


def cmd_gen_signal(args):
    bw = None if args.bandwidth_ghz is None else args.bandwidth_ghz * 1e9
    so = None if args.sigma_omega_ghz is None else 2 * math.pi * args.sigma_omega_ghz * 1e9
    if args.sample_rate_ghz is not None:
        fs = args.sample_rate_ghz * 1e9
    elif bw is not None:
        fs = args.sps * bw
    elif args.sigma_omega_ghz is not None:
        fs = experiments.GAUSS_SPECTRUM_FS_PER_SIGMA * args.sigma_omega_ghz * 1e9
    else:
        raise ConfigError("give --bandwidth-ghz or --sigma-omega-ghz")
    w = generate(SignalSpec(args.format, args.n, fs, bw, so, args.seed))
    write_waveform(args.out, w)
    print(f"wrote {args.out}: {w.n_samples} samples at {fs / 1e9:g} GS/s")


def cmd_propagate(args):
    cfg = _scenario(args)
    tx = read_waveform(args.input)
    link = cfg.link()
    rx = fiberlink.propagate(tx, link, cfg.ssfm_step_m)
    if args.rx_snr_db is not None:
        rx = fiberlink.add_rx_noise(rx, args.rx_snr_db, args.seed)
    write_waveform(args.out, rx)
    print(f"wrote {args.out}: {link.length_m / 1e3:g} km")


def _normal_equations(args, cfg, tx, rx=None):
    link = cfg.link()
    disp = link.dispersion_map()
    op = ModelOperator(tx, cfg.grid(), disp, link.length_m)
    y = None
    if rx is not None:
        phase = fiberlink.mean_nonlinear_phase(link, cfg.ssfm_step_m) if cfg.phase_correction else 0.0
        y = observation(tx, rx, disp, link.length_m, phase)
    return link, accumulate_normal_equations(op, y)


def cmd_estimate(args):
    cfg = _scenario(args)
    tx, rx = read_waveform(args.tx), read_waveform(args.rx)
    link, ne = _normal_equations(args, cfg, tx, rx)
    prof = estimator.estimate(ne, estimator.EstimatorOptions(args.lam))
    sigma2 = rx.mean_power * fiberlink.noise_variance(cfg.rx_snr_db)
    rep = estimator.variance_profile(ne, sigma2) if args.lam == 0 and sigma2 > 0 else None
    estimator.write_profile_csv(args.out, prof, cfg.gamma_per_w_per_km, rep, cfg.manifest())
    if args.ne_out:
        write_normal_equations(args.ne_out, ne)
    print(f"wrote {args.out}: M={ne.m_count}")


def cmd_predict_variance(args):
    cfg = _scenario(args)
    tx = read_waveform(args.tx)
    link, ne = _normal_equations(args, cfg, tx)
    sigma2 = fiberlink.noise_variance(cfg.rx_snr_db)
    gp = fiberlink.gamma_prime_at(link, ne.dz * np.arange(ne.m_count))
    rep = estimator.variance_profile(ne, sigma2, gp)
    estimator.write_profile_csv(args.out, fiberlink.PowerProfile(rep.z_m, gp), cfg.gamma_per_w_per_km, rep,
                                {**cfg.manifest(), "trace_metric": f"{rep.trace_metric:.8g}"})
    print(f"trace metric {rep.trace_metric:.6g}; wrote {args.out}")


def cmd_scf(args):
    cfg = _scenario(args)
    tx = read_waveform(args.tx)
    _, ne = _normal_equations(args, cfg, tx)
    s = scf.scf_from_model(ne, cfg.eta)
    scf.write_scf_csv(args.out, s, cfg.manifest())
    if args.symbol_out:
        sym = scf.symbol_dtft(s, max(args.n_points, 2 * s.max_lag + 1))
        scf.write_symbol_csv(args.symbol_out, sym, cfg.manifest())
    if args.eig_out:
        scf.write_eigen_csv(args.eig_out, scf.toeplitz_eigs(s, args.m), cfg.manifest())
    print(f"h_0 = {s.values[0].real:.4f}; wrote {args.out}")


def cmd_bound(args):
    if args.eta is not None:
        eta = args.eta
    else:
        if None in (args.beta2_ps2_per_km, args.sigma_omega_ghz, args.dz_km):
            raise ConfigError("give --eta or all of --beta2-ps2-per-km, --sigma-omega-ghz, --dz-km")
        eta = scf.eta_gauss(abs(fiberlink.ps2_per_km(args.beta2_ps2_per_km)),
                            2 * math.pi * args.sigma_omega_ghz * 1e9, args.dz_km * 1e3)
    if eta <= 0:
        raise ConfigError("eta must be positive")
    b = gaussian.normalized_trace_bound(eta)
    print(f"eta={eta:.6g} normalized_bound={b:.8g} validity={gaussian.bound_validity(eta)}")
    if args.n_samples and args.dz_km:
        sigma2 = fiberlink.noise_variance(args.rx_snr_db)
        v = sigma2 / (4 * args.n_samples * (args.dz_km * 1e3) ** 2) * b
        print(f"variance_upper_bound_per_km2={v * 1e6:.8g}")


def _design_common(args):
    sigma2 = fiberlink.noise_variance(args.rx_snr_db)
    integral = args.reciprocal_integral
    if integral is None:
        integral = experiments.reference_reciprocal_integral(args.beta2_ps2_per_km, args.bandwidth_ghz, args.dz_km)
    return sigma2, integral, args.dz_km * 1e3, fiberlink.per_w_km(args.gamma_per_w_per_km)


def cmd_design(args):
    spec = design.DetectionSpec(args.loss_db, args.a) if args.loss_db is not None else None
    if args.what == "snr":
        if spec is None:
            raise ConfigError("--loss-db is required")
        s = design.required_snr(spec)
        print(f"required_snr={s:.6g} ({10 * math.log10(s):.2f} dB)")
        return
    sigma2, integral, dz, gamma = _design_common(args)
    if args.what == "samples":
        if spec is None or args.power_dbm is None:
            raise ConfigError("--loss-db and --power-dbm are required")
        n = design.required_samples(spec, gamma * fiberlink.dbm_to_w(args.power_dbm), sigma2, dz, integral)
        print(f"required_samples={n}")
    elif args.what == "power":
        if spec is None or args.n_samples is None:
            raise ConfigError("--loss-db and --n-samples are required")
        p = design.required_power(spec, args.n_samples, sigma2, dz, integral, gamma)
        print(f"required_power_dbm={fiberlink.w_to_dbm(p):.2f}")
    elif args.what == "dynamic-range":
        if spec is None or args.n_samples is None:
            raise ConfigError("--loss-db and --n-samples are required")
        d = design.dynamic_range(spec, args.n_samples, fiberlink.dbm_to_w(args.launch_power_dbm), sigma2, dz,
                                 integral, gamma)
        print(f"dynamic_range_db={d:.2f}")
    elif args.what == "loss-profile":
        if args.n_samples is None:
            raise ConfigError("--n-samples is required")
        link = fiberlink.reference_link(launch_dbm=args.launch_power_dbm, gamma_w_km=args.gamma_per_w_per_km,
                                        beta2_ps2_km=args.beta2_ps2_per_km, rx_snr_db=args.rx_snr_db)
        prof = fiberlink.true_profile(link, dz)
        loss = design.detectable_loss_profile(prof.values, args.n_samples, sigma2, args.a, dz, integral)
        out = args.out or "loss_profile.csv"
        design.write_loss_profile_csv(out, prof.z_m, loss, {"n_samples": args.n_samples, "a": args.a,
                                                             "reciprocal_integral": f"{integral:.6g}"})
        print(f"wrote {out}")


def cmd_reproduce(args):
    paths = experiments.reproduce(args.figure, args.out, args.full, args.seed)
    for p in paths:
        print(p)


def cmd_sweep(args):
    sw = experiments.load_config(args.config)
    summary = experiments.run_scenario(sw, args.desk_scale, args.out)
    print(summary)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpm", description="Longitudinal power monitoring toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-signal", help="draw a transmit waveform")
    p.add_argument("--format", default="GaussRect", choices=["GaussRect", "GaussSpectrum", "QPSK", "QAM16"])
    p.add_argument("--n", type=int, default=1 << 18)
    p.add_argument("--bandwidth-ghz", type=float)
    p.add_argument("--sigma-omega-ghz", type=float, help="spectral std / 2pi in GHz")
    p.add_argument("--sample-rate-ghz", type=float)
    p.add_argument("--sps", type=float, default=experiments.DEFAULT_SPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen_signal)

    p = sub.add_parser("propagate", help="split-step propagation over the configured link")
    _add_config(p)
    p.add_argument("--input", required=True)
    p.add_argument("--rx-snr-db", type=float, help="add receiver noise at this SNR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("estimate", help="estimate gamma' from tx/rx waveforms")
    _add_config(p)
    p.add_argument("--tx", required=True)
    p.add_argument("--rx", required=True)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--ne-out", help="also store the normal equations (binary)")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("predict-variance", help="per-position variance and SNR from the model")
    _add_config(p)
    p.add_argument("--tx", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_predict_variance)

    p = sub.add_parser("scf", help="spatial correlation function of the model")
    _add_config(p)
    p.add_argument("--tx", required=True)
    p.add_argument("--symbol-out")
    p.add_argument("--eig-out")
    p.add_argument("--m", type=int, default=501, help="Toeplitz size for --eig-out")
    p.add_argument("--n-points", type=int, default=4096)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_scf)

    p = sub.add_parser("bound", help="closed-form variance bound for Gaussian spectra")
    p.add_argument("--eta", type=float)
    p.add_argument("--beta2-ps2-per-km", type=float)
    p.add_argument("--sigma-omega-ghz", type=float)
    p.add_argument("--dz-km", type=float)
    p.add_argument("--n-samples", type=float)
    p.add_argument("--rx-snr-db", type=float, default=17.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("design", help="detection design arithmetic")
    p.add_argument("what", choices=["snr", "samples", "power", "dynamic-range", "loss-profile"])
    p.add_argument("--loss-db", type=float)
    p.add_argument("--a", type=float, default=3.0)
    p.add_argument("--power-dbm", type=float)
    p.add_argument("--n-samples", type=float)
    p.add_argument("--launch-power-dbm", type=float, default=2.0)
    p.add_argument("--rx-snr-db", type=float, default=17.0)
    p.add_argument("--dz-km", type=float, default=1.0)
    p.add_argument("--beta2-ps2-per-km", type=float, default=-21.0)
    p.add_argument("--bandwidth-ghz", type=float, default=128.0)
    p.add_argument("--gamma-per-w-per-km", type=float, default=1.3)
    p.add_argument("--reciprocal-integral", type=float,
                   help="int 1/h~ dkappa; computed from a rectangular-spectrum model if omitted")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("reproduce", help="write the dataset behind one figure")
    p.add_argument("--figure", type=int, required=True)
    p.add_argument("--out", default="figures")
    p.add_argument("--full", action="store_true", help="large N (slow)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("sweep", help="run every point of a scenario file")
    p.add_argument("--config", required=True)
    p.add_argument("--desk-scale", action="store_true", help=f"cap N at {experiments.DESK_MAX_N} and L at 150 km")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError, design.NotDetectableError) as exc:
        print(f"lpm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"lpm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"lpm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
