"""Penalized least-squares power-profile estimator and its noise statistics.

The estimate solves (Re[G^H G] + lam R) g = Re[G^H y]. With circular white
receiver noise of power sigma2 the error is Gaussian with covariance
(sigma2/2) A^-1 Re[G^H G] A^-1, A = Re[G^H G] + lam R.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .fiberlink import PowerProfile
from .perturbation import NormalEquations


class NonPositiveDefiniteError(np.linalg.LinAlgError):
    """Re[G^H G] (+ lam R) is not positive definite.

    Typical causes: a dispersion-compensated link, or a grid far finer than
    the CD length (large eta).
    """


class RegMatrix(str, enum.Enum):
    IDENTITY = "Identity"
    NONE = "None"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class EstimatorOptions:
    lam: float = 0.0
    reg: RegMatrix = RegMatrix.IDENTITY
    custom_r: np.ndarray | None = field(default=None, compare=False)
    tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "reg", RegMatrix(self.reg))
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if self.reg is RegMatrix.CUSTOM:
            if self.custom_r is None:
                raise ValueError("Custom regularization needs custom_r")
            r = np.asarray(self.custom_r, dtype=float)
            if r.ndim != 2 or r.shape[0] != r.shape[1] or not np.allclose(r, r.T, atol=1e-12):
                raise ValueError("custom_r must be a symmetric square matrix")
            if np.linalg.eigvalsh(r)[0] < -1e-10:
                raise ValueError("custom_r must be positive semidefinite")
            object.__setattr__(self, "custom_r", r)

    def penalty(self, m: int) -> np.ndarray | None:
        if self.lam == 0 or self.reg is RegMatrix.NONE:
            return None
        if self.reg is RegMatrix.IDENTITY:
            return self.lam * np.eye(m)
        if self.custom_r.shape != (m, m):
            raise ValueError(f"custom_r is {self.custom_r.shape}, model has M={m}")
        return self.lam * self.custom_r


def _system(ne: NormalEquations, opts: EstimatorOptions) -> np.ndarray:
    a = ne.re_gram.copy()
    p = opts.penalty(ne.m_count)
    if p is not None:
        a += p
    return a


def _cholesky(a: np.ndarray):
    try:
        return sla.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefiniteError(
            "normal matrix is not positive definite; check the dispersion map and eta"
        ) from exc


def _positions(ne: NormalEquations, z0: float = 0.0) -> np.ndarray:
    return z0 + np.arange(ne.m_count) * ne.dz


def solve(ne: NormalEquations, opts: EstimatorOptions = EstimatorOptions()) -> np.ndarray:
    """Raw solution vector(s); (M,) or (M, T) following ``ne.re_proj``."""
    if ne.re_proj is None:
        raise ValueError("normal equations carry no projection Re[G^H y]")
    cf = _cholesky(_system(ne, opts))
    return sla.cho_solve(cf, ne.re_proj)


def estimate(ne: NormalEquations, opts: EstimatorOptions = EstimatorOptions()) -> PowerProfile:
    """gamma' estimate in 1/m. Negative values under noise are kept as they are."""
    g = solve(ne, opts)
    if g.ndim != 1:
        raise ValueError("estimate() takes a single observation; use solve() for batches")
    return PowerProfile(_positions(ne), g)


def covariance(ne: NormalEquations, sigma2: float, opts: EstimatorOptions = EstimatorOptions()) -> np.ndarray:
    """Error covariance of the estimate, M x M."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    a = _system(ne, opts)
    cf = _cholesky(a)
    ainv = sla.cho_solve(cf, np.eye(ne.m_count))
    if opts.penalty(ne.m_count) is None:
        cov = 0.5 * sigma2 * ainv
    else:
        cov = 0.5 * sigma2 * ainv @ ne.re_gram @ ainv
    return 0.5 * (cov + cov.T)


def normalized_inverse_diagonal(ne: NormalEquations) -> np.ndarray:
    """diag(Re[H^H H]^-1)."""
    cf = _cholesky(ne.normalized_gram.real)
    return np.diag(sla.cho_solve(cf, np.eye(ne.m_count))).copy()


def trace_metric(ne: NormalEquations) -> float:
    """(1/M) Tr Re[H^H H]^-1, as the mean reciprocal eigenvalue."""
    ev = np.linalg.eigvalsh(ne.normalized_gram.real)
    if ev[0] <= 0:
        raise NonPositiveDefiniteError(f"smallest eigenvalue {ev[0]:.3e} <= 0")
    return float(np.mean(1.0 / ev))


@dataclass(frozen=True, eq=False)
class VarianceReport:
    z_m: np.ndarray
    variance: np.ndarray  # 1/m^2
    trace_metric: float
    sigma2: float
    n_samples: int
    dz: float
    gamma_prime: np.ndarray | None = None

    @property
    def snr_pp(self) -> np.ndarray | None:
        if self.gamma_prime is None:
            return None
        return self.gamma_prime**2 / self.variance

    @property
    def snr_pp_db(self) -> np.ndarray | None:
        s = self.snr_pp
        return None if s is None else 10 * np.log10(s)

    @property
    def mean_variance(self) -> float:
        """sigma2 / (4 N dz^2) times the trace metric."""
        return self.sigma2 / (4 * self.n_samples * self.dz**2) * self.trace_metric


def variance_profile(ne: NormalEquations, sigma2: float, gamma_prime=None) -> VarianceReport:
    """Per-position variance sigma2/(4 N dz^2) diag(Re[H^H H]^-1) for lam = 0."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    d = normalized_inverse_diagonal(ne)
    scale = sigma2 / (4.0 * ne.n_samples * ne.dz**2)
    gp = None if gamma_prime is None else np.broadcast_to(np.asarray(gamma_prime, float), d.shape).copy()
    return VarianceReport(_positions(ne), scale * d, trace_metric(ne), sigma2, ne.n_samples, ne.dz, gp)


def interior_slice(m_count: int, eta: float) -> slice:
    """Drop ceil(eta) positions at each end, where the variance rises."""
    trim = int(math.ceil(eta))
    if 2 * trim >= m_count:
        raise ValueError(f"edge trim {trim} leaves no interior positions for M={m_count}")
    return slice(trim, m_count - trim)


def write_profile_csv(
    path: str | Path,
    profile: PowerProfile,
    gamma_w_km: float,
    report: VarianceReport | None = None,
    header: dict | None = None,
) -> None:
    """Columns z_km, gamma_prime_per_km, power_dbm_equiv, variance, snr_pp_db.

    ``power_dbm_equiv`` is gamma'/gamma in dBm, floored at -60 dB below the
    profile maximum so negative excursions stay plottable.
    """
    g_km = profile.values * 1e3
    p_w = g_km / gamma_w_km
    floor = max(np.max(p_w), 1e-300) * 1e-6
    p_dbm = 10 * np.log10(np.maximum(p_w, floor) / 1e-3)
    var = report.variance * 1e6 if report is not None else np.full(len(profile), np.nan)
    if report is not None:
        snr = 10 * np.log10(profile.values**2 / report.variance) if report.gamma_prime is None else report.snr_pp_db
    else:
        snr = np.full(len(profile), np.nan)
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(["z_km", "gamma_prime_per_km", "power_dbm_equiv", "variance", "snr_pp_db"])
        for row in zip(profile.z_m / 1e3, g_km, p_dbm, var, snr):
            w.writerow([f"{x:.10g}" for x in row])
