"""Spatial correlation function (SCF) analysis of Re[H^H H].

For stationary (Gaussian) inputs H^H H is close to Toeplitz with entries
h_{j-i}. Its symbol (the DTFT of Re h_m) approximates the eigenvalue
distribution, and the mean reciprocal of the symbol approximates the trace
metric for large M.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .perturbation import NormalEquations

MAX_DENSE_EIG = 2000
TOEPLITZ_WARN = 0.10


class ScfSource(str, enum.Enum):
    EMPIRICAL = "Empirical"
    ANALYTIC_GAUSSIAN = "AnalyticGaussian"


class NonToeplitzWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ScfSeries:
    """h_m for m = -(K-1)..K-1, stored as the non-negative half.

    ``values[m]`` is h_m for m >= 0; h_{-m} = conj(h_m).
    """

    values: np.ndarray
    eta: float | None = None
    source: ScfSource | str = ScfSource.EMPIRICAL
    label: str = ""
    diag_std: np.ndarray | None = None

    @property
    def max_lag(self) -> int:
        return self.values.size - 1

    @property
    def lags(self) -> np.ndarray:
        k = self.max_lag
        return np.arange(-k, k + 1)

    def two_sided(self) -> np.ndarray:
        v = self.values
        return np.concatenate([np.conj(v[:0:-1]), v])


def scf_from_model(ne: NormalEquations | np.ndarray, eta: float | None = None, label: str = "") -> ScfSeries:
    """Average the diagonals of the normalized Gram H^H H.

    h_m (m >= 0) is the mean of entries (i, i+m). ``diag_std`` holds the std
    of the real parts along each diagonal relative to Re h_0, a Toeplitz-fit
    diagnostic; above 10% a ``NonToeplitzWarning`` is issued.
    """
    hh = ne.normalized_gram if isinstance(ne, NormalEquations) else np.asarray(ne)
    m = hh.shape[0]
    vals = np.array([np.diagonal(hh, k).mean() for k in range(m)])
    h0 = vals[0].real
    std = np.array([np.diagonal(hh, k).real.std() for k in range(m)]) / h0
    if np.max(std) > TOEPLITZ_WARN:
        warnings.warn(
            f"diagonal spread up to {np.max(std):.0%} of h_0: matrix is not close to Toeplitz",
            NonToeplitzWarning,
            stacklevel=2,
        )
    return ScfSeries(vals, eta, ScfSource.EMPIRICAL, label, std)


def lower_diagonal_means(hh: np.ndarray) -> np.ndarray:
    """Mean of entries (i+m, i) for m >= 0; the conjugate of the upper ones."""
    return np.array([np.diagonal(hh, -k).mean() for k in range(hh.shape[0])])


def scf_from_analytic(eta: float, max_lag: int) -> ScfSeries:
    from .gaussian import scf_analytic

    return ScfSeries(scf_analytic(eta, np.arange(max_lag + 1)), eta, ScfSource.ANALYTIC_GAUSSIAN, f"eta={eta:g}")


def toeplitz_matrix(scf: ScfSeries, m: int) -> np.ndarray:
    col = np.zeros(m)
    k = min(m, scf.values.size)
    col[:k] = scf.values[:k].real
    return sla.toeplitz(col)


def toeplitz_eigs(scf: ScfSeries, m: int) -> np.ndarray:
    """Eigenvalues of the M x M symmetric Toeplitz matrix of Re h_m, nonincreasing.

    Lags beyond the series are taken as zero.
    """
    if m < 2:
        raise ValueError("M must be >= 2")
    if m > MAX_DENSE_EIG:
        raise ValueError(f"M={m} above {MAX_DENSE_EIG}; use the symbol approximation")
    ev = np.linalg.eigvalsh(toeplitz_matrix(scf, m))[::-1]
    if ev[-1] <= 0:
        warnings.warn(f"Toeplitz matrix not positive definite (min eigenvalue {ev[-1]:.3e})", stacklevel=2)
    return ev


@dataclass(frozen=True, eq=False)
class SymbolCurve:
    kappa: np.ndarray  # centered, [-pi, pi)
    values: np.ndarray

    @property
    def integral_reciprocal(self) -> float:
        """int_{-pi}^{pi} 1/h~ dkappa."""
        return 2 * math.pi * szego_trace(self)


def symbol_dtft(scf: ScfSeries, n_points: int) -> SymbolCurve:
    """Samples of sum_m Re(h_m) e^{j m kappa} on an n-point centered grid.

    Sampling the DTFT at n points equals the DFT of the time-aliased
    sequence, so any n is exact at the grid points; n >= 2 K + 1 also makes
    the round trip invertible.
    """
    k = scf.max_lag
    if n_points < 2 * k:
        raise ValueError(f"n_points={n_points} below twice the max lag {k}")
    seq = np.zeros(n_points)
    r = scf.values.real
    idx = np.arange(k + 1)
    np.add.at(seq, idx % n_points, r)
    np.add.at(seq, (-idx[1:]) % n_points, r[1:])
    # kernel e^{+j m kappa}: n * ifft; real sequence symmetric in m gives a real, even symbol
    spec = n_points * sfft.ifft(seq)
    vals = spec.real
    vals = 0.5 * (vals + vals[(-np.arange(n_points)) % n_points])
    kappa = 2 * np.pi * sfft.fftfreq(n_points)
    return SymbolCurve(sfft.fftshift(kappa), sfft.fftshift(vals))


def symbol_inverse(sym: SymbolCurve, max_lag: int) -> np.ndarray:
    """Re h_m, m = 0..max_lag, from a symbol curve (round trip of symbol_dtft)."""
    seq = sfft.fft(sfft.ifftshift(sym.values)).real / sym.values.size
    return seq[: max_lag + 1]


def szego_trace(sym: SymbolCurve) -> float:
    """(1/2pi) int 1/h~ dkappa; the periodic trapezoid rule on the grid."""
    v = np.asarray(sym.values)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("symbol must be finite and strictly positive")
    return float(np.mean(1.0 / v))


def szego_from_function(symbol_fn, n_points: int = 4096) -> float:
    """(1/2pi) int 1/f over [-pi, pi] for an even symbol f that may diverge at 0.

    Midpoint rule on (0, pi); 1/f -> 0 at the divergence, so the integrand
    is continuous.
    """
    kappa = (np.arange(n_points) + 0.5) * np.pi / n_points
    v = symbol_fn(kappa)
    if np.any(v <= 0):
        raise ValueError("symbol must be strictly positive")
    return float(np.mean(1.0 / v))


# -- eta helpers ----------------------------------------------------------------


def z_cd_rect(beta2_abs: float, bandwidth_hz: float) -> float:
    d = 4.0 * beta2_abs * bandwidth_hz**2
    return math.inf if d == 0 else 1.0 / d


def z_cd_gauss(beta2_abs: float, sigma_omega: float) -> float:
    d = beta2_abs * sigma_omega**2
    return math.inf if d == 0 else 1.0 / d


def eta_rect(beta2_abs: float, bandwidth_hz: float, dz: float) -> float:
    return z_cd_rect(beta2_abs, bandwidth_hz) / dz


def eta_gauss(beta2_abs: float, sigma_omega: float, dz: float) -> float:
    return z_cd_gauss(beta2_abs, sigma_omega) / dz


# -- format comparison ----------------------------------------------------------


def diag_inverse_by_format(formats, link, dz_m: float, n_samples: int, bandwidth_hz: float,
                           samples_per_symbol: int = 4, seed: int = 0, m_count: int | None = None) -> dict:
    """diag(Re[H^H H]^-1) per modulation format at matched N and grid."""
    from .estimator import normalized_inverse_diagonal
    from .perturbation import ModelOperator, MonitorGrid, accumulate_normal_equations
    from .signalgen import SignalSpec, generate

    grid = MonitorGrid.for_length(link.length_m, dz_m) if m_count is None else MonitorGrid(dz_m, m_count)
    out = {}
    for fmt in formats:
        spec = SignalSpec(fmt, n_samples, samples_per_symbol * bandwidth_hz, bandwidth_hz, seed=seed)
        tx = generate(spec)
        op = ModelOperator(tx, grid, link.dispersion_map())
        ne = accumulate_normal_equations(op)
        out[spec.format.value] = normalized_inverse_diagonal(ne)
    return out


# -- CSV ------------------------------------------------------------------------


def _write(path, columns, rows, header):
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{x:.10g}" if isinstance(x, float) else x for x in row])


def write_scf_csv(path: str | Path, scf: ScfSeries, header: dict | None = None) -> None:
    h = scf.two_sided()
    _write(path, ["m", "re_h", "im_h"], zip(scf.lags.tolist(), h.real.tolist(), h.imag.tolist()), header)


def write_symbol_csv(path: str | Path, sym: SymbolCurve, header: dict | None = None) -> None:
    _write(path, ["kappa", "symbol"], zip(sym.kappa.tolist(), sym.values.tolist()), header)


def write_eigen_csv(path: str | Path, eigenvalues: np.ndarray, header: dict | None = None) -> None:
    n = eigenvalues.size
    frac = ((np.arange(n) + 0.5) / n).tolist()
    _write(path, ["sorted_index_fraction", "eigenvalue"], zip(frac, np.asarray(eigenvalues).tolist()), header)
