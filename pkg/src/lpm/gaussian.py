"""Closed forms for Gaussian-spectrum signals.

The SCF comes with its continuous and aliased Fourier symbols. A variance
upper bound follows from the large-argument form of the symbol. K0 and the lower
incomplete gamma magnitude are implemented here (series plus continued
fraction) rather than imported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16


@dataclass(frozen=True)
class GaussianCase:
    beta2_abs: float  # s^2/m
    sigma_omega: float  # rad/s, std of the power spectral density
    dz: float  # m

    def __post_init__(self):
        if min(self.beta2_abs, self.sigma_omega, self.dz) <= 0:
            raise ValueError("beta2_abs, sigma_omega and dz must be positive")

    @property
    def z_cd(self) -> float:
        return 1.0 / (self.beta2_abs * self.sigma_omega**2)

    @property
    def eta(self) -> float:
        return self.z_cd / self.dz

    @classmethod
    def from_eta(cls, eta: float, beta2_abs: float = 21e-27, sigma_omega: float = 2 * np.pi * 54.4e9):
        z_cd = 1.0 / (beta2_abs * sigma_omega**2)
        return cls(beta2_abs, sigma_omega, z_cd / eta)


def scf_analytic(eta: float, m) -> np.ndarray:
    """h_m = 1 / sqrt(1 + 2j m/eta + 3 (m/eta)^2), principal branch."""
    x = np.asarray(m, dtype=float) / eta
    return 1.0 / np.sqrt(1.0 + 2j * x + 3.0 * x**2)


# -- modified Bessel function K0 ------------------------------------------------


def _k0_series(x: float) -> float:
    # K0 = -(ln(x/2) + gamma) I0 + sum_k (x^2/4)^k / (k!)^2 * H_k
    q = 0.25 * x * x
    term = 1.0
    i0 = 1.0
    tail = 0.0
    harmonic = 0.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        harmonic += 1.0 / k
        i0 += term
        tail += term * harmonic
        if term * max(harmonic, 1.0) < _EPS * abs(tail + 1.0):
            break
    return -(math.log(0.5 * x) + EULER_GAMMA) * i0 + tail


def _k0_continued_fraction(x: float) -> float:
    # Steed's algorithm for the Temme/Thompson-Barnett CF2 with nu = 0
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100_000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError(f"K0 continued fraction did not converge at x={x}")
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s


def _k0_scalar(x: float) -> float:
    if not x > 0:
        raise ValueError(f"K0 needs x > 0, got {x}")
    if math.isinf(x):
        return 0.0
    return _k0_series(x) if x <= 2.0 else _k0_continued_fraction(x)


def bessel_k0(x):
    """Modified Bessel function of the second kind, order zero, for x > 0."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return _k0_scalar(float(arr))
    return np.array([_k0_scalar(v) for v in arr.ravel()]).reshape(arr.shape)


# -- symbols --------------------------------------------------------------------


def _k0_cosh(x):
    """K0(2x) cosh(x) for x >= 0 without overflow at large x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > 2.0
    if np.any(~big):
        xs = x[~big]
        out[~big] = bessel_k0(2 * xs) * np.cosh(xs)
    if np.any(big):
        # K0(2x) = sqrt(pi/4x) e^{-2x} / s  (continued fraction), so rescale
        xb = x[big]
        k = bessel_k0(2 * xb) * np.exp(2 * xb)
        out[big] = k * 0.5 * (np.exp(-xb) + np.exp(-3 * xb))
    return out


def symbol_continuous(case: GaussianCase, k) -> np.ndarray:
    """Fourier transform of Re h(z): (2/sqrt3) z_cd K0(2/3 z_cd|k|) cosh(z_cd k/3).

    Diverges logarithmically at k = 0, where ``inf`` is returned.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = case.z_cd * np.abs(k) / 3.0
    out = np.full(k.shape, np.inf)
    nz = x > 0
    out[nz] = (2.0 / math.sqrt(3.0)) * case.z_cd * _k0_cosh(x[nz])
    return out


def symbol_complex(case: GaussianCase, k) -> np.ndarray:
    """Fourier transform of the complex h(z) with kernel exp(-jkz).

    (2/sqrt3) z_cd K0(2/3 z_cd|k|) exp(-z_cd k/3); the K0 argument uses |k|
    while the exponential does not, and the real-part symbol follows from
    (h~(k) + h~*(-k)) / 2.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = case.z_cd * np.abs(k) / 3.0
    out = np.full(k.shape, np.inf)
    nz = x > 0
    kb = bessel_k0(2 * x[nz]) * np.exp(2 * x[nz])
    out[nz] = (2.0 / math.sqrt(3.0)) * case.z_cd * kb * np.exp(-2 * x[nz] - case.z_cd * k[nz] / 3.0)
    return out


def symbol_asymptotic(case: GaussianCase, k) -> np.ndarray:
    """Large z_cd|k| form sqrt(pi/12) z_cd exp(-z_cd|k|/3) / sqrt(z_cd|k|/3)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = case.z_cd * np.abs(k) / 3.0
    with np.errstate(divide="ignore"):
        return math.sqrt(math.pi / 12.0) * case.z_cd * np.exp(-x) / np.sqrt(x)


def symbol_aliased(case: GaussianCase, kappa, n_alias_terms: int = 8, return_tail: bool = False):
    """DTFT of Re h_m via the aliasing sum over l = -n..n.

    ``return_tail`` also gives the relative contribution of the two outermost
    terms, a convergence monitor.
    """
    if n_alias_terms < 1:
        raise ValueError("need at least one alias term on each side")
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    total = np.zeros_like(kappa)
    last = np.zeros_like(kappa)
    for l in range(-n_alias_terms, n_alias_terms + 1):
        v = symbol_continuous(case, (kappa + 2 * np.pi * l) / case.dz) / case.dz
        total = total + v
        if abs(l) == n_alias_terms:
            last = last + v
    if return_tail:
        with np.errstate(invalid="ignore"):
            return total, last / total
    return total


# -- incomplete gamma and the bound ----------------------------------------------


def incomplete_gamma_abs(c: float) -> float:
    """|gamma(3/2, -c)| = int_0^c sqrt(u) e^u du, by its positive-term series."""
    if c < 0:
        raise ValueError("c must be >= 0")
    if c == 0:
        return 0.0
    # sum_k c^(k+3/2) / (k! (k+3/2)); terms are positive, no cancellation
    term = c**1.5
    total = term / 1.5
    k = 0
    while True:
        k += 1
        term *= c / k
        inc = term / (k + 1.5)
        total += inc
        if inc < _EPS * total and k > c:
            break
    return total


def normalized_trace_bound(eta: float) -> float:
    """Upper bound on (1/M) Tr Re[H^H H]^-1: 2 (3/pi)^1.5 |gamma(3/2, -pi eta/3)| / eta^2."""
    return 2.0 * (3.0 / math.pi) ** 1.5 * incomplete_gamma_abs(math.pi * eta / 3.0) / eta**2


def bound_validity(eta: float) -> str:
    return "ok" if eta >= 1.0 else "loose (aliasing ignored)"


def variance_upper_bound(case: GaussianCase, sigma2: float, n_samples: float) -> float:
    """0.5 (3/pi)^1.5 sigma^2 / (N z_cd^2) |gamma(3/2, -pi z_cd / (3 dz))|."""
    if n_samples < 1:
        raise ValueError("N must be >= 1")
    c = math.pi * case.z_cd / (3.0 * case.dz)
    return 0.5 * (3.0 / math.pi) ** 1.5 * sigma2 / (n_samples * case.z_cd**2) * incomplete_gamma_abs(c)


def snr_lower_bound(case: GaussianCase, sigma2: float, n_samples: float, gamma_prime) -> np.ndarray:
    """Position-wise SNR lower bound, gamma'^2 / variance_upper_bound."""
    return np.asarray(gamma_prime, dtype=float) ** 2 / variance_upper_bound(case, sigma2, n_samples)
