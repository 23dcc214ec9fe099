"""Detection-design arithmetic for lumped loss events.

A loss event of transmittance t (``loss_linear``, 10^(-loss_db/10)) lowers
gamma' by the factor t downstream of it. It is declared detectable when the
drop (1 - t) gamma' exceeds ``a`` standard deviations of the estimate, that is
SNR_pp >= (a / (1 - t))^2. This is a mean-separation criterion, not a
sequential change-point detector.

The position-wise SNR uses the symbol form of the variance::

    SNR_pp = 8 pi N dz^2 gamma'^2 / (sigma2 * I),   I = int_{-pi}^{pi} 1/h~ dkappa

so every result depends on sigma2 and N only through sigma2 / N.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class NotDetectableError(ValueError):
    """The SNR is below a^2, so no partial loss meets the criterion."""


@dataclass(frozen=True)
class DetectionSpec:
    loss_db: float
    a: float = 3.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not self.loss_db >= 0:
            raise ValueError("loss_db must be >= 0")

    @property
    def loss_linear(self) -> float:
        return 10 ** (-self.loss_db / 10)


@dataclass(frozen=True)
class DesignResult:
    required_snr_linear: float
    required_samples: int | None = None
    required_power_w: float | None = None
    dynamic_range_db: float | None = None
    assumptions: dict = field(default_factory=dict, compare=False)

    @property
    def required_snr_db(self) -> float:
        return 10 * math.log10(self.required_snr_linear)


def required_snr(spec: DetectionSpec) -> float:
    """(a / (1 - t))^2; ``inf`` for a zero-dB loss."""
    deficit = -math.expm1(-spec.loss_db / 10 * math.log(10))
    if deficit == 0:
        return math.inf
    return (spec.a / deficit) ** 2


def detectable_loss(snr_linear: float, a: float = 3.0) -> float:
    """Smallest detectable transmittance deficit, returned as t = 1 - a/sqrt(snr)."""
    if snr_linear < a * a:
        raise NotDetectableError(f"SNR {snr_linear:.4g} below a^2 = {a * a:.4g}")
    return 1.0 - a / math.sqrt(snr_linear)


def loss_linear_to_db(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return -10 * np.log10(t)


def snr_pp(n_samples: float, gamma_prime, sigma2: float, dz: float, reciprocal_integral: float):
    """Position-wise SNR from the symbol form; ``gamma_prime`` in 1/m."""
    g = np.asarray(gamma_prime, dtype=float)
    return 8 * math.pi * n_samples * dz**2 * g**2 / (sigma2 * reciprocal_integral)


def required_samples(spec: DetectionSpec, gamma_prime: float, sigma2: float, dz: float,
                     reciprocal_integral: float) -> int:
    """N meeting the criterion at a position with the given gamma' (ceil)."""
    if min(gamma_prime, sigma2, dz, reciprocal_integral) <= 0:
        raise ValueError("inputs must be positive")
    n = required_snr(spec) * sigma2 * reciprocal_integral / (8 * math.pi * dz**2 * gamma_prime**2)
    # guard against 1-ulp overshoot turning an exact integer into the next one
    return int(math.ceil(n * (1 - 1e-12)))


def required_power(spec: DetectionSpec, n_samples: float, sigma2: float, dz: float,
                   reciprocal_integral: float, gamma: float) -> float:
    """Local power (W) at which the criterion is met with N samples; gamma in 1/(W m)."""
    if min(n_samples, sigma2, dz, reciprocal_integral, gamma) <= 0:
        raise ValueError("inputs must be positive")
    gp = math.sqrt(required_snr(spec) * sigma2 * reciprocal_integral / (8 * math.pi * n_samples * dz**2))
    return gp / gamma


def dynamic_range(spec: DetectionSpec, n_samples: float, launch_power_w: float, sigma2: float, dz: float,
                  reciprocal_integral: float, gamma: float) -> float:
    """Tolerable span loss (dB) so the event stays detectable at the span end; 0 if none."""
    p_req = required_power(spec, n_samples, sigma2, dz, reciprocal_integral, gamma)
    return max(0.0, 10 * math.log10(launch_power_w / p_req))


def detectable_loss_profile(gamma_prime, n_samples: float, sigma2: float, a: float, dz: float,
                            reciprocal_integral: float) -> np.ndarray:
    """Detectable loss in dB per position; ``nan`` where SNR < a^2."""
    snr = snr_pp(n_samples, gamma_prime, sigma2, dz, reciprocal_integral)
    out = np.full(snr.shape, np.nan)
    ok = snr >= a * a
    out[ok] = loss_linear_to_db(1.0 - a / np.sqrt(snr[ok]))
    return out


def _write(path, columns, rows, header):
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{x:.10g}" for x in row])


def write_snr_curve_csv(path: str | Path, loss_db, a: float, header: dict | None = None) -> None:
    rows = [(l, 10 * math.log10(required_snr(DetectionSpec(l, a)))) for l in loss_db]
    _write(path, ["loss_db", "required_snr_db"], rows, {"a": a, **(header or {})})


def write_samples_curve_csv(path: str | Path, loss_db, n_required, header: dict | None = None) -> None:
    _write(path, ["loss_db", "required_N"], zip(loss_db, n_required), header)


def write_loss_profile_csv(path: str | Path, z_m, loss_db, header: dict | None = None) -> None:
    _write(path, ["z_km", "detectable_loss_db"], zip(np.asarray(z_m) / 1e3, loss_db), header)
