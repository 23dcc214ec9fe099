"""Multi-span fiber link: ground-truth power profile and split-step propagation.

Field convention: the propagated field keeps unit mean power. Loss and
amplifier gain live entirely in gamma'(z) = gamma(z) P(z), which scales the
Kerr phase.

Frequency convention: A(t) = (1/2pi) int A~(w) exp(jwt) dw, which is numpy's
``ifft``. The linear part dA/dz = j(b2/2) d2A/dt2 + (b3/6) d3A/dt3 then gives
the multiplier exp(-j(b2/2) w^2 dz - j(b3/6) w^3 dz). Every module builds
its CD operators through :func:`cd_multiplier` so the sign cannot drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .signalgen import Waveform, circular_gaussian, make_rng

DB_PER_NEPER_POWER = 10.0 / math.log(10.0)


def dbm_to_w(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def w_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w) / 1e-3)


def ps2_per_km(value: float) -> float:
    """ps^2/km -> s^2/m."""
    return value * 1e-24 / 1e3


def per_w_km(value: float) -> float:
    """W^-1 km^-1 -> W^-1 m^-1."""
    return value / 1e3


def angular_frequency(n: int, dt: float) -> np.ndarray:
    return 2.0 * np.pi * sfft.fftfreq(n, dt)


def cd_multiplier(omega: np.ndarray, b2_acc: float, b3_acc: float = 0.0) -> np.ndarray:
    """All-pass CD response for accumulated dispersion (s^2, s^3)."""
    phase = -(0.5 * b2_acc) * omega**2
    if b3_acc:
        phase = phase - (b3_acc / 6.0) * omega**3
    return np.exp(1j * phase)


@dataclass(frozen=True)
class SpanSpec:
    length_m: float
    alpha_db_per_km: float = 0.2
    beta2_s2_per_m: float = ps2_per_km(-21.0)
    beta3_s3_per_m: float = 0.0
    gamma_per_w_m: float = per_w_km(1.3)
    amp_gain_db: float | None = None  # None: compensate the span loss exactly

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError("span length must be positive")
        if self.alpha_db_per_km < 0:
            raise ValueError("alpha must be nonnegative")
        if self.gamma_per_w_m < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def loss_db(self) -> float:
        return self.alpha_db_per_km * self.length_m / 1e3

    @property
    def gain_db(self) -> float:
        return self.loss_db if self.amp_gain_db is None else self.amp_gain_db

    @property
    def alpha_np_per_m(self) -> float:
        """Power attenuation coefficient in 1/m."""
        return self.alpha_db_per_km / 1e3 / DB_PER_NEPER_POWER


@dataclass(frozen=True)
class DispersionMap:
    """Piecewise-constant beta2/beta3 along z."""

    edges: tuple[float, ...]  # segment boundaries, edges[0] == 0
    beta2: tuple[float, ...]
    beta3: tuple[float, ...]

    @classmethod
    def uniform(cls, length_m: float, beta2: float, beta3: float = 0.0) -> "DispersionMap":
        return cls((0.0, float(length_m)), (float(beta2),), (float(beta3),))

    @property
    def length_m(self) -> float:
        return self.edges[-1]

    def accumulated(self, z0: float, z1: float) -> tuple[float, float]:
        """(int beta2 dz, int beta3 dz) over [z0, z1]; negative if z1 < z0."""
        sign = 1.0
        if z1 < z0:
            z0, z1, sign = z1, z0, -1.0
        b2 = b3 = 0.0
        for a, b, d2, d3 in zip(self.edges[:-1], self.edges[1:], self.beta2, self.beta3):
            lo, hi = max(a, z0), min(b, z1)
            if hi > lo:
                b2 += d2 * (hi - lo)
                b3 += d3 * (hi - lo)
        # beyond the last edge the final segment continues
        if z1 > self.edges[-1]:
            lo = max(z0, self.edges[-1])
            b2 += self.beta2[-1] * (z1 - lo)
            b3 += self.beta3[-1] * (z1 - lo)
        return sign * b2, sign * b3

    def is_monotonic(self) -> bool:
        b = np.asarray(self.beta2)
        return bool(np.all(b > 0) or np.all(b < 0))


@dataclass(frozen=True)
class LinkSpec:
    spans: tuple[SpanSpec, ...]
    launch_power_w: float = dbm_to_w(2.0)
    rx_snr_db: float = 17.0
    lumped_events: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        object.__setattr__(self, "lumped_events", tuple(tuple(e) for e in self.lumped_events))
        if not self.spans:
            raise ValueError("link needs at least one span")
        if self.launch_power_w <= 0:
            raise ValueError("launch power must be positive")
        for pos, loss in self.lumped_events:
            if loss < 0:
                raise ValueError("lumped loss must be >= 0 dB")
            if not 0 <= pos <= self.length_m:
                raise ValueError(f"event at {pos} m lies outside the link")

    @property
    def length_m(self) -> float:
        return float(sum(s.length_m for s in self.spans))

    @property
    def span_edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.length_m for s in self.spans])])

    @property
    def noise_variance(self) -> float:
        return noise_variance(self.rx_snr_db)

    def dispersion_map(self) -> DispersionMap:
        return DispersionMap(
            tuple(float(e) for e in self.span_edges),
            tuple(s.beta2_s2_per_m for s in self.spans),
            tuple(s.beta3_s3_per_m for s in self.spans),
        )

    def with_events(self, events) -> "LinkSpec":
        return replace(self, lumped_events=tuple(events))


def reference_link(
    n_spans: int = 3,
    span_km: float = 50.0,
    launch_dbm: float = 2.0,
    beta2_ps2_km: float = -21.0,
    alpha_db_km: float = 0.2,
    gamma_w_km: float = 1.3,
    rx_snr_db: float = 17.0,
) -> LinkSpec:
    """Multi-span link with identical spans and loss-compensating amplifiers."""
    span = SpanSpec(
        span_km * 1e3,
        alpha_db_km,
        ps2_per_km(beta2_ps2_km),
        0.0,
        per_w_km(gamma_w_km),
    )
    return LinkSpec((span,) * n_spans, dbm_to_w(launch_dbm), rx_snr_db)


def power_at(link: LinkSpec, z) -> np.ndarray:
    """Signal power P(z) in W.

    Amplifiers and lumped events act for z >= their position (right
    continuous), except that the amplifier after the last span is not part
    of the fiber, so P(L) is the pre-amplifier power.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    edges = link.span_edges
    L = edges[-1]
    out = np.empty_like(z)
    for i, zi in enumerate(z):
        if zi < 0 or zi > L * (1 + 1e-12):
            raise ValueError(f"position {zi} m outside the link [0, {L}]")
        k = int(np.searchsorted(edges, zi, side="right") - 1)
        k = min(k, len(link.spans) - 1)
        db = 0.0
        for s in link.spans[:k]:
            db += s.gain_db - s.loss_db
        db -= link.spans[k].alpha_db_per_km * (zi - edges[k]) / 1e3
        db -= sum(loss for pos, loss in link.lumped_events if pos <= zi)
        out[i] = link.launch_power_w * 10.0 ** (db / 10.0)
    return out


def gamma_at(link: LinkSpec, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    edges = link.span_edges
    k = np.clip(np.searchsorted(edges, z, side="right") - 1, 0, len(link.spans) - 1)
    return np.array([link.spans[i].gamma_per_w_m for i in k])


def gamma_prime_at(link: LinkSpec, z) -> np.ndarray:
    return gamma_at(link, z) * power_at(link, z)


@dataclass(frozen=True)
class PowerProfile:
    """gamma'(z_m) on a uniform grid, in 1/m, with optional variance in 1/m^2."""

    z_m: np.ndarray
    values: np.ndarray
    variance: np.ndarray | None = None

    def __post_init__(self):
        z = np.asarray(self.z_m, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if z.shape != v.shape:
            raise ValueError("positions and values differ in length")
        if z.size > 1:
            d = np.diff(z)
            if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
                raise ValueError("positions must be strictly increasing and uniform")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "z_m", z)
        object.__setattr__(self, "values", v)
        if self.variance is not None:
            object.__setattr__(self, "variance", np.asarray(self.variance, dtype=float))

    @property
    def dz(self) -> float:
        return float(self.z_m[1] - self.z_m[0]) if self.z_m.size > 1 else float("nan")

    def __len__(self) -> int:
        return self.values.size


def true_profile(link: LinkSpec, dz_m: float, m_count: int | None = None) -> PowerProfile:
    """gamma'(z_m) at z_m = m * dz, m = 0..M-1 with M = round(L/dz) by default."""
    if dz_m <= 0:
        raise ValueError("dz must be positive")
    L = link.length_m
    M = int(round(L / dz_m)) if m_count is None else int(m_count)
    if M < 1 or (M - 1) * dz_m > L * (1 + 1e-12):
        raise ValueError(f"grid of {M} points at {dz_m} m does not fit a {L} m link")
    z = np.arange(M) * dz_m
    return PowerProfile(z, gamma_prime_at(link, z))


def _snap_events(link: LinkSpec, step_m: float) -> LinkSpec:
    edges = link.span_edges
    snapped = []
    for pos, loss in link.lumped_events:
        k = int(min(np.searchsorted(edges, pos, side="right") - 1, len(link.spans) - 1))
        n = max(1, math.ceil(link.spans[k].length_m / step_m - 1e-9))
        h = link.spans[k].length_m / n
        snapped.append((edges[k] + round((pos - edges[k]) / h) * h, loss))
    return link.with_events(snapped)


def kick_schedule(link: LinkSpec, step_m: float) -> tuple[np.ndarray, np.ndarray]:
    """Positions and integrated strengths of the symmetric split-step kicks.

    Each span is cut into equal steps no longer than ``step_m``; the Kerr
    kick of a step sits at its midpoint with strength gamma'(mid) * h.
    """
    if step_m <= 0:
        raise ValueError("step must be positive")
    if step_m > min(s.length_m for s in link.spans) * (1 + 1e-12):
        raise ValueError("step larger than the shortest span")
    link = _snap_events(link, step_m)
    edges = link.span_edges
    zs, hs = [], []
    for k, s in enumerate(link.spans):
        n = max(1, math.ceil(s.length_m / step_m - 1e-9))
        h = s.length_m / n
        zs.append(edges[k] + (np.arange(n) + 0.5) * h)
        hs.append(np.full(n, h))
    z = np.concatenate(zs)
    strengths = gamma_prime_at(link, z) * np.concatenate(hs)
    return z, strengths


def split_step(
    field: np.ndarray,
    dt: float,
    dispersion: DispersionMap,
    kick_z: np.ndarray,
    kick_strength: np.ndarray,
    length_m: float,
) -> np.ndarray:
    """Linear propagation between lumped Kerr kicks exp(-j s |A|^2).

    With kicks at step midpoints this is the symmetric (Strang) split-step
    scheme; arbitrary kick layouts are allowed for perturbation checks.
    """
    omega = angular_frequency(field.size, dt)
    spec = sfft.fft(field)
    z_prev = 0.0
    cache: dict[tuple[float, float], np.ndarray] = {}
    for z, s in zip(kick_z, kick_strength):
        b = dispersion.accumulated(z_prev, z)
        mult = cache.get(b)
        if mult is None:
            mult = cache[b] = cd_multiplier(omega, *b)
        u = sfft.ifft(spec * mult)
        if s != 0.0:
            u *= np.exp(-1j * s * (u.real**2 + u.imag**2))
        spec = sfft.fft(u)
        z_prev = z
    spec *= cd_multiplier(omega, *dispersion.accumulated(z_prev, length_m))
    out = sfft.ifft(spec)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite field after split-step propagation")
    return out


def propagate(tx: Waveform, link: LinkSpec, step_m: float = 100.0) -> Waveform:
    """Field at z = L by symmetric split-step Fourier integration."""
    z, s = kick_schedule(link, step_m)
    out = split_step(tx.samples, tx.dt, link.dispersion_map(), z, s, link.length_m)
    return Waveform(out, tx.sample_rate_hz, tx.origin_z_m + link.length_m, dict(tx.meta))


def mean_nonlinear_phase(link: LinkSpec, step_m: float = 100.0) -> float:
    """Common phase removed by the -2P term of the model, 2 * int gamma' dz (P = 1)."""
    _, s = kick_schedule(link, step_m)
    return 2.0 * float(np.sum(s))


def noise_variance(snr_db: float) -> float:
    """Per-sample noise power for a unit-power signal at ``snr_db``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def add_rx_noise(rx: Waveform, snr_db: float, seed: int, trial: int = 0) -> Waveform:
    """Add circular white Gaussian noise over the full sampling bandwidth."""
    if math.isinf(snr_db) and snr_db > 0:
        return rx
    sigma2 = rx.mean_power / 10.0 ** (snr_db / 10.0)
    rng = make_rng(seed, "rx-noise", trial)
    return rx.replace(rx.samples + circular_gaussian(rng, rx.n_samples, sigma2))
