"""Transmitted baseband waveforms.

All formats are synthesized in the frequency domain (shape the spectrum,
inverse DFT), then scaled to unit mean power.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

MIN_SAMPLES = 64
WAVEFORM_MAGIC = b"LPMW"
WAVEFORM_VERSION = 1
_HEADER = struct.Struct("<4sIQd")


class SignalFormat(str, enum.Enum):
    GAUSS_RECT = "GaussRect"
    GAUSS_SPECTRUM = "GaussSpectrum"
    QPSK = "QPSK"
    QAM16 = "QAM16"


@dataclass(frozen=True)
class SignalSpec:
    format: SignalFormat
    n_samples: int
    sample_rate_hz: float
    bandwidth_hz: float | None = None
    sigma_omega_rad_s: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "format", SignalFormat(self.format))
        if self.n_samples < MIN_SAMPLES:
            raise ValueError(f"n_samples must be >= {MIN_SAMPLES}, got {self.n_samples}")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.format is SignalFormat.GAUSS_SPECTRUM:
            if self.sigma_omega_rad_s is None or self.sigma_omega_rad_s <= 0:
                raise ValueError("GaussSpectrum needs a positive sigma_omega_rad_s")
        else:
            if self.bandwidth_hz is None or self.bandwidth_hz <= 0:
                raise ValueError(f"{self.format.value} needs a positive bandwidth_hz")
            if self.sample_rate_hz < self.bandwidth_hz * (1 - 1e-12):
                raise ValueError(
                    f"sample rate {self.sample_rate_hz:g} Hz below bandwidth "
                    f"{self.bandwidth_hz:g} Hz"
                )

    @property
    def samples_per_symbol(self) -> float:
        return self.sample_rate_hz / self.bandwidth_hz


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled complex baseband field (read-only samples)."""

    samples: np.ndarray
    sample_rate_hz: float
    origin_z_m: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def replace(self, samples=None, origin_z_m=None) -> "Waveform":
        return Waveform(
            self.samples if samples is None else samples,
            self.sample_rate_hz,
            self.origin_z_m if origin_z_m is None else origin_z_m,
            dict(self.meta),
        )


def purpose_tag(name: str) -> int:
    return zlib.crc32(name.encode())


def make_rng(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Independent generator for (seed, purpose, index...).

    Streams for different purposes or trial indices never overlap, which keeps
    Monte Carlo runs reproducible regardless of execution order.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, purpose_tag(purpose), *index])
    return np.random.Generator(np.random.Philox(ss))


def circular_gaussian(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape)


def _normalize(x: np.ndarray) -> np.ndarray:
    p = np.mean(np.abs(x) ** 2)
    if p == 0:
        return x
    x = x / np.sqrt(p)
    # second pass removes the last ulp-level drift
    return x / np.sqrt(np.mean(np.abs(x) ** 2))


def _constellation(fmt: SignalFormat) -> np.ndarray:
    if fmt is SignalFormat.QPSK:
        pts = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    else:
        lv = np.array([-3, -1, 1, 3])
        pts = (lv[:, None] + 1j * lv[None, :]).ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def _sinc_interpolate(symbols: np.ndarray, n_out: int) -> np.ndarray:
    """Periodic brick-wall interpolation of a symbol sequence onto n_out samples."""
    ns = symbols.size
    if n_out == ns:
        return symbols.astype(np.complex128)
    spec = sfft.fft(symbols)
    out = np.zeros(n_out, dtype=np.complex128)
    half = ns // 2
    if ns % 2:
        out[: half + 1] = spec[: half + 1]
        out[-half:] = spec[-half:]
    else:
        out[:half] = spec[:half]
        if half > 1:
            out[-(half - 1) :] = spec[-(half - 1) :]
        # split the Nyquist bin so the interpolant stays real-symmetric
        out[half] += 0.5 * spec[half]
        out[-half] += 0.5 * spec[half]
    return sfft.ifft(out) * (n_out / ns)


def generate(spec: SignalSpec) -> Waveform:
    """Draw one waveform; deterministic in ``spec.seed``."""
    n = spec.n_samples
    fs = spec.sample_rate_hz
    freqs = sfft.fftfreq(n, 1.0 / fs)
    rng = make_rng(spec.seed, f"signal/{spec.format.value}")

    if spec.format is SignalFormat.GAUSS_RECT:
        bins = circular_gaussian(rng, n)
        if fs > spec.bandwidth_hz * (1 + 1e-12):
            bins[np.abs(freqs) > spec.bandwidth_hz / 2] = 0.0
        x = sfft.ifft(bins)
    elif spec.format is SignalFormat.GAUSS_SPECTRUM:
        omega = 2 * np.pi * freqs
        psd = np.exp(-(omega**2) / (2 * spec.sigma_omega_rad_s**2))
        x = sfft.ifft(circular_gaussian(rng, n) * np.sqrt(psd))
    else:
        n_sym = n * spec.bandwidth_hz / fs
        if abs(n_sym - round(n_sym)) > 1e-9:
            raise ValueError("n_samples * bandwidth / sample_rate must be an integer")
        pts = _constellation(spec.format)
        symbols = pts[rng.integers(0, pts.size, int(round(n_sym)))]
        x = _sinc_interpolate(symbols, n)

    return Waveform(
        _normalize(x),
        fs,
        0.0,
        {"format": spec.format.value, "seed": spec.seed},
    )


def psd_estimate(w: Waveform, n_segments: int) -> tuple[np.ndarray, np.ndarray]:
    """Welch-averaged periodogram, two-sided and fftshifted.

    Returns ``(freq_hz, density)`` with density in power per Hz so that
    ``sum(density) * df`` equals the mean power of the waveform.
    """
    if n_segments < 4:
        raise ValueError("need at least 4 segments")
    seg = w.n_samples // n_segments
    if seg < 16:
        raise ValueError("waveform too short for the requested segment count")
    x = w.samples[: seg * n_segments].reshape(n_segments, seg)
    # rectangular window: exact band edges of brick-wall signals stay sharp
    per = np.mean(np.abs(sfft.fft(x, axis=1)) ** 2, axis=0) / (seg * w.sample_rate_hz)
    f = sfft.fftshift(sfft.fftfreq(seg, w.dt))
    return f, sfft.fftshift(per)


def write_waveform(path: str | Path, w: Waveform) -> None:
    data = np.empty(2 * w.n_samples, dtype="<f8")
    data[0::2] = w.samples.real
    data[1::2] = w.samples.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(WAVEFORM_MAGIC, WAVEFORM_VERSION, w.n_samples, w.sample_rate_hz))
        fh.write(data.tobytes())


def read_waveform(path: str | Path) -> Waveform:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, count, fs = _HEADER.unpack_from(raw)
    if magic != WAVEFORM_MAGIC or version != WAVEFORM_VERSION:
        raise ValueError(f"{path}: not an LPMW v{WAVEFORM_VERSION} file")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * count:
        raise ValueError(f"{path}: expected {count} samples, found {data.size // 2}")
    return Waveform(data[0::2] + 1j * data[1::2], fs)
