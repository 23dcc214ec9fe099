"""First-order regular-perturbation model y ~ G gamma' + noise.

Columns are generated in the frequency domain::

    g_m = -j dz D(z_m -> L) N~[D(0 -> z_m) A(0)],   N~[u] = (|u|^2 - 2) u

and the normal equations are accumulated panel by panel so the full N x M
matrix is never held in memory for large N.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .fiberlink import DispersionMap, angular_frequency, cd_multiplier
from .signalgen import Waveform

MAX_POSITIONS = 10_000
MIN_BLOCK = 1 << 14
NE_MAGIC = b"LPMN"
NE_VERSION = 1
_NE_HEADER = struct.Struct("<4sIQQQd")
DEFAULT_PANEL_BYTES = 256 * 2**20


@dataclass(frozen=True)
class MonitorGrid:
    dz_m: float
    m_count: int

    def __post_init__(self):
        if self.dz_m <= 0:
            raise ValueError("dz must be positive")
        if self.m_count < 1:
            raise ValueError("need at least one monitor position")

    @classmethod
    def for_length(cls, length_m: float, dz_m: float) -> "MonitorGrid":
        return cls(dz_m, max(1, int(round(length_m / dz_m))))

    @property
    def z_positions(self) -> np.ndarray:
        return np.arange(self.m_count) * self.dz_m


def cd_operator(
    from_z: float,
    to_z: float,
    dispersion: DispersionMap,
    n: int,
    dt: float,
) -> np.ndarray:
    """Frequency-domain multiplier of D(from_z -> to_z) (FFT bin order)."""
    if to_z < from_z:
        raise ValueError("cd_operator expects from_z <= to_z")
    if from_z == to_z:
        return np.ones(n, dtype=np.complex128)
    return cd_multiplier(angular_frequency(n, dt), *dispersion.accumulated(from_z, to_z))


def nonlinear_excitation(u: np.ndarray, power: float = 1.0) -> np.ndarray:
    return (u.real**2 + u.imag**2 - 2.0 * power) * u


class ModelOperator:
    """Column generator for G given A(0), a monitor grid and the CD map.

    Immutable after construction; safe to share between threads.
    """

    def __init__(
        self,
        tx: Waveform,
        grid: MonitorGrid,
        dispersion: DispersionMap,
        length_m: float | None = None,
    ):
        self.tx = tx
        self.grid = grid
        self.dispersion = dispersion
        self.length_m = dispersion.length_m if length_m is None else float(length_m)
        if (grid.m_count - 1) * grid.dz_m > self.length_m * (1 + 1e-12):
            raise ValueError("monitor grid extends beyond the link")
        self.n_samples = tx.n_samples
        self.dt = tx.dt
        self._omega = angular_frequency(self.n_samples, self.dt)
        self._tx_spec = sfft.fft(tx.samples)
        self._tx_spec.setflags(write=False)

    @property
    def m_count(self) -> int:
        return self.grid.m_count

    @property
    def dz(self) -> float:
        return self.grid.dz_m

    @property
    def normalization(self) -> float:
        """sqrt(2N) dz, with H = G / normalization."""
        return float(np.sqrt(2.0 * self.n_samples) * self.dz)

    def _mult(self, z0: float, z1: float) -> np.ndarray:
        return cd_multiplier(self._omega, *self.dispersion.accumulated(z0, z1))

    def linear_output(self) -> np.ndarray:
        """A0(L) = D(0 -> L) A(0) in the time domain."""
        return sfft.ifft(self._tx_spec * self._mult(0.0, self.length_m))

    def freq_columns(self, ms) -> np.ndarray:
        """DFT of columns g_m for the given indices, shape (N, len(ms))."""
        ms = np.atleast_1d(ms)
        out = np.empty((self.n_samples, ms.size), dtype=np.complex128)
        z = self.grid.z_positions
        for j, m in enumerate(ms):
            if not 0 <= m < self.m_count:
                raise IndexError(f"column {m} outside 0..{self.m_count - 1}")
            u = sfft.ifft(self._tx_spec * self._mult(0.0, z[m]))
            spec = sfft.fft(nonlinear_excitation(u))
            out[:, j] = (-1j * self.dz) * spec * self._mult(z[m], self.length_m)
        return out

    def column(self, m: int) -> np.ndarray:
        """g_m in the time domain."""
        return sfft.ifft(self.freq_columns([m])[:, 0])

    def dense(self) -> np.ndarray:
        """Full G (N x M); only for small problems and tests."""
        return sfft.ifft(self.freq_columns(np.arange(self.m_count)), axis=0)


def observation(
    tx: Waveform,
    rx: Waveform,
    dispersion: DispersionMap,
    length_m: float | None = None,
    phase_rad: float = 0.0,
) -> np.ndarray:
    """y = rx * exp(j phase) - D(0 -> L) tx.

    ``phase_rad`` undoes the common nonlinear phase rotation that the -2P
    term of the model excludes; see ``fiberlink.mean_nonlinear_phase``.
    """
    if tx.n_samples != rx.n_samples:
        raise ValueError(f"length mismatch: tx {tx.n_samples}, rx {rx.n_samples}")
    if not np.isclose(tx.sample_rate_hz, rx.sample_rate_hz, rtol=1e-12):
        raise ValueError("tx and rx sample rates differ")
    L = dispersion.length_m if length_m is None else length_m
    omega = angular_frequency(tx.n_samples, tx.dt)
    a0 = sfft.ifft(sfft.fft(tx.samples) * cd_multiplier(omega, *dispersion.accumulated(0.0, L)))
    r = rx.samples if phase_rad == 0.0 else rx.samples * np.exp(1j * phase_rad)
    return r - a0


def estimate_common_phase(tx: Waveform, rx: Waveform, dispersion: DispersionMap) -> float:
    """Data-aided phase that rotates rx onto A0(L) (least squares)."""
    omega = angular_frequency(tx.n_samples, tx.dt)
    a0 = sfft.ifft(sfft.fft(tx.samples) * cd_multiplier(omega, *dispersion.accumulated(0.0, dispersion.length_m)))
    return -float(np.angle(np.vdot(a0, rx.samples)))


@dataclass(frozen=True, eq=False)
class NormalEquations:
    """G^H G (complex, kept for SCF analysis) and Re[G^H y].

    ``re_proj`` is (M,) for one observation or (M, T) for T observations
    sharing the same model.
    """

    gram: np.ndarray
    re_proj: np.ndarray | None
    n_samples: int
    dz: float

    @property
    def m_count(self) -> int:
        return self.gram.shape[0]

    @property
    def re_gram(self) -> np.ndarray:
        return self.gram.real

    @property
    def normalized_gram(self) -> np.ndarray:
        """H^H H with H = G / (sqrt(2N) dz)."""
        return self.gram / (2.0 * self.n_samples * self.dz**2)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.re_gram)[0])

    def with_proj(self, re_proj) -> "NormalEquations":
        return NormalEquations(self.gram, re_proj, self.n_samples, self.dz)


def accumulate_normal_equations(
    op: ModelOperator,
    y: np.ndarray | None = None,
    block_size: int = 1 << 16,
    panel_bytes: int = DEFAULT_PANEL_BYTES,
) -> NormalEquations:
    """Stream G^H G and Re[G^H y] without materializing G.

    Columns are produced in panels whose size fits ``panel_bytes``; every
    panel pair is reduced over frequency-bin blocks of ``block_size`` in a
    fixed order, so the result depends on ``block_size`` only through
    floating-point reassociation.
    """
    M, N = op.m_count, op.n_samples
    if M > MAX_POSITIONS:
        raise MemoryError(f"M={M} exceeds {MAX_POSITIONS}; Gram matrix too large")
    if block_size < MIN_BLOCK and block_size < N:
        raise ValueError(f"block_size must be >= {MIN_BLOCK}")
    yf = None
    if y is not None:
        y = np.asarray(y)
        if y.shape[0] != N:
            raise ValueError(f"observation has {y.shape[0]} samples, model has {N}")
        yf = sfft.fft(y, axis=0)
        yf = yf[:, None] if yf.ndim == 1 else yf

    k = int(max(1, min(M, panel_bytes // (16 * N))))
    panels = [np.arange(i, min(M, i + k)) for i in range(0, M, k)]
    gram = np.zeros((M, M), dtype=np.complex128)
    proj = None if yf is None else np.zeros((M, yf.shape[1]))
    blocks = [slice(b, min(N, b + block_size)) for b in range(0, N, block_size)]

    for a, pa in enumerate(panels):
        ca = op.freq_columns(pa)
        for b in range(a, len(panels)):
            pb = panels[b]
            cb = ca if b == a else op.freq_columns(pb)
            acc = np.zeros((pa.size, pb.size), dtype=np.complex128)
            for blk in blocks:
                acc += ca[blk].conj().T @ cb[blk]
            gram[pa[0] : pa[-1] + 1, pb[0] : pb[-1] + 1] = acc / N
            if b != a:
                gram[pb[0] : pb[-1] + 1, pa[0] : pa[-1] + 1] = acc.conj().T / N
            del cb
        if yf is not None:
            acc = np.zeros((pa.size, yf.shape[1]), dtype=np.complex128)
            for blk in blocks:
                acc += ca[blk].conj().T @ yf[blk]
            proj[pa[0] : pa[-1] + 1] = (acc / N).real
        del ca

    gram = 0.5 * (gram + gram.conj().T)
    if proj is not None and y.ndim == 1:
        proj = proj[:, 0]
    return NormalEquations(gram, proj, N, op.dz)


def project(op: ModelOperator, y: np.ndarray, block_size: int = 1 << 16,
            panel_bytes: int = DEFAULT_PANEL_BYTES) -> np.ndarray:
    """Re[G^H y] alone; y may be (N,) or (N, T)."""
    y = np.asarray(y)
    N, M = op.n_samples, op.m_count
    yf = sfft.fft(y, axis=0)
    yf2 = yf[:, None] if yf.ndim == 1 else yf
    k = int(max(1, min(M, panel_bytes // (16 * N))))
    out = np.zeros((M, yf2.shape[1]))
    for i in range(0, M, k):
        pa = np.arange(i, min(M, i + k))
        ca = op.freq_columns(pa)
        acc = np.zeros((pa.size, yf2.shape[1]), dtype=np.complex128)
        for b in range(0, N, block_size):
            acc += ca[b : b + block_size].conj().T @ yf2[b : b + block_size]
        out[pa] = (acc / N).real
    return out[:, 0] if y.ndim == 1 else out


def write_normal_equations(path: str | Path, ne: NormalEquations) -> None:
    proj = np.zeros((ne.m_count, 0)) if ne.re_proj is None else np.asarray(ne.re_proj).reshape(ne.m_count, -1)
    with open(path, "wb") as fh:
        fh.write(_NE_HEADER.pack(NE_MAGIC, NE_VERSION, ne.m_count, ne.n_samples, proj.shape[1], ne.dz))
        fh.write(np.ascontiguousarray(ne.gram.real, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ne.gram.imag, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(proj, dtype="<f8").tobytes())


def read_normal_equations(path: str | Path) -> NormalEquations:
    raw = Path(path).read_bytes()
    magic, version, M, N, T, dz = _NE_HEADER.unpack_from(raw)
    if magic != NE_MAGIC or version != NE_VERSION:
        raise ValueError(f"{path}: not an LPMN v{NE_VERSION} file")
    data = np.frombuffer(raw, dtype="<f8", offset=_NE_HEADER.size)
    if data.size != 2 * M * M + M * T:
        raise ValueError(f"{path}: payload size mismatch")
    re = data[: M * M].reshape(M, M)
    im = data[M * M : 2 * M * M].reshape(M, M)
    proj = data[2 * M * M :].reshape(M, T)
    proj = None if T == 0 else (proj[:, 0].copy() if T == 1 else proj.copy())
    return NormalEquations(re + 1j * im, proj, int(N), float(dz))
