"""Reversed-Mel cepstrum.

The R-Mel scale mirrors the Mel scale around the Nyquist frequency, so the
filterbank is dense at high frequencies, where hidden data lives, and coarse
where hearing is most sensitive.  Coefficients come from the usual
window → power spectrum → filterbank → log → DCT-II chain on that axis.
"""

from __future__ import annotations
from typing import (
    Literal,
    NamedTuple,
)

import csv
import functools

import numpy as np
import numpy.typing as npt
import scipy.fft

from . import audio
from . import errors
from .audio import AudioSignal, FloatArray, Frame, PathLike


N_FILTERS = 30
N_RMFCC = 29
N_FFT = audio.FRAME_LEN
LOG_FLOOR = 1e-10
DEGENERATE_VARIANCE = 1e-12

RMEL_FACTOR = 1127.0
RMEL_BREAK_HZ = 700.0

STATISTICS = ("mean", "std", "skew", "kurt")

PipelineOrder = Literal["normalize-first", "derivative-first"]


def _check_band(f: FloatArray, fs: float) -> None:
    if fs <= 0:
        raise errors.OutOfBandError(f"sampling rate must be positive: {fs}")
    tol = 1e-9 * fs
    if np.any(f < -tol) or np.any(f > 0.5 * fs + tol):
        raise errors.OutOfBandError(
            f"frequency outside [0, {0.5 * fs}] Hz"
        )


def rmel_of_hz(f: npt.ArrayLike, fs: float) -> npt.NDArray[np.float64]:
    hz = np.asarray(f, dtype=np.float64)
    _check_band(hz, fs)
    return RMEL_FACTOR * np.log1p((0.5 * fs - hz) / RMEL_BREAK_HZ)


def hz_of_rmel(r: npt.ArrayLike, fs: float) -> npt.NDArray[np.float64]:
    rmel = np.asarray(r, dtype=np.float64)
    top = float(rmel_of_hz(0.0, fs))
    tol = 1e-9 * max(top, 1.0)
    if np.any(rmel < -tol) or np.any(rmel > top + tol):
        raise errors.OutOfBandError(f"R-Mel value outside [0, {top}]")
    return 0.5 * fs - RMEL_BREAK_HZ * np.expm1(rmel / RMEL_FACTOR)


def mel_of_hz(f: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return RMEL_FACTOR * np.log1p(np.asarray(f, dtype=np.float64) / 700.0)


def scale_table(fs: float, n_points: int = 512) -> npt.NDArray[np.float64]:
    """Rows of (hz, mel, rmel) over [0, fs/2]."""
    if n_points < 2:
        raise errors.BadConfigError("a scale table needs at least 2 points")
    hz = np.linspace(0.0, 0.5 * fs, n_points)
    return np.column_stack([hz, mel_of_hz(hz), rmel_of_hz(hz, fs)])


class RMelFilterbank:
    def __init__(
        self,
        sample_rate: float,
        n_fft: int,
        n_filters: int,
        edges_hz: FloatArray,
        weights: FloatArray,
    ) -> None:
        self._sample_rate = float(sample_rate)
        self._n_fft = n_fft
        self._n_filters = n_filters
        self._edges_hz = edges_hz
        self._weights = weights
        edges_hz.setflags(write=False)
        weights.setflags(write=False)

    @property
    def sample_rate(self) -> float:
        return self._sample_rate

    @property
    def n_fft(self) -> int:
        return self._n_fft

    @property
    def n_filters(self) -> int:
        return self._n_filters

    @property
    def edges_hz(self) -> FloatArray:
        """Filter boundary points in ascending Hz, n_filters + 2 of them."""
        return self._edges_hz

    @property
    def centers_hz(self) -> FloatArray:
        return self._edges_hz[1:-1]

    @property
    def widths_hz(self) -> FloatArray:
        return self._edges_hz[2:] - self._edges_hz[:-2]

    @property
    def weights(self) -> FloatArray:
        """(n_filters, n_fft // 2 + 1) triangular weights."""
        return self._weights

    def __repr__(self) -> str:
        return (
            f"RMelFilterbank(sample_rate={self._sample_rate}, "
            f"n_fft={self._n_fft}, n_filters={self._n_filters})"
        )


def build_filterbank(
    fs: float,
    n_fft: int = N_FFT,
    n_filters: int = N_FILTERS,
) -> RMelFilterbank:
    if n_filters < 2:
        raise errors.BadConfigError(
            f"filterbank needs at least 2 filters, got {n_filters}"
        )
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise errors.BadConfigError(f"n_fft must be a power of two: {n_fft}")
    if fs <= 0:
        raise errors.BadConfigError(f"sampling rate must be positive: {fs}")

    top = float(rmel_of_hz(0.0, fs))
    # equally spaced on the R-Mel axis; R-Mel decreases with Hz
    edges = np.sort(hz_of_rmel(np.linspace(0.0, top, n_filters + 2), fs))
    edges[0], edges[-1] = 0.0, 0.5 * fs

    freqs = np.linspace(0.0, 0.5 * fs, n_fft // 2 + 1)
    lo = edges[:-2, None]
    mid = edges[1:-1, None]
    hi = edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    weights = np.clip(np.minimum(rising, falling), 0.0, 1.0)

    return RMelFilterbank(fs, n_fft, n_filters, edges, weights)


@functools.lru_cache
def _hamming(n: int) -> FloatArray:
    window = np.hamming(n)
    window.setflags(write=False)
    return window


def _check_bank(bank: RMelFilterbank, frame_len: int) -> None:
    if frame_len != bank.n_fft:
        raise errors.BankMismatchError(
            f"frame has {frame_len} samples, filterbank expects {bank.n_fft}"
        )
    if bank.n_filters <= N_RMFCC:
        raise errors.BankMismatchError(
            f"{N_RMFCC} coefficients need more than {N_RMFCC} filters, "
            f"bank has {bank.n_filters}"
        )


def _cepstra(frames: FloatArray, bank: RMelFilterbank) -> FloatArray:
    spectrum = np.fft.rfft(frames * _hamming(bank.n_fft), axis=-1)
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ bank.weights.T
    log_energies = np.log(energies + LOG_FLOOR)
    # an offset only moves coefficient 0; removing one keeps flat rows at 0
    log_energies = log_energies - log_energies.min(axis=-1, keepdims=True)
    cepstrum = scipy.fft.dct(log_energies, type=2, norm="ortho", axis=-1)
    # coefficient 0 carries frame loudness only
    return np.asarray(cepstrum[..., 1 : N_RMFCC + 1], dtype=np.float64)


def rmfcc_frame(
    frame: Frame | npt.ArrayLike,
    bank: RMelFilterbank,
) -> FloatArray:
    values = frame.values if isinstance(frame, Frame) else frame
    x = np.asarray(values, dtype=np.float64)
    _check_bank(bank, x.size)
    return _cepstra(x, bank)


class RmfccMatrix(NamedTuple):
    values: FloatArray
    source_id: str

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[0])


def preprocess(
    x: npt.ArrayLike,
    order: PipelineOrder = "normalize-first",
) -> FloatArray:
    if order == "normalize-first":
        return audio.second_derivative(audio.peak_normalize(x))
    elif order == "derivative-first":
        return audio.peak_normalize(audio.second_derivative(x))
    else:
        raise errors.BadConfigError(f"unknown pipeline order: {order!r}")


def rmfcc_signal(
    x: AudioSignal,
    bank: RMelFilterbank,
    *,
    source_id: str = "",
    order: PipelineOrder = "normalize-first",
) -> RmfccMatrix:
    if len(x) < bank.n_fft + 2:
        raise errors.SignalTooShortError(
            f"{source_id or 'signal'} has {len(x)} samples, "
            f"at least {bank.n_fft + 2} needed for one frame"
        )
    _check_bank(bank, bank.n_fft)
    frames = audio.frame_matrix(
        preprocess(x.samples, order), bank.n_fft, bank.n_fft // 2
    )
    return RmfccMatrix(_cepstra(frames, bank), source_id)


class HosStats(NamedTuple):
    mean: FloatArray
    std: FloatArray
    skewness: FloatArray
    kurtosis: FloatArray

    def flatten(self) -> FloatArray:
        return np.concatenate(
            [self.mean, self.std, self.skewness, self.kurtosis]
        )


def hos_stats(m: RmfccMatrix | npt.ArrayLike) -> HosStats:
    values = m.values if isinstance(m, RmfccMatrix) else m
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise errors.TooFewFramesError(
            "higher-order statistics need at least 2 frames"
        )

    mean = x.mean(axis=0)
    centered = x - mean
    m2 = np.mean(centered**2, axis=0)
    m3 = np.mean(centered**3, axis=0)
    m4 = np.mean(centered**4, axis=0)

    flat = m2 < DEGENERATE_VARIANCE
    safe = np.where(flat, 1.0, m2)
    skewness = np.where(flat, 0.0, m3 / safe**1.5)
    kurtosis = np.where(flat, 0.0, m4 / safe**2)

    return HosStats(mean, np.sqrt(m2), skewness, kurtosis)


def feature_names(n_coeffs: int = N_RMFCC) -> list[str]:
    return [f"{s}_{i}" for s in STATISTICS for i in range(1, n_coeffs + 1)]


def write_rmfcc_csv(m: RmfccMatrix, path: PathLike) -> None:
    header = ["frame"] + [f"c_{i}" for i in range(1, m.values.shape[1] + 1)]
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for i, row in enumerate(m.values):
                writer.writerow([i] + [repr(float(v)) for v in row])
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


def write_hos_csv(stats: HosStats, path: PathLike) -> None:
    n = stats.mean.size
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(
                ["statistic"] + [f"c_{i}" for i in range(1, n + 1)]
            )
            for name, values in zip(STATISTICS, stats):
                writer.writerow([name] + [repr(float(v)) for v in values])
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


@functools.lru_cache
def cached_filterbank(
    fs: float,
    n_fft: int = N_FFT,
    n_filters: int = N_FILTERS,
) -> RMelFilterbank:
    return build_filterbank(fs, n_fft, n_filters)


def write_scale_csv(fs: float, n_points: int, path: PathLike) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["hz", "mel", "rmel"])
            for row in scale_table(fs, n_points):
                writer.writerow([repr(float(v)) for v in row])
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None
