"""Multiplicative spread-spectrum watermarking in the DCT domain."""

from __future__ import annotations

import numpy as np
import numpy.typing as npt
import scipy.fft

from .. import errors
from .. import seeding
from ..audio import AudioSignal, FloatArray
from . import _registry
from ._registry import Algorithm, EmbedConfig, Payload


COX_N_COEFFS = 1000


def cox_capacity(cfg: EmbedConfig, cover: AudioSignal) -> int:
    return COX_N_COEFFS


def _strength(cfg: EmbedConfig) -> float:
    if cfg.strength is None:
        return _registry.DEFAULT_COX_STRENGTH
    return cfg.strength


def perceptual_indices(
    coeffs: FloatArray, n_coeffs: int = COX_N_COEFFS
) -> npt.NDArray[np.intp]:
    """Indices of the ``n_coeffs`` largest-magnitude AC coefficients."""
    order = np.argsort(-np.abs(coeffs[1:]), kind="stable")
    return order[:n_coeffs] + 1


def cox_mark(
    cfg: EmbedConfig,
    payload: Payload,
    n_coeffs: int = COX_N_COEFFS,
) -> FloatArray:
    z = seeding.rng(cfg.seed, seeding.COX).standard_normal(n_coeffs)
    if not len(payload):
        return z
    # payload bits pick the sign; shorter payloads repeat
    signs = np.resize(payload.bits, n_coeffs).astype(np.float64) * 2.0 - 1.0
    return np.abs(z) * signs


def _check(cover: AudioSignal, payload: Payload) -> None:
    if len(cover) < 2 * COX_N_COEFFS:
        raise errors.SignalTooShortError(
            f"cox needs at least {2 * COX_N_COEFFS} samples, "
            f"got {len(cover)}"
        )
    if len(payload) > COX_N_COEFFS:
        raise errors.PayloadTooLargeError(
            f"cox carries at most {COX_N_COEFFS} bits, got {len(payload)}"
        )


def cox_watermark(
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> FloatArray:
    """Marked samples before clipping and re-quantization."""
    _check(cover, payload)
    v = scipy.fft.dct(cover.samples, type=2, norm="ortho")
    idx = perceptual_indices(v)
    marked = v.copy()
    marked[idx] = v[idx] * (1.0 + _strength(cfg) * cox_mark(cfg, payload))
    return np.asarray(
        scipy.fft.idct(marked, type=2, norm="ortho"), dtype=np.float64
    )


@_registry.embedder(Algorithm.COX, capacity=cox_capacity)
def cox_embed(
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> AudioSignal:
    marked = cox_watermark(cover, payload, cfg)
    _registry.report_clipping(Algorithm.COX, marked)
    return AudioSignal.from_samples(
        marked, cover.sample_rate, cover.bit_depth
    )


def cox_similarity(
    stego: AudioSignal,
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> float:
    """Normalized correlation of the recovered and the expected mark."""
    alpha = _strength(cfg)
    if alpha == 0.0:
        return 0.0
    v_cover = scipy.fft.dct(cover.samples, type=2, norm="ortho")
    v_stego = scipy.fft.dct(stego.samples, type=2, norm="ortho")
    idx = perceptual_indices(v_cover)
    base = v_cover[idx]
    nonzero = base != 0.0
    recovered = np.zeros(idx.size)
    recovered[nonzero] = (v_stego[idx][nonzero] - base[nonzero]) / (
        alpha * base[nonzero]
    )
    norm = float(np.sqrt(recovered @ recovered))
    if norm == 0.0:
        return 0.0
    return float(recovered @ cox_mark(cfg, payload)) / norm
