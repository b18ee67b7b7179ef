"""Additive direct-sequence spread spectrum watermarking."""

from __future__ import annotations
from typing import Optional

import math

import numpy as np
import numpy.typing as npt

from .. import errors
from .. import seeding
from ..audio import AudioSignal, FloatArray
from . import _registry
from ._registry import Algorithm, EmbedConfig, Payload


DSSS_CHIPS_PER_BIT = 4096
MIN_BLOCK = 64


def dsss_capacity(cfg: EmbedConfig, cover: AudioSignal) -> int:
    return max(1, len(cover) // DSSS_CHIPS_PER_BIT)


def _block_len(n: int, n_bits: int) -> int:
    if n_bits == 0:
        raise errors.PayloadTooLargeError("dsss needs a non-empty payload")
    block = n // n_bits
    if block < MIN_BLOCK:
        raise errors.PayloadTooLargeError(
            f"{n_bits} bits leave {block} chips per bit, "
            f"at least {MIN_BLOCK} required"
        )
    return block


def pn_chips(cfg: EmbedConfig, n_bits: int, block: int) -> FloatArray:
    """The ±1 chip sequence of every bit, shape (n_bits, block)."""
    gen = seeding.rng(cfg.seed, seeding.CHIPS)
    chips = gen.integers(0, 2, size=(n_bits, block)) * 2 - 1
    return chips.astype(np.float64)


def _alpha(cover: FloatArray, n_marked: int, cfg: EmbedConfig) -> float:
    if cfg.target_snr_db is not None:
        power = float(np.sum(cover**2))
        if power == 0.0:
            raise errors.BadSignalError(
                "cannot reach a target SNR on a silent cover"
            )
        # noise power is alpha^2 per marked sample
        return math.sqrt(power / (n_marked * 10.0 ** (cfg.target_snr_db / 10)))
    if cfg.strength is not None:
        return cfg.strength
    raise errors.NoTargetError("dsss needs either a strength or a target SNR")


def dsss_watermark(
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> FloatArray:
    """Marked samples before clipping and re-quantization."""
    n_bits = len(payload)
    block = _block_len(len(cover), n_bits)
    chips = pn_chips(cfg, n_bits, block)
    symbols = payload.bits.astype(np.float64) * 2.0 - 1.0
    mark = (symbols[:, None] * chips).ravel()

    alpha = _alpha(cover.samples, mark.size, cfg)
    marked = np.array(cover.samples, dtype=np.float64)
    marked[: mark.size] += alpha * mark
    return marked


@_registry.embedder(Algorithm.DSSS, capacity=dsss_capacity)
def dsss_embed(
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> AudioSignal:
    marked = dsss_watermark(cover, payload, cfg)
    _registry.report_clipping(Algorithm.DSSS, marked)
    return AudioSignal.from_samples(
        marked, cover.sample_rate, cover.bit_depth
    )


def dsss_correlations(
    stego: AudioSignal,
    n_bits: int,
    cfg: EmbedConfig,
    *,
    cover: Optional[AudioSignal] = None,
) -> FloatArray:
    block = _block_len(len(stego), n_bits)
    chips = pn_chips(cfg, n_bits, block)
    residual: npt.NDArray[np.float64] = stego.samples
    if cover is not None:
        residual = stego.samples - cover.samples
    blocks = residual[: n_bits * block].reshape(n_bits, block)
    return np.sum(blocks * chips, axis=1)


@_registry.extractor(Algorithm.DSSS)
def dsss_extract(
    stego: AudioSignal,
    n_bits: int,
    cfg: EmbedConfig,
    *,
    cover: Optional[AudioSignal] = None,
) -> Payload:
    corr = dsss_correlations(stego, n_bits, cfg, cover=cover)
    return Payload(corr > 0)
