"""Bit-plane embedders: k-LSB replacement and ±1 LSB matching.

Capacity mapping on a 16-bit carrier: 25/12.5/6.25 % BPB is 4/2/1 bits in
every sample, 3.125/1.56/0.78 % BPB is 1 bit in every 2nd/4th/8th sample.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from .. import errors
from .. import seeding
from .._logging import logger
from ..audio import AudioSignal, pcm_range
from . import _registry
from ._registry import Algorithm, EmbedConfig, Payload


def lsb_layout(cfg: EmbedConfig, bit_depth: int) -> tuple[int, int]:
    """Return (bits per carrier sample, carrier stride) for ``cfg``."""
    assert cfg.capacity_bpb is not None
    per_sample = cfg.capacity_bpb * bit_depth / 100.0
    if per_sample >= 1.0 - 1e-9:
        k = min(max(int(round(per_sample)), 1), bit_depth)
        return k, 1
    return 1, max(1, int(round(1.0 / per_sample)))


def _carriers(n: int, stride: int) -> int:
    return math.ceil(n / stride)


def lsb_replace_capacity(cfg: EmbedConfig, cover: AudioSignal) -> int:
    k, stride = lsb_layout(cfg, cover.bit_depth)
    return k * _carriers(len(cover), stride)


def lsb_match_capacity(cfg: EmbedConfig, cover: AudioSignal) -> int:
    k, stride = lsb_layout(cfg, cover.bit_depth)
    if k != 1:
        raise errors.BadConfigError(
            f"lsb-match carries one bit per sample; "
            f"{cfg.capacity_bpb}% BPB needs {k}"
        )
    return _carriers(len(cover), stride)


def _check_fits(n_bits: int, capacity: int) -> None:
    if n_bits > capacity:
        raise errors.PayloadTooLargeError(
            f"payload of {n_bits} bits exceeds capacity of {capacity} bits"
        )


def _to_unsigned(
    raw: npt.NDArray[np.int64], bits: int
) -> npt.NDArray[np.int64]:
    return raw & ((1 << bits) - 1)


def _to_signed(u: npt.NDArray[np.int64], bits: int) -> npt.NDArray[np.int64]:
    half = 1 << (bits - 1)
    return np.where(u >= half, u - (1 << bits), u)


def _replace_slots(
    n_bits: int, k: int, stride: int
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    # sample-major, bit 0 first
    idx = np.arange(n_bits, dtype=np.int64)
    return (idx // k) * stride, idx % k


@_registry.embedder(Algorithm.LSB_REPLACE, capacity=lsb_replace_capacity)
def lsb_replace_embed(
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> AudioSignal:
    k, stride = lsb_layout(cfg, cover.bit_depth)
    _check_fits(len(payload), lsb_replace_capacity(cfg, cover))

    u = _to_unsigned(cover.raw, cover.bit_depth)
    samples, planes = _replace_slots(len(payload), k, stride)
    bits = payload.bits.astype(np.int64)

    for plane in range(k):
        sel = planes == plane
        where = samples[sel]
        u[where] = (u[where] & ~(1 << plane)) | (bits[sel] << plane)

    return cover.with_raw(_to_signed(u, cover.bit_depth))


@_registry.extractor(Algorithm.LSB_REPLACE)
def lsb_replace_extract(
    stego: AudioSignal,
    n_bits: int,
    cfg: EmbedConfig,
) -> Payload:
    k, stride = lsb_layout(cfg, stego.bit_depth)
    _check_fits(n_bits, lsb_replace_capacity(cfg, stego))

    u = _to_unsigned(stego.raw, stego.bit_depth)
    samples, planes = _replace_slots(n_bits, k, stride)
    return Payload((u[samples] >> planes) & 1)


def _match_order(
    cfg: EmbedConfig, n: int, n_bits: int
) -> npt.NDArray[np.int64]:
    gen = seeding.rng(cfg.seed, seeding.PERMUTATION)
    return gen.permutation(n)[:n_bits]


@_registry.embedder(Algorithm.LSB_MATCH, capacity=lsb_match_capacity)
def lsb_match_embed(
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> AudioSignal:
    n_bits = len(payload)
    _check_fits(n_bits, lsb_match_capacity(cfg, cover))

    order = _match_order(cfg, len(cover), n_bits)
    signs = seeding.rng(cfg.seed, seeding.SIGN).choice(
        np.array([-1, 1], dtype=np.int64), size=n_bits
    )

    raw = cover.raw.copy()
    values = raw[order]
    lo, hi = pcm_range(cover.bit_depth)
    signs[values == hi] = -1
    signs[values == lo] = 1

    flip = (values & 1) != payload.bits
    raw[order] = values + np.where(flip, signs, 0)

    logger.debug(
        "lsb-match embedded",
        extra={"bits": n_bits, "modified": int(flip.sum())},
    )
    return cover.with_raw(raw)


@_registry.extractor(Algorithm.LSB_MATCH)
def lsb_match_extract(
    stego: AudioSignal,
    n_bits: int,
    cfg: EmbedConfig,
) -> Payload:
    _check_fits(n_bits, lsb_match_capacity(cfg, stego))
    order = _match_order(cfg, len(stego), n_bits)
    return Payload(stego.raw[order] & 1)
