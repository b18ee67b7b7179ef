from __future__ import annotations
from typing import Callable, Optional

import numpy as np
import pytest

from rmel_steganalysis.audio import AudioSignal
from rmel_steganalysis.calibration import (
    FEATURE_DIM,
    FeatureKind,
    FeatureSet,
    FeatureVector,
    Label,
)
from rmel_steganalysis.embedders import Algorithm, EmbedConfig


BLOB_CALIBRATION = EmbedConfig(
    Algorithm.LSB_REPLACE, capacity_bpb=6.25, seed=17
)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def tone(
    n: int,
    *,
    fs: int = 44100,
    freq: float = 440.0,
    noise: float = 0.1,
    seed: int = 0,
    bit_depth: int = 16,
) -> AudioSignal:
    gen = np.random.default_rng(seed)
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * freq * t) + noise * gen.standard_normal(n)
    return AudioSignal.from_samples(0.8 * x / np.max(np.abs(x)), fs, bit_depth)


@pytest.fixture
def make_tone() -> Callable[..., AudioSignal]:
    return tone


def blobs(
    n_pairs: int,
    *,
    separation: float = 5.0,
    informative: int = FEATURE_DIM,
    seed: int = 0,
    kind: FeatureKind = FeatureKind.PLAIN,
    calibration: Optional[EmbedConfig] = None,
) -> FeatureSet:
    """Paired cover/stego rows; stego is shifted in the first dimensions."""
    gen = np.random.default_rng(seed)
    if kind is FeatureKind.CALIBRATED and calibration is None:
        calibration = BLOB_CALIBRATION
    shift = np.zeros(FEATURE_DIM)
    shift[:informative] = separation
    vectors = []
    for i in range(n_pairs):
        sid = f"{i:04d}"
        vectors.append(
            FeatureVector(
                gen.standard_normal(FEATURE_DIM),
                label=Label.COVER,
                kind=kind,
                source_id=sid,
                calibration=calibration,
            )
        )
        vectors.append(
            FeatureVector(
                gen.standard_normal(FEATURE_DIM) + shift,
                label=Label.STEGO,
                kind=kind,
                source_id=sid,
                calibration=calibration,
            )
        )
    return FeatureSet(vectors)


@pytest.fixture
def make_blobs() -> Callable[..., FeatureSet]:
    return blobs
