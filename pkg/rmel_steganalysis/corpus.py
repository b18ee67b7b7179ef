"""Paired cover/stego corpora and their CSV manifest."""

from __future__ import annotations
from typing import (
    Iterator,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import csv
import dataclasses
import math
import pathlib

import numpy as np
import scipy.signal

from . import embedders
from . import errors
from . import seeding
from ._jobs import run_jobs
from ._logging import logger
from .audio import AudioSignal, PathLike, bpb_percent, read_wav, snr_db
from .audio import write_wav
from .calibration import Label
from .embedders import Algorithm, EmbedConfig


MANIFEST_NAME = "manifest.csv"
MANIFEST_HEADER = (
    "path",
    "label",
    "algorithm",
    "capacity_bpb",
    "seed",
    "snr_db",
)

SYNTH_PEAK = 0.9
TONE_BAND_HZ = (80.0, 4000.0)
NOISE_CUTOFF_HZ = (1500.0, 5000.0)
NOISE_FILTER_ORDER = 8


@dataclasses.dataclass(frozen=True)
class SynthesisSpec:
    """Seeded tone-plus-filtered-noise covers.

    Durations are uniform in ``[duration, max_duration]`` when a maximum is
    given, otherwise fixed.
    """

    count: int
    duration: float = 1.0
    max_duration: Optional[float] = None
    sample_rate: int = 44100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise errors.BadConfigError(
                f"synthetic corpus needs at least one cover, got {self.count}"
            )
        if not self.duration > 0:
            raise errors.BadConfigError("duration must be positive")
        if self.max_duration is not None and self.max_duration < self.duration:
            raise errors.BadConfigError(
                "max duration must not be below the duration"
            )
        if self.sample_rate <= 2 * NOISE_CUTOFF_HZ[1]:
            raise errors.BadConfigError(
                f"sample rate {self.sample_rate} is too low for synthesis"
            )
        seeding.check_seed(self.seed)


def synthesize_cover(spec: SynthesisSpec, index: int) -> AudioSignal:
    gen = seeding.rng(spec.seed, seeding.SYNTHESIS, index)
    fs = spec.sample_rate
    duration = spec.duration
    if spec.max_duration is not None:
        duration = gen.uniform(spec.duration, spec.max_duration)
    n = int(round(duration * fs))
    t = np.arange(n) / fs

    n_tones = int(gen.integers(2, 6))
    freqs = gen.uniform(*TONE_BAND_HZ, size=n_tones)
    amps = gen.uniform(0.2, 1.0, size=n_tones)
    phases = gen.uniform(0.0, 2 * np.pi, size=n_tones)
    tones = np.sum(
        amps[:, None]
        * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None]),
        axis=0,
    )

    sos = scipy.signal.butter(
        NOISE_FILTER_ORDER,
        gen.uniform(*NOISE_CUTOFF_HZ),
        fs=fs,
        output="sos",
    )
    noise = scipy.signal.sosfilt(sos, gen.standard_normal(n))
    noise *= gen.uniform(0.1, 0.5) * np.std(tones) / np.std(noise)

    x = tones + noise
    return AudioSignal.from_samples(SYNTH_PEAK * x / np.max(np.abs(x)), fs)


def source_id_of(path: PathLike) -> str:
    return pathlib.PurePath(path).name.split(".", 1)[0]


class ManifestRow(NamedTuple):
    path: str
    label: Label
    algorithm: Optional[Algorithm] = None
    capacity_bpb: Optional[float] = None
    seed: Optional[int] = None
    snr_db: Optional[float] = None

    @property
    def source_id(self) -> str:
        return source_id_of(self.path)

    def to_csv(self) -> List[str]:
        return [
            self.path,
            self.label.value,
            self.algorithm.value if self.algorithm else "",
            "" if self.capacity_bpb is None else repr(self.capacity_bpb),
            "" if self.seed is None else str(self.seed),
            "" if self.snr_db is None else repr(self.snr_db),
        ]

    @classmethod
    def from_csv(cls, row: Sequence[str]) -> ManifestRow:
        if len(row) != len(MANIFEST_HEADER):
            raise errors.ManifestError(
                f"expected {len(MANIFEST_HEADER)} columns, got {len(row)}"
            )
        path, label, algorithm, capacity, seed, snr = row
        try:
            return cls(
                path=path,
                label=Label(label),
                algorithm=Algorithm(algorithm) if algorithm else None,
                capacity_bpb=float(capacity) if capacity else None,
                seed=int(seed) if seed else None,
                snr_db=float(snr) if snr else None,
            )
        except ValueError as e:
            raise errors.ManifestError(
                f"bad manifest row {row}: {e}"
            ) from None


class SnrSummary(NamedTuple):
    mean: float
    std: float
    count: int


class Manifest:
    def __init__(self, rows: Sequence[ManifestRow], root: PathLike) -> None:
        self._rows = list(rows)
        self._root = pathlib.Path(root)

    @property
    def rows(self) -> List[ManifestRow]:
        return list(self._rows)

    @property
    def root(self) -> pathlib.Path:
        return self._root

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[ManifestRow]:
        return iter(self._rows)

    def resolve(self, row: ManifestRow) -> pathlib.Path:
        return self._root / row.path

    def snr_summary(self) -> SnrSummary:
        """Mean and std of the finite stego SNRs."""
        values = [
            r.snr_db
            for r in self._rows
            if r.label is Label.STEGO
            and r.snr_db is not None
            and math.isfinite(r.snr_db)
        ]
        if not values:
            return SnrSummary(math.nan, math.nan, 0)
        arr = np.asarray(values)
        return SnrSummary(float(arr.mean()), float(arr.std()), arr.size)


def write_manifest(manifest: Manifest, path: PathLike) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(MANIFEST_HEADER)
            for row in manifest:
                writer.writerow(row.to_csv())
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


def read_manifest(path: PathLike) -> Manifest:
    try:
        with open(path, newline="") as f:
            lines = list(csv.reader(f))
    except OSError as e:
        raise errors.IoFailureError(f"cannot read {path}: {e}") from None
    if not lines or tuple(lines[0]) != MANIFEST_HEADER:
        raise errors.ManifestError(f"{path} has no manifest header")
    rows = [ManifestRow.from_csv(line) for line in lines[1:] if line]
    return Manifest(rows, pathlib.Path(path).parent)


CoverSource = Union[str, Tuple[SynthesisSpec, int]]


class _PairJob(NamedTuple):
    index: int
    source: CoverSource
    cfg: EmbedConfig
    out_dir: str


def _build_pair(job: _PairJob) -> Tuple[ManifestRow, ManifestRow]:
    if isinstance(job.source, str):
        cover = read_wav(job.source)
    else:
        cover = synthesize_cover(*job.source)

    item_seed = seeding.derive_seed(job.cfg.seed, seeding.CORPUS, job.index)
    cfg = job.cfg.with_seed(item_seed)
    n_bits = embedders.capacity_bits(cfg, cover)
    stego = embedders.embed(
        cover, embedders.gen_payload(n_bits, item_seed), cfg
    )
    snr = snr_db(cover, stego)

    out = pathlib.Path(job.out_dir)
    cover_name = f"{job.index:04d}.cover.wav"
    stego_name = f"{job.index:04d}.stego.wav"
    write_wav(cover, out / cover_name)
    write_wav(stego, out / stego_name)
    logger.info(
        "corpus pair written",
        extra={"index": job.index, "n_bits": n_bits, "snr_db": snr},
    )
    return (
        ManifestRow(cover_name, Label.COVER),
        ManifestRow(
            stego_name,
            Label.STEGO,
            algorithm=cfg.algorithm,
            capacity_bpb=bpb_percent(n_bits, cover),
            seed=item_seed,
            snr_db=snr,
        ),
    )


def build_corpus(
    covers: Sequence[PathLike] | SynthesisSpec,
    cfg: EmbedConfig,
    out_dir: PathLike,
    *,
    jobs: int = 1,
) -> Manifest:
    """Write cover/stego pairs plus ``manifest.csv`` into ``out_dir``."""
    sources: List[CoverSource]
    if isinstance(covers, SynthesisSpec):
        sources = [(covers, i) for i in range(covers.count)]
    else:
        sources = [str(p) for p in covers]
    if not sources:
        raise errors.BadConfigError("no covers to build a corpus from")

    out = pathlib.Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise errors.IoFailureError(f"cannot create {out}: {e}") from None

    pairs = run_jobs(
        _build_pair,
        [_PairJob(i, src, cfg, str(out)) for i, src in enumerate(sources)],
        jobs,
    )
    manifest = Manifest([row for pair in pairs for row in pair], out)
    write_manifest(manifest, out / MANIFEST_NAME)

    summary = manifest.snr_summary()
    logger.info(
        "corpus written",
        extra={
            "pairs": len(pairs),
            "algorithm": cfg.algorithm.value,
            "snr_mean_db": summary.mean,
            "snr_std_db": summary.std,
        },
    )
    return manifest
