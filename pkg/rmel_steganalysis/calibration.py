"""Re-embedding calibration and the 116-dimensional feature vectors.

A stego input barely moves when it is embedded into again, while a clean
cover moves a lot; the higher-order statistics of the R-MFCC difference
between a signal and its re-embedded version expose that gap.
"""

from __future__ import annotations
from typing import (
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
)

import csv
import enum
import pathlib

import numpy as np
import numpy.typing as npt

from . import embedders
from . import errors
from . import features
from .audio import AudioSignal, FloatArray, PathLike
from .embedders import EmbedConfig
from .features import PipelineOrder, RMelFilterbank


FEATURE_DIM = 4 * features.N_RMFCC


class Label(str, enum.Enum):

    COVER = "cover"
    STEGO = "stego"
    UNKNOWN = "unknown"

    @property
    def target(self) -> int:
        if self is Label.STEGO:
            return 1
        elif self is Label.COVER:
            return -1
        raise errors.SingleClassError("unknown label has no class target")


class FeatureKind(str, enum.Enum):

    PLAIN = "plain"
    CALIBRATED = "calibrated"


class FeatureVector:
    def __init__(
        self,
        values: npt.ArrayLike,
        *,
        label: Label = Label.UNKNOWN,
        kind: FeatureKind = FeatureKind.PLAIN,
        source_id: str = "",
        calibration: Optional[EmbedConfig] = None,
    ) -> None:
        arr = np.array(values, dtype=np.float64).ravel()
        if arr.size != FEATURE_DIM:
            raise errors.DimMismatchError(
                f"feature vector must have {FEATURE_DIM} values, "
                f"got {arr.size}"
            )
        kind = FeatureKind(kind)
        if kind is FeatureKind.CALIBRATED and calibration is None:
            raise errors.BadConfigError(
                "calibrated features need their calibration embedder"
            )
        arr.setflags(write=False)
        self._values = arr
        self._label = Label(label)
        self._kind = kind
        self._source_id = source_id
        self._calibration = calibration

    @property
    def values(self) -> FloatArray:
        return self._values

    @property
    def label(self) -> Label:
        return self._label

    @property
    def kind(self) -> FeatureKind:
        return self._kind

    @property
    def source_id(self) -> str:
        return self._source_id

    @property
    def calibration(self) -> Optional[EmbedConfig]:
        return self._calibration

    def with_label(self, label: Label) -> FeatureVector:
        return FeatureVector(
            self._values,
            label=label,
            kind=self._kind,
            source_id=self._source_id,
            calibration=self._calibration,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self._label is other._label
            and self._kind is other._kind
            and self._source_id == other._source_id
            and np.array_equal(self._values, other._values)
        )

    def __hash__(self) -> int:
        return hash((self._source_id, self._values.tobytes()))

    def __repr__(self) -> str:
        return (
            f"FeatureVector(source_id={self._source_id!r}, "
            f"label={self._label.value}, kind={self._kind.value})"
        )


class FeatureSet(Sequence[FeatureVector]):
    """An ordered, single-kind collection of feature vectors."""

    def __init__(self, vectors: Iterable[FeatureVector]) -> None:
        self._vectors: List[FeatureVector] = list(vectors)
        kinds = {v.kind for v in self._vectors}
        if len(kinds) > 1:
            raise errors.FeatureKindMismatchError(
                "cannot mix plain and calibrated features"
            )
        self._matrix: Optional[FloatArray] = None

    def __len__(self) -> int:
        return len(self._vectors)

    def __getitem__(self, index: int) -> FeatureVector:  # type: ignore
        return self._vectors[index]

    def __iter__(self) -> Iterator[FeatureVector]:
        return iter(self._vectors)

    @property
    def kind(self) -> Optional[FeatureKind]:
        return self._vectors[0].kind if self._vectors else None

    @property
    def matrix(self) -> FloatArray:
        if self._matrix is None:
            if self._vectors:
                self._matrix = np.vstack([v.values for v in self._vectors])
            else:
                self._matrix = np.empty((0, FEATURE_DIM))
            self._matrix.setflags(write=False)
        return self._matrix

    @property
    def targets(self) -> npt.NDArray[np.int64]:
        return np.array(
            [v.label.target for v in self._vectors], dtype=np.int64
        )

    @property
    def source_ids(self) -> List[str]:
        return [v.source_id for v in self._vectors]

    @property
    def labels(self) -> List[Label]:
        return [v.label for v in self._vectors]

    def subset(self, indices: Iterable[int]) -> FeatureSet:
        return FeatureSet(self._vectors[i] for i in indices)

    def require_both_classes(self) -> None:
        labels = set(self.labels)
        if Label.UNKNOWN in labels:
            raise errors.SingleClassError("training data has unlabeled rows")
        if labels != {Label.COVER, Label.STEGO}:
            raise errors.SingleClassError(
                "both cover and stego examples are required"
            )


def calibrate(x: AudioSignal, cal_cfg: EmbedConfig) -> AudioSignal:
    """Re-embed a fresh full-rate payload into ``x``."""
    n_bits = embedders.capacity_bits(cal_cfg, x)
    payload = embedders.gen_payload(n_bits, cal_cfg.seed)
    return embedders.embed(x, payload, cal_cfg)


def feature_vector_calibrated(
    x: AudioSignal,
    cal_cfg: EmbedConfig,
    bank: RMelFilterbank,
    *,
    label: Label = Label.UNKNOWN,
    source_id: str = "",
    order: PipelineOrder = "normalize-first",
) -> FeatureVector:
    original = features.rmfcc_signal(x, bank, source_id=source_id, order=order)
    reembedded = features.rmfcc_signal(
        calibrate(x, cal_cfg), bank, source_id=source_id, order=order
    )
    # embedders preserve length, so both share one frame grid
    assert reembedded.n_frames == original.n_frames
    diff = reembedded.values - original.values
    stats = features.hos_stats(diff)
    return FeatureVector(
        stats.flatten(),
        label=label,
        kind=FeatureKind.CALIBRATED,
        source_id=source_id,
        calibration=cal_cfg,
    )


def feature_vector_plain(
    x: AudioSignal,
    bank: RMelFilterbank,
    *,
    label: Label = Label.UNKNOWN,
    source_id: str = "",
    order: PipelineOrder = "normalize-first",
) -> FeatureVector:
    m = features.rmfcc_signal(x, bank, source_id=source_id, order=order)
    return FeatureVector(
        features.hos_stats(m).flatten(),
        label=label,
        kind=FeatureKind.PLAIN,
        source_id=source_id,
    )


def feature_vector(
    x: AudioSignal,
    kind: FeatureKind,
    *,
    cal_cfg: Optional[EmbedConfig] = None,
    bank: Optional[RMelFilterbank] = None,
    label: Label = Label.UNKNOWN,
    source_id: str = "",
    order: PipelineOrder = "normalize-first",
) -> FeatureVector:
    if bank is None:
        bank = features.cached_filterbank(float(x.sample_rate))
    if FeatureKind(kind) is FeatureKind.CALIBRATED:
        if cal_cfg is None:
            raise errors.BadConfigError(
                "calibrated features need a calibration embedder"
            )
        return feature_vector_calibrated(
            x, cal_cfg, bank, label=label, source_id=source_id, order=order
        )
    return feature_vector_plain(
        x, bank, label=label, source_id=source_id, order=order
    )


def csv_header() -> List[str]:
    return ["source_id", "label", "kind"] + features.feature_names()


def calibration_path(path: PathLike) -> pathlib.Path:
    """Where the calibration embedder of a feature file is kept."""
    return pathlib.Path(path).with_suffix(".calibration.json")


def _feature_calibration(
    vectors: Sequence[FeatureVector],
) -> Optional[EmbedConfig]:
    configs = {
        v.calibration
        for v in vectors
        if v.kind is FeatureKind.CALIBRATED
    }
    if len(configs) > 1:
        raise errors.BadConfigError(
            "calibrated rows were made with different embedders"
        )
    return configs.pop() if configs else None


def write_features_csv(
    vectors: Iterable[FeatureVector], path: PathLike
) -> None:
    """Write one row per vector.

    Calibrated rows also get ``calibration_path(path)``, holding the
    embedder they were calibrated with.
    """
    rows = list(vectors)
    cal = _feature_calibration(rows)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(csv_header())
            for v in rows:
                writer.writerow(
                    [v.source_id, v.label.value, v.kind.value]
                    + [repr(float(x)) for x in v.values]
                )
        if cal is not None:
            calibration_path(path).write_text(cal.to_json() + "\n")
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


def _read_calibration(path: PathLike) -> EmbedConfig:
    sidecar = calibration_path(path)
    try:
        text = sidecar.read_text()
    except FileNotFoundError:
        raise errors.InputError(
            f"{path} holds calibrated rows but {sidecar.name} is missing"
        ) from None
    except OSError as e:
        raise errors.IoFailureError(f"cannot read {sidecar}: {e}") from None
    try:
        return EmbedConfig.from_json(text)
    except errors.ConfigError as e:
        raise errors.InputError(f"{sidecar}: {e.msg}") from None


def read_features_csv(
    path: PathLike,
    *,
    calibration: Optional[EmbedConfig] = None,
) -> FeatureSet:
    """Load a feature file.

    Calibrated rows take their embedder from ``calibration`` when given,
    otherwise from the file written next to them by `write_features_csv`.
    """
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise errors.IoFailureError(f"cannot read {path}: {e}") from None

    if not rows or rows[0] != csv_header():
        raise errors.DimMismatchError(
            f"{path} does not have the {FEATURE_DIM}-feature header"
        )

    vectors = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != FEATURE_DIM + 3:
            raise errors.DimMismatchError(
                f"{path}:{lineno}: expected {FEATURE_DIM + 3} columns, "
                f"got {len(row)}"
            )
        try:
            kind = FeatureKind(row[2])
            label = Label(row[1])
            values = [float(x) for x in row[3:]]
        except ValueError as e:
            raise errors.InputError(f"{path}:{lineno}: {e}") from None
        cal = None
        if kind is FeatureKind.CALIBRATED:
            if calibration is None:
                calibration = _read_calibration(path)
            cal = calibration
        vectors.append(
            FeatureVector(
                values,
                label=label,
                kind=kind,
                source_id=row[0],
                calibration=cal,
            )
        )
    return FeatureSet(vectors)
