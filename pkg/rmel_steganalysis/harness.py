"""Repeated train/test evaluation, ROC analysis and reports.

Stego is the positive class throughout: sensitivity is the share of stego
signals flagged, specificity the share of covers cleared.
"""

from __future__ import annotations
from typing import (
    Any,
    Dict,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import csv
import dataclasses
import json
import math
import pathlib

import numpy as np
import numpy.typing as npt
from sklearn import metrics
from sklearn.model_selection import train_test_split

from . import classifier
from . import errors
from . import seeding
from . import selection
from ._jobs import run_jobs
from ._logging import logger
from .audio import FloatArray, PathLike, read_wav
from .calibration import (
    FeatureKind,
    FeatureSet,
    FeatureVector,
    feature_vector,
)
from .corpus import Manifest, ManifestRow
from .embedders import EmbedConfig
from .features import PipelineOrder, feature_names


REPORT_VERSION = 1
DEFAULT_REPETITIONS = 20
TRAIN_FRACTION = 0.7


def _ratio(num: int, den: int) -> float:
    return 100.0 * num / den if den else math.nan


@dataclasses.dataclass(frozen=True)
class TrialResult:

    tp: int
    fp: int
    tn: int
    fn: int
    trial_seed: int
    auc: float
    c_reg: float
    gamma: float

    @classmethod
    def from_decisions(
        cls,
        decisions: FloatArray,
        targets: npt.NDArray[np.int64],
        *,
        trial_seed: int,
        c_reg: float,
        gamma: float,
    ) -> TrialResult:
        flagged = decisions > 0
        stego = targets > 0
        return cls(
            tp=int(np.sum(flagged & stego)),
            fp=int(np.sum(flagged & ~stego)),
            tn=int(np.sum(~flagged & ~stego)),
            fn=int(np.sum(~flagged & stego)),
            trial_seed=trial_seed,
            auc=roc_and_auc(decisions, targets).auc,
            c_reg=c_reg,
            gamma=gamma,
        )

    @property
    def confusion(self) -> Tuple[int, int, int, int]:
        return self.tp, self.fp, self.tn, self.fn

    @property
    def sensitivity(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def specificity(self) -> float:
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def accuracy(self) -> float:
        return _ratio(self.tp + self.tn, self.tp + self.fp + self.tn + self.fn)

    def to_dict(self) -> Dict[str, Any]:
        return {
            **dataclasses.asdict(self),
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TrialResult:
        # the rates are derived from the counts
        return cls(**{f.name: data[f.name] for f in dataclasses.fields(cls)})


class RocCurve(NamedTuple):
    fpr: FloatArray
    tpr: FloatArray
    thresholds: FloatArray
    auc: float

    @property
    def points(self) -> List[Tuple[float, float]]:
        return [(float(f), float(t)) for f, t in zip(self.fpr, self.tpr)]


def roc_and_auc(
    decisions: npt.ArrayLike,
    targets: npt.ArrayLike,
) -> RocCurve:
    """ROC over every distinct decision value, with trapezoidal AUC.

    Tied decision values move both rates at once, giving diagonal segments.
    """
    y = np.asarray(targets)
    scores = np.asarray(decisions, dtype=np.float64)
    if y.size != scores.size:
        raise errors.DimMismatchError(
            f"{scores.size} scores for {y.size} labels"
        )
    if not (np.any(y > 0) and np.any(y < 0)):
        raise errors.SingleClassError("ROC needs both cover and stego scores")
    fpr, tpr, thresholds = metrics.roc_curve(
        y > 0, scores, drop_intermediate=False
    )
    thresholds = np.asarray(thresholds, dtype=np.float64)
    # the (0, 0) corner sits above every score
    thresholds[0] = math.inf
    return RocCurve(fpr, tpr, thresholds, float(metrics.auc(fpr, tpr)))


class Split(NamedTuple):
    train: List[int]
    test: List[int]


def split_train_test(
    data: FeatureSet,
    train_frac: float = TRAIN_FRACTION,
    seed: int = 0,
) -> Split:
    """Split by source so a cover and its stego never straddle the sides.

    Sources are stratified by the labels they carry.
    """
    if not 0.0 < train_frac < 1.0:
        raise errors.BadConfigError(
            f"train fraction must be in (0, 1), got {train_frac}"
        )
    data.require_both_classes()

    members: Dict[str, List[int]] = {}
    for i, sid in enumerate(data.source_ids):
        members.setdefault(sid, []).append(i)
    groups = list(members)
    strata = [
        "+".join(sorted({data[i].label.value for i in members[g]}))
        for g in groups
    ]
    if len(groups) < 2:
        raise errors.SingleClassError("need at least two sources to split")

    state = seeding.sklearn_state(seed, seeding.SPLIT)
    try:
        train_groups, test_groups = train_test_split(
            groups, train_size=train_frac, random_state=state, stratify=strata
        )
    except ValueError:
        # a stratum too small to appear on both sides
        train_groups, test_groups = train_test_split(
            groups, train_size=train_frac, random_state=state
        )

    train = sorted(i for g in train_groups for i in members[g])
    test = sorted(i for g in test_groups for i in members[g])
    assert not {data[i].source_id for i in train} & {
        data[i].source_id for i in test
    }
    return Split(train, test)


@dataclasses.dataclass(frozen=True, eq=False)
class EvalReport:

    trials: Tuple[TrialResult, ...]
    roc: RocCurve
    feature_kind: Optional[FeatureKind]
    c_reg: Optional[float]
    gamma: Optional[float]
    seed: int
    calibration: Optional[EmbedConfig] = None
    manifest: Optional[str] = None

    @property
    def repetitions(self) -> int:
        return len(self.trials)

    def _stat(self, name: str) -> Tuple[float, float]:
        values = np.array([getattr(t, name) for t in self.trials])
        return float(values.mean()), float(values.std())

    @property
    def sensitivity(self) -> Tuple[float, float]:
        """Mean and population std over trials, in percent."""
        return self._stat("sensitivity")

    @property
    def specificity(self) -> Tuple[float, float]:
        return self._stat("specificity")

    @property
    def accuracy(self) -> Tuple[float, float]:
        return self._stat("accuracy")

    def to_dict(self) -> Dict[str, Any]:
        summary = {
            name: {"mean": mean, "std": std}
            for name, (mean, std) in (
                ("sensitivity", self.sensitivity),
                ("specificity", self.specificity),
                ("accuracy", self.accuracy),
            )
        }
        return {
            "version": REPORT_VERSION,
            "feature_kind": self.feature_kind.value
            if self.feature_kind
            else None,
            "calibration": self.calibration.to_dict()
            if self.calibration
            else None,
            "manifest": self.manifest,
            "c_reg": self.c_reg,
            "gamma": self.gamma,
            "seed": self.seed,
            "repetitions": self.repetitions,
            "summary": summary,
            "trials": [t.to_dict() for t in self.trials],
            "roc": {
                "fpr": self.roc.fpr.tolist(),
                "tpr": self.roc.tpr.tolist(),
                "thresholds": self.roc.thresholds.tolist(),
                "auc": self.roc.auc,
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> EvalReport:
        if data.get("version") != REPORT_VERSION:
            raise errors.ModelVersionError(
                f"report version {data.get('version')!r} "
                f"is not {REPORT_VERSION}"
            )
        roc = data["roc"]
        return cls(
            trials=tuple(TrialResult.from_dict(t) for t in data["trials"]),
            roc=RocCurve(
                np.asarray(roc["fpr"], dtype=np.float64),
                np.asarray(roc["tpr"], dtype=np.float64),
                np.asarray(roc["thresholds"], dtype=np.float64),
                float(roc["auc"]),
            ),
            feature_kind=FeatureKind(data["feature_kind"])
            if data["feature_kind"]
            else None,
            c_reg=data["c_reg"],
            gamma=data["gamma"],
            seed=int(data["seed"]),
            calibration=EmbedConfig.from_dict(data["calibration"])
            if data["calibration"]
            else None,
            manifest=data["manifest"],
        )


def run_trials(
    data: FeatureSet,
    repetitions: int = DEFAULT_REPETITIONS,
    *,
    c_reg: Optional[float] = None,
    gamma: Optional[float] = None,
    c_grid: Sequence[float] = classifier.DEFAULT_C_GRID,
    gamma_grid: Sequence[float] = classifier.DEFAULT_GAMMA_GRID,
    folds: int = classifier.DEFAULT_FOLDS,
    train_frac: float = TRAIN_FRACTION,
    seed: int = 0,
    feature_mask: Optional[classifier.BoolArray] = None,
    manifest: Optional[str] = None,
) -> EvalReport:
    """Split, (grid search,) train and test ``repetitions`` times.

    Without both ``c_reg`` and ``gamma`` each trial grid-searches its own
    training side.  Only the splits are re-randomized between trials.
    """
    if repetitions < 1:
        raise errors.BadConfigError("repetitions must be at least 1")
    if (c_reg is None) != (gamma is None):
        raise errors.BadConfigError("give both C and gamma, or neither")
    data.require_both_classes()

    trials = []
    pooled_dv: List[FloatArray] = []
    pooled_y: List[npt.NDArray[np.int64]] = []
    for rep in range(repetitions):
        trial_seed = seeding.derive_seed(seed, seeding.TRIAL, rep)
        split = split_train_test(data, train_frac, trial_seed)
        train, test = data.subset(split.train), data.subset(split.test)

        if c_reg is None or gamma is None:
            c, g = classifier.grid_search(
                train, c_grid, gamma_grid, folds, seed=trial_seed
            )
        else:
            c, g = c_reg, gamma
        model = classifier.train_svm(train, c, g, feature_mask=feature_mask)
        dv = classifier.decision_values(model, test)
        y = test.targets

        trial = TrialResult.from_decisions(
            dv, y, trial_seed=trial_seed, c_reg=c, gamma=g
        )
        trials.append(trial)
        pooled_dv.append(dv)
        pooled_y.append(y)
        logger.info(
            "trial finished",
            extra={
                "trial": rep,
                "accuracy": trial.accuracy,
                "sensitivity": trial.sensitivity,
                "specificity": trial.specificity,
                "auc": trial.auc,
            },
        )

    roc = roc_and_auc(np.concatenate(pooled_dv), np.concatenate(pooled_y))
    calibration = data[0].calibration if len(data) else None
    return EvalReport(
        trials=tuple(trials),
        roc=roc,
        feature_kind=data.kind,
        c_reg=c_reg,
        gamma=gamma,
        seed=seed,
        calibration=calibration,
        manifest=manifest,
    )


def save_report(report: EvalReport, path: PathLike) -> None:
    try:
        with open(path, "w") as f:
            json.dump(report.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


def load_report(path: PathLike) -> EvalReport:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise errors.IoFailureError(f"cannot read {path}: {e}") from None
    except ValueError as e:
        raise errors.InputError(f"{path} is not JSON: {e}") from None
    try:
        return EvalReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise errors.InputError(f"malformed report {path}: {e}") from None


def write_roc_csv(roc: RocCurve, path: PathLike) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["fpr", "tpr", "threshold"])
            for row in zip(roc.fpr, roc.tpr, roc.thresholds):
                writer.writerow([repr(float(v)) for v in row])
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


class _ExtractJob(NamedTuple):
    path: str
    row: ManifestRow
    kind: FeatureKind
    cal_cfg: Optional[EmbedConfig]
    order: PipelineOrder


def _extract_one(job: _ExtractJob) -> FeatureVector | str:
    try:
        return feature_vector(
            read_wav(job.path),
            job.kind,
            cal_cfg=job.cal_cfg,
            label=job.row.label,
            source_id=job.row.source_id,
            order=job.order,
        )
    except errors.InputError as e:
        return f"{job.path}: {e}"


def extract_features(
    manifest: Manifest,
    kind: FeatureKind,
    *,
    cal_cfg: Optional[EmbedConfig] = None,
    order: PipelineOrder = "normalize-first",
    keep_going: bool = False,
    jobs: int = 1,
) -> FeatureSet:
    """Feature vectors of every manifest row, in manifest order.

    Unreadable or unusable files fail the run after all rows were tried,
    naming each of them; with ``keep_going`` they are logged and skipped.
    """
    kind = FeatureKind(kind)
    if kind is FeatureKind.CALIBRATED and cal_cfg is None:
        raise errors.BadConfigError(
            "calibrated features need a calibration embedder"
        )
    results = run_jobs(
        _extract_one,
        [
            _ExtractJob(str(manifest.resolve(row)), row, kind, cal_cfg, order)
            for row in manifest
        ],
        jobs,
    )
    failures = [r for r in results if isinstance(r, str)]
    if failures and not keep_going:
        raise errors.InputError(
            f"{len(failures)} file(s) failed: " + "; ".join(failures)
        )
    for failure in failures:
        logger.error("skipping file", extra={"reason": failure})
    return FeatureSet(r for r in results if isinstance(r, FeatureVector))


@dataclasses.dataclass(frozen=True, eq=False)
class Comparison:

    plain: EvalReport
    calibrated: EvalReport
    plain_features: FeatureSet
    calibrated_features: FeatureSet
    plain_dims: List[int]
    calibrated_dims: List[int]

    @property
    def auc_delta(self) -> float:
        return self.calibrated.roc.auc - self.plain.roc.auc

    def to_dict(self) -> Dict[str, Any]:
        names = feature_names()
        return {
            "version": REPORT_VERSION,
            "auc_plain": self.plain.roc.auc,
            "auc_calibrated": self.calibrated.roc.auc,
            "auc_delta": self.auc_delta,
            "accuracy_plain": self.plain.accuracy[0],
            "accuracy_calibrated": self.calibrated.accuracy[0],
            "scatter_plain": [names[i] for i in self.plain_dims],
            "scatter_calibrated": [names[i] for i in self.calibrated_dims],
        }


def compare_feature_kinds(
    manifest: Manifest,
    cal_cfg: EmbedConfig,
    *,
    repetitions: int = DEFAULT_REPETITIONS,
    c_reg: Optional[float] = None,
    gamma: Optional[float] = None,
    folds: int = classifier.DEFAULT_FOLDS,
    seed: int = 0,
    order: PipelineOrder = "normalize-first",
    ga: Optional[selection.GaConfig] = None,
    jobs: int = 1,
) -> Comparison:
    """Evaluate plain and calibrated features on identical splits.

    Both runs share ``seed``, so trial ``i`` of one sees exactly the train
    and test sources of trial ``i`` of the other.  The scatter dimensions
    are the three best by t-statistic, among the GA-selected ones when
    ``ga`` is given.
    """
    results = {}
    for kind in (FeatureKind.PLAIN, FeatureKind.CALIBRATED):
        data = extract_features(
            manifest,
            kind,
            cal_cfg=cal_cfg if kind is FeatureKind.CALIBRATED else None,
            order=order,
            jobs=jobs,
        )
        report = run_trials(
            data,
            repetitions,
            c_reg=c_reg,
            gamma=gamma,
            folds=folds,
            seed=seed,
            manifest=str(manifest.root),
        )
        mask = selection.ga_select(data, ga) if ga is not None else None
        results[kind] = (data, report, selection.scatter_dims(data, mask))

    plain_data, plain_report, plain_dims = results[FeatureKind.PLAIN]
    cal_data, cal_report, cal_dims = results[FeatureKind.CALIBRATED]
    comparison = Comparison(
        plain=plain_report,
        calibrated=cal_report,
        plain_features=plain_data,
        calibrated_features=cal_data,
        plain_dims=plain_dims,
        calibrated_dims=cal_dims,
    )
    logger.info(
        "comparison finished",
        extra={
            "auc_plain": plain_report.roc.auc,
            "auc_calibrated": cal_report.roc.auc,
        },
    )
    return comparison


def write_comparison(comparison: Comparison, out_dir: PathLike) -> None:
    out = pathlib.Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.json", "w") as f:
            json.dump(comparison.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {out}: {e}") from None
    for name, report, data, dims in (
        (
            "plain",
            comparison.plain,
            comparison.plain_features,
            comparison.plain_dims,
        ),
        (
            "calibrated",
            comparison.calibrated,
            comparison.calibrated_features,
            comparison.calibrated_dims,
        ),
    ):
        save_report(report, out / f"{name}.json")
        write_roc_csv(report.roc, out / f"roc_{name}.csv")
        selection.write_scatter_csv(data, dims, out / f"scatter_{name}.csv")
