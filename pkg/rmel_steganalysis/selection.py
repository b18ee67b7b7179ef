"""Wrapper feature selection and per-dimension class separation."""

from __future__ import annotations
from typing import (
    Dict,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import csv
import dataclasses

import numpy as np
import scipy.stats

from . import classifier
from . import errors
from . import features
from . import seeding
from ._logging import logger
from .audio import FloatArray, PathLike
from .calibration import FEATURE_DIM, FeatureSet


SCATTER_DIMS = 3


@dataclasses.dataclass(frozen=True)
class GaConfig:

    population: int = 200
    generations: int = 20
    mutation_rate: float = 1.0 / FEATURE_DIM
    init_rate: float = 0.5
    folds: int = classifier.DEFAULT_FOLDS
    c_reg: float = 8.0
    gamma: float = 2.0**-5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2 or self.population % 2:
            raise errors.BadConfigError(
                f"population must be even and at least 2, "
                f"got {self.population}"
            )
        if self.generations < 0:
            raise errors.BadConfigError("generations must be non-negative")
        for name in ("mutation_rate", "init_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise errors.BadConfigError(
                    f"{name} must be in [0, 1], got {value}"
                )
        if not self.c_reg > 0 or not self.gamma > 0:
            raise errors.BadConfigError("C and gamma must be positive")
        seeding.check_seed(self.seed)


class GaResult(NamedTuple):
    mask: classifier.BoolArray
    fitness: float
    history: List[float]


class _Fitness:
    """Cross-validated accuracy of a mask, memoized per mask."""

    def __init__(self, data: FeatureSet, cfg: GaConfig) -> None:
        self._x = data.matrix
        self._y = data.targets
        self._splits = classifier.cv_splits(
            self._y, data.source_ids, cfg.folds, cfg.seed
        )
        self._cfg = cfg
        self._cache: Dict[bytes, float] = {}

    def __call__(self, mask: classifier.BoolArray) -> float:
        if not mask.any():
            return 0.0
        key = np.packbits(mask).tobytes()
        score = self._cache.get(key)
        if score is None:
            grid = classifier.cv_accuracy_grid(
                self._x,
                self._y,
                self._splits,
                [self._cfg.c_reg],
                [self._cfg.gamma],
                feature_mask=mask,
            )
            score = float(grid[0, 0])
            self._cache[key] = score
        return score


def _tournament(
    gen: np.random.Generator, scores: FloatArray
) -> int:
    a, b = gen.integers(0, scores.size, size=2)
    if scores[b] > scores[a] or (scores[b] == scores[a] and b < a):
        return int(b)
    return int(a)


def _crossover(
    gen: np.random.Generator,
    p1: classifier.BoolArray,
    p2: classifier.BoolArray,
) -> Tuple[classifier.BoolArray, classifier.BoolArray]:
    lo, hi = np.sort(gen.choice(p1.size + 1, size=2, replace=False))
    c1, c2 = p1.copy(), p2.copy()
    c1[lo:hi] = p2[lo:hi]
    c2[lo:hi] = p1[lo:hi]
    return c1, c2


def ga_run(data: FeatureSet, cfg: GaConfig) -> GaResult:
    data.require_both_classes()
    gen = seeding.rng(cfg.seed, seeding.GA)
    fitness = _Fitness(data, cfg)
    n_dims = data.matrix.shape[1]

    population = gen.random((cfg.population, n_dims)) < cfg.init_rate
    scores = np.array([fitness(ind) for ind in population])
    history = [float(scores.max())]

    for generation in range(cfg.generations):
        elite = population[int(np.argmax(scores))]
        children = [elite.copy()]
        while len(children) < cfg.population:
            p1 = population[_tournament(gen, scores)]
            p2 = population[_tournament(gen, scores)]
            for child in _crossover(gen, p1, p2):
                flips = gen.random(n_dims) < cfg.mutation_rate
                children.append(child ^ flips)
        population = np.array(children[: cfg.population])
        scores = np.array([fitness(ind) for ind in population])
        history.append(float(scores.max()))
        logger.debug(
            "ga generation",
            extra={
                "generation": generation + 1,
                "best_fitness": history[-1],
                "selected": int(population[int(np.argmax(scores))].sum()),
            },
        )

    best = int(np.argmax(scores))
    return GaResult(population[best].copy(), float(scores[best]), history)


def ga_select(data: FeatureSet, cfg: GaConfig) -> classifier.BoolArray:
    return ga_run(data, cfg).mask


class FeatureRanking(NamedTuple):
    order: List[int]
    t_stats: FloatArray


def rank_features(data: FeatureSet) -> FeatureRanking:
    """Order dimensions by |Welch t| between stego and cover."""
    data.require_both_classes()
    x = data.matrix
    stego = x[data.targets > 0]
    cover = x[data.targets < 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t, _ = scipy.stats.ttest_ind(stego, cover, equal_var=False)
    t = np.nan_to_num(np.asarray(t, dtype=np.float64), nan=0.0)
    order = np.argsort(-np.abs(t), kind="stable")
    return FeatureRanking([int(i) for i in order], t)


def scatter_dims(
    data: FeatureSet,
    mask: Optional[classifier.BoolArray] = None,
    n_dims: int = SCATTER_DIMS,
) -> List[int]:
    """Best-separating dimensions, restricted to ``mask`` when given."""
    order = rank_features(data).order
    if mask is not None:
        order = [i for i in order if mask[i]]
    return order[:n_dims]


def write_scatter_csv(
    data: FeatureSet, dims: Sequence[int], path: PathLike
) -> None:
    names = features.feature_names()
    x = data.matrix
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow([names[i] for i in dims] + ["label"])
            for row, label in zip(x, data.labels):
                writer.writerow(
                    [repr(float(row[i])) for i in dims] + [label.value]
                )
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None
