from __future__ import annotations

import csv

import numpy as np
import pytest

from rmel_steganalysis import errors
from rmel_steganalysis import selection
from rmel_steganalysis.calibration import FeatureSet, FeatureVector


def test_ga_config_validation() -> None:
    assert selection.GaConfig().population == 200
    assert selection.GaConfig().mutation_rate == pytest.approx(1 / 116)
    with pytest.raises(errors.BadConfigError):
        selection.GaConfig(population=11)
    with pytest.raises(errors.BadConfigError):
        selection.GaConfig(mutation_rate=1.5)
    with pytest.raises(errors.BadConfigError):
        selection.GaConfig(generations=-1)


def test_empty_mask_has_zero_fitness(make_blobs) -> None:
    data = make_blobs(10)
    fitness = selection._Fitness(data, selection.GaConfig(folds=2))
    assert fitness(np.zeros(116, dtype=bool)) == 0.0
    assert fitness(np.ones(116, dtype=bool)) > 0.5


def test_zero_generations_returns_initial_best(make_blobs) -> None:
    data = make_blobs(10)
    cfg = selection.GaConfig(population=6, generations=0, folds=2, seed=3)
    result = selection.ga_run(data, cfg)
    assert result.history == [result.fitness]
    assert result.mask.shape == (116,)


def test_ga_finds_informative_dimension(make_blobs) -> None:
    data = make_blobs(30, separation=6.0, informative=1, seed=8)
    cfg = selection.GaConfig(population=20, generations=20, folds=3, seed=1)
    result = selection.ga_run(data, cfg)
    assert result.mask[0]
    # elitism never loses the best individual
    assert all(b >= a for a, b in zip(result.history, result.history[1:]))
    np.testing.assert_array_equal(selection.ga_select(data, cfg), result.mask)


def test_rank_features(make_blobs) -> None:
    data = make_blobs(20, separation=3.0, informative=1, seed=2)
    ranking = selection.rank_features(data)
    assert ranking.order[0] == 0
    assert ranking.t_stats[0] > 0
    assert sorted(ranking.order) == list(range(116))


def test_rank_features_constant_dimension(make_blobs) -> None:
    data = make_blobs(5, separation=3.0, informative=1)
    flat = FeatureSet(
        FeatureVector(
            np.where(np.arange(116) == 7, 1.0, v.values),
            label=v.label,
            source_id=v.source_id,
        )
        for v in data
    )
    ranking = selection.rank_features(flat)
    assert ranking.t_stats[7] == 0.0


def test_scatter_export(tmp_path, make_blobs) -> None:
    data = make_blobs(6, separation=3.0, informative=4, seed=1)
    dims = selection.scatter_dims(data)
    assert len(dims) == 3
    assert set(dims) <= {0, 1, 2, 3}

    mask = np.zeros(116, dtype=bool)
    mask[[3, 50, 60, 70]] = True
    masked = selection.scatter_dims(data, mask)
    assert masked[0] == 3
    assert set(masked) <= {3, 50, 60, 70}

    path = tmp_path / "scatter.csv"
    selection.write_scatter_csv(data, dims, path)
    rows = list(csv.reader(path.open()))
    assert len(rows[0]) == 4
    assert rows[0][-1] == "label"
    assert rows[0][0].startswith("mean_")
    assert len(rows) == len(data) + 1
    assert {r[-1] for r in rows[1:]} == {"cover", "stego"}
