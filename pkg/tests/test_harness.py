from __future__ import annotations

import csv

import numpy as np
import pytest

from rmel_steganalysis import audio
from rmel_steganalysis import corpus
from rmel_steganalysis import errors
from rmel_steganalysis import harness
from rmel_steganalysis._jobs import run_jobs
from rmel_steganalysis.calibration import (
    FeatureKind,
    FeatureSet,
    FeatureVector,
    Label,
)
from rmel_steganalysis.embedders import Algorithm, EmbedConfig


K1 = EmbedConfig(Algorithm.LSB_REPLACE, capacity_bpb=6.25, seed=5)


def mann_whitney_auc(scores: np.ndarray, targets: np.ndarray) -> float:
    pos = scores[targets > 0]
    neg = scores[targets < 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (pos.size * neg.size)


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory) -> corpus.Manifest:
    out = tmp_path_factory.mktemp("corpus")
    spec = corpus.SynthesisSpec(count=8, duration=0.25, seed=2)
    return corpus.build_corpus(spec, K1, out)


def test_run_jobs_keeps_order() -> None:
    items = [5, -3, 0, -8, 2, 7, -1]
    assert run_jobs(abs, items, jobs=3) == [abs(i) for i in items]
    assert run_jobs(abs, items) == [abs(i) for i in items]
    with pytest.raises(errors.BadConfigError):
        run_jobs(abs, items, jobs=0)


def test_roc_perfect_and_flat() -> None:
    y = np.array([-1, -1, 1, 1])
    perfect = harness.roc_and_auc([0.1, 0.2, 0.8, 0.9], y)
    assert perfect.auc == 1.0
    flat = harness.roc_and_auc([0.5, 0.5, 0.5, 0.5], y)
    assert flat.auc == 0.5
    assert flat.points == [(0.0, 0.0), (1.0, 1.0)]


def test_roc_matches_mann_whitney(rng) -> None:
    for _ in range(50):
        n = int(rng.integers(2, 101))
        y = rng.choice(np.array([-1, 1]), size=n)
        if abs(y.sum()) == n:
            y[0] = -y[0]
        # coarse rounding produces ties
        scores = np.round(rng.standard_normal(n), int(rng.integers(0, 3)))
        roc = harness.roc_and_auc(scores, y)
        assert roc.auc == pytest.approx(mann_whitney_auc(scores, y), abs=1e-9)
        assert roc.points[0] == (0.0, 0.0)
        assert roc.points[-1] == (1.0, 1.0)
        assert np.all(np.diff(roc.fpr) >= 0)
        assert np.all(np.diff(roc.tpr) >= 0)
        assert np.all(np.diff(roc.thresholds) < 0)


def test_roc_single_class() -> None:
    with pytest.raises(errors.SingleClassError):
        harness.roc_and_auc([0.1, 0.2], [1, 1])


def test_trial_result_identities() -> None:
    dv = np.array([1.0, 2.0, -1.0, 0.0, 0.5, -3.0])
    y = np.array([1, 1, 1, -1, -1, -1])
    t = harness.TrialResult.from_decisions(
        dv, y, trial_seed=1, c_reg=1.0, gamma=0.5
    )
    assert t.confusion == (2, 1, 2, 1)
    assert t.accuracy == pytest.approx(100 * 4 / 6)
    assert t.sensitivity == pytest.approx(100 * 2 / 3)
    assert t.specificity == pytest.approx(100 * 2 / 3)
    entry = t.to_dict()
    assert entry["accuracy"] == t.accuracy
    assert entry["sensitivity"] == t.sensitivity
    assert entry["specificity"] == t.specificity
    assert harness.TrialResult.from_dict(entry) == t


def test_split_keeps_pairs_together(make_blobs) -> None:
    data = make_blobs(100)
    split = harness.split_train_test(data, seed=4)
    train_ids = {data[i].source_id for i in split.train}
    test_ids = {data[i].source_id for i in split.test}
    assert len(train_ids) == 70
    assert len(test_ids) == 30
    assert not train_ids & test_ids
    assert len(split.train) + len(split.test) == len(data)
    assert harness.split_train_test(data, seed=4) == split
    assert harness.split_train_test(data, seed=5) != split


def test_split_unpaired_rows(make_blobs) -> None:
    data = FeatureSet(
        FeatureVector(v.values, label=v.label, source_id=f"{i}")
        for i, v in enumerate(make_blobs(10))
    )
    split = harness.split_train_test(data, seed=1)
    assert len(split.train) == 14
    labels = {data[i].label for i in split.test}
    assert labels == {Label.COVER, Label.STEGO}


def test_run_trials_single_repetition(make_blobs) -> None:
    report = harness.run_trials(
        make_blobs(20), 1, c_reg=1.0, gamma=2.0**-5, seed=3
    )
    assert report.repetitions == 1
    assert report.accuracy == (100.0, 0.0)
    assert report.sensitivity[1] == 0.0
    assert report.roc.auc == 1.0


def test_run_trials_separable(make_blobs) -> None:
    report = harness.run_trials(make_blobs(20), 4, c_reg=1.0, gamma=2.0**-5)
    assert report.repetitions == 4
    assert report.accuracy[0] == 100.0
    assert len({t.trial_seed for t in report.trials}) == 4


def test_run_trials_with_grid_search(make_blobs) -> None:
    report = harness.run_trials(make_blobs(15), 2, seed=1)
    assert report.c_reg is None
    assert all(t.c_reg > 0 and t.gamma > 0 for t in report.trials)
    assert report.accuracy[0] >= 90.0


def test_run_trials_chance_level(make_blobs, rng) -> None:
    noise = make_blobs(200, separation=0.0, seed=12)
    pool = [Label.COVER, Label.STEGO] * 200
    labels = [pool[i] for i in rng.permutation(len(pool))]
    data = FeatureSet(
        FeatureVector(v.values, label=label, source_id=v.source_id)
        for v, label in zip(noise, labels)
    )
    report = harness.run_trials(data, 3, c_reg=1.0, gamma=2.0**-5)
    assert 40.0 <= report.accuracy[0] <= 60.0


def test_report_roundtrip(tmp_path, make_blobs) -> None:
    report = harness.run_trials(make_blobs(10), 2, c_reg=1.0, gamma=0.1)
    harness.save_report(report, tmp_path / "r.json")
    loaded = harness.load_report(tmp_path / "r.json")
    assert loaded.to_dict() == report.to_dict()
    harness.save_report(loaded, tmp_path / "again.json")
    assert (tmp_path / "r.json").read_bytes() == (
        tmp_path / "again.json"
    ).read_bytes()

    harness.write_roc_csv(report.roc, tmp_path / "roc.csv")
    rows = list(csv.reader((tmp_path / "roc.csv").open()))
    assert rows[0] == ["fpr", "tpr", "threshold"]
    assert len(rows) == report.roc.fpr.size + 1


def test_build_corpus(small_corpus) -> None:
    rows = small_corpus.rows
    assert len(rows) == 16
    assert sum(r.label is Label.COVER for r in rows) == 8
    assert [r.source_id for r in rows[:2]] == ["0000", "0000"]
    for row in rows:
        assert small_corpus.resolve(row).exists()
        if row.label is Label.STEGO:
            assert row.algorithm is Algorithm.LSB_REPLACE
            assert row.capacity_bpb == pytest.approx(6.25, abs=0.01)
            assert row.snr_db is not None and row.snr_db > 40.0
        else:
            assert row.seed is None and row.snr_db is None
    summary = small_corpus.snr_summary()
    assert summary.count == 8
    assert summary.mean > 40.0


def test_build_corpus_is_reproducible(tmp_path, small_corpus) -> None:
    spec = corpus.SynthesisSpec(count=8, duration=0.25, seed=2)
    again = corpus.build_corpus(spec, K1, tmp_path)
    for a, b in zip(small_corpus, again):
        assert a == b
        assert (
            small_corpus.resolve(a).read_bytes()
            == again.resolve(b).read_bytes()
        )


def test_build_corpus_from_files(tmp_path, make_tone) -> None:
    src = tmp_path / "src"
    src.mkdir()
    for i in range(3):
        audio.write_wav(make_tone(4096, seed=i), src / f"song{i}.wav")
    cfg = EmbedConfig.for_algorithm(Algorithm.DSSS, seed=1)
    manifest = corpus.build_corpus(
        sorted(src.glob("*.wav")), cfg, tmp_path / "out"
    )
    assert len(manifest) == 6
    stego = [r for r in manifest if r.label is Label.STEGO]
    assert all(
        r.snr_db is not None and 27.0 < r.snr_db < 28.5 for r in stego
    )
    # every pair embeds under its own seed
    assert len({r.seed for r in stego}) == 3


def test_manifest_roundtrip(tmp_path, small_corpus) -> None:
    path = tmp_path / "m.csv"
    corpus.write_manifest(small_corpus, path)
    back = corpus.read_manifest(path)
    assert back.rows == small_corpus.rows
    assert back.root == tmp_path
    (tmp_path / "bad.csv").write_text("file,label\n")
    with pytest.raises(errors.ManifestError):
        corpus.read_manifest(tmp_path / "bad.csv")


def test_synthesis_spec_validation() -> None:
    with pytest.raises(errors.BadConfigError):
        corpus.SynthesisSpec(count=0)
    with pytest.raises(errors.BadConfigError):
        corpus.SynthesisSpec(count=1, duration=2.0, max_duration=1.0)


def test_synthesized_durations() -> None:
    spec = corpus.SynthesisSpec(count=5, duration=0.1, max_duration=0.3)
    for i in range(5):
        x = corpus.synthesize_cover(spec, i)
        assert 0.1 <= x.duration <= 0.3 + 1 / spec.sample_rate
        assert np.max(np.abs(x.samples)) == pytest.approx(0.9, abs=1e-4)
    assert corpus.synthesize_cover(spec, 2) == corpus.synthesize_cover(spec, 2)


def test_extract_features(small_corpus) -> None:
    plain = harness.extract_features(small_corpus, FeatureKind.PLAIN)
    assert len(plain) == 16
    assert plain.kind is FeatureKind.PLAIN
    assert plain.source_ids == [r.source_id for r in small_corpus]
    with pytest.raises(errors.BadConfigError):
        harness.extract_features(small_corpus, FeatureKind.CALIBRATED)


def test_extract_features_parallel(small_corpus) -> None:
    serial = harness.extract_features(
        small_corpus, FeatureKind.CALIBRATED, cal_cfg=K1
    )
    parallel = harness.extract_features(
        small_corpus, FeatureKind.CALIBRATED, cal_cfg=K1, jobs=2
    )
    assert list(serial) == list(parallel)


def test_extract_features_keep_going(tmp_path, small_corpus) -> None:
    rows = small_corpus.rows
    for row in rows:
        target = tmp_path / row.path
        target.write_bytes(small_corpus.resolve(row).read_bytes())
    (tmp_path / rows[0].path).write_bytes(b"not a wav")
    manifest = corpus.Manifest(rows, tmp_path)
    with pytest.raises(errors.InputError, match=rows[0].path):
        harness.extract_features(manifest, FeatureKind.PLAIN)
    kept = harness.extract_features(
        manifest, FeatureKind.PLAIN, keep_going=True
    )
    assert len(kept) == len(rows) - 1


def test_compare_feature_kinds(tmp_path, small_corpus) -> None:
    comparison = harness.compare_feature_kinds(
        small_corpus,
        K1.with_seed(99),
        repetitions=2,
        c_reg=1.0,
        gamma=2.0**-5,
        seed=7,
    )
    plain, cal = comparison.plain, comparison.calibrated
    assert [t.trial_seed for t in plain.trials] == [
        t.trial_seed for t in cal.trials
    ]
    for t in plain.trials:
        a = harness.split_train_test(
            comparison.plain_features, seed=t.trial_seed
        )
        b = harness.split_train_test(
            comparison.calibrated_features, seed=t.trial_seed
        )
        assert a == b
    assert comparison.auc_delta == pytest.approx(cal.roc.auc - plain.roc.auc)
    assert cal.calibration == K1.with_seed(99)

    harness.write_comparison(comparison, tmp_path)
    for name in (
        "comparison.json",
        "plain.json",
        "calibrated.json",
        "roc_plain.csv",
        "roc_calibrated.csv",
        "scatter_plain.csv",
        "scatter_calibrated.csv",
    ):
        assert (tmp_path / name).exists()
    header = (tmp_path / "scatter_calibrated.csv").read_text().splitlines()[0]
    assert len(header.split(",")) == 4


@pytest.mark.slow
@pytest.mark.parametrize("bpb", [6.25, 25.0])
def test_calibration_beats_plain_features(tmp_path, bpb) -> None:
    cfg = EmbedConfig(Algorithm.LSB_REPLACE, capacity_bpb=bpb, seed=31)
    spec = corpus.SynthesisSpec(count=100, duration=0.5, seed=30)
    manifest = corpus.build_corpus(spec, cfg, tmp_path, jobs=2)
    comparison = harness.compare_feature_kinds(
        manifest,
        cfg.with_seed(32),
        repetitions=5,
        seed=33,
        jobs=2,
    )
    assert comparison.calibrated.roc.auc >= comparison.plain.roc.auc
    if bpb == 25.0:
        assert comparison.calibrated.roc.auc >= 0.95
