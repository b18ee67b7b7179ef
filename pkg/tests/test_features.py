from __future__ import annotations

import csv
import math

import numpy as np
import pytest
import scipy.stats

from rmel_steganalysis import errors
from rmel_steganalysis import features
from rmel_steganalysis.audio import AudioSignal


FS = 44100.0


@pytest.fixture(scope="module")
def bank() -> features.RMelFilterbank:
    return features.build_filterbank(FS)


def test_rmel_anchors() -> None:
    assert features.rmel_of_hz(22050.0, FS) == 0.0
    assert features.rmel_of_hz(0.0, FS) == pytest.approx(
        1127.0 * math.log(1.0 + 22050.0 / 700.0), rel=1e-12
    )
    rmel_zero = float(features.rmel_of_hz(0.0, FS))
    assert rmel_zero == pytest.approx(3923.4, abs=0.1)


def test_rmel_strictly_decreasing() -> None:
    r = features.rmel_of_hz(np.linspace(0.0, 22050.0, 1000), FS)
    assert np.all(np.diff(r) < 0)


def test_rmel_roundtrip(rng) -> None:
    f = rng.uniform(0.0, 22050.0, size=1000)
    back = features.hz_of_rmel(features.rmel_of_hz(f, FS), FS)
    assert np.max(np.abs(back - f)) <= 1e-6 * FS


def test_hz_of_rmel() -> None:
    assert features.hz_of_rmel(0.0, FS) == 22050.0
    expected = 22050.0 - 700.0 * (math.exp(1000.0 / 1127.0) - 1.0)
    assert features.hz_of_rmel(1000.0, FS) == pytest.approx(expected)
    assert expected == pytest.approx(21050.0, abs=1.0)
    assert features.rmel_of_hz(expected, FS) == pytest.approx(1000.0)


def test_out_of_band() -> None:
    with pytest.raises(errors.OutOfBandError):
        features.rmel_of_hz(-10.0, FS)
    with pytest.raises(errors.OutOfBandError):
        features.rmel_of_hz(30000.0, FS)
    with pytest.raises(errors.OutOfBandError):
        features.hz_of_rmel(5000.0, FS)


def test_mel_mirrors_rmel() -> None:
    f = np.linspace(0.0, 22050.0, 50)
    np.testing.assert_allclose(
        features.mel_of_hz(22050.0 - f), features.rmel_of_hz(f, FS)
    )


def test_scale_table(tmp_path) -> None:
    table = features.scale_table(FS, 16)
    assert table.shape == (16, 3)
    assert table[0].tolist() == [0.0, 0.0, float(features.rmel_of_hz(0, FS))]
    path = tmp_path / "scales.csv"
    features.write_scale_csv(FS, 16, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["hz", "mel", "rmel"]
    assert len(rows) == 17


def test_filterbank_shape(bank) -> None:
    assert bank.weights.shape == (30, 513)
    assert bank.edges_hz.shape == (32,)
    assert bank.edges_hz[0] == 0.0
    assert bank.edges_hz[-1] == 22050.0
    assert np.all(np.diff(bank.edges_hz) > 0)
    assert np.all((bank.weights >= 0.0) & (bank.weights <= 1.0))
    assert np.all(bank.weights.max(axis=1) > 0.0)


def test_filterbank_is_dense_at_high_frequencies(bank) -> None:
    assert np.all(np.diff(bank.widths_hz) < 0)
    # equal steps on the R-Mel axis
    np.testing.assert_allclose(
        np.diff(features.rmel_of_hz(bank.edges_hz, FS)),
        np.diff(features.rmel_of_hz(bank.edges_hz, FS))[0],
        rtol=1e-9,
    )


def test_filterbank_bad_config() -> None:
    with pytest.raises(errors.BadConfigError):
        features.build_filterbank(FS, n_filters=1)
    with pytest.raises(errors.BadConfigError):
        features.build_filterbank(FS, n_fft=1000)


def test_rmfcc_frame_bank_mismatch(bank) -> None:
    with pytest.raises(errors.BankMismatchError):
        features.rmfcc_frame(np.zeros(512), bank)
    small = features.build_filterbank(FS, n_filters=29)
    with pytest.raises(errors.BankMismatchError):
        features.rmfcc_frame(np.zeros(1024), small)


def test_rmfcc_frame_of_silence(bank) -> None:
    c = features.rmfcc_frame(np.zeros(1024), bank)
    assert c.shape == (29,)
    np.testing.assert_array_equal(c, np.zeros(29))


def test_rmfcc_frame_ignores_loudness(bank, rng) -> None:
    t = np.arange(1024) / FS
    frame = np.sin(2 * np.pi * FS / 4 * t) + 0.1 * rng.standard_normal(1024)
    np.testing.assert_allclose(
        features.rmfcc_frame(frame, bank),
        features.rmfcc_frame(10.0 * frame, bank),
        atol=1e-9,
    )


def test_rmfcc_signal_shape(bank, make_tone) -> None:
    m = features.rmfcc_signal(make_tone(441000), bank, source_id="x")
    assert m.values.shape == (860, 29)
    assert m.n_frames == 860
    assert m.source_id == "x"


def test_rmfcc_signal_deterministic(bank, make_tone) -> None:
    x = make_tone(8192)
    np.testing.assert_array_equal(
        features.rmfcc_signal(x, bank).values,
        features.rmfcc_signal(x, bank).values,
    )


def test_rmfcc_signal_too_short(bank, make_tone) -> None:
    with pytest.raises(errors.SignalTooShortError):
        features.rmfcc_signal(make_tone(1025), bank)
    assert features.rmfcc_signal(make_tone(1026), bank).n_frames == 1


def test_rmfcc_signal_scale_invariant(bank, make_tone) -> None:
    loud = make_tone(8192, seed=3)
    quiet = AudioSignal(loud.raw // 4, loud.sample_rate)
    a = features.rmfcc_signal(loud, bank).values
    b = features.rmfcc_signal(quiet, bank).values
    # peak normalization removes gain up to re-quantization
    assert np.max(np.abs(a - b)) < 0.5


def test_pipeline_orders(make_tone) -> None:
    x = make_tone(4096).samples
    a = features.preprocess(x, "normalize-first")
    b = features.preprocess(x, "derivative-first")
    assert a.shape == b.shape == (4094,)
    assert np.max(np.abs(b)) == pytest.approx(1.0)
    with pytest.raises(errors.BadConfigError):
        features.preprocess(x, "sideways")  # type: ignore[arg-type]


def test_hos_simple_columns() -> None:
    stats = features.hos_stats(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))
    assert stats.mean.tolist() == [2.0, 5.0]
    assert stats.skewness[0] == pytest.approx(0.0, abs=1e-12)
    assert stats.std[1] == 0.0
    assert stats.skewness[1] == 0.0
    assert stats.kurtosis[1] == 0.0


def test_hos_normal_kurtosis(rng) -> None:
    stats = features.hos_stats(rng.standard_normal((10**5, 1)))
    assert 2.9 <= stats.kurtosis[0] <= 3.1


def test_hos_matches_scipy(rng) -> None:
    for _ in range(100):
        rows = int(rng.integers(2, 60))
        x = rng.standard_normal((rows, 29)) * rng.uniform(0.1, 10.0, 29)
        stats = features.hos_stats(x)
        np.testing.assert_allclose(stats.mean, x.mean(axis=0), rtol=1e-9)
        np.testing.assert_allclose(stats.std, x.std(axis=0), rtol=1e-9)
        np.testing.assert_allclose(
            stats.skewness, scipy.stats.skew(x, axis=0), rtol=1e-9, atol=1e-12
        )
        np.testing.assert_allclose(
            stats.kurtosis,
            scipy.stats.kurtosis(x, axis=0, fisher=False),
            rtol=1e-9,
        )


def test_hos_too_few_frames() -> None:
    with pytest.raises(errors.TooFewFramesError):
        features.hos_stats(np.zeros((1, 29)))


def test_hos_flatten_order() -> None:
    x = np.arange(58, dtype=float).reshape(2, 29)
    flat = features.hos_stats(x).flatten()
    assert flat.shape == (116,)
    np.testing.assert_array_equal(flat[:29], x.mean(axis=0))
    names = features.feature_names()
    assert names[0] == "mean_1"
    assert names[29] == "std_1"
    assert names[-1] == "kurt_29"


def test_csv_exports(tmp_path, bank, make_tone) -> None:
    m = features.rmfcc_signal(make_tone(4096), bank)
    features.write_rmfcc_csv(m, tmp_path / "m.csv")
    features.write_hos_csv(features.hos_stats(m), tmp_path / "h.csv")
    rows = list(csv.reader((tmp_path / "m.csv").open()))
    assert len(rows) == m.n_frames + 1
    assert len(rows[0]) == 30
    rows = list(csv.reader((tmp_path / "h.csv").open()))
    assert [r[0] for r in rows[1:]] == list(features.STATISTICS)
