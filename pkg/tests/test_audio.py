from __future__ import annotations

import math
import struct

import numpy as np
import pytest

from rmel_steganalysis import audio
from rmel_steganalysis import errors
from rmel_steganalysis.audio import AudioSignal


def _wav(
    pcm: bytes,
    *,
    channels: int = 1,
    bits: int = 16,
    fs: int = 44100,
    declared: int | None = None,
) -> bytes:
    width = channels * bits // 8
    fmt = struct.pack("<HHIIHH", 1, channels, fs, fs * width, width, bits)
    size = len(pcm) if declared is None else declared
    body = b"".join(
        [
            b"WAVE",
            b"fmt " + struct.pack("<I", len(fmt)) + fmt,
            b"data" + struct.pack("<I", size) + pcm,
        ]
    )
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_parse_minimal_wav() -> None:
    sig = audio.parse_wav(_wav(np.array([0, 16384, -32768], "<i2").tobytes()))
    assert sig.sample_rate == 44100
    assert sig.bit_depth == 16
    assert sig.samples.tolist() == [0.0, 0.5, -1.0]


def test_parse_8bit_offset_binary() -> None:
    sig = audio.parse_wav(_wav(bytes([128, 255, 0]), bits=8))
    assert sig.raw.tolist() == [0, 127, -128]


def test_parse_stereo_unsupported() -> None:
    with pytest.raises(errors.UnsupportedFormatError):
        audio.parse_wav(_wav(b"\x00" * 8, channels=2))


def test_parse_truncated_data_chunk() -> None:
    with pytest.raises(errors.TruncatedFileError):
        audio.parse_wav(_wav(b"\x00" * 8, declared=100))


def test_parse_not_riff() -> None:
    with pytest.raises(errors.NotWavError):
        audio.parse_wav(b"OggS" + b"\x00" * 40)


def test_parse_skips_unknown_chunks() -> None:
    data = _wav(np.array([1, 2, 3], "<i2").tobytes())
    # splice an odd-sized LIST chunk (with pad byte) before fmt
    extra = b"LIST" + struct.pack("<I", 3) + b"abc\x00"
    spliced = data[:12] + extra + data[12:]
    spliced = spliced[:4] + struct.pack("<I", len(spliced) - 8) + spliced[8:]
    assert audio.parse_wav(spliced).raw.tolist() == [1, 2, 3]


def test_wav_roundtrip(tmp_path, rng) -> None:
    raw = rng.integers(-32768, 32768, size=1001)
    sig = AudioSignal(raw, 22050)
    path = tmp_path / "x.wav"
    audio.write_wav(sig, path)
    assert audio.read_wav(path) == sig


def test_wav_roundtrip_8bit(tmp_path, rng) -> None:
    sig = AudioSignal(rng.integers(-128, 128, size=77), 8000, 8)
    audio.write_wav(sig, tmp_path / "x.wav")
    assert audio.read_wav(tmp_path / "x.wav") == sig


def test_encode_max_sample_little_endian() -> None:
    data = audio.encode_wav(AudioSignal([32767], 44100))
    assert data.endswith(b"\xff\x7f")


def test_write_unwritable_path(tmp_path) -> None:
    with pytest.raises(errors.IoFailureError):
        audio.write_wav(AudioSignal([0], 8000), tmp_path / "no" / "x.wav")


def test_read_missing_file(tmp_path) -> None:
    with pytest.raises(errors.IoFailureError):
        audio.read_wav(tmp_path / "missing.wav")


def test_signal_rejects_out_of_range() -> None:
    with pytest.raises(errors.BadSignalError):
        AudioSignal([40000], 44100)
    with pytest.raises(errors.BadSignalError):
        AudioSignal([0], 44100, bit_depth=24)


def test_signal_is_read_only() -> None:
    sig = AudioSignal([1, 2, 3], 8000)
    with pytest.raises(ValueError):
        sig.raw[0] = 5


def test_quantize_clamps_instead_of_wrapping() -> None:
    assert audio.quantize([1.5, -2.0, 0.5], 16).tolist() == [
        32767,
        -32768,
        16384,
    ]


@pytest.mark.parametrize(
    "x, expected",
    [
        ([0, 1, 4, 9], [2, 2]),
        ([5, 5, 5, 5], [0, 0]),
        ([0, 1, 2, 3, 4], [0, 0, 0]),
    ],
)
def test_second_derivative(x, expected) -> None:
    assert audio.second_derivative(x).tolist() == expected


def test_second_derivative_too_short() -> None:
    with pytest.raises(errors.TooShortError):
        audio.second_derivative([1.0, 2.0])


@pytest.mark.parametrize(
    "x, expected",
    [
        ([0.5, -0.25], [1.0, -0.5]),
        ([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        ([-2.0, 1.0], [-1.0, 0.5]),
    ],
)
def test_peak_normalize(x, expected) -> None:
    assert audio.peak_normalize(x).tolist() == expected


@pytest.mark.parametrize(
    "n, frames",
    [(441000, 860), (1024, 1), (1000, 0), (1536, 2)],
)
def test_frame_count(n, frames) -> None:
    assert audio.frame_count(n) == frames
    assert audio.frame_matrix(np.zeros(n)).shape == (frames, 1024)


def test_frame_signal_contents() -> None:
    x = np.arange(2048, dtype=float)
    frames = audio.frame_signal(x)
    assert [f.start_index for f in frames] == [0, 512, 1024]
    for f in frames:
        np.testing.assert_array_equal(
            f.values, x[f.start_index : f.start_index + 1024]
        )


def test_snr_db() -> None:
    cover = AudioSignal([2, 0], 8000)
    stego = AudioSignal([1, 0], 8000)
    assert audio.snr_db(cover, stego) == pytest.approx(
        10 * math.log10(4), abs=1e-9
    )
    assert audio.snr_db(cover, cover) == math.inf


def test_snr_db_length_mismatch() -> None:
    with pytest.raises(errors.LengthMismatchError):
        audio.snr_db(AudioSignal([1, 2], 8000), AudioSignal([1], 8000))


def test_bpb_percent() -> None:
    cover = AudioSignal(np.zeros(100, dtype=int), 8000)
    assert audio.bpb_percent(100, cover) == 6.25
    assert audio.bpb_percent(400, cover) == 25.0
    assert audio.bpb_percent(0, cover) == 0.0
