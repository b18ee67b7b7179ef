"""PCM audio carrier, RIFF/WAVE codec and the sample-domain helpers.

All pipeline helpers take and return numpy arrays and never mutate their
input.  ``AudioSignal`` keeps the integer PCM values verbatim so the bit-level
embedders can work on them losslessly.
"""

from __future__ import annotations
from typing import (
    List,
    NamedTuple,
    Union,
)

import math
import os
import pathlib
import struct

import numpy as np
import numpy.typing as npt

from . import errors


FRAME_LEN = 1024
HOP = 512

WAVE_FORMAT_PCM = 1
SUPPORTED_BIT_DEPTHS = (8, 16)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
PathLike = Union[str, "os.PathLike[str]"]

_RIFF_HEADER = struct.Struct("<4sI4s")
_CHUNK_HEADER = struct.Struct("<4sI")
_FMT_BODY = struct.Struct("<HHIIHH")


def _frozen(a: npt.NDArray[np.generic]) -> npt.NDArray[np.generic]:
    a.setflags(write=False)
    return a


class AudioSignal:
    def __init__(
        self,
        raw: npt.ArrayLike,
        sample_rate: int,
        bit_depth: int = 16,
    ) -> None:
        if bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise errors.BadSignalError(
                f"bit depth must be one of {SUPPORTED_BIT_DEPTHS}, "
                f"got {bit_depth}"
            )
        if int(sample_rate) <= 0:
            raise errors.BadSignalError(
                f"sample rate must be positive, got {sample_rate}"
            )

        values = np.asarray(raw)
        if values.ndim != 1:
            raise errors.BadSignalError("PCM data must be one-dimensional")
        if values.size and not np.issubdtype(values.dtype, np.integer):
            if not np.array_equal(values, np.round(values)):
                raise errors.BadSignalError("PCM values must be integers")

        ints = values.astype(np.int64)
        lo, hi = pcm_range(bit_depth)
        if ints.size and (ints.min() < lo or ints.max() > hi):
            raise errors.BadSignalError(
                f"PCM values exceed the {bit_depth}-bit range"
            )

        self._raw: IntArray = _frozen(ints)  # type: ignore[assignment]
        self._sample_rate = int(sample_rate)
        self._bit_depth = int(bit_depth)
        self._samples: FloatArray | None = None

    @classmethod
    def from_samples(
        cls,
        samples: npt.ArrayLike,
        sample_rate: int,
        bit_depth: int = 16,
    ) -> AudioSignal:
        return cls(quantize(samples, bit_depth), sample_rate, bit_depth)

    @property
    def raw(self) -> IntArray:
        return self._raw

    @property
    def samples(self) -> FloatArray:
        if self._samples is None:
            scale = float(2 ** (self._bit_depth - 1))
            self._samples = _frozen(  # type: ignore[assignment]
                self._raw / scale
            )
        assert self._samples is not None
        return self._samples

    @property
    def sample_rate(self) -> int:
        return self._sample_rate

    @property
    def bit_depth(self) -> int:
        return self._bit_depth

    @property
    def duration(self) -> float:
        return len(self._raw) / self._sample_rate

    def __len__(self) -> int:
        return len(self._raw)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AudioSignal):
            return NotImplemented
        return (
            self._sample_rate == other._sample_rate
            and self._bit_depth == other._bit_depth
            and np.array_equal(self._raw, other._raw)
        )

    def __hash__(self) -> int:
        return hash((self._sample_rate, self._bit_depth, self._raw.tobytes()))

    def __repr__(self) -> str:
        return (
            f"AudioSignal(len={len(self)}, sample_rate={self._sample_rate}, "
            f"bit_depth={self._bit_depth})"
        )

    def with_raw(self, raw: npt.ArrayLike) -> AudioSignal:
        return AudioSignal(raw, self._sample_rate, self._bit_depth)


class Frame(NamedTuple):
    values: FloatArray
    start_index: int


def pcm_range(bit_depth: int) -> tuple[int, int]:
    half = 2 ** (bit_depth - 1)
    return -half, half - 1


def quantize(samples: npt.ArrayLike, bit_depth: int) -> IntArray:
    """Clamp to [-1, 1] and round to signed integer PCM (never wraps)."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    lo, hi = pcm_range(bit_depth)
    scaled = np.rint(x * float(2 ** (bit_depth - 1)))
    return np.clip(scaled, lo, hi).astype(np.int64)


def read_wav(path: PathLike) -> AudioSignal:
    try:
        data = pathlib.Path(path).read_bytes()
    except OSError as e:
        raise errors.IoFailureError(f"cannot read {path}: {e}") from None

    return parse_wav(data, source=str(path))


def parse_wav(data: bytes, *, source: str = "<bytes>") -> AudioSignal:
    if len(data) < _RIFF_HEADER.size:
        raise errors.NotWavError(f"{source} is too short to be a WAV file")

    riff, _, wave = _RIFF_HEADER.unpack_from(data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise errors.NotWavError(f"{source} is not a RIFF/WAVE file")

    fmt = None
    pcm = None
    offset = _RIFF_HEADER.size

    while offset + _CHUNK_HEADER.size <= len(data):
        chunk_id, size = _CHUNK_HEADER.unpack_from(data, offset)
        body = offset + _CHUNK_HEADER.size
        if chunk_id == b"fmt ":
            if size < _FMT_BODY.size or body + size > len(data):
                raise errors.TruncatedFileError(
                    f"{source}: fmt chunk is truncated"
                )
            fmt = _FMT_BODY.unpack_from(data, body)
        elif chunk_id == b"data":
            if fmt is None:
                raise errors.NotWavError(
                    f"{source}: data chunk precedes the fmt chunk"
                )
            if body + size > len(data):
                raise errors.TruncatedFileError(
                    f"{source}: data chunk declares {size} bytes, "
                    f"only {len(data) - body} present"
                )
            pcm = data[body : body + size]
            break
        # chunks are word-aligned
        offset = body + size + (size & 1)

    if fmt is None:
        raise errors.TruncatedFileError(f"{source}: missing fmt chunk")
    if pcm is None:
        raise errors.TruncatedFileError(f"{source}: missing data chunk")

    format_tag, channels, sample_rate, _, block_align, bits = fmt

    if format_tag != WAVE_FORMAT_PCM:
        raise errors.UnsupportedFormatError(
            f"{source}: only integer PCM is supported "
            f"(format tag {format_tag})"
        )
    if channels != 1:
        raise errors.UnsupportedFormatError(
            f"{source}: only mono is supported ({channels} channels)"
        )
    if bits not in SUPPORTED_BIT_DEPTHS:
        raise errors.UnsupportedFormatError(
            f"{source}: only 8- and 16-bit PCM is supported ({bits} bits)"
        )
    if sample_rate <= 0:
        raise errors.UnsupportedFormatError(
            f"{source}: invalid sample rate {sample_rate}"
        )

    width = bits // 8
    if len(pcm) % width:
        raise errors.TruncatedFileError(
            f"{source}: data chunk ends inside a sample"
        )

    raw: npt.NDArray[np.int64]
    if bits == 8:
        # 8-bit WAV is offset binary
        raw = np.frombuffer(pcm, dtype=np.uint8).astype(np.int64) - 128
    else:
        raw = np.frombuffer(pcm, dtype="<i2").astype(np.int64)

    return AudioSignal(raw, sample_rate, bits)


def encode_wav(signal: AudioSignal) -> bytes:
    bits = signal.bit_depth
    if bits == 8:
        pcm = (signal.raw + 128).astype(np.uint8).tobytes()
    else:
        pcm = signal.raw.astype("<i2").tobytes()

    width = bits // 8
    fmt = _FMT_BODY.pack(
        WAVE_FORMAT_PCM,
        1,
        signal.sample_rate,
        signal.sample_rate * width,
        width,
        bits,
    )
    pad = b"\x00" if len(pcm) & 1 else b""
    body = b"".join(
        [
            b"WAVE",
            _CHUNK_HEADER.pack(b"fmt ", len(fmt)),
            fmt,
            _CHUNK_HEADER.pack(b"data", len(pcm)),
            pcm,
            pad,
        ]
    )
    return _CHUNK_HEADER.pack(b"RIFF", len(body)) + body


def write_wav(signal: AudioSignal, path: PathLike) -> None:
    try:
        pathlib.Path(path).write_bytes(encode_wav(signal))
    except OSError as e:
        raise errors.IoFailureError(f"cannot write {path}: {e}") from None


def second_derivative(x: npt.ArrayLike) -> FloatArray:
    a = np.asarray(x, dtype=np.float64)
    if a.size < 3:
        raise errors.TooShortError(
            f"second derivative needs at least 3 samples, got {a.size}"
        )
    # x[n+2] - 2 x[n+1] + x[n]
    return np.diff(a, n=2)


def peak_normalize(x: npt.ArrayLike) -> FloatArray:
    a = np.asarray(x, dtype=np.float64)
    if a.size == 0:
        raise errors.TooShortError("cannot normalize an empty signal")
    peak = float(np.max(np.abs(a)))
    if peak == 0.0:
        return a.copy()
    return a / peak


def _check_framing(frame_len: int, hop: int) -> None:
    if frame_len <= 0 or not 0 < hop <= frame_len:
        raise errors.BadConfigError(
            f"invalid framing: frame_len={frame_len}, hop={hop}"
        )


def frame_count(n: int, frame_len: int = FRAME_LEN, hop: int = HOP) -> int:
    _check_framing(frame_len, hop)
    if n < frame_len:
        return 0
    return (n - frame_len) // hop + 1


def frame_matrix(
    x: npt.ArrayLike,
    frame_len: int = FRAME_LEN,
    hop: int = HOP,
) -> FloatArray:
    """Full frames as rows of a (n_frames, frame_len) array."""
    a = np.asarray(x, dtype=np.float64)
    n_frames = frame_count(a.size, frame_len, hop)
    if n_frames == 0:
        return np.empty((0, frame_len), dtype=np.float64)
    windows = np.lib.stride_tricks.sliding_window_view(a, frame_len)
    return np.array(windows[: (n_frames - 1) * hop + 1 : hop])


def frame_signal(
    x: npt.ArrayLike,
    frame_len: int = FRAME_LEN,
    hop: int = HOP,
) -> List[Frame]:
    rows = frame_matrix(x, frame_len, hop)
    return [Frame(row, i * hop) for i, row in enumerate(rows)]


def snr_db(cover: AudioSignal, stego: AudioSignal) -> float:
    if len(cover) != len(stego):
        raise errors.LengthMismatchError(
            f"cover has {len(cover)} samples, stego has {len(stego)}"
        )
    if cover.sample_rate != stego.sample_rate:
        raise errors.LengthMismatchError(
            f"sample rates differ: {cover.sample_rate} "
            f"vs {stego.sample_rate}"
        )
    return snr_db_samples(cover.samples, stego.samples)


def snr_db_samples(cover: npt.ArrayLike, stego: npt.ArrayLike) -> float:
    c = np.asarray(cover, dtype=np.float64)
    s = np.asarray(stego, dtype=np.float64)
    if c.shape != s.shape:
        raise errors.LengthMismatchError(
            f"cover has {c.size} samples, stego has {s.size}"
        )
    noise = float(np.sum((c - s) ** 2))
    if noise == 0.0:
        return math.inf
    power = float(np.sum(c**2))
    if power == 0.0:
        return -math.inf
    return 10.0 * math.log10(power / noise)


def bpb_percent(payload_bits: int, cover: AudioSignal) -> float:
    if payload_bits < 0:
        raise errors.BadConfigError("payload size must be non-negative")
    total = len(cover) * cover.bit_depth
    if total == 0:
        return 0.0
    return 100.0 * payload_bits / total
