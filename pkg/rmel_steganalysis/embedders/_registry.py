from __future__ import annotations
from typing import (
    Any,
    Callable,
    Dict,
    Mapping,
    NamedTuple,
    Optional,
)

import dataclasses
import enum
import json

import numpy as np
import numpy.typing as npt

from .. import errors
from .. import seeding
from .._logging import logger
from ..audio import AudioSignal


DEFAULT_DSSS_TARGET_SNR_DB = 27.7
DEFAULT_COX_STRENGTH = 0.165

# Capacity ladder of the bit-plane embedders, in percent BPB.
REPLACE_LADDER = (25.0, 12.5, 6.25)
MATCH_LADDER = (3.125, 1.56, 0.78)


class Algorithm(str, enum.Enum):

    LSB_REPLACE = "lsb-replace"
    LSB_MATCH = "lsb-match"
    DSSS = "dsss"
    COX = "cox"

    @property
    def is_lsb(self) -> bool:
        return self in (Algorithm.LSB_REPLACE, Algorithm.LSB_MATCH)

    @property
    def is_watermark(self) -> bool:
        return not self.is_lsb


@dataclasses.dataclass(frozen=True)
class EmbedConfig:

    algorithm: Algorithm
    capacity_bpb: Optional[float] = None
    strength: Optional[float] = None
    target_snr_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self) -> None:
        try:
            algorithm = Algorithm(self.algorithm)
        except ValueError:
            raise errors.BadConfigError(
                f"unknown embedding algorithm: {self.algorithm!r}"
            ) from None
        object.__setattr__(self, "algorithm", algorithm)

        if algorithm.is_lsb:
            if self.capacity_bpb is None or not (
                0.0 < self.capacity_bpb <= 100.0
            ):
                raise errors.BadConfigError(
                    f"{algorithm.value} needs a capacity in (0, 100] "
                    f"percent BPB, got {self.capacity_bpb}"
                )
        if self.strength is not None and self.strength < 0.0:
            raise errors.BadConfigError(
                f"strength must be non-negative, got {self.strength}"
            )
        seeding.check_seed(self.seed)

    @classmethod
    def for_algorithm(
        cls,
        algorithm: Algorithm | str,
        *,
        capacity_bpb: Optional[float] = None,
        strength: Optional[float] = None,
        target_snr_db: Optional[float] = None,
        seed: int = 0,
    ) -> EmbedConfig:
        """Build a config, filling the documented watermarker defaults."""
        algorithm = Algorithm(algorithm)
        if algorithm is Algorithm.DSSS:
            if strength is None and target_snr_db is None:
                target_snr_db = DEFAULT_DSSS_TARGET_SNR_DB
        elif algorithm is Algorithm.COX:
            if strength is None:
                strength = DEFAULT_COX_STRENGTH
        return cls(
            algorithm=algorithm,
            capacity_bpb=capacity_bpb,
            strength=strength,
            target_snr_db=target_snr_db,
            seed=seed,
        )

    def with_seed(self, seed: int) -> EmbedConfig:
        return dataclasses.replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm.value,
            "capacity_bpb": self.capacity_bpb,
            "strength": self.strength,
            "target_snr_db": self.target_snr_db,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EmbedConfig:
        expected = {
            "algorithm",
            "capacity_bpb",
            "strength",
            "target_snr_db",
            "seed",
        }
        if set(data) != expected:
            raise errors.BadConfigError(
                f"embed config must have exactly the fields "
                f"{sorted(expected)}, got {sorted(data)}"
            )
        try:
            return cls(
                algorithm=data["algorithm"],
                capacity_bpb=_opt_float(data["capacity_bpb"]),
                strength=_opt_float(data["strength"]),
                target_snr_db=_opt_float(data["target_snr_db"]),
                seed=int(data["seed"]),
            )
        except (TypeError, ValueError) as e:
            raise errors.BadConfigError(f"invalid embed config: {e}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> EmbedConfig:
        try:
            data = json.loads(text)
        except ValueError as e:
            raise errors.BadConfigError(f"invalid embed config: {e}") from None
        if not isinstance(data, dict):
            raise errors.BadConfigError("embed config must be a JSON object")
        return cls.from_dict(data)


def _opt_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


class Payload:
    def __init__(self, bits: npt.ArrayLike) -> None:
        arr = np.asarray(bits, dtype=np.uint8).ravel()
        if arr.size and arr.max() > 1:
            raise errors.BadConfigError("payload bits must be 0 or 1")
        arr.setflags(write=False)
        self._bits = arr

    @property
    def bits(self) -> npt.NDArray[np.uint8]:
        return self._bits

    def __len__(self) -> int:
        return int(self._bits.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Payload):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash(self._bits.tobytes())

    def __repr__(self) -> str:
        return f"Payload(n_bits={len(self)})"


def gen_payload(n_bits: int, seed: int) -> Payload:
    if n_bits < 0:
        raise errors.BadConfigError("payload size must be non-negative")
    gen = seeding.rng(seed, seeding.PAYLOAD)
    return Payload(gen.integers(0, 2, size=n_bits, dtype=np.uint8))


EmbedFunc = Callable[[AudioSignal, Payload, EmbedConfig], AudioSignal]
ExtractFunc = Callable[[AudioSignal, int, EmbedConfig], Payload]
CapacityFunc = Callable[[EmbedConfig, AudioSignal], int]


class _EmbedderData(NamedTuple):
    embed: EmbedFunc
    capacity: CapacityFunc


_embedders: Dict[Algorithm, _EmbedderData] = {}
_extractors: Dict[Algorithm, ExtractFunc] = {}


def embedder(
    algorithm: Algorithm,
    *,
    capacity: CapacityFunc,
) -> Callable[[EmbedFunc], EmbedFunc]:
    def inner(fn: EmbedFunc) -> EmbedFunc:
        if algorithm in _embedders:
            raise AssertionError(f"{algorithm.value} is already registered")
        _embedders[algorithm] = _EmbedderData(embed=fn, capacity=capacity)
        return fn

    return inner


def extractor(algorithm: Algorithm) -> Callable[[ExtractFunc], ExtractFunc]:
    def inner(fn: ExtractFunc) -> ExtractFunc:
        if algorithm in _extractors:
            raise AssertionError(
                f"{algorithm.value} extractor is already registered"
            )
        _extractors[algorithm] = fn
        return fn

    return inner


def _lookup(algorithm: Algorithm) -> _EmbedderData:
    try:
        return _embedders[algorithm]
    except KeyError:
        raise errors.BadConfigError(
            f"no embedder registered for {algorithm.value}"
        ) from None


def embed(
    cover: AudioSignal,
    payload: Payload,
    cfg: EmbedConfig,
) -> AudioSignal:
    return _lookup(cfg.algorithm).embed(cover, payload, cfg)


def extract(stego: AudioSignal, n_bits: int, cfg: EmbedConfig) -> Payload:
    try:
        fn = _extractors[cfg.algorithm]
    except KeyError:
        raise errors.BadConfigError(
            f"{cfg.algorithm.value} has no blind extractor"
        ) from None
    return fn(stego, n_bits, cfg)


def capacity_bits(cfg: EmbedConfig, cover: AudioSignal) -> int:
    """Payload size, in bits, that ``cfg`` embeds into ``cover``."""
    return _lookup(cfg.algorithm).capacity(cfg, cover)


def report_clipping(
    algorithm: Algorithm, marked: npt.NDArray[np.float64]
) -> int:
    clipped = int(np.count_nonzero(np.abs(marked) > 1.0))
    extra = {"algorithm": algorithm.value, "clipped": clipped}
    if clipped > 0.001 * marked.size:
        logger.warning("clipping after watermarking", extra=extra)
    elif clipped:
        logger.debug("clipping after watermarking", extra=extra)
    return clipped
