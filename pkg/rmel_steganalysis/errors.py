from __future__ import annotations


class SteganalysisError(Exception):

    code: str = "Error"
    exit_code: int = 1

    def __init__(self, msg: str) -> None:
        self.msg = msg
        super().__init__(msg)

    def __str__(self) -> str:
        return f"{self.code}: {self.msg}"


class InputError(SteganalysisError):
    pass


class ConfigError(SteganalysisError):

    exit_code = 2


class NotWavError(InputError):

    code = "NotWav"


class UnsupportedFormatError(InputError):

    code = "UnsupportedFormat"


class TruncatedFileError(InputError):

    code = "TruncatedFile"


class IoFailureError(InputError):

    code = "IoFailure"


class ManifestError(InputError):

    code = "BadManifest"


class TooShortError(InputError):

    code = "TooShort"


class LengthMismatchError(InputError):

    code = "LengthMismatch"


class BadSignalError(InputError):

    code = "BadSignal"


class SignalTooShortError(InputError):

    code = "SignalTooShort"


class TooFewFramesError(InputError):

    code = "TooFewFrames"


class PayloadTooLargeError(InputError):

    code = "PayloadTooLarge"


class DimMismatchError(InputError):

    code = "DimMismatch"


class FeatureKindMismatchError(DimMismatchError):

    code = "FeatureKindMismatch"


class SingleClassError(InputError):

    code = "SingleClass"


class ModelVersionError(InputError):

    code = "ModelVersionMismatch"


class NoConvergenceError(SteganalysisError):

    code = "NoConvergence"


class BadConfigError(ConfigError):

    code = "BadConfig"


class NoTargetError(ConfigError):

    code = "NoTarget"


class OutOfBandError(ConfigError):

    code = "OutOfBand"


class BankMismatchError(ConfigError):

    code = "BankMismatch"
