"""Exception hierarchy.

Every error carries a short ``category`` used by the CLI to print a single
machine-parsable line; ``ValidationError`` subclasses map to exit code 1,
everything else to exit code 2.
"""

from __future__ import annotations


class GchpError(Exception):
    category = "RuntimeFailure"


class ValidationError(GchpError, ValueError):
    category = "ValidationError"


# events-core
class MalformedLine(ValidationError):
    category = "MalformedLine"

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class NonMonotoneTimes(ValidationError):
    category = "NonMonotoneTimes"

    def __init__(self, seq_id: str, index: int):
        super().__init__(f"sequence {seq_id!r}: event {index} does not strictly follow its predecessor")
        self.seq_id = seq_id
        self.index = index


class MarkOutOfRange(ValidationError):
    category = "MarkOutOfRange"

    def __init__(self, seq_id: str, index: int, detail: str = ""):
        msg = f"sequence {seq_id!r}: mark of event {index} out of range"
        super().__init__(msg + (f" ({detail})" if detail else ""))
        self.seq_id = seq_id
        self.index = index


class HorizonViolation(ValidationError):
    category = "HorizonViolation"

    def __init__(self, seq_id: str, detail: str = ""):
        super().__init__(f"sequence {seq_id!r}: horizon violated" + (f" ({detail})" if detail else ""))
        self.seq_id = seq_id


class TooFewSequences(ValidationError):
    category = "TooFewSequences"


class IoFailure(GchpError):
    category = "IoFailure"


# hawkes-sim
class SupercriticalParams(ValidationError):
    category = "SupercriticalParams"


class NonPositiveHorizon(ValidationError):
    category = "NonPositiveHorizon"


class TimeBeforeHistory(ValidationError):
    category = "TimeBeforeHistory"


class ZeroIntensityAtEvent(GchpError):
    category = "ZeroIntensityAtEvent"


# temporal-graph / diffmath
class ZeroDegreeRow(GchpError):
    category = "ZeroDegreeRow"


class ShapeMismatch(GchpError, ValueError):
    category = "ShapeMismatch"


class DetachedLoss(GchpError):
    category = "DetachedLoss"


class NonPositiveArgument(GchpError, ValueError):
    category = "NonPositiveArgument"


class InvalidAlpha(ValidationError):
    category = "InvalidAlpha"


class NonPositiveDof(ValidationError):
    category = "NonPositiveDof"


# losses
class NonPositiveTau(GchpError, ValueError):
    category = "NonPositiveTau"


class NonPositiveTauHat(GchpError, ValueError):
    category = "NonPositiveTauHat"


class ClassOutOfRange(GchpError, ValueError):
    category = "ClassOutOfRange"


class VanishingSurvival(GchpError):
    category = "VanishingSurvival"


class NegativeIntensitySample(GchpError):
    category = "NegativeIntensitySample"


class EmptyData(GchpError):
    category = "EmptyData"


class OverparameterizedModel(GchpError):
    category = "OverparameterizedModel"


# train-eval
class NoWindows(GchpError):
    category = "NoWindows"


# cli
class ConfigError(ValidationError):
    category = "ConfigError"

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class UnknownKey(ConfigError):
    category = "UnknownKey"

    def __init__(self, key: str):
        super().__init__(key, "unknown key")


class UnknownValue(ConfigError):
    category = "UnknownValue"


class ConfigTypeError(ConfigError):
    category = "TypeError"


class RangeError(ConfigError):
    category = "RangeError"


class MissingFile(ConfigError):
    category = "MissingFile"

    def __init__(self, key: str, path: str):
        super().__init__(key, f"file not found: {path}")
        self.path = path
