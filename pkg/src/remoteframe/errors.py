"""Exception hierarchy shared by every layer.

Each error carries a stable numeric code so the command channel can ship
failures over the wire and clients in other languages can match on them.
"""

from __future__ import annotations


class RemoteFrameError(Exception):
    """Base class for all errors raised by this package."""

    code = 1


class DimensionMismatchError(RemoteFrameError):
    code = 10


class OutOfBoundsError(RemoteFrameError):
    code = 11


class TruncatedPayloadError(RemoteFrameError):
    code = 12


class UnknownEncodingError(RemoteFrameError):
    code = 13


class MalformedPayloadError(RemoteFrameError):
    code = 14


class CompressionFailureError(RemoteFrameError):
    code = 15


class VersionMismatchError(RemoteFrameError):
    code = 20


class AuthFailedError(RemoteFrameError):
    code = 21


class ChannelClosedError(RemoteFrameError):
    code = 22


class TimeoutExpiredError(RemoteFrameError):
    code = 23


class BindFailedError(RemoteFrameError):
    code = 24


class ServiceUnknownError(RemoteFrameError):
    code = 25


class NotFoundError(RemoteFrameError):
    code = 30


class InvalidArgumentError(RemoteFrameError):
    code = 31


class DuplicateIdError(RemoteFrameError):
    code = 32


class QuotaExceededError(RemoteFrameError):
    code = 33


class UnknownCommandError(RemoteFrameError):
    code = 34


class CommandFailedError(RemoteFrameError):
    code = 35

    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


class IsADirectoryError_(RemoteFrameError):
    code = 36


class PathEscapeError(RemoteFrameError):
    code = 37


class UnsupportedSensorError(RemoteFrameError):
    code = 38


class UnknownOpcodeError(RemoteFrameError):
    code = 39


class UnknownGeneratorError(RemoteFrameError):
    code = 40


class TimeRegressionError(RemoteFrameError):
    code = 41


class ScenarioFormatError(RemoteFrameError):
    code = 42
