"""Exception hierarchy shared by every chirpletkit module."""


class ChirpletError(Exception):
    """Base class for all errors raised by chirpletkit."""


class InvalidInputError(ChirpletError, ValueError):
    pass


class DomainError(ChirpletError, ValueError):
    pass


class DegenerateAtomError(DomainError):
    """A sampled chirplet has no energy left to normalize."""


class DegenerateResidualError(DomainError):
    pass


class SignalTooShortError(DomainError):
    """The signal is too short to hold a single rotated dictionary level."""


class UndefinedRIError(DomainError):
    pass


class UndefinedTestError(DomainError):
    pass


class ParseError(ChirpletError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedFormatError(ChirpletError):
    pass


class FormatVersionError(ChirpletError):
    pass


class CorruptFileError(ChirpletError):
    pass
