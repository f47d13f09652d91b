"""Exception hierarchy shared by all rulebeam modules."""

from __future__ import annotations


class RulebeamError(Exception):
    """Base class for every error raised by this package."""


class AtomError(RulebeamError):
    """A sentence template violates the atom invariants."""


class InvalidRelationError(RulebeamError):
    """A relation name is empty or carries no usable words."""


class SpanConflictError(RulebeamError):
    """Entity character spans overlap, are empty, or fall out of bounds."""


class ModeConflictError(RulebeamError):
    """Standard/new-variable mode does not match the instantiation shape."""


class ParameterError(RulebeamError):
    """A configuration or argument value is outside its allowed range."""


class VocabularyError(RulebeamError):
    """A token id is unknown to the scorer vocabulary."""


class TransportError(RulebeamError):
    """The remote scorer service could not be reached."""


class ProtocolError(RulebeamError):
    """The remote scorer service answered with a malformed payload."""


class EmptyInstantiationError(RulebeamError):
    """No instantiation survived parsing and filtering."""


class DecodeAbortedError(RulebeamError):
    """The scorer failed mid-decode; carries partial diagnostics."""

    def __init__(self, message: str, *, timestep: int, finished_beams: int):
        super().__init__(message)
        self.timestep = timestep
        self.finished_beams = finished_beams


class OracleTooLargeError(RulebeamError):
    """An exhaustive enumeration request exceeds the safety guard."""


class DatasetFormatError(RulebeamError):
    """A dataset file is empty or mostly malformed."""


class CoverageInputError(RulebeamError):
    """The induced-rule map is missing a premise required by the gold set."""


class ArityError(RulebeamError):
    """A metric received fewer inputs than it is defined over."""
