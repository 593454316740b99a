"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: input/format problems exit 2,
runtime failures (network, diverged training) exit 3.
"""


class MvprError(Exception):
    """Base class for all toolkit errors."""


class InputError(MvprError):
    """The caller supplied something we reject (bad file, bad arguments)."""


class ContractViolation(MvprError):
    """A documented precondition was violated."""


class FormatError(InputError):
    """A file could not be parsed (corrupt, truncated, wrong type)."""


class UnsupportedVersion(FormatError):
    """A binary file carries a format version we do not understand."""


class OutsideMeshFootprint(MvprError):
    """A ground trace missed the mesh; the viewpoint should be skipped."""


class TransportError(MvprError):
    """Network fetch failed after exhausting retries."""


class TrainingDiverged(MvprError):
    """Training produced a non-finite loss; carries the last good parameters."""

    def __init__(self, message: str, last_good_params=None, step: int = 0):
        super().__init__(message)
        self.last_good_params = last_good_params
        self.step = step
