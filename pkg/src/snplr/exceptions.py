"""Exception hierarchy used across the package."""


class SnplrError(Exception):
    """Base class for all package errors."""


class UndefinedLRError(SnplrError, ValueError):
    """The likelihood ratio is 0/0 (or x/0) at a locus.

    This is a data error, as opposed to an LR of exactly zero which is valid
    evidence (a mismatch with no allowance for calling errors).
    """

    def __init__(self, message, locus=None):
        super().__init__(message)
        self.locus = locus


class NoDataError(SnplrError, ValueError):
    """An estimator received a confusion table with no observations."""


class ParseError(SnplrError, ValueError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.source = source


class DuplicateSiteError(SnplrError, ValueError):
    """The same (segment, chromosome, position) occurs twice in one sample."""
