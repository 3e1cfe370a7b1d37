"""Exception hierarchy shared by the library and the CLI.

Library code raises these; only ``sazig.main`` turns them into exit codes.
"""


class SazigError(Exception):
    """Base class for every error raised by sazig."""

    exit_code = 3


class ValidationError(SazigError, ValueError):
    """Bad input data, configuration or command-line flags."""

    exit_code = 2


class FormatError(SazigError):
    """An artifact file is malformed or has the wrong header."""

    exit_code = 4


class InvalidMeanError(SazigError):
    """A linear predictor maps outside the Gamma mean's natural space.

    Raised for the canonical link when tau >= 0 and for the log link when
    exp(tau) overflows. Step-halving catches it; anywhere else it is fatal.
    """

    def __init__(self, tau, link, side=None, index=None, other=None):
        self.tau = float(tau)
        self.link = link
        self.side = side
        self.index = index
        self.other = other
        where = ""
        if side is not None:
            where = f" at {side}={index}, other={other}"
        super().__init__(f"invalid Gamma mean for {link} link (tau={self.tau:.6g}){where}")


class SingularInformationError(SazigError):
    """The information matrix stayed non positive-definite after ridge escalation."""


class FitAborted(SazigError):
    """Every index of a sweep was skipped; the fit cannot make progress."""
