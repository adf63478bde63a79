"""cmf-relay error states.

Every error carries a short title, a human readable text and the process exit
code the command line front end terminates with.
"""
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_OUTPUT = 3


class CmfError(RuntimeError):
    """cmf-relay error structure."""
    title: str
    text: str
    id: Optional[str] = None
    exit_code: int
    details: Optional[str] = None

    def __init__(self, details: str = ""):
        if details:
            self.details = details
        super().__init__(self.text)

    def __str__(self):
        if self.details:
            return f"{self.text}: {self.details}"
        return self.text

    def text_response(self):
        """Return the message printed on standard error."""
        # pylint: disable=consider-using-f-string
        return "%s: %s\n%s" % (self.title, self.text,
                               self.details if self.details else "")


class UsageError(CmfError):
    """Exit code 1, the caller asked for something invalid"""
    title = "Usage error"
    text = "Invalid usage"
    id = "usage-error"
    exit_code = EXIT_USAGE


class InvalidEcv(UsageError):
    """The zero vector or a non canonical vector was passed"""
    title = "Invalid ECV"
    text = "Equation coefficient vector is not valid here"
    id = "invalid-ecv"


class InvalidCandidateSet(UsageError):
    """Candidate set is too small or does not fit the table"""
    title = "Invalid candidate set"
    text = "Candidate set can not be built"
    id = "invalid-candidate-set"


class InvalidConfig(UsageError):
    """Inconsistent configuration or command line values"""
    title = "Invalid configuration"
    text = "Configuration values are not valid"
    id = "invalid-config"


class NumericError(CmfError):
    """Exit code 2, a computation could not meet its guarantees"""
    title = "Numeric error"
    text = "Computation failed"
    id = "numeric-error"
    exit_code = EXIT_NUMERIC


class QuadratureError(NumericError):
    """Adaptive quadrature did not reach the requested tolerance"""
    title = "Quadrature error"
    text = "Integration did not reach the requested tolerance"
    id = "quadrature-error"

    def __init__(self, achieved: float, requested: float, details: str = ""):
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            details or f"error estimate {achieved:.3g} > {requested:.3g}")


class CompositionOverflow(NumericError):
    """Too many relay compositions to enumerate"""
    title = "Composition overflow"
    text = "Number of compositions exceeds the configured cap"
    id = "composition-overflow"


class TableCoverageError(NumericError):
    """The g_min table does not cover the requested channel or size"""
    title = "Table coverage"
    text = "g_min table does not cover the request"
    id = "table-coverage"


class OutputError(CmfError):
    """Exit code 3, results could not be written"""
    title = "Output error"
    text = "Output file can not be written"
    id = "output-error"
    exit_code = EXIT_OUTPUT
