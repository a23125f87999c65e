"""Exception taxonomy and process exit codes shared across the package.

Two failure families matter to callers: bad input (reject before any heavy
work) and numerical trouble discovered mid-computation.  The CLI maps the
former to exit code 2 and the latter to exit code 3.
"""


class InvalidInput(ValueError):
    """Arguments violate a documented precondition (shape, norm, range...)."""


class IoError(InvalidInput):
    """A file could not be read, parsed, or written.  Carries the path."""

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = str(reason)
        super().__init__(f"{self.path}: {self.reason}")


class NumericalFailure(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class DegenerateSpectrum(NumericalFailure):
    """An eigenvalue collision / singular resolvent makes the quantity undefined."""


class OutsideBulkRequired(InvalidInput):
    """The evaluation point must lie strictly outside the noise bulk."""


EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL_FAILURE = 3
