"""Exception taxonomy for the figure tool (mirrors the harness exit codes)."""


class InvalidInput(ValueError):
    """Arguments or CSV contents violate a documented precondition."""


class IoError(InvalidInput):
    """A file could not be read or written.  Carries the path."""

    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = str(reason)
        super().__init__(f"{self.path}: {self.reason}")


EXIT_OK = 0
EXIT_INVALID_INPUT = 2
