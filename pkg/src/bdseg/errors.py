"""Exception hierarchy.

Each error carries a short machine-readable ``code`` and an exit status so the
CLI can report ``error: <code>: <detail>`` and exit with the right number.
"""


class BdsegError(Exception):
    code = "error"
    exit_status = 3

    @property
    def detail(self) -> str:
        return str(self)

    def message(self) -> str:
        return f"error: {self.code}: {self.detail}"


class ParseError(BdsegError, ValueError):
    code = "parse"


class DomainError(BdsegError, ValueError):
    code = "domain"


class ShapeError(BdsegError, ValueError):
    code = "shape"


class FitError(BdsegError, ValueError):
    code = "fit"
    exit_status = 4


class SolveError(BdsegError, ArithmeticError):
    code = "solve"
    exit_status = 4


class ReconstructionError(BdsegError, RuntimeError):
    code = "reconstruct"
    exit_status = 4


class ConfigError(BdsegError, ValueError):
    code = "config"
    exit_status = 2


class UsageError(ConfigError):
    code = "usage"
