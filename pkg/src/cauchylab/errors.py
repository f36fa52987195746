"""Exception hierarchy used across the package."""


class CauchyLabError(Exception):
    """Base class for all errors raised by cauchylab."""


class ChartError(CauchyLabError):
    """Invalid chart, or an operation applied to the wrong kind of chart."""


class RankMismatchError(CauchyLabError):
    """Operands carry incompatible tensor ranks."""


class NotPositiveDefiniteError(CauchyLabError):
    """A metric failed the positive-definiteness test at some point."""

    def __init__(self, index, minor, value):
        self.index = tuple(int(i) for i in index)
        self.minor = int(minor)
        self.value = float(value)
        super().__init__(
            f"metric is not positive definite at grid index {self.index}: "
            f"leading minor of order {self.minor} equals {self.value:.6g}"
        )


class HypothesisError(CauchyLabError):
    """Input data violate the hypothesis an operation relies on."""


class PreconditionError(CauchyLabError):
    """A documented precondition of an operation does not hold."""


class SnapshotFormatError(CauchyLabError):
    """A snapshot file could not be parsed."""


class ConfigError(CauchyLabError):
    """A run configuration is invalid or refers to missing inputs."""
