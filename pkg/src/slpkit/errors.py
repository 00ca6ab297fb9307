"""Exception hierarchy shared by all slpkit modules.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class SlpkitError(Exception):
    """Base class for all slpkit errors."""


class ConfigError(SlpkitError):
    """Invalid configuration, paths, or parameter combinations."""


class DataError(SlpkitError):
    """Input data rejected: parse failures, coverage gate, empty buckets."""


class CoverageError(DataError):
    """Series rejected by the annual coverage gate."""

    def __init__(self, meter_id: str, coverage: float, required: float):
        self.meter_id = meter_id
        self.coverage = coverage
        self.required = required
        super().__init__(
            f"series {meter_id!r}: coverage {coverage:.4f} below required {required:.2f}"
        )


class NumericError(SlpkitError):
    """Numerical failure: rank-deficient fits, undetectable transitions."""
