"""Exception types shared across the package.

The CLI maps these onto exit codes: document/input problems exit 2,
numerical failures (degenerate or collinear features, non-finite math)
exit 3.
"""


class RegionTuneError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RegionTuneError):
    """An operation received arguments outside its contract."""


class InvalidCalibrationError(RegionTuneError):
    """Calibration reference energy is zero or negative."""


class InvalidSampleError(RegionTuneError):
    """A measurement sample violates its invariants (e.g. zero duration)."""


class DegenerateFeatureError(RegionTuneError):
    """A feature column is constant and cannot be standardized."""


class CollinearFeatureError(RegionTuneError):
    """A feature column is (near-)perfectly explained by its peers."""


class InvalidTuningModelError(RegionTuneError):
    """A tuning model cannot resolve a region to a configuration."""


class MeasurementError(RegionTuneError):
    """A measurement run failed; the message carries the candidate context."""


class DocumentError(RegionTuneError):
    """A document failed to parse or validate.

    Messages name the file, record and field so failures are actionable.
    """

    def __init__(self, source: str, field: str, problem: str):
        self.source = source
        self.field = field
        self.problem = problem
        super().__init__(f"{source}: {field}: {problem}")
