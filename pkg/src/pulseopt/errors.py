"""Exception hierarchy shared across the package.

Every error carries a short machine-readable ``kind`` string that the CLI
maps onto its JSON error envelope and exit code.
"""


class PulseOptError(Exception):
    """Base class for all package errors."""

    kind = "error"


class InvalidWaveformError(PulseOptError):
    kind = "invalid-waveform"


class InvalidDofError(PulseOptError):
    kind = "invalid-dof"


class InvalidParamsError(PulseOptError):
    kind = "invalid-params"


class IntegrationFailureError(PulseOptError):
    kind = "integration-failure"


class NonExcitableShapeError(PulseOptError):
    kind = "non-excitable-shape"


class TitrationAmbiguousError(PulseOptError):
    kind = "titration-ambiguous"


class SegmentationError(PulseOptError):
    kind = "segmentation"


class UndefinedMetricError(PulseOptError):
    kind = "undefined-metric"


class WindowOverflowError(PulseOptError):
    kind = "window-overflow"


class InvalidCutoffError(PulseOptError):
    kind = "invalid-cutoff"


class OptimizationFailedError(PulseOptError):
    kind = "optimization-failed"


class InfeasibleResultError(PulseOptError):
    """Raised when a solve exhausts its budget without a feasible point.

    Carries the best attempt so callers can inspect or keep iterating.
    """

    kind = "infeasible-result"

    def __init__(self, message, waveform=None, cost=None):
        super().__init__(message)
        self.waveform = waveform
        self.cost = cost


class ManifestError(PulseOptError):
    kind = "manifest"


class CsvFormatError(PulseOptError):
    kind = "csv-format"
