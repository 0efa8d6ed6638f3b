"""Exception types shared across the package."""


class DivanError(Exception):
    """Base class for all package errors."""


class DatasetError(DivanError):
    """Ingestion, schema, or dataset-directory problems."""


class IntegrityError(DatasetError):
    """On-disk data does not match its recorded checksum or version."""


class BinningError(DivanError):
    """Invalid binning request (bad B, empty subset, missing bounds)."""


class SubsetTooSmallError(BinningError):
    """Subset is below the approximate-binning threshold; use exact binning.

    Raised instead of silently producing skewed bins.
    """


class AggregationError(DivanError):
    """Invalid aggregation request (bad bins, bad partition count)."""


class PlanError(DivanError):
    """Invalid distribution-plan request."""


class PlanRejectedError(PlanError):
    """A plan does not fit the per-worker memory model."""


class SimInvariantError(DivanError):
    """The simulator reached a state its model forbids."""


class RenderError(DivanError):
    """Invalid render request (spec/cube mismatch, bad partition count)."""


class PipelineError(DivanError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
