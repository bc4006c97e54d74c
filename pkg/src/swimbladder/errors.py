"""Exception types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class SingularTransform(PipelineError):
    """Affine transform has zero determinant and cannot be applied."""


class EmptyStack(PipelineError):
    """A stack operation received no images."""


class DimensionMismatch(PipelineError):
    """Inputs that must share dimensions do not."""


class EmptyMask(PipelineError):
    """A mask operation requires at least one true pixel."""


class NoEmbryo(PipelineError):
    """Segmentation found no plausible embryo body."""


class DegenerateShape(PipelineError):
    """Shape has no dominant principal axis."""


class NoOverlap(PipelineError):
    """Warped moving image does not intersect the fixed frame."""


class AtlasDegenerate(PipelineError):
    """Built probability map never reaches 1.0."""


class InfeasibleStart(PipelineError):
    """Path start row lies below the minimum admissible radius."""


class OpenContour(PipelineError):
    """Rasterized contour left a gap; interior fill escaped."""


class EmptyRegion(PipelineError):
    """Statistics requested over a region with no pixels."""


class DegeneratePerimeter(PipelineError):
    """Shape has no border pixels; elongation is undefined."""


class SingleClass(PipelineError):
    """Training data contains only one class."""


class TooFewSamples(PipelineError):
    """Not enough samples per class for the requested fold count."""


class EmptyMatrix(PipelineError):
    """Confusion matrix has zero total count."""


class SpecOutOfFrame(PipelineError):
    """Synthetic embryo does not fit inside the requested frame."""
