"""Atlas-guided swim bladder detection for 2D fish embryo screening images.

Pipeline stages: body segmentation, mutual-information affine registration,
atlas construction and projection, circular-shortest-path contour
extraction, descriptor computation, and random-forest screening.
"""

from ._accel import HAVE_NUMBA, USE_NUMBA
from .atlas import Atlas, Roi, build_atlas, load_atlas, locate_roi, save_atlas
from .contour import (
    CircularPath,
    SegmentedShape,
    circular_shortest_path,
    extract_shape,
    path_to_shape,
    polar_transform,
    select_start_row,
)
from .descriptors import (
    FEATURE_NAMES,
    FeatureVector,
    RegionStats,
    concavity,
    convexity,
    elongation,
    feature_vector,
    intensity_features,
    region_stats,
)
from .forest import (
    ConfusionMatrix,
    CVReport,
    Dataset,
    ForestModel,
    ForestParams,
    cross_validate,
    metrics,
    train_forest,
)
from .imaging import (
    Affine2D,
    PointF,
    barycenter,
    mean_stack,
    median_stack,
    warp_affine,
    warp_prob,
)
from .labels import LABEL_WITH, LABEL_WITHOUT, LABELS, ORIENTATIONS
from .phantom import PhantomSpec, PhantomTruth, generate_cohort, generate_phantom
from .preprocessing import EmbryoContext, make_context, segment_embryo, skeleton_axis
from .registration import (
    JointHistogram,
    RegistrationConfig,
    joint_histogram,
    mutual_information,
    register_affine,
    transform_mask,
)

__version__ = "0.1.0"
