"""Point-cloud change monitoring toolkit.

Registers repeat-visit scans of a structure into a common frame, measures
cloud-to-cloud and Hausdorff distances over regions of interest, injects
synthetic deteriorations for validation, and maintains a persistent epoch
registry with comparison reports.
"""

from .cloud import Aabb, PointCloud, bounding_box, merge
from .distances import (
    DistanceField,
    DistanceSummary,
    c2c_distances,
    directed_hausdorff,
    hausdorff,
)
from .errors import (
    CloudTwinError,
    DegenerateGeometryError,
    EmptyCloudError,
    EmptySelectionError,
    ParseError,
    RegistryError,
)
from .io import load_cloud, save_cloud
from .kdtree import KdIndex, build_index, nearest
from .pipeline import (
    ComparisonReport,
    EpochRecord,
    classify_changes,
    compare_epochs,
    emit_report,
    register_epoch,
)
from .regions import ObbRegion, crop, exclude, load_regions
from .registration import (
    CorrespondenceSet,
    IcpResult,
    RigidTransform,
    apply_transform,
    icp_refine,
    load_correspondences,
    rough_align,
)
from .simulate import (
    PlaneFit,
    SlenderElement,
    fit_plane,
    make_wall,
    simulate_crack_like_edge,
    simulate_true_crack,
)

__version__ = "0.1.0"
