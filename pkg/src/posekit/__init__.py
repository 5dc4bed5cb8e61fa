"""posekit: differentiable geometric core for category-level 6D pose work.

Silhouette rendering with analytic gradients, similarity-transform pose
solving from canonical-space correspondences, the full training loss
suite, render-and-compare pose fitting, box-IOU / degree-cm evaluation,
and keyframe-propagation pose annotation.
"""

from .errors import (
    DegenerateConfigurationError,
    EmptyForegroundError,
    InsufficientPointsError,
    InvalidInputError,
    NoConsensusError,
    NoOverlapError,
    PosekitError,
    RegistrationFailedError,
)
from .geometry import (
    Intrinsics,
    NocsMap,
    PointCloud,
    Pose,
    Rotation,
    backproject,
    decouple_translation,
    project_points,
    project_translation,
    quat_to_matrix,
    transform_points,
)
from .shape import Deformation, Mesh, apply_deformation, load_mesh, load_prior, save_mesh
from .softrender import (
    RenderConfig,
    SoftMask,
    hard_mask,
    render_silhouette,
    render_with_gradients,
)
from .umeyama import RansacConfig, solve_similarity, solve_similarity_robust
from .losses import (
    LossWeights,
    SampleDomain,
    SymmetrySpec,
    chamfer,
    chamfer_mean,
    deformation_reg,
    nocs_loss,
    rotation_pm_loss,
    silhouette_loss,
    total_loss,
    translation_scale_loss,
)
from .fit import FitConfig, FitResult, fit_pose, fit_pose_and_shape
from .metrics import Box3D, EvalRecord, EvalThresholds, evaluate, iou3d, pose_error
from .registration import IcpConfig, RigidTransform, icp_colored, propagate
from .dataio import SceneSpec, VideoRecord, load_video, synth_generate, write_video

__version__ = "0.1.0"
