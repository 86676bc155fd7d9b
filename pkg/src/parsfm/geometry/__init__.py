from .camera import (
    BehindCameraError,
    CameraIntrinsics,
    CameraPose,
    angle_axis_to_matrix,
    matrix_to_quaternion,
    project,
    project_points,
    quaternion_to_matrix,
)
from .twoview import (
    DegenerateGeometryError,
    EstimationFailure,
    estimate_relative_pose,
    triangulate,
    triangulation_angle,
)
from .resection import resect_camera
from .ba import BaOptions, BaReport, solve_bundle
from .similarity import SimilarityTransform, umeyama_similarity

__all__ = [
    "BehindCameraError",
    "CameraIntrinsics",
    "CameraPose",
    "DegenerateGeometryError",
    "EstimationFailure",
    "BaOptions",
    "BaReport",
    "SimilarityTransform",
    "angle_axis_to_matrix",
    "estimate_relative_pose",
    "matrix_to_quaternion",
    "project",
    "project_points",
    "quaternion_to_matrix",
    "resect_camera",
    "solve_bundle",
    "triangulate",
    "triangulation_angle",
    "umeyama_similarity",
]
