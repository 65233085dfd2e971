"""Absolute pose of a new calibrated camera from six matches to known cameras.

Each match pairs a point in the new image with a point in an image from a
camera whose pose is known.  Rotation comes from a Dixon resultant with one
hidden quaternion component; the translation then follows linearly.
"""

from .geometry import (
    CalibratedCamera,
    MatchPair,
    Pose,
    Quaternion,
    Scene,
    TripleMatch,
    rotation_angle_deg,
)
from .robust import RansacConfig, ransac_pose
from .solver import (
    PoseCandidate,
    SolutionSet,
    SolverConfig,
    UnsupportedConfigurationError,
    solve_pose,
    solve_pose_42,
)
from .synth import SyntheticSpec, generate_scene

__version__ = "0.1.0"

__all__ = [
    "CalibratedCamera",
    "MatchPair",
    "Pose",
    "PoseCandidate",
    "Quaternion",
    "RansacConfig",
    "Scene",
    "SolutionSet",
    "SolverConfig",
    "SyntheticSpec",
    "TripleMatch",
    "UnsupportedConfigurationError",
    "generate_scene",
    "ransac_pose",
    "rotation_angle_deg",
    "solve_pose",
    "solve_pose_42",
]
