"""JSON scene and pose files.

Cameras are stored by rotation and *center*: a world point ``P`` projects to
``p ~ R^T (P - center)`` with ``R`` the camera-to-world rotation.  Files that
store ``t = -R^T c`` instead will parse without complaint and produce
nonsense poses, so converters must pass centers.

Parsing is strict: unknown keys, wrong lengths and non-finite numbers are
rejected with an error naming the offending path, e.g.
``cameras[1].rotation.quaternion``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .geometry import CalibratedCamera, MatchPair, Pose, Quaternion, Scene, TripleMatch

FORMAT_VERSION = 1
ROTATION_AGREEMENT_TOL = 1e-8


class SceneFormatError(ValueError):
    """A scene or pose file could not be parsed; the message names the location."""


def _finite(values):
    if not all(math.isfinite(v) for v in np.ravel(values)):
        raise ValueError("all numbers must be finite")
    return values


Vec2 = Annotated[List[float], Field(min_length=2, max_length=2)]
Vec3 = Annotated[List[float], Field(min_length=3, max_length=3)]
Vec4 = Annotated[List[float], Field(min_length=4, max_length=4)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RotationModel(_Strict):
    quaternion: Optional[Vec4] = None
    matrix: Optional[Annotated[List[Vec3], Field(min_length=3, max_length=3)]] = None

    @field_validator("quaternion", "matrix")
    @classmethod
    def _check_finite(cls, v):
        return None if v is None else _finite(v)

    @model_validator(mode="after")
    def _consistent(self):
        if self.quaternion is None and self.matrix is None:
            raise ValueError("give a quaternion, a matrix, or both")
        if self.quaternion is not None and np.linalg.norm(self.quaternion) == 0:
            raise ValueError("quaternion must be nonzero")
        if self.matrix is not None:
            R = np.array(self.matrix)
            if np.abs(R.T @ R - np.eye(3)).max() > 1e-6 or np.linalg.det(R) < 0:
                raise ValueError("matrix is not a rotation")
        if self.quaternion is not None and self.matrix is not None:
            Rq = Quaternion.from_array(self.quaternion).normalized().to_matrix()
            gap = np.abs(Rq - np.array(self.matrix)).max()
            if gap > ROTATION_AGREEMENT_TOL:
                raise ValueError(f"quaternion and matrix disagree by {gap:.3g}")
        return self

    def to_quaternion(self) -> Quaternion:
        if self.quaternion is not None:
            return Quaternion.from_array(self.quaternion).normalized().canonical()
        return Quaternion.from_matrix(np.array(self.matrix))


class PoseModel(_Strict):
    rotation: RotationModel
    center: Vec3

    @field_validator("center")
    @classmethod
    def _check_finite(cls, v):
        return _finite(v)

    def to_pose(self) -> Pose:
        return Pose(self.rotation.to_quaternion(), np.array(self.center))


class CameraModel(PoseModel):
    id: str = Field(min_length=1)


class MatchModel(_Strict):
    target: Union[Vec2, Vec3]
    ref_camera: str
    ref_point: Union[Vec2, Vec3]

    @field_validator("target", "ref_point")
    @classmethod
    def _check_finite(cls, v):
        return _finite(v)


class TripleModel(_Strict):
    point3d: Vec3
    target: Union[Vec2, Vec3]

    @field_validator("point3d", "target")
    @classmethod
    def _check_finite(cls, v):
        return _finite(v)


class SceneModel(_Strict):
    format_version: Optional[int] = None
    cameras: List[CameraModel] = Field(min_length=1)
    matches: List[MatchModel]
    triple_match: Optional[TripleModel] = None

    @model_validator(mode="after")
    def _references(self):
        ids = [c.id for c in self.cameras]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ValueError(f"duplicate camera ids {sorted(dup)}")
        for k, m in enumerate(self.matches):
            if m.ref_camera not in ids:
                raise ValueError(f"matches[{k}].ref_camera {m.ref_camera!r} is not a known camera")
        return self


class PoseFileModel(_Strict):
    format_version: Optional[int] = None
    pose: PoseModel


def _location(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        elif str(part).startswith(("list[", "tuple[", "function-")):
            continue  # union branch labels
        else:
            out += f".{part}" if out else str(part)
    return out or "<root>"


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        lines.append(f"{_location(e['loc'])}: {e['msg']}")
    return "; ".join(dict.fromkeys(lines))


def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def parse_scene(text: str, source: str = "<scene>") -> Scene:
    data = _load_json(text, source)
    try:
        model = SceneModel.model_validate(data)
    except ValidationError as exc:
        raise SceneFormatError(f"{source}: {_format_validation(exc)}") from exc
    cams = [CalibratedCamera(c.id, c.to_pose()) for c in model.cameras]
    matches = [MatchPair(np.array(m.target), m.ref_camera, np.array(m.ref_point)) for m in model.matches]
    triple = None
    if model.triple_match is not None:
        triple = TripleMatch(np.array(model.triple_match.point3d), np.array(model.triple_match.target))
    return Scene(cams, matches, triple)


def parse_pose(text: str, source: str = "<pose>") -> Pose:
    data = _load_json(text, source)
    try:
        return PoseFileModel.model_validate(data).pose.to_pose()
    except ValidationError as exc:
        raise SceneFormatError(f"{source}: {_format_validation(exc)}") from exc


def read_scene(path) -> Scene:
    path = Path(path)
    return parse_scene(path.read_text(), str(path))


def read_pose(path) -> Pose:
    path = Path(path)
    return parse_pose(path.read_text(), str(path))


def _xy(p) -> list:
    p = np.asarray(p, dtype=float)
    if p.shape == (3,):
        p = p[:2] / p[2]
    return [float(v) for v in p]


def pose_to_dict(pose: Pose) -> dict:
    return {
        "rotation": {"quaternion": [float(v) for v in pose.rotation.as_array()]},
        "center": [float(v) for v in pose.translation],
    }


def scene_to_dict(scene: Scene) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "cameras": [{"id": c.id, **pose_to_dict(c.pose)} for c in scene.cameras],
        "matches": [
            {"target": _xy(m.target_point), "ref_camera": m.ref_camera, "ref_point": _xy(m.ref_point)}
            for m in scene.matches
        ],
    }
    if scene.triple_match is not None:
        doc["triple_match"] = {
            "point3d": [float(v) for v in scene.triple_match.point3d],
            "target": _xy(scene.triple_match.target_point),
        }
    return doc


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def write_scene(path, scene: Scene) -> None:
    write_json(path, scene_to_dict(scene))


def write_pose(path, pose: Pose) -> None:
    write_json(path, {"format_version": FORMAT_VERSION, "pose": pose_to_dict(pose)})


__all__ = [
    "FORMAT_VERSION",
    "SceneFormatError",
    "parse_pose",
    "parse_scene",
    "pose_to_dict",
    "read_pose",
    "read_scene",
    "scene_to_dict",
    "write_json",
    "write_pose",
    "write_scene",
]
