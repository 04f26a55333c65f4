"""Pose-complexity scoring and difficulty partition.

The score is the mean L1 distance of 7 pose reference points (shoulders,
elbows, wrists, torso) from their centroid; spread-out limbs raise it.
Thresholds 80 and 68 split inputs into easy/medium/hard.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# COCO-18 keypoint indices.
KP_NOSE = 0
KP_NECK = 1
KP_RIGHT_SHOULDER = 2
KP_RIGHT_ELBOW = 3
KP_RIGHT_WRIST = 4
KP_LEFT_SHOULDER = 5
KP_LEFT_ELBOW = 6
KP_LEFT_WRIST = 7
KP_RIGHT_HIP = 8
KP_LEFT_HIP = 11

# Roles that feed the reference points, in output order. The torso point is
# derived separately (hip midpoint with fallbacks).
DEFAULT_KEYPOINT_MAP = {
    "right_shoulder": KP_RIGHT_SHOULDER,
    "left_shoulder": KP_LEFT_SHOULDER,
    "right_elbow": KP_RIGHT_ELBOW,
    "left_elbow": KP_LEFT_ELBOW,
    "right_wrist": KP_RIGHT_WRIST,
    "left_wrist": KP_LEFT_WRIST,
}

EASY_THRESHOLD = 80.0
HARD_THRESHOLD = 68.0


@dataclass(frozen=True)
class PoseKeypoints:
    """18 ordered keypoints (x, y) with visibility flags, COCO-18 order."""

    points: np.ndarray  # (18, 2) float64
    visible: np.ndarray  # (18,) bool

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        visible = np.asarray(self.visible, dtype=bool)
        if points.shape != (18, 2):
            raise ValueError(f"points must be (18, 2), got {points.shape}")
        if visible.shape != (18,):
            raise ValueError(f"visible must be (18,), got {visible.shape}")
        if not np.isfinite(points[visible]).all():
            raise ValueError("visible keypoints must have finite coordinates")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "visible", visible)

    @classmethod
    def from_json(cls, text: str) -> "PoseKeypoints":
        doc = json.loads(text)
        rows = doc["keypoints"]
        if len(rows) != 18:
            raise ValueError(f"expected 18 keypoints, got {len(rows)}")
        arr = np.asarray(rows, dtype=np.float64)
        return cls(arr[:, :2], arr[:, 2] > 0)

    def to_json(self) -> str:
        rows = [
            [float(x), float(y), 1 if v else 0]
            for (x, y), v in zip(self.points, self.visible)
        ]
        return json.dumps({"keypoints": rows}, sort_keys=True)


@dataclass(frozen=True)
class ReferencePoints:
    """The 7 scoring points: shoulders, elbows, wrists, torso."""

    points: np.ndarray  # (7, 2) float64

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.shape != (7, 2):
            raise ValueError(f"reference points must be (7, 2), got {points.shape}")
        if not np.isfinite(points).all():
            raise ValueError("reference points must be finite")
        object.__setattr__(self, "points", points)


def reference_points(pose: PoseKeypoints, mapping: dict | None = None) -> ReferencePoints:
    """Extract the 7 reference points from a pose.

    Torso is the hip midpoint; with a hip missing it falls back to the
    neck, then to the single visible hip.
    """
    mapping = mapping or DEFAULT_KEYPOINT_MAP
    missing = [name for name, idx in mapping.items() if not pose.visible[idx]]
    if missing:
        raise ValueError(f"required keypoints not visible: {', '.join(sorted(missing))}")
    limbs = [pose.points[idx] for idx in mapping.values()]

    hips_visible = pose.visible[KP_RIGHT_HIP], pose.visible[KP_LEFT_HIP]
    if all(hips_visible):
        torso = (pose.points[KP_RIGHT_HIP] + pose.points[KP_LEFT_HIP]) / 2.0
    elif pose.visible[KP_NECK]:
        torso = pose.points[KP_NECK]
    elif hips_visible[0]:
        torso = pose.points[KP_RIGHT_HIP]
    elif hips_visible[1]:
        torso = pose.points[KP_LEFT_HIP]
    else:
        raise ValueError("required keypoints not visible: neck or a hip (for the torso point)")
    return ReferencePoints(np.stack(limbs + [torso]))


def complexity(refs: ReferencePoints) -> float:
    """Mean L1 distance of the reference points from their centroid."""
    centroid = refs.points.mean(axis=0)
    return float(np.abs(refs.points - centroid).sum(axis=1).mean())


def partition(c: float) -> str:
    """Difficulty bucket for a complexity value: 'easy', 'medium' or 'hard'.

    Boundary values 68 and 80 land in 'medium'.
    """
    if not np.isfinite(c) or c < 0:
        raise ValueError(f"complexity must be finite and >= 0, got {c}")
    if c > EASY_THRESHOLD:
        return "easy"
    if c >= HARD_THRESHOLD:
        return "medium"
    return "hard"
