"""Serial kinematic chains: forward kinematics, geometric Jacobian,
reachable sampling, link-length perturbation, and the planar 2-link
analytic solver used as an oracle.

A chain is an ordered list of revolute joints. Each joint rotates about
a fixed axis, then applies a fixed frame rotation (unit quaternion) and
translates by a fixed link offset expressed in the rotated frame.
Chains are immutable after construction; everything here is pure.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

_AXIS_TOL = 1e-9


def _quat_to_mat(q):
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _axis_angle_mat(axis, angle):
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * k + (1 - c) * (k @ k)


@dataclass(frozen=True)
class Joint:
    axis: tuple          # unit rotation axis, parent frame
    offset: tuple        # link offset to the next frame, meters
    rotation: tuple      # fixed frame rotation quaternion (w, x, y, z)
    limits: tuple        # (lo, hi) radians, lo < hi


class KinematicChain:
    def __init__(self, name, joints):
        if not joints:
            raise ValueError("chain needs at least one joint")
        for i, j in enumerate(joints):
            a = np.asarray(j.axis, dtype=float)
            if abs(np.linalg.norm(a) - 1.0) > _AXIS_TOL:
                raise ValueError(f"joint {i}: axis must be unit-norm, got {j.axis}")
            lo, hi = j.limits
            if not lo < hi:
                raise ValueError(f"joint {i}: limits must satisfy lo < hi, got {j.limits}")
        self.name = name
        self.joints = tuple(joints)
        self._axes = np.array([j.axis for j in joints], dtype=float)
        self._offsets = np.array([j.offset for j in joints], dtype=float)
        self._rots = np.stack([_quat_to_mat(j.rotation) for j in joints])
        self.limits_lo = np.array([j.limits[0] for j in joints])
        self.limits_hi = np.array([j.limits[1] for j in joints])
        self.reach = float(np.linalg.norm(self._offsets, axis=1).sum())
        if not (np.isfinite(self.reach) and self.reach > 0):
            raise ValueError("total reach must be finite and positive")

    @property
    def n_joints(self):
        return len(self.joints)

    def check_limits(self, angles, tol=1e-9):
        angles = np.asarray(angles, dtype=float)
        if angles.shape != (self.n_joints,):
            raise ValueError(f"expected {self.n_joints} angles, got shape {angles.shape}")
        for k in range(self.n_joints):
            if angles[k] < self.limits_lo[k] - tol or angles[k] > self.limits_hi[k] + tol:
                raise ValueError(
                    f"joint {k} angle {angles[k]:.6f} outside limits "
                    f"[{self.limits_lo[k]:.6f}, {self.limits_hi[k]:.6f}]"
                )
        return angles

    def clamp(self, angles):
        return np.clip(np.asarray(angles, dtype=float), self.limits_lo, self.limits_hi)

    def _frames(self, angles):
        """Joint origins and world axes along the chain, plus end position."""
        rot = np.eye(3)
        pos = np.zeros(3)
        origins = np.empty((self.n_joints, 3))
        axes_w = np.empty((self.n_joints, 3))
        for k in range(self.n_joints):
            origins[k] = pos
            axes_w[k] = rot @ self._axes[k]
            rot = rot @ _axis_angle_mat(self._axes[k], angles[k]) @ self._rots[k]
            pos = pos + rot @ self._offsets[k]
        return origins, axes_w, pos

    def forward(self, angles):
        """End-effector position for in-limit joint angles."""
        angles = self.check_limits(angles)
        return self._frames(angles)[2]

    def jacobian(self, angles):
        """Geometric position Jacobian, 3 x N."""
        angles = self.check_limits(angles)
        origins, axes_w, tip = self._frames(angles)
        return np.cross(axes_w, tip[None, :] - origins).T

    def sample_reachable(self, rng):
        """Uniform in-limit angles with their forward-kinematics pose."""
        y = rng.uniform(self.limits_lo, self.limits_hi)
        return y, self.forward(y)

    def perturbed(self, max_fraction, rng):
        """Copy with every link length scaled by U[1-f, 1+f]; axes,
        rotations, and limits unchanged."""
        if not 0 <= max_fraction < 1:
            raise ValueError("max_fraction must be in [0, 1)")
        factors = rng.uniform(1 - max_fraction, 1 + max_fraction, size=self.n_joints)
        joints = [
            Joint(j.axis, tuple(np.asarray(j.offset) * f), j.rotation, j.limits)
            for j, f in zip(self.joints, factors)
        ]
        return KinematicChain(self.name + "-perturbed", joints)

    # serialization ----------------------------------------------------

    def to_dict(self):
        return {
            "name": self.name,
            "joints": [
                {
                    "axis": list(map(float, j.axis)),
                    "offset": list(map(float, j.offset)),
                    "rotation": list(map(float, j.rotation)),
                    "limits": list(map(float, j.limits)),
                }
                for j in self.joints
            ],
        }

    @classmethod
    def from_dict(cls, d):
        joints = [
            Joint(tuple(j["axis"]), tuple(j["offset"]), tuple(j["rotation"]),
                  tuple(j["limits"]))
            for j in d["joints"]
        ]
        return cls(d["name"], joints)

    def content_hash(self):
        """64-bit hash of the canonical JSON form, for dataset headers."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def load_chain(path):
    """Load a chain spec file (JSON), or a bundled preset by name."""
    name = str(path)
    if name in PRESETS:
        text = resources.files("neuralik.chains").joinpath(f"{name}.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return KinematicChain.from_dict(json.loads(text))


def planar2_analytic_ik(l1, l2, target, limits=None):
    """All solutions of the planar 2-link chain (law of cosines).

    Returns 0, 1, or 2 joint-angle pairs; empty when the target lies
    outside the reachable annulus. Each result reproduces the target
    under forward kinematics to better than 1e-9.
    """
    if l1 <= 0 or l2 <= 0:
        raise ValueError("link lengths must be positive")
    tx, ty = float(target[0]), float(target[1])
    d2 = tx * tx + ty * ty
    c2 = (d2 - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if c2 > 1 + 1e-12 or c2 < -1 - 1e-12:
        return []
    c2 = min(1.0, max(-1.0, c2))
    base = math.atan2(ty, tx)
    sols = []
    for q2 in {math.acos(c2), -math.acos(c2)}:
        q1 = base - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
        q1 = math.atan2(math.sin(q1), math.cos(q1))  # wrap to (-pi, pi]
        if limits is not None:
            (lo1, hi1), (lo2, hi2) = limits
            if not (lo1 <= q1 <= hi1 and lo2 <= q2 <= hi2):
                continue
        sols.append(np.array([q1, q2]))
    # the two branches coincide when the elbow is straight
    if len(sols) == 2 and np.allclose(sols[0], sols[1], atol=1e-12):
        sols = sols[:1]
    return sols


# bundled presets ------------------------------------------------------

PRESETS = ("planar2", "planar4", "digit4")


def _planar_chain(name, n, link):
    z = (0.0, 0.0, 1.0)
    ident = (1.0, 0.0, 0.0, 0.0)
    joints = [Joint(z, (link, 0.0, 0.0), ident, (-math.pi, math.pi)) for _ in range(n)]
    return KinematicChain(name, joints)


def _digit4_chain():
    # synthetic 4-DoF 3D arm with the Digit arm's joint limit ranges
    ident = (1.0, 0.0, 0.0, 0.0)
    joints = [
        Joint((0.0, 0.0, 1.0), (0.10, 0.0, 0.05), ident, (-1.3, 1.3)),
        Joint((0.0, 1.0, 0.0), (0.30, 0.0, 0.0), ident, (-2.5, 2.5)),
        Joint((0.0, 1.0, 0.0), (0.30, 0.0, 0.0), ident, (-1.75, 1.75)),
        Joint((0.0, 0.0, 1.0), (0.20, 0.0, 0.0), ident, (-1.35, 1.35)),
    ]
    return KinematicChain("digit4", joints)


def preset_chain(name):
    if name == "planar2":
        return _planar_chain("planar2", 2, 1.0)
    if name == "planar4":
        return _planar_chain("planar4", 4, 0.5)
    if name == "digit4":
        return _digit4_chain()
    raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
