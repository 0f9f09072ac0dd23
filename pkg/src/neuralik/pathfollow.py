"""Online path following: at every step each joint is sampled from its
mixture restricted to a radius-r neighborhood of that joint's previous
value, which bounds per-step joint motion and keeps the path smooth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmm import GmmParams, Neighborhood

DEFAULT_RADIUS = 0.1  # radians per step


@dataclass
class Trajectory:
    poses: np.ndarray       # (n, 3) target end-effector path
    joints: np.ndarray      # (n, N) sampled joint path, joints[0] = y0
    fk_errors: np.ndarray   # (n,) meters, |FK(joints[t]) - poses[t]|

    def __len__(self):
        return self.poses.shape[0]

    @property
    def mean_error(self):
        return float(self.fk_errors.mean())


def follow_path(model, chain, poses, y0, r=DEFAULT_RADIUS, rng=None):
    """Sample one smooth joint trajectory for the pose sequence.

    Step t consumes only poses[t] and the previous joint vector; each
    joint's draw is restricted to +-r of its previous value (the
    truncation fallback also lands inside that window), then clamped to
    the joint limits.
    """
    rng = rng or np.random.default_rng(0)
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    y0 = chain.clamp(y0)
    n = poses.shape[0]
    nj = model.cfg.n_joints
    joints = np.empty((n, nj))
    joints[0] = y0
    for t in range(1, n):
        theta, _ = model.theta_forward(poses[t][None, :], training=False)
        prev_t = joints[t - 1]
        current = np.empty(nj)
        for k in range(nj):
            means, variances, priors = model.joint_gmm(
                theta, k, current[None, :k] if k else None)
            params = GmmParams(means.data[0], variances.data[0], priors.data[0])
            v = params.sample_truncated(Neighborhood(prev_t[k], r), rng)
            current[k] = min(max(v, chain.limits_lo[k]), chain.limits_hi[k])
        joints[t] = current
    fk_errors = np.array([np.linalg.norm(chain.forward(joints[t]) - poses[t])
                          for t in range(n)])
    return Trajectory(poses, joints, fk_errors)


def follow_path_best_of(model, chain, poses, y0, r=DEFAULT_RADIUS, k=100, rng=None):
    """k independent trajectories; returns (lowest mean FK error, all k)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = rng or np.random.default_rng(0)
    runs = [follow_path(model, chain, poses, y0, r, child) for child in rng.spawn(k)]
    best = min(runs, key=lambda tr: tr.mean_error)
    return best, runs


def generate_smooth_path(chain, n, seed, max_delta=0.05):
    """Random smooth joint-space walk mapped through forward kinematics.

    Per-step joint deltas are bounded by max_delta radians. Returns
    (poses X, ground-truth joints Y); Y[0] seeds path following and Y
    scores recovered paths.
    """
    if n < 2:
        raise ValueError("a path needs at least 2 steps")
    rng = np.random.default_rng(seed)
    lo, hi = chain.limits_lo, chain.limits_hi
    span = hi - lo
    y = rng.uniform(lo + 0.1 * span, hi - 0.1 * span)
    vel = np.zeros(chain.n_joints)
    Y = np.empty((n, chain.n_joints))
    Y[0] = y
    for t in range(1, n):
        vel = 0.9 * vel + 0.1 * rng.normal(0.0, max_delta, chain.n_joints)
        vel = np.clip(vel, -max_delta, max_delta)
        y = np.clip(y + vel, lo, hi)
        Y[t] = y
    X = np.array([chain.forward(yt) for yt in Y])
    return X, Y


def save_trajectory(tr: Trajectory, path):
    nj = tr.joints.shape[1]
    cols = ["t", "x", "y", "z"] + [f"joint{k}" for k in range(nj)] + ["fk_error_m"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for t in range(len(tr)):
            row = [str(t)] + [repr(float(v)) for v in tr.poses[t]] \
                + [repr(float(v)) for v in tr.joints[t]] \
                + [repr(float(tr.fk_errors[t]))]
            fh.write(",".join(row) + "\n")
