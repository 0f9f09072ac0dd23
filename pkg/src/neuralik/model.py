"""The neural IK model: a hypernetwork maps an end-effector position to
the weights of N per-joint primary networks, each of which emits a
one-dimensional Gaussian mixture over that joint's angle conditioned on
the previously chosen joints. Solutions are drawn by ancestral sampling
down the chain; training maximizes teacher-forced log likelihood.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, Tape, BatchNormState
from .gmm import VAR_FLOOR, GmmParams, mixture_log_prob

CHECKPOINT_MAGIC = b"IKNT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    n_joints: int
    n_components: int
    hyper_width: int
    hyper_depth: int
    primary_hidden: int
    primary_depth: int
    pose_scale: float            # total chain reach, meters
    limits_lo: tuple
    limits_hi: tuple
    preset: str = "desk"

    def __post_init__(self):
        if self.n_joints < 1 or self.n_components < 1:
            raise ValueError("n_joints and n_components must be >= 1")
        if self.hyper_depth < 2 or self.primary_depth < 2:
            raise ValueError("network depths must be >= 2")
        if len(self.limits_lo) != self.n_joints or len(self.limits_hi) != self.n_joints:
            raise ValueError("limit vectors must have one entry per joint")

    @classmethod
    def for_chain(cls, chain, preset="desk", **overrides):
        sizes = {
            "paper": dict(n_components=50, hyper_width=1024, hyper_depth=4,
                          primary_hidden=256, primary_depth=3),
            "desk": dict(n_components=10, hyper_width=256, hyper_depth=4,
                         primary_hidden=64, primary_depth=3),
        }
        if preset not in sizes:
            raise ValueError(f"unknown preset {preset!r}")
        kw = sizes[preset] | overrides
        return cls(n_joints=chain.n_joints, pose_scale=chain.reach,
                   limits_lo=tuple(chain.limits_lo), limits_hi=tuple(chain.limits_hi),
                   preset=preset, **kw)

    def to_json(self):
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, s):
        d = json.loads(s)
        d["limits_lo"] = tuple(d["limits_lo"])
        d["limits_hi"] = tuple(d["limits_hi"])
        return cls(**d)


class PrimaryLayout:
    """Flat-vector layout of one primary network's weights per joint.

    Joint k (0-based) takes max(k, 1) inputs: the normalized previously
    sampled angles, or a constant 1 for the first joint. The layout is a
    pure function of the config; encode/decode round-trip exactly.
    """

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.layers = []   # per joint: list of (w_off, rows, cols, b_off)
        self.sizes = []    # P_k per joint
        out_dim = 3 * cfg.n_components
        for k in range(cfg.n_joints):
            dims = [max(k, 1)] + [cfg.primary_hidden] * (cfg.primary_depth - 1) + [out_dim]
            off = 0
            specs = []
            for i in range(cfg.primary_depth):
                rows, cols = dims[i + 1], dims[i]
                specs.append((off, rows, cols, off + rows * cols))
                off += rows * cols + rows
            self.layers.append(specs)
            self.sizes.append(off)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.total = int(self.offsets[-1])

    def input_width(self, k):
        return max(k, 1)

    def encode(self, k, weights):
        """Flatten [(W, b), ...] for joint k into a P_k vector."""
        vec = np.empty(self.sizes[k])
        for (w_off, rows, cols, b_off), (w, b) in zip(self.layers[k], weights):
            if w.shape != (rows, cols) or b.shape != (rows,):
                raise ValueError(f"joint {k}: layer shape mismatch")
            vec[w_off:w_off + rows * cols] = w.ravel()
            vec[b_off:b_off + rows] = b
        return vec

    def decode(self, k, vec):
        """Inverse of encode."""
        out = []
        for w_off, rows, cols, b_off in self.layers[k]:
            out.append((vec[w_off:w_off + rows * cols].reshape(rows, cols),
                        vec[b_off:b_off + rows].copy()))
        return out


class IkModel:
    """Hypernetwork trunk + per-joint projection heads + batch-norm state."""

    def __init__(self, cfg: ModelConfig, rng=None):
        self.cfg = cfg
        self.layout = PrimaryLayout(cfg)
        self.params = {}
        self.bn_states = [BatchNormState(cfg.hyper_width) for _ in range(cfg.hyper_depth)]
        rng = rng or np.random.default_rng(0)
        dims = [3] + [cfg.hyper_width] * cfg.hyper_depth
        for i in range(cfg.hyper_depth):
            s = 1.0 / np.sqrt(dims[i])
            self.params[f"trunk.{i}.w"] = Tensor(rng.uniform(-s, s, (dims[i], dims[i + 1])))
            self.params[f"trunk.{i}.b"] = Tensor(rng.uniform(-s, s, dims[i + 1]))
            self.params[f"trunk.{i}.gamma"] = Tensor(np.ones(dims[i + 1]))
            self.params[f"trunk.{i}.beta"] = Tensor(np.zeros(dims[i + 1]))
        # heads start near zero so the initial mixtures are broad and uniform
        s = 0.01 / np.sqrt(cfg.hyper_width)
        self.params["head.w"] = Tensor(rng.uniform(-s, s, (cfg.hyper_width, self.layout.total)))
        self.params["head.b"] = Tensor(rng.uniform(-s, s, self.layout.total))
        lo = np.asarray(cfg.limits_lo)
        hi = np.asarray(cfg.limits_hi)
        self._center = (hi + lo) / 2
        self._half = (hi - lo) / 2

    # parameter bookkeeping --------------------------------------------

    def named_parameters(self):
        return sorted(self.params.items())

    def state_dict(self):
        d = {name: t.data.copy() for name, t in self.params.items()}
        for i, st in enumerate(self.bn_states):
            d[f"trunk.{i}.running_mean"] = st.running_mean.copy()
            d[f"trunk.{i}.running_var"] = st.running_var.copy()
        return d

    def load_state_dict(self, d):
        for name, t in self.params.items():
            t.data = d[name].copy()
        for i, st in enumerate(self.bn_states):
            st.running_mean = d[f"trunk.{i}.running_mean"].copy()
            st.running_var = d[f"trunk.{i}.running_var"].copy()

    # normalization ------------------------------------------------------

    def normalize_pose(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite pose input")
        return x / self.cfg.pose_scale

    def normalize_angles(self, y, upto=None):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        k = y.shape[1] if upto is None else upto
        return (y[:, :k] - self._center[:k]) / self._half[:k]

    # forward passes -----------------------------------------------------

    def trunk_forward(self, x, training):
        """Trunk activations (the learned pose embedding), shape (B, width)."""
        h = Tensor(self.normalize_pose(x))
        for i in range(self.cfg.hyper_depth):
            h = ad.add(ad.matmul(h, self.params[f"trunk.{i}.w"]), self.params[f"trunk.{i}.b"])
            h = ad.relu(h)
            h = ad.batch_norm(h, self.params[f"trunk.{i}.gamma"],
                              self.params[f"trunk.{i}.beta"], self.bn_states[i], training)
        return h

    def theta_forward(self, x, training):
        """All primary-network weight vectors, concatenated: (B, sum P_k)."""
        trunk = self.trunk_forward(x, training)
        theta = ad.add(ad.matmul(trunk, self.params["head.w"]), self.params["head.b"])
        return theta, trunk

    def joint_gmm(self, theta, k, prev):
        """Mixture parameters (radians) for joint k.

        theta: Tensor (B, total); prev: (B, k) previously fixed angles in
        radians (ignored for k=0, which sees a constant input of 1).
        """
        b = theta.data.shape[0]
        if k == 0:
            inp = np.ones((b, 1))
        else:
            prev = np.atleast_2d(np.asarray(prev, dtype=float))
            if prev.shape != (b, k):
                raise ValueError(f"joint {k}: expected {k} conditioning angles per sample, "
                                 f"got shape {prev.shape}")
            inp = self.normalize_angles(prev, upto=k)
        h = Tensor(inp)
        base = self.layout.offsets[k]
        for i, (w_off, rows, cols, b_off) in enumerate(self.layout.layers[k]):
            w = ad.reshape(ad.slice_cols(theta, base + w_off, base + w_off + rows * cols),
                           (b, rows, cols))
            bias = ad.slice_cols(theta, base + b_off, base + b_off + rows)
            h = ad.add(ad.batched_matvec(w, h), bias)
            if i < self.cfg.primary_depth - 1:
                h = ad.relu(h)
        m = self.cfg.n_components
        means = ad.add(ad.mul(ad.slice_cols(h, 0, m), self._half[k]), self._center[k])
        variances = ad.add(ad.mul(ad.softplus(ad.slice_cols(h, m, 2 * m)),
                                  self._half[k] ** 2), VAR_FLOOR)
        priors = ad.sparsemax(ad.slice_cols(h, 2 * m, 3 * m))
        return means, variances, priors

    # training loss --------------------------------------------------------

    def per_sample_log_likelihood(self, x, y, training):
        """Teacher-forced log p(y | x) per sample, as a Tensor (B,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        theta, _ = self.theta_forward(x, training)
        total = None
        for k in range(self.cfg.n_joints):
            means, variances, priors = self.joint_gmm(theta, k, y[:, :k])
            lp = mixture_log_prob(means, variances, priors, y[:, k])
            total = lp if total is None else ad.add(total, lp)
        return total

    def nll_loss(self, x, y, training=True):
        """Mean negative log likelihood over a teacher-forced batch."""
        lp = self.per_sample_log_likelihood(x, y, training)
        if not np.all(np.isfinite(lp.data)):
            bad = int(np.flatnonzero(~np.isfinite(lp.data))[0])
            raise FloatingPointError(f"non-finite log likelihood at sample index {bad}")
        return ad.mul(ad.tsum(lp), -1.0 / lp.data.size)

    def solution_log_likelihood(self, x, y):
        """log p(y | x) of one candidate solution (no sampling involved)."""
        lp = self.per_sample_log_likelihood(np.asarray(x)[None, :],
                                            np.asarray(y)[None, :], training=False)
        return float(lp.data[0])

    # ancestral sampling ----------------------------------------------------

    def _primary_batch_np(self, theta, k, prev_norm):
        """Numpy-only primary forward with a samples axis.

        theta: (P, total); prev_norm: (P, S, in_k) normalized inputs.
        Returns raw output (P, S, 3m).
        """
        h = prev_norm
        base = self.layout.offsets[k]
        for i, (w_off, rows, cols, b_off) in enumerate(self.layout.layers[k]):
            w = theta[:, base + w_off:base + w_off + rows * cols].reshape(-1, rows, cols)
            bias = theta[:, base + b_off:base + b_off + rows]
            h = np.einsum("prc,psc->psr", w, h) + bias[:, None, :]
            if i < self.cfg.primary_depth - 1:
                h = np.maximum(h, 0.0)
        return h

    def sample_solutions(self, poses, n_samples, rng, chunk_rows=20000):
        """Draw n_samples joint vectors per pose; returns (P, S, N).

        Every sampled angle is clamped to its joint's limits before
        being fed to later joints and before any forward kinematics.
        """
        poses = np.atleast_2d(np.asarray(poses, dtype=float))
        n_poses = poses.shape[0]
        n = self.cfg.n_joints
        m = self.cfg.n_components
        lo = np.asarray(self.cfg.limits_lo)
        hi = np.asarray(self.cfg.limits_hi)
        out = np.empty((n_poses, n_samples, n))
        chunk = max(1, chunk_rows // max(1, n_samples))
        for s0 in range(0, n_poses, chunk):
            px = poses[s0:s0 + chunk]
            c = px.shape[0]
            theta, _ = self.theta_forward(px, training=False)
            theta = theta.data
            angles = np.empty((c, n_samples, n))
            for k in range(n):
                if k == 0:
                    inp = np.ones((c, n_samples, 1))
                else:
                    inp = (angles[:, :, :k] - self._center[:k]) / self._half[:k]
                raw = self._primary_batch_np(theta, k, inp)
                means = raw[..., :m] * self._half[k] + self._center[k]
                variances = np.logaddexp(0.0, raw[..., m:2 * m]) * self._half[k] ** 2 + VAR_FLOOR
                priors = ad.sparsemax(raw[..., 2 * m:].reshape(-1, m)).reshape(c, n_samples, m)
                cdf = np.cumsum(priors, axis=-1)
                u = rng.random((c, n_samples, 1))
                idx = np.minimum((u > cdf).sum(axis=-1), m - 1)
                mu = np.take_along_axis(means, idx[..., None], axis=-1)[..., 0]
                var = np.take_along_axis(variances, idx[..., None], axis=-1)[..., 0]
                draw = mu + np.sqrt(var) * rng.standard_normal((c, n_samples))
                angles[:, :, k] = np.clip(draw, lo[k], hi[k])
            out[s0:s0 + chunk] = angles
        return out

    def sample_solution(self, pose, rng):
        """One ancestral sample for one pose."""
        return self.sample_solutions(np.asarray(pose)[None, :], 1, rng)[0, 0]

    def joint_gmm_params(self, pose, prev):
        """GmmParams (radians) for one pose and a prefix of fixed angles."""
        k = len(prev)
        theta, _ = self.theta_forward(np.asarray(pose)[None, :], training=False)
        means, variances, priors = self.joint_gmm(
            theta, k, np.asarray(prev, dtype=float)[None, :] if k else None)
        return GmmParams(means.data[0], variances.data[0], priors.data[0])

    def embed(self, poses):
        """Trunk activations per pose (the representation used downstream)."""
        trunk = self.trunk_forward(np.atleast_2d(np.asarray(poses, dtype=float)),
                                   training=False)
        return trunk.data.copy()

    # checkpoints ------------------------------------------------------------

    def save(self, path):
        state = self.state_dict()
        names = sorted(state)
        header = json.dumps({
            "config": json.loads(self.cfg.to_json()),
            "tensors": [[n, list(state[n].shape)] for n in names],
        }).encode()
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for n in names:
                fh.write(np.ascontiguousarray(state[n], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != CHECKPOINT_MAGIC:
                raise ValueError(f"not a checkpoint file (magic {magic!r})")
            version, = struct.unpack("<I", fh.read(4))
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            hlen, = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode())
            cfg = ModelConfig.from_json(json.dumps(header["config"]))
            model = cls(cfg)
            state = {}
            for name, shape in header["tensors"]:
                count = int(np.prod(shape)) if shape else 1
                buf = fh.read(count * 8)
                state[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        model.load_state_dict(state)
        return model
