"""Reference IK solvers: damped-least-squares Jacobian iteration with
multi-restart, and a direct MLP pose-to-angles regressor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, Tape
from .optim import Adam


@dataclass(frozen=True)
class DlsConfig:
    damping: float = 0.1
    max_iters: int = 200
    step_tol: float = 1e-8
    restarts: int = 16

    def __post_init__(self):
        if self.damping <= 0 or self.max_iters < 1:
            raise ValueError("damping must be > 0 and max_iters >= 1")


def _limit_step(chain, y):
    """Pull a candidate inside the limits: joints spanning the full circle
    wrap modulo 2*pi (exact for revolute joints), the rest clamp."""
    lo, hi = chain.limits_lo, chain.limits_hi
    full = (hi - lo) >= 2 * np.pi - 1e-9
    wrapped = lo + np.mod(y - lo, 2 * np.pi)
    return np.where(full, wrapped, np.clip(y, lo, hi))


def dls_solve(chain, target, init, cfg=DlsConfig()):
    """Iterate dy = J^T (J J^T + lambda^2 I)^-1 e with per-step limit
    clamping (full-circle joints wrap instead, which cannot change the
    pose). The damping escalates x10 whenever a step fails to reduce
    the residual (or the 3x3 system is singular), so accepted steps are
    monotone in residual and the solve never fails hard.
    Returns (angles, |FK(angles) - target|).
    """
    target = np.asarray(target, dtype=float)
    y = chain.clamp(init)
    chain.check_limits(y)
    residual = float(np.linalg.norm(chain.forward(y) - target))
    lam = cfg.damping
    for _ in range(cfg.max_iters):
        e = target - chain.forward(y)
        jac = chain.jacobian(y)
        step = None
        for _ in range(12):
            a = jac @ jac.T + lam * lam * np.eye(3)
            try:
                step = jac.T @ np.linalg.solve(a, e)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            cand = _limit_step(chain, y + step)
            r = float(np.linalg.norm(chain.forward(cand) - target))
            if r <= residual:
                break
            lam *= 10
            step = None
        if step is None:
            break  # stalled even with heavy damping
        if float(np.linalg.norm(cand - y, ord=np.inf)) < cfg.step_tol:
            y, residual = cand, r
            break
        y, residual = cand, r
        lam = max(cfg.damping, lam / 10)
        if residual < 1e-12:
            break
    return y, residual


def dls_multi_restart(chain, target, cfg=DlsConfig(), rng=None):
    """Independent uniform restarts, deduplicated (max-norm < 1e-3 rad)
    and sorted by (residual, restart index). Best-first."""
    rng = rng or np.random.default_rng(0)
    results = []
    for i in range(cfg.restarts):
        init = rng.uniform(chain.limits_lo, chain.limits_hi)
        y, r = dls_solve(chain, target, init, cfg)
        results.append((r, i, y))
    results.sort(key=lambda t: (t[0], t[1]))
    unique = []
    for r, _, y in results:
        if all(np.max(np.abs(y - u)) >= 1e-3 for u, _ in unique):
            unique.append((y, r))
    return unique


class MlpBaseline:
    """Direct regressor x -> y: three linear layers, width 1024, ReLU
    between, trained with mean squared error. One forward pass per
    solve; incapable of representing multiple solutions.
    """

    def __init__(self, chain, width=1024, depth=3, rng=None):
        rng = rng or np.random.default_rng(0)
        self.chain = chain
        dims = [3] + [width] * (depth - 1) + [chain.n_joints]
        self.params = {}
        for i in range(depth):
            s = 1.0 / np.sqrt(dims[i])
            self.params[f"{i}.w"] = Tensor(rng.uniform(-s, s, (dims[i], dims[i + 1])))
            self.params[f"{i}.b"] = Tensor(rng.uniform(-s, s, dims[i + 1]))
        self.depth = depth

    def forward(self, x):
        h = Tensor(np.atleast_2d(np.asarray(x, dtype=float)) / self.chain.reach)
        for i in range(self.depth):
            h = ad.add(ad.matmul(h, self.params[f"{i}.w"]), self.params[f"{i}.b"])
            if i < self.depth - 1:
                h = ad.relu(h)
        return h

    def fit(self, X, Y, epochs=50, batch_size=256, lr=1e-3, seed=0):
        opt = Adam(sorted(self.params.items()), lr=lr)
        rng = np.random.default_rng([seed, 0x317])
        for _ in range(epochs):
            order = rng.permutation(len(X))
            for i in range(0, len(X), batch_size):
                idx = order[i:i + batch_size]
                with Tape() as tape:
                    pred = self.forward(X[idx])
                    err = ad.sub(pred, Tensor(Y[idx]))
                    loss = ad.mul(ad.tsum(ad.mul(err, err)), 1.0 / len(idx))
                opt.zero_grad()
                tape.backward(loss)
                opt.step()
        return self

    def solve(self, x):
        single = np.asarray(x).ndim == 1
        y = self.forward(x).data
        y = np.clip(y, self.chain.limits_lo, self.chain.limits_hi)
        return y[0] if single else y
