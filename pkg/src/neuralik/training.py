"""Dataset generation, the teacher-forced training loop, and fine-tuning."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .optim import Adam

DATASET_MAGIC = b"IKDS"
DATASET_VERSION = 1


@dataclass
class Dataset:
    chain_name: str
    chain_hash: int
    X: np.ndarray          # (n, 3) end-effector positions
    Y: np.ndarray          # (n, N) joint angles
    seed: int

    def __len__(self):
        return self.X.shape[0]


def generate_dataset(chain, n, seed):
    """n uniform-in-limits samples pushed through forward kinematics.

    Each pair is exactly FK-consistent by construction.
    """
    if n < 1:
        raise ValueError("dataset size must be >= 1")
    rng = np.random.default_rng(seed)
    Y = rng.uniform(chain.limits_lo, chain.limits_hi, size=(n, chain.n_joints))
    X = np.array([chain.forward(y) for y in Y])
    return Dataset(chain.name, chain.content_hash(), X, Y, seed)


def save_dataset(ds: Dataset, path):
    name = ds.chain_name.encode()
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<IQQIIq", DATASET_VERSION, ds.chain_hash, len(ds),
                             ds.Y.shape[1], len(name), ds.seed))
        fh.write(name)
        rec = np.hstack([ds.X, ds.Y]).astype("<f8")
        fh.write(np.ascontiguousarray(rec).tobytes())


def load_dataset(path):
    with open(path, "rb") as fh:
        if fh.read(4) != DATASET_MAGIC:
            raise ValueError("not a dataset file")
        version, chash, n, nj, namelen, seed = struct.unpack("<IQQIIq", fh.read(36))
        if version != DATASET_VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        name = fh.read(namelen).decode()
        rec = np.frombuffer(fh.read(n * (3 + nj) * 8), dtype="<f8").reshape(n, 3 + nj)
    return Dataset(name, chash, rec[:, :3].copy(), rec[:, 3:].copy(), seed)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0
    val_fraction: float = 0.05
    plateau_patience: int = 10      # epochs without val improvement before halving lr
    early_stop_patience: int = 0    # 0 disables early stopping
    grad_clip: float = 5.0          # global-norm clip; 0 disables
    preset: str = "desk"

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2 (batch-norm needs it)")
        if not 0 <= self.val_fraction < 0.5:
            raise ValueError("validation fraction must be in [0, 0.5)")


@dataclass
class TrainResult:
    history: list = field(default_factory=list)  # dicts: epoch, train_nll, val_nll, lr
    best_val: float = float("inf")
    best_epoch: int = -1
    diverged: bool = False


def _clip_global_norm(named_params, max_norm):
    total = 0.0
    for _, t in named_params:
        if t.grad is not None:
            total += float(np.dot(t.grad.ravel(), t.grad.ravel()))
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for _, t in named_params:
            if t.grad is not None:
                t.grad = t.grad * scale


def evaluate_nll(model, X, Y, batch_size=1024):
    """Mean NLL in inference mode (frozen batch-norm statistics)."""
    total = 0.0
    for i in range(0, len(X), batch_size):
        xb, yb = X[i:i + batch_size], Y[i:i + batch_size]
        total += model.nll_loss(xb, yb, training=False).data.item() * len(xb)
    return total / len(X)


def train(model, dataset: Dataset, cfg: TrainConfig):
    """Mini-batch teacher-forced NLL training; keeps the best-validation
    weights in the model on return. Fully deterministic given
    (model state, dataset, config).
    """
    if dataset.Y.shape[1] != model.cfg.n_joints:
        raise ValueError(
            f"dataset has {dataset.Y.shape[1]} joints, model expects {model.cfg.n_joints}")
    result = TrainResult()
    n = len(dataset)
    split_rng = np.random.default_rng([cfg.seed, 0xDA7A])
    perm = split_rng.permutation(n)
    n_val = int(n * cfg.val_fraction)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    Xt, Yt = dataset.X[train_idx], dataset.Y[train_idx]
    Xv, Yv = dataset.X[val_idx], dataset.Y[val_idx]
    has_val = n_val > 0

    def val_loss():
        return evaluate_nll(model, Xv, Yv) if has_val else evaluate_nll(model, Xt, Yt)

    v0 = val_loss()
    result.history.append({"epoch": 0, "train_nll": float("nan"), "val_nll": v0, "lr": cfg.lr})
    if cfg.epochs == 0:
        result.best_val = v0
        result.best_epoch = 0
        return result
    result.best_val = v0
    result.best_epoch = 0
    best_state = model.state_dict()

    opt = Adam(model.named_parameters(), lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 0x5F0F])
    since_improve = 0
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(Xt))
        epoch_loss = 0.0
        seen = 0
        diverged = False
        for i in range(0, len(Xt), cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            if len(idx) < 2:
                continue
            try:
                with Tape() as tape:
                    loss = model.nll_loss(Xt[idx], Yt[idx], training=True)
                opt.zero_grad()
                tape.backward(loss)
                if cfg.grad_clip:
                    _clip_global_norm(model.named_parameters(), cfg.grad_clip)
                opt.step()
            except FloatingPointError:
                diverged = True
                break
            epoch_loss += loss.data.item() * len(idx)
            seen += len(idx)
        if diverged or not np.isfinite(epoch_loss):
            result.diverged = True
            model.load_state_dict(best_state)
            break
        v = val_loss()
        result.history.append({"epoch": epoch, "train_nll": epoch_loss / seen,
                               "val_nll": v, "lr": opt.lr})
        if v < result.best_val:
            result.best_val = v
            result.best_epoch = epoch
            best_state = model.state_dict()
            since_improve = 0
        else:
            since_improve += 1
            if cfg.plateau_patience and since_improve % cfg.plateau_patience == 0:
                opt.lr /= 2
            if cfg.early_stop_patience and since_improve >= cfg.early_stop_patience:
                break
    model.load_state_dict(best_state)
    return result


def save_history(result: TrainResult, path):
    with open(path, "w") as fh:
        fh.write("epoch,train_nll,val_nll\n")
        for row in result.history:
            fh.write(f"{row['epoch']},{row['train_nll']},{row['val_nll']}\n")
