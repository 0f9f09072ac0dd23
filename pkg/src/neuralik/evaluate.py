"""Metrics, evaluation reports, and end-to-end experiment presets."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .baselines import DlsConfig, MlpBaseline, dls_multi_restart
from .kinematics import preset_chain
from .model import IkModel, ModelConfig
from .pathfollow import follow_path_best_of, generate_smooth_path, save_trajectory
from .training import TrainConfig, generate_dataset, save_history, train

EXPERIMENT_PRESETS = ("planar2", "planar4", "digit4-synth", "pathfollow-planar4")


@dataclass
class EvalReport:
    method: str
    mean_distance_cm: float
    std_cm: float
    accuracy: float
    threshold_cm: float
    runtime_s: float
    n: int

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def fk_distances_cm(chain, solutions, targets):
    """Euclidean FK-to-target distances in centimeters.

    solutions: (n, N) joint vectors; targets: (n, 3).
    """
    solutions = np.atleast_2d(np.asarray(solutions, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(solutions) != len(targets) or len(solutions) == 0:
        raise ValueError("solutions and targets must be equal-length and non-empty")
    tips = np.array([chain.forward(y) for y in solutions])
    return np.linalg.norm(tips - targets, axis=1) * 100.0


def mean_distance(chain, solutions, targets):
    """(mean, population std) of FK distance, in cm; exact summation."""
    d = fk_distances_cm(chain, solutions, targets)
    mu = math.fsum(d) / len(d)
    var = math.fsum((v - mu) ** 2 for v in d) / len(d)
    return mu, math.sqrt(var)


def accuracy_at(chain, solutions, targets, threshold_cm):
    """Fraction of solutions with FK distance below the threshold."""
    if threshold_cm <= 0:
        raise ValueError("threshold must be positive")
    d = fk_distances_cm(chain, solutions, targets)
    return float((d < threshold_cm).mean())


def _aggregate(dists_cm, threshold_cm):
    mu = math.fsum(dists_cm) / len(dists_cm)
    var = math.fsum((v - mu) ** 2 for v in dists_cm) / len(dists_cm)
    acc = float((np.asarray(dists_cm) < threshold_cm).mean())
    return mu, math.sqrt(var), acc


def evaluate_iknet(model, chain, targets, n_samples=100, threshold_cm=2.0, rng=None,
                   with_ll=True):
    """Sample n_samples solutions per target and score all of them.

    Returns (EvalReport, rows) where rows are per-(target, sample)
    records: (target xyz, dist_cm, log likelihood).
    """
    rng = rng or np.random.default_rng(0)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    t0 = time.perf_counter()
    all_y = model.sample_solutions(targets, n_samples, rng)
    runtime = (time.perf_counter() - t0) / (len(targets) * n_samples)
    rows = []
    dists = []
    for i, x in enumerate(targets):
        tips = np.array([chain.forward(y) for y in all_y[i]])
        d = np.linalg.norm(tips - x, axis=1) * 100.0
        if with_ll:
            lp = model.per_sample_log_likelihood(
                np.repeat(x[None, :], n_samples, axis=0), all_y[i], training=False).data
        else:
            lp = np.full(n_samples, np.nan)
        dists.extend(d.tolist())
        rows.extend((x[0], x[1], x[2], di, li) for di, li in zip(d, lp))
    mu, sd, acc = _aggregate(dists, threshold_cm)
    report = EvalReport("iknet", mu, sd, acc, threshold_cm, runtime, len(dists))
    return report, rows


def evaluate_mlp(mlp, chain, targets, threshold_cm):
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    t0 = time.perf_counter()
    sols = mlp.solve(targets)
    runtime = (time.perf_counter() - t0) / len(targets)
    d = fk_distances_cm(chain, sols, targets)
    mu, sd, acc = _aggregate(d.tolist(), threshold_cm)
    rows = [(x[0], x[1], x[2], di, float("nan")) for x, di in zip(targets, d)]
    return EvalReport("mlp", mu, sd, acc, threshold_cm, runtime, len(d)), rows


def evaluate_dls(chain, targets, cfg=DlsConfig(), threshold_cm=10.0, rng=None):
    """Best-of-restarts DLS per target."""
    rng = rng or np.random.default_rng(0)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    dists = []
    rows = []
    t0 = time.perf_counter()
    for x in targets:
        sols = dls_multi_restart(chain, x, cfg, rng)
        d = sols[0][1] * 100.0
        dists.append(d)
        rows.append((x[0], x[1], x[2], d, float("nan")))
    runtime = (time.perf_counter() - t0) / len(targets)
    mu, sd, acc = _aggregate(dists, threshold_cm)
    return EvalReport("dls", mu, sd, acc, threshold_cm, runtime, len(dists)), rows


def save_per_sample_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("target_x,target_y,target_z,dist_cm,ll\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")


def recompute_report(csv_path, threshold_cm):
    """Cross-check: rebuild (mean, std, accuracy) from a per-sample CSV."""
    dists = []
    with open(csv_path) as fh:
        next(fh)
        for line in fh:
            dists.append(float(line.split(",")[3]))
    return _aggregate(dists, threshold_cm)


def export_embedding(model, poses, path=None):
    """Trunk activations per pose, optionally written as CSV."""
    emb = model.embed(poses)
    if path is not None:
        np.savetxt(path, emb, delimiter=",")
    return emb


def gmm_probe_rows(model, pose):
    """Plot-ready mixture parameters per joint for one probe pose.

    Conditioning for joint k uses the preceding joints' dominant
    component means (the most likely cascade).
    """
    rows = []
    prev = []
    for k in range(model.cfg.n_joints):
        params = model.joint_gmm_params(pose, prev)
        for j in range(params.n_components):
            rows.append((k, j, params.means[j], params.variances[j], params.priors[j]))
        prev.append(float(params.means[int(np.argmax(params.priors))]))
    return rows


def save_gmm_probe(rows, path):
    with open(path, "w") as fh:
        fh.write("joint,component,mean,variance,prior\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]},{repr(float(r[2]))},{repr(float(r[3]))},{repr(float(r[4]))}\n")


# experiment presets ----------------------------------------------------

_PRESET_SPECS = {
    "planar2": dict(chain="planar2", n_train=20000, n_test=1000, threshold_cm=2.0,
                    epochs=60),
    "planar4": dict(chain="planar4", n_train=20000, n_test=1000, threshold_cm=2.0,
                    epochs=60),
    "digit4-synth": dict(chain="digit4", n_train=100000, n_test=1000, threshold_cm=10.0,
                         epochs=30),
}


def train_preset_model(preset, seed, epochs=None, model_preset="desk"):
    """Generate data and train the model for one experiment preset.

    Returns (model, chain, test dataset, train dataset, TrainResult).
    """
    spec = _PRESET_SPECS[preset]
    chain = preset_chain(spec["chain"])
    train_ds = generate_dataset(chain, spec["n_train"], seed)
    test_ds = generate_dataset(chain, spec["n_test"], seed + 1)
    model = IkModel(ModelConfig.for_chain(chain, model_preset),
                    np.random.default_rng([seed, 0x111]))
    cfg = TrainConfig(epochs=epochs if epochs is not None else spec["epochs"], seed=seed)
    result = train(model, train_ds, cfg)
    return model, chain, test_ds, train_ds, result


def run_experiment(preset, seed, outdir, checkpoint=None, epochs=None, render=True):
    """End-to-end generate -> train -> evaluate pipeline for one preset.

    Writes report.json, loss.csv, per-sample CSVs, plot-ready GMM probe
    data, trajectory CSVs for the path preset, and (optionally)
    matplotlib figures. Deterministic given (preset, seed).
    """
    if preset not in EXPERIMENT_PRESETS:
        raise ValueError(
            f"unknown preset {preset!r}; available: {', '.join(EXPERIMENT_PRESETS)}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    if preset == "pathfollow-planar4":
        return _run_pathfollow_experiment(seed, out, checkpoint, epochs, render)

    spec = _PRESET_SPECS[preset]
    chain = preset_chain(spec["chain"])
    test_ds = generate_dataset(chain, spec["n_test"], seed + 1)
    result = None
    if checkpoint is not None:
        model = IkModel.load(checkpoint)
        train_ds = None
    else:
        model, chain, test_ds, train_ds, result = train_preset_model(preset, seed, epochs)
        model.save(out / "model.ckpt")
        save_history(result, out / "loss.csv")

    reports = []
    rng = np.random.default_rng([seed, 0xE7A1])
    rep, rows = evaluate_iknet(model, chain, test_ds.X, n_samples=100,
                               threshold_cm=spec["threshold_cm"], rng=rng)
    reports.append(rep)
    save_per_sample_csv(rows, out / "per_sample_iknet.csv")

    probe = gmm_probe_rows(model, test_ds.X[0])
    save_gmm_probe(probe, out / "gmm_probe.csv")

    if preset == "digit4-synth":
        if train_ds is None:
            train_ds = generate_dataset(chain, spec["n_train"], seed)
        mlp = MlpBaseline(chain, rng=np.random.default_rng([seed, 0x317]))
        mlp.fit(train_ds.X, train_ds.Y, epochs=20, seed=seed)
        rep_mlp, rows_mlp = evaluate_mlp(mlp, chain, test_ds.X, spec["threshold_cm"])
        reports.append(rep_mlp)
        save_per_sample_csv(rows_mlp, out / "per_sample_mlp.csv")
        rep_dls, rows_dls = evaluate_dls(chain, test_ds.X, DlsConfig(),
                                         spec["threshold_cm"],
                                         np.random.default_rng([seed, 0xD15]))
        reports.append(rep_dls)
        save_per_sample_csv(rows_dls, out / "per_sample_dls.csv")

    payload = {"preset": preset, "seed": seed,
               "reports": [asdict(r) for r in reports]}
    (out / "report.json").write_text(json.dumps(payload, indent=2))
    if render:
        from . import plots
        plots.render_experiment(out, chain, model, test_ds, result)
    return payload


def _run_pathfollow_experiment(seed, out, checkpoint, epochs, render):
    from .pathfollow import DEFAULT_RADIUS
    if checkpoint is not None:
        model = IkModel.load(checkpoint)
        chain = preset_chain("planar4")
    else:
        model, chain, _, _, result = train_preset_model("planar4", seed, epochs)
        model.save(out / "model.ckpt")
        save_history(result, out / "loss.csv")
    rng = np.random.default_rng([seed, 0xF01])
    path_stats = []
    for p in range(20):
        X, Y = generate_smooth_path(chain, 50, seed=1000 * seed + p)
        best, runs = follow_path_best_of(model, chain, X, Y[0],
                                         r=DEFAULT_RADIUS, k=100, rng=rng)
        save_trajectory(best, out / f"trajectory_{p:02d}_best.csv")
        single_mean = float(np.mean([tr.mean_error for tr in runs]))
        path_stats.append({"path": p, "single_run_mean_error_m": single_mean,
                           "best_of_100_error_m": best.mean_error})
    payload = {"preset": "pathfollow-planar4", "seed": seed, "radius": DEFAULT_RADIUS,
               "paths": path_stats,
               "mean_single_run_error_m":
                   float(np.mean([s["single_run_mean_error_m"] for s in path_stats])),
               "mean_best_of_100_error_m":
                   float(np.mean([s["best_of_100_error_m"] for s in path_stats]))}
    (out / "report.json").write_text(json.dumps(payload, indent=2))
    if render:
        from . import plots
        plots.render_path_experiment(out)
    return payload
