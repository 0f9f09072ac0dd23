"""Command-line interface.

Exit codes: 0 success, 2 bad arguments, 3 numerical failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .baselines import DlsConfig, MlpBaseline, dls_multi_restart
from .evaluate import (EXPERIMENT_PRESETS, evaluate_dls, evaluate_iknet, evaluate_mlp,
                       export_embedding, recompute_report, run_experiment,
                       save_per_sample_csv)
from .kinematics import load_chain
from .model import IkModel, ModelConfig
from .pathfollow import follow_path_best_of, generate_smooth_path, save_trajectory
from .training import (TrainConfig, generate_dataset, load_dataset, save_dataset,
                       save_history, train)


@click.group()
def cli():
    """Neural inverse kinematics: training, sampling, baselines, path following."""


@cli.command("gen-data")
@click.option("--chain", "chain_spec", required=True, help="chain spec file or preset name")
@click.option("--count", type=int, default=20000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def gen_data(chain_spec, count, seed, out):
    """Generate an FK-consistent dataset of (pose, angles) pairs."""
    chain = load_chain(chain_spec)
    ds = generate_dataset(chain, count, seed)
    save_dataset(ds, out)
    click.echo(f"wrote {count} samples for chain {chain.name!r} to {out}")


@cli.command("train")
@click.option("--chain", "chain_spec", required=True)
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--preset", type=click.Choice(["paper", "desk"]), default="desk",
              show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--batch-size", type=int, default=256, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--from-checkpoint", "warm", type=click.Path(exists=True),
              help="fine-tune from an existing checkpoint")
@click.option("--out", required=True, type=click.Path())
@click.option("--history", "history_path", type=click.Path(), help="loss CSV path")
def train_cmd(chain_spec, data, preset, epochs, batch_size, lr, seed, warm, out,
              history_path):
    """Train (or fine-tune) an IK model on a dataset."""
    chain = load_chain(chain_spec)
    ds = load_dataset(data)
    if warm:
        model = IkModel.load(warm)
    else:
        model = IkModel(ModelConfig.for_chain(chain, preset),
                        np.random.default_rng([seed, 0x111]))
    cfg = TrainConfig(epochs=epochs, batch_size=batch_size, lr=lr, seed=seed,
                      preset=preset)
    result = train(model, ds, cfg)
    model.save(out)
    if history_path:
        save_history(result, history_path)
    click.echo(f"best validation NLL {result.best_val:.4f} at epoch {result.best_epoch}"
               + (" (diverged; kept last good weights)" if result.diverged else ""))


@cli.command("sample")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--target", nargs=3, type=float, required=True, help="x y z (meters)")
@click.option("--samples", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), help="optional CSV of sampled joint vectors")
def sample_cmd(checkpoint, target, samples, seed, out):
    """Draw IK solutions for one target pose."""
    model = IkModel.load(checkpoint)
    sols = model.sample_solutions(np.array(target)[None, :], samples,
                                  np.random.default_rng(seed))[0]
    if out:
        np.savetxt(out, sols, delimiter=",")
    for y in sols[:10]:
        click.echo(" ".join(f"{v:+.4f}" for v in y))
    if samples > 10:
        click.echo(f"... ({samples} total{', written to ' + str(out) if out else ''})")


@cli.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--chain", "chain_spec", required=True)
@click.option("--data", required=True, type=click.Path(exists=True),
              help="test dataset (IKDS)")
@click.option("--samples", type=int, default=100, show_default=True)
@click.option("--threshold-cm", type=float, default=2.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), help="output directory for report + CSV")
def eval_cmd(checkpoint, chain_spec, data, samples, threshold_cm, seed, out):
    """Evaluate a trained model on a test dataset."""
    chain = load_chain(chain_spec)
    model = IkModel.load(checkpoint)
    ds = load_dataset(data)
    report, rows = evaluate_iknet(model, chain, ds.X, samples, threshold_cm,
                                  np.random.default_rng(seed))
    click.echo(report.to_json())
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(report.to_json())
        save_per_sample_csv(rows, outdir / "per_sample_iknet.csv")


@cli.command("baseline")
@click.argument("method", type=click.Choice(["dls", "mlp"]))
@click.option("--chain", "chain_spec", required=True)
@click.option("--data", type=click.Path(exists=True),
              help="train dataset for mlp; ignored for dls")
@click.option("--test-data", required=True, type=click.Path(exists=True))
@click.option("--threshold-cm", type=float, default=2.0, show_default=True)
@click.option("--restarts", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path())
def baseline_cmd(method, chain_spec, data, test_data, threshold_cm, restarts, seed, out):
    """Run a reference solver (damped-least-squares or MLP regressor)."""
    chain = load_chain(chain_spec)
    test = load_dataset(test_data)
    if method == "dls":
        report, rows = evaluate_dls(chain, test.X, DlsConfig(restarts=restarts),
                                    threshold_cm, np.random.default_rng(seed))
    else:
        if not data:
            raise click.UsageError("--data (train set) is required for the mlp baseline")
        ds = load_dataset(data)
        mlp = MlpBaseline(chain, rng=np.random.default_rng([seed, 0x317]))
        mlp.fit(ds.X, ds.Y, seed=seed)
        report, rows = evaluate_mlp(mlp, chain, test.X, threshold_cm)
    click.echo(report.to_json())
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / f"report_{method}.json").write_text(report.to_json())
        save_per_sample_csv(rows, outdir / f"per_sample_{method}.csv")


@cli.command("follow-path")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--chain", "chain_spec", required=True)
@click.option("--steps", type=int, default=50, show_default=True)
@click.option("--radius", type=float, default=0.1, show_default=True)
@click.option("--best-of", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def follow_path_cmd(checkpoint, chain_spec, steps, radius, best_of, seed, out):
    """Generate a smooth target path and follow it with the model."""
    chain = load_chain(chain_spec)
    model = IkModel.load(checkpoint)
    X, Y = generate_smooth_path(chain, steps, seed)
    best, runs = follow_path_best_of(model, chain, X, Y[0], radius, best_of,
                                     np.random.default_rng([seed, 0xF01]))
    save_trajectory(best, out)
    click.echo(f"best-of-{best_of} mean FK error: {best.mean_error * 100:.3f} cm "
               f"(single-run mean {np.mean([t.mean_error for t in runs]) * 100:.3f} cm)")


@cli.command("embed")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def embed_cmd(checkpoint, data, out):
    """Export the hypernetwork trunk activations for a dataset's poses."""
    model = IkModel.load(checkpoint)
    ds = load_dataset(data)
    emb = export_embedding(model, ds.X, out)
    click.echo(f"wrote {emb.shape[0]} x {emb.shape[1]} embedding matrix to {out}")


@cli.command("experiment")
@click.argument("preset")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--checkpoint", type=click.Path(exists=True),
              help="reuse a trained model instead of training")
@click.option("--epochs", type=int, help="override the preset's training epochs")
@click.option("--no-render", is_flag=True, help="skip figure rendering")
def experiment_cmd(preset, seed, out, checkpoint, epochs, no_render):
    """Run an end-to-end experiment preset."""
    if preset not in EXPERIMENT_PRESETS:
        raise click.UsageError(
            f"unknown preset {preset!r}; available: {', '.join(EXPERIMENT_PRESETS)}")
    payload = run_experiment(preset, seed, out, checkpoint, epochs,
                             render=not no_render)
    click.echo(json.dumps(payload, indent=2))


@cli.command("check-report")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--threshold-cm", type=float, required=True)
def check_report_cmd(csv_path, threshold_cm):
    """Recompute report aggregates from a per-sample CSV."""
    mu, sd, acc = recompute_report(csv_path, threshold_cm)
    click.echo(json.dumps({"mean_distance_cm": mu, "std_cm": sd, "accuracy": acc},
                          indent=2))


def main():
    try:
        cli(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(2)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except FloatingPointError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
