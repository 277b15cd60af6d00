"""Command-line surface: ``python -m app <command>``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 training failure.
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
import pandas as pd

from app.helpers.boosting import (
    choose_num_clusters,
    cluster_majority,
    dump_ensemble,
    load_ensemble,
    make_config,
    predict_batch,
    train,
)
from app.helpers.dataset import PUBLISHED_DATASETS, binarize, load_dataset, summarize
from app.helpers.harness import (
    compare_table,
    dump_report,
    format_cells,
    load_report,
    make_spec,
    pooled_roc,
    run_experiment,
)
from app.helpers.metrics import export_roc, roc_convex_hull, roc_curve
from app.models.boosting import Strategy
from app.models.experiment import TableMode
from app.utils.errors import ConfigError, CusboostError, DataError, TrainingError
from app.utils.settings import MAX_WORKERS, configure_logging

logger = logging.getLogger(__name__)

ALGORITHMS = click.Choice([strategy.value for strategy in Strategy])

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("Wrote %s", out)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _candidates(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"invalid cluster candidates {text!r}") from None


def boost_options(command):
    """Flags shared by commands that build a BoostConfig."""
    options = [
        click.option("--rounds", type=int, help="Boosting rounds (default 20)."),
        click.option("--clusters", type=int, help="Majority clusters; omit to sweep."),
        click.option("--fraction", type=float, help="Share kept per cluster (default 0.5)."),
        click.option("--target-ratio", type=float, help="RUS majority:minority ratio."),
        click.option("--smote-amount", type=int, help="SMOTE amount in percent."),
        click.option("--smote-neighbors", type=int, help="SMOTE neighbour count."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--positive-label", help="Class treated as the minority."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _config(algorithm, rounds, clusters, fraction, target_ratio, smote_amount, smote_neighbors, seed):
    return make_config(
        strategy=algorithm,
        rounds=rounds,
        num_clusters=clusters,
        fraction=fraction,
        target_ratio=target_ratio,
        smote_amount=smote_amount,
        smote_neighbors=smote_neighbors,
        seed=seed,
    )


@click.group()
@click.option("--log-level", default=None, help="Logging level (default from CUSBOOST_LOG_LEVEL).")
def cli(log_level):
    """CUSBoost and its comparators on KEEL and delimited datasets."""
    if log_level:
        configure_logging(log_level)
    else:
        configure_logging()


@cli.command()
@click.argument("data")
@click.option("--positive-label", help="Class treated as the minority.")
def inspect(data, positive_label):
    """Print the class summary of a dataset."""
    ds = load_dataset(data)
    summary = summarize(ds)
    view = binarize(ds, positive_label)
    click.echo(f"dataset: {summary.name}")
    click.echo(f"instances: {summary.num_instances}")
    click.echo(f"features: {summary.num_features}")
    for label, count in summary.class_counts.items():
        click.echo(f"  {label}: {count}")
    click.echo(f"imbalance ratio: {summary.imbalance_ratio:.2f}")
    click.echo(f"positive label: {view.positive_label}")
    published = PUBLISHED_DATASETS.get(summary.name)
    if published:
        instances, features, classes, ratio = published
        click.echo(
            f"published: {instances} instances, {features} features, "
            f"{classes} classes, IR {ratio:.2f}"
        )


@cli.command("train")
@click.argument("data")
@click.option("--algorithm", type=ALGORITHMS, default="cusboost", show_default=True)
@boost_options
@click.option("--out", help="Write the ensemble here instead of stdout.")
def train_command(
    data, algorithm, rounds, clusters, fraction, target_ratio,
    smote_amount, smote_neighbors, seed, positive_label, out,
):
    """Train one ensemble on a whole dataset."""
    cfg = _config(
        algorithm, rounds, clusters, fraction, target_ratio, smote_amount, smote_neighbors, seed
    )
    ds = load_dataset(data)
    view = binarize(ds, positive_label)
    ensemble = train(ds, view, cfg)
    logger.info(
        "Trained %s: %d rounds, %d retries", algorithm, len(ensemble.rounds), ensemble.total_retries
    )
    _emit(dump_ensemble(ensemble), out)


@cli.command()
@click.argument("model")
@click.argument("data")
@click.option(
    "--format", "output_format", type=click.Choice(["table", "delimited"]), default="table"
)
@click.option("--out", help="Write predictions here instead of stdout.")
def predict(model, data, output_format, out):
    """Score every instance of a dataset with a saved ensemble."""
    try:
        ensemble = load_ensemble(Path(model).read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read model file: {e}") from e
    ds = load_dataset(data)
    expected = [(a.name, a.kind, a.categories) for a in ensemble.attributes]
    if [(a.name, a.kind, a.categories) for a in ds.attributes] != expected:
        raise DataError("dataset attributes do not match the ensemble")

    labels, scores = predict_batch(ensemble, ds.values)
    frame = pd.DataFrame(
        {"label": ds.label_values, "predicted": labels, "score": scores}
    )
    frame.index.name = "index"
    if output_format == "delimited":
        text = frame.to_csv()
    else:
        text = frame.to_string() + "\n"
    truth = [label if label == ensemble.positive_label else "rest" for label in ds.label_values]
    if len(set(truth)) == 2:
        auc = roc_curve(truth, scores, ensemble.positive_label).auc
        logger.info("AUC on %s: %.4f", ds.name, auc)
    _emit(text, out)


@cli.command()
@click.argument("data", nargs=-1, required=True)
@click.option(
    "--algorithm", "algorithms", type=ALGORITHMS, multiple=True,
    help="Algorithm to run; repeat the flag for several (default all).",
)
@boost_options
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--repeats", type=int, default=5, show_default=True)
@click.option("--candidates", default="2,3,5,8,13", show_default=True, help="Cluster sweep candidates.")
@click.option("--workers", type=int, default=MAX_WORKERS, show_default=True)
@click.option(
    "--format", "output_format",
    type=click.Choice(["table", "delimited", "report"]), default="table", show_default=True,
)
@click.option("--out", help="Write the output here instead of stdout.")
@click.option("--progress/--no-progress", default=False)
def bench(
    data, algorithms, rounds, clusters, fraction, target_ratio, smote_amount,
    smote_neighbors, seed, positive_label, folds, repeats, candidates, workers,
    output_format, out, progress,
):
    """Repeated stratified cross-validation and the AUC comparison tables."""
    algorithms = list(algorithms) or [strategy.value for strategy in Strategy]
    configs = {
        algorithm: _config(
            algorithm, rounds, clusters, fraction, target_ratio,
            smote_amount, smote_neighbors, seed,
        )
        for algorithm in algorithms
    }
    spec = make_spec(
        {
            "datasets": list(data),
            "algorithms": algorithms,
            "folds": folds,
            "repeats": repeats,
            "seed": seed,
            "positive_label": positive_label,
            "configs": configs,
            "cluster_candidates": _candidates(candidates),
            "workers": workers,
            "keep_ensembles": output_format == "report",
        }
    )
    report = run_experiment(spec, progress=progress)
    if output_format == "delimited":
        text = format_cells(report)
    elif output_format == "report":
        text = dump_report(report)
    else:
        text = "\n\n".join(compare_table(report, mode).render() for mode in TableMode) + "\n"
    _emit(text, out)


@cli.command("sweep-k")
@click.argument("data")
@click.option("--candidates", default="2,3,5,8,13", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--positive-label", help="Class treated as the minority.")
def sweep_k_command(data, candidates, seed, positive_label):
    """K-means inertia of the majority class per candidate k, and the elbow choice."""
    ds = load_dataset(data)
    view = binarize(ds, positive_label)
    cfg = make_config(cluster_candidates=_candidates(candidates), seed=seed)
    chosen, sweep = choose_num_clusters(view, cfg)
    click.echo("k,inertia")
    for k, inertia in sweep:
        click.echo(f"{k},{inertia!r}" + ("  <- chosen" if k == chosen else ""))
    # the clustering training would build at the chosen k
    model = cluster_majority(view, cfg.model_copy(update={"num_clusters": chosen}))
    logger.info("Cluster sizes at k=%d: %s", chosen, model.summary()["cluster_sizes"])


@cli.command()
@click.argument("report_path")
@click.option("--dataset", required=True)
@click.option("--algorithm", type=ALGORITHMS, default="cusboost", show_default=True)
@click.option("--out", help="Write the curve here instead of stdout.")
@click.option("--hull-out", help="Write the convex hull points here.")
def roc(report_path, dataset, algorithm, out, hull_out):
    """Pooled ROC curve of one dataset/algorithm from a saved report."""
    try:
        report = load_report(Path(report_path).read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read report file: {e}") from e
    curve = pooled_roc(report, dataset, Strategy(algorithm))
    logger.info("Pooled AUC for %s/%s: %.4f", dataset, algorithm, curve.auc)
    _emit(export_roc(curve), out)
    if hull_out:
        hull = roc_convex_hull(curve)
        lines = ["fp_rate,tp_rate", *[f"{f!r},{t!r}" for f, t in hull]]
        _emit("\n".join(lines) + "\n", hull_out)


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit status."""
    try:
        result = cli.main(args=argv, prog_name="cusboost", standalone_mode=False)
    except click.exceptions.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except ConfigError as e:
        click.echo(f"Error: {e}", err=True)
        click.echo("Try 'cusboost --help' for usage.", err=True)
        return EXIT_USAGE
    except TrainingError as e:
        click.echo(f"Training failed: {e}", err=True)
        return EXIT_TRAINING
    except CusboostError as e:
        click.echo(f"Error: {e}", err=True)
        click.echo("Try 'cusboost --help' for usage.", err=True)
        return EXIT_DATA
    return result if isinstance(result, int) else EXIT_OK


def main():
    sys.exit(cli_main())
