"""Repeated stratified cross-validation over datasets and algorithms.

Every cell (dataset, algorithm, repeat, fold) is an independent job seeded
from (master seed, dataset, repeat, fold), so a single cell can be rerun on
its own and reproduce the in-experiment result. Cells run on a joblib pool
and are sorted by key before the report is assembled.
"""

import logging
import time
from typing import Dict, Iterable, List, Optional

import numpy as np
from joblib import Parallel, delayed
from pydantic import ValidationError
from tqdm import tqdm

from app.helpers.boosting import choose_num_clusters, predict_batch, train
from app.helpers.dataset import (
    binarize,
    binary_dataset,
    load_dataset,
    stratified_folds,
    subset,
    summarize,
)
from app.helpers.metrics import roc_curve
from app.models.boosting import BoostConfig, Strategy
from app.models.dataset import Dataset, FoldPlan
from app.models.experiment import (
    AlgorithmAggregate,
    CellResult,
    ComparisonRow,
    ComparisonTable,
    DatasetRecord,
    ExperimentSpec,
    Observation,
    RunReport,
    TableMode,
)
from app.models.metrics import RocCurve
from app.utils.errors import ConfigError, CusboostError, DataError
from app.utils.rng import derive_seed

logger = logging.getLogger(__name__)

CELLS_HEADER = "dataset,algorithm,repeat,fold,auc,rounds_accepted,retries,seed"
HIGH_IMBALANCE = 25.0


def make_spec(data: dict) -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def fold_seed(master: int, dataset: str, repeat: int) -> int:
    return derive_seed(master, dataset, repeat)


def cell_seed(master: int, dataset: str, repeat: int, fold: int) -> int:
    return derive_seed(master, dataset, repeat, fold)


def _binary_labels(labels: Iterable[str], positive: str) -> List[str]:
    return [label if label == positive else "rest" for label in labels]


def _invalid(base: CellResult, note: str) -> CellResult:
    logger.warning(
        "Invalid cell %s/%s repeat %d fold %d: %s",
        base.dataset, base.algorithm.value, base.repeat, base.fold, note,
    )
    return base.model_copy(update={"valid": False, "note": note})


def run_cell(
    ds: Dataset,
    positive_label: str,
    plan: FoldPlan,
    repeat: int,
    fold: int,
    cfg: BoostConfig,
    keep_ensemble: bool = True,
) -> CellResult:
    """Train on every fold but ``fold`` and score the held-out fold."""
    train_rows, test_rows = plan.train_indices(fold), plan.test_indices(fold)
    test_labels = [ds.classes[code] for code in ds.labels[test_rows]]
    cell = CellResult(
        dataset=ds.name,
        algorithm=cfg.strategy,
        repeat=repeat,
        fold=fold,
        seed=cfg.seed,
        test_indices=test_rows.tolist(),
        test_labels=test_labels,
    )
    present = set(_binary_labels(test_labels, positive_label))
    if len(present) < 2:
        return _invalid(cell, f"test fold holds only {sorted(present)}")

    train_ds = subset(ds, train_rows)
    try:
        view = binarize(train_ds, positive_label)
    except DataError as e:
        return _invalid(cell, str(e))
    if (
        cfg.strategy == Strategy.cusboost
        and cfg.num_clusters is not None
        and cfg.num_clusters > len(view.majority_indices)
    ):
        cfg = cfg.model_copy(update={"num_clusters": len(view.majority_indices)})
        cell = cell.model_copy(update={"note": "num_clusters capped at the majority size"})
    minority_neighbors = len(view.minority_indices) - 1
    if (
        cfg.strategy == Strategy.smoteboost
        and 1 <= minority_neighbors < cfg.smote_neighbors
    ):
        cfg = cfg.model_copy(update={"smote_neighbors": minority_neighbors})
        cell = cell.model_copy(
            update={"note": f"smote_neighbors capped at {minority_neighbors}"}
        )

    started = time.perf_counter()
    try:
        ensemble = train(train_ds, view, cfg)
    except CusboostError as e:
        return _invalid(cell, str(e))
    elapsed = time.perf_counter() - started

    _, scores = predict_batch(ensemble, ds.values[test_rows])
    auc = roc_curve(_binary_labels(test_labels, positive_label), scores, positive_label).auc
    return cell.model_copy(
        update={
            "auc": auc,
            "train_time": elapsed,
            "rounds_accepted": len(ensemble.rounds),
            "retries": ensemble.total_retries,
            "num_clusters": ensemble.num_clusters,
            "plan_seeds": [record.seed for record in ensemble.rounds if record.plan],
            "test_scores": scores.tolist(),
            "ensemble": ensemble if keep_ensemble else None,
        }
    )


def _resolve(spec: ExperimentSpec, preloaded: Optional[Dict[str, Dataset]]):
    resolved = []
    for entry in spec.datasets:
        if preloaded and entry in preloaded:
            ds = preloaded[entry]
        else:
            ds = load_dataset(entry)
        if any(ds.name == other.name for _, other in resolved):
            raise ConfigError(f"dataset name {ds.name!r} appears twice")
        resolved.append((entry, ds))
    return resolved


def _repeat_clusters(
    spec: ExperimentSpec, ds: Dataset, positive: str, plan: FoldPlan, repeat: int
) -> Optional[int]:
    """Cluster count for one (dataset, repeat): elbow on fold 0's training majority."""
    cfg = spec.config_for(Strategy.cusboost)
    if cfg.num_clusters is not None:
        return cfg.num_clusters
    try:
        view = binarize(subset(ds, plan.train_indices(0)), positive)
    except DataError as e:
        logger.warning("Cannot sweep clusters for %s repeat %d: %s", ds.name, repeat, e)
        return None
    sweep_cfg = cfg.model_copy(update={"seed": derive_seed(spec.seed, ds.name, repeat)})
    k, sweep = choose_num_clusters(view, sweep_cfg)
    logger.info(
        "%s repeat %d: %d clusters (inertia %s)",
        ds.name, repeat, k, ", ".join(f"k={c}: {inertia:.4g}" for c, inertia in sweep),
    )
    return k


def run_experiment(
    spec: ExperimentSpec,
    preloaded: Optional[Dict[str, Dataset]] = None,
    progress: bool = False,
) -> RunReport:
    """Run every (dataset, algorithm, repeat, fold) cell of ``spec``.

    ``preloaded`` maps dataset entries to already loaded datasets; other
    entries are loaded from disk.
    """
    records, jobs = [], []
    for source, ds in _resolve(spec, preloaded):
        view = binarize(ds, spec.positive_label)
        positive = view.positive_label
        binary = binary_dataset(view)
        plans = [
            stratified_folds(binary, spec.folds, fold_seed(spec.seed, ds.name, repeat))
            for repeat in range(spec.repeats)
        ]
        records.append(
            DatasetRecord(
                name=ds.name,
                source=source,
                summary=summarize(ds),
                positive_label=positive,
                binary_imbalance_ratio=len(view.majority_indices) / len(view.minority_indices),
                fold_plans=plans,
            )
        )
        for repeat, plan in enumerate(plans):
            clusters = None
            if Strategy.cusboost in spec.algorithms:
                clusters = _repeat_clusters(spec, ds, positive, plan, repeat)
            for fold in range(spec.folds):
                seed = cell_seed(spec.seed, ds.name, repeat, fold)
                for algorithm in spec.algorithms:
                    update = {"seed": seed}
                    if algorithm == Strategy.cusboost and clusters is not None:
                        update["num_clusters"] = clusters
                    cfg = spec.config_for(algorithm).model_copy(update=update)
                    jobs.append((ds, positive, plan, repeat, fold, cfg))

    logger.info("Running %d cells on %d workers", len(jobs), spec.workers)
    cells = Parallel(n_jobs=spec.workers)(
        delayed(run_cell)(*job, keep_ensemble=spec.keep_ensembles)
        for job in tqdm(jobs, desc="cells", disable=not progress)
    )
    cells = sorted(cells, key=lambda cell: cell.key)

    aggregates = aggregate_cells(cells, spec, [record.name for record in records])
    return RunReport(
        spec=spec,
        datasets=records,
        cells=cells,
        aggregates=aggregates,
        observations=observations(aggregates, records),
    )


def _std(values: List[float]) -> Optional[float]:
    return float(np.std(values)) if values else None


def aggregate_cells(
    cells: List[CellResult], spec: ExperimentSpec, dataset_names: List[str]
) -> List[AlgorithmAggregate]:
    """Per (dataset, algorithm) means, spreads and best values over valid cells."""
    aggregates = []
    for name in dataset_names:
        for algorithm in spec.algorithms:
            group = [c for c in cells if c.dataset == name and c.algorithm == algorithm]
            valid = [c.auc for c in group if c.valid]
            if len(valid) < len(group):
                logger.warning(
                    "%s/%s: %d of %d cells invalid",
                    name, algorithm.value, len(group) - len(valid), len(group),
                )
            repeat_means, clusters = [], []
            for repeat in range(spec.repeats):
                in_repeat = [c for c in group if c.repeat == repeat]
                scores = [c.auc for c in in_repeat if c.valid]
                repeat_means.append(float(np.mean(scores)) if scores else None)
                found = [c.num_clusters for c in in_repeat if c.num_clusters is not None]
                clusters.append(found[0] if found else None)
            present_means = [m for m in repeat_means if m is not None]
            aggregates.append(
                AlgorithmAggregate(
                    dataset=name,
                    algorithm=algorithm,
                    mean=float(np.mean(valid)) if valid else None,
                    std=_std(valid),
                    best_cell=max(valid) if valid else None,
                    best_repeat_mean=max(present_means) if present_means else None,
                    repeat_means=repeat_means,
                    repeat_std=_std(present_means),
                    valid_cells=len(valid),
                    invalid_cells=len(group) - len(valid),
                    num_clusters_by_repeat=clusters if algorithm == Strategy.cusboost else [],
                )
            )
    return aggregates


def observations(
    aggregates: List[AlgorithmAggregate], records: List[DatasetRecord]
) -> List[Observation]:
    """CUSBoost against RUSBoost: mean AUC on highly imbalanced data and repeat spread."""
    found = []
    for record in records:
        by_algorithm = {a.algorithm: a for a in aggregates if a.dataset == record.name}
        cus, rus = by_algorithm.get(Strategy.cusboost), by_algorithm.get(Strategy.rusboost)
        if cus is None or rus is None:
            continue
        if (
            record.binary_imbalance_ratio > HIGH_IMBALANCE
            and cus.mean is not None
            and rus.mean is not None
        ):
            found.append(
                Observation(
                    name="high_imbalance_mean",
                    dataset=record.name,
                    holds=cus.mean >= rus.mean,
                    detail=f"IR {record.binary_imbalance_ratio:.2f}: cusboost {cus.mean:.4f}, "
                    f"rusboost {rus.mean:.4f}",
                )
            )
        if cus.repeat_std is not None and rus.repeat_std is not None:
            found.append(
                Observation(
                    name="repeat_variance",
                    dataset=record.name,
                    holds=cus.repeat_std <= rus.repeat_std,
                    detail=f"repeat std cusboost {cus.repeat_std:.4f}, "
                    f"rusboost {rus.repeat_std:.4f}",
                )
            )
    for observation in found:
        logger.info(
            "%s on %s: %s (%s)",
            observation.name, observation.dataset,
            "holds" if observation.holds else "does not hold", observation.detail,
        )
    return found


def _aggregate_value(aggregate: AlgorithmAggregate, mode: TableMode) -> Optional[float]:
    if mode == TableMode.mean:
        return aggregate.mean
    if mode == TableMode.best:
        return aggregate.best_cell
    return aggregate.best_repeat_mean


def compare_table(report: RunReport, mode: TableMode = TableMode.mean) -> ComparisonTable:
    """Datasets by algorithms; the row maximum is flagged, all-empty columns dropped."""
    mode = TableMode(mode)
    values = {
        (a.dataset, a.algorithm.value): _aggregate_value(a, mode) for a in report.aggregates
    }
    names = [record.name for record in report.datasets]
    algorithms, omitted = [], []
    for algorithm in report.spec.algorithms:
        if all(values.get((name, algorithm.value)) is None for name in names):
            logger.warning("Omitting %s: no valid cells", algorithm.value)
            omitted.append(algorithm.value)
        else:
            algorithms.append(algorithm.value)

    rows = []
    for name in names:
        row = {algorithm: values.get((name, algorithm)) for algorithm in algorithms}
        scored = [(value, algorithm) for algorithm, value in row.items() if value is not None]
        best = None
        if scored:
            top = max(value for value, _ in scored)
            best = next(algorithm for value, algorithm in scored if value == top)
        rows.append(ComparisonRow(dataset=name, values=row, best=best))
    return ComparisonTable(mode=mode, algorithms=algorithms, rows=rows, omitted=omitted)


def format_cells(report: RunReport) -> str:
    """Comma-separated cell lines; invalid cells leave the AUC empty."""
    lines = [CELLS_HEADER]
    for cell in report.cells:
        auc = repr(cell.auc) if cell.valid else ""
        lines.append(
            f"{cell.dataset},{cell.algorithm.value},{cell.repeat},{cell.fold},{auc},"
            f"{cell.rounds_accepted},{cell.retries},{cell.seed}"
        )
    return "\n".join(lines) + "\n"


def dump_report(report: RunReport) -> str:
    return report.model_dump_json(indent=2)


def load_report(text: str) -> RunReport:
    try:
        return RunReport.model_validate_json(text)
    except ValidationError as e:
        raise DataError(f"invalid run report: {e}") from e


def pooled_roc(report: RunReport, dataset: str, algorithm: Strategy) -> RocCurve:
    """ROC over the held-out scores of every valid cell of one dataset/algorithm."""
    record = report.dataset_record(dataset)
    if record is None:
        raise DataError(f"report has no dataset {dataset!r}")
    algorithm = Strategy(algorithm)
    labels, scores = [], []
    for cell in report.cells:
        if cell.dataset == dataset and cell.algorithm == algorithm and cell.valid:
            labels.extend(_binary_labels(cell.test_labels, record.positive_label))
            scores.extend(cell.test_scores)
    if not labels:
        raise DataError(f"no valid {algorithm.value} cells for {dataset!r}")
    return roc_curve(labels, scores, record.positive_label)


def find_cell(
    report: RunReport, dataset: str, algorithm: Strategy, repeat: int, fold: int
) -> CellResult:
    key = (dataset, Strategy(algorithm).value, repeat, fold)
    for cell in report.cells:
        if cell.key == key:
            return cell
    raise DataError(f"report has no cell {key}")


def _load_record_dataset(record: DatasetRecord, ds: Optional[Dataset]) -> Dataset:
    return ds if ds is not None else load_dataset(record.source)


def verify_cell(
    report: RunReport,
    dataset: str,
    algorithm: Strategy = Strategy.cusboost,
    repeat: int = 0,
    fold: int = 0,
    ds: Optional[Dataset] = None,
) -> bool:
    """Re-score a stored cell from its ensemble and fold plan; True on an exact AUC match."""
    record = report.dataset_record(dataset)
    if record is None:
        raise DataError(f"report has no dataset {dataset!r}")
    cell = find_cell(report, dataset, algorithm, repeat, fold)
    if not cell.valid:
        raise DataError("cannot verify an invalid cell")
    if cell.ensemble is None:
        raise DataError("report was written without ensembles")
    ds = _load_record_dataset(record, ds)
    test_rows = record.fold_plans[repeat].test_indices(fold)
    if test_rows.tolist() != cell.test_indices:
        return False
    labels = _binary_labels([ds.classes[c] for c in ds.labels[test_rows]], record.positive_label)
    _, scores = predict_batch(cell.ensemble, ds.values[test_rows])
    return roc_curve(labels, scores, record.positive_label).auc == cell.auc


def rerun_cell(
    report: RunReport,
    dataset: str,
    algorithm: Strategy,
    repeat: int,
    fold: int,
    ds: Optional[Dataset] = None,
) -> CellResult:
    """Retrain one cell in isolation from the report's spec and fold plan."""
    record = report.dataset_record(dataset)
    if record is None:
        raise DataError(f"report has no dataset {dataset!r}")
    stored = find_cell(report, dataset, algorithm, repeat, fold)
    spec = report.spec
    update = {"seed": cell_seed(spec.seed, dataset, repeat, fold)}
    if stored.num_clusters is not None:
        update["num_clusters"] = stored.num_clusters
    cfg = spec.config_for(Strategy(algorithm)).model_copy(update=update)
    return run_cell(
        _load_record_dataset(record, ds),
        record.positive_label,
        record.fold_plans[repeat],
        repeat,
        fold,
        cfg,
        keep_ensemble=spec.keep_ensembles,
    )

