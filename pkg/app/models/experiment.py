from enum import Enum
from typing import Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, field_validator

from app.models.boosting import BoostConfig, EnsembleModel, Strategy
from app.models.dataset import DatasetSummary, FoldPlan

REPORT_FORMAT_VERSION = 1


class TableMode(str, Enum):
    mean = "mean"
    best = "best"
    best_repeat = "best_repeat"


class ExperimentSpec(BaseModel):
    name: Optional[str] = None
    # file paths, or bare names looked up in the data directory
    datasets: List[str]
    algorithms: List[Strategy] = list(Strategy)
    folds: int = 10
    repeats: int = 5
    seed: int = 0
    positive_label: Optional[str] = None
    configs: Dict[Strategy, BoostConfig] = {}
    cluster_candidates: List[int] = [2, 3, 5, 8, 13]
    workers: int = 1
    keep_ensembles: bool = True

    @field_validator("datasets", "algorithms")
    @classmethod
    def check_not_empty(cls, value):
        if not value:
            raise ValueError("at least one entry is required")
        return value

    @field_validator("folds")
    @classmethod
    def check_folds(cls, value):
        if value < 2:
            raise ValueError("folds must be >= 2")
        return value

    @field_validator("repeats", "workers")
    @classmethod
    def check_positive(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("seed")
    @classmethod
    def check_seed(cls, value):
        if value < 0:
            raise ValueError("seed must be >= 0")
        return value

    @field_validator("cluster_candidates")
    @classmethod
    def check_candidates(cls, value):
        if not value or any(k < 1 for k in value):
            raise ValueError("cluster candidates must be >= 1")
        return value

    def config_for(self, algorithm: Strategy) -> BoostConfig:
        base = self.configs.get(algorithm, BoostConfig())
        return base.model_copy(
            update={"strategy": algorithm, "cluster_candidates": self.cluster_candidates}
        )


class CellResult(BaseModel):
    dataset: str
    algorithm: Strategy
    repeat: int
    fold: int
    seed: int
    valid: bool = True
    auc: Optional[float] = None
    train_time: float = 0.0
    rounds_accepted: int = 0
    retries: int = 0
    num_clusters: Optional[int] = None
    plan_seeds: List[int] = []
    note: Optional[str] = None
    test_indices: List[int] = []
    test_scores: List[float] = []
    test_labels: List[str] = []
    ensemble: Optional[EnsembleModel] = None

    @property
    def key(self):
        return (self.dataset, self.algorithm.value, self.repeat, self.fold)


class AlgorithmAggregate(BaseModel):
    dataset: str
    algorithm: Strategy
    mean: Optional[float] = None
    # population standard deviation over cells
    std: Optional[float] = None
    best_cell: Optional[float] = None
    best_repeat_mean: Optional[float] = None
    repeat_means: List[Optional[float]] = []
    # population standard deviation of the per-repeat means
    repeat_std: Optional[float] = None
    valid_cells: int = 0
    invalid_cells: int = 0
    num_clusters_by_repeat: List[Optional[int]] = []


class DatasetRecord(BaseModel):
    name: str
    source: str
    summary: DatasetSummary
    positive_label: str
    # majority / minority after binarisation
    binary_imbalance_ratio: float
    fold_plans: List[FoldPlan]


class Observation(BaseModel):
    name: str
    dataset: str
    holds: bool
    detail: str


class RunReport(BaseModel):
    format_version: int = REPORT_FORMAT_VERSION
    spec: ExperimentSpec
    datasets: List[DatasetRecord]
    cells: List[CellResult]
    aggregates: List[AlgorithmAggregate]
    observations: List[Observation] = []

    def dataset_record(self, name: str) -> Optional[DatasetRecord]:
        return next((record for record in self.datasets if record.name == name), None)


class ComparisonRow(BaseModel):
    dataset: str
    values: Dict[str, Optional[float]]
    best: Optional[str] = None


class ComparisonTable(BaseModel):
    mode: TableMode
    algorithms: List[str]
    rows: List[ComparisonRow]
    omitted: List[str] = []

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            [[row.values.get(algorithm) for algorithm in self.algorithms] for row in self.rows],
            index=[row.dataset for row in self.rows],
            columns=self.algorithms,
        )
        frame.index.name = "dataset"
        return frame

    def render(self) -> str:
        """Aligned text; the row-best cell is marked with '*'."""
        cells = []
        for row in self.rows:
            line = []
            for algorithm in self.algorithms:
                value = row.values.get(algorithm)
                text = "-" if value is None else f"{value:.4f}"
                line.append(text + ("*" if algorithm == row.best else " "))
            cells.append(line)
        frame = pd.DataFrame(
            cells, index=[row.dataset for row in self.rows], columns=self.algorithms
        )
        frame.index.name = "dataset"
        return f"AUC ({self.mode.value})\n" + frame.to_string()


class ExperimentResponse(BaseModel):
    experiment_id: str
    status: str


class ExperimentHistory(BaseModel):
    id: str
    name: str
    created_at: str


class ExperimentHistoryResponse(BaseModel):
    experiments: List[ExperimentHistory]
