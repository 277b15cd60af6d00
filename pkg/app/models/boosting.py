from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, field_validator

from app.models.dataset import AttributeSchema
from app.models.sampling import PlanSummary
from app.models.tree import TreeConfig, TreeModel

ENSEMBLE_FORMAT_VERSION = 1


class Strategy(str, Enum):
    adaboost = "adaboost"
    rusboost = "rusboost"
    smoteboost = "smoteboost"
    cusboost = "cusboost"


class BoostConfig(BaseModel):
    strategy: Strategy = Strategy.cusboost
    rounds: int = 20
    max_retries_per_round: int = 10
    # None lets train pick the count with the inertia-elbow sweep
    num_clusters: Optional[int] = None
    cluster_candidates: List[int] = [2, 3, 5, 8, 13]
    fraction: float = 0.5
    target_ratio: float = 1.0
    smote_amount: int = 100
    smote_neighbors: int = 5
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-6
    tree: TreeConfig = TreeConfig()
    seed: int = 0

    @field_validator("rounds", "max_retries_per_round", "smote_neighbors", "kmeans_max_iters")
    @classmethod
    def check_positive(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("num_clusters")
    @classmethod
    def check_clusters(cls, value):
        if value is not None and value < 1:
            raise ValueError("num_clusters must be >= 1")
        return value

    @field_validator("cluster_candidates")
    @classmethod
    def check_candidates(cls, value):
        if any(k < 1 for k in value):
            raise ValueError("cluster candidates must be >= 1")
        return value

    @field_validator("fraction")
    @classmethod
    def check_fraction(cls, value):
        if not 0 < value <= 1:
            raise ValueError("fraction must be in (0, 1]")
        return value

    @field_validator("target_ratio")
    @classmethod
    def check_ratio(cls, value):
        if value < 1:
            raise ValueError("target_ratio must be >= 1")
        return value

    @field_validator("smote_amount")
    @classmethod
    def check_amount(cls, value):
        if value < 100 or value % 100:
            raise ValueError("smote_amount must be a positive multiple of 100")
        return value

    @field_validator("kmeans_tol")
    @classmethod
    def check_tol(cls, value):
        if value < 0:
            raise ValueError("kmeans_tol must be >= 0")
        return value

    @field_validator("seed")
    @classmethod
    def check_seed(cls, value):
        if value < 0:
            raise ValueError("seed must be >= 0")
        return value


class RoundRecord(BaseModel):
    round_index: int
    seed: int
    plan: Optional[PlanSummary] = None
    tree: TreeModel
    error: float
    vote_weight: float
    retries: int = 0


class EnsembleModel(BaseModel):
    format_version: int = ENSEMBLE_FORMAT_VERSION
    strategy: Strategy
    positive_label: str
    classes: List[str]
    attributes: List[AttributeSchema]
    config: BoostConfig
    num_clusters: Optional[int] = None
    rounds: List[RoundRecord]

    @property
    def total_retries(self) -> int:
        return sum(record.retries for record in self.rounds)
