from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from app.models.arrays import FloatArray, IntArray


class SamplingStrategy(str, Enum):
    cus = "cus"
    rus = "rus"
    smote = "smote"


class PlanSummary(BaseModel):
    strategy: SamplingStrategy
    seed: int
    params: Dict[str, Any]
    kept: int
    synthetic: int


class SamplePlan(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    strategy: SamplingStrategy
    seed: int
    params: Dict[str, Any] = {}
    kept_indices: IntArray
    synthetic_values: Optional[FloatArray] = None
    synthetic_label: Optional[str] = None
    synthetic_pairs: List[Tuple[int, int]] = []

    @model_validator(mode="after")
    def check_plan(self):
        if len(set(self.kept_indices.tolist())) != len(self.kept_indices):
            raise ValueError("kept indices must be unique")
        if self.synthetic_values is not None and self.synthetic_label is None:
            raise ValueError("synthetic instances need the minority label")
        return self

    @property
    def num_synthetic(self) -> int:
        return 0 if self.synthetic_values is None else len(self.synthetic_values)

    def summary(self) -> PlanSummary:
        return PlanSummary(
            strategy=self.strategy,
            seed=self.seed,
            params=self.params,
            kept=len(self.kept_indices),
            synthetic=self.num_synthetic,
        )
