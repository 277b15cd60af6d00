from typing import List, Tuple

from pydantic import BaseModel, field_validator


class ConfusionCounts(BaseModel):
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @field_validator("tp", "fp", "tn", "fn")
    @classmethod
    def check_count(cls, value):
        if value < 0:
            raise ValueError("counts must be non-negative")
        return value

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class RocCurve(BaseModel):
    # (fp_rate, tp_rate) from (0, 0) to (1, 1)
    points: List[Tuple[float, float]]
    auc: float
