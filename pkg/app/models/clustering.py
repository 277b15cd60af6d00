from typing import List

from pydantic import BaseModel, ConfigDict

from app.models.arrays import FloatArray, IntArray
from app.models.dataset import AttributeKind


class AttributeEncoding(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: AttributeKind
    shift: float = 0.0
    scale: float = 1.0
    categories: List[str] = []

    @property
    def width(self) -> int:
        return 1 if self.kind == AttributeKind.numeric else len(self.categories)


class FeatureEncoding(BaseModel):
    model_config = ConfigDict(frozen=True)

    attributes: List[AttributeEncoding]

    @property
    def width(self) -> int:
        return sum(attribute.width for attribute in self.attributes)


class ClusterModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int
    centroids: FloatArray
    assignment: IntArray
    inertia: float
    iterations_run: int
    inertia_history: List[float] = []

    def summary(self) -> dict:
        return {
            "k": self.k,
            "inertia": self.inertia,
            "iterations_run": self.iterations_run,
            "cluster_sizes": [int((self.assignment == j).sum()) for j in range(self.k)],
        }
