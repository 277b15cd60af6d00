from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.models.arrays import FloatArray, IntArray


class AttributeKind(str, Enum):
    numeric = "numeric"
    categorical = "categorical"


class AttributeSchema(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: AttributeKind
    categories: List[str] = []
    range: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == AttributeKind.categorical and not self.categories:
            raise ValueError(f"categorical attribute {self.name!r} has no categories")
        if self.kind == AttributeKind.numeric and self.categories:
            raise ValueError(f"numeric attribute {self.name!r} cannot list categories")
        return self


class Dataset(BaseModel):
    """Feature matrix plus labels.

    ``values`` holds one row per instance; categorical cells store the index
    of the category in the attribute's ``categories``. ``labels`` holds
    indices into ``classes``, the declared class order.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    attributes: List[AttributeSchema]
    classes: List[str]
    values: FloatArray
    labels: IntArray
    # parent row per instance, -1 for synthetic rows; None for parsed data
    provenance: Optional[IntArray] = None

    @model_validator(mode="after")
    def check_shape(self):
        names = [attribute.name for attribute in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.attributes):
            raise ValueError(
                f"values must have shape (n, {len(self.attributes)}), "
                f"got {self.values.shape}"
            )
        if self.labels.shape != (self.values.shape[0],):
            raise ValueError("labels length must equal the number of instances")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.classes)
        ):
            raise ValueError("label index outside the declared classes")
        if self.provenance is not None and self.provenance.shape != self.labels.shape:
            raise ValueError("provenance length must equal the number of instances")
        return self

    @property
    def num_instances(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_features(self) -> int:
        return len(self.attributes)

    @property
    def num_present_classes(self) -> int:
        return len(np.unique(self.labels))

    @property
    def label_values(self) -> List[str]:
        return [self.classes[code] for code in self.labels]

    def class_code(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise KeyError(f"unknown class label {label!r}") from None


class DatasetSummary(BaseModel):
    name: str
    num_instances: int
    num_features: int
    class_counts: Dict[str, int]
    imbalance_ratio: float


class BinaryView(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: Dataset
    positive_label: str
    majority_indices: IntArray
    minority_indices: IntArray
    # set when an explicit positive label is not the rarer class
    warning: bool = False

    @model_validator(mode="after")
    def check_partition(self):
        total = len(self.majority_indices) + len(self.minority_indices)
        covered = np.union1d(self.majority_indices, self.minority_indices)
        if total != self.base.num_instances or len(covered) != total:
            raise ValueError("majority and minority indices must partition the dataset")
        if not self.warning and len(self.minority_indices) > len(self.majority_indices):
            raise ValueError("minority side is larger than the majority side")
        return self


class FoldPlan(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    num_folds: int
    fold_assignment: IntArray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_assignment != fold)
