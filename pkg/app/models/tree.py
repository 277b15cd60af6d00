from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

from app.models.dataset import AttributeSchema


class TreeConfig(BaseModel):
    # None means unlimited depth
    max_depth: Optional[int] = None
    # fraction of the root weight; None resolves to 2 / n at fit time
    min_leaf_weight: Optional[float] = None
    min_split_gain_ratio: float = 1e-4

    @field_validator("max_depth")
    @classmethod
    def check_depth(cls, value):
        if value is not None and value < 0:
            raise ValueError("max_depth must be >= 0")
        return value

    @field_validator("min_leaf_weight", "min_split_gain_ratio")
    @classmethod
    def check_non_negative(cls, value):
        if value is not None and value < 0:
            raise ValueError("must be >= 0")
        return value


class Leaf(BaseModel):
    kind: Literal["leaf"] = "leaf"
    class_label: str
    # weight per class, in the tree's class order
    distribution: List[float]


class NumericSplit(BaseModel):
    kind: Literal["numeric"] = "numeric"
    attribute: int
    threshold: float
    # [left (<= threshold), right]
    children: List["TreeNode"]
    child_weights: List[float]


class CategoricalSplit(BaseModel):
    kind: Literal["categorical"] = "categorical"
    attribute: int
    # category index -> child position
    branches: Dict[int, int]
    children: List["TreeNode"]
    child_weights: List[float]


TreeNode = Annotated[
    Union[Leaf, NumericSplit, CategoricalSplit], Field(discriminator="kind")
]

NumericSplit.model_rebuild()
CategoricalSplit.model_rebuild()


class TreeModel(BaseModel):
    root: TreeNode
    attributes: List[AttributeSchema]
    classes: List[str]
    minority_label: str
    config: TreeConfig
