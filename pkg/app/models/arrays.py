from typing import Annotated

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _frozen(dtype):
    def convert(value):
        if value is None:
            raise ValueError("expected an array, got None")
        try:
            array = np.array(value, dtype=dtype)
        except TypeError as e:
            raise ValueError(str(e)) from e
        array.setflags(write=False)
        return array

    return convert


def _to_list(array: np.ndarray) -> list:
    return array.tolist()


# Read-only numpy arrays that serialise as nested lists.
IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen(np.int64)),
    PlainSerializer(_to_list, return_type=list),
]
FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen(np.float64)),
    PlainSerializer(_to_list, return_type=list),
]
