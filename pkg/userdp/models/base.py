from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, PlainSerializer, PlainValidator


def _validated_array(value: Any, ndim: int) -> np.ndarray:
    if (
        isinstance(value, np.ndarray)
        and value.dtype == np.float64
        and not value.flags.writeable
    ):
        array = value
    else:
        array = np.array(value, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError("array contains NaN or infinite entries")
    array.setflags(write=False)
    return array


def _to_list(array: np.ndarray) -> list:
    return array.tolist()


Vector = Annotated[
    np.ndarray,
    PlainValidator(lambda v: _validated_array(v, 1)),
    PlainSerializer(_to_list, return_type=list),
]
Matrix = Annotated[
    np.ndarray,
    PlainValidator(lambda v: _validated_array(v, 2)),
    PlainSerializer(_to_list, return_type=list),
]
Tensor3 = Annotated[
    np.ndarray,
    PlainValidator(lambda v: _validated_array(v, 3)),
    PlainSerializer(_to_list, return_type=list),
]


class Base(BaseModel):
    """Immutable value type; numpy payloads are stored read-only."""

    model_config = ConfigDict(
        arbitrary_types_allowed=True, frozen=True, extra="forbid", ser_json_inf_nan="constants"
    )
