from __future__ import annotations

import numpy as np

from ..geometry import ConvGeometry
from ..tensor import TensorError, as_array


class ShapeError(TensorError):
    pass


def expect(x, shape: tuple[int, ...], what: str) -> np.ndarray:
    a = as_array(x)
    if a.shape != tuple(shape):
        raise ShapeError(f"{what} has shape {a.shape}, geometry requires {tuple(shape)}")
    return a


def conv_operands(input, weight, bias, geom: ConvGeometry):
    x = expect(input, geom.input_shape, "input")
    w = expect(weight, geom.weight_shape, "weight")
    b = None if bias is None else expect(bias, (geom.out_channels,), "bias")
    return x, w, b
