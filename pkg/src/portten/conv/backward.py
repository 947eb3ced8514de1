"""Gradients of the convolution via the transposed im2col formulation."""

from __future__ import annotations

import numpy as np

from ..geometry import ConvGeometry
from ..tensor import Tensor
from .common import expect
from .forward import _backend
from .gemm import GemmSpec, gemm, matmul
from .lowering import col2im_array


def conv_backward_input(grad_output, weight, geom: ConvGeometry, backend=None) -> Tensor:
    """``W^T @ dY`` per image, scattered back to image space with col2im."""
    go = expect(grad_output, geom.output_shape, "grad_output")
    w = expect(weight, geom.weight_shape, "weight")
    wmat = w.reshape(geom.out_channels, -1)
    grad = np.empty(geom.input_shape, dtype=np.float32)
    for n in range(geom.batch):
        cols = matmul(wmat, go[n].reshape(geom.out_channels, -1), trans_a=True)
        grad[n] = col2im_array(cols, geom)
    return Tensor.from_numpy(grad)


def conv_backward_bias(grad_output, geom: ConvGeometry) -> Tensor:
    go = expect(grad_output, geom.output_shape, "grad_output")
    return Tensor.from_numpy(go.sum(axis=(0, 2, 3), dtype=np.float64).astype(np.float32))


def conv_backward_weight(input, grad_output, geom: ConvGeometry,
                         backend=None) -> tuple[Tensor, Tensor]:
    """Weight and bias gradients; ``dW += dY_n @ im2col(x_n)^T`` over the batch."""
    x = expect(input, geom.input_shape, "input")
    go = expect(grad_output, geom.output_shape, "grad_output")
    be = _backend(backend)
    k = geom.out_channels
    rows, p = geom.col_shape
    grad_w = np.zeros((k, rows), dtype=np.float32)
    spec = GemmSpec(k, rows, p, trans_b=True, beta=1.0)
    for n in range(geom.batch):
        gemm(spec, go[n].reshape(k, p), be.im2col(x[n], geom), grad_w)
    return (Tensor.from_numpy(grad_w.reshape(geom.weight_shape)),
            conv_backward_bias(go, geom))
