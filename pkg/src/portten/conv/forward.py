"""Convolution as im2col lowering followed by GEMM."""

from __future__ import annotations

import numpy as np

from ..backends import Backend, get_backend
from ..geometry import ConvGeometry
from ..tensor import Tensor
from .common import conv_operands
from .gemm import matmul


def _backend(backend: Backend | None) -> Backend:
    return backend if backend is not None else get_backend("reference")


def conv_im2col_forward(input, weight, bias, geom: ConvGeometry, backend: Backend | None = None,
                        gemm_impl: str = "tiled") -> Tensor:
    """One lowering and one ``K x (C*kH*kW)`` by ``(C*kH*kW) x (outH*outW)`` GEMM per image."""
    x, w, b = conv_operands(input, weight, bias, geom)
    be = _backend(backend)
    wmat = w.reshape(geom.out_channels, -1)
    out = np.empty(geom.output_shape, dtype=np.float32)
    flat = out.reshape(geom.batch, geom.out_channels, -1)
    for n in range(geom.batch):
        flat[n] = matmul(wmat, be.im2col(x[n], geom), impl=gemm_impl)
        if b is not None:
            flat[n] += b[:, None]
    return Tensor.from_numpy(out)


def conv_im2col_batched(input, weight, bias, geom: ConvGeometry, batch_chunk: int | None = None,
                        backend: Backend | None = None, gemm_impl: str = "tiled") -> Tensor:
    """Lower ``batch_chunk`` images side by side and run one wide GEMM per chunk.

    Widening the GEMM moves it into a friendlier shape for BLAS-style
    kernels without changing any per-element accumulation, so the result
    is bitwise identical to :func:`conv_im2col_forward`.
    """
    x, w, b = conv_operands(input, weight, bias, geom)
    chunk = geom.batch if batch_chunk is None else int(batch_chunk)
    if not 1 <= chunk <= geom.batch:
        raise ValueError(f"batch_chunk must be in 1..{geom.batch}, got {batch_chunk}")
    be = _backend(backend)
    wmat = w.reshape(geom.out_channels, -1)
    p = geom.out_h * geom.out_w
    out = np.empty(geom.output_shape, dtype=np.float32)
    flat = out.reshape(geom.batch, geom.out_channels, p)
    for start in range(0, geom.batch, chunk):
        stop = min(start + chunk, geom.batch)
        res = matmul(wmat, be.im2col_batch(x[start:stop], geom), impl=gemm_impl)
        block = res.reshape(geom.out_channels, stop - start, p).transpose(1, 0, 2)
        if b is not None:
            block = block + b[None, :, None]
        flat[start:stop] = block
    return Tensor.from_numpy(out)
