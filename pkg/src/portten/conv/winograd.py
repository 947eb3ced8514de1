"""Winograd minimal filtering F(2x2, 3x3).

Each 2x2 output tile comes from a 4x4 input tile (tiles overlap by two
pixels). Filters and tiles are transformed once, channels are summed in
the transformed domain as 16 independent GEMMs, and a single inverse
transform per tile produces the output.
"""

from __future__ import annotations

import numpy as np

from ..geometry import ConvGeometry, GeometryError
from ..tensor import Tensor
from .common import conv_operands
from .gemm import matmul

# Lavin & Gray F(2,3) transforms
G = np.array([[1.0, 0.0, 0.0],
              [0.5, 0.5, 0.5],
              [0.5, -0.5, 0.5],
              [0.0, 0.0, 1.0]], dtype=np.float32)
BT = np.array([[1.0, 0.0, -1.0, 0.0],
               [0.0, 1.0, 1.0, 0.0],
               [0.0, -1.0, 1.0, 0.0],
               [0.0, 1.0, 0.0, -1.0]], dtype=np.float32)
AT = np.array([[1.0, 1.0, 1.0, 0.0],
               [0.0, 1.0, -1.0, -1.0]], dtype=np.float32)


def winograd_supports(geom: ConvGeometry) -> bool:
    return (geom.kernel_h == 3 and geom.kernel_w == 3
            and geom.stride_h == 1 and geom.stride_w == 1)


def transform_filters(w: np.ndarray) -> np.ndarray:
    """K x C x 3 x 3 filters to K x C x 4 x 4 (``G g G^T``)."""
    return np.einsum("ir,kcrs,js->kcij", G, w, G).astype(np.float32)


def conv_winograd_2x2_3x3(input, weight, bias, geom: ConvGeometry, backend=None,
                          gemm_impl: str = "tiled") -> Tensor:
    if not winograd_supports(geom):
        raise GeometryError(f"winograd F(2x2,3x3) needs a 3x3 stride-1 kernel, got {geom.describe()}")
    x, w, b = conv_operands(input, weight, bias, geom)
    n, c, k = geom.batch, geom.in_channels, geom.out_channels
    oh, ow = geom.out_h, geom.out_w
    th, tw = -(-oh // 2), -(-ow // 2)
    # zero-extend so the last tiles are complete 4x4 windows
    xp = np.zeros((n, c, 2 * th + 2, 2 * tw + 2), dtype=np.float32)
    xp[:, :, geom.pad_h:geom.pad_h + geom.in_h, geom.pad_w:geom.pad_w + geom.in_w] = x

    u = transform_filters(w)
    tiles = np.empty((n, c, th, tw, 4, 4), dtype=np.float32)
    for i in range(4):
        for j in range(4):
            tiles[..., i, j] = xp[:, :, i:i + 2 * th:2, j:j + 2 * tw:2]
    v = np.einsum("ai,nchwij,bj->abcnhw", BT, tiles, BT).astype(np.float32)

    m = np.empty((4, 4, k, n * th * tw), dtype=np.float32)
    for a in range(4):
        for bb in range(4):
            m[a, bb] = matmul(u[:, :, a, bb], v[a, bb].reshape(c, -1), impl=gemm_impl)
    m = m.reshape(4, 4, k, n, th, tw)
    y = np.einsum("ia,abknhw,jb->nkhiwj", AT, m, AT).astype(np.float32)
    out = y.reshape(n, k, 2 * th, 2 * tw)[:, :, :oh, :ow]
    if b is not None:
        out = out + b[None, :, None, None]
    return Tensor.from_numpy(out)
