"""im2col lowering and its scatter-add inverse on host arrays.

Rows of the lowered matrix are ordered channel-major, then kernel row,
then kernel column; column ``i * outW + j`` holds the receptive field of
output pixel ``(i, j)``. When several images are lowered together their
column blocks are laid side by side.
"""

from __future__ import annotations

import numpy as np

from ..geometry import ConvGeometry
from ..tensor import Tensor, as_array
from .common import ShapeError, expect


def _window(geom: ConvGeometry, r: int, s: int) -> tuple[slice, slice]:
    return (
        slice(r, r + geom.stride_h * (geom.out_h - 1) + 1, geom.stride_h),
        slice(s, s + geom.stride_w * (geom.out_w - 1) + 1, geom.stride_w),
    )


def im2col_batch(images, geom: ConvGeometry) -> np.ndarray:
    """Lower ``n`` images (n x C x H x W) to one (C*kH*kW) x (n*outH*outW) matrix."""
    x = as_array(images)
    if x.ndim != 4 or x.shape[1:] != geom.input_shape[1:]:
        raise ShapeError(f"images have shape {x.shape}, expected (n, {geom.in_channels}, "
                         f"{geom.in_h}, {geom.in_w})")
    n = x.shape[0]
    c, kh, kw = geom.in_channels, geom.kernel_h, geom.kernel_w
    xp = np.pad(x, ((0, 0), (0, 0), (geom.pad_h, geom.pad_h), (geom.pad_w, geom.pad_w)))
    cols = np.empty((c, kh, kw, n, geom.out_h, geom.out_w), dtype=np.float32)
    for r in range(kh):
        for s in range(kw):
            rows, columns = _window(geom, r, s)
            cols[:, r, s] = xp[:, :, rows, columns].transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, n * geom.out_h * geom.out_w)


def col2im_array(matrix, geom: ConvGeometry) -> np.ndarray:
    m = expect(matrix, geom.col_shape, "column matrix")
    c, kh, kw = geom.in_channels, geom.kernel_h, geom.kernel_w
    cols = m.reshape(c, kh, kw, geom.out_h, geom.out_w)
    xp = np.zeros((c, geom.in_h + 2 * geom.pad_h, geom.in_w + 2 * geom.pad_w), dtype=np.float32)
    for r in range(kh):
        for s in range(kw):
            rows, columns = _window(geom, r, s)
            xp[:, rows, columns] += cols[:, r, s]
    return xp[:, geom.pad_h:geom.pad_h + geom.in_h, geom.pad_w:geom.pad_w + geom.in_w]


def im2col(image, geom: ConvGeometry) -> Tensor:
    """Lower a single C x H x W image; padding positions become zeros."""
    x = expect(image, geom.input_shape[1:], "image")
    return Tensor.from_numpy(im2col_batch(x[None], geom))


def col2im(matrix, geom: ConvGeometry) -> Tensor:
    """Scatter-add a lowered matrix back to a C x H x W image.

    Overlapping receptive fields accumulate and padding positions are
    dropped, which makes this the adjoint of :func:`im2col`.
    """
    return Tensor.from_numpy(col2im_array(matrix, geom))
