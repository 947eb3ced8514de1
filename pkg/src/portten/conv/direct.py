from __future__ import annotations

import numpy as np

from ..geometry import ConvGeometry
from ..tensor import Tensor
from .common import conv_operands


def conv_direct_array(input, weight, bias, geom: ConvGeometry) -> np.ndarray:
    x, w, b = conv_operands(input, weight, bias, geom)
    xp = np.pad(x.astype(np.float64),
                ((0, 0), (0, 0), (geom.pad_h, geom.pad_h), (geom.pad_w, geom.pad_w)))
    w64 = w.astype(np.float64)
    out = np.zeros(geom.output_shape, dtype=np.float64)
    hi = geom.stride_h * (geom.out_h - 1) + 1
    wi = geom.stride_w * (geom.out_w - 1) + 1
    for r in range(geom.kernel_h):
        for s in range(geom.kernel_w):
            patch = xp[:, :, r:r + hi:geom.stride_h, s:s + wi:geom.stride_w]
            out += np.einsum("nchw,kc->nkhw", patch, w64[:, :, r, s])
    if b is not None:
        out += b.astype(np.float64)[None, :, None, None]
    return out.astype(np.float32)


def conv_direct(input, weight, bias, geom: ConvGeometry, backend=None) -> Tensor:
    """Direct zero-padded cross-correlation, accumulated in float64.

    ``out[n,k,i,j] = bias[k] + sum_{c,r,s} in[n, c, i*sh + r - ph, j*sw + s - pw] * w[k,c,r,s]``
    with out-of-range input reads contributing zero. Slow but obviously
    correct; every other implementation is checked against it.
    """
    return Tensor.from_numpy(conv_direct_array(input, weight, bias, geom))
