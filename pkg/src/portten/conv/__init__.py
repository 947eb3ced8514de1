"""Convolution algorithms, GEMM, gradients and the implementation registry."""

from ..geometry import ConvGeometry, GeometryError
from .backward import conv_backward_bias, conv_backward_input, conv_backward_weight
from .common import ShapeError
from .direct import conv_direct
from .forward import conv_im2col_batched, conv_im2col_forward
from .gemm import GemmSpec, gemm, gemm_naive, gemm_tiled, matmul
from .lowering import col2im, im2col, im2col_batch
from .registry import (ConvImplEntry, ConvRegistry, RegistryError, conv_forward,
                       conv_registry_register, conv_registry_select, default_registry)
from .winograd import conv_winograd_2x2_3x3, winograd_supports

__all__ = [
    "ConvGeometry", "GeometryError", "ShapeError", "GemmSpec", "ConvImplEntry", "ConvRegistry",
    "RegistryError", "col2im", "conv_backward_bias", "conv_backward_input", "conv_backward_weight",
    "conv_direct", "conv_forward", "conv_im2col_batched", "conv_im2col_forward",
    "conv_registry_register", "conv_registry_select", "conv_winograd_2x2_3x3", "default_registry",
    "gemm", "gemm_naive", "gemm_tiled", "im2col", "im2col_batch", "matmul", "winograd_supports",
]
