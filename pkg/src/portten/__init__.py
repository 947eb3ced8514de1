"""Hardware-agnostic tensor compute with runtime-specialized kernels."""

from .codegen import ApplySpec, KernelSource, gen_apply_kernel, gen_im2col_kernel, gen_reduce_kernel
from .geometry import ConvGeometry
from .tensor import Storage, Tensor, create, narrow

__version__ = "0.1.0"

__all__ = [
    "ApplySpec", "ConvGeometry", "KernelSource", "Storage", "Tensor", "create",
    "gen_apply_kernel", "gen_im2col_kernel", "gen_reduce_kernel", "narrow",
]
