from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..codegen import ApplySpec, REDUCE_OPS
from ..geometry import ConvGeometry
from ..tensor import Tensor, TensorError

PREFERRED_WORKGROUP = 256


class BackendError(RuntimeError):
    pass


class BackendUnavailable(BackendError):
    pass


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    max_workgroup_size: int
    local_mem_bytes: int
    is_device: bool


@dataclass(frozen=True)
class LaunchConfig:
    global_size: int
    workgroup_size: int


def choose_launch(n: int, d: BackendDescriptor) -> LaunchConfig:
    """1-D launch covering ``n`` items, rounded up to whole workgroups."""
    if n < 1:
        raise ValueError(f"work item count must be >= 1, got {n}")
    wg = min(PREFERRED_WORKGROUP, d.max_workgroup_size)
    return LaunchConfig(math.ceil(n / wg) * wg, wg)


def reduce_workgroup_size(d: BackendDescriptor, with_index: bool = False) -> int:
    """Largest power-of-two group in 32..256 that fits the device limits."""
    per_item = 8 if with_index else 4
    wg = 256
    while wg > 32 and (wg > d.max_workgroup_size or wg * per_item > d.local_mem_bytes):
        wg //= 2
    return wg


class Backend:
    """Dispatch contract shared by the reference and device backends.

    Subclasses implement ``_apply``, ``_reduce``, ``upload``, ``download``
    and ``im2col_batch``; validation lives here so every backend rejects
    the same inputs.
    """

    descriptor: BackendDescriptor

    @property
    def name(self) -> str:
        return self.descriptor.name

    def dispatch_apply(self, spec: ApplySpec | str, operands: Sequence[Tensor],
                       scalar: float = 0.0) -> None:
        """``operands[0] = expression(operands..., s=scalar)`` element-wise, in place."""
        if isinstance(spec, str):
            spec = ApplySpec(spec, len(operands))
        if len(operands) != spec.arity:
            raise TensorError(f"expression needs {spec.arity} operand(s), got {len(operands)}")
        sizes = operands[0].sizes
        for t in operands[1:]:
            if t.sizes != sizes:
                raise TensorError(f"size mismatch: {list(sizes)} vs {list(t.sizes)}")
        self._apply(spec, list(operands), np.float32(scalar))

    def dispatch_reduce(self, op: str, t: Tensor, dim: int | None = None,
                        return_indices: bool = False):
        """Reduce everything to a float, or along ``dim`` to a keep-dim tensor.

        With ``return_indices`` (max/min along a dim only) also returns an
        int64 array of positions along ``dim``; ties go to the lowest index.
        """
        if op not in REDUCE_OPS:
            raise ValueError(f"unsupported reduction {op!r}; expected one of {REDUCE_OPS}")
        if t.numel() == 0:
            raise TensorError("cannot reduce an empty tensor")
        if dim is not None and not 0 <= dim < t.ndim:
            raise TensorError(f"dim {dim} out of range for {t.ndim}-d tensor")
        if return_indices and (dim is None or op == "sum"):
            raise ValueError("indices are only returned for max/min along a dimension")
        return self._reduce(op, t, dim, return_indices)

    def im2col(self, image: np.ndarray, geom: ConvGeometry) -> np.ndarray:
        """Lower one C x H x W image to a (C*kH*kW) x (outH*outW) matrix."""
        return self.im2col_batch(np.asarray(image)[None], geom)

    # subclass hooks
    def _apply(self, spec: ApplySpec, operands: list[Tensor], scalar: np.float32) -> None:
        raise NotImplementedError

    def _reduce(self, op, t, dim, return_indices):
        raise NotImplementedError

    def upload(self, t: Tensor):
        raise NotImplementedError

    def download(self, handle, t: Tensor) -> None:
        raise NotImplementedError

    def im2col_batch(self, images: np.ndarray, geom: ConvGeometry) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"
