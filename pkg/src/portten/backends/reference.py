"""Host backend that interprets operation descriptors with numpy.

Generated kernel text is never executed here. It is only rendered when
kernel dumping is active, so ``--dump-kernels`` works on any machine.
"""

from __future__ import annotations

import numpy as np

from .. import codegen, expr
from ..tensor import Tensor, contiguous
from .base import Backend, BackendDescriptor, TensorError

REFERENCE = BackendDescriptor("reference", max_workgroup_size=256, local_mem_bytes=32768,
                              is_device=False)


class HostBuffer:
    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        self.data = data


class ReferenceBackend(Backend):
    descriptor = REFERENCE

    def _apply(self, spec, operands, scalar):
        if codegen.dumping():
            codegen.gen_apply_kernel(spec, operands)
        env = {name: t.numpy() for name, t in zip(spec.operands, operands)}
        env[expr.SCALAR] = scalar
        result = expr.evaluate(spec.ast, env)
        operands[0].numpy()[...] = result

    def _reduce(self, op, t, dim, return_indices):
        a = t.numpy()
        if dim is None:
            if op == "sum":
                return float(np.float32(a.sum(dtype=np.float64)))
            return float(a.max() if op == "max" else a.min())
        if op == "sum":
            values = a.sum(axis=dim, dtype=np.float64, keepdims=True).astype(np.float32)
        elif op == "max":
            values = a.max(axis=dim, keepdims=True)
        else:
            values = a.min(axis=dim, keepdims=True)
        out = Tensor.from_numpy(values)
        if not return_indices:
            return out
        # argmax/argmin return the first occurrence on ties
        pick = np.argmax if op == "max" else np.argmin
        return out, pick(a, axis=dim, keepdims=True).astype(np.int64)

    def upload(self, t: Tensor) -> HostBuffer:
        return HostBuffer(contiguous(t).numpy().reshape(-1).copy())

    def download(self, handle: HostBuffer, t: Tensor) -> None:
        if handle.data.shape[0] != t.numel():
            raise TensorError(
                f"buffer holds {handle.data.shape[0]} elements, tensor needs {t.numel()}"
            )
        t.numpy()[...] = handle.data.reshape(t.sizes)

    def im2col_batch(self, images, geom):
        from ..conv.lowering import im2col_batch

        if codegen.dumping():
            codegen.gen_im2col_kernel(geom)
        return im2col_batch(images, geom)
