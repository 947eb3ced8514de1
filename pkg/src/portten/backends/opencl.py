"""OpenCL device backend (optional, requires ``pyopencl``).

Every operation renders a specialized kernel through :mod:`portten.codegen`,
compiles it through the shared kernel cache and launches it on one device.
Tensors are moved as whole storages so that views keep their offsets and
strides on the device exactly as on the host.
"""

from __future__ import annotations

import logging
import threading

import numpy as np

from .. import codegen
from ..cache import KernelBuildError, KernelCache, default_cache
from ..codegen import ReduceGeometry
from ..tensor import Storage, Tensor, TensorError, contiguous
from .base import (Backend, BackendDescriptor, BackendError, BackendUnavailable,
                   choose_launch, reduce_workgroup_size)

log = logging.getLogger(__name__)

try:
    import pyopencl as cl
except ImportError:  # pragma: no cover - exercised only without the extra
    cl = None


def list_devices() -> list:
    """All OpenCL devices on all platforms; empty if the runtime is missing."""
    if cl is None:
        return []
    devices = []
    try:
        for platform in cl.get_platforms():
            devices.extend(platform.get_devices())
    except cl.Error as exc:
        log.warning("OpenCL probe failed: %s", exc)
        return []
    return devices


def describe(index: int, device) -> BackendDescriptor:
    return BackendDescriptor(
        name=f"opencl:{index}:{device.name.strip()}",
        max_workgroup_size=int(device.max_work_group_size),
        local_mem_bytes=int(device.local_mem_size),
        is_device=True,
    )


class DeviceBuffer:
    __slots__ = ("buffer", "n")

    def __init__(self, buffer, n: int):
        self.buffer = buffer
        self.n = n


class OpenCLBackend(Backend):
    def __init__(self, device_index: int = 0, cache: KernelCache | None = None):
        devices = list_devices()
        if not devices:
            raise BackendUnavailable("no OpenCL runtime or device available")
        if not 0 <= device_index < len(devices):
            raise BackendUnavailable(
                f"device index {device_index} out of range ({len(devices)} device(s))"
            )
        self.device = devices[device_index]
        self.descriptor = describe(device_index, self.device)
        self.ctx = cl.Context([self.device])
        self.queue = cl.CommandQueue(self.ctx)
        self.cache = cache if cache is not None else default_cache()
        self._lock = threading.RLock()

    # --- compilation ------------------------------------------------------

    def _compile(self, src):
        try:
            program = cl.Program(self.ctx, src.text).build(options=src.build_options.split())
        except cl.RuntimeError as exc:
            raise KernelBuildError(str(exc), src) from exc
        return getattr(program, src.entry_point)

    def _deserialize(self, src, binary: bytes):
        program = cl.Program(self.ctx, [self.device], [binary]).build()
        return getattr(program, src.entry_point)

    @staticmethod
    def _serialize(kernel) -> bytes:
        return kernel.program.binaries[0]

    def kernel(self, src):
        return self.cache.get_or_build(src, self.descriptor, self._compile,
                                       serialize=self._serialize,
                                       deserialize=self._deserialize).kernel

    def _launch(self, kernel, n_items: int, *args, workgroup_size: int | None = None):
        if workgroup_size is None:
            launch = choose_launch(n_items, self.descriptor)
            global_size, wg = launch.global_size, launch.workgroup_size
        else:
            wg = workgroup_size
            global_size = n_items
        assert wg <= self.descriptor.max_workgroup_size, "illegal workgroup size"
        assert global_size % wg == 0
        kernel(self.queue, (global_size,), (wg,), *args)

    # --- buffers ----------------------------------------------------------

    def _buffer_from(self, array: np.ndarray):
        mf = cl.mem_flags
        return cl.Buffer(self.ctx, mf.READ_WRITE | mf.COPY_HOST_PTR,
                         hostbuf=np.ascontiguousarray(array, dtype=np.float32))

    def _empty(self, n: int, dtype=np.float32):
        return cl.Buffer(self.ctx, cl.mem_flags.READ_WRITE, size=max(1, n) * np.dtype(dtype).itemsize)

    def _read(self, buffer, n: int, dtype=np.float32) -> np.ndarray:
        out = np.empty(n, dtype=dtype)
        cl.enqueue_copy(self.queue, out, buffer).wait()
        return out

    def upload(self, t: Tensor) -> DeviceBuffer:
        staged = contiguous(t)
        with self._lock:
            try:
                return DeviceBuffer(self._buffer_from(staged.numpy().reshape(-1)), t.numel())
            except cl.Error as exc:
                raise BackendError(f"device allocation failed: {exc}") from exc

    def download(self, handle: DeviceBuffer, t: Tensor) -> None:
        if handle.n != t.numel():
            raise TensorError(f"buffer holds {handle.n} elements, tensor needs {t.numel()}")
        with self._lock:
            data = self._read(handle.buffer, handle.n)
        t.numpy()[...] = data.reshape(t.sizes)

    # --- operations -------------------------------------------------------

    def _apply(self, spec, operands, scalar):
        src = codegen.gen_apply_kernel(spec, operands)
        n = operands[0].numel()
        with self._lock:
            kernel = self.kernel(src)
            # operands sharing a storage must share one device buffer
            buffers = {}
            for t in operands:
                if id(t.storage) not in buffers:
                    buffers[id(t.storage)] = self._buffer_from(t.storage.data)
            args = []
            for t in operands:
                args += [buffers[id(t.storage)], np.int32(t.storage_offset)]
            args.append(np.float32(scalar))
            self._launch(kernel, n, *args)
            dst = operands[0]
            updated = self._read(buffers[id(dst.storage)], len(dst.storage))
        view = Tensor(Storage.wrap(updated), dst.storage_offset, dst.sizes, dst.strides)
        dst.numpy()[...] = view.numpy()

    def _reduce(self, op, t, dim, return_indices):
        wg = reduce_workgroup_size(self.descriptor, return_indices)
        geom = ReduceGeometry.of(t, dim)
        src = codegen.gen_reduce_kernel(op, geom, wg, with_index=return_indices)
        n_groups = codegen.reduce_groups(geom, wg)
        with self._lock:
            kernel = self.kernel(src)
            in_buf = self._buffer_from(t.storage.data)
            out_buf = self._empty(n_groups)
            args = [in_buf, np.int32(t.storage_offset), out_buf]
            if return_indices:
                idx_buf = self._empty(n_groups, np.int32)
                args.append(idx_buf)
            self._launch(kernel, n_groups * wg, *args, workgroup_size=wg)
            if dim is None:
                count, partials = n_groups, out_buf
                while count > wg:
                    g2 = ReduceGeometry((count,), (1,), None)
                    k2 = self.kernel(codegen.gen_reduce_kernel(op, g2, wg))
                    n2 = codegen.reduce_groups(g2, wg)
                    next_buf = self._empty(n2)
                    self._launch(k2, n2 * wg, partials, np.int32(0), next_buf, workgroup_size=wg)
                    count, partials = n2, next_buf
                host = self._read(partials, count)
            else:
                host = self._read(out_buf, n_groups)
                if return_indices:
                    host_idx = self._read(idx_buf, n_groups, np.int32)
        if dim is None:
            if op == "sum":
                return float(np.float32(host.sum(dtype=np.float64)))
            return float(host.max() if op == "max" else host.min())
        shape = list(t.sizes)
        shape[dim] = 1
        out = Tensor.from_numpy(host.reshape(shape))
        if return_indices:
            return out, host_idx.reshape(shape).astype(np.int64)
        return out

    def im2col_batch(self, images, geom):
        images = np.ascontiguousarray(images, dtype=np.float32)
        n = images.shape[0]
        rows, p = geom.col_shape
        src = codegen.gen_im2col_kernel(geom)
        plane = geom.in_channels * geom.in_h * geom.in_w
        items = geom.in_channels * p
        with self._lock:
            kernel = self.kernel(src)
            im_buf = self._buffer_from(images.reshape(-1))
            col_buf = self._empty(rows * n * p)
            for b in range(n):
                self._launch(kernel, items, im_buf, np.int32(b * plane), col_buf,
                             np.int32(b * p), np.int32(n * p))
            cols = self._read(col_buf, rows * n * p)
        return cols.reshape(rows, n * p)

