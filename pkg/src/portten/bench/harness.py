"""Timing loops for the bandwidth sweep and per-layer model runs.

Every measurement runs one untimed warm-up iteration (which also pays any
kernel compilation) followed by ``reps`` timed iterations on the
monotonic ``perf_counter`` clock.
"""

from __future__ import annotations

import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..backends import Backend
from ..codegen import ApplySpec
from ..conv import (conv_backward_input, conv_backward_weight, conv_registry_select,
                    default_registry)
from ..tensor import Tensor, create
from .models import ConvLayer, ModelSpec, PoolLayer, scale_model

log = logging.getLogger(__name__)

MIN_REPS = 3
DEFAULT_SIZES = (1_000, 10_000, 100_000, 1_000_000, 10_000_000)
BYTES_PER_FLOAT = 4
TRANSFERS_PER_ELEMENT = 2  # one read + one write


@dataclass(frozen=True)
class BandwidthRow:
    size: int
    repetitions: int
    mean_time_s: float | None  # None: size could not be allocated

    @property
    def skipped(self) -> bool:
        return self.mean_time_s is None

    @property
    def gb_per_s(self) -> float | None:
        if self.mean_time_s is None:
            return None
        return self.size * BYTES_PER_FLOAT * TRANSFERS_PER_ELEMENT / self.mean_time_s / 1e9


@dataclass(frozen=True)
class LayerRow:
    index: int
    type: str
    geometry: str
    mean_time_s: float
    checksum: float
    impl: str = ""


@dataclass(frozen=True)
class SummaryRow:
    type: str
    mean_time_s: float
    fraction: float


def _check_reps(reps: int) -> None:
    if reps < MIN_REPS:
        raise ValueError(f"at least {MIN_REPS} timed repetitions are required, got {reps}")


def _timed(fn, reps: int) -> tuple[float, object]:
    result = fn()  # warm-up: excluded from the mean
    total = 0.0
    for _ in range(reps):
        t0 = time.perf_counter()
        result = fn()
        total += time.perf_counter() - t0
    return total / reps, result


def bench_apply(backend: Backend, sizes: Sequence[int] = DEFAULT_SIZES,
                expression: str = "x = x * 2", reps: int = 5) -> list[BandwidthRow]:
    """Per-element bandwidth of a unary apply for each tensor size."""
    _check_reps(reps)
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("sizes must be a non-empty list of positive integers")
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    spec = ApplySpec(expression, 1)
    rows = []
    for n in sizes:
        try:
            t = create([n])
            t.storage.data[:] = 1.0
            mean, _ = _timed(lambda: backend.dispatch_apply(spec, [t], 1.0), reps)
        except MemoryError:
            log.warning("size %d: allocation failed, skipped", n)
            rows.append(BandwidthRow(n, reps, None))
            continue
        rows.append(BandwidthRow(n, reps, mean))
        log.info("size %d: %.3g s, %.3g GB/s", n, mean, rows[-1].gb_per_s)
    return rows


# --- model layers ---------------------------------------------------------

def _relu_forward(backend: Backend, x: np.ndarray) -> np.ndarray:
    t = Tensor.from_numpy(x)
    backend.dispatch_apply("x = max(x, 0)", [t])
    return t.numpy()


def _pool_windows(x: np.ndarray, layer: PoolLayer, out_h: int, out_w: int):
    need_h = (out_h - 1) * layer.stride_h + layer.kernel_h
    need_w = (out_w - 1) * layer.stride_w + layer.kernel_w
    pad = ((0, 0), (0, 0), (0, max(0, need_h - x.shape[2])), (0, max(0, need_w - x.shape[3])))
    xp = np.pad(x, pad, constant_values=-np.inf)
    for r in range(layer.kernel_h):
        for s in range(layer.kernel_w):
            rows = slice(r, r + (out_h - 1) * layer.stride_h + 1, layer.stride_h)
            cols = slice(s, s + (out_w - 1) * layer.stride_w + 1, layer.stride_w)
            yield rows, cols, xp


def pool_forward(x: np.ndarray, layer: PoolLayer, out_shape) -> np.ndarray:
    _, oh, ow = out_shape
    out = np.full(x.shape[:2] + (oh, ow), -np.inf, dtype=np.float32)
    for rows, cols, xp in _pool_windows(x, layer, oh, ow):
        np.maximum(out, xp[:, :, rows, cols], out=out)
    return out


def pool_backward(x: np.ndarray, out: np.ndarray, grad: np.ndarray, layer: PoolLayer) -> np.ndarray:
    """Route each output gradient to the first maximal input of its window."""
    _, _, oh, ow = out.shape
    gx = None
    taken = np.zeros(out.shape, dtype=bool)
    for rows, cols, xp in _pool_windows(x, layer, oh, ow):
        if gx is None:
            gx = np.zeros(xp.shape, dtype=np.float32)
        hit = (xp[:, :, rows, cols] == out) & ~taken
        gx[:, :, rows, cols] += np.where(hit, grad, 0.0)
        taken |= hit
    return gx[:, :, :x.shape[2], :x.shape[3]]


def _layer_geometry(layer, in_shape, batch: int) -> str:
    c, h, w = in_shape
    if isinstance(layer, ConvLayer):
        return layer.geometry(batch).describe()
    if isinstance(layer, PoolLayer):
        return (f"{batch}x{c}x{h}x{w} k{layer.kernel_h}x{layer.kernel_w}"
                f" s{layer.stride_h},{layer.stride_w}")
    return f"{batch}x{c}x{h}x{w}"


def bench_model(model: ModelSpec, scale: int, backend: Backend, impl: str | None = None,
                backward: bool = False, batch: int = 4, reps: int = MIN_REPS,
                seed: int = 0) -> tuple[list[LayerRow], list[SummaryRow]]:
    """Time every layer of ``model`` shrunk by ``scale``.

    Returns one row per layer (forward time, or forward+backward time with
    ``backward``) and the per-layer-type totals. The checksum column is the
    sum of each layer's forward output, so runs with different convolution
    implementations can be compared for correctness.
    """
    _check_reps(reps)
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if impl is not None:
        default_registry.get(impl)
    spec = scale_model(model, scale)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch,) + spec.input_shape).astype(np.float32)

    rows = []
    shape = spec.input_shape
    for index, layer in enumerate(spec.layers):
        out_shape = layer.output_shape(shape)
        grad = rng.standard_normal((batch,) + out_shape).astype(np.float32)
        name = ""
        if isinstance(layer, ConvLayer):
            geom = layer.geometry(batch)
            fan_in = geom.in_channels * geom.kernel_h * geom.kernel_w
            w = (rng.standard_normal(geom.weight_shape) * math.sqrt(2.0 / fan_in)).astype(np.float32)
            b = (0.01 * rng.standard_normal(geom.out_channels)).astype(np.float32)
            entry = default_registry.get(impl) if impl else conv_registry_select(geom, backend)
            name = entry.name

            def step(x=x, w=w, b=b, geom=geom, entry=entry, grad=grad):
                y = entry.run(x, w, b, geom, backend=backend).numpy()
                if backward:
                    conv_backward_input(grad, w, geom, backend=backend)
                    conv_backward_weight(x, grad, geom, backend=backend)
                return y
        elif isinstance(layer, PoolLayer):
            def step(x=x, layer=layer, out_shape=out_shape, grad=grad):
                y = pool_forward(x, layer, out_shape)
                if backward:
                    pool_backward(x, y, grad, layer)
                return y
        else:
            def step(x=x, grad=grad):
                y = _relu_forward(backend, x)
                if backward:
                    _ = grad * (x > 0)
                return y

        mean, y = _timed(step, reps)
        rows.append(LayerRow(index, layer.type, _layer_geometry(layer, shape, batch), mean,
                             float(np.sum(y, dtype=np.float64)), name))
        log.info("layer %d %s %s: %.3g s", index, layer.type, name, mean)
        x, shape = y, out_shape
    return rows, summarize(rows)


def summarize(rows: Sequence[LayerRow]) -> list[SummaryRow]:
    totals: dict[str, float] = defaultdict(float)
    for r in rows:
        totals[r.type] += r.mean_time_s
    grand = sum(totals.values()) or 1.0
    return [SummaryRow(t, v, v / grand) for t, v in totals.items()]
