"""Runtime generation of geometry-specialized OpenCL kernels.

Every generator renders a bundled template with the exact sizes, strides
and unroll lists of one problem baked in as literals. Only storage offsets
(and, for im2col, the destination leading dimension) stay runtime
arguments, so narrowed views of the same shape reuse one compiled kernel.
"""

from __future__ import annotations

import itertools
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import expr, templating
from .geometry import ConvGeometry
from .tensor import MAX_DIMS, Tensor, contiguous_strides

UNROLL_LIMIT = 25
REDUCE_OPS = ("sum", "max", "min")
WORKGROUP_SIZES = (32, 64, 128, 256)
APPLY_BUILD_OPTIONS = "-cl-fp32-correctly-rounded-divide-sqrt"  # host-exact / and sqrt
MAX_REDUCE_GROUPS = 1024


class CodegenError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSource:
    text: str
    entry_point: str
    build_options: str = ""


@dataclass(frozen=True)
class OperandGeometry:
    sizes: tuple[int, ...]
    strides: tuple[int, ...]

    @classmethod
    def of(cls, t: "Tensor | OperandGeometry") -> "OperandGeometry":
        if isinstance(t, OperandGeometry):
            return t
        return cls(tuple(t.sizes), tuple(t.strides))

    @property
    def contiguous(self) -> bool:
        expected = contiguous_strides(self.sizes)
        return all(n == 1 or s == e for n, s, e in zip(self.sizes, self.strides, expected))


@dataclass(frozen=True)
class ApplySpec:
    """A validated ``x = f(x, y, z, s)`` element-wise operation."""

    expression: str
    arity: int = 1
    ast: expr.Assignment = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ast", expr.parse(self.expression, self.arity))

    @property
    def operands(self) -> tuple[str, ...]:
        return expr.OPERANDS[:self.arity]


@dataclass(frozen=True)
class ReduceGeometry:
    """Input view plus the reduced dimension (``None`` reduces everything)."""

    sizes: tuple[int, ...]
    strides: tuple[int, ...]
    dim: int | None = None

    @classmethod
    def of(cls, t: Tensor, dim: int | None = None) -> "ReduceGeometry":
        return cls(tuple(t.sizes), tuple(t.strides), dim)

    @property
    def n_elements(self) -> int:
        return math.prod(self.sizes)

    def outer(self) -> OperandGeometry:
        keep = [d for d in range(len(self.sizes)) if d != self.dim]
        return OperandGeometry(
            tuple(self.sizes[d] for d in keep) or (1,),
            tuple(self.strides[d] for d in keep) or (1,),
        )


def reduce_groups(geometry: ReduceGeometry, workgroup_size: int) -> int:
    """Workgroups launched by the first reduction stage."""
    if geometry.dim is not None:
        return geometry.n_elements // geometry.sizes[geometry.dim]
    return min(math.ceil(geometry.n_elements / workgroup_size), MAX_REDUCE_GROUPS)


# --- kernel dumping -------------------------------------------------------

_dump_lock = threading.Lock()
_dump_dir: Path | None = None
_dump_counter = itertools.count()


def set_dump_dir(path: str | os.PathLike | None) -> None:
    """Write every subsequently generated kernel to numbered files in ``path``."""
    global _dump_dir, _dump_counter
    with _dump_lock:
        _dump_dir = Path(path) if path is not None else None
        _dump_counter = itertools.count()
        if _dump_dir is not None:
            _dump_dir.mkdir(parents=True, exist_ok=True)


def dumping() -> bool:
    return _dump_dir is not None


def _emit(src: KernelSource) -> KernelSource:
    with _dump_lock:
        if _dump_dir is not None:
            n = next(_dump_counter)
            (_dump_dir / f"{n:04d}_{src.entry_point}.cl").write_text(src.text)
    return src


# --- generators -----------------------------------------------------------

def _index_block(geom: OperandGeometry, *, name: str, offset: str, linear: str,
                 indent: str) -> str:
    kept = [d for d, n in enumerate(geom.sizes) if n > 1]
    contiguous = geom.contiguous or not kept
    ctx = {
        "contiguous": contiguous,
        "name": name,
        "offset": offset,
        "linear": linear,
        "indent": indent,
        "sizes": list(geom.sizes),
        "strides": list(geom.strides),
        "inner_dims": list(reversed(kept[1:])),
        "outer_stride": geom.strides[kept[0]] if kept else 0,
    }
    return templating.load("index").render(ctx)


def gen_apply_kernel(spec: ApplySpec, geometry: Sequence[Tensor | OperandGeometry]) -> KernelSource:
    """Element-wise kernel specialized to each operand's sizes and strides.

    Contiguous operands index linearly from their offset; strided ones
    decode the linear id dimension by dimension with literal sizes.
    """
    geoms = [OperandGeometry.of(g) for g in geometry]
    if len(geoms) != spec.arity:
        raise CodegenError(f"{spec.arity} operand geometries expected, got {len(geoms)}")
    sizes = geoms[0].sizes
    for g in geoms:
        if len(g.sizes) > MAX_DIMS or len(g.sizes) < 1:
            raise CodegenError(f"unsupported dimension count {len(g.sizes)}")
        if g.sizes != sizes:
            raise CodegenError(f"operand sizes differ: {list(sizes)} vs {list(g.sizes)}")
    blocks = [
        _index_block(g, name=f"{op}_index", offset=f"{op}_offset", linear="linearId", indent="    ")
        for op, g in zip(spec.operands, geoms)
    ]
    entry = f"apply{spec.arity}"
    text = templating.load("apply").render(
        entry=entry,
        expression_text=" ".join(spec.expression.split()),
        n_elements=math.prod(sizes),
        arity=spec.arity,
        operands=list(spec.operands),
        index_blocks=blocks,
        expression=expr.to_c(spec.ast),
    )
    return _emit(KernelSource(text, entry, APPLY_BUILD_OPTIONS))


_IDENTITY = {"sum": "0.0f", "max": "-INFINITY", "min": "INFINITY"}
_CMP = {"sum": "", "max": ">", "min": "<"}


def gen_reduce_kernel(op: str, geometry: ReduceGeometry, workgroup_size: int,
                      with_index: bool = False) -> KernelSource:
    """Workgroup tree reduction with the tree steps unrolled for ``workgroup_size``.

    Reduce-all writes one partial per workgroup (finished by a further
    launch or on the host); reduce-along-dim assigns one workgroup per
    output element and writes final values directly.
    """
    if op not in REDUCE_OPS:
        raise CodegenError(f"unsupported reduction {op!r}; expected one of {REDUCE_OPS}")
    if workgroup_size not in WORKGROUP_SIZES:
        raise CodegenError(f"workgroup size {workgroup_size} not in {WORKGROUP_SIZES}")
    if with_index and (op == "sum" or geometry.dim is None):
        raise CodegenError("index output is only defined for max/min along a dimension")
    nd = len(geometry.sizes)
    if not 1 <= nd <= MAX_DIMS:
        raise CodegenError(f"unsupported dimension count {nd}")
    if geometry.dim is not None and not 0 <= geometry.dim < nd:
        raise CodegenError(f"reduction dim {geometry.dim} out of range for {nd}-d input")

    n_groups = reduce_groups(geometry, workgroup_size)
    steps = []
    step = workgroup_size // 2
    while step >= 1:
        steps.append(step)
        step //= 2
    ctx = {
        "op": op,
        "entry": f"reduce_{op}",
        "wg": workgroup_size,
        "steps": steps,
        "identity": _IDENTITY[op],
        "cmp": _CMP[op],
        "is_sum": op == "sum",
        "with_index": with_index,
        "along_dim": geometry.dim is not None,
        "n_groups": n_groups,
        "n_elements": geometry.n_elements,
    }
    if geometry.dim is not None:
        ctx.update(
            dim=geometry.dim,
            reduce_len=geometry.sizes[geometry.dim],
            reduce_stride=geometry.strides[geometry.dim],
            base_block=_index_block(geometry.outer(), name="base", offset="in_offset",
                                    linear="group", indent="    "),
        )
    else:
        ctx.update(
            global_size=n_groups * workgroup_size,
            index_block=_index_block(OperandGeometry(geometry.sizes, geometry.strides),
                                     name="idx", offset="in_offset", linear="j",
                                     indent="        "),
        )
    text = templating.load("reduce").render(ctx)
    return _emit(KernelSource(text, ctx["entry"]))


def gen_im2col_kernel(geom: ConvGeometry) -> KernelSource:
    """Lowering kernel for one image; one work item per (channel, out row, out col).

    Kernel taps are unrolled when ``kH * kW <= 25``; the bounds guard is
    emitted only for padded geometries.
    """
    if not isinstance(geom, ConvGeometry):
        raise CodegenError("im2col kernel requires a ConvGeometry")
    kh, kw = geom.kernel_h, geom.kernel_w
    taps = [(r, s) for r in range(kh) for s in range(kw)]
    ctx = {
        "entry": "im2col",
        "channels": geom.in_channels,
        "height": geom.in_h,
        "width": geom.in_w,
        "kernel_h": kh,
        "kernel_w": kw,
        "pad_h": geom.pad_h,
        "pad_w": geom.pad_w,
        "stride_h": geom.stride_h,
        "stride_w": geom.stride_w,
        "out_h": geom.out_h,
        "out_w": geom.out_w,
        "out_hw": geom.out_h * geom.out_w,
        "rows": geom.col_shape[0],
        "n_items": geom.in_channels * geom.out_h * geom.out_w,
        "image_plane": geom.in_h * geom.in_w,
        "taps_per_channel": kh * kw,
        "unroll": kh * kw <= UNROLL_LIMIT,
        "padded": geom.pad_h > 0 or geom.pad_w > 0,
        "n_taps": len(taps),
        "tap_r": [r for r, _ in taps],
        "tap_s": [s for _, s in taps],
        "tap_row": [r * kw + s for r, s in taps],
    }
    text = templating.load("im2col").render(ctx)
    return _emit(KernelSource(text, ctx["entry"]))
