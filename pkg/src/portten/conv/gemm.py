"""Single-precision GEMM: ``C <- alpha * op(A) @ op(B) + beta * C``.

Matrices are row-major. Each operand is either a 2-D array/tensor holding
exactly the stored matrix, or a flat buffer interpreted through the
leading dimension in the :class:`GemmSpec`.

Two implementations share the contract: :func:`gemm_naive`, a plain triple
loop used as the oracle, and :func:`gemm_tiled`, the default. The tiled
version accumulates every output element over ``k`` in ascending order,
so its result does not depend on tile boundaries or matrix width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..tensor import Tensor, as_array
from .common import ShapeError

TILE = 64


@dataclass(frozen=True)
class GemmSpec:
    m: int
    n: int
    k: int
    trans_a: bool = False
    trans_b: bool = False
    alpha: float = 1.0
    beta: float = 0.0
    lda: int | None = None
    ldb: int | None = None
    ldc: int | None = None

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise ShapeError(f"GEMM dims must be positive, got m={self.m} n={self.n} k={self.k}")
        for name, (_, cols) in (("lda", self.a_stored), ("ldb", self.b_stored), ("ldc", (self.m, self.n))):
            ld = getattr(self, name)
            if ld is None:
                object.__setattr__(self, name, cols)
            elif ld < cols:
                raise ShapeError(f"{name}={ld} smaller than row length {cols}")

    @property
    def a_stored(self) -> tuple[int, int]:
        return (self.k, self.m) if self.trans_a else (self.m, self.k)

    @property
    def b_stored(self) -> tuple[int, int]:
        return (self.n, self.k) if self.trans_b else (self.k, self.n)


def _matrix(buf, rows: int, cols: int, ld: int, what: str) -> np.ndarray:
    a = buf.numpy() if isinstance(buf, Tensor) else buf
    if not isinstance(a, np.ndarray) or a.dtype != np.float32:
        a = np.asarray(a, dtype=np.float32)
    if a.ndim == 2:
        if a.shape != (rows, cols):
            raise ShapeError(f"{what} has shape {a.shape}, expected {(rows, cols)}")
        return a
    if a.ndim != 1:
        raise ShapeError(f"{what} must be a 2-D matrix or a flat buffer")
    if a.shape[0] < (rows - 1) * ld + cols:
        raise ShapeError(f"{what} buffer of {a.shape[0]} elements too small for "
                         f"{rows}x{cols} with leading dimension {ld}")
    return as_strided(a, shape=(rows, cols), strides=(ld * a.itemsize, a.itemsize))


def _operands(spec: GemmSpec, a, b, c):
    am = _matrix(a, *spec.a_stored, spec.lda, "A")
    bm = _matrix(b, *spec.b_stored, spec.ldb, "B")
    cm = _matrix(c, spec.m, spec.n, spec.ldc, "C")
    if not cm.flags.writeable:
        raise ShapeError("C must be writable")
    return (am.T if spec.trans_a else am), (bm.T if spec.trans_b else bm), cm


def _finish(spec: GemmSpec, acc: np.ndarray, c_block: np.ndarray) -> None:
    alpha = np.float32(spec.alpha)
    beta = np.float32(spec.beta)
    if alpha != 1:
        acc = acc * alpha
    if beta == 0:
        # BLAS convention: C is not read when beta == 0
        c_block[...] = acc
    else:
        c_block[...] = acc + beta * c_block


def gemm_naive(spec: GemmSpec, a, b, c) -> None:
    """Reference triple loop, accumulating in double precision."""
    op_a, op_b, out = _operands(spec, a, b, c)
    rows = op_a.astype(np.float64).tolist()
    cols = op_b.T.astype(np.float64).tolist()
    acc = np.empty((spec.m, spec.n), dtype=np.float64)
    for i in range(spec.m):
        row = rows[i]
        for j in range(spec.n):
            col = cols[j]
            total = 0.0
            for p in range(spec.k):
                total += row[p] * col[p]
            acc[i, j] = total
    result = spec.alpha * acc
    if spec.beta != 0:
        result += spec.beta * out.astype(np.float64)
    out[...] = result.astype(np.float32)


def gemm_tiled(spec: GemmSpec, a, b, c, tile: int = TILE) -> None:
    """Output-blocked GEMM built from rank-1 updates within each tile."""
    op_a, op_b, out = _operands(spec, a, b, c)
    op_a = np.ascontiguousarray(op_a)
    op_b = np.ascontiguousarray(op_b)
    for i0 in range(0, spec.m, tile):
        i1 = min(i0 + tile, spec.m)
        a_blk = op_a[i0:i1]
        for j0 in range(0, spec.n, tile):
            j1 = min(j0 + tile, spec.n)
            b_blk = op_b[:, j0:j1]
            acc = np.zeros((i1 - i0, j1 - j0), dtype=np.float32)
            tmp = np.empty_like(acc)
            for p in range(spec.k):
                np.multiply(a_blk[:, p, None], b_blk[None, p, :], out=tmp)
                acc += tmp
            _finish(spec, acc, out[i0:i1, j0:j1])


IMPLEMENTATIONS = {"naive": gemm_naive, "tiled": gemm_tiled}


def gemm(spec: GemmSpec, a, b, c, impl: str = "tiled") -> None:
    try:
        fn = IMPLEMENTATIONS[impl]
    except KeyError:
        raise ValueError(f"unknown GEMM implementation {impl!r}") from None
    fn(spec, a, b, c)


def matmul(a, b, *, trans_a: bool = False, trans_b: bool = False, impl: str = "tiled") -> np.ndarray:
    """Allocating convenience wrapper: returns ``op(a) @ op(b)`` as float32."""
    a = as_array(a)
    b = as_array(b)
    m, k = (a.shape[1], a.shape[0]) if trans_a else a.shape
    kb, n = (b.shape[1], b.shape[0]) if trans_b else b.shape
    if k != kb:
        raise ShapeError(f"inner dimensions differ: {k} vs {kb}")
    out = np.empty((m, n), dtype=np.float32)
    gemm(GemmSpec(m, n, k, trans_a, trans_b), a, b, out, impl)
    return out
