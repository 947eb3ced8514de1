"""Strided float32 tensors over flat storage.

A tensor never owns memory. It is a ``(storage, storage_offset, sizes,
strides)`` quadruple, so views produced by :func:`narrow` share the
underlying buffer and only differ in their offset and extents. Device
buffers cannot carry an offset themselves, which is why every kernel
receives the offset as an explicit argument.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

MAX_DIMS = 8
DTYPE = np.float32
_ITEMSIZE = np.dtype(DTYPE).itemsize


class TensorError(ValueError):
    """Invalid tensor geometry or incompatible operands."""


class Storage:
    """Flat, zero-initialized buffer of float32 elements."""

    __slots__ = ("data",)

    def __init__(self, length: int):
        if length < 0:
            raise TensorError(f"storage length must be non-negative, got {length}")
        self.data = np.zeros(int(length), dtype=DTYPE)

    @classmethod
    def wrap(cls, array: np.ndarray) -> "Storage":
        st = cls.__new__(cls)
        st.data = np.ascontiguousarray(array, dtype=DTYPE).reshape(-1)
        return st

    @property
    def length(self) -> int:
        return self.data.shape[0]

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        return f"Storage(length={len(self)})"


def contiguous_strides(sizes: Sequence[int]) -> tuple[int, ...]:
    strides = []
    acc = 1
    for size in reversed(sizes):
        strides.append(acc)
        acc *= size
    return tuple(reversed(strides))


def _check_sizes(sizes: Sequence[int]) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in sizes)
    if not sizes:
        raise TensorError("size list must not be empty")
    if len(sizes) > MAX_DIMS:
        raise TensorError(f"at most {MAX_DIMS} dimensions supported, got {len(sizes)}")
    for s in sizes:
        if s < 1:
            raise TensorError(f"all sizes must be >= 1, got {list(sizes)}")
    return sizes


class Tensor:
    """View of a :class:`Storage` with an element offset and row-major strides."""

    __slots__ = ("storage", "storage_offset", "sizes", "strides")

    def __init__(
        self,
        storage: Storage,
        storage_offset: int,
        sizes: Sequence[int],
        strides: Sequence[int],
    ):
        sizes = _check_sizes(sizes)
        strides = tuple(int(s) for s in strides)
        if len(strides) != len(sizes):
            raise TensorError("sizes and strides must have the same length")
        if any(s < 0 for s in strides):
            raise TensorError("negative strides are not supported")
        if storage_offset < 0:
            raise TensorError("storage offset must be non-negative")
        reach = sum((n - 1) * s for n, s in zip(sizes, strides))
        if storage_offset + reach >= len(storage):
            raise TensorError(
                f"view reaches element {storage_offset + reach} "
                f"but storage has {len(storage)} elements"
            )
        self.storage = storage
        self.storage_offset = int(storage_offset)
        self.sizes = sizes
        self.strides = strides

    @property
    def ndim(self) -> int:
        return len(self.sizes)

    def numel(self) -> int:
        return math.prod(self.sizes)

    def max_reach(self) -> int:
        """Largest storage index touched, relative to the offset."""
        return sum((n - 1) * s for n, s in zip(self.sizes, self.strides))

    def is_contiguous(self) -> bool:
        return is_contiguous(self)

    def numpy(self) -> np.ndarray:
        """Writable ndarray aliasing this view's elements."""
        base = self.storage.data[self.storage_offset:]
        return as_strided(
            base,
            shape=self.sizes,
            strides=tuple(s * _ITEMSIZE for s in self.strides),
            writeable=True,
        )

    def narrow(self, dim: int, start: int, length: int) -> "Tensor":
        return narrow(self, dim, start, length)

    def copy_(self, src: "Tensor") -> "Tensor":
        copy(self, src)
        return self

    def __getitem__(self, index: tuple[int, ...]) -> float:
        return float(self.storage.data[self._flat_index(index)])

    def __setitem__(self, index: tuple[int, ...], value: float) -> None:
        self.storage.data[self._flat_index(index)] = value

    def _flat_index(self, index) -> int:
        if not isinstance(index, tuple):
            index = (index,)
        if len(index) != self.ndim:
            raise IndexError(f"expected {self.ndim} indices, got {len(index)}")
        flat = self.storage_offset
        for i, n, s in zip(index, self.sizes, self.strides):
            if not 0 <= i < n:
                raise IndexError(f"index {index} out of range for sizes {self.sizes}")
            flat += i * s
        return flat

    @classmethod
    def from_numpy(cls, array) -> "Tensor":
        """Copy an array-like into a fresh contiguous tensor."""
        arr = np.array(array, dtype=DTYPE, copy=True)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        t = create(arr.shape)
        t.storage.data[:] = arr.reshape(-1)
        return t

    def __repr__(self) -> str:
        return (
            f"Tensor(sizes={list(self.sizes)}, strides={list(self.strides)}, "
            f"offset={self.storage_offset})"
        )


def create(sizes: Sequence[int]) -> Tensor:
    """Fresh zero-filled contiguous tensor."""
    sizes = _check_sizes(sizes)
    return Tensor(Storage(math.prod(sizes)), 0, sizes, contiguous_strides(sizes))


def narrow(t: Tensor, dim: int, start: int, length: int) -> Tensor:
    """View of ``t`` restricted to ``[start, start + length)`` along ``dim``.

    No data is copied; the returned tensor shares ``t.storage`` and its
    offset grows by ``start * t.strides[dim]``.
    """
    if not 0 <= dim < t.ndim:
        raise TensorError(f"dim {dim} out of range for {t.ndim}-d tensor")
    if start < 0 or length < 1 or start + length > t.sizes[dim]:
        raise TensorError(
            f"narrow(start={start}, length={length}) out of range for size {t.sizes[dim]}"
        )
    sizes = list(t.sizes)
    sizes[dim] = length
    return Tensor(t.storage, t.storage_offset + start * t.strides[dim], sizes, t.strides)


def is_contiguous(t: Tensor) -> bool:
    # size-1 dims place no constraint on their stride
    expected = contiguous_strides(t.sizes)
    return all(n == 1 or s == e for n, s, e in zip(t.sizes, t.strides, expected))


def flat_indices(t: Tensor) -> np.ndarray:
    """Storage indices of every element of ``t`` in logical row-major order."""
    idx = np.full(1, t.storage_offset, dtype=np.int64)
    for n, s in zip(t.sizes, t.strides):
        idx = (idx[:, None] + np.arange(n, dtype=np.int64)[None, :] * s).reshape(-1)
    return idx


def overlaps(a: Tensor, b: Tensor) -> bool:
    if a.storage is not b.storage:
        return False
    lo_a, hi_a = a.storage_offset, a.storage_offset + a.max_reach()
    lo_b, hi_b = b.storage_offset, b.storage_offset + b.max_reach()
    if hi_a < lo_b or hi_b < lo_a:
        return False
    return bool(np.intersect1d(flat_indices(a), flat_indices(b)).size)


def copy(dst: Tensor, src: Tensor) -> None:
    """Element-wise copy in logical order; both sides may be strided views."""
    if dst.sizes != src.sizes:
        raise TensorError(f"size mismatch: {list(dst.sizes)} vs {list(src.sizes)}")
    if overlaps(dst, src):
        raise TensorError("copy between overlapping views of one storage is not allowed")
    dst.numpy()[...] = src.numpy()


def contiguous(t: Tensor) -> Tensor:
    """``t`` itself if already contiguous, otherwise a packed copy."""
    if is_contiguous(t):
        return t
    out = create(t.sizes)
    copy(out, t)
    return out


def as_array(x) -> np.ndarray:
    """ndarray view of a tensor, or a float32 array of any array-like."""
    if isinstance(x, Tensor):
        return x.numpy()
    return np.asarray(x, dtype=DTYPE)
