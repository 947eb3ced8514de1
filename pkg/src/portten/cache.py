"""Compiled-kernel cache keyed by a digest of source, options and backend.

Kernels are cached in memory per process. When ``PORTTEN_KERNEL_CACHE_DIR``
is set (or a directory is passed explicitly) and the backend can serialize
its programs, compiled binaries are also persisted as ``<digest>.bin``.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .codegen import KernelSource

log = logging.getLogger(__name__)

CACHE_DIR_ENV = "PORTTEN_KERNEL_CACHE_DIR"


class KernelBuildError(RuntimeError):
    """Backend compiler rejected a kernel; carries the full diagnostic and source."""

    def __init__(self, diagnostic: str, source: KernelSource):
        super().__init__(f"{diagnostic}\n--- kernel source ({source.entry_point}) ---\n{source.text}")
        self.diagnostic = diagnostic
        self.source = source


@dataclass(frozen=True)
class KernelCacheKey:
    digest: str

    @classmethod
    def of(cls, src: KernelSource, backend_id: str) -> "KernelCacheKey":
        h = hashlib.sha256()
        for part in (src.text, src.build_options, backend_id):
            data = part.encode()
            # length-prefixed so field boundaries cannot be shifted
            h.update(len(data).to_bytes(8, "little"))
            h.update(data)
        return cls(h.hexdigest())


@dataclass
class KernelHandle:
    key: KernelCacheKey
    source: KernelSource
    kernel: Any


def _backend_id(backend) -> str:
    if isinstance(backend, str):
        return backend
    return getattr(backend, "name")


class KernelCache:
    def __init__(self, disk_dir: str | os.PathLike | None = None):
        if disk_dir is None:
            disk_dir = os.environ.get(CACHE_DIR_ENV) or None
        self.disk_dir = Path(disk_dir) if disk_dir else None
        self._entries: dict[KernelCacheKey, KernelHandle] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[KernelCacheKey, threading.Lock] = {}
        self.hits = 0
        self.misses = 0
        self.compiles = 0
        self.disk_hits = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    def stats(self) -> dict[str, float]:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "compiles": self.compiles,
            "disk_hits": self.disk_hits,
            "entries": len(self._entries),
            "hit_rate": self.hit_rate,
        }

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self._key_locks.clear()
            self.hits = self.misses = self.compiles = self.disk_hits = 0

    def get_or_build(
        self,
        src: KernelSource,
        backend,
        compile_fn: Callable[[KernelSource], Any],
        *,
        serialize: Callable[[Any], bytes] | None = None,
        deserialize: Callable[[KernelSource, bytes], Any] | None = None,
    ) -> KernelHandle:
        """Return the cached handle for ``src`` on ``backend``, compiling once.

        ``compile_fn`` failures propagate untouched; wrap them in
        :class:`KernelBuildError` in the backend to keep the vendor text.
        """
        key = KernelCacheKey.of(src, _backend_id(backend))
        with self._lock:
            handle = self._entries.get(key)
            if handle is not None:
                self.hits += 1
                return handle
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            with self._lock:
                handle = self._entries.get(key)
                if handle is not None:
                    self.hits += 1
                    return handle
                self.misses += 1
            kernel = self._load_from_disk(key, src, deserialize)
            if kernel is None:
                kernel = compile_fn(src)
                with self._lock:
                    self.compiles += 1
                self._store_on_disk(key, kernel, serialize)
            handle = KernelHandle(key, src, kernel)
            with self._lock:
                self._entries[key] = handle
            return handle

    def _load_from_disk(self, key, src, deserialize):
        if self.disk_dir is None or deserialize is None:
            return None
        path = self.disk_dir / f"{key.digest}.bin"
        if not path.exists():
            return None
        try:
            kernel = deserialize(src, path.read_bytes())
        except Exception as exc:  # stale or foreign binary: rebuild from source
            log.warning("discarding cached kernel %s: %s", path.name, exc)
            return None
        with self._lock:
            self.disk_hits += 1
        return kernel

    def _store_on_disk(self, key, kernel, serialize):
        if self.disk_dir is None or serialize is None:
            return
        try:
            data = serialize(kernel)
        except Exception as exc:
            log.warning("kernel binary not serializable: %s", exc)
            return
        self.disk_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.disk_dir / f"{key.digest}.tmp{os.getpid()}"
        tmp.write_bytes(data)
        tmp.replace(self.disk_dir / f"{key.digest}.bin")


_default_cache: KernelCache | None = None
_default_lock = threading.Lock()


def default_cache() -> KernelCache:
    global _default_cache
    with _default_lock:
        if _default_cache is None:
            _default_cache = KernelCache()
        return _default_cache


def cache_get_or_build(src: KernelSource, backend, compile_fn, **kwargs) -> KernelHandle:
    return default_cache().get_or_build(src, backend, compile_fn, **kwargs)
