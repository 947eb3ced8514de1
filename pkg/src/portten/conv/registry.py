"""Runtime-routed convolution: pick an implementation per (geometry, device).

Implementations register a ``supports`` predicate and a priority; callers
just ask for a convolution and the highest-priority supporting entry runs.
Ties keep registration order.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

from ..backends import Backend, BackendDescriptor
from ..geometry import ConvGeometry
from ..tensor import Tensor
from .direct import conv_direct
from .forward import conv_im2col_batched, conv_im2col_forward
from .winograd import conv_winograd_2x2_3x3, winograd_supports

Supports = Callable[[ConvGeometry, BackendDescriptor], bool]
Runner = Callable[..., Tensor]


class RegistryError(LookupError):
    pass


@dataclass(frozen=True)
class ConvImplEntry:
    name: str
    supports: Supports
    run: Runner
    priority: int = 0


def _descriptor(backend) -> BackendDescriptor:
    if isinstance(backend, Backend):
        return backend.descriptor
    return backend


class ConvRegistry:
    def __init__(self, entries=()):
        self._entries: list[ConvImplEntry] = []
        self._lock = threading.Lock()
        for e in entries:
            self.register(e)

    def register(self, entry: ConvImplEntry) -> None:
        with self._lock:
            if any(e.name == entry.name for e in self._entries):
                raise RegistryError(f"convolution implementation {entry.name!r} already registered")
            self._entries.append(entry)

    def unregister(self, name: str) -> ConvImplEntry:
        with self._lock:
            for i, e in enumerate(self._entries):
                if e.name == name:
                    return self._entries.pop(i)
        raise RegistryError(f"no convolution implementation named {name!r}")

    def get(self, name: str) -> ConvImplEntry:
        with self._lock:
            for e in self._entries:
                if e.name == name:
                    return e
        known = ", ".join(self.names())
        raise RegistryError(f"unknown convolution implementation {name!r} (known: {known})")

    def names(self) -> list[str]:
        with self._lock:
            return [e.name for e in self._entries]

    def entries(self) -> list[ConvImplEntry]:
        with self._lock:
            return list(self._entries)

    def select(self, geom: ConvGeometry, backend) -> ConvImplEntry:
        desc = _descriptor(backend)
        best = None
        for e in self.entries():
            if e.supports(geom, desc) and (best is None or e.priority > best.priority):
                best = e
        if best is None:
            raise RegistryError(f"no registered implementation supports {geom.describe()}")
        return best


def _always(geom, desc) -> bool:
    return True


def builtin_entries() -> list[ConvImplEntry]:
    return [
        ConvImplEntry("direct", _always, conv_direct, 0),
        ConvImplEntry("im2col", _always, conv_im2col_forward, 10),
        ConvImplEntry("im2col-batched", _always,
                      lambda x, w, b, g, backend=None: conv_im2col_batched(x, w, b, g, backend=backend),
                      20),
        ConvImplEntry("winograd", lambda g, d: winograd_supports(g), conv_winograd_2x2_3x3, 30),
    ]


default_registry = ConvRegistry(builtin_entries())


def conv_registry_register(entry: ConvImplEntry) -> None:
    default_registry.register(entry)


def conv_registry_select(geom: ConvGeometry, backend) -> ConvImplEntry:
    return default_registry.select(geom, backend)


def conv_forward(input, weight, bias, geom: ConvGeometry, backend: Backend | None = None,
                 impl: str | None = None) -> Tensor:
    """Forward convolution through the registry (or the named implementation)."""
    from .forward import _backend

    be = _backend(backend)
    entry = default_registry.get(impl) if impl else default_registry.select(geom, be)
    return entry.run(input, weight, bias, geom, backend=be)
