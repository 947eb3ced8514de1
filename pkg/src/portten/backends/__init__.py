"""Execution backends and device discovery.

``PORTTEN_BACKEND`` selects ``reference``, ``device`` or ``auto`` (default:
a device when one is present, otherwise the host reference backend).
``PORTTEN_DEVICE`` picks the device index.
"""

from __future__ import annotations

import logging
import os
import threading

from .base import (Backend, BackendDescriptor, BackendError, BackendUnavailable, LaunchConfig,
                   choose_launch, reduce_workgroup_size)
from .reference import REFERENCE, ReferenceBackend

log = logging.getLogger(__name__)

BACKEND_ENV = "PORTTEN_BACKEND"
DEVICE_ENV = "PORTTEN_DEVICE"
CHOICES = ("reference", "device", "auto")

__all__ = [
    "Backend", "BackendDescriptor", "BackendError", "BackendUnavailable", "LaunchConfig",
    "ReferenceBackend", "REFERENCE", "backend_enumerate", "choose_launch", "get_backend",
    "reduce_workgroup_size", "device_available",
]

_instances: dict[str, Backend] = {}
_lock = threading.Lock()


def _mode(mode: str | None) -> str:
    mode = (mode or os.environ.get(BACKEND_ENV) or "auto").lower()
    if mode not in CHOICES:
        raise ValueError(f"backend must be one of {CHOICES}, got {mode!r}")
    return mode


def _device_descriptors() -> list[BackendDescriptor]:
    try:
        from . import opencl
    except Exception as exc:  # broken driver stack degrades to host only
        log.warning("device backend unavailable: %s", exc)
        return []
    return [opencl.describe(i, d) for i, d in enumerate(opencl.list_devices())]


def device_available() -> bool:
    return bool(_device_descriptors())


def backend_enumerate(mode: str | None = None) -> list[BackendDescriptor]:
    """Reference backend first, then any devices (unless forced to reference)."""
    found = [REFERENCE]
    if _mode(mode) != "reference":
        found.extend(_device_descriptors())
    return found


def get_backend(mode: str | None = None, device_index: int | None = None) -> Backend:
    """Shared backend instance for ``mode`` (see module docstring)."""
    mode = _mode(mode)
    if mode == "reference":
        key = "reference"
    else:
        if device_index is None:
            device_index = int(os.environ.get(DEVICE_ENV, "0"))
        key = f"device:{device_index}"
    with _lock:
        if key in _instances:
            return _instances[key]
        if mode == "reference":
            backend: Backend = ReferenceBackend()
        else:
            from .opencl import OpenCLBackend

            try:
                backend = OpenCLBackend(device_index)
            except BackendUnavailable:
                if mode == "device":
                    raise
                log.info("no device found; using the reference backend")
                backend = _instances.setdefault("reference", ReferenceBackend())
        _instances[key] = backend
        return backend
