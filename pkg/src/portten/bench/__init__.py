"""Benchmark harness: bandwidth sweeps and per-layer model timings."""

from .harness import BandwidthRow, LayerRow, SummaryRow, bench_apply, bench_model
from .models import ModelSpec, ModelSpecError, model_spec_load, parse_spec, scale_model

__all__ = [
    "BandwidthRow", "LayerRow", "ModelSpec", "ModelSpecError", "SummaryRow", "bench_apply",
    "bench_model", "model_spec_load", "parse_spec", "scale_model",
]
