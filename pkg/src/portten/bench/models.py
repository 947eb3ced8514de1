"""Layer-list model descriptions for the per-layer benchmark.

File format, one layer per line (``#`` starts a comment)::

    conv C H W K kH kW padH padW strideH strideW
    poolmax kH kW strideH strideW
    relu

Convolution lines restate their input shape so that a file can be checked
for shape chaining. Max pooling uses ceil-mode output sizes, so windows
may hang over the bottom/right edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from ..geometry import ConvGeometry, GeometryError

BUNDLED = ("alexnet", "vgg-a")


class ModelSpecError(ValueError):
    def __init__(self, message: str, index: int | None = None):
        prefix = f"layer {index}: " if index is not None else ""
        super().__init__(prefix + message)
        self.index = index


@dataclass(frozen=True)
class ConvLayer:
    in_channels: int
    in_h: int
    in_w: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    pad_h: int
    pad_w: int
    stride_h: int
    stride_w: int
    type: str = "conv"

    def geometry(self, batch: int) -> ConvGeometry:
        return ConvGeometry(batch, self.in_channels, self.in_h, self.in_w, self.out_channels,
                            self.kernel_h, self.kernel_w, self.pad_h, self.pad_w,
                            self.stride_h, self.stride_w)

    @property
    def is_global(self) -> bool:
        """Covers its entire input: a fully connected layer in conv form."""
        return (self.kernel_h, self.kernel_w) == (self.in_h, self.in_w) and not (self.pad_h or self.pad_w)

    def output_shape(self, shape):
        g = self.geometry(1)
        return (g.out_channels, g.out_h, g.out_w)


@dataclass(frozen=True)
class PoolLayer:
    kernel_h: int
    kernel_w: int
    stride_h: int
    stride_w: int
    type: str = "pool-max"

    def output_shape(self, shape):
        c, h, w = shape
        return (c, pool_out(h, self.kernel_h, self.stride_h), pool_out(w, self.kernel_w, self.stride_w))


@dataclass(frozen=True)
class ReluLayer:
    type: str = "relu"

    def output_shape(self, shape):
        return shape


Layer = ConvLayer | PoolLayer | ReluLayer


def pool_out(size: int, kernel: int, stride: int) -> int:
    out = math.ceil(max(size - kernel, 0) / stride) + 1
    if (out - 1) * stride >= size:
        out -= 1
    return out


@dataclass(frozen=True)
class ModelSpec:
    name: str
    layers: tuple
    scale: int = 1

    @property
    def input_shape(self) -> tuple[int, int, int]:
        first = self.layers[0]
        return (first.in_channels, first.in_h, first.in_w)

    def shapes(self) -> list[tuple[int, int, int]]:
        """Output shape (C, H, W) of every layer."""
        shape = self.input_shape
        out = []
        for layer in self.layers:
            shape = layer.output_shape(shape)
            out.append(shape)
        return out

    def weight_layers(self) -> int:
        return sum(1 for layer in self.layers if layer.type == "conv")


def validate(spec: ModelSpec) -> ModelSpec:
    """Check that each layer's input matches the previous layer's output."""
    if not spec.layers:
        raise ModelSpecError("model has no layers")
    if not isinstance(spec.layers[0], ConvLayer):
        raise ModelSpecError("first layer must be a convolution (it defines the input shape)", 0)
    shape = spec.input_shape
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, ConvLayer):
            if (layer.in_channels, layer.in_h, layer.in_w) != shape:
                raise ModelSpecError(
                    f"conv expects input {layer.in_channels}x{layer.in_h}x{layer.in_w} "
                    f"but previous layer produces {shape[0]}x{shape[1]}x{shape[2]}", i)
            try:
                layer.geometry(1)
            except GeometryError as exc:
                raise ModelSpecError(str(exc), i) from None
        shape = layer.output_shape(shape)
        if min(shape) < 1:
            raise ModelSpecError(f"layer produces empty output {shape}", i)
    return spec


def _ints(parts, n, index, line):
    if len(parts) != n:
        raise ModelSpecError(f"expected {n} integers in {line!r}", index)
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ModelSpecError(f"non-integer field in {line!r}", index) from None


def parse_spec(text: str, name: str = "model") -> ModelSpec:
    layers = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *rest = line.split()
        i = len(layers)
        if word == "conv":
            layers.append(ConvLayer(*_ints(rest, 10, i, line)))
        elif word == "poolmax":
            layers.append(PoolLayer(*_ints(rest, 4, i, line)))
        elif word == "relu":
            if rest:
                raise ModelSpecError(f"relu takes no arguments: {line!r}", i)
            layers.append(ReluLayer())
        else:
            raise ModelSpecError(f"unknown layer type {word!r}", i)
    return validate(ModelSpec(name, tuple(layers)))


def model_spec_load(name_or_path: str | Path) -> ModelSpec:
    """Load a bundled model by name or a spec file by path."""
    name = str(name_or_path)
    if name in BUNDLED:
        text = resources.files("portten").joinpath("models", f"{name}.spec").read_text()
        return parse_spec(text, name)
    path = Path(name_or_path)
    if not path.is_file():
        raise ModelSpecError(f"unknown model {name!r}; bundled models are {', '.join(BUNDLED)} "
                             f"or pass a spec file path")
    return parse_spec(path.read_text(), path.stem)


def scale_model(spec: ModelSpec, scale: int) -> ModelSpec:
    """Shrink a model for desk-scale runs.

    Input height/width and every hidden channel count are divided by
    ``scale``; the image channels and the final layer's outputs are kept.
    Layer input shapes are then re-derived by chaining, and fully
    connected (global) convolutions widen or shrink their kernel to cover
    the new input.
    """
    if scale < 1:
        raise ModelSpecError(f"scale must be >= 1, got {scale}")
    if scale == 1:
        return spec
    c0, h0, w0 = spec.input_shape
    if h0 % scale or w0 % scale:
        raise ModelSpecError(f"scale {scale} does not divide input size {h0}x{w0}")
    convs = [i for i, layer in enumerate(spec.layers) if isinstance(layer, ConvLayer)]
    for i in convs[:-1]:
        k = spec.layers[i].out_channels
        if k % scale:
            raise ModelSpecError(f"scale {scale} does not divide {k} output channels", i)
    shape = (c0, h0 // scale, w0 // scale)
    layers = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, ConvLayer):
            k = layer.out_channels if i == convs[-1] else layer.out_channels // scale
            kh, kw = (shape[1], shape[2]) if layer.is_global else (layer.kernel_h, layer.kernel_w)
            layer = replace(layer, in_channels=shape[0], in_h=shape[1], in_w=shape[2],
                            out_channels=k, kernel_h=kh, kernel_w=kw)
            if kh > shape[1] + 2 * layer.pad_h or kw > shape[2] + 2 * layer.pad_w:
                raise ModelSpecError(
                    f"scale {scale} shrinks the input to {shape[1]}x{shape[2]}, "
                    f"too small for a {kh}x{kw} kernel", i)
        layers.append(layer)
        shape = layer.output_shape(shape)
    return validate(ModelSpec(spec.name, tuple(layers), scale))
