"""Convolution problem descriptor shared by codegen, backends and conv."""

from __future__ import annotations

from dataclasses import dataclass


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ConvGeometry:
    """NCHW input, KCkHkW weights, zero padding, cross-correlation."""

    batch: int
    in_channels: int
    in_h: int
    in_w: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    pad_h: int = 0
    pad_w: int = 0
    stride_h: int = 1
    stride_w: int = 1

    def __post_init__(self):
        for name in ("batch", "in_channels", "in_h", "in_w", "out_channels",
                     "kernel_h", "kernel_w", "stride_h", "stride_w"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.pad_h < 0 or self.pad_w < 0:
            raise GeometryError("padding must be non-negative")
        if self.kernel_h > self.in_h + 2 * self.pad_h or self.kernel_w > self.in_w + 2 * self.pad_w:
            raise GeometryError(
                f"{self.kernel_h}x{self.kernel_w} kernel larger than padded "
                f"{self.in_h + 2 * self.pad_h}x{self.in_w + 2 * self.pad_w} input"
            )

    @property
    def out_h(self) -> int:
        return (self.in_h + 2 * self.pad_h - self.kernel_h) // self.stride_h + 1

    @property
    def out_w(self) -> int:
        return (self.in_w + 2 * self.pad_w - self.kernel_w) // self.stride_w + 1

    @property
    def input_shape(self) -> tuple[int, int, int, int]:
        return (self.batch, self.in_channels, self.in_h, self.in_w)

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)

    @property
    def output_shape(self) -> tuple[int, int, int, int]:
        return (self.batch, self.out_channels, self.out_h, self.out_w)

    @property
    def col_shape(self) -> tuple[int, int]:
        """Lowered matrix shape for one image."""
        return (self.in_channels * self.kernel_h * self.kernel_w, self.out_h * self.out_w)

    def describe(self) -> str:
        return (
            f"{self.batch}x{self.in_channels}x{self.in_h}x{self.in_w}"
            f"->{self.out_channels} k{self.kernel_h}x{self.kernel_w}"
            f" p{self.pad_h},{self.pad_w} s{self.stride_h},{self.stride_w}"
        )
