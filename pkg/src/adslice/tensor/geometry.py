from dataclasses import dataclass

from ..errors import GeometryError


def output_dim(size, kernel, stride, pad):
    """``floor((size + 2*pad - kernel) / stride) + 1``."""
    return (size + 2 * pad - kernel) // stride + 1


@dataclass(frozen=True)
class ConvGeometry:
    """Window size, stride and zero-padding shared by convolution and pooling."""

    kernel_h: int
    kernel_w: int
    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0

    def __post_init__(self):
        if self.kernel_h < 1 or self.kernel_w < 1:
            raise GeometryError(f"kernel must be positive, got {self.kernel_h}x{self.kernel_w}")
        if self.stride_h < 1 or self.stride_w < 1:
            raise GeometryError(f"stride must be positive, got {self.stride_h}x{self.stride_w}")
        if self.pad_h < 0 or self.pad_w < 0:
            raise GeometryError(f"padding must be non-negative, got {self.pad_h}x{self.pad_w}")

    @classmethod
    def square(cls, kernel, stride=1, pad=0):
        return cls(kernel, kernel, stride, stride, pad, pad)

    @classmethod
    def same(cls, kernel):
        """Stride-1 geometry whose output matches the input size (odd kernels)."""
        if kernel % 2 == 0:
            raise GeometryError(f"'same' padding needs an odd kernel, got {kernel}")
        return cls(kernel, kernel, 1, 1, kernel // 2, kernel // 2)

    def output_shape(self, h, w):
        out_h = output_dim(h, self.kernel_h, self.stride_h, self.pad_h)
        out_w = output_dim(w, self.kernel_w, self.stride_w, self.pad_w)
        if out_h < 1 or out_w < 1:
            raise GeometryError(
                f"{h}x{w} input with {self.kernel_h}x{self.kernel_w} kernel, "
                f"stride {self.stride_h}x{self.stride_w}, pad {self.pad_h}x{self.pad_w} "
                f"gives empty output {out_h}x{out_w}"
            )
        return out_h, out_w

    def as_dict(self):
        return {
            "kernel": [self.kernel_h, self.kernel_w],
            "stride": [self.stride_h, self.stride_w],
            "pad": [self.pad_h, self.pad_w],
        }

    @classmethod
    def from_dict(cls, d):
        (kh, kw), (sh, sw), (ph, pw) = d["kernel"], d["stride"], d["pad"]
        return cls(kh, kw, sh, sw, ph, pw)
