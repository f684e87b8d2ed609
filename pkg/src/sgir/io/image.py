from dataclasses import dataclass

import numpy as np

from sgir.errors import DimensionMismatch, ValidationError


@dataclass
class ImageBuffer:
    """Row-major [height, width, 3] linear-light image (row 0 at the top)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = np.repeat(data[..., None], 3, axis=-1)
        if data.ndim != 3 or data.shape[-1] != 3:
            raise ValidationError(f"image must be [H, W, 3], got shape {data.shape}")
        if not np.isfinite(data).all():
            raise ValidationError("image contains non-finite values")
        self.data = data

    @classmethod
    def from_flat(cls, values, width, height):
        return cls(np.asarray(values, dtype=np.float64).reshape(height, width, 3))

    @classmethod
    def zeros(cls, width, height):
        return cls(np.zeros((height, width, 3)))

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def channels(self):
        return 3

    @property
    def is_ldr(self):
        return bool(((self.data >= 0.0) & (self.data <= 1.0)).all())

    def flat(self):
        return self.data.reshape(-1, 3)

    def luminance(self):
        return self.data @ np.array([0.2126, 0.7152, 0.0722])

    def check_same_shape(self, other):
        if self.data.shape != other.data.shape:
            raise DimensionMismatch(f"image shapes differ: {self.data.shape} vs {other.data.shape}")
