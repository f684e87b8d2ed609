import math
from dataclasses import dataclass

import numpy as np

from sgir.errors import ValidationError
from sgir.util.sampling import fibonacci_sphere


@dataclass
class Camera:
    """Pinhole camera; rays go through pixel centers, row-major from the top-left."""
    position: tuple
    look_at: tuple = (0.0, 0.0, 0.0)
    up: tuple = (0.0, 1.0, 0.0)
    fov: float = 40.0
    width: int = 64
    height: int = 64

    def __post_init__(self):
        self.position = tuple(float(v) for v in self.position)
        self.look_at = tuple(float(v) for v in self.look_at)
        self.up = tuple(float(v) for v in self.up)
        if not 10.0 < self.fov < 120.0:
            raise ValidationError(f"fov must lie in (10, 120) degrees, got {self.fov}")
        if self.width < 1 or self.height < 1:
            raise ValidationError("camera resolution must be positive")
        forward = np.subtract(self.look_at, self.position)
        if np.linalg.norm(forward) < 1e-9 or np.linalg.norm(np.cross(forward, self.up)) < 1e-9:
            raise ValidationError("camera basis is degenerate")

    def basis(self):
        forward = np.subtract(self.look_at, self.position)
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, self.up)
        right /= np.linalg.norm(right)
        true_up = np.cross(right, forward)
        return forward, right, true_up

    def rays(self):
        """Origins [H*W, 3] and unit directions [H*W, 3]."""
        forward, right, up = self.basis()
        tan_half = math.tan(math.radians(self.fov) / 2.0)
        aspect = self.width / self.height
        cols = (2.0 * (np.arange(self.width) + 0.5) / self.width - 1.0) * tan_half * aspect
        rows = (1.0 - 2.0 * (np.arange(self.height) + 0.5) / self.height) * tan_half
        d = forward + cols[None, :, None] * right + rows[:, None, None] * up
        d = d.reshape(-1, 3)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        origin = np.broadcast_to(np.asarray(self.position), d.shape).copy()
        return origin, d

    def to_json(self):
        return {"position": list(self.position), "look_at": list(self.look_at), "up": list(self.up),
                "fov": self.fov, "width": self.width, "height": self.height}

    @classmethod
    def from_json(cls, data):
        return cls(data["position"], data.get("look_at", (0.0, 0.0, 0.0)), data.get("up", (0.0, 1.0, 0.0)),
                   data.get("fov", 40.0), data.get("width", 64), data.get("height", 64))


def orbit_cameras(views, center, radius=3.5, fov=40.0, width=64, height=64, min_elevation=10.0):
    """Cameras on the upper hemisphere (elevation >= min_elevation) looking at center."""
    center = np.asarray(center, dtype=np.float64)
    points = fibonacci_sphere(max(4 * views, 8))
    # fibonacci_sphere is z-up; the scene is y-up
    points = points[:, [0, 2, 1]]
    points = points[points[:, 1] >= math.sin(math.radians(min_elevation))]
    stride = max(len(points) // views, 1)
    chosen = points[::stride][:views]
    return [Camera(tuple(center + radius * p), tuple(center), (0.0, 1.0, 0.0), fov, width, height)
            for p in chosen]
