"""
Environment light: the 128-lobe SG mixture, its trainable parameters, and
equirectangular maps.
"""

import math

import numpy as np
import torch
import torch.nn.functional as F

from sgir.errors import ValidationError
from sgir.fields.models import DIRECT_LOBES, softplus_inverse
from sgir.sg.lobes import SGMixture, SphericalGaussian, as_tensor, direction_tensor
from sgir.util.sampling import DTYPE, fibonacci_sphere_tensor


class EnvLight(SGMixture):
    """An SG mixture with exactly ``lobe_count`` lobes (128 for direct light)."""

    def __init__(self, lobes, lobe_count=DIRECT_LOBES):
        super().__init__(lobes)
        if self.count != lobe_count:
            raise ValidationError(f"environment light needs {lobe_count} lobes, got {self.count}")

    @classmethod
    def padded(cls, mixture, lobe_count=DIRECT_LOBES):
        """``mixture`` followed by zero-amplitude lobes up to ``lobe_count``."""
        extra = lobe_count - mixture.count
        if extra < 0:
            raise ValidationError(f"mixture has {mixture.count} lobes, more than {lobe_count}")
        if extra == 0:
            return cls(mixture.lobes, lobe_count)
        axes = fibonacci_sphere_tensor(extra)
        pad = SphericalGaussian(axes, torch.ones(extra, dtype=DTYPE), torch.zeros(extra, 3, dtype=DTYPE), check=False)
        g = mixture.lobes
        return cls(SphericalGaussian(
            torch.cat([g.lobe_axis.expand(mixture.count, 3), pad.lobe_axis]),
            torch.cat([g.sharpness.expand(mixture.count, 1), pad.sharpness]),
            torch.cat([g.amplitude.expand(mixture.count, 3), pad.amplitude]),
            check=False,
        ), lobe_count)


class EnvLightParams:
    """Raw trainable environment parameters in a ParamStore.

    Axes are raw 3-vectors normalized on read; sharpness and amplitude go
    through softplus.
    """

    def __init__(self, store, name="env", lobes=DIRECT_LOBES, init_sharpness=10.0, init_amplitude=0.1,
                 lr_scale=1.0):
        self.store = store
        self.name = name
        self.lobes = lobes
        raw = torch.cat([
            fibonacci_sphere_tensor(lobes),
            torch.full((lobes, 1), softplus_inverse(init_sharpness), dtype=DTYPE),
            torch.full((lobes, 3), softplus_inverse(init_amplitude), dtype=DTYPE),
        ], dim=-1)
        store.register(name, raw, lr_scale)

    def mixture(self):
        raw = self.store.view(self.name)
        axis = raw[:, 0:3] / raw[:, 0:3].norm(dim=-1, keepdim=True).clamp_min(1e-12)
        sharpness = F.softplus(raw[:, 3:4]).clamp_min(1e-6)
        amplitude = F.softplus(raw[:, 4:7])
        return EnvLight(SphericalGaussian(axis, sharpness, amplitude, check=False), self.lobes)

    def load_mixture(self, mixture):
        """Set the raw values so that mixture() reproduces ``mixture``."""
        g = mixture.lobes
        sharp = g.sharpness.expand(mixture.count, 1)
        amp = g.amplitude.expand(mixture.count, 3).clamp_min(1e-9)
        raw = torch.cat([
            g.lobe_axis.expand(mixture.count, 3),
            sharp + torch.log(-torch.expm1(-sharp)),
            amp + torch.log(-torch.expm1(-amp)),
        ], dim=-1)
        self.store.set_value(self.name, raw.detach())


class EquirectMap:
    """Latitude-longitude radiance map, y up.

    Row r covers polar angles (from +y) in [pi r / H, pi (r + 1) / H]; column c
    covers azimuths atan2(z, x) in [-pi + 2 pi c / W, -pi + 2 pi (c + 1) / W].
    """

    def __init__(self, image):
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3 or image.shape[-1] != 3:
            raise ValidationError(f"equirect image must be [H, W, 3], got {image.shape}")
        self.image = image

    @property
    def height(self):
        return self.image.shape[0]

    @property
    def width(self):
        return self.image.shape[1]

    @staticmethod
    def direction(theta, phi):
        s = np.sin(theta)
        return np.stack([s * np.cos(phi), np.cos(theta), s * np.sin(phi)], axis=-1)

    def pixel_directions(self):
        theta = (np.arange(self.height) + 0.5) * math.pi / self.height
        phi = -math.pi + (np.arange(self.width) + 0.5) * 2.0 * math.pi / self.width
        return self.direction(theta[:, None], phi[None, :])

    def row_solid_angles(self):
        edges = np.arange(self.height + 1) * math.pi / self.height
        return (2.0 * math.pi / self.width) * (np.cos(edges[:-1]) - np.cos(edges[1:]))

    def evaluate(self, omega):
        """Bilinear radiance lookup; columns wrap, rows clamp."""
        w = np.asarray(omega, dtype=np.float64)
        theta = np.arccos(np.clip(w[..., 1], -1.0, 1.0))
        phi = np.arctan2(w[..., 2], w[..., 0])
        v = theta / math.pi * self.height - 0.5
        u = (phi + math.pi) / (2.0 * math.pi) * self.width - 0.5
        r0 = np.floor(v)
        c0 = np.floor(u)
        fr = (v - r0)[..., None]
        fc = (u - c0)[..., None]
        r0 = r0.astype(np.int64)
        c0 = c0.astype(np.int64)
        r1 = np.clip(r0 + 1, 0, self.height - 1)
        r0 = np.clip(r0, 0, self.height - 1)
        c1 = (c0 + 1) % self.width
        c0 = c0 % self.width
        img = self.image
        top = img[r0, c0] * (1.0 - fc) + img[r0, c1] * fc
        bottom = img[r1, c0] * (1.0 - fc) + img[r1, c1] * fc
        return top * (1.0 - fr) + bottom * fr

    def mean_radiance(self):
        weights = self.row_solid_angles()[:, None, None]
        return (self.image * weights).sum(axis=(0, 1)) / (4.0 * math.pi)


def env_to_equirect(mixture, width=64, height=32, exposure=1.0):
    """Rasterize an SG mixture (times ``exposure``) to an equirect map."""
    grid = EquirectMap(np.zeros((height, width, 3)))
    dirs = torch.from_numpy(grid.pixel_directions().reshape(-1, 3)).to(DTYPE)
    with torch.no_grad():
        values = mixture.detach().evaluate(dirs) * exposure
    return EquirectMap(values.numpy().reshape(height, width, 3))


def environment_radiance(env, omega):
    """Radiance of an SG mixture or an EquirectMap at directions omega (torch, [..., 3])."""
    omega = direction_tensor(omega)
    if isinstance(env, EquirectMap):
        return torch.from_numpy(env.evaluate(omega.detach().numpy())).to(DTYPE)
    return env.evaluate(as_tensor(omega))
