"""
Environment importance samplers for the Monte Carlo oracle (numpy).

Each sampler draws directions from uniforms and reports the pdf of any
direction, so the renderer can combine light and BSDF samples with the
balance heuristic.
"""

import math

import numpy as np

from sgir.sg.lobes import SGMixture
from sgir.shading.light import EquirectMap
from sgir.util.sampling import orthonormal_basis_np

UNIFORM_SPHERE_PDF = 1.0 / (4.0 * math.pi)
EQUIRECT_UNIFORM_FRACTION = 0.1
LUMINANCE = np.array([0.2126, 0.7152, 0.0722])


def sample_sg_direction(axis, sharpness, u1, u2):
    """Directions distributed proportionally to exp(lambda (w . axis - 1)) over the whole sphere."""
    lam = np.asarray(sharpness, dtype=np.float64)
    cos_t = 1.0 + np.log1p(u1 * np.expm1(-2.0 * lam)) / lam
    cos_t = np.clip(cos_t, -1.0, 1.0)
    sin_t = np.sqrt(np.clip(1.0 - cos_t * cos_t, 0.0, None))
    phi = 2.0 * math.pi * u2
    t, b = orthonormal_basis_np(axis)
    return (sin_t * np.cos(phi))[..., None] * t + (sin_t * np.sin(phi))[..., None] * b + cos_t[..., None] * axis


def sg_direction_pdf(axis, sharpness, omega):
    lam = np.asarray(sharpness, dtype=np.float64)
    cos = (omega * axis).sum(-1)
    return lam * np.exp(lam * (cos - 1.0)) / (2.0 * math.pi * -np.expm1(-2.0 * lam))


def uniform_sphere_np(u1, u2):
    z = 1.0 - 2.0 * u1
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = 2.0 * math.pi * u2
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


class EnvironmentSampler:
    def radiance(self, omega):
        raise NotImplementedError("Subclasses must implement radiance")

    def sample(self, u0, u1, u2):
        raise NotImplementedError("Subclasses must implement sample")

    def pdf(self, omega):
        raise NotImplementedError("Subclasses must implement pdf")


class SGEnvironmentSampler(EnvironmentSampler):
    """Picks a lobe proportionally to its integrated luminance, then samples that lobe."""

    def __init__(self, mixture: SGMixture):
        lobes = mixture.detach().lobes
        count = mixture.count
        self.axis = lobes.lobe_axis.expand(count, 3).numpy()
        self.sharpness = lobes.sharpness.expand(count, 1).numpy()[:, 0]
        self.amplitude = lobes.amplitude.expand(count, 3).numpy()
        lam = self.sharpness
        power = (self.amplitude @ LUMINANCE) * 2.0 * math.pi * -np.expm1(-2.0 * lam) / lam
        total = power.sum()
        self.black = not total > 0
        self.weights = power / total if not self.black else np.full(count, 1.0 / count)
        self.cdf = np.cumsum(self.weights)

    def radiance(self, omega):
        cos = omega @ self.axis.T
        return np.exp(self.sharpness * (cos - 1.0)) @ self.amplitude

    def sample(self, u0, u1, u2):
        if self.black:
            return uniform_sphere_np(u1, u2)
        lobe = np.minimum(np.searchsorted(self.cdf, u0, side="right"), len(self.cdf) - 1)
        return sample_sg_direction(self.axis[lobe], self.sharpness[lobe], u1, u2)

    def pdf(self, omega):
        if self.black:
            return np.full(omega.shape[:-1], UNIFORM_SPHERE_PDF)
        cos = omega @ self.axis.T
        lam = self.sharpness
        per_lobe = lam * np.exp(lam * (cos - 1.0)) / (2.0 * math.pi * -np.expm1(-2.0 * lam))
        return per_lobe @ self.weights


class EquirectSampler(EnvironmentSampler):
    """Pixel CDF weighted by luminance and solid angle, mixed with a uniform sphere."""

    def __init__(self, env: EquirectMap):
        self.env = env
        lum = np.clip(env.image @ LUMINANCE, 0.0, None)
        power = lum * env.row_solid_angles()[:, None]
        total = power.sum()
        self.black = not total > 0
        flat = power.reshape(-1) / total if not self.black else np.full(power.size, 1.0 / power.size)
        self.pixel_pdf = flat
        self.cdf = np.cumsum(flat)
        self.uniform = 1.0 if self.black else EQUIRECT_UNIFORM_FRACTION

    def radiance(self, omega):
        return self.env.evaluate(omega)

    def _pixel_of(self, omega):
        h, w = self.env.height, self.env.width
        theta = np.arccos(np.clip(omega[..., 1], -1.0, 1.0))
        phi = np.arctan2(omega[..., 2], omega[..., 0])
        row = np.clip((theta / math.pi * h).astype(np.int64), 0, h - 1)
        col = np.clip(((phi + math.pi) / (2.0 * math.pi) * w).astype(np.int64), 0, w - 1)
        return row, col

    def sample(self, u0, u1, u2):
        h, w = self.env.height, self.env.width
        pixel = np.minimum(np.searchsorted(self.cdf, u1, side="right"), self.cdf.size - 1)
        row, col = np.divmod(pixel, w)
        p = self.pixel_pdf[pixel]
        within = np.clip((u1 - (self.cdf[pixel] - p)) / np.maximum(p, 1e-300), 0.0, 1.0)
        z0 = np.cos(row * math.pi / h)
        z1 = np.cos((row + 1) * math.pi / h)
        cos_t = z0 + (z1 - z0) * u2
        phi = -math.pi + (col + within) * 2.0 * math.pi / w
        theta = np.arccos(np.clip(cos_t, -1.0, 1.0))
        from_map = EquirectMap.direction(theta, phi)
        uniform = uniform_sphere_np(u1, u2)
        pick_uniform = (u0 < self.uniform)[..., None]
        return np.where(pick_uniform, uniform, from_map)

    def pdf(self, omega):
        row, col = self._pixel_of(omega)
        omega_row = self.env.row_solid_angles()[row]
        mapped = self.pixel_pdf[row * self.env.width + col] / omega_row
        return self.uniform * UNIFORM_SPHERE_PDF + (1.0 - self.uniform) * mapped


def environment_sampler(env):
    if isinstance(env, EquirectMap):
        return EquirectSampler(env)
    return SGEnvironmentSampler(env)
