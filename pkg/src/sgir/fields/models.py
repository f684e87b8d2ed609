"""
The concrete fields: normals, indirect SG parameters, Q-tilde and the
material latent with its decoder.
"""

import math

import torch
import torch.nn.functional as F

from sgir.fields.grid import GridField3D
from sgir.sg.lobes import SGMixture, SphericalGaussian, as_tensor
from sgir.util.sampling import DTYPE, fibonacci_sphere_tensor, normalize

GAMMA_KNOTS = (0.01, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0)
INDIRECT_LOBES = 24
LOBE_CHANNELS = 7
DIRECT_LOBES = 128
LATENT_CHANNELS = 8
ROUGHNESS_FLOOR = 0.03
MIN_SHARPNESS = 1e-8


def softplus_inverse(y):
    return math.log(math.expm1(y))


class NormalField:
    """Three identity channels normalized on read; initialized to +z."""

    def __init__(self, store, name, resolution, bbox, lr_scale=1.0):
        self.grid = GridField3D(store, name, resolution, bbox, 3, "identity", (0.0, 0.0, 1.0), lr_scale)

    def evaluate(self, x):
        return normalize(self.grid.raw(x))


def decode_lobes(raw):
    """Raw [..., M, 7] to an SG mixture: normalized axis (zero -> +z), softplus sharpness and amplitude."""
    axis_raw = raw[..., 0:3]
    norm = axis_raw.norm(dim=-1, keepdim=True)
    degenerate = norm < 1e-12
    plus_z = torch.zeros_like(axis_raw)
    plus_z[..., 2] = 1.0
    axis = torch.where(degenerate, plus_z, axis_raw / torch.where(degenerate, torch.ones_like(norm), norm))
    sharpness = F.softplus(raw[..., 3:4]).clamp_min(MIN_SHARPNESS)
    amplitude = F.softplus(raw[..., 4:7])
    return SGMixture(SphericalGaussian(axis, sharpness, amplitude, check=False))


def knot_interpolation(gamma, knots=GAMMA_KNOTS):
    """Segment index j and blend t with gamma = (1 - t) k_j + t k_(j+1), gamma clamped to the knot range."""
    k = torch.as_tensor(knots, dtype=DTYPE)
    g = as_tensor(gamma).clamp(k[0], k[-1])
    j = (torch.searchsorted(k, g.detach(), right=True) - 1).clamp(0, len(knots) - 2)
    t = (g - k[j]) / (k[j + 1] - k[j])
    return j, t


class IndirectSGField:
    """Indirect light Gamma(x, gamma): 24 lobes per point, linear in gamma between knots."""

    def __init__(self, store, name, resolution, bbox, lobes=INDIRECT_LOBES, knots=GAMMA_KNOTS,
                 init_sharpness=4.0, init_amplitude_raw=-5.0, lr_scale=1.0):
        self.lobes = lobes
        self.knots = tuple(knots)
        axes = fibonacci_sphere_tensor(lobes)
        lobe_init = torch.cat([
            axes,
            torch.full((lobes, 1), softplus_inverse(init_sharpness), dtype=DTYPE),
            torch.full((lobes, 3), init_amplitude_raw, dtype=DTYPE),
        ], dim=-1)
        per_knot = lobe_init.reshape(-1).repeat(len(self.knots))
        self.grid = GridField3D(store, name, resolution, bbox, len(self.knots) * lobes * LOBE_CHANNELS,
                                "identity", per_knot, lr_scale)

    def raw(self, x, gamma):
        values = self.grid.raw(x).reshape(-1, len(self.knots), self.lobes * LOBE_CHANNELS)
        gamma = as_tensor(gamma)
        if gamma.dim() == 0:
            gamma = gamma.expand(values.shape[0])
        j, t = knot_interpolation(gamma, self.knots)
        rows = torch.arange(values.shape[0])
        a = values[rows, j]
        b = values[rows, j + 1]
        mixed = (1.0 - t).unsqueeze(-1) * a + t.unsqueeze(-1) * b
        return mixed.reshape(-1, self.lobes, LOBE_CHANNELS)

    def evaluate(self, x, gamma):
        return decode_lobes(self.raw(x, gamma))


class QTildeField:
    """Per-lobe visibility prior Q-tilde(x, tau) in (0, 1); channel = lobe index."""

    def __init__(self, store, name, resolution, bbox, lobes=DIRECT_LOBES, init=0.0, lr_scale=1.0):
        self.lobes = lobes
        self.grid = GridField3D(store, name, resolution, bbox, lobes, "sigmoid", init, lr_scale)

    def evaluate(self, x, tau=None):
        q = self.grid.evaluate(x)
        if tau is None:
            return q
        return q.gather(-1, torch.as_tensor(tau).reshape(-1, 1).expand(q.shape[0], 1)).squeeze(-1)


class MaterialLatentField:
    """Latent grid z(x) in (0, 1)^8 and a shared affine+sigmoid decoder to (albedo, roughness)."""

    def __init__(self, store, name, resolution, bbox, channels=LATENT_CHANNELS, lr_scale=1.0,
                 decoder_lr_scale=1.0, seed_generator=None):
        self.channels = channels
        self.latent = GridField3D(store, name, resolution, bbox, channels, "sigmoid", 0.0, lr_scale)
        weight = 0.1 * torch.randn(4, channels, dtype=DTYPE, generator=seed_generator)
        self.weight_name = f"{name}.decoder_weight"
        self.bias_name = f"{name}.decoder_bias"
        store.register(self.weight_name, weight, decoder_lr_scale)
        store.register(self.bias_name, torch.zeros(4, dtype=DTYPE), decoder_lr_scale)
        self.store = store

    @property
    def name(self):
        return self.latent.name

    def latent_code(self, x):
        return self.latent.evaluate(x)

    def decode(self, z):
        out = torch.sigmoid(z @ self.store.view(self.weight_name).T + self.store.view(self.bias_name))
        albedo = out[..., 0:3]
        roughness = ROUGHNESS_FLOOR + (1.0 - ROUGHNESS_FLOOR) * out[..., 3]
        return albedo, roughness

    def evaluate(self, x):
        return self.decode(self.latent_code(x))
