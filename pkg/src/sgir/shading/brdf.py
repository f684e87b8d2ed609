"""
Simplified Disney BRDF (no metallic) and its spherical Gaussian specular lobe.

f_r = a / pi + M(w_o, w_i) D(h), with D an SG over half vectors,
M = F G / (4 (n . w_i)(n . w_o)), Schlick-Smith G with k = (r + 1)^2 / 8 and
a spherical-Gaussian Fresnel approximation.
"""

import math
from dataclasses import dataclass
from typing import Any

import torch

from sgir.errors import GrazingView, ValidationError
from sgir.sg.algebra import GRAZING_EPSILON, warp_terms
from sgir.sg.lobes import as_tensor, direction_tensor
from sgir.util.sampling import normalize

SPECULAR_REFLECTANCE = 0.02
FRESNEL_A = 5.55473
FRESNEL_B = 6.8316


@dataclass
class Material:
    """Albedo a in (0, 1)^3, roughness r in [0.03, 1); specular reflectance is fixed at 0.02.

    ``specular`` exists for reference renders (furnace checks); training never changes it.
    """
    albedo: Any
    roughness: Any
    specular: float = SPECULAR_REFLECTANCE

    def __post_init__(self):
        self.albedo = as_tensor(self.albedo)
        self.roughness = as_tensor(self.roughness)
        if not self.albedo.requires_grad and not self.roughness.requires_grad:
            if bool(((self.albedo < 0) | (self.albedo > 1)).any()):
                raise ValidationError("albedo must lie in [0, 1]")
            if bool(((self.roughness <= 0) | (self.roughness > 1)).any()):
                raise ValidationError("roughness must lie in (0, 1]")


def ndf_sharpness(roughness):
    return 2.0 / as_tensor(roughness) ** 4


def ndf_amplitude(roughness):
    return 1.0 / (math.pi * as_tensor(roughness) ** 4)


def fresnel(specular, v_dot_h):
    return specular + (1.0 - specular) * torch.pow(2.0, -(FRESNEL_A * v_dot_h + FRESNEL_B) * v_dot_h)


def smith_schlick(roughness, n_dot_i, n_dot_o):
    k = (as_tensor(roughness) + 1.0) ** 2 / 8.0
    g1 = n_dot_i / (n_dot_i * (1.0 - k) + k)
    g2 = n_dot_o / (n_dot_o * (1.0 - k) + k)
    return g1 * g2


def specular_factor(mat, n_dot_i, n_dot_o, v_dot_h):
    """M = F G / (4 (n . w_i)(n . w_o)) for positive cosines."""
    return (fresnel(mat.specular, v_dot_h) * smith_schlick(mat.roughness, n_dot_i, n_dot_o)
            / (4.0 * n_dot_i * n_dot_o))


def brdf_eval(mat, n, omega_i, omega_o):
    """f_r(w_i, w_o) as RGB [..., 3]; zero when either direction is backfacing."""
    n = direction_tensor(n)
    wi = direction_tensor(omega_i)
    wo = direction_tensor(omega_o)
    n_dot_i = (n * wi).sum(-1)
    n_dot_o = (n * wo).sum(-1)
    front = (n_dot_i > 0) & (n_dot_o > 0)
    ci = n_dot_i.clamp_min(1e-12)
    co = n_dot_o.clamp_min(1e-12)
    h = normalize(wi + wo)
    n_dot_h = (n * h).sum(-1)
    v_dot_h = (wo * h).sum(-1).clamp_min(0.0)
    roughness = mat.roughness
    d = ndf_amplitude(roughness) * torch.exp(ndf_sharpness(roughness) * (n_dot_h - 1.0))
    spec = specular_factor(mat, ci, co, v_dot_h) * d
    value = mat.albedo / math.pi + spec.unsqueeze(-1)
    return torch.where(front.unsqueeze(-1), value, torch.zeros_like(value))


def specular_sg_terms(mat, n, omega_o):
    """The warped specular lobe for every entry plus its [..., 1] grazing mask."""
    n = direction_tensor(n)
    wo = direction_tensor(omega_o)
    lobe, grazing = warp_terms(ndf_sharpness(mat.roughness), 1.0, n, wo)
    c = (n * wo).sum(-1).clamp_min(GRAZING_EPSILON)
    m = specular_factor(mat, c, c, c)
    amplitude = (ndf_amplitude(mat.roughness) * m).unsqueeze(-1).expand(*c.shape, 3)
    return lobe.with_amplitude(amplitude), grazing


def specular_sg(mat, n, omega_o):
    """NDF warped to incoming directions, amplitude times M at the mirror direction.

    Raises:
        GrazingView: omega_o . n <= 1e-4
    """
    lobe, grazing = specular_sg_terms(mat, n, omega_o)
    if bool(grazing.any()):
        raise GrazingView("view direction is tangent to the surface")
    return lobe
