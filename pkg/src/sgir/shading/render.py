"""
SG-approximated shading.

Per light lobe j the diffuse term is (a / pi) <eta_j L_j, max(w . n, 0)> and
the specular term is <eta'_j (S x L_j), max(w . n, 0)>, where S is the
warped specular lobe. Both cosine integrals use the SG cosine approximation
with offset correction; all lobes are summed.
"""

import math
from dataclasses import dataclass
from typing import Any, Optional

import torch

from sgir.sg.algebra import clipped_cosine_inner, product_terms
from sgir.sg.lobes import SGMixture, as_tensor, direction_tensor
from sgir.shading.brdf import specular_sg_terms
from sgir.tonemap import ToneParams, deformed_forward


def _with_ratio(lobes, ratio):
    if ratio is None:
        return lobes
    return lobes.with_amplitude(lobes.amplitude * as_tensor(ratio).unsqueeze(-1))


def _render_lobes(n, omega_o, mat, lights, eta=None, eta_spec=None):
    """Diffuse + specular radiance [N, 3] from lights with batch [1 or N, M]."""
    n = direction_tensor(n)
    wo = direction_tensor(omega_o)
    normal = n.unsqueeze(-2)
    diffuse = clipped_cosine_inner(_with_ratio(lights, eta), normal).sum(-2)
    diffuse = diffuse * as_tensor(mat.albedo) / math.pi
    spec, grazing = specular_sg_terms(mat, n, wo)
    product, _ = product_terms(spec.unsqueeze(-1), lights)
    specular = clipped_cosine_inner(_with_ratio(product, eta_spec), normal).sum(-2)
    specular = torch.where(grazing, torch.zeros_like(specular), specular)
    return diffuse + specular


def render_direct(x, n, omega_o, mat, env, eta, eta_spec):
    """Direct radiance [N, 3] under an SG environment with per-lobe ratios eta, eta' [N, M]."""
    return _render_lobes(n, omega_o, mat, env.lobes.unsqueeze(0), eta, eta_spec)


def render_indirect(x, n, omega_o, mat, indirect):
    """Radiance [N, 3] from a (masked) indirect mixture with batch [N, M_ind]; eta = 1."""
    return _render_lobes(n, omega_o, mat, indirect.lobes)


@dataclass
class ShadePointInputs:
    """Everything needed to shade a batch of surface points.

    eta and eta_spec are [N, M] per direct lobe; indirect is an already-masked
    mixture with batch [N, M_ind], or None.
    """
    x: Any
    n: Any
    omega_o: Any
    material: Any
    env: SGMixture
    eta: Any
    eta_spec: Any
    indirect: Optional[SGMixture] = None
    tone: ToneParams = None

    def __post_init__(self):
        if self.tone is None:
            self.tone = ToneParams()


def shade_hdr(inputs):
    radiance = render_direct(inputs.x, inputs.n, inputs.omega_o, inputs.material, inputs.env,
                             inputs.eta, inputs.eta_spec)
    if inputs.indirect is not None:
        radiance = radiance + render_indirect(inputs.x, inputs.n, inputs.omega_o, inputs.material, inputs.indirect)
    return radiance


def shade_point(inputs):
    """deformed_forward(direct + indirect, gamma), in [0, 1]^3."""
    return deformed_forward(shade_hdr(inputs), inputs.tone)


def unit_ratios(count, lobes):
    return torch.ones(count, lobes, dtype=torch.float64)
