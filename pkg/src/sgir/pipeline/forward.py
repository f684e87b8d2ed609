"""
The decomposition forward model: trained fields in, LDR colors out.
"""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import torch

from sgir.pipeline.rve import blend_eta, matching_lobes
from sgir.sg.lobes import as_tensor
from sgir.shading.brdf import Material, specular_sg_terms
from sgir.shading.render import ShadePointInputs, shade_hdr, unit_ratios
from sgir.shading.visibility import mask_indirect, specular_visibility_ratios, visibility_ratios
from sgir.tonemap import deformed_forward


def stream_seed(*keys):
    """A 31-bit integer seed derived from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0] >> 1)


@dataclass
class ShadedBatch:
    ldr: torch.Tensor
    hdr: torch.Tensor
    eta: torch.Tensor
    eta_spec: torch.Tensor
    qtilde: Optional[torch.Tensor]
    albedo: torch.Tensor
    roughness: torch.Tensor
    normal: torch.Tensor
    tone: Any


def shade_batch(model, x, omega_o, cfg, seed=0, env=None, deshadow=False, blend=True):
    """Shade surface points x seen from omega_o.

    Args:
        model: SceneModel
        x: points [N, 3]
        omega_o: unit directions towards the viewer [N, 3]
        cfg: StageConfig (rve, masked_indirect, tone_curve and eta_samples are read)
        seed: seed of the visibility-ratio sample directions
        env: SG mixture to light with; the trained environment when None
        deshadow: eta = eta' = 1 for every lobe
        blend: use 0.5 (eta + Q-tilde) when Q-tilde applies to ``env``
    """
    x = as_tensor(x)
    wo = as_tensor(omega_o)
    n = model.normals.evaluate(x)
    trained = model.env_mixture()
    env = trained if env is None else env
    albedo, roughness = model.material.evaluate(x)
    mat = Material(albedo, roughness)
    tone = model.tone(cfg.tone_curve)
    if deshadow:
        eta = unit_ratios(len(x), env.count)
        eta_spec = unit_ratios(len(x), env.count)
    else:
        spec, _ = specular_sg_terms(mat, n, wo)
        eta = visibility_ratios(x, n, env, model.visibility, cfg.eta_samples, seed)
        eta_spec = specular_visibility_ratios(x, n, spec, env, model.visibility, cfg.eta_samples, seed)
    q = None
    used = eta
    if not deshadow and cfg.rve and matching_lobes(env, trained):
        q = model.qtilde.evaluate(x)
        if blend:
            used = blend_eta(eta, q)
    indirect = model.indirect.evaluate(x, tone.gamma_tensor())
    if cfg.masked_indirect:
        v = model.visibility.evaluate(x, indirect.lobes.lobe_axis.detach())
        indirect = mask_indirect(indirect, v)
    inputs = ShadePointInputs(x, n, wo, mat, env, used, eta_spec, indirect, tone)
    hdr = shade_hdr(inputs)
    return ShadedBatch(deformed_forward(hdr, tone), hdr, eta, eta_spec, q, albedo, roughness, n, tone)
