"""
Visibility ratios: lobe-weighted averages of V(x, w) over a lobe's cap.

Directions are stratified in cos(theta) inside the cap around the lobe axis
holding 99% of the lobe's mass, with a golden-ratio sequence in azimuth and
a per-call seeded jitter. Weights are the lobe values, normalized with a
softmax over log-weights so narrow lobes stay finite.
"""

import math

import torch

from sgir.sg.lobes import SGMixture, as_tensor, direction_tensor
from sgir.util.sampling import DTYPE, to_world, torch_generator

CAP_MASS = 0.99
BELOW_HORIZON = -0.3
ETA_SAMPLES = 64
GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


class ConstantVisibility:
    """V(x, w) = value everywhere."""

    def __init__(self, value=1.0):
        self.value = float(value)

    def evaluate(self, x, omega):
        return torch.full(omega.shape[:-1], self.value, dtype=DTYPE)


def cap_cosine(sharpness):
    """cos of the half-angle of the cap holding CAP_MASS of a lobe's integral."""
    lam = as_tensor(sharpness)
    return (1.0 + torch.log1p(-CAP_MASS * (-torch.expm1(-2.0 * lam))) / lam).clamp(-1.0, 1.0)


def cap_directions(axis, sharpness, samples, generator=None):
    """Stratified directions [..., S, 3] in each lobe's cap and their log-weights [..., S]."""
    axis = direction_tensor(axis)
    lam = as_tensor(sharpness)
    if lam.dim() == axis.dim():
        lam = lam.squeeze(-1)
    batch = axis.shape[:-1]
    cos_c = cap_cosine(lam)
    jitter = torch.rand((*batch, samples), dtype=DTYPE, generator=generator)
    strata = (torch.arange(samples, dtype=DTYPE) + jitter) / samples
    u2 = torch.frac(torch.arange(samples, dtype=DTYPE) * GOLDEN_RATIO
                    + torch.rand((*batch, 1), dtype=DTYPE, generator=generator))
    cos_t = 1.0 - strata * (1.0 - cos_c).unsqueeze(-1)
    sin_t = torch.sqrt((1.0 - cos_t * cos_t).clamp_min(0.0))
    phi = 2.0 * math.pi * u2
    local = torch.stack([sin_t * torch.cos(phi), sin_t * torch.sin(phi), cos_t], -1)
    world = to_world(local, axis.unsqueeze(-2).expand(*batch, samples, 3))
    log_w = lam.unsqueeze(-1) * (cos_t - 1.0)
    return world, log_w


def _evaluate_visibility(visibility, x, dirs, n):
    """V at points x [N, 3] for directions [N, Q, 3], zero below the horizon when n is given."""
    values = visibility.evaluate(x, dirs)
    if n is not None:
        above = ((dirs * direction_tensor(n).unsqueeze(-2)).sum(-1) > 0).to(DTYPE)
        values = values * above
    return values


def visibility_ratio(x, lobe, visibility, samples=ETA_SAMPLES, n=None, seed=0):
    """eta = sum G(w_i) V(x, w_i) / sum G(w_i) for one lobe per point.

    Args:
        x: points [N, 3]
        lobe: SphericalGaussian with batch [N] (or broadcastable)
        visibility: object with ``evaluate(x [N, 3], omega [N, Q, 3]) -> [N, Q]``
        samples: S
        n: optional normals [N, 3]; directions below the horizon count as occluded
    """
    x = as_tensor(x)
    count = x.shape[0]
    axis = lobe.lobe_axis.expand(count, 3)
    lam = lobe.sharpness.expand(count, 1)
    dirs, log_w = cap_directions(axis, lam, samples, torch_generator(seed, 0x71))
    values = _evaluate_visibility(visibility, x, dirs, n)
    return (torch.softmax(log_w, -1) * values).sum(-1)


def visibility_ratios(x, n, mixture, visibility, samples=ETA_SAMPLES, seed=0, chunk_lobes=32):
    """Per-lobe eta [N, M]; lobes with axis . n < -0.3 get eta = 0."""
    x = as_tensor(x)
    n = direction_tensor(n)
    count, m = x.shape[0], mixture.count
    axis = mixture.lobes.lobe_axis.expand(m, 3)
    lam = mixture.lobes.sharpness.expand(m, 1).squeeze(-1)
    gen = torch_generator(seed, 0x72)
    parts = []
    for start in range(0, m, chunk_lobes):
        stop = min(start + chunk_lobes, m)
        k = stop - start
        a = axis[start:stop].unsqueeze(0).expand(count, k, 3)
        lm = lam[start:stop].unsqueeze(0).expand(count, k)
        dirs, log_w = cap_directions(a, lm, samples, gen)
        values = _evaluate_visibility(visibility, x, dirs.reshape(count, k * samples, 3), n)
        eta = (torch.softmax(log_w, -1) * values.reshape(count, k, samples)).sum(-1)
        parts.append(eta)
    eta = torch.cat(parts, -1)
    skip = (n @ axis.T) < BELOW_HORIZON
    return torch.where(skip, torch.zeros_like(eta), eta)


def specular_visibility_ratios(x, n, spec_lobe, mixture, visibility, samples=ETA_SAMPLES, seed=0):
    """eta' [N, M]: directions drawn from the specular lobe's cap, weighted by G_spec * G_j."""
    x = as_tensor(x)
    count = x.shape[0]
    axis = spec_lobe.lobe_axis.expand(count, 3)
    lam_s = spec_lobe.sharpness.expand(count, 1)
    dirs, log_ws = cap_directions(axis, lam_s, samples, torch_generator(seed, 0x73))
    values = _evaluate_visibility(visibility, x, dirs, n)
    light_axis = mixture.lobes.lobe_axis.expand(mixture.count, 3)
    light_lam = mixture.lobes.sharpness.expand(mixture.count, 1).squeeze(-1)
    cos = torch.einsum("nsc,mc->nms", dirs, light_axis)
    log_w = log_ws.unsqueeze(1) + light_lam.view(1, -1, 1) * (cos - 1.0)
    return (torch.softmax(log_w, -1) * values.unsqueeze(1)).sum(-1)


def mask_indirect(mixture, visibility_eta):
    """Indirect lobes with amplitudes scaled by (1 - eta_V) per lobe."""
    keep = (1.0 - visibility_eta).clamp(0.0, 1.0).unsqueeze(-1)
    return SGMixture(mixture.lobes.with_amplitude(mixture.lobes.amplitude * keep))
