"""Closed-form spherical Gaussian algebra.

Every function broadcasts over batch dimensions, so a mixture of M lobes
against N shading points is a single call with shapes [N, M].
"""

import math

import torch

from sgir.errors import DegenerateProduct, GrazingView
from sgir.sg.lobes import COSINE_LOBE, SphericalGaussian, as_tensor, direction_tensor
from sgir.util.sampling import fibonacci_sphere_tensor

GRAZING_EPSILON = 1e-4
DEGENERATE_RATIO = 1e-12
FALLBACK_QUADRATURE_POINTS = 20_000
# Stand-in sharpness for a cancelled product: the product is constant, and a
# lobe this flat is constant to double precision.
FLAT_SHARPNESS = 1e-9


def sg_eval(g, omega):
    """mu * exp(lambda * (omega . xi - 1)), per channel."""
    w = direction_tensor(omega)
    cos = (w * g.lobe_axis).sum(-1, keepdim=True)
    return g.amplitude * torch.exp(g.sharpness * (cos - 1.0))


def sg_integral(g):
    """Integral of g over the whole sphere: 2 pi mu (1 - exp(-2 lambda)) / lambda."""
    lam = g.sharpness
    return 2.0 * math.pi * g.amplitude * (-torch.expm1(-2.0 * lam)) / lam


def product_terms(g1, g2):
    """The product lobe and a [..., 1] mask of cancelled (degenerate) entries.

    Degenerate entries carry a flat placeholder lobe along g1's axis with the
    exact constant amplitude, so chained products stay finite.
    """
    l1, l2 = g1.sharpness, g2.sharpness
    v = l1 * g1.lobe_axis + l2 * g2.lobe_axis
    lam = torch.sqrt((v * v).sum(-1, keepdim=True).clamp_min(1e-300))
    total = l1 + l2
    degenerate = lam <= DEGENERATE_RATIO * total
    axis = torch.where(degenerate, g1.lobe_axis.expand_as(v), v / lam)
    sharpness = torch.where(degenerate, torch.full_like(lam, FLAT_SHARPNESS), lam)
    amplitude = g1.amplitude * g2.amplitude * torch.exp(lam - total)
    return SphericalGaussian(axis, sharpness, amplitude, check=False), degenerate


def sg_product(g1, g2):
    """The SG equal to g1 * g2 pointwise.

    Raises:
        DegenerateProduct: lambda1 xi1 = -lambda2 xi2 for some entry
    """
    product, degenerate = product_terms(g1, g2)
    if bool(degenerate.any()):
        raise DegenerateProduct("lobes cancel; the product is constant", mask=degenerate.squeeze(-1))
    return product


def quadrature_integral(fn, points=200_000):
    """Integrate fn over the sphere with a Fibonacci point set.

    fn maps directions [P, 3] to values [..., P, C]; returns [..., C].
    """
    w = fibonacci_sphere_tensor(points)
    return fn(w).sum(-2) * (4.0 * math.pi / points)


def quadrature_inner_product(g1, g2, points=FALLBACK_QUADRATURE_POINTS):
    a = g1.unsqueeze(-1)
    b = g2.unsqueeze(-1)
    return quadrature_integral(lambda w: sg_eval(a, w) * sg_eval(b, w), points)


def sg_inner_product(g1, g2):
    """Integral of g1 * g2 over the sphere; quadrature where the lobes cancel."""
    product, degenerate = product_terms(g1, g2)
    value = sg_integral(product)
    if bool(degenerate.any()):
        mask = degenerate.squeeze(-1)
        shape = mask.shape
        sub1 = SphericalGaussian(g1.lobe_axis.expand(*shape, 3)[mask], g1.sharpness.expand(*shape, 1)[mask],
                                 g1.amplitude.expand(*shape, 3)[mask], check=False)
        sub2 = SphericalGaussian(g2.lobe_axis.expand(*shape, 3)[mask], g2.sharpness.expand(*shape, 1)[mask],
                                 g2.amplitude.expand(*shape, 3)[mask], check=False)
        value = value.clone()
        value[mask] = quadrature_inner_product(sub1, sub2)
    return value


def cosine_lobe_sg(n):
    """The lobe G(.; n, 0.0315, 32.7080) and offset 31.7003 with (w . n) ~= G(w) - offset."""
    lobe = SphericalGaussian(direction_tensor(n), COSINE_LOBE.sharpness_const,
                             COSINE_LOBE.amplitude_const, check=False)
    return lobe, COSINE_LOBE.offset_const


def clipped_cosine_inner(light, n):
    """Approximate integral of light(w) * max(w . n, 0) over the sphere.

    The unclipped cosine lobe goes to about -1 on the lower hemisphere, so each
    entry is clamped at zero; for lobes fully below the horizon this yields 0.
    """
    cos_lobe, offset = cosine_lobe_sg(n)
    value = sg_inner_product(light, cos_lobe) - offset * sg_integral(light)
    return value.clamp_min(0.0)


def _column(value, like):
    value = as_tensor(value)
    if value.dim() < like.dim():
        value = value.unsqueeze(-1) if value.dim() else value.reshape(1)
    return value


def warp_terms(ndf_sharpness, ndf_amplitude, n, omega_o):
    """Mirror-direction warp of an NDF lobe, plus a [..., 1] grazing mask.

    Grazing entries get a clamped cosine so their values stay finite; callers
    zero their contribution with the mask.
    """
    n = direction_tensor(n)
    wo = direction_tensor(omega_o)
    cos = (n * wo).sum(-1, keepdim=True)
    grazing = cos <= GRAZING_EPSILON
    axis = 2.0 * cos * n - wo
    sharpness = _column(ndf_sharpness, cos) / (4.0 * cos.clamp_min(GRAZING_EPSILON))
    return SphericalGaussian(axis, sharpness, ndf_amplitude, check=False), grazing


def warp_ndf(ndf_sharpness, ndf_amplitude, n, omega_o):
    """NDF lobe over half vectors warped to a lobe over incoming directions.

    Axis at the mirror direction 2 (omega_o . n) n - omega_o, sharpness
    lambda / (4 omega_o . n), amplitude unchanged.

    Raises:
        GrazingView: omega_o . n <= 1e-4
    """
    lobe, grazing = warp_terms(ndf_sharpness, ndf_amplitude, n, omega_o)
    if bool(grazing.any()):
        raise GrazingView("view direction is tangent to the surface")
    return lobe
