import math

import pytest
import torch
from hypothesis import assume, given, settings

from sgir.errors import DegenerateProduct, GrazingView
from sgir.sg import (
    COSINE_LOBE, SGMixture, SphericalGaussian, UnitVector3, clipped_cosine_inner, cosine_lobe_sg, product_terms,
    quadrature_integral, sg_eval, sg_inner_product, sg_integral, sg_product, warp_ndf
)
from sgir.util.hypothesis_strategies import lobes, unit_vectors
from sgir.util.sampling import fibonacci_sphere_tensor

Z = (0.0, 0.0, 1.0)
X = (1.0, 0.0, 0.0)
ONES = (1.0, 1.0, 1.0)
QUADRATURE_POINTS = 200_000


def lobe(axis, sharpness, amplitude=ONES):
    return SphericalGaussian(UnitVector3(axis), sharpness, amplitude)


def quadrature_of(g, points=QUADRATURE_POINTS):
    return quadrature_integral(lambda w: sg_eval(g, w), points)


def test_unit_vector_normalizes():
    """Test construction normalizes to unit length."""
    v = UnitVector3(3.0, 0.0, 4.0)
    assert float(v.data.norm()) == pytest.approx(1.0, abs=1e-12)
    assert float(v.x) == pytest.approx(0.6)


def test_unit_vector_rejects_zero():
    """Test a zero vector cannot be normalized."""
    with pytest.raises(ValueError):
        UnitVector3(0.0, 0.0, 0.0)


def test_lobe_rejects_bad_sharpness():
    """Test non-positive sharpness violates the lobe invariants."""
    with pytest.raises(ValueError):
        lobe(Z, 0.0)
    with pytest.raises(ValueError):
        lobe(Z, 1.0, (-1.0, 0.0, 0.0))


def test_eval_at_axis_and_antipode():
    """Test the value is mu on the axis and mu e^(-2 lambda) opposite it."""
    g = lobe(Z, 3.0, (0.5, 1.0, 2.0))
    assert sg_eval(g, torch.tensor(Z)).tolist() == pytest.approx([0.5, 1.0, 2.0])
    expected = [c * math.exp(-6.0) for c in (0.5, 1.0, 2.0)]
    assert sg_eval(g, torch.tensor([0.0, 0.0, -1.0])).tolist() == pytest.approx(expected)


def test_eval_perpendicular():
    """Test evaluation 90 degrees off axis with sharpness 10."""
    g = lobe(Z, 10.0)
    assert sg_eval(g, torch.tensor([0.0, 1.0, 0.0])).tolist() == pytest.approx([math.exp(-10.0)] * 3, rel=1e-12)


@given(lobes(max_sharpness=100.0), unit_vectors())
def test_eval_bounded_by_amplitude(g, omega):
    """Test 0 <= G(w) <= mu for every direction."""
    value = sg_eval(g, torch.tensor(omega))
    assert bool((value >= 0).all())
    assert bool((value <= g.amplitude * (1.0 + 1e-12)).all())


def test_integral_closed_form():
    """Test the integral of a unit lobe with sharpness 1."""
    value = sg_integral(lobe(Z, 1.0))
    assert value.tolist() == pytest.approx([2.0 * math.pi * (1.0 - math.exp(-2.0))] * 3)
    assert value[0].item() == pytest.approx(5.4327, abs=1e-4)


def test_integral_of_zero_amplitude():
    """Test a zero-amplitude lobe integrates to zero."""
    assert sg_integral(lobe(Z, 4.0, (0.0, 0.0, 0.0))).tolist() == [0.0, 0.0, 0.0]


def test_integral_sharp_lobe():
    """Test a sharp lobe integrates to about 2 pi / lambda."""
    assert sg_integral(lobe(Z, 100.0))[0].item() == pytest.approx(2.0 * math.pi / 100.0, rel=1e-6)


@pytest.mark.parametrize("sharpness", [0.05, 1.0, 10.0, 100.0, 500.0])
def test_integral_matches_quadrature(sharpness):
    """Test the closed-form integral against Fibonacci quadrature."""
    g = lobe((0.3, -0.2, 0.9), sharpness)
    assert sg_integral(g)[0].item() == pytest.approx(quadrature_of(g)[0].item(), rel=5e-3)


def test_product_is_pointwise():
    """Test the product lobe equals the pointwise product at random directions."""
    g1 = lobe(Z, 5.0, (1.0, 0.5, 2.0))
    g2 = lobe(X, 5.0, (0.3, 1.0, 1.0))
    product = sg_product(g1, g2)
    omega = torch.nn.functional.normalize(torch.randn(100, 3, generator=torch.Generator().manual_seed(1),
                                                      dtype=torch.float64), dim=-1)
    assert torch.allclose(sg_eval(product, omega), sg_eval(g1, omega) * sg_eval(g2, omega), rtol=1e-9, atol=1e-15)


def test_product_of_coaxial_lobes():
    """Test aligned lobes add sharpness and multiply amplitude."""
    product = sg_product(lobe(Z, 2.0, (2.0, 2.0, 2.0)), lobe(Z, 3.0, (0.5, 1.0, 1.5)))
    assert product.sharpness.item() == pytest.approx(5.0)
    assert product.amplitude.tolist() == pytest.approx([1.0, 2.0, 3.0])
    assert product.lobe_axis.tolist() == pytest.approx(list(Z))


def test_product_with_flat_lobe():
    """Test a nearly flat unit lobe leaves the other factor unchanged."""
    g1 = lobe((0.0, 0.6, 0.8), 7.0, (0.2, 0.4, 0.6))
    product = sg_product(g1, lobe(X, 1e-9))
    assert product.sharpness.item() == pytest.approx(7.0, rel=1e-8)
    assert product.amplitude.tolist() == pytest.approx([0.2, 0.4, 0.6], rel=1e-8)


def test_cancelling_product_raises():
    """Test opposite lobes of equal sharpness signal a degenerate product."""
    with pytest.raises(DegenerateProduct) as info:
        sg_product(lobe(Z, 3.0), lobe((0.0, 0.0, -1.0), 3.0))
    assert bool(info.value.mask.all())


def test_inner_product_falls_back_on_cancellation():
    """Test a cancelled product is integrated by quadrature instead of raising."""
    value = sg_inner_product(lobe(Z, 3.0), lobe((0.0, 0.0, -1.0), 3.0))
    assert value[0].item() == pytest.approx(4.0 * math.pi * math.exp(-6.0), rel=1e-6)


@settings(max_examples=50)
@given(lobes(max_sharpness=100.0), lobes(max_sharpness=100.0), unit_vectors())
def test_product_pointwise_property(g1, g2, omega):
    """Test the product is exact for random lobe pairs."""
    product, degenerate = product_terms(g1, g2)
    assume(not bool(degenerate.any()))
    w = torch.tensor(omega, dtype=torch.float64)
    scale = float((g1.amplitude * g2.amplitude).max()) + 1e-300
    gap = (sg_eval(product, w) - sg_eval(g1, w) * sg_eval(g2, w)).abs().max()
    assert float(gap) <= 1e-9 * scale


@given(lobes(), lobes())
def test_inner_product_symmetric(g1, g2):
    """Test the inner product does not depend on argument order."""
    assert torch.equal(sg_inner_product(g1, g2), sg_inner_product(g2, g1))


def test_inner_product_zero_amplitude():
    """Test a zero-amplitude factor gives zero."""
    value = sg_inner_product(lobe(Z, 2.0, (0.0, 0.0, 0.0)), lobe(X, 4.0))
    assert value.tolist() == [0.0, 0.0, 0.0]


def test_self_inner_product_matches_quadrature():
    """Test <g, g> against quadrature for a sharpness-10 lobe."""
    g = lobe(Z, 10.0)
    w = fibonacci_sphere_tensor(QUADRATURE_POINTS)
    expected = (sg_eval(g, w) ** 2).sum(0) * 4.0 * math.pi / QUADRATURE_POINTS
    assert sg_inner_product(g, g)[0].item() == pytest.approx(expected[0].item(), rel=5e-3)


def test_cosine_lobe_endpoints():
    """Test the cosine lobe value at the normal and on the horizon."""
    n = torch.tensor(Z, dtype=torch.float64)
    g, offset = cosine_lobe_sg(n)
    assert offset == COSINE_LOBE.offset_const
    assert sg_eval(g, n)[0].item() - offset == pytest.approx(1.0077, abs=1e-9)
    horizon = sg_eval(g, torch.tensor(X))[0].item() - offset
    assert horizon == pytest.approx(32.7080 * math.exp(-0.0315) - 31.7003, abs=1e-9)
    assert horizon == pytest.approx(-0.0064, abs=5e-4)


def test_cosine_lobe_error_on_hemisphere():
    """Test the cosine approximation stays within 0.02 over the upper hemisphere."""
    n = torch.tensor(Z, dtype=torch.float64)
    g, offset = cosine_lobe_sg(n)
    w = fibonacci_sphere_tensor(20_000)
    upper = w[w[:, 2] >= 0]
    error = (sg_eval(g, upper)[:, 0] - offset - upper[:, 2]).abs().max()
    assert float(error) <= 0.02


def test_clipped_cosine_zero_light():
    """Test a dark light contributes nothing."""
    value = clipped_cosine_inner(lobe(Z, 5.0, (0.0, 0.0, 0.0)), torch.tensor(Z))
    assert value.tolist() == [0.0, 0.0, 0.0]


def test_clipped_cosine_narrow_light_at_normal():
    """Test a narrow light on the normal against hemispherical quadrature."""
    light = lobe(Z, 200.0)
    w = fibonacci_sphere_tensor(QUADRATURE_POINTS)
    expected = (sg_eval(light, w)[:, 0] * w[:, 2].clamp_min(0.0)).sum() * 4.0 * math.pi / QUADRATURE_POINTS
    value = clipped_cosine_inner(light, torch.tensor(Z))[0].item()
    assert value == pytest.approx(float(expected), rel=2e-2)


def test_clipped_cosine_narrow_light_below():
    """Test a narrow light opposite the normal is clamped to zero instead of the negative unclipped value."""
    light = lobe((0.0, 0.0, -1.0), 200.0)
    value = clipped_cosine_inner(light, torch.tensor(Z))[0].item()
    assert abs(value) <= 0.05 * sg_integral(light)[0].item()
    cos_lobe, offset = cosine_lobe_sg(torch.tensor(Z))
    raw = sg_inner_product(light, cos_lobe) - offset * sg_integral(light)
    assert raw[0].item() < -0.9 * sg_integral(light)[0].item()
    assert value == 0.0


def test_warp_normal_incidence():
    """Test viewing along the normal keeps the axis and quarters the sharpness."""
    g = warp_ndf(40.0, (1.0, 1.0, 1.0), torch.tensor(Z), torch.tensor(Z))
    assert g.lobe_axis.tolist() == pytest.approx(list(Z))
    assert g.sharpness.item() == pytest.approx(10.0)


def test_warp_mirror_direction():
    """Test the warped axis is the mirror of the view direction at 45 degrees."""
    s = math.sqrt(0.5)
    g = warp_ndf(8.0, (0.5, 0.5, 0.5), torch.tensor(Z), torch.tensor([s, 0.0, s]))
    assert g.lobe_axis.tolist() == pytest.approx([-s, 0.0, s])
    assert g.sharpness.item() == pytest.approx(8.0 / (4.0 * s))
    mirror = sg_eval(g, g.lobe_axis)
    assert mirror.tolist() == pytest.approx([0.5, 0.5, 0.5], abs=1e-6)


def test_warp_grazing_raises():
    """Test a tangent view direction signals GrazingView."""
    with pytest.raises(GrazingView):
        warp_ndf(8.0, ONES, torch.tensor(Z), torch.tensor(X))


def test_mixture_evaluates_sum():
    """Test a mixture evaluates to the sum of its lobes."""
    g1 = lobe(Z, 2.0)
    g2 = lobe(X, 5.0, (0.5, 0.5, 0.5))
    mixture = SGMixture.from_list([g1, g2])
    w = torch.tensor([0.0, 0.6, 0.8], dtype=torch.float64)
    assert mixture.count == 2
    assert torch.allclose(mixture.evaluate(w), sg_eval(g1, w) + sg_eval(g2, w))


def test_mixture_json():
    """Test mixtures survive JSON with their lobe order."""
    mixture = SGMixture.from_list([lobe(Z, 2.0), lobe(X, 5.0, (0.5, 0.25, 1.0))])
    again = SGMixture.from_json(mixture.to_json())
    assert again.lobes.sharpness.reshape(-1).tolist() == pytest.approx([2.0, 5.0])
    assert again.lobes.amplitude[1].tolist() == pytest.approx([0.5, 0.25, 1.0])
