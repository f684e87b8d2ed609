import math

import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from sgir.errors import OutOfGamut, ValidationError
from sgir.tonemap import (
    ToneParams, aces_forward, aces_inverse, deformed_forward, deformed_inverse, gamma_logit, tonemap_grad
)
from sgir.util.hypothesis_strategies import hdr_values, tone_params

ACES_AT_HALF = 0.6425 / 1.0425
ACES_AT_ONE = 2.54 / 3.16


def grid(lo, hi, n):
    return torch.linspace(lo, hi, n, dtype=torch.float64)


def test_aces_values():
    """Test the ACES curve at 0, 0.5 and 1."""
    assert aces_forward(0.0).item() == 0.0
    assert aces_forward(0.5).item() == pytest.approx(ACES_AT_HALF, rel=1e-12)
    assert aces_forward(1.0).item() == pytest.approx(ACES_AT_ONE, rel=1e-12)
    assert ACES_AT_ONE == pytest.approx(0.803797, abs=1e-6)


def test_aces_inverse_values():
    """Test the inverse at 0 and at the rounded forward values."""
    assert aces_inverse(0.0).item() == pytest.approx(0.0, abs=1e-15)
    assert aces_inverse(0.616307).item() == pytest.approx(0.5, abs=1e-5)
    assert aces_inverse(0.803797).item() == pytest.approx(1.0, abs=1e-5)


def test_aces_inverse_out_of_gamut():
    """Test values at or past the pole signal OutOfGamut."""
    with pytest.raises(OutOfGamut):
        aces_inverse(1.1)
    with pytest.raises(OutOfGamut):
        aces_inverse(torch.tensor([0.2, 2.51 / 2.43]))


def test_aces_roundtrip():
    """Test inverse after forward is the identity on [0, 7]."""
    e = grid(0.0, 7.0, 701)
    assert torch.allclose(aces_inverse(aces_forward(e)), e, atol=1e-4, rtol=0.0)


def test_aces_monotone():
    """Test the curve is strictly increasing."""
    values = aces_forward(grid(0.0, 20.0, 2001))
    assert bool((values[1:] > values[:-1]).all())


def test_deformed_forward_identity_gamma():
    """Test gamma = 1 reduces to the clamped ACES curve."""
    e = grid(0.0, 10.0, 101)
    assert torch.equal(deformed_forward(e, ToneParams(1.0)), aces_forward(e).clamp(0.0, 1.0))


def test_deformed_forward_saturates():
    """Test a small gamma pushes e = 1 into saturation."""
    assert 0.01 ** -0.2 * ACES_AT_ONE > 1.0
    assert deformed_forward(1.0, ToneParams(0.01)).item() == 1.0


@given(tone_params())
def test_deformed_forward_zero(params):
    """Test black stays black for every gamma."""
    assert deformed_forward(0.0, params).item() == 0.0


@given(tone_params(), st.floats(0.0, 1.0))
def test_deformed_outputs_in_unit_range(params, c):
    """Test both directions stay inside [0, 1]."""
    out = deformed_inverse(c, params).item()
    assert 0.0 <= out <= 1.0
    assert 0.0 <= deformed_forward(out * 10.0, params).item() <= 1.0


def test_deformed_inverse_values():
    """Test the inverse at 0 and a gamma-1 roundtrip of the ACES example."""
    assert deformed_inverse(0.0, ToneParams(0.3)).item() == pytest.approx(0.0, abs=1e-15)
    assert deformed_inverse(0.616307, ToneParams(1.0)).item() == pytest.approx(0.5, abs=1e-5)


@pytest.mark.parametrize("gamma", [1.0, 0.5, 0.2])
def test_deformed_roundtrip_below_saturation(gamma):
    """Test forward after inverse recovers c below the saturation point."""
    params = ToneParams(gamma)
    c = grid(0.0, 0.8, 81)
    again = deformed_forward(deformed_inverse(c, params), params)
    assert torch.allclose(again, c, atol=1e-9, rtol=0.0)


@given(hdr_values(max_value=0.5), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_deformed_forward_decreasing_in_gamma(e, g1, g2):
    """Test a smaller gamma never gives a darker value."""
    lo, hi = min(g1, g2), max(g1, g2)
    assert deformed_forward(e, ToneParams(lo)).item() >= deformed_forward(e, ToneParams(hi)).item()


def test_grad_at_zero():
    """Test the slope of the curve at the origin."""
    d_e, d_gamma = tonemap_grad(torch.tensor([0.0]), ToneParams(1.0))
    assert d_e.item() == pytest.approx(0.03 / 0.14, rel=1e-12)
    assert d_gamma.item() == 0.0


def test_grad_zero_when_saturated():
    """Test both partials vanish in the clamped region."""
    d_e, d_gamma = tonemap_grad(torch.tensor([5.0]), ToneParams(0.01))
    assert d_e.item() == 0.0
    assert d_gamma.item() == 0.0


def test_grad_matches_finite_differences():
    """Test analytic partials against central differences on a grid."""
    for gamma in (0.3, 0.6, 0.95):
        for e in (0.01, 0.1, 0.3, 0.7, 1.2):
            params = ToneParams(gamma)
            if deformed_forward(e, params).item() >= 0.999:
                continue
            d_e, d_gamma = tonemap_grad(torch.tensor([e]), params)
            h = 1e-5 * max(1.0, e)
            fd_e = (deformed_forward(e + h, params) - deformed_forward(e - h, params)).item() / (2 * h)
            hg = 1e-6
            fd_g = (deformed_forward(e, ToneParams(gamma + hg))
                    - deformed_forward(e, ToneParams(gamma - hg))).item() / (2 * hg)
            assert d_e.item() == pytest.approx(fd_e, rel=1e-3)
            assert d_gamma.item() == pytest.approx(fd_g, rel=1e-3)


def test_grad_matches_autograd():
    """Test analytic partials agree with autograd through deformed_forward."""
    e = torch.tensor([0.05, 0.4, 0.9], dtype=torch.float64, requires_grad=True)
    gamma = torch.tensor(0.7, dtype=torch.float64, requires_grad=True)
    out = deformed_forward(e, ToneParams(gamma))
    grad_e, grad_gamma = torch.autograd.grad(out.sum(), (e, gamma))
    d_e, d_gamma = tonemap_grad(e.detach(), ToneParams(0.7))
    assert torch.allclose(grad_e, d_e)
    assert grad_gamma.item() == pytest.approx(d_gamma.sum().item(), rel=1e-9)


@pytest.mark.parametrize("gamma", [0.0, -0.1, 1.5, math.nan])
def test_tone_params_validate(gamma):
    """Test gamma outside (0, 1] is rejected."""
    with pytest.raises(ValidationError):
        ToneParams(gamma)


def test_tone_params_unknown_curve():
    """Test an unknown curve name is rejected."""
    with pytest.raises(ValidationError):
        ToneParams(0.5, "reinhard")


def test_gamma_logit_roundtrip():
    """Test the logit parameterization reproduces gamma."""
    params = ToneParams.from_logit(gamma_logit(0.2))
    assert params.gamma_tensor().item() == pytest.approx(0.2, rel=1e-12)


@pytest.mark.parametrize("curve", ["logistic", "linear"])
def test_alternative_curves_roundtrip(curve):
    """Test the ablation curves invert below saturation."""
    params = ToneParams(0.5, curve)
    c = grid(0.0, 0.5, 41)
    again = deformed_forward(deformed_inverse(c, params), params)
    assert torch.allclose(again, c, atol=1e-9, rtol=0.0)


def test_logistic_curve_values():
    """Test the logistic curve is tanh(e / 2)."""
    e = grid(0.0, 4.0, 9)
    assert torch.allclose(deformed_forward(e, ToneParams(1.0, "logistic")), torch.tanh(0.5 * e))
