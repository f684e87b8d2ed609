"""
ACES tone mapping, its inverse, and the gamma-deformed pair.

Tone mapping is componentwise. The deformation scales the curve by
gamma^(-0.2) before clamping to [0, 1]; the inverse undoes the scale after
clamping into the invertible range of the curve.
"""

import math
from dataclasses import dataclass
from typing import Any

import torch

from sgir.errors import OutOfGamut, ValidationError
from sgir.sg.lobes import as_tensor

GAMMA_EXPONENT = 0.2
LDR_CEILING = 0.999
ACES_POLE = 2.51 / 2.43


class ToneCurve:
    """A monotone map from HDR radiance to display values."""

    name = "curve"

    def forward(self, e):
        raise NotImplementedError("Subclasses must implement forward")

    def derivative(self, e):
        raise NotImplementedError("Subclasses must implement derivative")

    def inverse(self, c):
        raise NotImplementedError("Subclasses must implement inverse")


class AcesCurve(ToneCurve):
    name = "aces"

    def forward(self, e):
        return (2.51 * e + 0.03) * e / ((2.43 * e + 0.59) * e + 0.14)

    def derivative(self, e):
        num = (2.51 * e + 0.03) * e
        den = (2.43 * e + 0.59) * e + 0.14
        return ((5.02 * e + 0.03) * den - num * (4.86 * e + 0.59)) / (den * den)

    def inverse(self, c):
        disc = -1.0127 * c * c + 1.3702 * c + 0.0009
        return (0.59 * c - 0.03 + torch.sqrt(disc.clamp_min(0.0))) / (2.0 * (2.51 - 2.43 * c))


class LogisticCurve(ToneCurve):
    """tanh(e / 2), i.e. 2 sigmoid(e) - 1."""

    name = "logistic"

    def forward(self, e):
        return torch.tanh(0.5 * e)

    def derivative(self, e):
        t = torch.tanh(0.5 * e)
        return 0.5 * (1.0 - t * t)

    def inverse(self, c):
        return 2.0 * torch.atanh(c)


class LinearCurve(ToneCurve):
    name = "linear"

    def forward(self, e):
        return e

    def derivative(self, e):
        return torch.ones_like(e)

    def inverse(self, c):
        return c


TONE_CURVES = {curve.name: curve for curve in (AcesCurve(), LogisticCurve(), LinearCurve())}


@dataclass
class ToneParams:
    """Deformation parameter gamma in (0, 1] and the curve it deforms.

    gamma is a float, or a tensor when it is being optimized (see from_logit).
    """
    gamma: Any = 1.0
    curve: str = "aces"

    def __post_init__(self):
        if self.curve not in TONE_CURVES:
            raise ValidationError(f"unknown tone curve {self.curve!r}; expected one of {sorted(TONE_CURVES)}")
        if not isinstance(self.gamma, torch.Tensor):
            g = float(self.gamma)
            if not (math.isfinite(g) and 0.0 < g <= 1.0):
                raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma}")

    @classmethod
    def from_logit(cls, logit, curve="aces"):
        return cls(torch.sigmoid(as_tensor(logit)), curve)

    @property
    def tone_curve(self):
        return TONE_CURVES[self.curve]

    def gamma_tensor(self):
        return as_tensor(self.gamma)


def gamma_logit(gamma):
    """Inverse of the sigmoid parameterization; gamma = 1 maps to a large finite logit."""
    g = min(max(float(gamma), 1e-6), 1.0 - 1e-6)
    return math.log(g / (1.0 - g))


def aces_forward(e):
    """F(e) = ((2.51 e + 0.03) e) / ((2.43 e + 0.59) e + 0.14)."""
    return TONE_CURVES["aces"].forward(as_tensor(e))


def aces_inverse(c):
    """Closed-form inverse of the ACES curve.

    Raises:
        OutOfGamut: c >= 2.51 / 2.43 or a negative discriminant
    """
    c = as_tensor(c)
    disc = -1.0127 * c * c + 1.3702 * c + 0.0009
    if bool((c >= ACES_POLE).any()) or bool((disc < 0).any()):
        raise OutOfGamut("value outside the invertible range of ACES; clamp to [0, 0.999] first")
    return TONE_CURVES["aces"].inverse(c)


def deformed_forward(e, params):
    """clamp(gamma^(-0.2) * F(e), 0, 1)."""
    scale = params.gamma_tensor() ** -GAMMA_EXPONENT
    return (scale * params.tone_curve.forward(as_tensor(e))).clamp(0.0, 1.0)


def deformed_inverse(c, params):
    """clamp(F_I(clamp(c * gamma^0.2, 0, 0.999)), 0, 1)."""
    scale = params.gamma_tensor() ** GAMMA_EXPONENT
    inner = (as_tensor(c) * scale).clamp(0.0, LDR_CEILING)
    return params.tone_curve.inverse(inner).clamp(0.0, 1.0)


def tonemap_grad(e, params):
    """Analytic (d/de, d/dgamma) of deformed_forward; zero where the output saturates."""
    e = as_tensor(e)
    gamma = params.gamma_tensor()
    curve = params.tone_curve
    value = curve.forward(e)
    scale = gamma ** -GAMMA_EXPONENT
    d_e = scale * curve.derivative(e)
    d_gamma = -GAMMA_EXPONENT * gamma ** (-GAMMA_EXPONENT - 1.0) * value
    clamped = (scale * value > 1.0) | (scale * value < 0.0)
    zero = torch.zeros_like(d_e)
    return torch.where(clamped, zero, d_e), torch.where(clamped, zero, d_gamma * torch.ones_like(d_e))
