"""
Spherical Gaussian value types.

All types are batched: a lobe stores tensors whose leading dimensions are the
batch shape, with a trailing dimension of 3 (axis, amplitude) or 1 (sharpness).
A single lobe is simply a lobe with an empty batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from sgir.util.sampling import DTYPE

NORM_TOLERANCE = 1e-6


def as_tensor(value):
    if isinstance(value, torch.Tensor):
        return value if value.dtype == DTYPE else value.to(DTYPE)
    return torch.as_tensor(value, dtype=DTYPE)


def direction_tensor(v):
    """The tensor behind a UnitVector3 or a plain [..., 3] tensor."""
    if isinstance(v, UnitVector3):
        return v.data
    return as_tensor(v)


class UnitVector3:
    """A direction (or batch of directions) normalized on construction."""

    def __init__(self, x, y=None, z=None):
        if y is None and z is None:
            data = as_tensor(x)
        else:
            data = torch.stack([as_tensor(x), as_tensor(y), as_tensor(z)], dim=-1)
        if data.shape[-1:] != (3,):
            raise ValueError(f"direction needs 3 components, got shape {tuple(data.shape)}")
        norm = data.norm(dim=-1, keepdim=True)
        if bool((norm == 0).any()) or not bool(torch.isfinite(norm).all()):
            raise ValueError("cannot normalize a zero or non-finite direction")
        self.data = data / norm

    @property
    def x(self):
        return self.data[..., 0]

    @property
    def y(self):
        return self.data[..., 1]

    @property
    def z(self):
        return self.data[..., 2]

    def dot(self, other):
        return (self.data * direction_tensor(other)).sum(-1)

    def __neg__(self):
        return UnitVector3(-self.data)

    def __repr__(self):
        return f"UnitVector3({self.data.tolist()})"


def _rgb(amplitude):
    amplitude = as_tensor(amplitude)
    if amplitude.dim() == 0:
        amplitude = amplitude.reshape(1)
    if amplitude.shape[-1] == 1:
        amplitude = amplitude.expand(*amplitude.shape[:-1], 3)
    return amplitude


def _scalar_column(sharpness, batch_shape):
    sharpness = as_tensor(sharpness)
    if sharpness.dim() == 0:
        return sharpness.reshape(1).expand(*batch_shape, 1)
    if sharpness.shape == tuple(batch_shape):
        return sharpness.unsqueeze(-1)
    return sharpness


class SphericalGaussian:
    """G(w; xi, lambda, mu) = mu * exp(lambda * (w . xi - 1)).

    Args:
        lobe_axis: unit axis xi, a UnitVector3 or a [..., 3] tensor
        sharpness: lambda > 0, scalar, [...] or [..., 1]
        amplitude: mu >= 0, scalar or RGB [..., 3]
        check: validate the invariants (disabled on internal hot paths)
    """

    def __init__(self, lobe_axis, sharpness, amplitude, check=True):
        self.lobe_axis = direction_tensor(lobe_axis)
        batch_shape = self.lobe_axis.shape[:-1]
        self.sharpness = _scalar_column(sharpness, batch_shape)
        self.amplitude = _rgb(amplitude)
        if check:
            self.validate()

    def validate(self):
        with torch.no_grad():
            norm = self.lobe_axis.norm(dim=-1)
            if not bool(((norm - 1.0).abs() <= NORM_TOLERANCE).all()):
                raise ValueError("lobe axis must be a unit vector")
            if not bool((torch.isfinite(self.sharpness) & (self.sharpness > 0)).all()):
                raise ValueError("sharpness must be finite and positive")
            if not bool((torch.isfinite(self.amplitude) & (self.amplitude >= 0)).all()):
                raise ValueError("amplitude must be finite and non-negative")
        return self

    @property
    def batch_shape(self):
        return torch.broadcast_shapes(
            self.lobe_axis.shape[:-1], self.sharpness.shape[:-1], self.amplitude.shape[:-1]
        )

    def __getitem__(self, index):
        shape = self.batch_shape
        return SphericalGaussian(
            self.lobe_axis.expand(*shape, 3)[index],
            self.sharpness.expand(*shape, 1)[index],
            self.amplitude.expand(*shape, 3)[index],
            check=False,
        )

    def select(self, index):
        """Entry ``index`` along the last batch dimension."""
        shape = self.batch_shape
        return SphericalGaussian(
            self.lobe_axis.expand(*shape, 3)[..., index, :],
            self.sharpness.expand(*shape, 1)[..., index, :],
            self.amplitude.expand(*shape, 3)[..., index, :],
            check=False,
        )

    def unsqueeze(self, dim):
        """Insert a batch dimension (negative dims count over the batch shape)."""
        d = dim if dim >= 0 else dim - 1
        shape = self.batch_shape
        return SphericalGaussian(
            self.lobe_axis.expand(*shape, 3).unsqueeze(d),
            self.sharpness.expand(*shape, 1).unsqueeze(d),
            self.amplitude.expand(*shape, 3).unsqueeze(d),
            check=False,
        )

    def with_amplitude(self, amplitude):
        return SphericalGaussian(self.lobe_axis, self.sharpness, amplitude, check=False)

    def scaled(self, factor):
        """Amplitude multiplied by ``factor`` (scalar, [...] or [..., 3])."""
        factor = as_tensor(factor)
        if factor.dim() and factor.shape[-1] != 3:
            factor = factor.unsqueeze(-1)
        return self.with_amplitude(self.amplitude * factor)

    def detach(self):
        return SphericalGaussian(
            self.lobe_axis.detach(), self.sharpness.detach(), self.amplitude.detach(), check=False
        )

    def __repr__(self):
        return (f"SphericalGaussian(axis={self.lobe_axis.tolist()}, "
                f"sharpness={self.sharpness.squeeze(-1).tolist()}, amplitude={self.amplitude.tolist()})")


class SGMixture:
    """An ordered list of lobes stored batched along the last batch dimension.

    The lobe index is stable; it is the identity RVE uses to address each lobe.
    """

    def __init__(self, lobes: SphericalGaussian):
        if len(lobes.batch_shape) == 0:
            lobes = lobes.unsqueeze(0)
        self.lobes = lobes

    @classmethod
    def from_list(cls, lobes):
        if not lobes:
            raise ValueError("a mixture needs at least one lobe")
        return cls(SphericalGaussian(
            torch.stack([g.lobe_axis for g in lobes]),
            torch.stack([g.sharpness.reshape(1) for g in lobes]),
            torch.stack([g.amplitude.reshape(3) for g in lobes]),
            check=False,
        ))

    @property
    def count(self):
        return self.lobes.batch_shape[-1]

    def __len__(self):
        return self.count

    def __getitem__(self, index):
        return self.lobes.select(index)

    def as_list(self):
        return [self.lobes.select(i) for i in range(self.count)]

    def evaluate(self, omega):
        """Sum of all lobes at directions omega [..., 3] (mixture batch must broadcast)."""
        w = direction_tensor(omega).unsqueeze(-2)
        cos = (w * self.lobes.lobe_axis).sum(-1, keepdim=True)
        return (self.lobes.amplitude * torch.exp(self.lobes.sharpness * (cos - 1.0))).sum(-2)

    def scaled(self, factor):
        return SGMixture(self.lobes.scaled(factor))

    def detach(self):
        return SGMixture(self.lobes.detach())

    def to_json(self):
        return {
            "lobes": [
                {
                    "axis": g.lobe_axis.tolist(),
                    "sharpness": float(g.sharpness.reshape(())),
                    "amplitude": g.amplitude.tolist(),
                }
                for g in self.detach().as_list()
            ]
        }

    @classmethod
    def from_json(cls, data):
        lobes = [SphericalGaussian(UnitVector3(entry["axis"]), entry["sharpness"], entry["amplitude"])
                 for entry in data["lobes"]]
        return cls.from_list(lobes)

    def __repr__(self):
        return f"SGMixture(count={self.count})"


@dataclass(frozen=True)
class CosineLobeApprox:
    """(w . n) ~= amplitude_const * exp(sharpness_const * (w . n - 1)) - offset_const."""
    sharpness_const: float = 0.0315
    amplitude_const: float = 32.7080
    offset_const: float = 31.7003


COSINE_LOBE = CosineLobeApprox()
