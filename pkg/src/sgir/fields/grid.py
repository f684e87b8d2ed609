"""
Dense trainable grids with trilinear interpolation.

Grid values live in a ParamStore slice of shape [nx, ny, nz, C]. Grid
corners are aligned with the bbox corners; queries outside the bbox are
clamped to it. Activations are applied after interpolation.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from sgir.errors import ValidationError
from sgir.sg.lobes import as_tensor
from sgir.util.sampling import DTYPE

CORNER_OFFSETS = torch.tensor(
    [[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=torch.long
)


def _identity(x):
    return x


def _identity_grad(x):
    return torch.ones_like(x)


def _sigmoid_grad(x):
    s = torch.sigmoid(x)
    return s * (1.0 - s)


ACTIVATIONS = {
    "identity": (_identity, _identity_grad),
    "sigmoid": (torch.sigmoid, _sigmoid_grad),
    "softplus": (F.softplus, torch.sigmoid),
}


@dataclass
class Corners:
    """Trilinear stencil of a batch of queries: flat cell indices [N, 8] and weights [N, 8]."""
    index: torch.Tensor
    weight: torch.Tensor


@dataclass
class SparseGrad:
    """d output[n, c] / d param[index[n, k, c]] = value[n, k, c]."""
    index: torch.Tensor
    value: torch.Tensor

    def to_dense(self, size, upstream=None):
        value = self.value if upstream is None else self.value * upstream.unsqueeze(-2)
        dense = torch.zeros(size, dtype=DTYPE)
        dense.index_add_(0, self.index.reshape(-1), value.reshape(-1))
        return dense


def trilinear_corners(resolution, bbox, x):
    res = torch.as_tensor(resolution, dtype=DTYPE)
    lo = torch.as_tensor(bbox[0], dtype=DTYPE)
    hi = torch.as_tensor(bbox[1], dtype=DTYPE)
    u = ((as_tensor(x) - lo) / (hi - lo) * (res - 1.0))
    u = torch.minimum(u.clamp_min(0.0), res - 1.0)
    base = torch.minimum(torch.floor(u).long(), torch.as_tensor(resolution) - 2)
    frac = u - base.to(DTYPE)
    corner = base.unsqueeze(-2) + CORNER_OFFSETS
    w = torch.where(CORNER_OFFSETS.bool(), frac.unsqueeze(-2), 1.0 - frac.unsqueeze(-2)).prod(-1)
    ny, nz = resolution[1], resolution[2]
    index = (corner[..., 0] * ny + corner[..., 1]) * nz + corner[..., 2]
    return Corners(index, w)


class GridField3D:
    """A [nx, ny, nz, C] grid with per-channel activations.

    Args:
        store: the ParamStore holding the grid values
        name: slice name in the store
        resolution: (nx, ny, nz), each at least 2
        bbox: [[lo], [hi]]
        channels: C
        activation: one activation name, or one per channel
        init: scalar, per-channel [C] or full [nx, ny, nz, C] raw values
        lr_scale: learning-rate multiplier of the slice
    """

    def __init__(self, store, name, resolution, bbox, channels, activation="identity", init=0.0, lr_scale=1.0):
        self.resolution = tuple(int(r) for r in resolution)
        if len(self.resolution) != 3 or min(self.resolution) < 2:
            raise ValidationError(f"grid resolution must be three values >= 2, got {resolution}")
        self.store = store
        self.name = name
        self.bbox = torch.as_tensor(bbox, dtype=DTYPE).reshape(2, 3)
        self.channels = int(channels)
        if isinstance(activation, str):
            activation = [activation] * self.channels
        unknown = set(activation) - set(ACTIVATIONS)
        if unknown or len(activation) != self.channels:
            raise ValidationError(f"bad activation list for {name}: {activation}")
        self.activation = list(activation)
        shape = (*self.resolution, self.channels)
        values = torch.zeros(shape, dtype=DTYPE) + torch.as_tensor(init, dtype=DTYPE)
        store.register(name, values, lr_scale)

    @property
    def values(self):
        return self.store.view(self.name)

    def corners(self, x):
        return trilinear_corners(self.resolution, self.bbox, x)

    def raw(self, x):
        """Interpolated pre-activation values [N, C]."""
        c = self.corners(x)
        flat = self.values.reshape(-1, self.channels)
        return (flat[c.index] * c.weight.unsqueeze(-1)).sum(-2)

    def activate(self, raw):
        if len(set(self.activation)) == 1:
            return ACTIVATIONS[self.activation[0]][0](raw)
        return torch.stack([ACTIVATIONS[a][0](raw[..., i]) for i, a in enumerate(self.activation)], -1)

    def activation_grad(self, raw):
        return torch.stack([ACTIVATIONS[a][1](raw[..., i]) for i, a in enumerate(self.activation)], -1)

    def evaluate(self, x):
        return self.activate(self.raw(x))

    def evaluate_with_param_grads(self, x):
        with torch.no_grad():
            c = self.corners(x)
            flat = self.values.reshape(-1, self.channels)
            raw = (flat[c.index] * c.weight.unsqueeze(-1)).sum(-2)
            value = self.activate(raw)
            slice_start = self.store.slices[self.name].start
            channel = torch.arange(self.channels)
            index = slice_start + c.index.unsqueeze(-1) * self.channels + channel
            grad = c.weight.unsqueeze(-1) * self.activation_grad(raw).unsqueeze(-2)
        return value, SparseGrad(index, grad)


def field_eval(field, x, *args):
    """Interpolated, activated field values at x (plus direction, gamma or lobe index)."""
    return field.evaluate(x, *args)


def field_eval_with_param_grads(field, x):
    """Values and their sparse derivatives with respect to the stored parameters."""
    return field.evaluate_with_param_grads(x)
