"""
Position x direction fields over a Fibonacci direction codebook.
"""

from dataclasses import dataclass

import torch

from sgir.fields.grid import GridField3D
from sgir.sg.lobes import as_tensor
from sgir.util.sampling import fibonacci_sphere_tensor

DEFAULT_CODEBOOK_SIZE = 64
# queries x codebook entries per nearest-neighbour chunk
CHUNK_ELEMENTS = 1 << 22


@dataclass
class DirectionWeights:
    """Three codebook indices [..., 3] and barycentric weights [..., 3] per direction."""
    index: torch.Tensor
    weight: torch.Tensor


def spherical_barycentric(codebook, omega):
    """Weights of the three nearest codebook directions reproducing omega.

    Solves omega = a d1 + b d2 + c d3, clamps negatives and renormalizes; a
    singular or all-negative solution falls back to the nearest direction.
    """
    omega = as_tensor(omega)
    shape = omega.shape[:-1]
    flat = omega.reshape(-1, 3)
    chunk = max(1, CHUNK_ELEMENTS // codebook.shape[0])
    indices = []
    for start in range(0, flat.shape[0], chunk):
        dots = flat[start:start + chunk] @ codebook.T
        indices.append(dots.topk(3, dim=-1).indices)
    index = torch.cat(indices) if indices else torch.zeros(0, 3, dtype=torch.long)
    d = codebook[index]
    d1, d2, d3 = d[:, 0], d[:, 1], d[:, 2]
    det = (d1 * torch.cross(d2, d3, dim=-1)).sum(-1)
    safe = torch.where(det.abs() > 1e-12, det, torch.ones_like(det))
    a = (flat * torch.cross(d2, d3, dim=-1)).sum(-1) / safe
    b = (d1 * torch.cross(flat, d3, dim=-1)).sum(-1) / safe
    c = (d1 * torch.cross(d2, flat, dim=-1)).sum(-1) / safe
    w = torch.stack([a, b, c], -1).clamp_min(0.0)
    total = w.sum(-1, keepdim=True)
    nearest = torch.zeros_like(w)
    nearest[:, 0] = 1.0
    bad = (det.abs() <= 1e-12).unsqueeze(-1) | (total <= 0)
    w = torch.where(bad, nearest, w / torch.where(total > 0, total, torch.ones_like(total)))
    return DirectionWeights(index.reshape(*shape, 3), w.reshape(*shape, 3))


class DirectionalField:
    """V(x, omega) in (0, 1): spatial interpolation of K codebook logits, then
    barycentric interpolation over directions, then a sigmoid."""

    def __init__(self, store, name, resolution, bbox, codebook_size=DEFAULT_CODEBOOK_SIZE, init=0.0, lr_scale=1.0):
        self.codebook = fibonacci_sphere_tensor(codebook_size)
        self.grid = GridField3D(store, name, resolution, bbox, codebook_size, "identity", init, lr_scale)

    @property
    def name(self):
        return self.grid.name

    def logits(self, x, omega):
        """Logits for points x [N, 3] and directions omega [N, 3] or [N, Q, 3]."""
        spatial = self.grid.raw(x)
        weights = spherical_barycentric(self.codebook, omega)
        if weights.index.dim() == 2:
            return (spatial.gather(-1, weights.index) * weights.weight).sum(-1)
        n, q = weights.index.shape[:2]
        gathered = spatial.gather(-1, weights.index.reshape(n, q * 3)).reshape(n, q, 3)
        return (gathered * weights.weight).sum(-1)

    def evaluate(self, x, omega):
        return torch.sigmoid(self.logits(x, omega))
