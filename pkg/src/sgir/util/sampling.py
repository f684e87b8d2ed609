"""Deterministic direction sets, local frames and seeded random streams."""

import math

import numpy as np
import torch

DTYPE = torch.float64
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def rng_for(seed, *keys):
    """A numpy Generator keyed by (seed, *keys); independent of call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))


def torch_generator(seed, *keys):
    """A torch Generator keyed the same way as :func:`rng_for`."""
    state = np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(2)
    gen = torch.Generator()
    gen.manual_seed(int(state[0]) * 2 ** 31 + int(state[1]) % 2 ** 31)
    return gen


def fibonacci_sphere(n):
    """n nearly uniform unit vectors (numpy, float64, shape [n, 3])."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = GOLDEN_ANGLE * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def fibonacci_sphere_tensor(n):
    return torch.from_numpy(fibonacci_sphere(n)).to(DTYPE)


def normalize(v, eps=1e-12):
    return v / v.norm(dim=-1, keepdim=True).clamp_min(eps)


def orthonormal_basis(n):
    """Tangent and bitangent completing the unit vectors n (torch, [..., 3])."""
    helper = torch.zeros_like(n)
    use_z = n[..., 2].abs() < 0.999
    helper[..., 2] = use_z.to(n.dtype)
    helper[..., 0] = (~use_z).to(n.dtype)
    t = normalize(torch.cross(helper, n, dim=-1))
    b = torch.cross(n, t, dim=-1)
    return t, b


def orthonormal_basis_np(n):
    helper = np.zeros_like(n)
    use_z = np.abs(n[..., 2]) < 0.999
    helper[..., 2] = use_z
    helper[..., 0] = ~use_z
    t = np.cross(helper, n)
    t /= np.linalg.norm(t, axis=-1, keepdims=True)
    b = np.cross(n, t)
    return t, b


def to_world(local, n):
    """Rotate local directions (z along n) into world space."""
    t, b = orthonormal_basis(n)
    return local[..., 0:1] * t + local[..., 1:2] * b + local[..., 2:3] * n


def uniform_hemisphere(n, u1, u2):
    """Uniform directions on the hemisphere around n; pdf 1/(2 pi)."""
    z = u1
    r = torch.sqrt((1.0 - z * z).clamp_min(0.0))
    phi = 2.0 * math.pi * u2
    local = torch.stack([r * torch.cos(phi), r * torch.sin(phi), z], dim=-1)
    return to_world(local, n)


def cosine_hemisphere(n, u1, u2):
    """Cosine-weighted directions around n; pdf cos(theta)/pi."""
    r = torch.sqrt(u1)
    z = torch.sqrt((1.0 - u1).clamp_min(0.0))
    phi = 2.0 * math.pi * u2
    local = torch.stack([r * torch.cos(phi), r * torch.sin(phi), z], dim=-1)
    return to_world(local, n)


def uniform_sphere(u1, u2):
    z = 1.0 - 2.0 * u1
    r = torch.sqrt((1.0 - z * z).clamp_min(0.0))
    phi = 2.0 * math.pi * u2
    return torch.stack([r * torch.cos(phi), r * torch.sin(phi), z], dim=-1)
