import numpy as np
import torch

from sgir.geometry.tracing import second_intersection
from sgir.util.parallel import chunk_ranges, parallel_map
from sgir.util.sampling import DTYPE


def visibility_oracle(octree, scene, x, omega, method="octree"):
    """1 where the ray from x along omega escapes, 0 where it is occluded."""
    hit = second_intersection(octree, scene, x, omega, method)
    return (~hit.valid).astype(np.float64)


class OracleVisibility:
    """Ray-traced V(x, w) with the directional-field calling convention."""

    def __init__(self, octree, scene, method="octree", chunk=65536, threads=1):
        self.octree = octree
        self.scene = scene
        self.method = method
        self.chunk = chunk
        self.threads = threads

    def evaluate(self, x, omega):
        x = torch.as_tensor(x, dtype=DTYPE).detach()
        omega = torch.as_tensor(omega, dtype=DTYPE).detach()
        if omega.dim() == 3:
            xs = x.unsqueeze(1).expand_as(omega).reshape(-1, 3)
            flat_dirs = omega.reshape(-1, 3)
        else:
            xs, flat_dirs = x, omega
        xs = xs.numpy()
        flat_dirs = flat_dirs.numpy()
        parts = parallel_map(
            lambda r: visibility_oracle(self.octree, self.scene, xs[r[0]:r[1]], flat_dirs[r[0]:r[1]], self.method),
            chunk_ranges(len(xs), self.chunk), self.threads)
        values = np.concatenate(parts) if parts else np.zeros(0)
        return torch.from_numpy(values).reshape(omega.shape[:-1])
