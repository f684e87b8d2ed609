"""
Conservative occupancy octree over an SDF scene.

Levels are stored as dense boolean grids (level l has 2^l cells per axis).
A cell is occupied when |sdf(center)| <= L * half_diagonal + tolerance, L
being the scene's Lipschitz bound and tolerance the tracers' hit threshold, so
no point within the hit threshold of the surface lies in an empty cell.
Children of empty cells are empty.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from sgir.errors import ValidationError
from sgir.geometry.sdf import SURFACE_TOLERANCE

logger = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 8


@dataclass
class Octree:
    bbox: np.ndarray
    max_depth: int
    levels: list = field(default_factory=list)

    @property
    def leaf_size(self):
        return (self.bbox[1] - self.bbox[0]) / (2 ** self.max_depth)

    def cell_size(self, level):
        return (self.bbox[1] - self.bbox[0]) / (2 ** level)

    @property
    def leaf_count(self):
        return int(self.levels[-1].sum())

    @property
    def node_count(self):
        return int(sum(level.sum() for level in self.levels))

    def leaf_index(self, p):
        """Integer leaf coordinates [N, 3] of points, clamped to the grid."""
        res = 2 ** self.max_depth
        idx = np.floor((np.asarray(p) - self.bbox[0]) / self.leaf_size).astype(np.int64)
        return np.clip(idx, 0, res - 1)

    def contains_occupied(self, p):
        idx = self.leaf_index(p)
        return self.levels[-1][idx[:, 0], idx[:, 1], idx[:, 2]]

    def coarsest_empty_level(self, leaf_idx):
        """For each leaf index, the coarsest level whose enclosing cell is empty (-1 if none)."""
        result = np.full(len(leaf_idx), -1, dtype=np.int64)
        undecided = np.ones(len(leaf_idx), dtype=bool)
        for level, grid in enumerate(self.levels):
            cell = leaf_idx >> (self.max_depth - level)
            empty = ~grid[cell[:, 0], cell[:, 1], cell[:, 2]]
            take = undecided & empty
            result[take] = level
            undecided &= ~empty
            if not undecided.any():
                break
        return result


def cell_centers(bbox, level, cells):
    size = (bbox[1] - bbox[0]) / (2 ** level)
    return bbox[0] + (cells + 0.5) * size


def build_octree(scene, max_depth=DEFAULT_MAX_DEPTH):
    """Hierarchical conservative occupancy down to ``max_depth``."""
    bbox = scene.bbox
    lipschitz = scene.lipschitz
    levels = []
    candidates = np.zeros((1, 3), dtype=np.int64)
    for level in range(max_depth + 1):
        res = 2 ** level
        grid = np.zeros((res, res, res), dtype=bool)
        if len(candidates):
            size = (bbox[1] - bbox[0]) / res
            half_diagonal = 0.5 * np.linalg.norm(size)
            d = scene.distance(cell_centers(bbox, level, candidates))
            occupied = candidates[np.abs(d) <= lipschitz * half_diagonal + SURFACE_TOLERANCE]
            grid[occupied[:, 0], occupied[:, 1], occupied[:, 2]] = True
            offsets = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.int64)
            candidates = (2 * occupied[:, None, :] + offsets[None]).reshape(-1, 3)
        levels.append(grid)
    octree = Octree(bbox.copy(), max_depth, levels)
    logger.info("octree depth %d: %d occupied nodes, %d occupied leaves",
                max_depth, octree.node_count, octree.leaf_count)
    return octree


def brute_force_occupancy(scene, depth):
    """Per-leaf classification without the hierarchy (reference for tests)."""
    res = 2 ** depth
    cells = np.stack(np.meshgrid(np.arange(res), np.arange(res), np.arange(res), indexing="ij"), -1).reshape(-1, 3)
    size = (scene.bbox[1] - scene.bbox[0]) / res
    d = scene.distance(cell_centers(scene.bbox, depth, cells))
    return (np.abs(d) <= scene.lipschitz * 0.5 * np.linalg.norm(size) + SURFACE_TOLERANCE).reshape(res, res, res)


def save_octree(path, octree):
    """Write the occupancy levels as a compressed .npz archive."""
    levels = {f"level_{i}": grid for i, grid in enumerate(octree.levels)}
    np.savez_compressed(path, bbox=octree.bbox, max_depth=np.int64(octree.max_depth), **levels)


def load_octree(path):
    try:
        archive = np.load(path)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read octree {path}: {exc}") from exc
    with archive:
        if "bbox" not in archive or "max_depth" not in archive:
            raise ValidationError(f"{path} is not an octree archive")
        depth = int(archive["max_depth"])
        levels = []
        for level in range(depth + 1):
            key = f"level_{level}"
            res = 2 ** level
            if key not in archive or archive[key].shape != (res, res, res):
                raise ValidationError(f"{path}: level {level} missing or not {res}^3")
            levels.append(archive[key].astype(bool))
        return Octree(archive["bbox"].astype(np.float64), depth, levels)
