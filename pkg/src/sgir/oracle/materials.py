"""
Ground-truth materials attached to scene primitives.

A primitive's material is either constant ({"albedo", "roughness"}) or a
checkerboard in the xz plane ({"checker": {"albedo_a", "albedo_b", "size"},
"roughness"}).
"""

import numpy as np

from sgir.errors import ValidationError
from sgir.shading.brdf import SPECULAR_REFLECTANCE, Material

DEFAULT_MATERIAL = {"albedo": [0.5, 0.5, 0.5], "roughness": 0.5}


class MaterialSet:
    def __init__(self, scene, entries=None, specular=SPECULAR_REFLECTANCE):
        self.scene = scene
        self.entries = [dict(DEFAULT_MATERIAL, **e) if e else dict(DEFAULT_MATERIAL)
                        for e in (entries if entries is not None else scene.materials)]
        if len(self.entries) != len(scene.primitives):
            raise ValidationError("one material per primitive is required")
        self.specular = specular

    def evaluate(self, points):
        """Albedo [N, 3] and roughness [N] at surface points."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        albedo = np.zeros((len(points), 3))
        roughness = np.zeros(len(points))
        owner = self.scene.primitive_index(points) if len(points) else np.zeros(0, dtype=np.int64)
        for i, entry in enumerate(self.entries):
            mask = owner == i
            if not mask.any():
                continue
            roughness[mask] = float(entry["roughness"])
            checker = entry.get("checker")
            if checker:
                size = float(checker.get("size", 0.5))
                cell = np.floor(points[mask, 0] / size) + np.floor(points[mask, 2] / size)
                odd = (cell.astype(np.int64) % 2 == 1)[:, None]
                albedo[mask] = np.where(odd, checker["albedo_b"], checker["albedo_a"])
            else:
                albedo[mask] = entry["albedo"]
        return albedo, roughness

    def material(self, points):
        albedo, roughness = self.evaluate(points)
        return Material(albedo, roughness, self.specular)
