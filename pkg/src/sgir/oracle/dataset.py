"""
Ground-truth datasets rendered by the Monte Carlo oracle.

On disk a dataset is a directory::

    cameras.json            one camera per view
    view_000.pfm            HDR render
    view_000_ldr.pfm        tone-mapped LDR (float)
    view_000.png            LDR preview
    gt_albedo.pfm           per-view albedo maps stacked vertically, view 0 on top
    gt_roughness.pfm        per-view roughness maps, same stacking
    gt_env.json             the environment SG mixture
    meta.json               gamma_gt, seed, spp, bounce, resolution and scene config

Background pixels carry zero roughness; the hit mask is recovered from that
on load.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch
from tqdm import tqdm

from sgir.errors import ValidationError
from sgir.geometry.octree import build_octree
from sgir.geometry.sdf import SdfScene
from sgir.io.image import ImageBuffer
from sgir.io.pfm import read_pfm, write_pfm
from sgir.io.png import write_png
from sgir.oracle.camera import Camera, orbit_cameras
from sgir.oracle.materials import MaterialSet
from sgir.oracle.render import make_context, mc_render
from sgir.sg.lobes import SGMixture
from sgir.tonemap import ToneParams, deformed_forward

logger = logging.getLogger(__name__)

CAMERA_RADIUS = 3.5
CAMERA_FOV = 40.0
DATASET_OCTREE_DEPTH = 7


@dataclass
class DatasetView:
    camera: Camera
    ldr: ImageBuffer
    hdr: Optional[ImageBuffer] = None
    albedo: Optional[np.ndarray] = None
    roughness: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None


@dataclass
class Dataset:
    """Posed LDR views with the ground truth they were rendered from."""
    views: List[DatasetView]
    env: SGMixture
    gamma_gt: float
    scene_config: dict = field(default_factory=dict)
    seed: int = 0
    spp: int = 0
    bounce: int = 1

    def __post_init__(self):
        if not self.views:
            raise ValidationError("a dataset needs at least one view")
        shape = self.views[0].ldr.data.shape
        for view in self.views:
            if view.ldr.data.shape != shape:
                raise ValidationError("all dataset views must share one resolution")

    @property
    def width(self):
        return self.views[0].ldr.width

    @property
    def height(self):
        return self.views[0].ldr.height

    @property
    def tone(self):
        return ToneParams(self.gamma_gt)

    def scene(self):
        return SdfScene.from_config(self.scene_config)

    def __len__(self):
        return len(self.views)


def tone_map_view(hdr, gamma):
    """LDR image of an HDR image, both rounded to the float32 values stored on disk."""
    data = hdr.data.astype(np.float32).astype(np.float64)
    ldr = deformed_forward(torch.from_numpy(data), ToneParams(gamma)).numpy()
    return ImageBuffer(data), ImageBuffer(ldr.astype(np.float32).astype(np.float64))


def _scene_of(scene_config):
    if isinstance(scene_config, SdfScene):
        return scene_config, scene_config.to_config()
    return SdfScene.from_config(scene_config), scene_config


def make_dataset(scene_config, views, spp=64, gamma_gt=0.2, seed=0, width=64, height=64, bounce=1,
                 threads=1, env=None, progress=False, octree=None):
    """Render ``views`` orbit views of a scene and tone map them with gamma_gt."""
    if views < 1:
        raise ValidationError("views must be at least 1")
    ToneParams(gamma_gt)
    scene, config = _scene_of(scene_config)
    if env is None:
        if not scene.environment:
            raise ValidationError("scene config has no environment and none was given")
        env = SGMixture.from_json(scene.environment)
    materials = MaterialSet(scene)
    octree = octree or build_octree(scene, DATASET_OCTREE_DEPTH)
    ctx = make_context(scene, env, materials, octree)
    cameras = orbit_cameras(views, scene.center, CAMERA_RADIUS, CAMERA_FOV, width, height)
    logger.info("rendering %d views at %dx%d, spp %d", views, width, height, spp)
    out = []
    for index, camera in enumerate(tqdm(cameras, desc="views", disable=not progress)):
        result = mc_render(scene, camera, env, materials, spp, bounce, seed=seed, stream=index,
                           threads=threads, ctx=ctx)
        hdr, ldr = tone_map_view(result.image, gamma_gt)
        out.append(DatasetView(camera, ldr, hdr, result.albedo, result.roughness, result.mask))
        logger.info("view %d/%d done", index + 1, views)
    return Dataset(out, env, float(gamma_gt), config, seed, spp, bounce)


def save_dataset(dataset, directory):
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "cameras.json").write_text(json.dumps([v.camera.to_json() for v in dataset.views], indent=2))
    for index, view in enumerate(dataset.views):
        if view.hdr is not None:
            write_pfm(root / f"view_{index:03d}.pfm", view.hdr)
        write_pfm(root / f"view_{index:03d}_ldr.pfm", view.ldr)
        write_png(root / f"view_{index:03d}.png", view.ldr)
    if all(v.albedo is not None for v in dataset.views):
        write_pfm(root / "gt_albedo.pfm", ImageBuffer(np.concatenate([v.albedo for v in dataset.views])))
        write_pfm(root / "gt_roughness.pfm", ImageBuffer(np.concatenate([v.roughness for v in dataset.views])))
    (root / "gt_env.json").write_text(json.dumps(dataset.env.to_json(), indent=2))
    meta = {
        "gamma_gt": dataset.gamma_gt,
        "seed": dataset.seed,
        "spp": dataset.spp,
        "bounce": dataset.bounce,
        "resolution": [dataset.width, dataset.height],
        "views": len(dataset),
        "scene": dataset.scene_config,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2))


def _split(image, views, height):
    if image is None:
        return [None] * views
    return [image.data[i * height:(i + 1) * height] for i in range(views)]


def load_dataset(directory):
    root = Path(directory)
    if not (root / "meta.json").exists():
        raise ValidationError(f"not a dataset directory: {root}")
    meta = json.loads((root / "meta.json").read_text())
    cameras = [Camera.from_json(c) for c in json.loads((root / "cameras.json").read_text())]
    height = meta["resolution"][1]
    albedo_path = root / "gt_albedo.pfm"
    albedo = _split(read_pfm(albedo_path) if albedo_path.exists() else None, len(cameras), height)
    rough_path = root / "gt_roughness.pfm"
    roughness = _split(read_pfm(rough_path) if rough_path.exists() else None, len(cameras), height)
    views = []
    for index, camera in enumerate(cameras):
        hdr_path = root / f"view_{index:03d}.pfm"
        hdr = read_pfm(hdr_path) if hdr_path.exists() else None
        ldr = read_pfm(root / f"view_{index:03d}_ldr.pfm")
        rough = roughness[index][..., 0] if roughness[index] is not None else None
        mask = rough > 0.0 if rough is not None else None
        views.append(DatasetView(camera, ldr, hdr, albedo[index], rough, mask))
    env = SGMixture.from_json(json.loads((root / "gt_env.json").read_text()))
    return Dataset(views, env, float(meta["gamma_gt"]), meta.get("scene", {}), meta.get("seed", 0),
                   meta.get("spp", 0), meta.get("bounce", 1))
