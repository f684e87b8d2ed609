"""
Using a trained decomposition: view rendering, shadow removal, relighting
and fitting SG environments to equirect maps.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
from tqdm import tqdm

from sgir.fields.params import AdamState, ParamStore, adam_step
from sgir.geometry.tracing import Ray, trace_octree
from sgir.io.image import ImageBuffer
from sgir.oracle.lights import LUMINANCE
from sgir.pipeline.forward import shade_batch, stream_seed
from sgir.shading.light import EnvLight, EnvLightParams, EquirectMap
from sgir.util.parallel import chunk_ranges
from sgir.util.sampling import DTYPE, fibonacci_sphere

logger = logging.getLogger(__name__)

RENDER_KEY = 0x52
RENDER_CHUNK = 1024
FIT_SAMPLES = 10_000
FIT_STEPS = 2000
FIT_LR = 0.02
FIT_SHARPNESS = 10.0


@dataclass
class ViewRender:
    """An LDR render with its HDR radiance and decoded per-pixel maps."""
    image: ImageBuffer
    hdr: ImageBuffer
    albedo: np.ndarray
    roughness: np.ndarray
    normal: np.ndarray
    mask: np.ndarray


def render_view(model, scene, octree, camera, cfg, env=None, deshadow=False):
    """Render a camera with the trained model; the background stays black."""
    origin, direction = camera.rays()
    hits = trace_octree(octree, scene, Ray.make(origin, direction))
    count = len(origin)
    ldr = np.zeros((count, 3))
    hdr = np.zeros((count, 3))
    albedo = np.zeros((count, 3))
    roughness = np.zeros(count)
    normal = np.zeros((count, 3))
    sel = np.flatnonzero(hits.valid)
    with torch.no_grad():
        for chunk, (start, stop) in enumerate(chunk_ranges(len(sel), RENDER_CHUNK)):
            rows = sel[start:stop]
            shaded = shade_batch(model, torch.from_numpy(hits.point[rows]), torch.from_numpy(-direction[rows]), cfg,
                                 stream_seed(cfg.seed, RENDER_KEY, chunk), env=env, deshadow=deshadow)
            ldr[rows] = shaded.ldr.numpy()
            hdr[rows] = shaded.hdr.numpy()
            albedo[rows] = shaded.albedo.numpy()
            roughness[rows] = shaded.roughness.numpy()
            normal[rows] = shaded.normal.numpy()
    h, w = camera.height, camera.width
    return ViewRender(ImageBuffer.from_flat(ldr, w, h), ImageBuffer.from_flat(hdr, w, h), albedo.reshape(h, w, 3),
                      roughness.reshape(h, w), normal.reshape(h, w, 3), hits.valid.reshape(h, w))


def deshadow_render(model, scene, octree, camera, cfg):
    """Re-shade with every visibility ratio set to 1; indirect light is unchanged."""
    return render_view(model, scene, octree, camera, cfg, deshadow=True).image


def relight_render(model, scene, octree, camera, env, cfg, fit_steps=FIT_STEPS):
    """Shade the trained materials and normals under a new SG mixture or equirect map."""
    if isinstance(env, EquirectMap):
        env, error = fit_env(env, steps=fit_steps, lobes=model.fields.env_lobes)
        logger.info("relight: fitted the equirect map with relative L2 error %.4f", error)
    return render_view(model, scene, octree, camera, cfg, env=env).image


def _initial_lobes(target, dirs, axes, sharpness):
    """Raw env parameters: amplitudes from the map at each axis, brightest direction claimed by its nearest lobe."""
    lobes = len(axes)
    # M Fibonacci lobes of sharpness s sum to about M / (2 s) anywhere on the sphere
    coverage = lobes / (2.0 * sharpness)
    nearest = np.argmax(axes @ dirs.T, axis=1)
    amplitude = np.maximum(target[nearest] / coverage, 1e-4)
    brightest = int(np.argmax(target @ LUMINANCE))
    claim = int(np.argmax(axes @ dirs[brightest]))
    axes = axes.copy()
    axes[claim] = dirs[brightest]
    amplitude[claim] = np.maximum(target[brightest] / max(coverage, 1.0), 1e-4)
    return axes, amplitude


def fit_env(env_map, lobes=128, steps=FIT_STEPS, samples=FIT_SAMPLES, lr=FIT_LR, progress=False):
    """Fit an SG mixture to an equirect map by L2 on Fibonacci sample directions.

    Returns the EnvLight and the relative L2 error of the fit on the samples.
    """
    dirs = fibonacci_sphere(samples)
    target = env_map.evaluate(dirs)
    store = ParamStore()
    params = EnvLightParams(store, "env", lobes, init_sharpness=FIT_SHARPNESS)
    axes, amplitude = _initial_lobes(target, dirs, fibonacci_sphere(lobes), FIT_SHARPNESS)
    raw = store.value("env")
    raw[:, 0:3] = torch.from_numpy(axes)
    raw[:, 4:7] = torch.from_numpy(amplitude + np.log(-np.expm1(-amplitude)))
    store.set_value("env", raw)
    adam = AdamState.for_store(store, lr)
    omega = torch.from_numpy(dirs).to(DTYPE)
    goal = torch.from_numpy(target).to(DTYPE)
    for _ in tqdm(range(steps), desc="fit env", disable=not progress):
        loss = ((params.mixture().evaluate(omega) - goal) ** 2).mean()
        (grad,) = torch.autograd.grad(loss, store.flat)
        adam_step(store, grad, adam)
    with torch.no_grad():
        mixture = params.mixture()
        fitted = mixture.evaluate(omega)
        norm = float(goal.norm())
        error = float((fitted - goal).norm()) / norm if norm > 0 else float(fitted.norm())
    logger.info("fit_env: %d lobes, %d steps, relative L2 error %.4f", lobes, steps, error)
    return EnvLight(mixture.detach().lobes, lobes), error
