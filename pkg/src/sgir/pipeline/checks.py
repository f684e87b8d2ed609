"""
Finite-difference checks of every stage loss on a handful of samples.
"""

import logging
from functools import partial

import numpy as np
import torch

from sgir.fields.gradients import gradcheck
from sgir.pipeline.losses import indirect_l1, normal_loss, visibility_bce
from sgir.pipeline.rve import rve_loss
from sgir.pipeline.stages import (
    decomposition_slices,
    decomposition_terms,
    hemisphere_directions,
    pixel_pool,
    sparsity_terms,
    surface_pool,
)
from sgir.shading.visibility import visibility_ratios
from sgir.tonemap import ToneParams, deformed_inverse
from sgir.util.sampling import rng_for

logger = logging.getLogger(__name__)

CHECK_KEY = 0x47
CHECK_POINTS = 16
CROP = 4
GRADCHECK_COORDS = 128


def _normals_loss(model, x, target, jittered):
    return normal_loss(model.normals.evaluate(x), target, model.normals.evaluate(jittered))


def _visibility_loss(model, x, omega, labels):
    return visibility_bce(model.visibility.evaluate(x, omega), labels)


def _indirect_loss(model, x, omega, gamma):
    target = deformed_inverse(torch.full((len(x), 3), 0.3, dtype=x.dtype), ToneParams(gamma.unsqueeze(-1)))
    return indirect_l1(model.indirect.evaluate(x, gamma).evaluate(omega), target)


def _rve_loss(model, x, n, cfg):
    eta = visibility_ratios(x, n, model.env_mixture(), model.visibility, cfg.eta_samples, cfg.seed)
    return rve_loss(model.qtilde.evaluate(x), eta, cfg.epsilon)


def _decompose_loss(model, x, omega_o, target, cfg, noise):
    terms = decomposition_terms(model, x, omega_o, target, cfg, cfg.seed, False, noise)
    terms.update(sparsity_terms(model, x, cfg))
    return sum(terms.values())


def _crop_rows(pool, dataset):
    """Pool rows of the CROP x CROP pixels around the center of view 0."""
    w, h = dataset.width, dataset.height
    cols = np.arange(CROP) + (w - CROP) // 2
    rows = np.arange(CROP) + (h - CROP) // 2
    pixels = (rows[:, None] * w + cols[None, :]).reshape(-1)
    picked = np.flatnonzero((pool.view == 0) & np.isin(pool.pixel, pixels))
    if not len(picked):
        logger.warning("gradcheck crop misses the geometry; using the first %d pixels instead", CROP * CROP)
        picked = np.arange(min(CROP * CROP, len(pool)))
    return picked


def _indices(store, names):
    return np.concatenate([np.arange(store.slices[n].start, store.slices[n].stop) for n in names])


def loss_closures(model, scene, cfg, dataset=None, octree=None):
    """Stage name -> (loss closure, slice names it should be differentiated in)."""
    rng = rng_for(cfg.seed, CHECK_KEY)
    surface = surface_pool(scene, CHECK_POINTS, cfg.seed, CHECK_KEY)
    x = torch.from_numpy(surface.points)
    n = torch.from_numpy(surface.normals)
    omega = torch.from_numpy(hemisphere_directions(surface.normals, 1, rng))
    jittered = x + cfg.normal_noise * torch.from_numpy(rng.normal(size=(len(x), 3)))
    labels = torch.from_numpy((rng.random(len(x)) < 0.5).astype(np.float64))
    gamma = torch.from_numpy(rng.uniform(cfg.gamma_range[0], cfg.gamma_range[1], size=len(x)))
    checks = {
        "normals": (partial(_normals_loss, model, x, n, jittered), ["normals"]),
        "visibility": (partial(_visibility_loss, model, x, omega, labels), ["visibility"]),
        "indirect": (partial(_indirect_loss, model, x, omega, gamma), ["indirect"]),
        "rve": (partial(_rve_loss, model, x, n, cfg), ["qtilde", "visibility"]),
    }
    if dataset is not None and octree is not None:
        pool = pixel_pool(dataset, scene, octree)
        rows = _crop_rows(pool, dataset)
        px = torch.from_numpy(pool.points[rows])
        wo = torch.from_numpy(pool.omega_o[rows])
        target = torch.from_numpy(pool.targets[rows])
    else:
        px, wo = x, n
        target = torch.full((len(x), 3), 0.5, dtype=x.dtype)
    noise = torch.from_numpy(rng.normal(size=(len(px), model.fields.latent_channels)))
    checks["decompose"] = (partial(_decompose_loss, model, px, wo, target, cfg, noise),
                           decomposition_slices(model, cfg))
    return checks


def run_gradchecks(model, scene, cfg, dataset=None, octree=None, coords=GRADCHECK_COORDS, h=1e-6, only=None):
    """Stage name -> GradcheckReport; logs a summary line per stage."""
    reports = {}
    for name, (closure, slices) in loss_closures(model, scene, cfg, dataset, octree).items():
        if only and name not in only:
            continue
        report = gradcheck(closure, model.store, coords, h, cfg.seed, _indices(model.store, slices))
        level = logging.INFO if report.passed else logging.WARNING
        logger.log(level, "gradcheck %s: max relative error %.3e over %d coordinates", name,
                   report.max_relative_error, len(report.coords))
        reports[name] = report
    return reports
