"""
The four training stages: normals, visibility, indirect light and the final
decomposition into environment, materials and gamma.

Each stage trains a subset of the SceneModel's slices with Adam. A batch is
split into chunks of ``cfg.chunk_size`` whose losses are weighted by their
share of the batch and whose gradients are summed in chunk order, so
``cfg.threads`` only changes wall time. The decomposition's latent sparsity
term is one more piece over the whole batch.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial

import numpy as np
import torch
from tqdm import tqdm

from sgir.fields.gradients import accumulate_gradients
from sgir.fields.params import adam_step
from sgir.geometry.sdf import sdf_normal
from sgir.geometry.surface import sample_surface
from sgir.geometry.tracing import Ray, second_intersection, trace_octree
from sgir.oracle.materials import MaterialSet
from sgir.oracle.render import RadianceOracle, make_context
from sgir.oracle.visibility import OracleVisibility
from sgir.pipeline.forward import shade_batch, stream_seed
from sgir.pipeline.losses import indirect_l1, latent_kl, normal_loss, rgb_mse, smoothness_loss, visibility_bce
from sgir.pipeline.report import LossReport
from sgir.pipeline.rve import rve_loss, rve_warmup_loss
from sgir.sg.lobes import SGMixture
from sgir.tonemap import ToneParams, deformed_forward, deformed_inverse
from sgir.util.parallel import chunk_ranges
from sgir.util.sampling import rng_for, uniform_hemisphere

logger = logging.getLogger(__name__)

NORMALS_KEY = 0x4E
VISIBILITY_KEY = 0x56
INDIRECT_KEY = 0x49
DECOMPOSE_KEY = 0x44


@dataclass
class SurfacePool:
    points: np.ndarray
    normals: np.ndarray


@dataclass
class RayPool:
    """Surface points with one direction each; ``labels`` are oracle visibilities."""
    points: np.ndarray
    normals: np.ndarray
    directions: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass
class PixelPool:
    """Primary hits of every dataset view with the LDR color they must reproduce."""
    points: np.ndarray
    omega_o: np.ndarray
    targets: np.ndarray
    view: np.ndarray
    pixel: np.ndarray

    def __len__(self):
        return len(self.points)


def surface_pool(scene, count, seed, key):
    points = sample_surface(scene, count, rng_for(seed, key))
    return SurfacePool(points, sdf_normal(scene, points))


def hemisphere_directions(normals, per_point, rng):
    """``per_point`` uniform directions [N * per_point, 3] above each normal."""
    u = torch.from_numpy(rng.random((len(normals), per_point, 2)))
    n = torch.from_numpy(np.repeat(normals[:, None, :], per_point, axis=1))
    return uniform_hemisphere(n, u[..., 0], u[..., 1]).reshape(-1, 3).numpy()


def ray_pool(scene, octree, count, per_point, seed, key, threads=1):
    surface = surface_pool(scene, count, seed, key)
    directions = hemisphere_directions(surface.normals, per_point, rng_for(seed, key, 1))
    points = np.repeat(surface.points, per_point, axis=0)
    normals = np.repeat(surface.normals, per_point, axis=0)
    labels = OracleVisibility(octree, scene, threads=threads).evaluate(points, directions).numpy()
    return RayPool(points, normals, directions, labels)


def pixel_pool(dataset, scene, octree):
    points, omega_o, targets, views, pixels = [], [], [], [], []
    for index, view in enumerate(dataset.views):
        origin, direction = view.camera.rays()
        hits = trace_octree(octree, scene, Ray.make(origin, direction))
        sel = np.flatnonzero(hits.valid)
        points.append(hits.point[sel])
        omega_o.append(-direction[sel])
        targets.append(view.ldr.flat()[sel])
        views.append(np.full(len(sel), index))
        pixels.append(sel)
    return PixelPool(np.concatenate(points), np.concatenate(omega_o), np.concatenate(targets),
                     np.concatenate(views), np.concatenate(pixels))


def batches(count, cfg, key, epoch):
    order = rng_for(cfg.seed, key, epoch).permutation(count)
    return [order[start:stop] for start, stop in chunk_ranges(count, cfg.batch_size)]


def optimize_step(model, adam, report, epoch, step, pieces, threads):
    """One Adam step on the sum of ``pieces``; each piece returns named loss terms."""
    parts = [None] * len(pieces)

    def closure(i):
        terms = pieces[i]()
        parts[i] = {name: float(value.detach()) for name, value in terms.items()}
        return sum(terms.values())

    loss, grad = accumulate_gradients([partial(closure, i) for i in range(len(pieces))], model.store, threads)
    losses = {}
    for part in parts:
        for name, value in part.items():
            losses[name] = losses.get(name, 0.0) + value
    losses["total"] = float(loss)
    grad_norm = float((grad * model.store.trainable_mask()).norm())
    report.record(epoch, step, losses, grad_norm)
    adam_step(model.store, grad, adam)


def _train(model, cfg, *names):
    model.apply_lr_scales(cfg.lr_scales)
    model.train_only(*names)


def _chunked(batch, cfg):
    return [(batch[start:stop], (stop - start) / len(batch))
            for start, stop in chunk_ranges(len(batch), cfg.chunk_size)]


def _log_epoch(report, epoch):
    means = report.epoch_means()
    if means:
        logger.info("%s epoch %d: mean loss %.6g", report.stage, epoch, means[-1])


def _normal_terms(model, x, target, jittered, fraction):
    n = model.normals.evaluate(x)
    n_jittered = model.normals.evaluate(jittered)
    return {"normal": fraction * normal_loss(n, target, n_jittered)}


def stage_normals(scene, model, cfg, pool=None):
    """Fit the normal field to SDF normals with the jitter smoothness term."""
    report = LossReport("normals")
    if pool is None:
        pool = surface_pool(scene, cfg.surface_samples, cfg.seed, NORMALS_KEY)
    _train(model, cfg, "normals")
    adam = model.optimizer(cfg.lr)
    lo, hi = scene.bbox
    step = 0
    logger.info("normals: %d surface samples, %d epochs", len(pool.points), cfg.epochs)
    for epoch in tqdm(range(cfg.epochs), desc="normals", disable=not cfg.progress):
        for batch in batches(len(pool.points), cfg, NORMALS_KEY, epoch):
            noise = rng_for(cfg.seed, NORMALS_KEY, 2, epoch, step).normal(size=(len(batch), 3))
            jittered = np.clip(pool.points[batch] + cfg.normal_noise * noise, lo, hi)
            pieces = []
            offset = 0
            for idx, fraction in _chunked(batch, cfg):
                pieces.append(partial(
                    _normal_terms, model, torch.from_numpy(pool.points[idx]), torch.from_numpy(pool.normals[idx]),
                    torch.from_numpy(jittered[offset:offset + len(idx)]), fraction))
                offset += len(idx)
            optimize_step(model, adam, report, epoch, step, pieces, cfg.threads)
            step += 1
        _log_epoch(report, epoch)
    return report


def _visibility_terms(model, x, omega, labels, fraction):
    return {"visibility": fraction * visibility_bce(model.visibility.evaluate(x, omega), labels)}


def stage_visibility(scene, octree, model, cfg, pool=None):
    """Fit V(x, w) to ray-traced labels with binary cross entropy."""
    report = LossReport("visibility")
    if pool is None:
        pool = ray_pool(scene, octree, cfg.surface_samples, cfg.directions_per_point, cfg.seed,
                        VISIBILITY_KEY, cfg.threads)
    _train(model, cfg, "visibility")
    adam = model.optimizer(cfg.lr)
    step = 0
    logger.info("visibility: %d labelled rays (%.1f%% visible), %d epochs", len(pool),
                100.0 * float(pool.labels.mean()) if len(pool) else 0.0, cfg.epochs)
    for epoch in tqdm(range(cfg.epochs), desc="visibility", disable=not cfg.progress):
        for batch in batches(len(pool), cfg, VISIBILITY_KEY, epoch):
            pieces = [partial(_visibility_terms, model, torch.from_numpy(pool.points[idx]),
                              torch.from_numpy(pool.directions[idx]), torch.from_numpy(pool.labels[idx]), fraction)
                      for idx, fraction in _chunked(batch, cfg)]
            optimize_step(model, adam, report, epoch, step, pieces, cfg.threads)
            step += 1
        _log_epoch(report, epoch)
    return report


@dataclass
class IndirectPool:
    """Rays with their one-bounce supervision: LDR radiance leaving the second hit towards x."""
    points: np.ndarray
    directions: np.ndarray
    ldr: np.ndarray
    occluded: np.ndarray

    def __len__(self):
        return len(self.points)


def indirect_pool(scene, octree, cfg, env=None, gamma_gt=0.2, ctx=None):
    if ctx is None:
        env = env if env is not None else SGMixture.from_json(scene.environment)
        ctx = make_context(scene, env, MaterialSet(scene), octree)
    rays = ray_pool(scene, octree, cfg.surface_samples, cfg.directions_per_point, cfg.seed, INDIRECT_KEY,
                    cfg.threads)
    hit = second_intersection(octree, scene, rays.points, rays.directions)
    radiance = np.zeros((len(rays), 3))
    occluded = hit.valid
    if occluded.any():
        oracle = RadianceOracle(ctx, cfg.indirect_spp, cfg.seed)
        radiance[occluded] = oracle.radiance(hit.point[occluded], hit.normal[occluded],
                                             -rays.directions[occluded], key=INDIRECT_KEY)
    with torch.no_grad():
        ldr = deformed_forward(torch.from_numpy(radiance), ToneParams(gamma_gt)).numpy()
    return IndirectPool(rays.points, rays.directions, ldr, occluded)


def log_uniform_gamma(rng, count, gamma_range):
    lo, hi = gamma_range
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=count))


def _indirect_terms(model, x, omega, ldr, gamma, masked, fraction):
    gamma = torch.from_numpy(gamma)
    target = deformed_inverse(ldr, ToneParams(gamma.unsqueeze(-1)))
    predicted = model.indirect.evaluate(x, gamma).evaluate(omega)
    if masked:
        with torch.no_grad():
            v = model.visibility.evaluate(x, omega)
        predicted = (1.0 - v).unsqueeze(-1) * predicted
    return {"indirect": fraction * indirect_l1(predicted, target)}


def stage_indirect(scene, octree, model, cfg, env=None, gamma_gt=0.2, pool=None, ctx=None):
    """Fit the gamma-conditioned indirect SG field to one-bounce oracle radiance.

    With ``cfg.masked_indirect`` only occluded rays are supervised and the
    prediction is masked by (1 - V); otherwise every ray is used, escaping
    rays with a zero target.
    """
    report = LossReport("indirect")
    if pool is None:
        pool = indirect_pool(scene, octree, cfg, env, gamma_gt, ctx)
    use = np.flatnonzero(pool.occluded) if cfg.masked_indirect else np.arange(len(pool))
    if not len(use):
        logger.warning("indirect: no occluded samples; the indirect field keeps its initialization")
        return report
    _train(model, cfg, "indirect")
    adam = model.optimizer(cfg.lr)
    step = 0
    logger.info("indirect: %d supervised rays of %d, %d epochs", len(use), len(pool), cfg.epochs)
    for epoch in tqdm(range(cfg.epochs), desc="indirect", disable=not cfg.progress):
        for batch in batches(len(use), cfg, INDIRECT_KEY, epoch):
            rows = use[batch]
            gammas = log_uniform_gamma(rng_for(cfg.seed, INDIRECT_KEY, 2, epoch, step), len(rows), cfg.gamma_range)
            pieces = []
            offset = 0
            for idx, fraction in _chunked(rows, cfg):
                pieces.append(partial(
                    _indirect_terms, model, torch.from_numpy(pool.points[idx]),
                    torch.from_numpy(pool.directions[idx]), torch.from_numpy(pool.ldr[idx]),
                    gammas[offset:offset + len(idx)], cfg.masked_indirect, fraction))
                offset += len(idx)
            optimize_step(model, adam, report, epoch, step, pieces, cfg.threads)
            step += 1
        _log_epoch(report, epoch)
    return report


def decomposition_terms(model, x, omega_o, target, cfg, seed, warmup, noise, fraction=1.0):
    """Weighted per-pixel loss terms of the final decomposition on one chunk of pixels.

    The latent sparsity term is not among them; see :func:`sparsity_terms`.
    """
    shaded = shade_batch(model, x, omega_o, cfg, seed, blend=not warmup)
    terms = {"rgb": cfg.weight_rgb * rgb_mse(shaded.ldr, target)}
    z = model.material.latent_code(x)
    albedo, roughness = model.material.decode(z)
    albedo_j, roughness_j = model.material.decode(z + cfg.latent_noise * noise)
    decoded = torch.cat([albedo, roughness.unsqueeze(-1)], -1)
    decoded_j = torch.cat([albedo_j, roughness_j.unsqueeze(-1)], -1)
    terms["smooth"] = cfg.weight_sm * smoothness_loss(decoded, decoded_j)
    if shaded.qtilde is not None:
        if warmup:
            terms["rve"] = cfg.weight_rve * rve_warmup_loss(shaded.qtilde, shaded.eta)
        else:
            terms["rve"] = cfg.weight_rve * rve_loss(shaded.qtilde, shaded.eta, cfg.epsilon)
    return {name: fraction * value for name, value in terms.items()}


def sparsity_terms(model, x, cfg):
    """The latent sparsity term of a whole batch; its channel means are taken over every point of x."""
    return {"kl": cfg.weight_kl * latent_kl(model.material.latent_code(x), cfg.rho)}


def decomposition_slices(model, cfg):
    names = ["env", "gamma_logit", *model.material_slices]
    if cfg.finetune_normals:
        names.append("normals")
    if cfg.rve:
        names.append("qtilde")
        if cfg.finetune_visibility:
            names.append("visibility")
    return names


def stage_decompose(dataset, scene, octree, model, cfg, pool=None):
    """Jointly fit environment, materials, gamma and Q-tilde to the dataset's LDR views.

    V and the normals are fine-tuned alongside unless disabled; the normals
    at ``normals_finetune_scale`` times their own learning-rate scale.
    """
    report = LossReport("decompose")
    if pool is None:
        pool = pixel_pool(dataset, scene, octree)
    _train(model, cfg, *decomposition_slices(model, cfg))
    if cfg.finetune_normals:
        model.store.set_lr_scale("normals", cfg.lr_scales["normals"] * cfg.normals_finetune_scale)
    adam = model.optimizer(cfg.lr)
    step = 0
    logger.info("decompose: %d pixels from %d views, %d epochs, rve %s", len(pool), len(dataset), cfg.epochs,
                "on" if cfg.rve else "off")
    for epoch in tqdm(range(cfg.epochs), desc="decompose", disable=not cfg.progress):
        warmup = cfg.rve and epoch < cfg.rve_warmup_epochs
        for batch in batches(len(pool), cfg, DECOMPOSE_KEY, epoch):
            noise_rng = rng_for(cfg.seed, DECOMPOSE_KEY, 2, epoch, step)
            noise = torch.from_numpy(noise_rng.normal(size=(len(batch), model.fields.latent_channels)))
            pieces = []
            offset = 0
            for chunk, (idx, fraction) in enumerate(_chunked(batch, cfg)):
                pieces.append(partial(
                    decomposition_terms, model, torch.from_numpy(pool.points[idx]),
                    torch.from_numpy(pool.omega_o[idx]), torch.from_numpy(pool.targets[idx]), cfg,
                    stream_seed(cfg.seed, DECOMPOSE_KEY, epoch, step, chunk), warmup,
                    noise[offset:offset + len(idx)], fraction))
                offset += len(idx)
            pieces.append(partial(sparsity_terms, model, torch.from_numpy(pool.points[batch]), cfg))
            optimize_step(model, adam, report, epoch, step, pieces, cfg.threads)
            step += 1
        _log_epoch(report, epoch)
    logger.info("decompose: learned gamma %.4f", model.gamma())
    return report


