"""
Monte Carlo reference renderer.

Each sample combines one environment sample and one BSDF sample with the
balance heuristic. The BSDF half mixes cosine-weighted and NDF sampling
equally. With one bounce enabled, a BSDF sample that hits geometry adds the
radiance leaving the hit point, itself estimated with one MIS sample of
direct light there. Pixels are shaded at their centers; the background is
black. Tiles of pixels draw from random streams keyed by (seed, stream, tile), so
the output does not depend on the thread count.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch

from sgir.geometry.octree import build_octree
from sgir.geometry.tracing import Ray, second_intersection, trace_octree
from sgir.io.image import ImageBuffer
from sgir.oracle.lights import environment_sampler, sample_sg_direction, sg_direction_pdf
from sgir.shading.brdf import Material, brdf_eval
from sgir.util.parallel import chunk_ranges, parallel_map
from sgir.util.sampling import orthonormal_basis_np, rng_for

logger = logging.getLogger(__name__)

DEFAULT_TILE = 256
ORACLE_OCTREE_DEPTH = 7
UNIFORMS_PER_BOUNCE = 6


@dataclass
class RenderContext:
    scene: object
    octree: object
    sampler: object
    materials: object


@dataclass
class RenderResult:
    image: ImageBuffer
    std_error: np.ndarray
    mask: np.ndarray
    albedo: np.ndarray
    roughness: np.ndarray
    normal: np.ndarray
    point: np.ndarray


def make_context(scene, env, materials, octree=None):
    if octree is None:
        octree = build_octree(scene, ORACLE_OCTREE_DEPTH)
    return RenderContext(scene, octree, environment_sampler(env), materials)


def _brdf(albedo, roughness, specular, n, wi, wo):
    mat = Material(torch.from_numpy(albedo), torch.from_numpy(roughness), specular)
    with torch.no_grad():
        value = brdf_eval(mat, torch.from_numpy(n), torch.from_numpy(wi), torch.from_numpy(wo))
    return value.numpy()


def cosine_sample(n, u1, u2):
    r = np.sqrt(u1)
    phi = 2.0 * math.pi * u2
    z = np.sqrt(np.clip(1.0 - u1, 0.0, None))
    t, b = orthonormal_basis_np(n)
    return (r * np.cos(phi))[:, None] * t + (r * np.sin(phi))[:, None] * b + z[:, None] * n


def bsdf_sample(n, wo, roughness, u0, u1, u2):
    """Half cosine-weighted, half mirror-reflected NDF samples."""
    diffuse = cosine_sample(n, u1, u2)
    h = sample_sg_direction(n, 2.0 / roughness ** 4, u1, u2)
    reflected = 2.0 * (wo * h).sum(-1, keepdims=True) * h - wo
    return np.where((u0 < 0.5)[:, None], diffuse, reflected)


def bsdf_pdf(n, wo, roughness, omega):
    """Solid-angle density of bsdf_sample.

    Half vectors h and -h reflect wo to the same direction, so the NDF half
    adds the density of both.
    """
    cos = np.clip((omega * n).sum(-1), 0.0, None)
    h = omega + wo
    norm = np.linalg.norm(h, axis=-1, keepdims=True)
    h = h / np.where(norm > 0, norm, 1.0)
    lam = 2.0 / roughness ** 4
    p_h = sg_direction_pdf(n, lam, h) + sg_direction_pdf(n, lam, -h)
    o_dot_h = np.abs((wo * h).sum(-1))
    p_spec = np.where((norm[:, 0] > 0) & (o_dot_h > 1e-12), p_h / (4.0 * np.maximum(o_dot_h, 1e-12)), 0.0)
    return 0.5 * cos / math.pi + 0.5 * p_spec


def _visible(ctx, x, omega):
    return ~second_intersection(ctx.octree, ctx.scene, x, omega).valid


def direct_mis(ctx, x, n, wo, albedo, roughness, u):
    """One light + one BSDF sample of direct lighting at x toward wo.

    Returns the estimate [P, 3], the BSDF direction, the BSDF throughput
    f cos / pdf and the validity mask of the BSDF direction.
    """
    spec = ctx.materials.specular
    sampler = ctx.sampler
    total = np.zeros((len(x), 3))

    wl = sampler.sample(u[:, 0], u[:, 1], u[:, 2])
    cos_l = (wl * n).sum(-1)
    front = cos_l > 0
    if front.any():
        f = _brdf(albedo[front], roughness[front], spec, n[front], wl[front], wo[front])
        vis = _visible(ctx, x[front], wl[front])
        denom = sampler.pdf(wl[front]) + bsdf_pdf(n[front], wo[front], roughness[front], wl[front])
        le = sampler.radiance(wl[front])
        total[front] += (f * le * (cos_l[front] * vis / np.maximum(denom, 1e-300))[:, None])

    wb = bsdf_sample(n, wo, roughness, u[:, 3], u[:, 4], u[:, 5])
    cos_b = (wb * n).sum(-1)
    p_b = bsdf_pdf(n, wo, roughness, wb)
    ok = (cos_b > 0) & (p_b > 0)
    throughput = np.zeros((len(x), 3))
    hit = None
    if ok.any():
        f = _brdf(albedo[ok], roughness[ok], spec, n[ok], wb[ok], wo[ok])
        hit = second_intersection(ctx.octree, ctx.scene, x[ok], wb[ok])
        le = sampler.radiance(wb[ok])
        denom = sampler.pdf(wb[ok]) + p_b[ok]
        total[ok] += f * le * (cos_b[ok] * ~hit.valid / np.maximum(denom, 1e-300))[:, None]
        throughput[ok] = f * (cos_b[ok] / p_b[ok])[:, None]
    return total, wb, throughput, ok, hit


def outgoing_radiance(ctx, x, n, wo, spp, rng):
    """Mean over spp of the direct radiance leaving x toward wo (no further bounces)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    albedo, roughness = ctx.materials.evaluate(x)
    rep = lambda a: np.repeat(a, spp, axis=0)
    u = rng.random((len(x) * spp, UNIFORMS_PER_BOUNCE))
    est, *_ = direct_mis(ctx, rep(x), rep(n), rep(wo), rep(albedo), rep(roughness), u)
    return est.reshape(len(x), spp, 3).mean(axis=1)


class RadianceOracle:
    """One-bounce outgoing radiance at second-intersection points."""

    def __init__(self, ctx, spp=16, seed=0):
        self.ctx = ctx
        self.spp = spp
        self.seed = seed

    def radiance(self, x, n, wo, key=0):
        return outgoing_radiance(self.ctx, x, n, wo, self.spp, rng_for(self.seed, 0x52, key))


def _shade_tile(ctx, x, n, wo, albedo, roughness, spp, bounce, rng):
    p = len(x)
    rep = lambda a: np.tile(a, (spp,) + (1,) * (a.ndim - 1))
    xs, ns, wos, al, ro = rep(x), rep(n), rep(wo), rep(albedo), rep(roughness)
    u = rng.random((p * spp, 2 * UNIFORMS_PER_BOUNCE))
    est, wb, throughput, ok, hit = direct_mis(ctx, xs, ns, wos, al, ro, u[:, :UNIFORMS_PER_BOUNCE])
    if bounce and hit is not None and hit.valid.any():
        rows = np.flatnonzero(ok)[hit.valid]
        xh = hit.point[hit.valid]
        nh = hit.normal[hit.valid]
        wh = -wb[rows]
        ah, rh = ctx.materials.evaluate(xh)
        indirect, *_ = direct_mis(ctx, xh, nh, wh, ah, rh, u[rows, UNIFORMS_PER_BOUNCE:])
        est[rows] += throughput[rows] * indirect
    samples = est.reshape(spp, p, 3)
    mean = samples.mean(axis=0)
    if spp > 1:
        err = samples.std(axis=0, ddof=1) / math.sqrt(spp)
    else:
        err = np.zeros_like(mean)
    return mean, err


def mc_render(scene, camera, env, materials, spp=64, bounce=1, seed=0, octree=None, threads=1, stream=0,
              tile=DEFAULT_TILE, ctx=None):
    """Monte Carlo HDR render with per-pixel standard errors and ground-truth maps."""
    if spp < 1:
        raise ValueError("spp must be at least 1")
    ctx = ctx or make_context(scene, env, materials, octree)
    origin, direction = camera.rays()
    hits = trace_octree(ctx.octree, scene, Ray.make(origin, direction))
    count = len(origin)
    image = np.zeros((count, 3))
    err = np.zeros((count, 3))
    albedo = np.zeros((count, 3))
    roughness = np.zeros(count)
    hit_idx = np.flatnonzero(hits.valid)
    if len(hit_idx):
        albedo[hit_idx], roughness[hit_idx] = materials.evaluate(hits.point[hit_idx])

    def work(item):
        index, (start, stop) = item
        sel = hit_idx[start:stop]
        return _shade_tile(ctx, hits.point[sel], hits.normal[sel], -direction[sel], albedo[sel], roughness[sel],
                           spp, bounce, rng_for(seed, 0x4D43, stream, index))

    tiles = list(enumerate(chunk_ranges(len(hit_idx), tile)))
    for (index, (start, stop)), (mean, e) in zip(tiles, parallel_map(work, tiles, threads)):
        sel = hit_idx[start:stop]
        image[sel] = mean
        err[sel] = e
    h, w = camera.height, camera.width
    logger.debug("mc render %dx%d: %d hit pixels, spp %d, bounce %d", w, h, len(hit_idx), spp, bounce)
    return RenderResult(
        ImageBuffer.from_flat(image, w, h),
        err.reshape(h, w, 3),
        hits.valid.reshape(h, w),
        albedo.reshape(h, w, 3),
        roughness.reshape(h, w),
        hits.normal.reshape(h, w, 3),
        hits.point.reshape(h, w, 3),
    )
