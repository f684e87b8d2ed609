"""
Image and decomposition metrics.
"""

import logging
import math

import numpy as np
import torch

from sgir.errors import DimensionMismatch
from sgir.geometry.tracing import Ray, trace_octree
from sgir.io.image import ImageBuffer
from sgir.oracle.lights import LUMINANCE
from sgir.oracle.visibility import OracleVisibility, visibility_oracle
from sgir.shading.visibility import ETA_SAMPLES, visibility_ratios

logger = logging.getLogger(__name__)

PSNR_SENTINEL = 99.0


def _pixels(pred, gt):
    a = pred.data if isinstance(pred, ImageBuffer) else np.asarray(pred, dtype=np.float64)
    b = gt.data if isinstance(gt, ImageBuffer) else np.asarray(gt, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(pred, gt):
    """PSNR in dB over [0, 1] values; identical inputs give the 99 dB sentinel."""
    a, b = _pixels(pred, gt)
    mse = float(np.mean((a - b) ** 2))
    if mse <= 0.0:
        return PSNR_SENTINEL
    return min(PSNR_SENTINEL, -10.0 * math.log10(mse))


def mae(pred, gt):
    a, b = _pixels(pred, gt)
    return float(np.mean(np.abs(a - b)))


def metrics(pred, gt):
    """{"psnr", "mae"} of two LDR images of the same size.

    Raises:
        DimensionMismatch: the images differ in size
    """
    return {"psnr": psnr(pred, gt), "mae": mae(pred, gt)}


def align_channel_scale(pred, gt, mask=None):
    """Per-channel least-squares scale s minimizing |s pred - gt| over mask; returns s pred."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    sel = np.ones(pred.shape[:-1], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    p = pred[sel]
    g = gt[sel]
    denom = (p * p).sum(axis=0)
    scale = np.where(denom > 0, (p * g).sum(axis=0) / np.where(denom > 0, denom, 1.0), 1.0)
    return pred * scale


def albedo_mae(pred, gt, mask=None):
    """MAE of albedo maps after per-channel scale alignment, over mask."""
    aligned = align_channel_scale(pred, gt, mask)
    sel = np.ones(aligned.shape[:-1], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not sel.any():
        return 0.0
    return float(np.mean(np.abs(aligned[sel] - np.asarray(gt)[sel])))


def _lobe_power(mixture):
    g = mixture.detach().lobes
    lam = g.sharpness.reshape(-1).numpy()
    integral = 2.0 * math.pi * -np.expm1(-2.0 * lam) / lam
    amplitude = g.amplitude.expand(mixture.count, 3).numpy()
    return (amplitude @ LUMINANCE) * integral, g.lobe_axis.expand(mixture.count, 3).numpy()


def shadow_mask(scene, octree, camera, env):
    """Pixels whose strongest direct lobe is occluded according to the ray tracer.

    The strongest lobe of a pixel maximizes luminance integral times max(axis . n, 0).
    """
    origin, direction = camera.rays()
    hits = trace_octree(octree, scene, Ray.make(origin, direction))
    mask = np.zeros(len(origin), dtype=bool)
    sel = np.flatnonzero(hits.valid)
    if len(sel):
        power, axes = _lobe_power(env)
        facing = np.clip(hits.normal[sel] @ axes.T, 0.0, None) * power
        strongest = np.argmax(facing, axis=1)
        lit = facing[np.arange(len(sel)), strongest] > 0.0
        blocked = visibility_oracle(octree, scene, hits.point[sel], axes[strongest]) < 0.5
        mask[sel] = lit & blocked
    return mask.reshape(camera.height, camera.width)


def shadow_albedo_gap(pred_albedo, gt_albedo, shadow, valid):
    """Mean |predicted albedo in shadow - out of shadow| across ground-truth materials.

    Materials are grouped by their exact ground-truth albedo; groups missing
    either side are skipped. Returns NaN when no group has both.
    """
    pred = np.asarray(pred_albedo, dtype=np.float64)
    gt = np.asarray(gt_albedo, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    shadow = np.asarray(shadow, dtype=bool) & valid
    lit = valid & ~shadow
    keys, groups = np.unique(gt[valid], axis=0, return_inverse=True)
    labels = np.full(valid.shape, -1)
    labels[valid] = groups.reshape(-1)
    gaps = []
    weights = []
    for k in range(len(keys)):
        in_shadow = shadow & (labels == k)
        in_light = lit & (labels == k)
        if in_shadow.any() and in_light.any():
            gaps.append(np.abs(pred[in_shadow].mean(axis=0) - pred[in_light].mean(axis=0)).mean())
            weights.append(in_shadow.sum())
    if not gaps:
        logger.warning("no material is seen both in and out of shadow")
        return float("nan")
    return float(np.average(gaps, weights=weights))


def visibility_accuracy(field, octree, scene, x, omega, threshold=0.5):
    """Fraction of (x, omega) pairs where the field agrees with the ray tracer."""
    labels = visibility_oracle(octree, scene, np.asarray(x), np.asarray(omega))
    with torch.no_grad():
        pred = field.evaluate(torch.as_tensor(x), torch.as_tensor(omega)).numpy().reshape(-1)
    return float(np.mean((pred > threshold) == (labels > 0.5)))


def eta_agreement(field, octree, scene, x, n, mixture, samples=ETA_SAMPLES, seed=0):
    """Mean |eta_field - eta_oracle| over every (point, lobe) pair."""
    oracle = OracleVisibility(octree, scene)
    with torch.no_grad():
        learned = visibility_ratios(x, n, mixture, field, samples, seed)
        traced = visibility_ratios(x, n, mixture, oracle, samples, seed)
    return float((learned - traced).abs().mean())


def normal_angular_error(pred, gt):
    """Mean angle in degrees between two sets of unit normals."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 3)
    cos = np.clip((pred * gt).sum(axis=-1), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)).mean())
