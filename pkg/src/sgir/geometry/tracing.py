"""
Ray tracing against SDF scenes.

Both tracers are vectorized over ray batches and clip rays to the scene bbox
first. sphere_trace is the reference; trace_octree skips empty octree cells
and root-finds inside occupied leaves.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sgir.geometry.sdf import SURFACE_TOLERANCE, as_points

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 0.9
MAX_SPHERE_STEPS = 512
BISECTION_STEPS = 30
LEAF_SAMPLES = 9
SECONDARY_OFFSET = 3e-3
POLISH_DOUBLINGS = 8


@dataclass
class Ray:
    """A batch of rays; t ranges are [t_min, t_max]."""
    origin: np.ndarray
    direction: np.ndarray
    t_min: np.ndarray
    t_max: np.ndarray

    @classmethod
    def make(cls, origin, direction, t_min=0.0, t_max=np.inf):
        origin = as_points(origin)
        direction = as_points(direction)
        direction = direction / np.linalg.norm(direction, axis=-1, keepdims=True)
        n = max(len(origin), len(direction))
        origin = np.broadcast_to(origin, (n, 3)).copy()
        direction = np.broadcast_to(direction, (n, 3)).copy()
        t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,)).copy()
        t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,)).copy()
        if (t_min < 0).any() or (t_max <= t_min).any():
            raise ValueError("rays need 0 <= t_min < t_max")
        return cls(origin, direction, t_min, t_max)

    def __len__(self):
        return len(self.origin)

    def at(self, t, idx=None):
        if idx is None:
            return self.origin + t[:, None] * self.direction
        return self.origin[idx] + t[:, None] * self.direction[idx]


@dataclass
class Hit:
    """Per-ray hits; ``capped`` marks rays that ran out of iterations and count as misses."""
    valid: np.ndarray
    t: np.ndarray
    point: np.ndarray
    normal: np.ndarray
    capped: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.capped is None:
            self.capped = np.zeros(len(self.valid), dtype=bool)

    def __len__(self):
        return len(self.valid)


def clip_to_bbox(rays, bbox):
    """Slab test: the [t0, t1] interval of each ray inside bbox (t0 > t1 when disjoint)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / rays.direction
        ta = (bbox[0] - rays.origin) * inv
        tb = (bbox[1] - rays.origin) * inv
    lo = np.where(np.isnan(ta), -np.inf, np.minimum(ta, tb))
    hi = np.where(np.isnan(tb), np.inf, np.maximum(ta, tb))
    t0 = np.maximum(lo.max(axis=-1), rays.t_min)
    t1 = np.minimum(hi.min(axis=-1), rays.t_max)
    return t0, t1


def _finish(scene, rays, valid, t, capped=None):
    point = np.zeros((len(rays), 3))
    normal = np.zeros((len(rays), 3))
    if valid.any():
        point[valid] = rays.at(t[valid], valid)
        grad = scene.root.gradient(point[valid])
        norm = np.linalg.norm(grad, axis=-1, keepdims=True)
        normal[valid] = grad / np.where(norm > 0, norm, 1.0)
    t = np.where(valid, t, np.inf)
    return Hit(valid, t, point, normal, capped)


def _bisect(scene, rays, idx, lo, hi, level=0.0):
    """Root of sdf - level on [lo, hi] where f(lo) > level >= f(hi); level may be per ray."""
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        inside = scene.distance(rays.at(mid, idx)) <= level
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
    return hi


def _polish(scene, rays, idx, t):
    """Move converged sphere-trace hits onto the zero crossing when one is near."""
    f = scene.distance(rays.at(t, idx))
    outside = f > 0
    if not outside.any():
        return t
    sub = idx[outside]
    lo = t[outside]
    step = np.full(len(sub), SURFACE_TOLERANCE)
    hi = lo + step
    found = np.zeros(len(sub), dtype=bool)
    for _ in range(POLISH_DOUBLINGS):
        pending = ~found
        if not pending.any():
            break
        ahead = lo[pending] + step[pending]
        crossed = scene.distance(rays.at(ahead, sub[pending])) <= 0
        upd = np.flatnonzero(pending)
        hi[upd[crossed]] = ahead[crossed]
        found[upd[crossed]] = True
        step[upd[~crossed]] *= 2.0
    t = t.copy()
    if found.any():
        t[np.flatnonzero(outside)[found]] = _bisect(scene, rays, sub[found], lo[found], hi[found])
    return t


def sphere_trace(scene, rays):
    """Classic sphere tracing: step 0.9 * sdf / L, at most 512 steps, hit at sdf <= 1e-4."""
    t0, t1 = clip_to_bbox(rays, scene.bbox)
    t = t0.copy()
    active = t0 <= t1
    valid = np.zeros(len(rays), dtype=bool)
    scale = SAFETY_FACTOR / scene.lipschitz
    for _ in range(MAX_SPHERE_STEPS):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        f = scene.distance(rays.at(t[idx], idx))
        converged = f <= SURFACE_TOLERANCE
        valid[idx[converged]] = True
        active[idx[converged]] = False
        moving = idx[~converged]
        t[moving] += scale * f[~converged]
        active[moving[t[moving] > t1[moving]]] = False
    capped = active.copy()
    if capped.any():
        logger.debug("sphere trace: %d rays hit the iteration cap", int(capped.sum()))
    hits = np.flatnonzero(valid)
    if len(hits):
        t[hits] = _polish(scene, rays, hits, t[hits])
    return _finish(scene, rays, valid, t, capped)


def _cell_exit(rays, idx, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / rays.direction[idx]
        ta = (lo - rays.origin[idx]) * inv
        tb = (hi - rays.origin[idx]) * inv
    far = np.where(np.isnan(tb), np.inf, np.maximum(ta, tb))
    return far.min(axis=-1)


def trace_octree(octree, scene, rays):
    """First zero crossing along each ray, skipping empty octree cells.

    Inside an occupied leaf the segment is sampled at 9 evenly spaced points
    (spacing below a quarter leaf); the first sign change is refined by 30
    bisection steps. Without a sign change, a sample within the tolerance is a
    hit at the tolerance level, and a near-tangent dip below 4 * tolerance is
    refined by a ternary search and counts as a hit if it reaches the
    tolerance. This is the hit rule of sphere_trace.
    """
    t0, t1 = clip_to_bbox(rays, octree.bbox)
    t = t0.copy()
    valid = np.zeros(len(rays), dtype=bool)
    active = t0 <= t1
    nudge = 1e-9 * float((octree.bbox[1] - octree.bbox[0]).max())

    idx = np.flatnonzero(active)
    if len(idx):
        entry = scene.distance(rays.at(t[idx], idx)) <= SURFACE_TOLERANCE
        valid[idx[entry]] = True
        active[idx[entry]] = False

    max_iterations = 8 * 3 * 2 ** octree.max_depth
    for _ in range(max_iterations):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        p = rays.at(t[idx], idx)
        leaf = octree.leaf_index(p)
        level = octree.coarsest_empty_level(leaf)
        t_prev = t[idx].copy()

        empty = level >= 0
        if empty.any():
            e_idx = idx[empty]
            lvl = level[empty]
            size = (octree.bbox[1] - octree.bbox[0])[None, :] / (2.0 ** lvl)[:, None]
            cell = leaf[empty] >> (octree.max_depth - lvl)[:, None]
            lo = octree.bbox[0] + cell * size
            exit_t = _cell_exit(rays, e_idx, lo, lo + size)
            t[e_idx] = np.maximum(exit_t, t[e_idx]) + nudge

        occ = ~empty
        if occ.any():
            _march_leaves(octree, scene, rays, idx[occ], leaf[occ], t, t1, valid, active, nudge)

        assert (t[idx] >= t_prev).all(), "octree traversal must move forward"
        active &= t <= t1
    if active.any():
        logger.debug("octree trace: %d rays hit the iteration cap", int(active.sum()))
    return _finish(scene, rays, valid, t, active.copy())


def _march_leaves(octree, scene, rays, idx, leaf, t, t1, valid, active, nudge):
    size = octree.leaf_size
    lo = octree.bbox[0] + leaf * size
    seg_end = np.minimum(_cell_exit(rays, idx, lo, lo + size), t1[idx])
    start = t[idx]
    frac = np.linspace(0.0, 1.0, LEAF_SAMPLES)
    ts = start[:, None] + (seg_end - start)[:, None] * frac[None, :]
    pts = rays.origin[idx][:, None, :] + ts[..., None] * rays.direction[idx][:, None, :]
    f = scene.distance(pts.reshape(-1, 3)).reshape(len(idx), LEAF_SAMPLES)

    below = f <= 0.0
    crossed = below.any(axis=1)
    first = below.argmax(axis=1)

    hit_t = np.full(len(idx), np.nan)
    at_start = crossed & (first == 0)
    hit_t[at_start] = start[at_start]
    bracket = crossed & (first > 0)
    if bracket.any():
        b = np.flatnonzero(bracket)
        hit_t[b] = _bisect(scene, rays, idx[b], ts[b, first[b] - 1], ts[b, first[b]])

    within = f <= SURFACE_TOLERANCE
    grazing = ~crossed & within.any(axis=1)
    if grazing.any():
        g = np.flatnonzero(grazing)
        j = within[g].argmax(axis=1)
        hit_t[g[j == 0]] = start[g[j == 0]]
        inner = j > 0
        if inner.any():
            m = g[inner]
            k = j[inner]
            hit_t[m] = _bisect(scene, rays, idx[m], ts[m, k - 1], ts[m, k], SURFACE_TOLERANCE)

    near = ~crossed & ~grazing & (f.min(axis=1) < 4.0 * SURFACE_TOLERANCE)
    if near.any():
        n = np.flatnonzero(near)
        k = f[n].argmin(axis=1)
        a = ts[n, np.maximum(k - 1, 0)]
        c = ts[n, np.minimum(k + 1, LEAF_SAMPLES - 1)]
        tmin, fmin = _ternary_min(scene, rays, idx[n], a, c)
        touched = fmin <= SURFACE_TOLERANCE
        if touched.any():
            m = n[touched]
            level = np.where(fmin[touched] <= 0.0, 0.0, SURFACE_TOLERANCE)
            before = ts[m, np.maximum(k[touched] - 1, 0)]
            hit_t[m] = _bisect(scene, rays, idx[m], before, tmin[touched], level)

    done = ~np.isnan(hit_t)
    valid[idx[done]] = True
    active[idx[done]] = False
    t[idx[done]] = hit_t[done]
    t[idx[~done]] = np.maximum(seg_end[~done], start[~done]) + nudge


def _ternary_min(scene, rays, idx, a, c, steps=40):
    for _ in range(steps):
        m1 = a + (c - a) / 3.0
        m2 = c - (c - a) / 3.0
        left = scene.distance(rays.at(m1, idx)) < scene.distance(rays.at(m2, idx))
        c = np.where(left, m2, c)
        a = np.where(left, a, m1)
    tm = 0.5 * (a + c)
    return tm, scene.distance(rays.at(tm, idx))


def second_intersection(octree, scene, x, omega, method="octree"):
    """Trace from x + 3e-3 * omega; a valid hit means the direction is occluded."""
    x = as_points(x)
    omega = as_points(omega)
    omega = omega / np.linalg.norm(omega, axis=-1, keepdims=True)
    rays = Ray.make(x + SECONDARY_OFFSET * omega, omega)
    if method == "octree":
        return trace_octree(octree, scene, rays)
    if method == "sphere":
        return sphere_trace(scene, rays)
    raise ValueError(f"unknown trace method {method!r}")


def random_rays(scene, count, rng, radius=3.5):
    """Rays from a sphere around the scene aimed at random points in the inner bbox."""
    center = scene.center
    half = 0.375 * (scene.bbox[1] - scene.bbox[0])
    d = rng.normal(size=(count, 3))
    origin = center + radius * d / np.linalg.norm(d, axis=-1, keepdims=True)
    target = center + rng.uniform(-1.0, 1.0, size=(count, 3)) * half
    return Ray.make(origin, target - origin)


def compare_tracers(octree, scene, rays, chunk=4096):
    """Time both tracers and report hit parity and the largest t gap.

    Parity and the t gap are taken over conclusive rays: those neither tracer
    gave up on at its iteration cap. Sphere tracing caps out on rays that
    approach a surface at a very shallow angle; ``capped`` counts them.
    """
    timings = {}
    results = {}
    for name, tracer in (("octree", lambda r: trace_octree(octree, scene, r)),
                         ("sphere", lambda r: sphere_trace(scene, r))):
        start = time.perf_counter()
        parts = [tracer(_slice(rays, s, min(s + chunk, len(rays)))) for s in range(0, len(rays), chunk)]
        timings[name] = (time.perf_counter() - start) / max(len(rays), 1)
        results[name] = Hit(*(np.concatenate([getattr(h, f) for h in parts])
                              for f in ("valid", "t", "point", "normal", "capped")))
    octree_hit = results["octree"]
    sphere_hit = results["sphere"]
    conclusive = ~(octree_hit.capped | sphere_hit.capped)
    both = octree_hit.valid & sphere_hit.valid & conclusive
    agree = (octree_hit.valid == sphere_hit.valid)[conclusive]
    gap = np.abs(octree_hit.t[both] - sphere_hit.t[both])
    return {
        "rays": len(rays),
        "octree_s_per_ray": timings["octree"],
        "sphere_s_per_ray": timings["sphere"],
        "hit_parity": float(agree.mean()) if len(agree) else 1.0,
        "max_dt": float(gap.max()) if len(gap) else 0.0,
        "hits": int(sphere_hit.valid.sum()),
        "capped": int((~conclusive).sum()),
    }


def _slice(rays, start, stop):
    return Ray(rays.origin[start:stop], rays.direction[start:stop], rays.t_min[start:stop], rays.t_max[start:stop])
