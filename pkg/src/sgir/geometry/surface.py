import logging

import numpy as np

from sgir.errors import ValidationError
from sgir.geometry.sdf import SURFACE_TOLERANCE, sdf_normal

logger = logging.getLogger(__name__)

MAX_SURFACE_BATCHES = 64


def sample_surface(scene, count, rng, band=0.05, projections=4, batch=65536, max_batches=MAX_SURFACE_BATCHES):
    """Approximately uniform points on the zero level set inside the bbox.

    Uniform bbox samples within ``band`` of the surface are projected along
    the normal until |sdf| <= tolerance. Raises ValidationError when
    ``max_batches`` batches do not yield ``count`` points, as for a scene
    without a surface in its bbox.
    """
    found = [np.zeros((0, 3))]
    total = 0
    for _ in range(max_batches):
        if total >= count:
            break
        p = rng.uniform(scene.bbox[0], scene.bbox[1], size=(batch, 3))
        p = p[np.abs(scene.distance(p)) < band]
        for _ in range(projections):
            if not len(p):
                break
            p = p - scene.distance(p)[:, None] * sdf_normal(scene, p)
        inside = np.all((p >= scene.bbox[0]) & (p <= scene.bbox[1]), axis=-1)
        p = p[inside & (np.abs(scene.distance(p)) <= SURFACE_TOLERANCE)]
        found.append(p)
        total += len(p)
    if total < count:
        raise ValidationError(f"found {total} of {count} surface points in {max_batches} batches; "
                              "does the scene have a surface inside its bbox?")
    logger.debug("sampled %d surface points", count)
    return np.concatenate(found)[:count]
