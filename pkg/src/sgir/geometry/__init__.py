"""
Analytic SDF scenes, the occupancy octree and ray tracing.
"""

from sgir.geometry.sdf import (
    SdfNode, Sphere, Box, Plane, Torus, Empty, Transformed, Union, SmoothUnion,
    SdfVisitor, LipschitzBound, SceneConfigWriter, SdfScene,
    STANDARD_SCENE_CONFIG, standard_scene, sdf_eval, sdf_normal, rotation_matrix,
    SURFACE_TOLERANCE
)
from sgir.geometry.octree import Octree, build_octree, brute_force_occupancy, save_octree, load_octree
from sgir.geometry.tracing import (
    Ray, Hit, sphere_trace, trace_octree, second_intersection,
    random_rays, compare_tracers, clip_to_bbox, SECONDARY_OFFSET
)
from sgir.geometry.surface import sample_surface

__all__ = [
    'SdfNode', 'Sphere', 'Box', 'Plane', 'Torus', 'Empty', 'Transformed', 'Union', 'SmoothUnion',
    'SdfVisitor', 'LipschitzBound', 'SceneConfigWriter', 'SdfScene',
    'STANDARD_SCENE_CONFIG', 'standard_scene', 'sdf_eval', 'sdf_normal', 'rotation_matrix',
    'SURFACE_TOLERANCE',
    'Octree', 'build_octree', 'brute_force_occupancy', 'save_octree', 'load_octree',
    'Ray', 'Hit', 'sphere_trace', 'trace_octree', 'second_intersection',
    'random_rays', 'compare_tracers', 'clip_to_bbox', 'SECONDARY_OFFSET',
    'sample_surface'
]
