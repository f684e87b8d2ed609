# Re-export the public library surface
from sgir.errors import (
    SgirError, DegenerateProduct, GrazingView, OutOfGamut, DegenerateNormal, NonFiniteGradient, ParseError,
    ValidationError, DimensionMismatch
)
from sgir.sg import (
    UnitVector3, SphericalGaussian, SGMixture, COSINE_LOBE,
    sg_eval, sg_integral, sg_product, sg_inner_product, cosine_lobe_sg, clipped_cosine_inner, warp_ndf
)
from sgir.tonemap import ToneParams, aces_forward, aces_inverse, deformed_forward, deformed_inverse, tonemap_grad
from sgir.geometry import (
    SdfScene, standard_scene, sdf_eval, sdf_normal, build_octree, Ray, Hit, sphere_trace, trace_octree,
    second_intersection, compare_tracers
)
from sgir.fields import (
    ParamStore, AdamState, adam_step, GridField3D, DirectionalField, NormalField, IndirectSGField, QTildeField,
    MaterialLatentField, accumulate_gradients, gradcheck
)
from sgir.shading import (
    Material, brdf_eval, specular_sg, EnvLight, EquirectMap, render_direct, render_indirect, shade_point,
    visibility_ratio
)
from sgir.oracle import Camera, mc_render, visibility_oracle, make_dataset, save_dataset, load_dataset
from sgir.pipeline import (
    StageConfig, FieldConfig, SceneModel, LossReport, stage_normals, stage_visibility, stage_indirect,
    stage_decompose, render_view, deshadow_render, relight_render, fit_env, metrics
)
from sgir.io import ImageBuffer, read_pfm, write_pfm, read_png, write_png, save_checkpoint, load_checkpoint
from sgir.config import RunConfig, load_run_config

__all__ = [
    'SgirError', 'DegenerateProduct', 'GrazingView', 'OutOfGamut', 'DegenerateNormal', 'NonFiniteGradient',
    'ParseError', 'ValidationError', 'DimensionMismatch',
    'UnitVector3', 'SphericalGaussian', 'SGMixture', 'COSINE_LOBE',
    'sg_eval', 'sg_integral', 'sg_product', 'sg_inner_product', 'cosine_lobe_sg', 'clipped_cosine_inner',
    'warp_ndf',
    'ToneParams', 'aces_forward', 'aces_inverse', 'deformed_forward', 'deformed_inverse', 'tonemap_grad',
    'SdfScene', 'standard_scene', 'sdf_eval', 'sdf_normal', 'build_octree', 'Ray', 'Hit', 'sphere_trace',
    'trace_octree', 'second_intersection', 'compare_tracers',
    'ParamStore', 'AdamState', 'adam_step', 'GridField3D', 'DirectionalField', 'NormalField', 'IndirectSGField',
    'QTildeField', 'MaterialLatentField', 'accumulate_gradients', 'gradcheck',
    'Material', 'brdf_eval', 'specular_sg', 'EnvLight', 'EquirectMap', 'render_direct', 'render_indirect',
    'shade_point', 'visibility_ratio',
    'Camera', 'mc_render', 'visibility_oracle', 'make_dataset', 'save_dataset', 'load_dataset',
    'StageConfig', 'FieldConfig', 'SceneModel', 'LossReport', 'stage_normals', 'stage_visibility',
    'stage_indirect', 'stage_decompose', 'render_view', 'deshadow_render', 'relight_render', 'fit_env', 'metrics',
    'ImageBuffer', 'read_pfm', 'write_pfm', 'read_png', 'write_png', 'save_checkpoint', 'load_checkpoint',
    'RunConfig', 'load_run_config'
]
