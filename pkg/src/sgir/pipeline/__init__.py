"""
Training stages, losses, applications and metrics of the decomposition.
"""

from sgir.pipeline.config import DEFAULT_LR_SCALES, FieldConfig, StageConfig
from sgir.pipeline.losses import (
    indirect_l1, kl_divergence, latent_kl, normal_loss, rgb_mse, smoothness_loss, visibility_bce
)
from sgir.pipeline.rve import blend_eta, matching_lobes, rve_loss, rve_residual, rve_warmup_loss
from sgir.pipeline.report import LossReport
from sgir.pipeline.model import SceneModel
from sgir.pipeline.forward import ShadedBatch, shade_batch, stream_seed
from sgir.pipeline.stages import (
    indirect_pool, pixel_pool, ray_pool, stage_decompose, stage_indirect, stage_normals, stage_visibility,
    surface_pool
)
from sgir.pipeline.apps import ViewRender, deshadow_render, fit_env, relight_render, render_view
from sgir.pipeline.metrics import (
    albedo_mae, align_channel_scale, eta_agreement, mae, metrics, normal_angular_error, psnr,
    shadow_albedo_gap, shadow_mask, visibility_accuracy
)
from sgir.pipeline.checks import GRADCHECK_COORDS, loss_closures, run_gradchecks

__all__ = [
    'DEFAULT_LR_SCALES', 'FieldConfig', 'StageConfig',
    'indirect_l1', 'kl_divergence', 'latent_kl', 'normal_loss', 'rgb_mse', 'smoothness_loss', 'visibility_bce',
    'blend_eta', 'matching_lobes', 'rve_loss', 'rve_residual', 'rve_warmup_loss',
    'LossReport', 'SceneModel', 'ShadedBatch', 'shade_batch', 'stream_seed',
    'indirect_pool', 'pixel_pool', 'ray_pool', 'stage_decompose', 'stage_indirect', 'stage_normals',
    'stage_visibility', 'surface_pool',
    'ViewRender', 'deshadow_render', 'fit_env', 'relight_render', 'render_view',
    'albedo_mae', 'align_channel_scale', 'eta_agreement', 'mae', 'metrics', 'normal_angular_error', 'psnr',
    'shadow_albedo_gap', 'shadow_mask', 'visibility_accuracy',
    'GRADCHECK_COORDS', 'loss_closures', 'run_gradchecks'
]
