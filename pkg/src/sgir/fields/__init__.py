"""
Trainable grid fields, the flat parameter store and the optimizer.
"""

from sgir.fields.params import ParamStore, ParamSlice, AdamState, adam_step, DEFAULT_LR
from sgir.fields.grid import (
    GridField3D, SparseGrad, Corners, trilinear_corners, field_eval, field_eval_with_param_grads, ACTIVATIONS
)
from sgir.fields.directional import DirectionalField, DirectionWeights, spherical_barycentric
from sgir.fields.models import (
    NormalField, IndirectSGField, QTildeField, MaterialLatentField, decode_lobes, knot_interpolation,
    GAMMA_KNOTS, INDIRECT_LOBES, DIRECT_LOBES, LATENT_CHANNELS, ROUGHNESS_FLOOR
)
from sgir.fields.gradients import accumulate_gradients, gradcheck, GradcheckReport, relative_error

__all__ = [
    'ParamStore', 'ParamSlice', 'AdamState', 'adam_step', 'DEFAULT_LR',
    'GridField3D', 'SparseGrad', 'Corners', 'trilinear_corners', 'field_eval', 'field_eval_with_param_grads',
    'ACTIVATIONS',
    'DirectionalField', 'DirectionWeights', 'spherical_barycentric',
    'NormalField', 'IndirectSGField', 'QTildeField', 'MaterialLatentField', 'decode_lobes', 'knot_interpolation',
    'GAMMA_KNOTS', 'INDIRECT_LOBES', 'DIRECT_LOBES', 'LATENT_CHANNELS', 'ROUGHNESS_FLOOR',
    'accumulate_gradients', 'gradcheck', 'GradcheckReport', 'relative_error'
]
