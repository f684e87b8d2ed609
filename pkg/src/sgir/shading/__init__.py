"""
Microfacet BRDF, environment light and SG shading with visibility ratios.
"""

from sgir.shading.brdf import (
    Material, brdf_eval, specular_sg, specular_sg_terms, fresnel, smith_schlick,
    ndf_sharpness, ndf_amplitude, SPECULAR_REFLECTANCE
)
from sgir.shading.light import EnvLight, EnvLightParams, EquirectMap, env_to_equirect, environment_radiance
from sgir.shading.visibility import (
    ConstantVisibility, cap_cosine, cap_directions, visibility_ratio, visibility_ratios,
    specular_visibility_ratios, mask_indirect, ETA_SAMPLES
)
from sgir.shading.render import (
    ShadePointInputs, render_direct, render_indirect, shade_hdr, shade_point, unit_ratios
)

__all__ = [
    'Material', 'brdf_eval', 'specular_sg', 'specular_sg_terms', 'fresnel', 'smith_schlick',
    'ndf_sharpness', 'ndf_amplitude', 'SPECULAR_REFLECTANCE',
    'EnvLight', 'EnvLightParams', 'EquirectMap', 'env_to_equirect', 'environment_radiance',
    'ConstantVisibility', 'cap_cosine', 'cap_directions', 'visibility_ratio', 'visibility_ratios',
    'specular_visibility_ratios', 'mask_indirect', 'ETA_SAMPLES',
    'ShadePointInputs', 'render_direct', 'render_indirect', 'shade_hdr', 'shade_point', 'unit_ratios'
]
