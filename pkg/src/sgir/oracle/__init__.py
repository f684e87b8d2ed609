"""
Monte Carlo reference renderer, ray-traced visibility and ground-truth datasets.
"""

from sgir.oracle.camera import Camera, orbit_cameras
from sgir.oracle.lights import (
    EnvironmentSampler, SGEnvironmentSampler, EquirectSampler, environment_sampler,
    sample_sg_direction, sg_direction_pdf
)
from sgir.oracle.materials import MaterialSet
from sgir.oracle.render import (
    RenderContext, RenderResult, RadianceOracle, bsdf_pdf, bsdf_sample, make_context, mc_render, outgoing_radiance
)
from sgir.oracle.visibility import OracleVisibility, visibility_oracle
from sgir.oracle.dataset import Dataset, DatasetView, make_dataset, save_dataset, load_dataset, tone_map_view

__all__ = [
    'Camera', 'orbit_cameras',
    'EnvironmentSampler', 'SGEnvironmentSampler', 'EquirectSampler', 'environment_sampler',
    'sample_sg_direction', 'sg_direction_pdf',
    'MaterialSet',
    'RenderContext', 'RenderResult', 'RadianceOracle', 'bsdf_pdf', 'bsdf_sample', 'make_context', 'mc_render',
    'outgoing_radiance',
    'OracleVisibility', 'visibility_oracle',
    'Dataset', 'DatasetView', 'make_dataset', 'save_dataset', 'load_dataset', 'tone_map_view'
]
