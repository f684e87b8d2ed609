"""
Spherical Gaussian lobes and their closed-form algebra.
"""

from sgir.sg.lobes import (
    UnitVector3, SphericalGaussian, SGMixture, CosineLobeApprox, COSINE_LOBE
)
from sgir.sg.algebra import (
    sg_eval, sg_integral, sg_product, sg_inner_product,
    cosine_lobe_sg, clipped_cosine_inner, warp_ndf,
    product_terms, warp_terms, quadrature_integral, quadrature_inner_product,
    GRAZING_EPSILON
)

__all__ = [
    'UnitVector3', 'SphericalGaussian', 'SGMixture', 'CosineLobeApprox', 'COSINE_LOBE',
    'sg_eval', 'sg_integral', 'sg_product', 'sg_inner_product',
    'cosine_lobe_sg', 'clipped_cosine_inner', 'warp_ndf',
    'product_terms', 'warp_terms', 'quadrature_integral', 'quadrature_inner_product',
    'GRAZING_EPSILON'
]
