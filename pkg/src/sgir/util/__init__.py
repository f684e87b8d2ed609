"""
Utility modules for sgir.
"""

from sgir.util.parallel import parallel_map, chunk_ranges
from sgir.util.sampling import DTYPE, rng_for, torch_generator, fibonacci_sphere, normalize, orthonormal_basis

__all__ = ['parallel_map', 'chunk_ranges', 'DTYPE', 'rng_for', 'torch_generator', 'fibonacci_sphere', 'normalize',
           'orthonormal_basis']
