"""
Hypothesis strategies for directions, SG lobes, colors and tone parameters.
"""

import math

from hypothesis import strategies as st

from sgir.sg.lobes import SGMixture, SphericalGaussian
from sgir.tonemap import ToneParams


def unit_vectors(min_norm=1e-3):
    """Unit 3-vectors as tuples, from non-degenerate raw components."""
    component = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)

    def normalize(v):
        n = math.sqrt(sum(c * c for c in v))
        return tuple(c / n for c in v)

    return st.tuples(component, component, component).filter(
        lambda v: math.sqrt(sum(c * c for c in v)) > min_norm
    ).map(normalize)


def rgb(min_value=0.0, max_value=1.0):
    channel = st.floats(min_value, max_value, allow_nan=False, allow_infinity=False)
    return st.tuples(channel, channel, channel)


def sharpness(min_value=0.05, max_value=500.0):
    """Log-uniform lobe sharpness."""
    return st.floats(math.log(min_value), math.log(max_value)).map(math.exp)


def lobes(min_sharpness=0.05, max_sharpness=500.0, max_amplitude=2.0):
    """
    Generate a hypothesis strategy for single spherical Gaussian lobes.

    Args:
        min_sharpness: smallest sharpness (lambda) drawn
        max_sharpness: largest sharpness drawn
        max_amplitude: upper bound of each amplitude channel

    Returns:
        A hypothesis strategy that generates SphericalGaussian instances
    """
    return st.builds(
        lambda axis, lam, mu: SphericalGaussian(axis, lam, mu),
        unit_vectors(), sharpness(min_sharpness, max_sharpness), rgb(0.0, max_amplitude),
    )


def mixtures(max_lobes=8, **kwargs):
    return st.lists(lobes(**kwargs), min_size=1, max_size=max_lobes).map(SGMixture.from_list)


def tone_params(curve="aces", min_gamma=0.01):
    return st.floats(min_gamma, 1.0, allow_nan=False).map(lambda g: ToneParams(g, curve))


def hdr_values(max_value=50.0):
    return st.floats(0.0, max_value, allow_nan=False, allow_infinity=False)
