import numpy as np
import pytest

from lumisphere.brdf import BlinnPhong, Lambert
from lumisphere.core import ReflectanceMap, disc_mask
from lumisphere.dataset import procedural_env
from lumisphere.render import brdf_convolve


@pytest.fixture(scope="session")
def smooth_rm():
    """A fully defined, smooth specular-ish map used across tests."""
    env = procedural_env(11)
    return brdf_convolve(env, BlinnPhong((0.3, 0.3, 0.3), (0.4, 0.4, 0.4), 40.0), 32, 256, seed=3)


@pytest.fixture(scope="session")
def diffuse_rm():
    env = procedural_env(12)
    return brdf_convolve(env, Lambert((0.6, 0.5, 0.4)), 32, 256, seed=4)


def random_defined_map(rng, resolution=32, scale=1.0):
    """Random fully defined map over the disc."""
    mask = disc_mask(resolution)
    radiance = np.where(mask[..., None], rng.random((resolution, resolution, 3)) * scale, 0.0)
    return ReflectanceMap(radiance, mask)
