import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from relspin import lorentz
from relspin.observable import SGConfig

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

MAX_RAPIDITY = 3.0


def random_unit3(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_pair(rng, max_rapidity=MAX_RAPIDITY):
    """Boost times rotation with rapidity up to ``max_rapidity``."""
    eta = rng.uniform(0, max_rapidity) * random_unit3(rng)
    rot = lorentz.rotation(random_unit3(rng), rng.uniform(0, 2 * np.pi))
    return lorentz.boost(eta) @ rot


def random_velocity(rng, max_rapidity=MAX_RAPIDITY):
    eta = rng.uniform(0, max_rapidity)
    return np.concatenate([[np.cosh(eta)], np.sinh(eta) * random_unit3(rng)])


def random_config(rng, magnitude=None):
    beta = np.tanh(rng.uniform(0, MAX_RAPIDITY)) * random_unit3(rng)
    mag = rng.uniform(0.1, 3.0) if magnitude is None else magnitude
    return SGConfig.from_device_frame(random_unit3(rng), mag, beta)


def random_amplitude(rng):
    return rng.normal(size=2) + 1j * rng.normal(size=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


unit_floats = st.floats(-1.0, 1.0, allow_nan=False)
vec3 = st.tuples(unit_floats, unit_floats, unit_floats).filter(lambda v: np.linalg.norm(v) > 1e-3)
rapidities = st.floats(0.0, MAX_RAPIDITY, allow_nan=False)
angles = st.floats(0.0, 2 * np.pi, allow_nan=False)


@st.composite
def lorentz_pairs(draw):
    axis_b = np.array(draw(vec3))
    axis_r = np.array(draw(vec3))
    eta = draw(rapidities)
    rot = lorentz.rotation(axis_r / np.linalg.norm(axis_r), draw(angles))
    return lorentz.boost(eta * axis_b / np.linalg.norm(axis_b)) @ rot
