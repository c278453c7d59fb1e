import numpy as np
import pytest

from scenedit.assets import build_demo_store
from scenedit.scene import ObjectInstance, SceneState


@pytest.fixture(scope="session")
def store():
    return build_demo_store(layer_px=96)


@pytest.fixture(scope="session")
def store_hires():
    return build_demo_store(layer_px=256)


def make_real_state(canvas=(256, 256), objects=None, background="bg-meadow"):
    if objects is None:
        objects = (
            ObjectInstance("a", "ball-red", 1.0, center_px=(128.0, 128.0), depth=150.0),
            ObjectInstance("b", "ball-blue", 1.0, center_px=(150.0, 140.0), depth=60.0),
        )
    return SceneState(domain="real", background_id=background, canvas=canvas,
                      objects=tuple(objects))


@pytest.fixture
def real_state():
    return make_real_state()


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))
