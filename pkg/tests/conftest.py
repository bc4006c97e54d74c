import numpy as np
import pytest

from swimbladder.atlas import build_atlas
from swimbladder.phantom import PhantomSpec, generate_phantom


@pytest.fixture(scope="session")
def dorsal_truths20():
    return [generate_phantom(PhantomSpec(seed=100 + i)) for i in range(20)]


@pytest.fixture(scope="session")
def dorsal_atlas(dorsal_truths20):
    return build_atlas(
        [t.image for t in dorsal_truths20],
        [t.bladder for t in dorsal_truths20],
        fixed_index=0,
        orientation="dorsal",
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
