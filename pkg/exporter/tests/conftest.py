import functools

import numpy as np
import pytest


@functools.lru_cache(maxsize=1)
def pretrained_available() -> bool:
    from vggexport.export import ModelUnavailable, load_vgg19

    try:
        load_vgg19(random_seed=None)
        return True
    except ModelUnavailable:
        return False


@pytest.fixture
def rng():
    return np.random.default_rng(777)


@pytest.fixture
def mean_image(tmp_path):
    """224x224 PNG whose unit values sit at the preprocessing mean."""
    from PIL import Image

    from vggexport.export import MEAN_RGB

    arr = np.round(np.asarray(MEAN_RGB) * 255).astype(np.uint8)
    img = np.broadcast_to(arr, (224, 224, 3)).copy()
    p = tmp_path / "mean.png"
    Image.fromarray(img, "RGB").save(p)
    return p


@pytest.fixture
def noise_image(tmp_path, rng):
    from PIL import Image

    arr = (rng.random((64, 64, 3)) * 255).astype(np.uint8)
    p = tmp_path / "noise.png"
    Image.fromarray(arr, "RGB").save(p)
    return p
