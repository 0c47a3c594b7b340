import shutil

import numpy as np
import pytest
from PIL import Image


def save_image(path, array):
    Image.fromarray(array.astype(np.uint8)).save(path)


def gradient(h, w, scale=1.0):
    ramp = np.linspace(0, 255 * scale, w)[None, :, None]
    return np.clip(ramp * np.ones((h, 1, 3)), 0, 255)


def noise(rng, h, w):
    return rng.integers(0, 256, size=(h, w, 3))


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Ten grid images in two grids, plus two target exemplars.

    gridA/dup.png is a byte-for-byte copy of gridB/noise.png so identity
    of inputs can be checked against identity of outputs.
    """
    root = tmp_path_factory.mktemp("corpus")
    grid_a = root / "input" / "gridA"
    grid_b = root / "input" / "gridB"
    targets = root / "targets"
    for d in (grid_a, grid_b, targets):
        d.mkdir(parents=True)

    rng = np.random.default_rng(99)
    h, w = 48, 64
    for i in range(4):
        save_image(grid_a / f"img{i}.png", gradient(h, w, 0.4 + 0.15 * i))
    for i in range(4, 7):
        save_image(grid_a / f"img{i}.png", noise(rng, h, w))
    save_image(grid_b / "solid.png", np.full((h, w, 3), [200, 30, 90]))
    save_image(grid_b / "noise.png", noise(rng, h, w))
    shutil.copyfile(grid_b / "noise.png", grid_a / "dup.png")
    save_image(targets / "t1.png", gradient(h, w))
    save_image(targets / "t2.png", noise(rng, h, w))
    return {"input": root / "input", "targets": targets}
