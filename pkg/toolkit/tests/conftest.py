import numpy as np
import pytest
from PIL import Image

from ewtoolkit import CATEGORIES

# distinct base colour per category so a tiny model can actually learn
SHADES = {
    "cardboard": (181, 134, 84),
    "glass": (70, 160, 155),
    "metal": (140, 140, 150),
    "paper": (235, 235, 225),
    "plastic": (220, 90, 60),
}


def build_source(root, per_category=10, size=(64, 48), noise=18, seed=0):
    rng = np.random.default_rng(seed)
    width, height = size
    for category in CATEGORIES:
        sub = root / category
        sub.mkdir(parents=True, exist_ok=True)
        base = np.array(SHADES[category], dtype=np.int16)
        for i in range(per_category):
            jitter = rng.integers(-noise, noise + 1, size=(height, width, 3))
            pixels = np.clip(base + jitter, 0, 255).astype(np.uint8)
            Image.fromarray(pixels, "RGB").save(sub / f"{category}_{i:03d}.png")
    return root


@pytest.fixture(scope="session")
def smoke_source(tmp_path_factory):
    """50 images, 10 per category, 64x48."""
    root = tmp_path_factory.mktemp("smoke_source")
    return build_source(root, per_category=10)


@pytest.fixture(scope="session")
def smoke_config():
    from ewtoolkit.training import TrainConfig

    # tiny base and small inputs keep the schedule desk-fast; the LR pair
    # keeps the order-of-magnitude gap of the full recipe
    return TrainConfig(
        base_model="tiny",
        pretrained=False,
        learning_rate=1e-3,
        consolidation_lr=1e-4,
        epochs=2,
        consolidation_epochs=1,
        batch_size=16,
        base_resolution=(64, 48),
        seed=7,
    )
