import json
import os

import numpy as np
import pytest

from glips import BackendManifest, GlipsConfig, ImageTensor, load_backend, save_image


def make_image(rng: np.random.Generator, size: int) -> ImageTensor:
    return ImageTensor(rng.random((size, size, 3)))


def write_png(path, data: np.ndarray) -> str:
    """Write float [0,1] pixel data as a PNG and return the path."""
    save_image(ImageTensor(data), str(path))
    return str(path)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240514)


@pytest.fixture
def small_backend():
    """Fixture backend on a 64px / 16-patch grid with compact features."""
    manifest = BackendManifest(model_path="fixture:0", input_size=64, feature_dim=32)
    return load_backend(manifest)


@pytest.fixture
def small_cfg():
    return GlipsConfig(k=4)


def make_dataset(tmp_path, rng, models=("alpha", "beta"), n_entries=2, size=32,
                 identity=False, human_scores=None):
    """Write PNGs, a dataset manifest, and a human-score CSV under tmp_path.

    With identity=True every generated path is the entry's original, which
    pins known outcomes (zero perceptual distance, infinite psnr).
    """
    img_dir = tmp_path / "images"
    os.makedirs(img_dir, exist_ok=True)
    entries = []
    for i in range(n_entries):
        orig = write_png(img_dir / f"orig_{i}.png", rng.random((size, size, 3)))
        generated = {}
        for model in models:
            if identity:
                generated[model] = orig
            else:
                generated[model] = write_png(
                    img_dir / f"{model}_{i}.png", rng.random((size, size, 3))
                )
        entries.append(
            {"caption_id": f"cap{i}", "original_path": orig, "generated": generated}
        )
    manifest_path = tmp_path / "dataset.json"
    manifest_path.write_text(json.dumps({"entries": entries}))

    scores = human_scores or {model: 3.0 + 0.5 * j for j, model in enumerate(models)}
    lines = ["model,question_id,mean_score"]
    for model, mean in scores.items():
        for q in range(1, 6):
            lines.append(f"{model},{q},{mean}")
    human_path = tmp_path / "human.csv"
    human_path.write_text("\n".join(lines) + "\n")
    return str(manifest_path), str(human_path)
