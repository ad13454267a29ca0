"""Transfer-learning recipe: model assembly, training, consolidation, export.

The classifier is an efficient convolutional base with an augmentation
block in front and a softmax head behind, and every layer stays trainable
for the whole schedule. Consolidation is a short post-training cycle at a
learning rate at least an order of magnitude lower, which lets training
accuracy catch up without the base forgetting its features. Models export
without optimizer state by default; the optimizer only carries training
status and dropping it shrinks the file.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")

import keras
import numpy as np
from PIL import Image

from .datasets import CATEGORIES

BASE_RESOLUTION = (512, 384)
ALLOWED_SCALES = (1.0, 0.75, 0.5)


class ConfigError(ValueError):
    pass


class FrozenLayerError(RuntimeError):
    """A layer was frozen; the consolidation recipe requires none are."""


@dataclass(frozen=True)
class AugmentationSpec:
    """Train-time input perturbations; inert at inference."""

    flip: str = "horizontal_and_vertical"
    rotation_deg: float = 180.0
    translation_limit: float = 0.10
    zoom_limit: float = 0.75

    def __post_init__(self):
        if not 0.0 < self.zoom_limit <= 1.0:
            raise ConfigError(f"zoom limit must lie in (0, 1], got {self.zoom_limit}")
        if not 0.0 <= self.translation_limit <= 1.0:
            raise ConfigError("translation limit must lie in [0, 1]")
        if not 0.0 <= self.rotation_deg <= 360.0:
            raise ConfigError("rotation must lie in [0, 360] degrees")


@dataclass(frozen=True)
class TrainConfig:
    base_model: str = "efficientnet_b0"
    pretrained: bool = True
    learning_rate: float = 4.3e-5
    consolidation_lr: float = 4e-6
    epochs: int = 50
    consolidation_epochs: int = 8  # 30 for mixed-dataset runs
    batch_size: int = 16
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    resolution_scale: float = 1.0
    base_resolution: tuple = BASE_RESOLUTION
    seed: int = 20

    def __post_init__(self):
        if self.learning_rate <= 0 or self.consolidation_lr <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.consolidation_lr * 10 > self.learning_rate * (1 + 1e-9):
            raise ConfigError(
                "consolidation_lr must be at least an order of magnitude "
                f"below learning_rate ({self.consolidation_lr} vs "
                f"{self.learning_rate})"
            )
        if self.resolution_scale not in ALLOWED_SCALES:
            raise ConfigError(
                f"resolution_scale must be one of {ALLOWED_SCALES}, "
                f"got {self.resolution_scale}"
            )
        if self.epochs < 0 or self.consolidation_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @property
    def input_size(self) -> tuple:
        width, height = self.base_resolution
        return (
            round(width * self.resolution_scale),
            round(height * self.resolution_scale),
        )

    @property
    def input_shape(self) -> tuple:
        width, height = self.input_size
        return (height, width, 3)


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    phase: str  # "train" or "consolidation"
    learning_rate: float
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


HISTORY_CSV_HEADER = [
    "epoch",
    "phase",
    "learning_rate",
    "train_loss",
    "train_accuracy",
    "val_loss",
    "val_accuracy",
]


def history_to_csv(rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HISTORY_CSV_HEADER)
    for row in rows:
        writer.writerow([getattr(row, column) for column in HISTORY_CSV_HEADER])
    return out.getvalue()


def _build_base(config: TrainConfig):
    weights = "imagenet" if config.pretrained else None
    name = config.base_model
    applications = {
        "efficientnet_b0": keras.applications.EfficientNetB0,
        "efficientnet_b2": keras.applications.EfficientNetB2,
        "efficientnet_b3": keras.applications.EfficientNetB3,
    }
    if name in applications:
        # the application bases normalise raw 0-255 inputs themselves
        return applications[name](
            include_top=False, weights=weights, input_shape=config.input_shape
        )
    if name == "tiny":
        # minimal convolutional base for smoke tests and offline dev
        return keras.Sequential(
            [
                keras.layers.Input(shape=config.input_shape),
                keras.layers.Rescaling(1.0 / 255),
                keras.layers.Conv2D(16, 3, strides=2, activation="relu"),
                keras.layers.Conv2D(32, 3, strides=2, activation="relu"),
            ],
            name="tiny_base",
        )
    raise ConfigError(f"unknown base model {name!r}")


def build_model(config: TrainConfig) -> keras.Model:
    """Assemble augmentation block, base, pooling, and softmax head.

    No layer is frozen: the whole network adapts to the new domain, and the
    low learning rate is what protects the pretrained features.
    """
    aug = config.augmentation
    inputs = keras.layers.Input(shape=config.input_shape)
    x = keras.layers.RandomFlip(aug.flip)(inputs)
    if aug.rotation_deg > 0:
        x = keras.layers.RandomRotation(aug.rotation_deg / 360.0)(x)
    if aug.translation_limit > 0:
        x = keras.layers.RandomTranslation(
            aug.translation_limit, aug.translation_limit
        )(x)
    if aug.zoom_limit > 0:
        x = keras.layers.RandomZoom(aug.zoom_limit)(x)
    x = _build_base(config)(x)
    x = keras.layers.GlobalAveragePooling2D()(x)
    outputs = keras.layers.Dense(len(CATEGORIES), activation="softmax")(x)
    return keras.Model(inputs, outputs, name="recycling_classifier")


def load_arrays(entries, config: TrainConfig):
    """Decode manifest entries into (x, y) arrays at the model input size."""
    width, height = config.input_size
    index = {label: i for i, label in enumerate(CATEGORIES)}
    xs = np.empty((len(entries), height, width, 3), dtype=np.float32)
    ys = np.empty(len(entries), dtype=np.int32)
    for i, entry in enumerate(entries):
        image = Image.open(entry.file).convert("RGB")
        if image.size != (width, height):
            image = image.resize((width, height), Image.Resampling.BILINEAR)
        xs[i] = np.asarray(image, dtype=np.float32)
        ys[i] = index[entry.label]
    return xs, ys


def _iter_layers(model):
    for layer in model.layers:
        yield layer
        if isinstance(layer, keras.Model):
            yield from _iter_layers(layer)


def assert_unfrozen(model) -> None:
    for layer in _iter_layers(model):
        if not layer.trainable:
            raise FrozenLayerError(
                f"layer {layer.name!r} is frozen; the schedule keeps every "
                "layer trainable"
            )


def _compile(model, learning_rate: float) -> None:
    model.compile(
        optimizer=keras.optimizers.Adam(learning_rate=learning_rate),
        loss="sparse_categorical_crossentropy",
        metrics=["accuracy"],
    )


def _fit(model, config, data, val_data, epochs, phase, learning_rate, start_epoch):
    x, y = data
    fit_history = model.fit(
        x,
        y,
        validation_data=val_data,
        epochs=epochs,
        batch_size=config.batch_size,
        verbose=0,
    )
    rows = []
    measured = fit_history.history
    for i in range(epochs):
        rows.append(
            HistoryRow(
                epoch=start_epoch + i + 1,
                phase=phase,
                learning_rate=learning_rate,
                train_loss=float(measured["loss"][i]),
                train_accuracy=float(measured["accuracy"][i]),
                val_loss=float(measured.get("val_loss", [float("nan")] * epochs)[i]),
                val_accuracy=float(
                    measured.get("val_accuracy", [float("nan")] * epochs)[i]
                ),
            )
        )
    return rows


def train(config: TrainConfig, train_entries, val_entries=None):
    """Run the main schedule at the configured constant learning rate.

    Returns (model, history rows). Pair with consolidate() for the full
    recipe.
    """
    keras.utils.set_random_seed(config.seed)
    model = build_model(config)
    assert_unfrozen(model)
    _compile(model, config.learning_rate)
    data = load_arrays(train_entries, config)
    val_data = load_arrays(val_entries, config) if val_entries else None
    history = _fit(
        model,
        config,
        data,
        val_data,
        epochs=config.epochs,
        phase="train",
        learning_rate=config.learning_rate,
        start_epoch=0,
    )
    return model, history


def consolidate(model, config: TrainConfig, train_entries, val_entries=None,
                history=None):
    """Post-training cycle at the consolidation learning rate.

    Asserts no layer has been frozen (that would turn this into classic
    fine-tuning, which is a different recipe). Zero consolidation epochs is
    a no-op. Returns (model, combined history).
    """
    history = list(history) if history else []
    if config.consolidation_epochs == 0:
        return model, history
    assert_unfrozen(model)
    _compile(model, config.consolidation_lr)
    data = load_arrays(train_entries, config)
    val_data = load_arrays(val_entries, config) if val_entries else None
    history.extend(
        _fit(
            model,
            config,
            data,
            val_data,
            epochs=config.consolidation_epochs,
            phase="consolidation",
            learning_rate=config.consolidation_lr,
            start_epoch=history[-1].epoch if history else 0,
        )
    )
    return model, history


def export_model(model, path, include_optimizer: bool = False) -> Path:
    """Save the model, omitting optimizer state by default.

    Uses the HDF5 container because it can drop the optimizer; the state
    only records training progress and inflates the file.
    """
    path = Path(path)
    if path.suffix != ".h5":
        raise ConfigError(f"export path must end in .h5, got {path.name!r}")
    model.save(path, include_optimizer=include_optimizer)
    return path


def load_exported(path) -> keras.Model:
    return keras.models.load_model(path, compile=False)
