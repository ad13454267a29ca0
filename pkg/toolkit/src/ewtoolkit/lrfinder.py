"""Learning-rate scan: short probe runs over log-spaced candidates.

Each candidate trains a fresh copy of the model for a few epochs; the rate
with the lowest final loss wins. Keeping the winning rate low protects the
pretrained base from catastrophic forgetting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import keras
import numpy as np

from .training import TrainConfig, _compile, build_model, load_arrays


class LRFinderError(RuntimeError):
    """Every candidate diverged; carries the loss table for inspection."""

    def __init__(self, message: str, losses: dict):
        super().__init__(message)
        self.losses = losses


@dataclass(frozen=True)
class LRScanResult:
    rate: float
    losses: dict  # candidate -> final probe loss


def log_spaced(lower: float, upper: float, count: int) -> list:
    if count < 1 or lower <= 0 or upper < lower:
        raise ValueError("need count >= 1 and 0 < lower <= upper")
    if count == 1:
        return [upper]
    step = (math.log10(upper) - math.log10(lower)) / (count - 1)
    return [10 ** (math.log10(lower) + i * step) for i in range(count)]


def find_learning_rate(
    config: TrainConfig,
    train_entries,
    upper: float = 1e-4,
    lower: float = 1e-6,
    count: int = 5,
    probe_epochs: int = 2,
    candidates=None,
) -> LRScanResult:
    """Scan rates up to `upper` and return the one with minimal probe loss.

    Every probe starts from the same initial weights so the comparison is
    fair. Raises LRFinderError (with the loss table attached) if no
    candidate produces a finite loss.
    """
    rates = list(candidates) if candidates is not None else log_spaced(
        lower, upper, count
    )
    if not rates:
        raise ValueError("no candidate rates")
    keras.utils.set_random_seed(config.seed)
    model = build_model(config)
    initial_weights = model.get_weights()
    x, y = load_arrays(train_entries, config)

    losses = {}
    for rate in rates:
        model.set_weights(initial_weights)
        _compile(model, rate)
        history = model.fit(
            x, y, epochs=probe_epochs, batch_size=config.batch_size, verbose=0
        )
        final = float(history.history["loss"][-1])
        losses[rate] = final
    finite = {rate: loss for rate, loss in losses.items() if np.isfinite(loss)}
    if not finite:
        raise LRFinderError("all candidate rates diverged", losses)
    best = min(finite, key=finite.get)
    return LRScanResult(rate=best, losses=losses)
