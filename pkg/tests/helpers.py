"""Shared test utilities: independent oracles and fixture builders."""

from __future__ import annotations

from pathlib import Path

from PIL import Image

from edgewise import ClassLabel


def debounce_oracle(labels, capacity):
    """From-scratch re-simulation of the majority-vote queue.

    Recounts the trailing window of the full push list on every step instead
    of maintaining a ring, so it shares no state-keeping with the
    implementation. Returns one entry per push: None, or
    (previous, new, votes) when that push commits a new state.
    """
    committed = ClassLabel.NONE
    out = []
    for i in range(len(labels)):
        window = labels[max(0, i + 1 - capacity) : i + 1]
        winner = None
        for candidate in sorted(set(window), key=lambda l: l.value):
            if window.count(candidate) * 2 > capacity:
                winner = candidate
                break
        if winner is not None and winner != committed:
            out.append((committed, winner, window.count(winner)))
            committed = winner
        else:
            out.append(None)
    return out


def make_image_tree(root: Path, counts: dict, size=(16, 12), suffix=".png"):
    """Build a <root>/<category>/*.png tree with solid-colour images."""
    root = Path(root)
    shades = {
        "cardboard": (181, 134, 84),
        "glass": (70, 160, 155),
        "metal": (140, 140, 150),
        "paper": (235, 235, 225),
        "plastic": (220, 90, 60),
    }
    for category, count in counts.items():
        sub = root / category
        sub.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            image = Image.new("RGB", size, shades.get(category, (10, 10, 10)))
            image.save(sub / f"{category}_{i:03d}{suffix}")
    return root
