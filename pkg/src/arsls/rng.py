"""Seeded randomness with one independent substream per draw site.

Each label ("dash", "fish_food", ...) gets its own generator whose seed
is derived from (session seed, label) by hashing.  Draws on one stream
never perturb another, so adding a feature with new draw sites leaves
every existing replay digest intact.
"""

from __future__ import annotations

import hashlib
import random


class LabeledRng:
    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def stream(self, label: str) -> random.Random:
        rng = self._streams.get(label)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}/{label}".encode("utf-8")).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._streams[label] = rng
        return rng
