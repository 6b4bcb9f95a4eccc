"""Seeded random streams.

All randomness in the package goes through :func:`make_rng`, which builds a
numpy ``Generator`` over the Philox4x64-10 counter-based bit generator.  The
key is derived with numpy's ``SeedSequence`` from the user seed plus a
*stream path* of small integers (``spawn_key``), so independent streams (one per
space, per purpose, per epoch ...) never depend on how many numbers another
stream consumed.  Gaussian draws use ``Generator.standard_normal``; the whole
construction is reproducible from ``(seed, stream path)`` given numpy's
documented ``SeedSequence``/``Philox`` algorithms (stable since numpy 1.17).
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "philox4x64-10+seedsequence/v1"

# stream purposes
CENTERS = 1
SAMPLES = 2
SPLITS = 3
PROTOTYPES = 4
HEAD_INIT = 5
SHUFFLE = 6
PERTURB = 7


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
