"""
A synthetic embedding store
===========================

Real crop embeddings come from frozen image encoders.  For experiments we
draw Gaussian clusters instead, one set of class centers per embedding space.
"""

import numpy as np

from labelprop.synth import SyntheticConfig, synth_centers, synth_generate

# three spaces, ten classes; space_a pulls classes 0 and 1 toward each other
config = SyntheticConfig(
    seed=7,
    num_classes=10,
    dim=32,
    cluster_sigma=0.5,
    confusion_pairs={"space_a": [(0, 1)]},
    confusion_blend=0.8,
)
store = synth_generate(config)
print(store.summary())

# the same crop id exists in every space, with a different vector each time
rec = store.records("space_a", "validation")[0]
print(rec.id, rec.class_id, store.registry.complexity_of(rec.class_id).value)
for space in store.spaces:
    same = next(r for r in store.records(space) if r.id == rec.id)
    print(space, np.round(same.vector[:4], 3))

# blending shrinks the distance between the paired centers in space_a only
for space, C in synth_centers(config).items():
    print(space, "dist(0, 1) =", round(float(np.linalg.norm(C[0] - C[1])), 3))

# generation is a pure function of the config
again = synth_generate(config)
assert all(store.records(s) == again.records(s) for s in store.spaces)
