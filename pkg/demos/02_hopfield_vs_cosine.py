"""
Hopfield head against a cosine baseline
=======================================

The baseline keeps a handful of fixed prototypes per class.  A Hopfield head
starts from the same representatives but learns projections and one stored
pattern per class and bank from the training split.
"""

import numpy as np

from labelprop.cosine import build_prototypes, cosine_scores
from labelprop.hopfield import Hyperparams, forward_scores, init_head
from labelprop.synth import SyntheticConfig, synth_generate
from labelprop.training import train_head

store = synth_generate(SyntheticConfig(
    seed=11,
    cluster_sigma=1.25,
    spaces=("space_a",),
    confusion_pairs={"space_a": [(0, 1), (2, 3)]},
    confusion_blend=0.6,
))
_, X, y = store.labeled("space_a", "validation")

bank = build_prototypes(store, "space_a", k=5)
cos_acc = np.mean(cosine_scores(bank, X).argmax(axis=1) == y)

head = init_head(store, "space_a", p=16, m=4, seed=11)
print("untrained head:", np.mean(forward_scores(head, X).argmax(axis=1) == y))

head, report = train_head(head, store, "train", Hyperparams(seed=11))
for e in report.epochs[::5]:
    print(f"epoch {e.epoch:2d}  loss {e.total:.5f}  train acc {e.accuracy:.3f}")

hop_acc = np.mean(forward_scores(head, X).argmax(axis=1) == y)
print(f"validation accuracy: cosine {cos_acc:.3f}, hopfield {hop_acc:.3f}")

# confused pairs are where the learned projections help most
for a, b in [(0, 1), (2, 3)]:
    mask = (y == a) | (y == b)
    print(f"classes {a}/{b}:",
          round(float(np.mean(cosine_scores(bank, X[mask]).argmax(1) == y[mask])), 3),
          round(float(np.mean(forward_scores(head, X[mask]).argmax(1) == y[mask])), 3))
