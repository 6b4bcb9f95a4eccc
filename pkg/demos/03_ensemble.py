"""
Averaging heads across spaces
=============================

Each space here fully merges two pairs of classes, but no pair is merged in
more than one space.  A single head cannot separate its own merged pairs, the
unweighted mean of three heads can.
"""

import numpy as np

from labelprop.ensemble import EnsemblePredictor, ensemble_scores
from labelprop.hopfield import Hyperparams, forward_scores, init_head
from labelprop.metrics import evaluate, predictions_from_scores, render_table
from labelprop.synth import SyntheticConfig, synth_generate
from labelprop.training import train_head

store = synth_generate(SyntheticConfig(
    seed=12,
    cluster_sigma=1.25,
    confusion_pairs={"space_a": [(0, 1), (2, 3)], "space_b": [(4, 5), (6, 7)], "space_c": [(8, 9), (0, 2)]},
    confusion_blend=1.0,
))

heads = []
for space in store.spaces:
    head = init_head(store, space, p=16, m=4, seed=12)
    heads.append(train_head(head, store, "train", Hyperparams(seed=12))[0])

ids, _, y = store.labeled("space_a", "validation")
queries = {s: store.labeled(s, "validation")[1] for s in store.spaces}

rows = {}
for head in heads:
    S = forward_scores(head, queries[head.space])
    rows[head.space] = evaluate(predictions_from_scores(ids, S, y.tolist(), store.registry), store.registry)

ens = EnsemblePredictor(heads, store.registry)
S = ensemble_scores(ens, queries)
rows["Ensemble"] = evaluate(predictions_from_scores(ids, S, y.tolist(), store.registry), store.registry)
print(render_table(rows))

# the mean of probability rows is still a probability row
print("row sums:", np.unique(np.round(S.sum(axis=1), 12)))
