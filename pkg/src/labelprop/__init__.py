"""Label propagation for object crops with banked Hopfield-memory heads.

Per embedding space, a :class:`~labelprop.hopfield.HopfieldHead` learns one
representative per class; heads from several spaces are averaged by an
:class:`~labelprop.ensemble.EnsemblePredictor`.  A fixed-prototype cosine
classifier serves as the baseline, and :mod:`labelprop.metrics` /
:mod:`labelprop.savings` turn predictions into accuracy, mAP and annotation
time saved.
"""

from .cosine import PrototypeBank, build_prototypes, classify_cosine, cosine_scores
from .ensemble import EnsemblePredictor, ensemble_predict, ensemble_scores
from .hopfield import (
    Gradients,
    HopfieldHead,
    Hyperparams,
    forward_scores,
    gradients,
    init_head,
    load_head,
    loss,
    predict,
    save_head,
)
from .metrics import EvalReport, Prediction, average_precision, evaluate, stratify
from .savings import RetrievalCounts, SavingsReport, TimeModel, compute_savings, count_retrieved, render_savings
from .scores import ScoreVector
from .store import (
    ClassRegistry,
    Complexity,
    EmbeddingRecord,
    EmbeddingStore,
    load_store,
    save_store,
    split_assign,
)
from .synth import SyntheticConfig, synth_generate
from .training import TrainReport, train_head

__version__ = "0.1.0"
