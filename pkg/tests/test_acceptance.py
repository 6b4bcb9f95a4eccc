"""Acceptance criteria, each at its stated tolerance and time budget.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary lists one
PASS/FAIL line per criterion.
"""

import itertools
import time

import numpy as np
import pytest

from labelprop.annotations import annotations_from_store, perturb_proposals
from labelprop.cli import main
from labelprop.cosine import build_prototypes, cosine_scores
from labelprop.ensemble import EnsemblePredictor, ensemble_scores
from labelprop.hopfield import HopfieldHead, Hyperparams, forward_scores, gradients, init_head, loss
from labelprop.jsonio import write_json
from labelprop.metrics import Prediction, average_precision, evaluate, predictions_from_scores
from labelprop.savings import RetrievalCounts, compute_savings, format_hms, parse_hms
from labelprop.scores import ScoreVector
from labelprop.store import ClassRegistry, EmbeddingRecord, EmbeddingStore, Space
from labelprop.synth import SyntheticConfig, synth_generate
from labelprop.training import train_head
from oracles import central_difference, precision_at_k_ap, relative_error
from published_tables import VENUES


def _random_head(rng, d, p, C, m, beta=None):
    return HopfieldHead(
        "s",
        1.0 / np.sqrt(p) if beta is None else beta,
        rng.standard_normal((m, d, p)) / np.sqrt(d),
        rng.standard_normal((m, d, p)) / np.sqrt(d),
        rng.standard_normal((m, C, d)),
    )


@pytest.mark.acceptance(1, "gradient correctness")
def test_gradient_check():
    hp = Hyperparams(lambda_intra=0.1, lambda_inter=0.01)
    start = time.perf_counter()
    worst = 0.0
    instances = 0
    for m in (1, 2, 3):
        for k in range(7):
            rng = np.random.default_rng(1000 * m + k)
            head = _random_head(rng, d=8, p=4, C=5, m=m)
            X = rng.standard_normal((3, 8))
            y = rng.integers(0, 5, 3)
            g = gradients(head, (X, y), hp).as_dict()

            def f(params):
                return loss(head.replace(**params), (X, y), hp).total

            num = central_difference(f, head.params(), step=1e-5)
            for name in num:
                worst = max(worst, float(relative_error(g[name], num[name]).max()))
            instances += 1
    elapsed = time.perf_counter() - start
    print(f"instances={instances} worst_rel_err={worst:.2e} time={elapsed:.2f}s")
    assert instances >= 20
    assert worst < 1e-4
    assert elapsed < 10


@pytest.mark.acceptance(2, "score hand check and normalization")
def test_scores_hand_and_normalized():
    I = np.eye(2)[None]
    head = HopfieldHead("s", 1.0, I.copy(), I.copy(), np.eye(2)[None])
    np.testing.assert_allclose(forward_scores(head, np.array([[1.0, 0.0]]))[0], [0.73106, 0.26894], atol=1e-5)
    worst = 0.0
    rng = np.random.default_rng(7)
    for _ in range(1000):
        d, p, C, m = (int(v) for v in rng.integers(1, 9, 4))
        head = _random_head(rng, d, p, C, m, beta=float(rng.uniform(0.01, 5)))
        S = forward_scores(head, rng.standard_normal((int(rng.integers(1, 6)), d)) * rng.uniform(0.1, 10))
        assert np.all(S >= 0)
        worst = max(worst, float(np.abs(S.sum(axis=1) - 1).max()))
    print(f"max |row sum - 1| = {worst:.1e}")
    assert worst <= 1e-9


@pytest.mark.acceptance(3, "published savings table reproduction")
def test_savings_table_reproduction():
    start = time.perf_counter()
    for venue, (counts, cells, pct) in VENUES.items():
        rep = compute_savings(RetrievalCounts(dict(zip(("Simple", "Medium", "Complex"), counts))))
        ours = []
        for c in ("Simple", "Medium", "Complex"):
            ours += [rep.saved[c], rep.gt_time[c]]
        ours += [rep.total_saved, rep.total_gt]
        diffs = [abs(parse_hms(format_hms(v)) - parse_hms(cell)) for v, cell in zip(ours, cells)]
        print(f"{venue}: max cell diff {max(diffs)} s, % saved {rep.percent_saved:.2f} vs {pct}")
        assert max(diffs) <= 3, venue
        assert abs(rep.percent_saved - pct) <= 0.2, venue
    assert time.perf_counter() - start < 1


CONFUSION_PAIRS = {"space_a": [(0, 1), (2, 3)], "space_b": [(4, 5), (6, 7)], "space_c": [(8, 9), (0, 2)]}


def _confusable(seed, blend):
    return synth_generate(SyntheticConfig(
        seed=seed,
        num_classes=10,
        dim=32,
        samples_per_class_per_split={"representative": 5, "train": 40, "validation": 40},
        cluster_sigma=1.25,
        confusion_pairs=CONFUSION_PAIRS,
        confusion_blend=blend,
    ))


def _train_all(store, seed):
    heads = {}
    for space in store.spaces:
        head = init_head(store, space, p=16, m=4, seed=seed)
        heads[space], _ = train_head(head, store, "train", Hyperparams(seed=seed))
    return heads


@pytest.mark.acceptance(4, "Hopfield head beats cosine baseline")
def test_heads_beat_cosine():
    start = time.perf_counter()
    store = _confusable(seed=11, blend=0.6)
    heads = _train_all(store, seed=11)
    for space, head in heads.items():
        _, X, y = store.labeled(space, "validation")
        cos = float(np.mean(cosine_scores(build_prototypes(store, space, k=5, seed=11), X).argmax(1) == y))
        hop = float(np.mean(forward_scores(head, X).argmax(1) == y))
        print(f"{space}: hopfield {hop:.3f} cosine {cos:.3f}")
        assert hop >= cos + 0.05, space
    assert time.perf_counter() - start < 120


@pytest.mark.acceptance(5, "ensemble dominates single heads")
def test_ensemble_dominance():
    start = time.perf_counter()
    store = _confusable(seed=12, blend=1.0)
    heads = _train_all(store, seed=12)
    ids, _, y = store.labeled("space_a", "validation")
    queries = {s: store.labeled(s, "validation")[1] for s in store.spaces}
    reports = {}
    for space, head in heads.items():
        S = forward_scores(head, queries[space])
        reports[space] = evaluate(predictions_from_scores(ids, S, y.tolist(), store.registry), store.registry)
    ens = EnsemblePredictor(list(heads.values()), store.registry)
    S = ensemble_scores(ens, queries)
    ens_rep = evaluate(predictions_from_scores(ids, S, y.tolist(), store.registry), store.registry)
    for space, r in reports.items():
        print(f"{space}: acc {r.accuracy:.3f} mAP {r.map:.3f}")
    print(f"ensemble: acc {ens_rep.accuracy:.3f} mAP {ens_rep.map:.3f}")
    assert ens_rep.map >= max(r.map for r in reports.values())
    assert ens_rep.accuracy >= max(r.accuracy for r in reports.values()) + 0.03
    assert time.perf_counter() - start < 180


@pytest.mark.acceptance(6, "average precision oracle equivalence")
def test_ap_oracle():
    start = time.perf_counter()
    checked = 0
    for n in range(1, 13):
        scores = [float(n - i) for i in range(n)]
        for rel in itertools.product((False, True), repeat=n):
            if not any(rel):
                continue
            # present in shuffled order so the implementation has to sort
            order = list(range(n))[::-1]
            got = average_precision([(scores[i], rel[i]) for i in order])
            assert got == precision_at_k_ap(list(rel)), rel
            checked += 1
    # ties keep input order
    assert average_precision([(1.0, False), (1.0, True), (1.0, True)]) == precision_at_k_ap([False, True, True])
    assert average_precision([(1.0, True), (2.0, False), (1.0, False)]) == precision_at_k_ap([False, True, False])
    elapsed = time.perf_counter() - start
    print(f"patterns={checked} time={elapsed:.2f}s")
    assert elapsed < 10


def _chain(workdir, seed):
    cfg = {
        "seed": seed,
        "synth": {"num_classes": 6, "dim": 16, "cluster_sigma": 0.5,
                  "samples_per_class_per_split": {"representative": 4, "train": 20, "validation": 12}},
        "head": {"p": 8, "m": 3},
        "hyperparams": {"epochs": 5},
        "perturb": {"drop_rate": 0.25},
        "paths": {"store": str(workdir / "store.jsonl"), "heads": str(workdir / "heads"), "output": str(workdir / "out")},
    }
    workdir.mkdir(parents=True)
    write_json(workdir / "cfg.json", cfg)
    c = ["--config", str(workdir / "cfg.json")]
    for cmd in (["synth"], ["train", "--workers", "3"], ["perturb"],
                ["label", "--proposals", str(workdir / "out" / "proposals.json")], ["eval"]):
        assert main([cmd[0], *c, *cmd[1:]]) == 0
    return {p.relative_to(workdir).as_posix(): p.read_bytes()
            for p in sorted(workdir.rglob("*")) if p.is_file() and p.name != "cfg.json"}


@pytest.mark.acceptance(7, "determinism of the full chain")
def test_determinism(tmp_path, capsys):
    for seed in (0, 1, 2**40 + 3):
        a = _chain(tmp_path / f"{seed}-a", seed)
        b = _chain(tmp_path / f"{seed}-b", seed)
        assert sorted(a) == sorted(b)
        assert len(a) >= 11
        for name in a:
            assert a[name] == b[name], f"seed {seed}: {name} differs"
    capsys.readouterr()


@pytest.mark.acceptance(8, "degeneracies")
def test_degeneracies():
    rng = np.random.default_rng(3)
    # one class: every score is exactly 1
    head = _random_head(rng, d=4, p=3, C=1, m=3)
    assert np.all(forward_scores(head, rng.standard_normal((10, 4))) == 1.0)

    # one bank: no inter-bank term
    head = _random_head(rng, d=4, p=3, C=5, m=1)
    X, y = rng.standard_normal((6, 4)), rng.integers(0, 5, 6)
    assert loss(head, (X, y), Hyperparams()).inter == 0.0
    assert np.all(gradients(head, (X, y), Hyperparams(lambda_intra=0.0)).dY
                  == gradients(head, (X, y), Hyperparams(lambda_intra=0.0, lambda_inter=5.0)).dY)

    # zero learning rate leaves the head bit-unchanged
    reg = ClassRegistry.from_names(["a", "b", "c"])
    recs = tuple(EmbeddingRecord(f"r{i}", "s", rng.standard_normal(4), i % 3) for i in range(12))
    store = EmbeddingStore({"s": Space(4, recs)}, reg,
                           {"representative": ["r0", "r1", "r2"], "train": [f"r{i}" for i in range(3, 12)]})
    start = init_head(store, "s", p=3, m=2, seed=1)
    for opt in ("adam", "sgd"):
        trained, _ = train_head(start, store, "train", Hyperparams(learning_rate=0.0, epochs=3, optimizer=opt))
        assert trained == start
        for k, v in start.params().items():
            assert v.tobytes() == trained.params()[k].tobytes()

    # drop rate 0 is the identity, drop rate 1 empties the proposals
    props = annotations_from_store(store, "train", with_labels=False)
    assert perturb_proposals(props, 0.0, seed=4) == props
    empty = perturb_proposals(props, 1.0, seed=4)
    assert empty.annotations == () and empty.images == props.images

    # closed-set single-label: micro P = R = F1 = accuracy exactly
    preds = [Prediction(str(i), ScoreVector(rng.dirichlet(np.ones(3))), int(rng.integers(0, 3))) for i in range(97)]
    r = evaluate(preds, reg, stratified=False)
    assert r.micro_precision == r.micro_recall == r.micro_f1 == r.accuracy
