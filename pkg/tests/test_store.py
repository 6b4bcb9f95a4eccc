import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelprop.store import (
    ClassRegistry,
    EmbeddingRecord,
    EmbeddingStore,
    Space,
    StoreError,
    load_store,
    save_store,
    split_assign,
)
from labelprop.synth import SyntheticConfig, synth_generate


def _write(path, lines):
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")


HEADER = {
    "format": "embstore/1",
    "registry": [{"id": 0, "name": "apple", "complexity": "Simple"}, {"id": 1, "name": "fork", "complexity": "Complex"}],
    "spaces": {"space_a": 4},
    "splits": {"train": ["a"]},
}


def test_registry_rejects_gaps_and_duplicates():
    with pytest.raises(StoreError):
        ClassRegistry.from_json([{"id": 1, "name": "x", "complexity": "Simple"}])
    with pytest.raises(StoreError):
        ClassRegistry.from_names(["x", "x"])
    with pytest.raises(StoreError):
        ClassRegistry.from_names(["x", ""])


def test_load_two_records(tmp_path):
    p = tmp_path / "s.jsonl"
    _write(p, [HEADER, {"id": "a", "space": "space_a", "vector": [1, 2, 3, 4], "class_id": 0},
               {"id": "b", "space": "space_a", "vector": [0.5, 0, 0, 1]}])
    store = load_store(p)
    assert store.dim("space_a") == 4
    assert [r.id for r in store.records("space_a")] == ["a", "b"]
    assert store.records("space_a")[1].class_id is None
    assert store.splits["train"] == ("a",)


def test_empty_file(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_text("")
    with pytest.raises(StoreError, match="no records"):
        load_store(p)


def test_dimension_mismatch_names_record(tmp_path):
    p = tmp_path / "s.jsonl"
    _write(p, [HEADER, {"id": "short", "space": "space_a", "vector": [1, 2, 3]}])
    with pytest.raises(StoreError, match="short"):
        load_store(p)


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_text(json.dumps(HEADER) + "\n{not json\n")
    with pytest.raises(StoreError, match="line 2"):
        load_store(p)


def test_unknown_class_name_and_duplicate_id(tmp_path):
    p = tmp_path / "s.jsonl"
    _write(p, [HEADER, {"id": "a", "space": "space_a", "vector": [1, 2, 3, 4], "class": "pear"}])
    with pytest.raises(StoreError, match="pear"):
        load_store(p)
    _write(p, [HEADER, {"id": "a", "space": "space_a", "vector": [1, 2, 3, 4], "class": "fork"},
               {"id": "a", "space": "space_a", "vector": [1, 2, 3, 4]}])
    with pytest.raises(StoreError, match="duplicate"):
        load_store(p)


def test_class_name_resolves(tmp_path):
    p = tmp_path / "s.jsonl"
    _write(p, [HEADER, {"id": "a", "space": "space_a", "vector": [1, 2, 3, 4], "class": "fork"}])
    assert load_store(p).records("space_a")[0].class_id == 1


def test_record_in_two_splits_rejected(tiny_store):
    with pytest.raises(StoreError, match="both"):
        tiny_store.with_splits({"train": ["r1"], "validation": ["r1"]})


def test_non_finite_vector_rejected():
    with pytest.raises(StoreError):
        EmbeddingRecord("x", "s", np.array([1.0, np.nan]))


def test_round_trip(tmp_path, tiny_store):
    p = tmp_path / "s.jsonl"
    save_store(tiny_store, p)
    assert load_store(p) == tiny_store


def test_round_trip_empty_splits(tmp_path, tiny_store):
    store = tiny_store.with_splits({})
    p = tmp_path / "s.jsonl"
    save_store(store, p)
    header = json.loads(p.read_text().splitlines()[0])
    assert header["splits"] == {"representative": [], "train": [], "validation": []}
    assert load_store(p) == store


def test_three_spaces_grouped(tmp_path):
    store = synth_generate(SyntheticConfig(seed=1, num_classes=3, dim=5, spaces=("x", "y", "z"),
                                           samples_per_class_per_split={"train": 2}))
    p = tmp_path / "s.jsonl"
    save_store(store, p)
    spaces_in_file = [json.loads(ln)["space"] for ln in p.read_text().splitlines()[1:]]
    # records appear as contiguous blocks, one per space, in declaration order
    blocks = [s for i, s in enumerate(spaces_in_file) if i == 0 or spaces_in_file[i - 1] != s]
    assert blocks == ["x", "y", "z"]
    again = load_store(p)
    assert again == store
    assert [len(again.records(s)) for s in "xyz"] == [6, 6, 6]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3), st.integers(0, 1))
def test_round_trip_is_bit_exact(tmp_path_factory, values, cls):
    reg = ClassRegistry.from_names(["a", "b"])
    store = EmbeddingStore({"s": Space(3, (EmbeddingRecord("r", "s", np.array(values), cls),))}, reg)
    p = tmp_path_factory.mktemp("rt") / "s.jsonl"
    save_store(store, p)
    back = load_store(p).records("s")[0].vector
    assert back.tobytes() == np.array(values).tobytes()


def test_unwritable_path(tiny_store, tmp_path):
    with pytest.raises(StoreError, match="cannot write"):
        save_store(tiny_store, tmp_path / "missing" / "dir" / "s.jsonl")


# ---------------------------------------------------------------- splits


def _flat_store(n_per_class=10, classes=10):
    cfg = SyntheticConfig(seed=0, num_classes=classes, dim=4, spaces=("a", "b"),
                          samples_per_class_per_split={"train": n_per_class})
    return synth_generate(cfg).with_splits({})


def test_split_all_representative():
    store = split_assign(_flat_store(), {"representative": 1.0}, seed=0)
    assert len(store.splits["representative"]) == 100
    assert store.splits["train"] == () and store.splits["validation"] == ()


def test_split_sizes_and_stratification():
    store = split_assign(_flat_store(), {"representative": 0.1, "train": 0.8, "validation": 0.1}, seed=5)
    assert [len(store.splits[s]) for s in ("representative", "train", "validation")] == [10, 80, 10]
    labels = store.class_ids_by_record()
    for s, per_class in (("representative", 1), ("train", 8), ("validation", 1)):
        counts = np.bincount([labels[r] for r in store.splits[s]], minlength=10)
        assert (counts == per_class).all()


def test_split_deterministic_and_seed_sensitive():
    base = _flat_store()
    fr = {"representative": 0.2, "train": 0.5, "validation": 0.3}
    assert split_assign(base, fr, 7).splits == split_assign(base, fr, 7).splits
    assert split_assign(base, fr, 7).splits != split_assign(base, fr, 8).splits


def test_split_guarantees_representative():
    store = split_assign(_flat_store(n_per_class=3), {"train": 0.5, "validation": 0.5}, seed=1)
    labels = store.class_ids_by_record()
    assert sorted({labels[r] for r in store.splits["representative"]}) == list(range(10))


def test_split_fraction_sum_checked():
    with pytest.raises(StoreError, match="sum to 1"):
        split_assign(_flat_store(), {"train": 0.5, "validation": 0.4}, seed=0)


def test_split_missing_class():
    reg = ClassRegistry.from_names(["a", "b"])
    store = EmbeddingStore({"s": Space(1, (EmbeddingRecord("r", "s", np.array([1.0]), 0),))}, reg)
    with pytest.raises(StoreError, match="too few"):
        split_assign(store, {"train": 1.0}, seed=0)
