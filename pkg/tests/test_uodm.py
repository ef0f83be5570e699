from __future__ import annotations

import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tidyplan.gridworld import Receptacle
from tidyplan.perception import Knowledge
from tidyplan.uodm import (
    DegenerateTableError,
    EmptyLabelError,
    UodmConfig,
    UodmError,
    UodmModel,
    apply_predictions,
    embed_orr,
    filter_loss,
    predict_locations,
    prune_candidate,
    rank_candidates,
    rank_loss,
    split_table,
    train_uodm,
)
from tidyplan.vocab import PriorRow, load_prior_table


def rec(rid, label):
    return Receptacle(rid, label, "room0", ((0, 0),), False, (0, 0))


# -- embedding


def test_embedding_is_deterministic_and_unit_norm():
    a = embed_orr("apple", "kitchen|fridge")
    b = embed_orr("apple", "kitchen|fridge")
    assert np.array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert a.shape == (64,)


def test_embedding_is_read_only():
    with pytest.raises(ValueError):
        embed_orr("apple", "kitchen|fridge")[0] = 1.0


def test_embedding_separates_objects():
    assert not np.allclose(embed_orr("apple", "kitchen|fridge"), embed_orr("vase", "kitchen|fridge"))


def test_no_collisions_over_vocabulary():
    rows = load_prior_table()
    objs = sorted({r.object_label for r in rows})
    rrs = sorted({r.room_receptacle_label for r in rows})
    vecs = np.stack([embed_orr(o, r) for o, r in itertools.product(objs, rrs)])
    assert len(np.unique(vecs.round(12), axis=0)) == len(objs) * len(rrs)


@pytest.mark.parametrize("pair", [("", "x"), ("apple", ""), ("  ", "kitchen|fridge")])
def test_empty_label_rejected(pair):
    with pytest.raises(EmptyLabelError):
        embed_orr(*pair)


# -- losses


def test_filter_loss_examples():
    assert filter_loss([[1.0, 0.0]], [[1.0, 0.0]]) == pytest.approx(0.0, abs=1e-12)
    assert filter_loss([[0.5, 0.5]], [[0.0, 1.0]]) == pytest.approx(np.log(2), abs=1e-12)
    l1 = filter_loss([[0.9, 0.1]], [[1, 0]])
    l2 = filter_loss([[0.3, 0.7]], [[1, 0]])
    assert filter_loss([[0.9, 0.1], [0.3, 0.7]], [[1, 0], [1, 0]]) == pytest.approx((l1 + l2) / 2, abs=1e-12)


def test_filter_loss_clamps_zero_probability():
    assert filter_loss([[0.0, 1.0]], [[1, 0]]) == pytest.approx(-np.log(1e-12))


def test_rank_loss_examples():
    assert rank_loss([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert rank_loss([1, 0], [0, 1]) == pytest.approx(1.0)
    assert rank_loss([0.5], [0.0]) == pytest.approx(0.25)
    with pytest.raises(UodmError):
        rank_loss([0.1, 0.2], [0.1])


# -- training


def test_held_out_quality(uodm_trained):
    _, report = uodm_trained
    assert report.filter_accuracy >= 0.9
    assert report.rank_spearman >= 0.7
    assert report.n_heldout > 0 and report.n_train > report.n_heldout


def test_split_is_stratified_and_deterministic():
    rows = load_prior_table()
    a = split_table(rows, 0.2, 0)
    b = split_table(rows, 0.2, 0)
    assert a == b
    train, held = a
    assert len(train) + len(held) == len(rows)
    frac = lambda rs: np.mean([r.probable for r in rs])  # noqa: E731
    assert abs(frac(train) - frac(held)) < 0.05


def test_losses_decrease_on_average_over_seeds():
    curves_f, curves_r = [], []
    for seed in range(5):
        _, rep = train_uodm(config=UodmConfig(epochs=150, seed=seed))
        curves_f.append(rep.filter_curve)
        curves_r.append(rep.rank_curve)
    for curves in (curves_f, curves_r):
        mean = np.mean(curves, axis=0)
        assert np.all(np.diff(mean) <= 1e-12)


def test_single_class_table_rejected():
    rows = [PriorRow("apple", "kitchen|fridge", True, 0.9), PriorRow("vase", "kitchen|fridge", True, 0.2)]
    with pytest.raises(DegenerateTableError):
        train_uodm(rows)


def test_apple_goes_to_the_fridge(uodm_model):
    rows = load_prior_table()
    rrs = sorted({r.room_receptacle_label for r in rows})
    cands = [rec(f"r{i:02d}", lbl) for i, lbl in enumerate(rrs)]
    assert rank_candidates(uodm_model, "apple", cands)[0].label == "kitchen|fridge"


def test_rescaled_scores_keep_candidate_order():
    rows = load_prior_table()
    top = max(r.score for r in rows)
    scaled = [replace(r, score=r.score * 0.5 / (top * 0.5)) for r in rows]
    cfg = UodmConfig(holdout=0.0)
    a, _ = train_uodm(rows, cfg)
    b, _ = train_uodm(scaled, cfg)
    rrs = sorted({r.room_receptacle_label for r in rows})
    cands = [rec(f"r{i:02d}", lbl) for i, lbl in enumerate(rrs)]
    for obj in sorted({r.object_label for r in rows}):
        assert [c.id for c in rank_candidates(a, obj, cands)] == [c.id for c in rank_candidates(b, obj, cands)]


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 64), elements=st.floats(-10, 10)))
def test_filter_output_is_a_distribution(x):
    model = UodmModel(rng=np.random.default_rng(0))
    p = model.filter_probs(x)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(p >= 0)


def test_checkpoint_round_trip(tmp_path, uodm_model):
    path = tmp_path / "u.ckpt"
    uodm_model.save(path)
    loaded = UodmModel.load(path)
    x = uodm_model.embed([("apple", "kitchen|fridge"), ("vase", "bathroom|sink")])
    assert np.array_equal(loaded.filter_probs(x), uodm_model.filter_probs(x))
    assert np.array_equal(loaded.rank_scores(x), uodm_model.rank_scores(x))


# -- prediction and pruning


class StubModel(UodmModel):
    """Fixed filter/ranker outputs per room-receptacle label."""

    def __init__(self, table):
        super().__init__()
        self.table = table

    def score(self, object_label, rr_labels):
        return (
            np.array([self.table[r][0] for r in rr_labels], dtype=bool),
            np.array([self.table[r][1] for r in rr_labels], dtype=float),
        )


def test_single_candidate_is_forced():
    model = StubModel({"a|x": (False, 0.0)})
    out = predict_locations(model, {"o1": "apple"}, {"o1": [rec("r1", "a|x")]})
    assert out["o1"][1][0] == "r1"


def test_sorted_by_score_with_id_ties():
    model = StubModel({"a|x": (True, 0.9), "a|y": (True, 0.2), "a|z": (True, 0.4), "a|w": (True, 0.4)})
    cands = [rec("r1", "a|x"), rec("r2", "a|y"), rec("r4", "a|w"), rec("r3", "a|z")]
    assert [r.id for r in rank_candidates(model, "apple", cands)] == ["r1", "r3", "r4", "r2"]


def test_filtered_candidates_are_dropped_with_fallback():
    model = StubModel({"a|x": (True, 0.1), "a|y": (False, 0.9)})
    assert [r.id for r in rank_candidates(model, "apple", [rec("r1", "a|x"), rec("r2", "a|y")])] == ["r1"]
    model = StubModel({"a|x": (False, 0.1), "a|y": (False, 0.9)})
    assert [r.id for r in rank_candidates(model, "apple", [rec("r1", "a|x"), rec("r2", "a|y")])] == ["r2", "r1"]


def make_knowledge():
    recs = (rec("r1", "a|x"), rec("r2", "a|y"), rec("r3", "a|z"))
    k = Knowledge(goals={}, receptacles=recs, surface=np.zeros((2, 2), bool), unseen={"a", "b"})
    k.candidate_receptacles = {"a": ["r1", "r2", "r3"], "b": ["r1", "r2", "r3"]}
    return k


def test_prune_moves_to_next_candidate():
    k = make_knowledge()
    apply_predictions(k, None)
    assert k.predicted["a"][0] == "r1"
    prune_candidate(k, "a", "r1")
    assert k.predicted["a"][0] == "r2"
    assert k.discovery_attempts == 1
    assert k.candidate_receptacles["b"] == ["r1", "r2", "r3"]


def test_prune_sole_candidate_flags_unfindable():
    k = make_knowledge()
    k.candidate_receptacles["a"] = ["r3"]
    prune_candidate(k, "a", "r3")
    assert "a" in k.unfindable and "a" not in k.predicted


def test_prune_requires_candidate():
    k = make_knowledge()
    with pytest.raises(UodmError):
        prune_candidate(k, "a", "r9")


def test_pruned_receptacle_never_predicted_again(uodm_model):
    rows = load_prior_table()
    rrs = sorted({r.room_receptacle_label for r in rows})[:6]
    recs = tuple(rec(f"r{i}", lbl) for i, lbl in enumerate(rrs))
    k = Knowledge(goals={}, receptacles=recs, surface=np.zeros((2, 2), bool), unseen={"a"})
    from tidyplan.perception import GoalSpec

    k.goals["a"] = GoalSpec("a", "apple", (1, 1), (0, 0))
    k.candidate_receptacles = {"a": [r.id for r in recs]}
    pruned = set()
    while k.candidate_receptacles["a"]:
        apply_predictions(k, uodm_model)
        rid = k.predicted["a"][0]
        assert rid not in pruned
        pruned.add(rid)
        prune_candidate(k, "a", rid)
    assert pruned == {r.id for r in recs}
