import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from murate.errors import ValidationError
from murate.raters import (
    DirectionalJudgment,
    PairJudgment,
    aggregate_directional,
    aggregate_pair,
    load_directional_judgments,
    load_judgments,
    load_rater_scores,
    margin_filter,
    save_judgments,
)

RATERS = ["r0", "r1", "r2", "r3"]


def scores(values):
    return dict(zip(RATERS, values))


# Shared rater score-map pairs; integer scores so monotone transforms below
# preserve exact ties and strict orderings.
score_maps = st.integers(min_value=1, max_value=6).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(-50, 50), min_size=n, max_size=n),
        st.lists(st.integers(-50, 50), min_size=n, max_size=n),
    )
)


class TestAggregatePair:
    def test_three_of_four_prefer_a(self):
        j = aggregate_pair("A", "B", scores([5, 4, 3, 1]), scores([1, 1, 1, 2]))
        assert j.p_b_over_a == 0.25
        assert j.kind == "english"

    def test_all_ties(self):
        j = aggregate_pair("A", "B", {"r0": 2.0, "r1": 3.0}, {"r0": 2.0, "r1": 3.0})
        assert j.p_b_over_a == 0.5

    def test_two_wins_one_tie_one_loss(self):
        # P(A over B) = (2 + 0.5) / 4 = 0.625
        j = aggregate_pair("A", "B", scores([5, 5, 2, 1]), scores([1, 1, 2, 4]))
        assert j.p_b_over_a == pytest.approx(1 - 0.625, abs=0)

    def test_mismatched_rater_sets(self):
        with pytest.raises(ValidationError, match="rater sets differ"):
            aggregate_pair("A", "B", {"r0": 1.0}, {"r1": 1.0})

    def test_empty_rater_set(self):
        with pytest.raises(ValidationError, match="empty"):
            aggregate_pair("A", "B", {}, {})

    @given(score_maps)
    def test_antisymmetry(self, maps):
        a, b = maps
        sa = {f"r{i}": float(v) for i, v in enumerate(a)}
        sb = {f"r{i}": float(v) for i, v in enumerate(b)}
        fwd = aggregate_pair("A", "B", sa, sb)
        rev = aggregate_pair("B", "A", sb, sa)
        # exact up to one rounding of the two independent divisions
        assert fwd.p_b_over_a + rev.p_b_over_a == pytest.approx(1.0, abs=1e-15)

    @given(score_maps)
    def test_probability_in_unit_interval(self, maps):
        a, b = maps
        sa = {f"r{i}": float(v) for i, v in enumerate(a)}
        sb = {f"r{i}": float(v) for i, v in enumerate(b)}
        assert 0.0 <= aggregate_pair("A", "B", sa, sb).p_b_over_a <= 1.0

    @given(score_maps, st.sampled_from(["affine", "cube", "exp2"]))
    def test_invariant_under_monotone_transform_of_one_rater(self, maps, transform):
        a, b = maps
        sa = {f"r{i}": float(v) for i, v in enumerate(a)}
        sb = {f"r{i}": float(v) for i, v in enumerate(b)}
        fn = {
            "affine": lambda x: 3.0 * x + 7.0,
            "cube": lambda x: x ** 3,
            "exp2": lambda x: math.ldexp(1.0, int(x) // 8),  # exact powers of two
        }[transform]
        base = aggregate_pair("A", "B", sa, sb)
        sa2, sb2 = dict(sa), dict(sb)
        sa2["r0"] = fn(sa["r0"])
        sb2["r0"] = fn(sb["r0"])
        assert aggregate_pair("A", "B", sa2, sb2).p_b_over_a == base.p_b_over_a


class TestAggregateDirectional:
    def test_both_directions_debias(self):
        # Forward: 8 of 20 prefer A; reverse (B shown first): 12 of 20 prefer A,
        # i.e. the reverse's first-shown doc B gets 8 of 20.
        fwd = DirectionalJudgment(rater_id="g", doc_a="A", doc_b="B", votes_a=8, votes_b=12)
        rev = DirectionalJudgment(rater_id="g", doc_a="B", doc_b="A", votes_a=8, votes_b=12)
        j = aggregate_directional(fwd, rev)
        assert j.p_b_over_a == pytest.approx(0.5, abs=0)

    def test_forward_only_unanimous(self):
        fwd = DirectionalJudgment(rater_id="g", doc_a="A", doc_b="B", votes_a=20, votes_b=0)
        assert aggregate_directional(fwd).p_b_over_a == 0.0

    def test_symmetric_case(self):
        fwd = DirectionalJudgment(rater_id="g", doc_a="A", doc_b="B", votes_a=10, votes_b=10)
        rev = DirectionalJudgment(rater_id="g", doc_a="B", doc_b="A", votes_a=10, votes_b=10)
        assert aggregate_directional(fwd, rev).p_b_over_a == 0.5

    def test_pair_mismatch(self):
        fwd = DirectionalJudgment(rater_id="g", doc_a="A", doc_b="B", votes_a=1, votes_b=1)
        bad = DirectionalJudgment(rater_id="g", doc_a="A", doc_b="C", votes_a=1, votes_b=1)
        with pytest.raises(ValidationError, match="mirror"):
            aggregate_directional(fwd, bad)

    def test_zero_votes_rejected(self):
        with pytest.raises(ValidationError, match="vote"):
            DirectionalJudgment(rater_id="g", doc_a="A", doc_b="B", votes_a=0, votes_b=0)


def pj(p, kind="english"):
    return PairJudgment(doc_a="A", doc_b="B", p_b_over_a=p, kind=kind)


class TestMarginFilter:
    def test_high_confidence_kept(self):
        assert margin_filter([pj(0.9)], 0.5) == [pj(0.9)]

    def test_low_confidence_dropped(self):
        assert margin_filter([pj(0.6)], 0.5) == []

    def test_parallel_exempt(self):
        kept = margin_filter([pj(0.5, kind="parallel")], 0.5)
        assert len(kept) == 1

    def test_zero_margin_is_identity(self):
        items = [pj(0.0), pj(0.5), pj(1.0), pj(0.5, kind="parallel")]
        assert margin_filter(items, 0.0) == items

    def test_order_preserved(self):
        items = [pj(1.0), pj(0.6), pj(0.0), pj(0.9)]
        assert margin_filter(items, 0.5) == [pj(1.0), pj(0.0), pj(0.9)]

    @given(st.lists(st.floats(0, 1, allow_nan=False), max_size=30),
           st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_margin(self, ps, m1, m2):
        lo, hi = sorted([m1, m2])
        items = [pj(p) for p in ps]
        kept_hi = {id(j) for j in margin_filter(items, hi)}
        kept_lo = {id(j) for j in margin_filter(items, lo)}
        assert kept_hi <= kept_lo

    def test_bad_margin(self):
        with pytest.raises(ValidationError):
            margin_filter([], 1.5)


class TestPairJudgmentInvariants:
    def test_self_pair_rejected(self):
        with pytest.raises(ValidationError, match="degenerate"):
            PairJudgment(doc_a="A", doc_b="A", p_b_over_a=0.5, kind="english")

    def test_probability_bounds(self):
        with pytest.raises(ValidationError):
            PairJudgment(doc_a="A", doc_b="B", p_b_over_a=1.5, kind="english")

    def test_parallel_must_be_neutral(self):
        with pytest.raises(ValidationError, match="0.5"):
            PairJudgment(doc_a="A", doc_b="B", p_b_over_a=0.4, kind="parallel")


class TestFileIO:
    def test_rater_scores_round_trip(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        path.write_text(
            json.dumps({"rater_id": "r0", "doc_id": "d1", "score": 1.5}) + "\n"
            + json.dumps({"rater_id": "r0", "doc_id": "d2", "score": -2.0}) + "\n",
            encoding="utf-8",
        )
        assert load_rater_scores(path) == {"r0": {"d1": 1.5, "d2": -2.0}}

    def test_nan_score_rejected(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        path.write_text('{"rater_id": "r0", "doc_id": "d1", "score": NaN}\n', encoding="utf-8")
        with pytest.raises(ValidationError, match="finite"):
            load_rater_scores(path)

    def test_duplicate_rater_doc_rejected(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        rec = json.dumps({"rater_id": "r0", "doc_id": "d1", "score": 1.0})
        path.write_text(rec + "\n" + rec + "\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="duplicate"):
            load_rater_scores(path)

    def test_directional_ba_records_swapped_to_presentation_order(self, tmp_path):
        path = tmp_path / "dir.jsonl"
        path.write_text(
            json.dumps({"rater_id": "g", "doc_a": "A", "doc_b": "B",
                        "votes_a": 3, "votes_b": 1, "order": "ab"}) + "\n"
            + json.dumps({"rater_id": "g", "doc_a": "A", "doc_b": "B",
                          "votes_a": 3, "votes_b": 1, "order": "ba"}) + "\n",
            encoding="utf-8",
        )
        fwd, rev = load_directional_judgments(path)
        assert (fwd.doc_a, fwd.votes_a) == ("A", 3)
        assert (rev.doc_a, rev.votes_a) == ("B", 1)
        assert aggregate_directional(fwd, rev).p_b_over_a == pytest.approx(0.25)

    def test_judgments_round_trip(self, tmp_path):
        items = [
            PairJudgment(doc_a="A", doc_b="B", p_b_over_a=0.25, kind="english"),
            PairJudgment(doc_a="A:de", doc_b="A:fr", p_b_over_a=0.5,
                         kind="parallel", source_pair="A"),
        ]
        path = tmp_path / "judgments.jsonl"
        save_judgments(items, path)
        assert load_judgments(path) == items
