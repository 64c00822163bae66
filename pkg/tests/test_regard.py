import json
import random

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from regard_audit.errors import RegardError
from regard_audit.regard import (
    HttpRegardScorer,
    LexiconRegardScorer,
    RegardDiffRow,
    RegardResult,
    group_diff,
)


def result(scalar):
    pos = max(scalar, 0.0)
    neg = max(-scalar, 0.0)
    return RegardResult(p_negative=neg, p_neutral=1 - pos - neg, p_positive=pos, p_other=0.0)


class TestRegardResult:
    def test_scalar_is_positive_minus_negative(self):
        r = RegardResult(p_negative=0.2, p_neutral=0.3, p_positive=0.4, p_other=0.1)
        assert r.scalar == pytest.approx(0.2)

    def test_rejects_bad_sum(self):
        with pytest.raises(RegardError):
            RegardResult(p_negative=0.5, p_neutral=0.5, p_positive=0.5, p_other=0.0)

    def test_scalar_ignores_neutral_other_split(self):
        a = RegardResult(p_negative=0.1, p_neutral=0.6, p_positive=0.3, p_other=0.0)
        b = RegardResult(p_negative=0.1, p_neutral=0.0, p_positive=0.3, p_other=0.6)
        assert a.scalar == b.scalar


class TestLexiconScorer:
    def test_empty_text_is_neutral(self):
        r = LexiconRegardScorer().score("")
        assert r.scalar == 0.0
        assert r.p_neutral == 1.0

    def test_single_positive_token(self):
        r = LexiconRegardScorer(positive={"renowned"}, negative=set()).score("renowned")
        assert r.scalar == 1.0
        assert r.p_positive == 1.0

    def test_paper_negative_pair(self):
        # both words sit in the shipped negative list
        r = LexiconRegardScorer().score("discrimination and challenges")
        assert r.scalar == -1.0

    def test_mixed_counts(self):
        scorer = LexiconRegardScorer(positive={"good"}, negative={"bad"})
        r = scorer.score("good good bad words")
        assert r.scalar == pytest.approx(1 / 3)
        assert r.p_neutral == pytest.approx(2 / 3)

    def test_case_insensitive(self):
        scorer = LexiconRegardScorer(positive={"renowned"}, negative=set())
        assert scorer.score("RENOWNED").scalar == 1.0

    @given(st.lists(st.sampled_from(["good", "bad", "plain", "words"]), max_size=30),
           st.randoms())
    @settings(max_examples=50, deadline=None)
    def test_order_free(self, tokens, rng):
        scorer = LexiconRegardScorer(positive={"good"}, negative={"bad"})
        base = scorer.score(" ".join(tokens))
        shuffled = tokens[:]
        rng.shuffle(shuffled)
        again = scorer.score(" ".join(shuffled))
        assert base == again


class TestGroupDiff:
    def test_equal_means_give_zero_diff(self):
        rows = group_diff([("control", result(0.5)), ("gay_man", result(0.5))])
        assert rows[-1].diff_vs_control == pytest.approx(0.0)

    def test_sign_convention(self):
        rows = group_diff([("control", result(0.5)), ("gay_man", result(0.2))])
        gm = [r for r in rows if r.identity == "gay_man"][0]
        assert gm.diff_vs_control == pytest.approx(0.3)

    def test_control_row_is_zero(self):
        rows = group_diff([("control", result(0.7)), ("control", result(0.1))])
        assert rows == [RegardDiffRow("control", pytest.approx(0.4), 0.0, 2)]

    def test_missing_control_is_error(self):
        with pytest.raises(RegardError):
            group_diff([("gay_man", result(0.2))])

    def test_permutation_invariant(self):
        records = [("control", result(0.5)), ("gay_man", result(0.1)),
                   ("straight_man", result(0.4)), ("control", result(0.3))]
        base = group_diff(records)
        rng = random.Random(3)
        for _ in range(5):
            shuffled = records[:]
            rng.shuffle(shuffled)
            assert group_diff(shuffled) == base


class FakeSession:
    """Stands in for requests.Session against the /v1/regard contract."""

    def __init__(self, fail_status=None):
        self.fail_status = fail_status
        self.batches = []

    def post(self, url, json=None, timeout=None):
        self.batches.append(list(json["texts"]))
        if self.fail_status:
            return FakeResponse(self.fail_status, {})
        results = []
        for text in json["texts"]:
            neg = 0.8 if "bad" in text else 0.1
            results.append({"negative": neg, "neutral": 0.9 - neg, "positive": 0.1, "other": 0.0})
        return FakeResponse(200, {"results": results})

    def get(self, url, timeout=None):
        return FakeResponse(200, {})


class FakeResponse:
    def __init__(self, status_code, body):
        self.status_code = status_code
        self._body = body

    def json(self):
        return self._body


class TestHttpScorer:
    def test_batches_of_at_most_64(self):
        session = FakeSession()
        scorer = HttpRegardScorer("http://svc.invalid", session=session)
        results = scorer.score_many([f"text {i}" for i in range(65)])
        assert [len(b) for b in session.batches] == [64, 1]
        assert len(results) == 65

    def test_order_aligned(self):
        scorer = HttpRegardScorer("http://svc.invalid", session=FakeSession())
        results = scorer.score_many(["bad thing", "fine thing"])
        assert results[0].p_negative == pytest.approx(0.8)
        assert results[1].p_negative == pytest.approx(0.1)

    def test_http_failure_raises_no_fallback(self):
        scorer = HttpRegardScorer("http://svc.invalid", session=FakeSession(fail_status=500))
        with pytest.raises(RegardError, match="500"):
            scorer.score("anything")

    def test_healthz_probe(self):
        assert HttpRegardScorer("http://svc.invalid", session=FakeSession()).healthy()
