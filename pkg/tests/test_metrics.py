import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgslow.errors import EmptyReport
from dgslow.metrics import (
    AttackSuccessRecord,
    MetricScores,
    aggregate,
    bleu,
    meteor_lite,
    rouge_l,
    score_generation,
    success,
)

_TOKENS = st.lists(st.sampled_from(list("abcdefg")), min_size=1, max_size=10)


def _oracle_bleu(cand, refs):
    """Independent brute-force implementation of the declared BLEU variant."""
    logs = []
    for n in range(1, 5):
        cgrams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
        matches = 0
        for gram, count in cgrams.items():
            best = max((Counter(tuple(r[i : i + n]) for i in range(len(r) - n + 1))[gram] for r in refs))
            matches += min(count, best)
        total = max(len(cand) - n + 1, 0)
        if n == 1 and matches == 0:
            return 0.0
        p = (matches + 1) / (total + 1) if matches == 0 else matches / total
        logs.append(math.log(p))
    c = len(cand)
    r = min((len(ref) for ref in refs), key=lambda rl: (abs(rl - c), rl))
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(sum(logs) / 4)


class TestBleu:
    def test_identity(self):
        assert bleu(["the", "cat"], [["the", "cat"]]) == pytest.approx(1.0)
        assert bleu(list("abcde"), [list("abcde")]) == pytest.approx(1.0)

    def test_zero_overlap_is_zero(self):
        # frozen: no unigram overlap scores exactly 0 under the declared smoothing
        assert bleu(["x", "y", "z"], [["a", "b", "c"]]) == 0.0

    def test_partial_overlap_hand_value(self):
        # cand "a b c", ref "a b d": p1=2/3, p2=1/2, p3 smoothed 1/2, p4 smoothed 1, BP=1
        expected = (2 / 3 * 1 / 2 * 1 / 2 * 1.0) ** 0.25
        assert bleu(["a", "b", "c"], [["a", "b", "d"]]) == pytest.approx(expected, abs=1e-12)

    def test_multi_reference_clipping(self):
        cand = ["a", "a", "b"]
        assert bleu(cand, [["a", "b"], ["a", "a"]]) == pytest.approx(_oracle_bleu(cand, [["a", "b"], ["a", "a"]]))

    @given(_TOKENS, _TOKENS)
    @settings(max_examples=150)
    def test_matches_oracle(self, cand, ref):
        assert bleu(cand, [ref]) == pytest.approx(_oracle_bleu(cand, [ref]), abs=1e-12)

    @given(_TOKENS, _TOKENS)
    @settings(max_examples=100)
    def test_bounded(self, cand, ref):
        assert 0.0 <= bleu(cand, [ref]) <= 1.0 + 1e-12


class TestRougeL:
    def test_hand_value(self):
        # LCS("the cat", "the cat sat") = 2 -> P=1, R=2/3, F=0.8
        assert rouge_l(["the", "cat"], [["the", "cat", "sat"]]) == pytest.approx(0.8, abs=1e-12)

    def test_identity(self):
        assert rouge_l(list("abc"), [list("abc")]) == pytest.approx(1.0)

    def test_disjoint(self):
        assert rouge_l(["x"], [["y"]]) == 0.0

    def test_multi_reference_max(self):
        assert rouge_l(["a", "b"], [["z"], ["a", "b"]]) == pytest.approx(1.0)

    @given(_TOKENS, _TOKENS, st.data())
    @settings(max_examples=150)
    def test_deleting_matched_token_never_raises_recall(self, cand, ref, data):
        matched = [i for i, tok in enumerate(cand) if tok in ref]
        if not matched or len(cand) == 1:
            return
        i = data.draw(st.sampled_from(matched))
        shorter = cand[:i] + cand[i + 1 :]

        def recall(c):
            prev = [0] * (len(ref) + 1)
            for x in c:
                cur = [0]
                for j, y in enumerate(ref, 1):
                    cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
                prev = cur
            return prev[-1] / len(ref)

        assert recall(shorter) <= recall(cand) + 1e-12


class TestMeteorLite:
    def test_identity_m4(self):
        # matches=4, chunks=1 -> 1 * (1 - 0.5/64) = 0.9921875
        assert meteor_lite(list("abcd"), [list("abcd")]) == pytest.approx(0.9921875, abs=1e-12)

    def test_zero_matches(self):
        assert meteor_lite(["x"], [["y"]]) == 0.0

    def test_swapped_pair(self):
        # "b a" vs "a b": matches=2, chunks=2, F=1, penalty=0.5
        assert meteor_lite(["b", "a"], [["a", "b"]]) == pytest.approx(0.5, abs=1e-12)

    def test_identity_general(self):
        for m in (1, 2, 3, 5, 8):
            toks = [f"w{i}" for i in range(m)]
            expected = 1.0 - 0.5 * (1 / m) ** 3
            assert meteor_lite(toks, [toks]) == pytest.approx(expected, abs=1e-12)

    @given(_TOKENS, _TOKENS)
    @settings(max_examples=100)
    def test_bounded(self, cand, ref):
        assert 0.0 <= meteor_lite(cand, [ref]) <= 1.0


class TestCombinedAndSuccess:
    def test_combined_is_mean(self):
        scores = MetricScores(bleu=0.3, rouge_l=0.6, meteor_lite=0.9)
        assert abs(scores.combined - 0.6) < 1e-12

    def test_success_thresholds(self):
        hi = MetricScores(0.5, 0.5, 0.5)
        lo = MetricScores(0.45, 0.45, 0.45)
        assert success(hi, lo, cosine=0.8, eps=0.7, tau=0.0).success
        assert not success(hi, lo, cosine=0.6, eps=0.7, tau=0.0).success
        # zero drop with tau=0 fails the strict inequality
        assert not success(hi, hi, cosine=0.8, eps=0.7, tau=0.0).success
        assert not success(hi, hi, cosine=0.7, eps=0.7, tau=0.0).success  # cosine strict too

    def test_empty_generation_scores_zero(self):
        s = score_generation([], [["a"]])
        assert s.combined == 0.0


class _Outcome:
    def __init__(self, gl, scores, payload):
        self.gl_after = gl
        self.scores_after = scores
        self._payload = payload

    def summary(self):
        return self._payload


class TestAggregate:
    def _fixture(self):
        rows = [
            (True, 0.9, 10, 0.5, 0.6, 0.7),
            (False, 0.8, 8, 0.1, 0.2, 0.3),
            (True, 0.75, 20, 0.0, 0.1, 0.2),
            (False, 0.95, 6, 0.4, 0.4, 0.4),
            (True, 0.85, 14, 0.2, 0.3, 0.1),
        ]
        records = [AttackSuccessRecord(cosine=c, metric_drop=0.1, success=s) for s, c, *_ in rows]
        outcomes = [
            _Outcome(gl, MetricScores(b, r, m), {"i": i})
            for i, (_, _, gl, b, r, m) in enumerate(rows)
        ]
        return rows, records, outcomes

    def test_means_match_hand_computation(self):
        rows, records, outcomes = self._fixture()
        report = aggregate(records, outcomes)
        assert report["n"] == 5
        assert report["asr"] == pytest.approx(3 / 5)
        assert report["mean_gl"] == pytest.approx(sum(r[2] for r in rows) / 5)
        assert report["mean_bleu"] == pytest.approx(sum(r[3] for r in rows) / 5)
        assert report["mean_rouge_l"] == pytest.approx(sum(r[4] for r in rows) / 5)
        assert report["mean_meteor_lite"] == pytest.approx(sum(r[5] for r in rows) / 5)
        assert report["mean_cosine"] == pytest.approx(sum(r[1] for r in rows) / 5)
        assert len(report["records"]) == 5

    def test_asr_equals_recount(self):
        _, records, outcomes = self._fixture()
        report = aggregate(records, outcomes)
        assert report["asr"] == sum(r.success for r in records) / len(records)

    def test_single_and_all_success(self):
        one = [AttackSuccessRecord(0.9, 0.1, True), AttackSuccessRecord(0.9, 0.1, False)]
        outs = [_Outcome(1, MetricScores(0, 0, 0), {}), _Outcome(1, MetricScores(0, 0, 0), {})]
        assert aggregate(one, outs)["asr"] == 0.5
        both = [AttackSuccessRecord(0.9, 0.1, True)] * 2
        assert aggregate(both, outs)["asr"] == 1.0

    def test_empty_raises(self):
        with pytest.raises(EmptyReport):
            aggregate([], [])
