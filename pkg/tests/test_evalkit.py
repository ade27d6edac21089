"""Correlation, normalization and blending tests."""
import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, strategies as st

from advmt.evalkit import (EvalDataError, ScoredPair, UndefinedCorrelation,
                           average_ranks, blend, correlate, minmax_normalize,
                           pearson, read_eval_file, spearman, write_report)


class TestPearson:
    def test_hand_example(self):
        r, _ = pearson([1, 2, 3, 4], [1, 3, 2, 4])
        assert r == pytest.approx(0.8)

    def test_perfect_correlation(self):
        r, p = pearson([1, 2, 3], [10, 20, 30])
        assert r == pytest.approx(1.0) and p == 0.0

    def test_perfect_anticorrelation(self):
        r, _ = pearson([1, 2, 3], [3, 2, 1])
        assert r == pytest.approx(-1.0)

    def test_zero_variance_undefined(self):
        with pytest.raises(UndefinedCorrelation):
            pearson([1, 1, 1], [1, 2, 3])

    def test_too_few_samples(self):
        with pytest.raises(UndefinedCorrelation):
            pearson([1, 2], [1, 2])

    def test_length_mismatch(self):
        with pytest.raises(UndefinedCorrelation):
            pearson([1, 2, 3], [1, 2])

    def test_pvalue_matches_scipy(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=25), rng.normal(size=25)
        _, p = pearson(list(x), list(y))
        assert p == pytest.approx(scipy.stats.pearsonr(x, y).pvalue, abs=1e-8)


class TestSpearman:
    def test_monotone_nonlinear_is_one(self):
        x = [1, 2, 3, 4, 5]
        r, _ = spearman(x, [v ** 3 for v in x])
        assert r == pytest.approx(1.0)

    def test_tie_case(self):
        r, _ = spearman([1, 1, 2], [3, 5, 9])
        assert r == pytest.approx(math.sqrt(3) / 2, abs=1e-9)

    def test_average_ranks_ties(self):
        assert average_ranks([10, 20, 20, 30]) == [1.0, 2.5, 2.5, 4.0]

    def test_average_ranks_all_tied(self):
        assert average_ranks([7, 7, 7]) == [2.0, 2.0, 2.0]


class TestNormalizeAndBlend:
    def test_minmax_range(self):
        out = minmax_normalize([3.0, 1.0, 2.0])
        assert out == [1.0, 0.0, 0.5]

    def test_constant_maps_to_half(self):
        assert minmax_normalize([4.0, 4.0]) == [0.5, 0.5]

    def test_empty_rejected(self):
        with pytest.raises(EvalDataError):
            minmax_normalize([])

    def test_blend_examples(self):
        assert blend(0.4, 0.9, "min") == 0.4
        assert blend(0.4, 0.9, "max") == 0.9
        assert blend(0.4, 0.9, "geometric") == pytest.approx(0.6)
        assert blend(0.4, 0.9, "arithmetic") == pytest.approx(0.65)

    def test_out_of_range_rejected(self):
        with pytest.raises(EvalDataError):
            blend(1.2, 0.5, "min")

    def test_unknown_strategy(self):
        with pytest.raises(EvalDataError):
            blend(0.5, 0.5, "median")

    @given(st.floats(0, 1), st.floats(0, 1),
           st.sampled_from(["min", "max", "geometric", "arithmetic"]))
    def test_blend_stays_in_unit_interval(self, a, b, strategy):
        assert 0.0 <= blend(a, b, strategy) <= 1.0


class TestEvalFile:
    def write(self, tmp_path, text):
        p = tmp_path / "eval.tsv"
        p.write_text(text, encoding="utf-8")
        return p

    def test_reads_rows(self, tmp_path):
        p = self.write(tmp_path, "q1 q2\tg1\tr1 r2\t0.8\nq3\tg2 g3\t\t0.2\n")
        pairs = read_eval_file(p)
        assert pairs[0].query == ["q1", "q2"]
        assert pairs[0].reference == ["r1", "r2"]
        assert pairs[1].reference is None
        assert pairs[1].human_score == 0.2

    def test_wrong_column_count(self, tmp_path):
        p = self.write(tmp_path, "q\tg\t0.5\n")
        with pytest.raises(EvalDataError, match=":1:"):
            read_eval_file(p)

    def test_human_score_out_of_range(self, tmp_path):
        p = self.write(tmp_path, "q\tg\tr\t1.5\n")
        with pytest.raises(EvalDataError, match=":1:"):
            read_eval_file(p)

    def test_bad_score_text(self, tmp_path):
        p = self.write(tmp_path, "q\tg\tr\thigh\n")
        with pytest.raises(EvalDataError):
            read_eval_file(p)

    def test_empty_file(self, tmp_path):
        with pytest.raises(EvalDataError):
            read_eval_file(self.write(tmp_path, "\n"))


def _pairs(scores):
    out = []
    for i, h in enumerate(scores):
        p = ScoredPair([f"q{i}"], [f"g{i}"], None, h)
        p.metric_scores["good"] = h * 0.5 + 0.1
        p.metric_scores["flat"] = 0.5
        out.append(p)
    return out


class TestCorrelateAndReport:
    def test_errors_do_not_block_other_metrics(self):
        report = correlate(_pairs([0.1, 0.5, 0.9, 0.3]), ["good", "flat"])
        assert report.metrics["good"].pearson == pytest.approx(1.0)
        assert "flat" in report.errors and "flat" not in report.metrics

    def test_report_file_layout(self, tmp_path):
        report = correlate(_pairs([0.1, 0.5, 0.9, 0.3]), ["good", "flat"])
        out = tmp_path / "report.tsv"
        write_report(report, out)
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].split("\t") == ["metric", "pearson", "pearson_p",
                                        "spearman", "spearman_p"]
        rows = {ln.split("\t")[0]: ln.split("\t")[1:] for ln in lines[1:]}
        assert rows["flat"] == ["nan"] * 4
        assert float(rows["good"][0]) == pytest.approx(1.0)
