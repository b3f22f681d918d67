"""Tests for recovery metrics and result containers."""

import numpy as np
import pytest

from quadrec.metrics import cosine_similarity, norm_matched_distance, relative_distance
from quadrec.results import RecoveryResult, Status, TraceRecord, trace_row


class TestRelativeDistance:
    def test_exact_match_is_zero(self):
        x = np.array([1.0, -2.0, 3.0])
        assert relative_distance(x, x) == 0.0

    def test_sign_flip_is_zero(self):
        x = np.array([1.0, -2.0, 3.0])
        assert relative_distance(-x, x) == 0.0

    def test_hand_value(self):
        x = np.array([3.0, 4.0])
        xhat = np.array([3.0, 4.0 + 5.0])
        np.testing.assert_allclose(relative_distance(xhat, x), 1.0)

    def test_takes_better_sign(self):
        x = np.array([1.0, 0.0])
        xhat = np.array([-0.9, 0.1])
        flipped = np.linalg.norm(-xhat - x) / np.linalg.norm(x)
        np.testing.assert_allclose(relative_distance(xhat, x), flipped)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError, match="zero truth"):
            relative_distance(np.ones(3), np.zeros(3))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            relative_distance(np.ones(3), np.ones(4))


class TestCosineSimilarity:
    def test_aligned(self):
        x = np.array([0.0, 2.0])
        assert cosine_similarity(np.array([0.0, 5.0]), x) == 2.0

    def test_normalizes_estimate_only(self):
        x = np.array([3.0, 0.0])
        np.testing.assert_allclose(cosine_similarity(np.array([10.0, 0.0]), x), 3.0)

    def test_sign_sensitive(self):
        x = np.array([1.0, 1.0])
        assert cosine_similarity(-x, x) < 0

    def test_zero_estimate_rejected(self):
        with pytest.raises(ValueError, match="zero estimate"):
            cosine_similarity(np.zeros(2), np.ones(2))


class TestNormMatchedDistance:
    def test_direction_match_is_zero(self):
        x = np.array([1.0, 2.0, -1.0])
        np.testing.assert_allclose(norm_matched_distance(3.0 * x, x), 0.0, atol=1e-15)

    def test_sign_flip_is_penalized(self):
        x = np.array([1.0, 0.0])
        np.testing.assert_allclose(norm_matched_distance(-x, x), 2.0)

    def test_zero_estimate_gives_truth_norm(self):
        x = np.array([3.0, 4.0])
        assert norm_matched_distance(np.zeros(2), x) == 5.0


class TestResultContainers:
    def test_iterations_counts_steps(self):
        trace = [TraceRecord(t=t, residual_norm=0.0, nnz=3) for t in range(5)]
        res = RecoveryResult(estimate=np.ones(3), status=Status.COMPLETED, trace=trace)
        assert res.iterations == 4

    def test_empty_trace_iterations(self):
        res = RecoveryResult(estimate=np.ones(3), status=Status.FAILED, trace=[])
        assert res.iterations == 0

    def test_status_values(self):
        assert Status.COMPLETED.value == "completed"
        assert Status.EARLY_STOPPED.value == "early_stopped"
        assert Status.DIVERGED.value == "diverged"
        assert Status.FAILED.value == "failed"

    def test_trace_row_formats(self):
        rec = TraceRecord(t=2, residual_norm=0.5, nnz=7, rel_dist=None)
        row = trace_row(rec)
        assert row[0] == "2"
        assert float(row[1]) == 0.5
        assert row[2] == "7"
        assert row[3] == ""

    def test_trace_row_round_trips_17_digits(self):
        val = 1.0 / 3.0
        rec = TraceRecord(t=0, residual_norm=val, nnz=1, rel_dist=val)
        row = trace_row(rec)
        assert float(row[1]) == val
        assert float(row[3]) == val
