"""Loss primitives: one-hot, KL divergence, cross-entropy variants."""

import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from advbench.core import (
    LabelBatch,
    LossKind,
    LossSpec,
    PROB_FLOOR,
    batch_loss,
    kl_divergence,
    kl_divergence_rows,
    neg_log_true_prob,
    one_hot,
)
from advbench.errors import ContractError, TaskMismatchError


def _kl_oracle(p, q):
    # independent direct-summation oracle with the 0*log0 := 0 convention
    total = 0.0
    for pi, qi in zip(p, q):
        if pi > 0:
            total += pi * (math.log(max(pi, PROB_FLOOR)) - math.log(max(qi, PROB_FLOOR)))
    return total


class TestOneHot:
    def test_first_class(self):
        assert one_hot(LabelBatch.single([0], 3)).tolist() == [[1.0, 0.0, 0.0]]

    def test_last_class(self):
        assert one_hot(LabelBatch.single([2], 3)).tolist() == [[0.0, 0.0, 1.0]]

    def test_argmax_round_trip(self):
        y = LabelBatch.single(list(range(7)), 7)
        assert one_hot(y).argmax(dim=1).tolist() == list(range(7))

    def test_rows_have_exactly_one_hot(self):
        y = LabelBatch.single([3, 1, 4, 1], 5)
        assert one_hot(y).sum(dim=1).tolist() == [1.0] * 4

    def test_multilabel_rejected(self):
        y = LabelBatch.multi([[1, 0], [0, 1]], 2)
        with pytest.raises(TaskMismatchError):
            one_hot(y)


class TestKLDivergence:
    def test_identity_is_zero(self):
        p = [0.2, 0.3, 0.5]
        assert kl_divergence(p, p) == 0.0

    def test_half_half_vs_quarter(self):
        # 0.5*ln2 + 0.5*ln(2/3), from the direct-summation oracle
        expected = _kl_oracle([0.5, 0.5], [0.25, 0.75])
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.14384, abs=1e-5)

    def test_zero_entry_convention(self):
        expected = _kl_oracle([1.0, 0.0], [0.5, 0.5])
        value = kl_divergence([1.0, 0.0], [0.5, 0.5])
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(math.log(2), rel=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            kl_divergence([0.5, 0.5], [1.0, 0.0, 0.0])

    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8),
           st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_non_negative_on_floored_pairs(self, a, b):
        n = min(len(a), len(b))
        p = np.asarray(a[:n]) + 1e-9
        q = np.asarray(b[:n]) + 1e-9
        p, q = p / p.sum(), q / q.sum()
        assert kl_divergence(p, q) >= 0.0

    def test_rows_match_scalar(self):
        gen = np.random.default_rng(0)
        p = gen.dirichlet(np.ones(5), size=10)
        q = gen.dirichlet(np.ones(5), size=10)
        rows = kl_divergence_rows(torch.as_tensor(p), torch.as_tensor(q))
        for i in range(10):
            assert float(rows[i]) == pytest.approx(kl_divergence(p[i], q[i]), abs=1e-12)


class TestBatchLosses:
    def test_cross_entropy_matches_neg_log_prob(self):
        logits = torch.randn(4, 3, dtype=torch.float64,
                             generator=torch.Generator().manual_seed(0))
        y = LabelBatch.single([0, 1, 2, 1], 3)
        ce = batch_loss(logits, y, LossSpec(LossKind.CROSS_ENTROPY))
        nl = batch_loss(logits, y, LossSpec(LossKind.NEG_LOG_TRUE_CLASS))
        assert float(ce) == pytest.approx(float(nl), rel=1e-12)

    def test_loss_finite_at_saturation(self):
        logits = torch.tensor([[1000.0, -1000.0]], dtype=torch.float64)
        y = LabelBatch.single([1], 2)
        for kind in (LossKind.CROSS_ENTROPY, LossKind.NEG_LOG_TRUE_CLASS):
            value = batch_loss(logits, y, LossSpec(kind))
            assert torch.isfinite(value)

    def test_bce_requires_multilabel(self):
        logits = torch.zeros(2, 3, dtype=torch.float64)
        y = LabelBatch.single([0, 1], 3)
        with pytest.raises(TaskMismatchError):
            batch_loss(logits, y, LossSpec(LossKind.BCE_PER_CLASS))

    def test_neg_log_true_prob_floor(self):
        probs = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
        value = neg_log_true_prob(probs, torch.tensor([1]))
        assert float(value) == pytest.approx(-math.log(PROB_FLOOR))
