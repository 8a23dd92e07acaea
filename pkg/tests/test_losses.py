import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paperank.losses import (
    BatchScores,
    LossError,
    TemperaturePlan,
    approx_ndcg,
    ground_truth_permutation,
    listmle_progressive,
    listnet_kl,
    loss_fn,
    mse_final,
    rankcosine,
    ranknet_pairwise,
    score_distribution,
    temperature,
)

PLAN_1 = TemperaturePlan(tau_min=1.0, tau_max=2.0, steps=1)  # tau(1) = 1 exactly


def batch(predicted, truth):
    return BatchScores(predicted=np.asarray(predicted, dtype=float), truth=np.asarray(truth, dtype=float))


class TestTemperature:
    def test_defaults_midpoint(self):
        plan = TemperaturePlan(tau_min=0.1, tau_max=1.0, steps=8)
        assert temperature(4, plan) == pytest.approx(0.55, abs=1e-12)

    def test_final_step_is_exactly_tau_min(self):
        plan = TemperaturePlan(tau_min=0.1, tau_max=1.0, steps=8)
        assert temperature(8, plan) == 0.1

    def test_strictly_decreasing(self):
        plan = TemperaturePlan(tau_min=0.05, tau_max=1.3, steps=11)
        taus = [temperature(j, plan) for j in range(1, 12)]
        assert all(a > b for a, b in zip(taus, taus[1:]))

    def test_out_of_range(self):
        plan = TemperaturePlan(tau_min=0.1, tau_max=1.0, steps=4)
        for j in (0, 5):
            with pytest.raises(LossError):
                temperature(j, plan)

    def test_invalid_bounds(self):
        with pytest.raises(LossError):
            TemperaturePlan(tau_min=1.0, tau_max=0.5, steps=3)


class TestScoreDistribution:
    def test_uniform_for_equal_scores(self):
        out = score_distribution(np.full(5, 0.3), tau=0.7)
        assert np.allclose(out, 0.2, atol=1e-15)

    def test_hand_softmax_tau_1(self):
        out = score_distribution(np.array([1.0, 0.0]), tau=1.0)
        assert out == pytest.approx([0.73106, 0.26894], abs=1e-5)

    def test_hand_softmax_tau_01(self):
        out = score_distribution(np.array([1.0, 0.0]), tau=0.1)
        assert out == pytest.approx([0.9999546, 0.0000454], abs=1e-7)

    def test_sums_to_one_and_positive(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            out = score_distribution(rng.standard_normal(6), tau=0.05)
            assert abs(out.sum() - 1.0) <= 1e-12
            assert np.all(out > 0)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.floats(-100, 100))
    def test_shift_invariance(self, scores, shift):
        scores = np.asarray(scores)
        a = score_distribution(scores, tau=0.5)
        b = score_distribution(scores + shift, tau=0.5)
        assert np.all(np.abs(a - b) <= 1e-12)

    def test_argmax_preserved(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            scores = rng.standard_normal(7)
            for tau in (0.01, 0.3, 5.0):
                assert np.argmax(score_distribution(scores, tau)) == np.argmax(scores)

    def test_sharpening_as_tau_decreases(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            scores = rng.standard_normal(6)
            scores[rng.integers(6)] += 1.0  # ensure a unique max
            taus = [2.0, 1.0, 0.5, 0.1, 0.02]
            top = [score_distribution(scores, t)[np.argmax(scores)] for t in taus]
            assert all(a <= b + 1e-15 for a, b in zip(top, top[1:]))


class TestGroundTruthPermutation:
    def test_hand_case(self):
        assert ground_truth_permutation(np.array([0.2, 0.9, 0.5])).tolist() == [1, 2, 0]

    def test_descending_is_identity(self):
        assert ground_truth_permutation(np.array([0.9, 0.5, 0.1])).tolist() == [0, 1, 2]

    def test_ties_keep_input_order(self):
        assert ground_truth_permutation(np.array([0.4, 0.4, 0.4])).tolist() == [0, 1, 2]


def pl_probability(weights, perm):
    """Plackett-Luce probability of drawing `perm` without replacement."""
    prob = 1.0
    remaining = list(perm)
    for i in range(len(perm)):
        prob *= weights[remaining[0]] / sum(weights[t] for t in remaining)
        remaining = remaining[1:]
    return prob


class TestListMLE:
    def test_single_item_is_zero(self):
        for m in (1, 3):
            plan = TemperaturePlan(tau_min=0.1, tau_max=1.0, steps=m)
            assert listmle_progressive(batch([[0.7] * m], [0.4]), plan) == pytest.approx(0.0, abs=1e-12)

    def test_two_item_hand_value(self):
        # softmax(2,1) -> top-pick probability 0.73106; -log of it
        loss = listmle_progressive(batch([[2.0], [1.0]], [0.9, 0.1]), PLAN_1)
        assert loss == pytest.approx(0.31326, abs=1e-5)

    def test_matches_brute_force_telescoping_product(self):
        rng = np.random.default_rng(4)
        plan = TemperaturePlan(tau_min=0.2, tau_max=1.0, steps=2)
        for _ in range(20):
            pred = rng.standard_normal((3, 2))
            truth = rng.uniform(0, 1, 3)
            order = ground_truth_permutation(truth)
            expected = 0.0
            for j in (1, 2):
                weights = score_distribution(pred[:, j - 1], temperature(j, plan))
                expected -= math.log(pl_probability(weights, list(order)))
            got = listmle_progressive(batch(pred, truth), plan)
            assert got == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("b", [2, 3, 4, 5])
    def test_permutation_probabilities_sum_to_one(self, b):
        rng = np.random.default_rng(b)
        pred = rng.standard_normal((b, 1))
        weights = score_distribution(pred[:, 0], temperature(1, PLAN_1))
        total = sum(pl_probability(weights, list(p)) for p in itertools.permutations(range(b)))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_raw_variant_agrees_up_to_float_noise(self):
        # Plackett-Luce probabilities are scale invariant in the weights, so
        # normalizing the weights first changes nothing mathematically; the
        # raw path only skips the inner log-softmax numerically.
        raw = listmle_progressive(batch([[2.0], [1.0]], [0.9, 0.1]), PLAN_1, raw=True)
        assert raw == pytest.approx(0.31326, abs=1e-5)
        rng = np.random.default_rng(3)
        plan = TemperaturePlan(tau_min=0.3, tau_max=1.0, steps=2)
        for _ in range(20):
            b = batch(rng.standard_normal((4, 2)), rng.uniform(0, 1, 4))
            assert listmle_progressive(b, plan) == pytest.approx(
                listmle_progressive(b, plan, raw=True), abs=1e-9
            )


class TestListNet:
    def test_zero_when_distributions_match(self):
        pred = np.array([[0.3, 0.3], [0.8, 0.8]])
        truth = np.array([0.3, 0.8])
        plan = TemperaturePlan(tau_min=1.0, tau_max=2.0, steps=2)
        # predicted scores equal the truth scores, so softmaxes coincide
        assert listnet_kl(batch(pred, truth), plan) == pytest.approx(0.0, abs=1e-12)

    def test_hand_kl_value(self):
        # f = softmax of equal truths = (0.5, 0.5); fhat = softmax(1, 0)
        loss = listnet_kl(batch([[1.0], [0.0]], [0.5, 0.5]), PLAN_1)
        f = np.array([0.5, 0.5])
        fhat = score_distribution(np.array([1.0, 0.0]), 1.0)
        assert loss == pytest.approx(float(np.sum(f * np.log(f / fhat))), abs=1e-12)
        assert loss == pytest.approx(0.12011, abs=1e-5)

    def test_nonnegative_on_random_batches(self):
        rng = np.random.default_rng(6)
        plan = TemperaturePlan(tau_min=0.1, tau_max=1.0, steps=3)
        for _ in range(1000):
            b = int(rng.integers(2, 6))
            loss = listnet_kl(batch(rng.standard_normal((b, 3)), rng.uniform(0, 1, b)), plan)
            assert loss >= -1e-12


class TestRankCosine:
    def test_zero_at_match(self):
        pred = np.array([[0.2], [0.7]])
        truth = np.array([0.2, 0.7])
        assert rankcosine(batch(pred, truth), PLAN_1) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_limit(self):
        # extreme scores drive the two softmaxes to opposite one-hots
        pred = np.array([[1000.0], [0.0]])
        truth = np.array([0.0, 1.0])
        plan = TemperaturePlan(tau_min=1e-3, tau_max=1.0, steps=1)
        assert rankcosine(batch(pred, truth), plan) == pytest.approx(0.5, abs=1e-6)

    def test_hand_cosine_value(self):
        # f = softmax(1,0) = (0.73106, 0.26894); fhat uniform
        loss = rankcosine(batch([[0.5], [0.5]], [1.0, 0.0]), PLAN_1)
        f = score_distribution(np.array([1.0, 0.0]), 1.0)
        fhat = np.array([0.5, 0.5])
        cos = float(f @ fhat / (np.linalg.norm(f) * np.linalg.norm(fhat)))
        assert loss == pytest.approx(0.5 * (1 - cos), abs=1e-12)
        assert loss == pytest.approx(0.04612, abs=1e-5)


class TestApproxNDCG:
    def test_single_item_zero(self):
        assert approx_ndcg(batch([[3.0]], [0.8]), PLAN_1) == pytest.approx(0.0, abs=1e-12)

    def test_equal_scores_soft_rank_three_halves(self):
        from paperank.autodiff import Tensor
        from paperank.losses import _soft_rank

        pi = _soft_rank(Tensor(np.array([0.4, 0.4])), tau=1.0)
        assert np.allclose(pi.data, [1.5, 1.5])

    def test_matches_literal_formula(self):
        rng = np.random.default_rng(8)
        plan = TemperaturePlan(tau_min=0.3, tau_max=1.0, steps=2)
        for _ in range(20):
            pred = rng.standard_normal((3, 2))
            truth = rng.uniform(0, 1, 3)
            gains = 2.0**truth - 1.0
            idcg = sum(g / math.log2(i + 2) for i, g in enumerate(sorted(gains, reverse=True)))
            expected = 0.0
            for j in (1, 2):
                tau = temperature(j, plan)
                s = pred[:, j - 1]
                dcg = 0.0
                for i in range(3):
                    soft = 1.0 + sum(
                        1.0 / (1.0 + math.exp(-(s[t] - s[i]) / tau)) for t in range(3) if t != i
                    )
                    dcg += gains[i] / math.log2(1.0 + soft)
                expected += 1.0 - dcg / idcg
            assert approx_ndcg(batch(pred, truth), plan) == pytest.approx(expected, abs=1e-10)

    def test_all_zero_relevance_defined_as_zero(self):
        assert approx_ndcg(batch([[1.0], [2.0]], [0.0, 0.0]), PLAN_1) == 0.0


class TestRankNet:
    def test_tied_truth_gives_zero(self):
        assert ranknet_pairwise(batch([[1.0], [5.0]], [0.5, 0.5]), PLAN_1) == 0.0

    def test_equal_predictions_log2_per_pair(self):
        loss = ranknet_pairwise(batch([[0.4], [0.4]], [0.8, 0.2]), PLAN_1)
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    def test_margin_beats_log2(self):
        loss = ranknet_pairwise(batch([[1.0], [0.0]], [0.8, 0.2]), PLAN_1)
        assert loss < math.log(2.0)


class TestMSE:
    def test_exact_match_zero(self):
        assert mse_final(batch([[0.1, 0.4], [0.2, 0.9]], [0.4, 0.9])) == 0.0

    def test_hand_value(self):
        # final-step residuals (0.1, -0.3)
        assert mse_final(batch([[0.0, 0.5], [0.0, 0.6]], [0.4, 0.9])) == pytest.approx(0.05, abs=1e-12)

    def test_quadratic_homogeneity(self):
        base = batch([[0.5], [0.6]], [0.4, 0.9])
        scaled = batch([[0.4 + 3 * 0.1], [0.9 - 3 * 0.3]], [0.4, 0.9])
        assert mse_final(scaled) == pytest.approx(9.0 * mse_final(base), abs=1e-12)


@pytest.mark.parametrize("variant", ["listmle", "listnet", "rankcosine", "approxndcg", "ranknet", "mse"])
def test_batch_reordering_invariance(variant):
    rng = np.random.default_rng(12)
    plan = TemperaturePlan(tau_min=0.2, tau_max=1.0, steps=3)
    fn = loss_fn(variant)
    from paperank.autodiff import Tensor

    for _ in range(25):
        pred = rng.standard_normal((5, 3))
        truth = rng.uniform(0, 1, 5)
        perm = rng.permutation(5)
        a = float(fn(Tensor(pred), truth, plan).data)
        b = float(fn(Tensor(pred[perm]), truth[perm], plan).data)
        assert a == pytest.approx(b, abs=1e-9)


def test_loss_fn_rejects_unknown_variant():
    with pytest.raises(LossError):
        loss_fn("pointwise")


def test_batch_scores_validation():
    with pytest.raises(LossError):
        BatchScores(predicted=np.ones((2, 3)), truth=np.array([0.5, 1.5]))
    with pytest.raises(LossError):
        BatchScores(predicted=np.array([[np.inf]]), truth=np.array([0.5]))
