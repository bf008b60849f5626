import numpy as np
import pytest

from fedsim.aggregation import (
    AggregationWeights,
    ScoreBoard,
    accuracy_weights,
    fedavg_weights,
    fedtest_weights,
    update_scores,
    weighted_aggregate,
)
from fedsim.learner import Architecture, ModelParams


def board_with(scores, power=4.0, beta=0.5):
    return ScoreBoard(np.asarray(scores, dtype=float), beta=beta, power=power)


class TestAggregationWeights:
    def test_validation(self):
        with pytest.raises(ValueError):
            AggregationWeights(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            AggregationWeights(np.array([-0.1, 1.1]))
        with pytest.raises(ValueError):
            AggregationWeights(np.array([[0.5, 0.5]]))

    def test_accepts_tolerance(self):
        AggregationWeights(np.array([0.5, 0.5 + 5e-10]))


class TestWeightedAggregate:
    def test_midpoint(self):
        arch = Architecture((1, 2))
        a = ModelParams(arch, np.array([1.0, 3.0, 0.0, 0.0]))
        b = ModelParams(arch, np.array([3.0, 5.0, 0.0, 0.0]))
        w = AggregationWeights(np.array([0.5, 0.5]))
        out = weighted_aggregate([a, b], w)
        assert np.allclose(out.theta, [2.0, 4.0, 0.0, 0.0], atol=1e-12)

    def test_identical_models_fixed_point(self):
        rng = np.random.default_rng(0)
        arch = Architecture((3, 4, 2))
        theta = rng.standard_normal(arch.param_count)
        models = [ModelParams(arch, theta.copy()) for _ in range(4)]
        w = AggregationWeights(np.array([0.1, 0.2, 0.3, 0.4]))
        out = weighted_aggregate(models, w)
        assert np.array_equal(out.theta, theta)

    def test_degenerate_weight(self):
        rng = np.random.default_rng(1)
        arch = Architecture((2, 2))
        a = ModelParams(arch, rng.standard_normal(arch.param_count))
        b = ModelParams(arch, rng.standard_normal(arch.param_count))
        out = weighted_aggregate([a, b], AggregationWeights(np.array([1.0, 0.0])))
        assert np.array_equal(out.theta, a.theta)

    def test_arch_mismatch(self):
        a = ModelParams(Architecture((2, 2)), np.zeros(6))
        b = ModelParams(Architecture((2, 3)), np.zeros(9))
        with pytest.raises(ValueError):
            weighted_aggregate([a, b], AggregationWeights(np.array([0.5, 0.5])))

    def test_length_mismatch(self):
        a = ModelParams(Architecture((2, 2)), np.zeros(6))
        with pytest.raises(ValueError):
            weighted_aggregate([a], AggregationWeights(np.array([0.5, 0.5])))

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(2)
        arch = Architecture((2, 3))
        for _ in range(100):
            n = int(rng.integers(2, 6))
            models = [ModelParams(arch, rng.standard_normal(arch.param_count))
                      for _ in range(n)]
            raw = rng.random(n) + 0.1
            w = AggregationWeights(raw / raw.sum())
            perm = rng.permutation(n)
            out = weighted_aggregate(models, w)
            out_p = weighted_aggregate([models[i] for i in perm],
                                       AggregationWeights(w.w[perm]))
            assert np.allclose(out.theta, out_p.theta, atol=1e-12)


class TestFedavgWeights:
    def test_examples(self):
        assert np.allclose(fedavg_weights([1, 1]).w, [0.5, 0.5])
        assert np.allclose(fedavg_weights([1, 3]).w, [0.25, 0.75])
        assert np.allclose(fedavg_weights([5]).w, [1.0])

    def test_empty_and_nonpositive(self):
        with pytest.raises(ValueError):
            fedavg_weights([])
        with pytest.raises(ValueError):
            fedavg_weights([3, 0])


class TestAccuracyWeights:
    def test_examples(self):
        assert np.allclose(accuracy_weights([0.5, 0.5]).w, [0.5, 0.5])
        assert np.allclose(accuracy_weights([0.9, 0.1]).w, [0.9, 0.1])

    def test_all_zero_fallback(self):
        w = accuracy_weights([0.0, 0.0])
        assert np.allclose(w.w, [0.5, 0.5])
        assert w.uniform_fallback

    def test_equal_inputs_match_fedavg_uniform(self):
        # equal counts, equal accuracies, and plain uniform all coincide
        for n in range(1, 8):
            uniform = np.full(n, 1.0 / n)
            assert np.allclose(fedavg_weights([7] * n).w, uniform, atol=1e-12)
            assert np.allclose(accuracy_weights([0.4] * n).w, uniform, atol=1e-12)


class TestScoreBoard:
    def test_validation(self):
        with pytest.raises(ValueError):
            board_with([0.5, 1.2])
        with pytest.raises(ValueError):
            board_with([0.5], power=0.0)
        with pytest.raises(ValueError):
            ScoreBoard(np.array([0.5]), beta=0.0, power=4.0)
        ScoreBoard(np.array([0.5]), beta=1.0, power=4.0)

    def test_initial_chance_level(self):
        b = ScoreBoard.initial(4, num_classes=5, beta=0.5, power=4.0)
        assert np.allclose(b.scores, 0.2)


class TestUpdateScores:
    def test_formula(self):
        b = update_scores(board_with([0.4]), [0.8])
        assert np.allclose(b.scores, [0.6])

    def test_carry_over(self):
        b = update_scores(board_with([0.4]), [None])
        assert np.allclose(b.scores, [0.4])

    def test_memoryless_beta_one(self):
        b = update_scores(board_with([0.4], beta=1.0), [0.8])
        assert np.allclose(b.scores, [0.8])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            update_scores(board_with([0.4]), [1.3])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            update_scores(board_with([0.4, 0.5]), [0.8])

    def test_scores_stay_in_unit_interval(self):
        # score range preservation under long random measurement histories
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 8))
            board = ScoreBoard(rng.random(n), beta=float(rng.uniform(0.05, 1.0)),
                               power=4.0)
            for _ in range(20):
                accs = [None if rng.random() < 0.3 else float(rng.random())
                        for _ in range(n)]
                board = update_scores(board, accs)
                assert np.all(board.scores >= 0.0)
                assert np.all(board.scores <= 1.0)


class TestFedtestWeights:
    def test_symmetry(self):
        w = fedtest_weights(board_with([0.5, 0.5]), [0, 1])
        assert np.allclose(w.w, [0.5, 0.5])

    def test_power_four_oracle(self):
        # 0.9^4 / (0.9^4 + 0.3^4) worked out by hand
        w = fedtest_weights(board_with([0.9, 0.3]), [0, 1])
        assert np.allclose(w.w, [0.98781, 0.01219], atol=1e-5)

    def test_power_one(self):
        w = fedtest_weights(board_with([0.9, 0.3], power=1.0), [0, 1])
        assert np.allclose(w.w, [0.75, 0.25])

    def test_all_zero_fallback(self):
        w = fedtest_weights(board_with([0.0, 0.0]), [0, 1])
        assert np.allclose(w.w, [0.5, 0.5])
        assert w.uniform_fallback

    def test_empty_participants(self):
        with pytest.raises(ValueError):
            fedtest_weights(board_with([0.5]), [])

    def test_normalization_randomized(self):
        # covers all three constructors: nonnegative, sum 1 within 1e-9
        rng = np.random.default_rng(4)
        for _ in range(150):
            n = int(rng.integers(1, 10))
            counts = rng.integers(1, 500, n).tolist()
            accs = rng.random(n)
            scores = rng.random(n)
            power = float(rng.uniform(0.5, 6.0))
            for w in (fedavg_weights(counts),
                      accuracy_weights(accs),
                      fedtest_weights(board_with(scores, power=power), range(n))):
                assert np.all(w.w >= 0)
                assert abs(w.w.sum() - 1.0) <= 1e-9

    def test_permutation_equivariance_randomized(self):
        rng = np.random.default_rng(5)
        for _ in range(120):
            n = int(rng.integers(2, 10))
            scores = rng.random(n)
            power = float(rng.uniform(0.5, 6.0))
            perm = rng.permutation(n)
            w = fedtest_weights(board_with(scores, power=power), range(n))
            w_p = fedtest_weights(board_with(scores[perm], power=power), range(n))
            assert np.allclose(w_p.w, w.w[perm], atol=1e-12)

    def test_scale_invariance_randomized(self):
        rng = np.random.default_rng(6)
        for _ in range(120):
            n = int(rng.integers(2, 10))
            scores = rng.uniform(0.05, 0.5, n)
            c = float(rng.uniform(0.1, 2.0))
            power = float(rng.uniform(0.5, 6.0))
            w = fedtest_weights(board_with(scores, power=power), range(n))
            w_c = fedtest_weights(board_with(c * scores, power=power), range(n))
            assert np.allclose(w_c.w, w.w, atol=1e-9)

    def test_sharpening_randomized(self):
        # raising the exponent strictly increases the strict-argmax weight
        rng = np.random.default_rng(7)
        for _ in range(120):
            n = int(rng.integers(2, 10))
            scores = rng.uniform(0.05, 0.8, n)
            top = int(rng.integers(n))
            scores[top] = scores.max() + 0.1
            p = float(rng.uniform(0.5, 4.0))
            p_hi = p + float(rng.uniform(0.5, 4.0))
            w_lo = fedtest_weights(board_with(scores, power=p), range(n))
            w_hi = fedtest_weights(board_with(scores, power=p_hi), range(n))
            assert w_hi.w[top] > w_lo.w[top]

    def test_participant_restriction(self):
        board = board_with([0.9, 0.3, 0.6])
        w = fedtest_weights(board, [0, 2])
        expect = np.array([0.9 ** 4, 0.6 ** 4])
        assert np.allclose(w.w, expect / expect.sum())
