import numpy as np
import pytest

from fedsim.adversary import Behavior, lying_report, malicious_update
from fedsim.learner import Architecture, evaluate


class TestBehavior:
    def test_defaults(self):
        b = Behavior()
        assert b.kind == "honest"

    def test_validation(self):
        with pytest.raises(ValueError):
            Behavior(kind="sneaky")
        with pytest.raises(ValueError):
            Behavior(kind="random_weights", scale=0.0)
        with pytest.raises(ValueError):
            Behavior(kind="lying_tester", policy="flatter")


class TestMaliciousUpdate:
    def test_determinism_and_length(self):
        arch = Architecture((4, 3))
        a = malicious_update(arch, 0.5, seed=42)
        b = malicious_update(arch, 0.5, seed=42)
        assert np.array_equal(a.theta, b.theta)
        assert len(a.theta) == arch.param_count

    def test_scale_scales_the_draw(self):
        arch = Architecture((4, 3))
        one = malicious_update(arch, 1.0, seed=7)
        two = malicious_update(arch, 2.0, seed=7)
        assert np.allclose(two.theta, 2.0 * one.theta, atol=1e-12)

    def test_zero_mean_unit_scale_statistics(self):
        arch = Architecture((30, 40, 10))
        theta = malicious_update(arch, 0.5, seed=0).theta
        n = len(theta)
        # mean of n iid draws has sd scale/sqrt(n); allow 4 sigma
        assert abs(theta.mean()) < 4 * 0.5 / np.sqrt(n)
        assert abs(theta.std() - 0.5) < 0.05

    def test_chance_accuracy_on_balanced_data(self):
        # features independent of balanced labels: a random-logit model must
        # sit at chance level within 3 sigma of the binomial spread
        rng = np.random.default_rng(1)
        n = 900
        X = rng.standard_normal((n, 4))
        y = np.tile(np.arange(3), n // 3)
        model = malicious_update(Architecture((4, 3)), 0.5, seed=3)
        acc = evaluate(model, X, y)["accuracy"]
        p = 1.0 / 3.0
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(acc - p) < 3 * sigma

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            malicious_update(Architecture((2, 2)), 0.0, seed=0)


class TestLyingReport:
    def test_invert(self):
        out = lying_report(np.array([0.9, 0.2]), "invert", seed=0)
        assert np.allclose(out, [0.1, 0.8])

    def test_constant_high(self):
        out = lying_report(np.array([0.3, 0.7, 0.0]), "constant_high", seed=0)
        assert np.array_equal(out, np.ones(3))

    def test_random_deterministic(self):
        a = lying_report(np.array([0.3, 0.7]), "random", seed=5)
        b = lying_report(np.array([0.3, 0.7]), "random", seed=5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, lying_report(np.array([0.3, 0.7]), "random", seed=6))

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            lying_report(np.array([0.5]), "flatter", seed=0)

    def test_range_preserved_randomized(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(1, 12))
            accs = rng.random(n)
            policy = ("invert", "constant_high", "random")[int(rng.integers(3))]
            out = lying_report(accs, policy, seed=int(rng.integers(1 << 30)))
            assert out.shape == (n,)
            assert np.all(out >= 0.0)
            assert np.all(out <= 1.0)
