import numpy as np
import pytest

from wavegate.noise import DEFAULTS, KINDS, DEFAULT_SPECS, NoiseSpec, corrupt


def test_defaults():
    assert DEFAULTS["gaussian"]["var"] == 0.05
    assert DEFAULTS["poisson"]["lam"] == 0.02
    assert (DEFAULTS["uniform"]["lo"], DEFAULTS["uniform"]["hi"]) == (-0.1, 0.1)
    assert DEFAULTS["salt_pepper"]["p"] == 0.05
    assert [s.kind for s in DEFAULT_SPECS] == list(KINDS)


class TestStatistics:
    N = 100_000

    def test_gaussian_variance(self):
        x = np.full(self.N, 0.5)
        r = corrupt(x, NoiseSpec("gaussian", seed=0)) - x
        assert abs(r.var() - 0.05) <= 0.003
        assert abs(r.mean()) < 0.005

    def test_salt_pepper_density(self):
        x = np.full(self.N, 0.5)
        y = corrupt(x, NoiseSpec("salt_pepper", seed=1))
        hit = y != 0.5
        assert abs(hit.mean() - 0.05) <= 0.005
        assert set(np.unique(y[hit])) <= {0.0, 1.0}
        # the two extremes are equally likely
        assert abs(np.mean(y[hit] == 1.0) - 0.5) < 0.05

    def test_uniform(self):
        x = np.zeros(self.N)
        r = corrupt(x, NoiseSpec("uniform", seed=2))
        assert r.min() >= -0.1 and r.max() <= 0.1
        assert abs(r.mean()) <= 0.002
        assert abs(r.var() - 0.2 ** 2 / 12) < 2e-4

    def test_poisson(self):
        x = np.zeros(self.N)
        r = corrupt(x, NoiseSpec("poisson", seed=3))
        assert abs(r.mean()) < 0.002
        assert abs(r.var() - 0.02) < 0.002
        raw = corrupt(x, NoiseSpec("poisson", {"centered": 0}, seed=3))
        np.testing.assert_array_equal(raw, np.round(raw))
        assert abs(raw.mean() - 0.02) < 0.002


class TestDeterminism:
    @pytest.mark.parametrize("kind", KINDS)
    def test_same_seed(self, kind, rng):
        x = rng.uniform(0, 1, 500)
        a = corrupt(x, NoiseSpec(kind, seed=7))
        b = corrupt(x, NoiseSpec(kind, seed=7))
        np.testing.assert_array_equal(a, b)
        c = corrupt(x, NoiseSpec(kind, seed=8))
        assert not np.array_equal(a, c)

    def test_input_untouched(self, rng):
        x = rng.uniform(0, 1, 100)
        keep = x.copy()
        corrupt(x, NoiseSpec("salt_pepper", seed=0))
        np.testing.assert_array_equal(x, keep)

    def test_salt_pepper_stays_in_range(self, rng):
        x = rng.uniform(0, 1, 1000)
        y = corrupt(x, NoiseSpec("salt_pepper", seed=0))
        assert y.min() >= 0 and y.max() <= 1

    def test_permutation_keeps_statistics(self, rng):
        x = rng.uniform(0, 1, 20_000)
        perm = rng.permutation(x.size)
        a = corrupt(x, NoiseSpec("gaussian", seed=4)) - x
        b = corrupt(x[perm], NoiseSpec("gaussian", seed=4)) - x[perm]
        assert abs(a.var() - b.var()) < 0.003


class TestParse:
    def test_forms(self):
        assert NoiseSpec.parse("gaussian").params == {"var": 0.05}
        assert NoiseSpec.parse("gaussian:var=0.1").params == {"var": 0.1}
        assert NoiseSpec.parse("salt-and-pepper:p=0.2").kind == "salt_pepper"
        assert NoiseSpec.parse("uniform:lo=-0.2, hi=0.3").params == {"lo": -0.2, "hi": 0.3}

    def test_label_round_trip(self):
        for spec in DEFAULT_SPECS:
            assert NoiseSpec.parse(spec.label()) == spec

    @pytest.mark.parametrize("text", [
        "laplace", "gaussian:sigma=1", "gaussian:var", "gaussian:var=abc",
        "gaussian:var=-1", "uniform:lo=1,hi=0", "salt_pepper:p=1.5",
    ])
    def test_errors(self, text):
        with pytest.raises(ValueError):
            NoiseSpec.parse(text)

    def test_requires_spec(self):
        with pytest.raises(ValueError):
            corrupt(np.zeros(3), "gaussian")
