import numpy as np
import pytest

from wavegate.errors import NumericError
from wavegate.network import (AdamState, adam_step, backward, forward,
                              init_network, load_checkpoint, save_checkpoint)

from oracles import central_difference, rel_error


def perturbed_tiny_net(seed):
    params = init_network(16, 3, seed=seed)
    rng = np.random.default_rng(seed + 100)
    for name in params.trainable_names():
        params.tensors[name] += 0.1 * rng.standard_normal(params.tensors[name].shape)
    return params


class TestInit:
    def test_widths(self):
        assert init_network(1024, 9, seed=0).widths == [1024, 512, 256, 128, 9]
        assert init_network(16, 3, seed=0).widths == [16, 8, 4, 2, 3]

    def test_deterministic(self):
        a = init_network(64, 5, seed=3)
        b = init_network(64, 5, seed=3)
        for k in a.tensors:
            np.testing.assert_array_equal(a[k], b[k])
        c = init_network(64, 5, seed=4)
        assert not np.array_equal(a["W1"], c["W1"])

    def test_xavier_statistics(self):
        p = init_network(1024, 9, seed=1)
        w = p["W1"]
        bound = np.sqrt(6 / (1024 + 512))
        assert np.all(np.abs(w) <= bound)
        sigma = bound / np.sqrt(3)
        assert abs(w.mean()) < 3 * sigma / np.sqrt(w.size)
        assert abs(w.std() - sigma) < 0.01 * sigma

    def test_initial_values(self):
        p = init_network(32, 4, seed=0)
        for h in (1, 2, 3):
            assert not np.any(p[f"b{h}"]) and not np.any(p[f"beta{h}"])
            assert np.all(p[f"gamma{h}"] == 1) and np.all(p[f"running_var{h}"] == 1)
            assert not np.any(p[f"running_mean{h}"])
        assert not np.any(p["b_out"])

    def test_too_small(self):
        with pytest.raises(ValueError):
            init_network(7, 3)


class TestForward:
    def test_output_range(self, rng):
        p = init_network(64, 6, seed=0)
        for scale in (1e-3, 1.0, 100.0):
            out, _ = forward(p, scale * rng.standard_normal((10, 64)), "train")
            assert np.all((out > 0) & (out < 1))
            out, _ = forward(p, scale * rng.standard_normal((10, 64)), "infer")
            assert np.all((out > 0) & (out < 1))

    def test_zero_output_layer(self, rng):
        p = init_network(32, 4, seed=0)
        p.tensors["W_out"][:] = 0
        out, _ = forward(p, rng.standard_normal((5, 32)), "train")
        np.testing.assert_array_equal(out, 0.5)

    def test_infer_identical_rows(self, rng):
        p = init_network(32, 4, seed=0)
        row = rng.standard_normal(32)
        out, _ = forward(p, np.tile(row, (6, 1)), "infer")
        assert np.all(out == out[0])

    def test_infer_leaves_running_stats(self, rng):
        p = init_network(32, 4, seed=0)
        before = {k: v.copy() for k, v in p.tensors.items()}
        forward(p, rng.standard_normal((5, 32)), "infer")
        for k, v in before.items():
            np.testing.assert_array_equal(p[k], v)
        forward(p, rng.standard_normal((5, 32)), "train")
        assert not np.array_equal(p["running_mean1"], before["running_mean1"])
        assert np.all(p["running_var1"] > 0)

    def test_batch_norm_statistics(self, rng):
        p = init_network(64, 4, seed=0)
        _, cache = forward(p, 10 * rng.standard_normal((50, 64)), "train")
        for h, xhat in enumerate(cache.xhat):
            assert np.max(np.abs(xhat.mean(axis=0))) < 1e-6
            # var(xhat) = var / (var + eps) exactly; it is 1 +- 1e-5 once var >= 1
            var = cache.batch_var[h]
            np.testing.assert_allclose(xhat.var(axis=0) * (var + 1e-5) / var, 1.0,
                                       atol=1e-9)
        v1 = cache.xhat[0].var(axis=0)
        assert np.all(cache.batch_var[0] >= 1)
        assert np.max(np.abs(v1 - 1)) < 1e-5

    def test_errors(self, rng):
        p = init_network(32, 4, seed=0)
        with pytest.raises(ValueError):
            forward(p, rng.standard_normal((1, 32)), "train")
        with pytest.raises(ValueError):
            forward(p, rng.standard_normal((4, 31)), "infer")
        with pytest.raises(ValueError):
            forward(p, rng.standard_normal((4, 32)), "eval")


class TestBackward:
    @pytest.mark.parametrize("seed", range(3))
    def test_finite_differences(self, seed):
        p = perturbed_tiny_net(seed)
        rng = np.random.default_rng(seed)
        y = rng.standard_normal((4, 16))
        upstream = rng.standard_normal((4, 3))

        def f():
            out, _ = forward(p, y, "train", update_stats=False)
            return float(np.sum(out * upstream))

        _, cache = forward(p, y, "train", update_stats=False)
        grads = backward(p, cache, upstream)
        for name in p.trainable_names():
            fd = central_difference(f, p.tensors[name])
            assert np.max(rel_error(grads[name], fd)) < 1e-4, name

    def test_zero_upstream(self, rng):
        p = perturbed_tiny_net(0)
        _, cache = forward(p, rng.standard_normal((4, 16)), "train")
        grads = backward(p, cache, np.zeros((4, 3)))
        for name, g in grads.items():
            assert not np.any(g), name

    def test_stale_cache(self, rng):
        p = perturbed_tiny_net(0)
        _, cache = forward(p, rng.standard_normal((4, 16)), "train")
        grads = backward(p, cache, np.ones((4, 3)))
        adam_step(p, grads, AdamState())
        with pytest.raises(ValueError, match="stale"):
            backward(p, cache, np.ones((4, 3)))

    def test_mismatched(self, rng):
        p = perturbed_tiny_net(0)
        _, cache = forward(p, rng.standard_normal((4, 16)), "infer")
        with pytest.raises(ValueError):
            backward(p, cache, np.ones((4, 3)))
        _, cache = forward(p, rng.standard_normal((4, 16)), "train")
        with pytest.raises(ValueError):
            backward(p, cache, np.ones((5, 3)))


class TestAdam:
    def test_first_step_is_signed_lr(self, rng):
        p = init_network(16, 3, seed=0)
        before = p.copy()
        grads = {k: rng.choice([-1.0, 1.0], size=p[k].shape) * rng.uniform(0.1, 5, p[k].shape)
                 for k in p.trainable_names()}
        adam_step(p, grads, AdamState(), lr=1e-3)
        for k in p.trainable_names():
            delta = p[k] - before[k]
            np.testing.assert_allclose(delta, -1e-3 * np.sign(grads[k]), atol=1e-6)

    def test_zero_gradient(self):
        p = init_network(16, 3, seed=0)
        before = p.copy()
        adam_step(p, {k: np.zeros_like(p[k]) for k in p.trainable_names()}, AdamState())
        for k in p.tensors:
            np.testing.assert_array_equal(p[k], before[k])

    def test_deterministic(self, rng):
        p = init_network(16, 3, seed=0)
        grads = {k: rng.standard_normal(p[k].shape) for k in p.trainable_names()}
        state = AdamState()
        adam_step(p, grads, state)
        p1, s1 = adam_step(p.copy(), grads, state.copy())
        p2, s2 = adam_step(p.copy(), grads, state.copy())
        for k in p.tensors:
            np.testing.assert_array_equal(p1[k], p2[k])
        assert s1.t == s2.t == 2

    def test_non_finite(self):
        p = init_network(16, 3, seed=0)
        grads = {k: np.zeros_like(p[k]) for k in p.trainable_names()}
        grads["gamma2"][0] = np.nan
        with pytest.raises(NumericError, match="gamma2"):
            adam_step(p, grads, AdamState())


class TestCheckpoint:
    def test_round_trip(self, tmp_path, rng):
        p = perturbed_tiny_net(1)
        forward(p, rng.standard_normal((4, 16)), "train")
        meta = {"wavelet": "db4", "level": 2, "boundary": "symmetric"}
        save_checkpoint(tmp_path / "m.npz", p, meta)
        q, meta2 = load_checkpoint(tmp_path / "m.npz")
        assert meta2 == meta and q.widths == p.widths
        for k in p.tensors:
            np.testing.assert_array_equal(p[k], q[k])

    def test_rejects_garbage(self, tmp_path):
        np.savez(tmp_path / "x.npz", a=np.zeros(3))
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "x.npz")
