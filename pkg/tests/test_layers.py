import numpy as np
import pytest

from glyphscreen.nn import engine as eg
from glyphscreen.nn import layers as ly
from glyphscreen.nn.engine import Tensor


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def scalar_lstm_reference(wx, wh, b, seq):
    """Independent per-gate reference: explicit loops, separate gate slices."""
    hidden = wh.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    outputs = []
    for x in seq:
        z = np.zeros(4 * hidden)
        for j in range(4 * hidden):
            acc = b[j]
            for k in range(len(x)):
                acc += x[k] * wx[k, j]
            for k in range(hidden):
                acc += h[k] * wh[k, j]
            z[j] = acc
        i = sigmoid(z[0:hidden])
        f = sigmoid(z[hidden:2 * hidden])
        g = np.tanh(z[2 * hidden:3 * hidden])
        o = sigmoid(z[3 * hidden:4 * hidden])
        c = f * c + i * g
        h = o * np.tanh(c)
        outputs.append(h.copy())
    return np.array(outputs)


class TestLstmLayerForward:
    def test_zero_everything_zero_states(self):
        wx = np.zeros((3, 16)); wh = np.zeros((4, 16)); b = np.zeros(16)
        out = ly.lstm_layer_forward(wx, wh, b, np.zeros((5, 3)))
        assert out.shape == (5, 4)
        assert np.allclose(out, 0.0)

    def test_length_one(self):
        rng = np.random.default_rng(0)
        wx = rng.normal(size=(3, 16)); wh = rng.normal(size=(4, 16)); b = rng.normal(size=16)
        out = ly.lstm_layer_forward(wx, wh, b, rng.normal(size=(1, 3)))
        assert out.shape == (1, 4)

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(1)
        wx = rng.normal(size=(3, 20)); wh = rng.normal(size=(5, 20)); b = rng.normal(size=20)
        seq = rng.normal(size=(3, 3))
        got = ly.lstm_layer_forward(wx, wh, b, seq)
        want = scalar_lstm_reference(wx, wh, b, seq)
        assert np.abs(got - want).max() < 1e-12


class TestHeadForward:
    def test_probabilities(self):
        rng = np.random.default_rng(2)
        params = ly.init_rnn_params(ly.RnnConfig(hidden=6, head_hidden=5), rng)
        out = ly.head_forward(params, rng.normal(size=6))
        assert out.shape == (37,)
        assert out.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(out >= 0)

    def test_dropout_seed_deterministic(self):
        rng = np.random.default_rng(3)
        params = ly.init_rnn_params(ly.RnnConfig(hidden=6, head_hidden=40), rng)
        h = rng.normal(size=6)
        a = ly.head_forward(params, h, train_mode=True, dropout_seed=9)
        b = ly.head_forward(params, h, train_mode=True, dropout_seed=9)
        c = ly.head_forward(params, h, train_mode=True, dropout_seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_zero_output_layer_uniform(self):
        rng = np.random.default_rng(4)
        params = ly.init_rnn_params(ly.RnnConfig(hidden=6, head_hidden=5), rng)
        params["head.w2"] = Tensor(np.zeros((5, 37)))
        params["head.b2"] = Tensor(np.zeros(37))
        out = ly.head_forward(params, rng.normal(size=6))
        assert np.allclose(out, 1.0 / 37.0, atol=1e-12)

    def test_inverted_dropout_expectation(self):
        # over masks, the expected pre-softmax activation equals eval mode;
        # after the softmax a small second-order (Jensen) bias remains, so
        # the tolerance is 3 sigma plus that bias allowance
        rng = np.random.default_rng(5)
        params = ly.init_rnn_params(ly.RnnConfig(hidden=8, head_hidden=40), rng)
        h = rng.normal(size=8)
        eval_out = ly.head_forward(params, h, train_mode=False)
        n = 10_000
        samples = np.stack([ly.head_forward(params, h, train_mode=True, dropout_seed=s)
                            for s in range(n)])
        mc_mean = samples.mean(axis=0)
        mc_sigma = samples.std(axis=0) / np.sqrt(n)
        assert np.all(np.abs(mc_mean - eval_out) <= 3.0 * mc_sigma + 1e-4)


class TestConvStack:
    def test_zero_image_uniform_with_zero_biases(self):
        cfg = ly.CnnConfig()
        params = ly.init_cnn_params(cfg, np.random.default_rng(6))
        for name in ("conv1.b", "conv2.b", "head.b1", "head.b2"):
            params[name] = Tensor(np.zeros_like(params[name].data))
        out = ly.conv_stack_forward(params, np.zeros((28, 28)), config=cfg)
        assert np.allclose(out, 1.0 / 37.0, atol=1e-12)

    def test_translation_changes_logits(self):
        cfg = ly.CnnConfig()
        params = ly.init_cnn_params(cfg, np.random.default_rng(7))
        img = np.zeros((28, 28))
        img[10:18, 10:12] = 1.0
        shifted = np.roll(img, 1, axis=1)
        a = ly.conv_stack_forward(params, img, config=cfg)
        b = ly.conv_stack_forward(params, shifted, config=cfg)
        assert not np.allclose(a, b, atol=1e-12)

    def test_flat_features_accounting(self):
        assert ly.CnnConfig(image_size=28).flat_features() == 6 * 6 * 32
        assert ly.CnnConfig(image_size=8, channels=(4, 6)).flat_features() == 6


class TestCrossEntropy:
    def test_certain_prediction(self):
        probs = np.zeros(37); probs[3] = 1.0
        assert ly.cross_entropy(probs, 3) == 0.0

    def test_uniform(self):
        probs = np.full(37, 1.0 / 37.0)
        assert ly.cross_entropy(probs, 11) == pytest.approx(np.log(37.0), abs=1e-12)
        assert ly.cross_entropy(probs, 11) == pytest.approx(3.6109, abs=1e-4)

    def test_floor(self):
        probs = np.zeros(37); probs[0] = 1.0
        assert ly.cross_entropy(probs, 5) == pytest.approx(-np.log(1e-12))


class TestGradientChecks:
    def check(self, params, fn, rng, eps=1e-5, n_per=10):
        for p in params.values():
            p.grad = None
        out = fn()
        eg.backward(out)
        worst = 0.0
        for p in params.values():
            flat = p.data.ravel()
            grad = p.grad.ravel()
            for i in rng.choice(flat.size, size=min(n_per, flat.size), replace=False):
                old = flat[i]
                flat[i] = old + eps
                lp = float(fn().data)
                flat[i] = old - eps
                lm = float(fn().data)
                flat[i] = old
                num = (lp - lm) / (2 * eps)
                worst = max(worst, abs(num - grad[i]) / max(abs(num) + abs(grad[i]), 1e-6))
        return worst

    def test_dense_layer_closed_form(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(4, 6))
        w = Tensor(rng.normal(size=(6, 3)))
        weights = rng.normal(size=(4, 3))
        out = eg.matmul(x, w)
        eg.backward(eg.mean(eg.mul(out, weights * out.data.size)))
        assert np.abs(w.grad - x.T @ weights).max() < 1e-12

    def test_rnn_gradcheck(self):
        rng = np.random.default_rng(9)
        cfg = ly.RnnConfig(hidden=8, head_hidden=10, init_range=0.4)
        params = ly.init_rnn_params(cfg, np.random.default_rng(0))
        x = rng.normal(size=(12, 3, 3)) * 0.8   # (T, B, F)
        lengths = np.array([12, 9, 5])
        labels = np.array([1, 4, 36])

        def fn():
            h = ly.lstm_stack(params, x, lengths, cfg.hidden)
            probs = ly.head_graph(params, h, False, None)
            return ly.cross_entropy_loss(probs, labels)

        assert self.check(params, fn, rng) < 1e-4

    def test_cnn_gradcheck(self):
        rng = np.random.default_rng(10)
        cfg = ly.CnnConfig(image_size=8, channels=(4, 6), dense_hidden=12, init_range=0.4)
        params = ly.init_cnn_params(cfg, np.random.default_rng(1))
        imgs = rng.random((2, 8, 8, 1))
        labels = np.array([0, 2])

        def fn():
            probs = ly.conv_graph(params, imgs, False, None, cfg.flat_features())
            return ly.cross_entropy_loss(probs, labels)

        assert self.check(params, fn, rng) < 1e-4

    def test_dropout_gradcheck_with_fixed_mask(self):
        rng = np.random.default_rng(11)
        cfg = ly.RnnConfig(hidden=6, head_hidden=8, init_range=0.4)
        params = ly.init_rnn_params(cfg, np.random.default_rng(2))
        x = rng.normal(size=(5, 2, 3)) * 0.8
        lengths = np.array([5, 3])
        labels = np.array([0, 7])

        def fn():
            h = ly.lstm_stack(params, x, lengths, cfg.hidden)
            probs = ly.head_graph(params, h, True,
                                  np.random.Generator(np.random.PCG64(77)))
            return ly.cross_entropy_loss(probs, labels)

        assert self.check(params, fn, rng) < 1e-4


class TestInit:
    def test_uniform_init_range(self):
        params = ly.init_rnn_params(ly.RnnConfig(), np.random.default_rng(12))
        for name, p in params.items():
            assert np.abs(p.data).max() <= 0.08
            assert np.abs(p.data).max() > 0.04   # actually spread out

    def test_shapes_match_architecture(self):
        params = ly.init_rnn_params(ly.RnnConfig(), np.random.default_rng(13))
        assert params["lstm1.wx"].data.shape == (3, 400)
        assert params["lstm1.wh"].data.shape == (100, 400)
        assert params["lstm2.wx"].data.shape == (100, 400)
        assert params["head.w1"].data.shape == (100, 40)
        assert params["head.w2"].data.shape == (40, 37)
        cparams = ly.init_cnn_params(ly.CnnConfig(), np.random.default_rng(14))
        assert cparams["conv1.w"].data.shape == (3, 3, 1, 16)
        assert cparams["conv2.w"].data.shape == (3, 3, 16, 32)
        assert cparams["head.w2"].data.shape == (128, 37)
