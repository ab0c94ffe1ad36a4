"""Model architectures: the 2-layer LSTM sequence recognizer and the small
convolutional baseline, built on the autodiff engine.

Sequence model: 2 stacked LSTM layers (hidden 100 each) over (dx, dy, pen)
rows, then a head of dense(100->40), ReLU, dropout p=0.5, dense(40->37),
softmax. Image baseline: conv 16@3x3 + ReLU + maxpool, conv 32@3x3 + ReLU
+ maxpool, dense->128 + ReLU, dropout, dense->37, softmax. All parameters
initialize uniformly on (-init_range, init_range) with init_range 0.08.

Batched forward passes pad sequences to the batch maximum and freeze each
sequence's state once it ends, so the state at the last padded step is the
state at the true final step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine as eg
from .engine import Tensor

NUM_CLASSES = 37
INIT_RANGE = 0.08
DROPOUT_P = 0.5
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class RnnConfig:
    input_features: int = 3
    hidden: int = 100
    head_hidden: int = 40
    num_classes: int = NUM_CLASSES
    init_range: float = INIT_RANGE
    dropout: float = DROPOUT_P


@dataclass(frozen=True)
class CnnConfig:
    image_size: int = 28
    channels: tuple = (16, 32)
    dense_hidden: int = 128
    num_classes: int = NUM_CLASSES
    init_range: float = INIT_RANGE
    dropout: float = DROPOUT_P

    def flat_features(self) -> int:
        s = self.image_size
        for _ in self.channels:
            s = s - 2            # valid 3x3 conv
            s = (s + 1) // 2     # ceil-mode 2x2 pool
        return s * s * self.channels[-1]


def _uniform(rng, shape, scale):
    return Tensor(rng.uniform(-scale, scale, size=shape))


def init_rnn_params(config: RnnConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    h, r = config.hidden, config.init_range
    return {
        "lstm1.wx": _uniform(rng, (config.input_features, 4 * h), r),
        "lstm1.wh": _uniform(rng, (h, 4 * h), r),
        "lstm1.b": _uniform(rng, (4 * h,), r),
        "lstm2.wx": _uniform(rng, (h, 4 * h), r),
        "lstm2.wh": _uniform(rng, (h, 4 * h), r),
        "lstm2.b": _uniform(rng, (4 * h,), r),
        "head.w1": _uniform(rng, (h, config.head_hidden), r),
        "head.b1": _uniform(rng, (config.head_hidden,), r),
        "head.w2": _uniform(rng, (config.head_hidden, config.num_classes), r),
        "head.b2": _uniform(rng, (config.num_classes,), r),
    }


def init_cnn_params(config: CnnConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    c1, c2 = config.channels
    r = config.init_range
    return {
        "conv1.w": _uniform(rng, (3, 3, 1, c1), r),
        "conv1.b": _uniform(rng, (c1,), r),
        "conv2.w": _uniform(rng, (3, 3, c1, c2), r),
        "conv2.b": _uniform(rng, (c2,), r),
        "head.w1": _uniform(rng, (config.flat_features(), config.dense_hidden), r),
        "head.b1": _uniform(rng, (config.dense_hidden,), r),
        "head.w2": _uniform(rng, (config.dense_hidden, config.num_classes), r),
        "head.b2": _uniform(rng, (config.num_classes,), r),
    }


# ------------------------------------------------------------------ recurrence

def lstm_stack(params, x_tm: np.ndarray, lengths: np.ndarray, hidden: int):
    """Run both LSTM layers over a packed batch.

    x_tm: (T, B, F) constant input, rows sorted by non-increasing sequence
    length; lengths: per-row true lengths in that order. Each timestep only
    computes the still-active row prefix, and finished rows keep their
    frozen state, so the returned Tensor (B, H) holds every sequence's
    final layer-2 hidden state.
    """
    steps, bsz, _ = x_tm.shape
    lengths = np.asarray(lengths)
    counts = (lengths[None, :] > np.arange(steps)[:, None]).sum(axis=1)
    h1 = c1 = h2 = c2 = Tensor(np.zeros((bsz, hidden)))
    for t in range(steps):
        n = int(counts[t])
        if n == bsz:
            z1 = eg.affine2(x_tm[t], params["lstm1.wx"], h1,
                            params["lstm1.wh"], params["lstm1.b"])
            nh1, nc1 = eg.lstm_cell(z1, c1, hidden)
            z2 = eg.affine2(nh1, params["lstm2.wx"], h2,
                            params["lstm2.wh"], params["lstm2.b"])
            h2, c2 = eg.lstm_cell(z2, c2, hidden)
            h1, c1 = nh1, nc1
        else:
            z1 = eg.affine2(x_tm[t, :n], params["lstm1.wx"], eg.row_head(h1, n),
                            params["lstm1.wh"], params["lstm1.b"])
            nh1, nc1 = eg.lstm_cell(z1, eg.row_head(c1, n), hidden)
            z2 = eg.affine2(nh1, params["lstm2.wx"], eg.row_head(h2, n),
                            params["lstm2.wh"], params["lstm2.b"])
            nh2, nc2 = eg.lstm_cell(z2, eg.row_head(c2, n), hidden)
            h1 = eg.prefix_update(h1, nh1, n)
            c1 = eg.prefix_update(c1, nc1, n)
            h2 = eg.prefix_update(h2, nh2, n)
            c2 = eg.prefix_update(c2, nc2, n)
    return h2


def lstm_hidden_sequence(params, rows: np.ndarray, hidden: int) -> np.ndarray:
    """Layer-2 hidden state at every timestep for one sequence (L, F) -> (L, H).

    Evaluation-only; used by the prefix timeline.
    """
    with eg.no_grad():
        h1 = c1 = h2 = c2 = Tensor(np.zeros((1, hidden)))
        states = np.empty((len(rows), hidden))
        for t in range(len(rows)):
            z1 = eg.affine2(rows[t:t + 1], params["lstm1.wx"], h1,
                            params["lstm1.wh"], params["lstm1.b"])
            h1, c1 = eg.lstm_cell(z1, c1, hidden)
            z2 = eg.affine2(h1, params["lstm2.wx"], h2,
                            params["lstm2.wh"], params["lstm2.b"])
            h2, c2 = eg.lstm_cell(z2, c2, hidden)
            states[t] = h2.data[0]
    return states


def lstm_layer_forward(wx, wh, b, seq: np.ndarray) -> np.ndarray:
    """One LSTM layer over a single unbatched sequence; returns the hidden
    state at every timestep, (L, H). Gate order i, f, g, o as in lstm_cell."""
    seq = np.asarray(seq, dtype=np.float64)
    hidden = wh.shape[0] if not isinstance(wh, Tensor) else wh.data.shape[0]
    with eg.no_grad():
        h = Tensor(np.zeros((1, hidden)))
        c = Tensor(np.zeros((1, hidden)))
        out = np.empty((len(seq), hidden))
        for t in range(len(seq)):
            z = eg.affine2(seq[t:t + 1], wx, h, wh, b)
            h, c = eg.lstm_cell(z, c, hidden)
            out[t] = h.data[0]
    return out


# ------------------------------------------------------------------ heads

def dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray:
    """Inverted-dropout mask: keep with probability 1-p, scale kept units
    by 1/(1-p) so the expected pre-softmax activation matches eval mode."""
    return (rng.random(shape) >= p) / (1.0 - p)


def head_graph(params, h, train_mode: bool, dropout_rng, p: float = DROPOUT_P):
    a = eg.relu(eg.add(eg.matmul(h, params["head.w1"]), params["head.b1"]))
    if train_mode:
        a = eg.mul(a, dropout_mask(dropout_rng, a.data.shape, p))
    logits = eg.add(eg.matmul(a, params["head.w2"]), params["head.b2"])
    return eg.softmax(logits)


def head_forward(params, h: np.ndarray, train_mode: bool = False,
                 dropout_seed: int = 0) -> np.ndarray:
    """Classification head on one hidden vector -> probability vector."""
    h = np.asarray(h, dtype=np.float64).reshape(1, -1)
    rng = np.random.Generator(np.random.PCG64(dropout_seed))
    with eg.no_grad():
        out = head_graph(params, h, train_mode, rng)
    return out.data[0]


def conv_graph(params, images, train_mode: bool, dropout_rng, flat: int,
               p: float = DROPOUT_P):
    x = eg.relu(eg.conv2d(images, params["conv1.w"], params["conv1.b"]))
    x = eg.maxpool2(x)
    x = eg.relu(eg.conv2d(x, params["conv2.w"], params["conv2.b"]))
    x = eg.maxpool2(x)
    x = eg.reshape(x, (images.shape[0], flat))
    return head_graph(params, x, train_mode, dropout_rng, p)


def conv_stack_forward(params, image: np.ndarray, train_mode: bool = False,
                       dropout_seed: int = 0, config: CnnConfig | None = None) -> np.ndarray:
    """Image baseline forward pass on one S x S image -> probability vector."""
    config = config or CnnConfig(image_size=image.shape[-1])
    x = np.asarray(image, dtype=np.float64).reshape(1, config.image_size, config.image_size, 1)
    rng = np.random.Generator(np.random.PCG64(dropout_seed))
    with eg.no_grad():
        out = conv_graph(params, x, train_mode, rng, config.flat_features())
    return out.data[0]


# ------------------------------------------------------------------ loss

def cross_entropy(probs: np.ndarray, label: int) -> float:
    """-log p[label], with p floored at 1e-12 before the log."""
    return float(-np.log(max(float(np.asarray(probs)[label]), PROB_FLOOR)))


def cross_entropy_loss(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Batched mean cross-entropy as a graph node."""
    picked = eg.pick(probs, np.arange(len(labels)), np.asarray(labels))
    return eg.neg(eg.mean(eg.log(eg.maximum_scalar(picked, PROB_FLOOR))))
