"""Training and evaluation of the two glyph recognizers.

The training loop follows a fixed recipe: mini-batches of 20, Adam at
lr 0.005, per-component gradient clipping at 10, uniform (-0.08, 0.08)
initialization, early stopping after 15 epochs without a strict top-1
validation-accuracy improvement, parameters restored to the best epoch.

Scoring is canonicalized on the single-recording forward pass: every
probability used downstream (D statistics, confusion counts, the live
service) comes from predict_proba on one recording at a time, so scores
are invariant to evaluation order and batching by construction. Batched
forwards exist only inside training (validation accuracy for early
stopping) where throughput matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .glyphs import ALL_GLYPHS, NUM_CLASSES, glyph_index
from .recording import GlyphRecording
from .preprocess import (DegenerateTrajectoryError, L_MAX, STEP_MS, IMAGE_SIZE,
                         normalize, rasterize, to_sequence_features)
from .nn import engine as eg
from .nn import layers as ly
from .nn import serialize as ser
from .nn.engine import Tensor
from .nn.layers import CnnConfig, RnnConfig
from .nn.optim import AdamState, adam_step, clip_gradients

EVAL_BATCH = 256

# Gain on the (dx, dy) columns of the model input. Normalized 20 ms deltas
# are ~0.04 in box units; through the uniform(-0.08, 0.08) init they leave
# the recurrence too quiet for the dropout-heavy head to latch onto, and
# training can sit on the uniform-predictor plateau for many epochs. The
# gain is part of the model's preprocessing config, applied after (and
# invisible to) the FeatureSequence contract.
FEATURE_SCALE = 8.0


@dataclass(frozen=True)
class TrainingHyper:
    batch_size: int = 20
    lr: float = 0.005
    clip: float = 10.0
    patience_epochs: int = 15
    init_range: float = 0.08
    max_epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if min(self.batch_size, self.lr, self.clip, self.patience_epochs,
               self.init_range) <= 0 or self.max_epochs < 0:
            raise ValueError("hyper-parameters must be positive")


@dataclass
class TrainedRecognizer:
    kind: str                       # "rnn" | "cnn"
    params: dict[str, Tensor]
    config: RnnConfig | CnnConfig
    preprocessing: dict
    hyper: TrainingHyper
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    extras: dict = field(default_factory=dict)   # calibration, rankings, ...


@dataclass
class ConfusionMatrix:
    counts: np.ndarray              # (37, 37) int64; rows true, cols predicted

    def row_count(self, index: int) -> int:
        return int(self.counts[index].sum())


class UnsupportedOperationError(RuntimeError):
    pass


# ------------------------------------------------------------- preprocessing

def sequence_input(rec: GlyphRecording, feature_scale: float = FEATURE_SCALE) -> np.ndarray:
    rows = to_sequence_features(normalize(rec), L_MAX).rows
    return rows * np.array([feature_scale, feature_scale, 1.0])


def image_input(rec: GlyphRecording) -> np.ndarray:
    return rasterize(normalize(rec), IMAGE_SIZE).pixels


def _prepare(kind: str, recs: list[GlyphRecording]):
    encode = sequence_input if kind == "rnn" else image_input
    inputs = [encode(r) for r in recs]
    labels = np.array([glyph_index(r.requested) for r in recs], dtype=np.int64)
    return inputs, labels


def _pack_batch(seqs: list[np.ndarray], labels: np.ndarray):
    """Time-major packed batch: rows sorted by non-increasing length.

    Returns (x_tm (T, B, F), lengths, labels) with labels permuted to the
    sorted row order (row order inside a batch carries no meaning)."""
    order = np.argsort([-len(s) for s in seqs], kind="stable")
    seqs = [seqs[i] for i in order]
    lengths = np.array([len(s) for s in seqs])
    t_max = int(lengths.max())
    x = np.zeros((t_max, len(seqs), seqs[0].shape[1]))
    for i, s in enumerate(seqs):
        x[:len(s), i] = s
    return x, lengths, labels[order]


# ------------------------------------------------------------- fast forwards

def _fast_rnn_states(p: dict[str, np.ndarray], rows: np.ndarray) -> np.ndarray:
    """Layer-2 hidden state per timestep for one sequence, plain numpy.

    Performs the same numpy operations in the same order as the graph
    path, so results are bit-identical to the engine-based forward.
    """
    hidden = p["lstm1.wh"].shape[0]
    h1 = np.zeros((1, hidden)); c1 = np.zeros((1, hidden))
    h2 = np.zeros((1, hidden)); c2 = np.zeros((1, hidden))
    out = np.empty((len(rows), hidden))

    def cell(z, c_prev):
        i = 1.0 / (1.0 + np.exp(-z[:, 0 * hidden:1 * hidden]))
        f = 1.0 / (1.0 + np.exp(-z[:, 1 * hidden:2 * hidden]))
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = 1.0 / (1.0 + np.exp(-z[:, 3 * hidden:4 * hidden]))
        c = f * c_prev + i * g
        return o * np.tanh(c), c

    for t in range(len(rows)):
        z1 = rows[t:t + 1] @ p["lstm1.wx"] + h1 @ p["lstm1.wh"] + p["lstm1.b"]
        h1, c1 = cell(z1, c1)
        z2 = h1 @ p["lstm2.wx"] + h2 @ p["lstm2.wh"] + p["lstm2.b"]
        h2, c2 = cell(z2, c2)
        out[t] = h2[0]
    return out


def _head_probs(p: dict[str, np.ndarray], h: np.ndarray) -> np.ndarray:
    a = np.maximum(h @ p["head.w1"] + p["head.b1"], 0.0)
    logits = a @ p["head.w2"] + p["head.b2"]
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _raw_params(model: TrainedRecognizer) -> dict[str, np.ndarray]:
    return {k: v.data for k, v in model.params.items()}


def uniform_probs() -> np.ndarray:
    return np.full(NUM_CLASSES, 1.0 / NUM_CLASSES)


def score_recording(model: TrainedRecognizer, rec: GlyphRecording):
    """(probability vector, degenerate flag). Degenerate traces score
    uniform 1/37 instead of raising: an unusable trace should look
    illegible to the D statistic, not crash the session."""
    p = _raw_params(model)
    try:
        if model.kind == "rnn":
            rows = sequence_input(rec, model.preprocessing.get("feature_scale", FEATURE_SCALE))
            probs = _head_probs(p, _fast_rnn_states(p, rows)[-1:])[0]
        else:
            img = image_input(rec)
            probs = ly.conv_stack_forward(model.params, img, train_mode=False,
                                          config=model.config)
    except DegenerateTrajectoryError:
        return uniform_probs(), True
    return probs, False


def predict_proba(model: TrainedRecognizer, rec: GlyphRecording) -> np.ndarray:
    return score_recording(model, rec)[0]


def prefix_probability_matrix(model: TrainedRecognizer, rec: GlyphRecording) -> np.ndarray:
    """Per-timestep head outputs, (L, 37); sequence model only.

    Each row goes through the head one state at a time, so the final row is
    bit-identical to predict_proba on the same recording.
    """
    if model.kind != "rnn":
        raise UnsupportedOperationError("prefix timelines need the sequence model")
    p = _raw_params(model)
    rows = sequence_input(rec, model.preprocessing.get("feature_scale", FEATURE_SCALE))
    states = _fast_rnn_states(p, rows)
    return np.concatenate([_head_probs(p, states[t:t + 1]) for t in range(len(states))])


def prefix_timeline(model: TrainedRecognizer, rec: GlyphRecording, top_k: int = 5):
    """[(timestep, [(glyph, prob) x top_k]), ...] over the whole sequence."""
    matrix = prefix_probability_matrix(model, rec)
    timeline = []
    for t, row in enumerate(matrix):
        order = np.argsort(-row)[:top_k]
        timeline.append((t, [(ALL_GLYPHS[j], float(row[j])) for j in order]))
    return timeline


def confusion_matrix(model: TrainedRecognizer, eval_set: list[GlyphRecording]) -> ConfusionMatrix:
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for rec in eval_set:
        if rec.requested == "*":
            raise ValueError("confusion matrices are defined over real glyphs only")
        probs, _ = score_recording(model, rec)
        counts[glyph_index(rec.requested), int(np.argmax(probs))] += 1
    return ConfusionMatrix(counts=counts)


# ------------------------------------------------------------- training

def _batched_accuracy(kind: str, params, config, inputs, labels) -> float:
    hits = 0
    with eg.no_grad():
        for start in range(0, len(inputs), EVAL_BATCH):
            chunk = inputs[start:start + EVAL_BATCH]
            want = labels[start:start + EVAL_BATCH]
            if kind == "rnn":
                x, lengths, want = _pack_batch(chunk, want)
                h = ly.lstm_stack(params, x, lengths, config.hidden)
                probs = ly.head_graph(params, h, False, None).data
            else:
                x = np.stack(chunk)[..., None]
                probs = ly.conv_graph(params, x, False, None, config.flat_features()).data
            hits += int((probs.argmax(axis=1) == want).sum())
    return hits / len(inputs)


def _batch_loss(kind: str, params, config, chunk, want, dropout_rng):
    if kind == "rnn":
        x, lengths, want = _pack_batch(chunk, want)
        h = ly.lstm_stack(params, x, lengths, config.hidden)
        probs = ly.head_graph(params, h, True, dropout_rng, config.dropout)
    else:
        x = np.stack(chunk)[..., None]
        probs = ly.conv_graph(params, x, True, dropout_rng, config.flat_features(),
                              config.dropout)
    return ly.cross_entropy_loss(probs, want)


def train(kind: str, train_set: list[GlyphRecording], valid_set: list[GlyphRecording],
          hyper: TrainingHyper | None = None,
          config: RnnConfig | CnnConfig | None = None) -> TrainedRecognizer:
    """Train a recognizer; see the module docstring for the recipe.

    Star hybrids belong in train_set only. valid_set drives early stopping
    and must not contain '*'.
    """
    hyper = hyper or TrainingHyper()
    if kind not in ("rnn", "cnn"):
        raise ValueError(f"unknown recognizer kind {kind!r}")
    if not train_set:
        raise ValueError("training set is empty")
    if any(r.requested == "*" for r in valid_set):
        raise ValueError("validation set must not contain star hybrids")

    if config is None:
        config = RnnConfig(init_range=hyper.init_range) if kind == "rnn" \
            else CnnConfig(init_range=hyper.init_range)
    init_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((hyper.seed, 0))))
    params = (ly.init_rnn_params(config, init_rng) if kind == "rnn"
              else ly.init_cnn_params(config, init_rng))
    preprocessing = (
        {"step_ms": STEP_MS, "l_max": L_MAX, "feature_scale": FEATURE_SCALE}
        if kind == "rnn" else {"image_size": config.image_size})
    model = TrainedRecognizer(kind=kind, params=params, config=config,
                              preprocessing=preprocessing, hyper=hyper)
    if hyper.max_epochs == 0:
        return model
    if not valid_set:
        raise ValueError("validation set is empty")

    inputs, labels = _prepare(kind, train_set)
    v_inputs, v_labels = _prepare(kind, valid_set)

    opt = AdamState(lr=hyper.lr)
    best_acc = -1.0
    best_snapshot = None
    for epoch in range(hyper.max_epochs):
        order = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((hyper.seed, 1, epoch)))).permutation(len(inputs))
        losses = []
        for bi, start in enumerate(range(0, len(order), hyper.batch_size)):
            idx = order[start:start + hyper.batch_size]
            chunk = [inputs[i] for i in idx]
            want = labels[idx]
            dropout_rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((hyper.seed, 2, epoch, bi))))
            for p in params.values():
                p.grad = None
            loss = _batch_loss(kind, params, config, chunk, want, dropout_rng)
            eg.backward(loss)
            grads = clip_gradients({k: p.grad for k, p in params.items()}, hyper.clip)
            adam_step(params, grads, opt)
            losses.append(float(loss.data))

        acc = _batched_accuracy(kind, params, config, v_inputs, v_labels)
        model.history.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                              "valid_accuracy": acc})
        if acc > best_acc:
            best_acc = acc
            model.best_epoch = epoch
            best_snapshot = {k: p.data.copy() for k, p in params.items()}
        if epoch - model.best_epoch >= hyper.patience_epochs:
            break

    for k, p in params.items():
        p.data = best_snapshot[k]
    return model


# ------------------------------------------------------------- serialization

def save_model(path, model: TrainedRecognizer) -> None:
    header = {
        "container": "glyphscreen-model",
        "kind": model.kind,
        "config": asdict(model.config),
        "preprocessing": model.preprocessing,
        "hyper": asdict(model.hyper),
        "history": model.history,
        "best_epoch": model.best_epoch,
        "extras": model.extras,
    }
    ser.save_container(path, header, _raw_params(model))


def load_model(path) -> TrainedRecognizer:
    header, tensors = ser.load_container(path)
    if header.get("container") != "glyphscreen-model":
        raise ser.ModelFormatError("container is not a recognizer model")
    config = (RnnConfig(**header["config"]) if header["kind"] == "rnn"
              else CnnConfig(**{k: tuple(v) if k == "channels" else v
                                for k, v in header["config"].items()}))
    return TrainedRecognizer(
        kind=header["kind"],
        params={k: Tensor(v) for k, v in tensors.items()},
        config=config,
        preprocessing=header["preprocessing"],
        hyper=TrainingHyper(**header["hyper"]),
        history=header["history"],
        best_epoch=header["best_epoch"],
        extras=header.get("extras", {}),
    )
