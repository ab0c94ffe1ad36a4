"""Minimal reverse-mode differentiation over float64 numpy arrays.

A Tensor wraps an ndarray and remembers how it was computed: its parent
Tensors and one vector-Jacobian-product callable per parent. backward()
walks the recorded graph once in reverse topological order. That is all
the machinery the recognizers need; there is no broadcasting cleverness
beyond what the ops below define, and no higher-order gradients.

Plain ndarrays (or scalars) may be passed wherever a Tensor is accepted;
they are treated as constants and receive no gradient. Model inputs stay
constants this way and only parameters join the graph.

Ops fall in two groups: generic primitives (matmul, add, relu, softmax,
...) and fused cells for the hot recurrence (affine2, lstm_cell,
where_mask) whose hand-derived backward avoids building dozens of nodes
per timestep.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording (evaluation mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_vjps")

    def __init__(self, data, parents=(), vjps=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjps = vjps

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def raw(v):
    return v.data if isinstance(v, Tensor) else np.asarray(v, dtype=np.float64)


def _node(data, pairs):
    """Build a Tensor; ``pairs`` is [(parent_or_const, vjp), ...] and
    constants are silently dropped from the graph."""
    if not _GRAD_ENABLED:
        return Tensor(data)
    parents = tuple(p for p, _ in pairs if isinstance(p, Tensor))
    vjps = tuple(fn for p, fn in pairs if isinstance(p, Tensor))
    return Tensor(data, parents, vjps)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into .grad over the whole graph.

    loss must be scalar-shaped. Grads are accumulated (callers reset
    .grad to None between steps); topological order is built iteratively
    so deep recurrences do not hit the recursion limit.
    """
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in zip(node._parents, node._vjps):
            contrib = vjp(g)
            if parent.grad is None:
                parent.grad = contrib.copy() if contrib.base is not None else contrib
            else:
                parent.grad += contrib


# ---------------------------------------------------------------- primitives

def add(a, b):
    da, db = raw(a), raw(b)
    return _node(da + db, [
        (a, lambda g: _unbroadcast(g, da.shape)),
        (b, lambda g: _unbroadcast(g, db.shape)),
    ])


def sub(a, b):
    da, db = raw(a), raw(b)
    return _node(da - db, [
        (a, lambda g: _unbroadcast(g, da.shape)),
        (b, lambda g: _unbroadcast(-g, db.shape)),
    ])


def mul(a, b):
    da, db = raw(a), raw(b)
    return _node(da * db, [
        (a, lambda g: _unbroadcast(g * db, da.shape)),
        (b, lambda g: _unbroadcast(g * da, db.shape)),
    ])


def neg(a):
    return _node(-raw(a), [(a, lambda g: -g)])


def matmul(a, b):
    da, db = raw(a), raw(b)
    return _node(da @ db, [
        (a, lambda g: g @ db.T),
        (b, lambda g: da.T @ g),
    ])


def sigmoid(a):
    out = 1.0 / (1.0 + np.exp(-raw(a)))
    return _node(out, [(a, lambda g: g * out * (1.0 - out))])


def tanh(a):
    out = np.tanh(raw(a))
    return _node(out, [(a, lambda g: g * (1.0 - out * out))])


def relu(a):
    da = raw(a)
    out = np.maximum(da, 0.0)
    return _node(out, [(a, lambda g: g * (da > 0.0))])


def exp(a):
    out = np.exp(raw(a))
    return _node(out, [(a, lambda g: g * out)])


def log(a):
    da = raw(a)
    return _node(np.log(da), [(a, lambda g: g / da)])


def maximum_scalar(a, floor: float):
    """Elementwise max(a, floor); gradient is zero where the floor wins."""
    da = raw(a)
    keep = da > floor
    return _node(np.maximum(da, floor), [(a, lambda g: g * keep)])


def softmax(a, axis=-1):
    da = raw(a)
    shifted = da - da.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - inner)

    return _node(out, [(a, vjp)])


def mean(a):
    da = raw(a)
    n = da.size
    return _node(np.asarray(da.mean()), [(a, lambda g: np.full(da.shape, float(g) / n))])


def reshape(a, shape):
    da = raw(a)
    return _node(da.reshape(shape), [(a, lambda g: g.reshape(da.shape))])


def slice_cols(a, start, stop):
    da = raw(a)

    def vjp(g):
        out = np.zeros_like(da)
        out[..., start:stop] = g
        return out

    return _node(da[..., start:stop].copy(), [(a, vjp)])


def pick(a, row_index, col_index):
    """out[i] = a[row_index[i], col_index[i]] (gather for the loss)."""
    da = raw(a)
    rows = np.asarray(row_index)
    cols = np.asarray(col_index)

    def vjp(g):
        out = np.zeros_like(da)
        np.add.at(out, (rows, cols), g)
        return out

    return _node(da[rows, cols], [(a, vjp)])


# ---------------------------------------------------------------- fused cells

def affine2(x, wx, h, wh, b):
    """x @ wx + h @ wh + b in one node (the gate pre-activation)."""
    dx, dwx, dh, dwh, db = raw(x), raw(wx), raw(h), raw(wh), raw(b)
    out = dx @ dwx + dh @ dwh + db
    return _node(out, [
        (x, lambda g: g @ dwx.T),
        (wx, lambda g: dx.T @ g),
        (h, lambda g: g @ dwh.T),
        (wh, lambda g: dh.T @ g),
        (b, lambda g: g.sum(axis=0)),
    ])


def lstm_cell(z, c_prev, hidden: int):
    """One LSTM step from fused pre-activations z = [i | f | g | o].

    Returns (h, c) as two graph nodes that share the forward computation;
    gate order is input, forget, candidate, output. Gradient through
    both h and c paths is hand-derived.
    """
    dz, dc_prev = raw(z), raw(c_prev)
    H = hidden
    i = 1.0 / (1.0 + np.exp(-dz[:, 0 * H:1 * H]))
    f = 1.0 / (1.0 + np.exp(-dz[:, 1 * H:2 * H]))
    g_ = np.tanh(dz[:, 2 * H:3 * H])
    o = 1.0 / (1.0 + np.exp(-dz[:, 3 * H:4 * H]))
    c = f * dc_prev + i * g_
    tc = np.tanh(c)
    h = o * tc

    def dz_from_dc(dc):
        out = np.empty_like(dz)
        out[:, 0 * H:1 * H] = dc * g_ * i * (1.0 - i)
        out[:, 1 * H:2 * H] = dc * dc_prev * f * (1.0 - f)
        out[:, 2 * H:3 * H] = dc * i * (1.0 - g_ * g_)
        out[:, 3 * H:4 * H] = 0.0
        return out

    def h_vjp_z(gh):
        dc = gh * o * (1.0 - tc * tc)
        out = dz_from_dc(dc)
        out[:, 3 * H:4 * H] = gh * tc * o * (1.0 - o)
        return out

    def h_vjp_cprev(gh):
        return gh * o * (1.0 - tc * tc) * f

    def c_vjp_z(gc):
        return dz_from_dc(gc)

    def c_vjp_cprev(gc):
        return gc * f

    h_node = _node(h, [(z, h_vjp_z), (c_prev, h_vjp_cprev)])
    c_node = _node(c, [(z, c_vjp_z), (c_prev, c_vjp_cprev)])
    return h_node, c_node


def where_mask(mask, new, old):
    """mask * new + (1 - mask) * old; mask is a constant 0/1 array."""
    m = np.asarray(mask, dtype=np.float64)
    dn, do = raw(new), raw(old)
    return _node(m * dn + (1.0 - m) * do, [
        (new, lambda g: _unbroadcast(g * m, dn.shape)),
        (old, lambda g: _unbroadcast(g * (1.0 - m), do.shape)),
    ])


def row_head(a, n: int):
    """First n rows of a 2-D tensor (the still-active batch rows)."""
    da = raw(a)

    def vjp(g):
        out = np.zeros_like(da)
        out[:n] = g
        return out

    return _node(da[:n], [(a, vjp)])


def prefix_update(old, new, n: int):
    """Copy of ``old`` with rows [:n] replaced by ``new`` (finished batch
    rows keep their frozen state)."""
    do, dn = raw(old), raw(new)
    out = do.copy()
    out[:n] = dn

    def vjp_old(g):
        gg = g.copy()
        gg[:n] = 0.0
        return gg

    return _node(out, [(old, vjp_old), (new, lambda g: g[:n])])


# ---------------------------------------------------------------- convolution

def _patch_view(x, kh, kw):
    """(B, H, W, C) -> strided view (B, OH, OW, KH, KW, C), valid padding."""
    b, h, w, c = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    sb, sh, sw, sc = x.strides
    return np.lib.stride_tricks.as_strided(
        x, shape=(b, oh, ow, kh, kw, c), strides=(sb, sh, sw, sh, sw, sc),
        writeable=False,
    )


def conv2d(x, w, b):
    """Valid 2-D convolution: x (B,H,W,Cin), w (KH,KW,Cin,Cout), b (Cout,)."""
    dx, dw, db = raw(x), raw(w), raw(b)
    kh, kw, cin, cout = dw.shape
    patches = np.ascontiguousarray(_patch_view(dx, kh, kw))
    bsz, oh, ow = patches.shape[:3]
    flat = patches.reshape(bsz * oh * ow, kh * kw * cin)
    out = (flat @ dw.reshape(kh * kw * cin, cout) + db).reshape(bsz, oh, ow, cout)

    def vjp_w(g):
        return (flat.T @ g.reshape(bsz * oh * ow, cout)).reshape(dw.shape)

    def vjp_b(g):
        return g.reshape(-1, cout).sum(axis=0)

    def vjp_x(g):
        contrib = g.reshape(bsz * oh * ow, cout) @ dw.reshape(kh * kw * cin, cout).T
        contrib = contrib.reshape(bsz, oh, ow, kh, kw, cin)
        out_x = np.zeros_like(dx)
        for ki in range(kh):
            for kj in range(kw):
                out_x[:, ki:ki + oh, kj:kj + ow, :] += contrib[:, :, :, ki, kj, :]
        return out_x

    return _node(out, [(x, vjp_x), (w, vjp_w), (b, vjp_b)])


def maxpool2(x):
    """2x2 max pooling with stride 2; odd edges are padded (ceil mode) so
    a 1x1 map survives pooling."""
    dx = raw(x)
    b, h, w, c = dx.shape
    oh, ow = (h + 1) // 2, (w + 1) // 2
    padded = np.full((b, oh * 2, ow * 2, c), -np.inf)
    padded[:, :h, :w, :] = dx
    blocks = padded.reshape(b, oh, 2, ow, 2, c).transpose(0, 1, 3, 5, 2, 4)
    blocks = blocks.reshape(b, oh, ow, c, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def vjp(g):
        flat = np.zeros((b, oh, ow, c, 4))
        np.put_along_axis(flat, arg[..., None], g[..., None], axis=-1)
        flat = flat.reshape(b, oh, ow, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        return flat.reshape(b, oh * 2, ow * 2, c)[:, :h, :w, :]

    return _node(out, [(x, vjp)])
