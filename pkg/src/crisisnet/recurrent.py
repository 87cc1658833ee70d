"""Two-layer bidirectional LSTM regressor trained with BPTT and Adam.

Architecture: BiLSTM(h1, returning the full sequence) -> BiLSTM(h2, final
states) -> dropout -> dense(1). Gate blocks in every weight matrix are
stacked in the order input, forget, cell candidate, output.
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError

GATES = ("input", "forget", "cell", "output")
CHECKPOINT_MAGIC = b"BILSTMCK"
CHECKPOINT_VERSION = 1


def sigmoid(z):
    # tanh form cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _gate_scale(h):
    s = np.full(4 * h, 0.5)
    s[2 * h : 3 * h] = 1.0
    return s


def _activate(z, scale, h):
    """Apply sigmoid to the i, f, o blocks and tanh to the g block with one tanh call."""
    a = np.tanh(z * scale)
    a[:, :h] = 0.5 * (1.0 + a[:, :h])
    a[:, h : 2 * h] = 0.5 * (1.0 + a[:, h : 2 * h])
    a[:, 3 * h :] = 0.5 * (1.0 + a[:, 3 * h :])
    return a


@dataclass
class LstmDirection:
    W: np.ndarray  # (4h, d)
    U: np.ndarray  # (4h, h)
    b: np.ndarray  # (4h,)

    @property
    def hidden(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]


@dataclass
class LstmLayerParams:
    forward: LstmDirection
    backward: LstmDirection

    @property
    def hidden(self) -> int:
        return self.forward.hidden


@dataclass
class BiLstmStack:
    layer1: LstmLayerParams
    layer2: LstmLayerParams
    head_w: np.ndarray  # (2*h2,)
    head_b: np.ndarray  # (1,)
    dropout: float = 0.3

    def __post_init__(self):
        if self.layer2.forward.input_size != 2 * self.layer1.hidden:
            raise ValueError("layer 2 input size must equal twice the layer 1 units")
        if self.head_w.shape != (2 * self.layer2.hidden,):
            raise ValueError("head input size must equal twice the layer 2 units")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")

    @property
    def input_size(self) -> int:
        return self.layer1.forward.input_size

    @property
    def units(self) -> tuple[int, int]:
        return self.layer1.hidden, self.layer2.hidden

    def params(self) -> dict[str, np.ndarray]:
        """Name -> array view of every trainable parameter (fixed order)."""
        out = {}
        for ln, layer in (("l1", self.layer1), ("l2", self.layer2)):
            for dn, d in (("f", layer.forward), ("b", layer.backward)):
                out[f"{ln}{dn}_W"] = d.W
                out[f"{ln}{dn}_U"] = d.U
                out[f"{ln}{dn}_b"] = d.b
        out["head_w"] = self.head_w
        out["head_b"] = self.head_b
        return out

    def load_params(self, values: dict[str, np.ndarray]) -> None:
        for name, arr in self.params().items():
            arr[...] = values[name]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params().items()}


def _init_direction(rng, d, h):
    W = rng.uniform(-1, 1, (4 * h, d)) / np.sqrt(d)
    U = rng.uniform(-1, 1, (4 * h, h)) / np.sqrt(h)
    b = np.zeros(4 * h)
    b[h : 2 * h] = 1.0  # forget gate
    return LstmDirection(W, U, b)


def init_stack(input_size: int, units=(100, 50), dropout: float = 0.3, seed: int = 0) -> BiLstmStack:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases except forget-gate bias 1."""
    h1, h2 = units
    rng = np.random.default_rng(seed)
    l1 = LstmLayerParams(_init_direction(rng, input_size, h1), _init_direction(rng, input_size, h1))
    l2 = LstmLayerParams(_init_direction(rng, 2 * h1, h2), _init_direction(rng, 2 * h1, h2))
    head_w = rng.uniform(-1, 1, 2 * h2) / np.sqrt(2 * h2)
    return BiLstmStack(l1, l2, head_w, np.zeros(1), dropout)


def lstm_cell_step(params: LstmDirection, x, h_prev, c_prev):
    """One LSTM step; ``x`` may be a vector or a (batch, d) block."""
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    h = params.hidden
    if x.shape[-1] != params.input_size or h_prev.shape[-1] != h or c_prev.shape != h_prev.shape:
        raise ValueError(
            f"shape mismatch: x {x.shape}, h {h_prev.shape}, c {c_prev.shape} for d={params.input_size}, h={h}"
        )
    z = x @ params.W.T + h_prev @ params.U.T + params.b
    i = sigmoid(z[..., :h])
    f = sigmoid(z[..., h : 2 * h])
    g = np.tanh(z[..., 2 * h : 3 * h])
    o = sigmoid(z[..., 3 * h :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _direction_forward(p: LstmDirection, xs, reverse):
    T, B, _ = xs.shape
    h = p.hidden
    steps = range(T - 1, -1, -1) if reverse else range(T)
    gates = np.empty((T, B, 4 * h))  # activated i, f, g, o
    cs = np.empty((T, B, h))
    tcs = np.empty((T, B, h))
    h_prev = np.empty((T, B, h))
    c_prev = np.empty((T, B, h))
    hs = np.empty((T, B, h))
    h_t = np.zeros((B, h))
    c_t = np.zeros((B, h))
    scale = _gate_scale(h)
    UT = p.U.T
    Wx = xs @ p.W.T + p.b  # input projections for all steps at once
    for t in steps:
        a = _activate(Wx[t] + h_t @ UT, scale, h)
        gates[t] = a
        h_prev[t] = h_t
        c_prev[t] = c_t
        c_t = a[:, h : 2 * h] * c_t + a[:, :h] * a[:, 2 * h : 3 * h]
        tc = np.tanh(c_t)
        h_t = a[:, 3 * h :] * tc
        cs[t] = c_t
        tcs[t] = tc
        hs[t] = h_t
    cache = dict(gates=gates, c=cs, tc=tcs, h_prev=h_prev, c_prev=c_prev, reverse=reverse)
    return hs, cache


def _direction_backward(p: LstmDirection, xs, cache, dhs):
    T, B, _ = xs.shape
    h = p.hidden
    steps = range(T) if cache["reverse"] else range(T - 1, -1, -1)
    gates, tcs, c_prev = cache["gates"], cache["tc"], cache["c_prev"]
    # local derivative of each activated gate w.r.t. its pre-activation
    deriv = gates * (1.0 - gates)
    deriv[..., 2 * h : 3 * h] = 1.0 - gates[..., 2 * h : 3 * h] ** 2
    dz_all = np.empty((T, B, 4 * h))
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    for t in steps:
        a = gates[t]
        i, f, g, o = a[:, :h], a[:, h : 2 * h], a[:, 2 * h : 3 * h], a[:, 3 * h :]
        tc = tcs[t]
        dh = dhs[t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = dz_all[t]
        dz[:, :h] = dc * g
        dz[:, h : 2 * h] = dc * c_prev[t]
        dz[:, 2 * h : 3 * h] = dc * i
        dz[:, 3 * h :] = dh * tc
        dz *= deriv[t]
        dc_next = dc * f
        dh_next = dz @ p.U
    flat_dz = dz_all.reshape(T * B, 4 * h)
    grads = {
        "W": flat_dz.T @ xs.reshape(T * B, -1),
        "U": flat_dz.T @ cache["h_prev"].reshape(T * B, h),
        "b": flat_dz.sum(axis=0),
    }
    dxs = dz_all @ p.W
    return grads, dxs


def _as_batch(sequence, input_size):
    X = np.asarray(sequence, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1] < 1 or X.shape[0] < 1:
        raise DataError(f"expected a (T, d) sequence or (B, T, d) batch with T >= 1, got {X.shape}")
    if X.shape[2] != input_size:
        raise ValueError(f"expected input size {input_size}, got {X.shape[2]}")
    return X


def bilstm_forward(stack: BiLstmStack, sequence, training: bool = False, rng=None, mask=None):
    """Predict from a (T, d) sequence or a (B, T, d) batch.

    Returns (predictions of shape (B,), cache). In training mode the
    final-state dropout mask is drawn from ``rng`` (or taken from ``mask``)
    with inverted scaling; inference applies no dropout.
    """
    X = _as_batch(sequence, stack.input_size)
    xs = X.transpose(1, 0, 2)  # (T, B, d)
    T, B, _ = xs.shape
    h2 = stack.layer2.hidden
    f1, c1f = _direction_forward(stack.layer1.forward, xs, reverse=False)
    b1, c1b = _direction_forward(stack.layer1.backward, xs, reverse=True)
    seq1 = np.concatenate([f1, b1], axis=2)
    f2, c2f = _direction_forward(stack.layer2.forward, seq1, reverse=False)
    b2, c2b = _direction_forward(stack.layer2.backward, seq1, reverse=True)
    final = np.concatenate([f2[T - 1], b2[0]], axis=1)  # (B, 2*h2)
    if training and stack.dropout > 0:
        if mask is None:
            if rng is None:
                raise ValueError("training mode needs an rng for the dropout mask")
            mask = (rng.random(final.shape) >= stack.dropout) / (1.0 - stack.dropout)
    else:
        mask = np.ones_like(final)
    dropped = final * mask
    pred = dropped @ stack.head_w + stack.head_b[0]
    cache = dict(xs=xs, seq1=seq1, c1f=c1f, c1b=c1b, c2f=c2f, c2b=c2b, mask=mask, dropped=dropped,
                 pred=pred, T=T, B=B, h2=h2, training=training)
    return pred, cache


def loss_mse(prediction, target) -> float:
    p = np.atleast_1d(np.asarray(prediction, dtype=float))
    y = np.atleast_1d(np.asarray(target, dtype=float))
    return float(np.mean((p - y) ** 2))


def backward(stack: BiLstmStack, cache, target) -> dict[str, np.ndarray]:
    """Gradients of the batch-mean squared error w.r.t. every parameter."""
    if not cache or "pred" not in cache:
        raise ValueError("backward needs the cache of a forward pass")
    y = np.atleast_1d(np.asarray(target, dtype=float))
    T, B, h2 = cache["T"], cache["B"], cache["h2"]
    if y.shape != (B,):
        raise ValueError(f"target shape {y.shape} does not match batch size {B}")
    dpred = 2.0 * (cache["pred"] - y) / B
    grads = {"head_w": cache["dropped"].T @ dpred, "head_b": np.array([dpred.sum()])}
    dfinal = np.outer(dpred, stack.head_w) * cache["mask"]

    seq1 = cache["seq1"]
    dh2f = np.zeros((T, B, h2))
    dh2f[T - 1] = dfinal[:, :h2]
    dh2b = np.zeros((T, B, h2))
    dh2b[0] = dfinal[:, h2:]
    g2f, dseq_f = _direction_backward(stack.layer2.forward, seq1, cache["c2f"], dh2f)
    g2b, dseq_b = _direction_backward(stack.layer2.backward, seq1, cache["c2b"], dh2b)
    dseq1 = dseq_f + dseq_b
    h1 = stack.layer1.hidden
    xs = cache["xs"]
    g1f, _ = _direction_backward(stack.layer1.forward, xs, cache["c1f"], dseq1[..., :h1])
    g1b, _ = _direction_backward(stack.layer1.backward, xs, cache["c1b"], dseq1[..., h1:])
    for prefix, g in (("l1f", g1f), ("l1b", g1b), ("l2f", g2f), ("l2b", g2b)):
        for k, v in g.items():
            grads[f"{prefix}_{k}"] = v
    return grads


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if set(params) != set(grads):
        raise ValueError("params and grads must have the same keys")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=float)
        if g.shape != p.shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, parameter {p.shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    val_frac: float = 0.15
    lr: float = 0.001
    seed: int = 0
    shuffle: bool = True
    restore_best: bool = True


@dataclass
class TrainHistory:
    """Per-epoch losses; ``best_epoch`` is the 0-based index of the lowest validation loss."""

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_params: dict | None = field(default=None, repr=False)

    def to_csv(self) -> str:
        rows = ["epoch,train_mse,val_mse"]
        rows += [f"{e + 1},{tr:.12g},{va:.12g}" for e, (tr, va) in enumerate(zip(self.train_loss, self.val_loss))]
        return "\n".join(rows) + "\n"


def chronological_split(n: int, fracs) -> list[slice]:
    """Consecutive slices with sizes proportional to ``fracs`` (last takes the remainder)."""
    bounds = [0]
    for f in fracs[:-1]:
        bounds.append(bounds[-1] + int(round(n * f)))
    bounds.append(n)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def train(stack: BiLstmStack, dataset, config: TrainConfig = TrainConfig(), validation=None) -> TrainHistory:
    """Mini-batch Adam on (sequences, targets); updates ``stack`` in place.

    Without an explicit ``validation`` pair the last ``val_frac`` of the
    dataset (in time order) is held out. The training loss of an epoch is
    the sample-weighted mean of its training-mode batch losses; validation
    loss is computed in inference mode. The parameters of the best
    validation epoch are kept in the history and restored into the stack.
    """
    X, y = dataset
    X = _as_batch(X, stack.input_size)
    y = np.asarray(y, dtype=float)
    if len(X) != len(y):
        raise DataError("sequences and targets differ in length")
    if validation is None:
        n_val = int(round(len(y) * config.val_frac))
        Xtr, ytr, Xva, yva = X[: len(y) - n_val], y[: len(y) - n_val], X[len(y) - n_val :], y[len(y) - n_val :]
    else:
        Xtr, ytr = X, y
        Xva, yva = _as_batch(validation[0], stack.input_size), np.asarray(validation[1], dtype=float)
    if len(ytr) == 0 or len(yva) == 0:
        raise DataError(f"empty split: {len(ytr)} training and {len(yva)} validation samples")
    rng = np.random.default_rng(config.seed)
    state = AdamState(lr=config.lr)
    params = stack.params()
    hist = TrainHistory()
    best = np.inf
    for epoch in range(config.epochs):
        order = rng.permutation(len(ytr)) if config.shuffle else np.arange(len(ytr))
        total = 0.0
        for a in range(0, len(order), config.batch_size):
            idx = order[a : a + config.batch_size]
            pred, cache = bilstm_forward(stack, Xtr[idx], training=True, rng=rng)
            total += loss_mse(pred, ytr[idx]) * len(idx)
            adam_step(state, params, backward(stack, cache, ytr[idx]))
        train_loss = total / len(ytr)
        val_loss = loss_mse(predict_series(stack, Xva), yva)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise NumericalError(f"non-finite loss at epoch {epoch + 1}")
        hist.train_loss.append(train_loss)
        hist.val_loss.append(val_loss)
        if val_loss < best:
            best = val_loss
            hist.best_epoch = epoch
            hist.best_params = stack.snapshot()
    if config.restore_best and hist.best_params is not None:
        stack.load_params(hist.best_params)
    return hist


def predict_series(stack: BiLstmStack, sequences, batch_size: int = 256) -> np.ndarray:
    """Inference-mode predictions, one per sequence, in input order."""
    X = _as_batch(sequences, stack.input_size)
    out = [bilstm_forward(stack, X[a : a + batch_size])[0] for a in range(0, len(X), batch_size)]
    return np.concatenate(out)


def save_checkpoint(stack: BiLstmStack, path) -> None:
    """Binary layout: magic, u32 version, u32 input size, u32 h1, u32 h2,
    f64 dropout, u32 array count, then per array u32 ndim, u32 dims and
    little-endian float64 data (order of ``BiLstmStack.params``)."""
    h1, h2 = stack.units
    arrays = stack.params()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<4Id", CHECKPOINT_VERSION, stack.input_size, h1, h2, stack.dropout))
        fh.write(struct.pack("<I", len(arrays)))
        for arr in arrays.values():
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> BiLstmStack:
    data = Path(path).read_bytes()
    try:
        return _parse_checkpoint(data, path)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: truncated or corrupt checkpoint ({exc})") from None


def _parse_checkpoint(data, path) -> BiLstmStack:
    if data[:8] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a BiLSTM checkpoint")
    version, d, h1, h2, dropout = struct.unpack_from("<4Id", data, 8)
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    stack = init_stack(d, (h1, h2), dropout)
    off = 8 + struct.calcsize("<4Id")
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    params = stack.params()
    if count != len(params):
        raise DataError(f"{path}: expected {len(params)} arrays, found {count}")
    for name, arr in params.items():
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        if tuple(shape) != arr.shape:
            raise DataError(f"{path}: array {name} has shape {shape}, expected {arr.shape}")
        nbytes = 8 * int(np.prod(shape))
        arr[...] = np.frombuffer(data, dtype="<f8", count=int(np.prod(shape)), offset=off).reshape(shape)
        off += nbytes
    if off != len(data):
        raise DataError(f"{path}: {len(data) - off} trailing bytes after the last array")
    return stack


def clone(stack: BiLstmStack) -> BiLstmStack:
    return copy.deepcopy(stack)
