"""Feed-forward acoustic model: tanh hidden layers, softmax over pdf-ids.

Weights are stored ``(fan_in, fan_out)`` so a batch ``X`` of shape
``(n, fan_in)`` maps to ``X @ W + b``.

Checkpoint format (``ACN1``), all integers unsigned 64-bit little-endian and
all reals IEEE-754 binary64 little-endian::

    offset 0   b"ACN1"
    offset 4   epoch
    offset 12  L = number of layer dims (>= 2)
    offset 20  dims[0] ... dims[L-1]
    then for each layer l = 0 .. L-2:
               W_l row-major, dims[l] * dims[l+1] reals
               b_l, dims[l+1] reals

The file must end exactly after the last bias.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import LoadError, ParameterError, TrainingError
from .rng import NET_INIT, Stream

MAGIC = b"ACN1"
PROB_FLOOR = 1e-30


@dataclass(eq=False)
class AcousticNet:
    layer_dims: list
    weights: list
    biases: list
    epoch: int = 0

    def __post_init__(self):
        dims = list(self.layer_dims)
        if len(dims) < 2 or len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ParameterError("layer_dims and parameter lists disagree")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (dims[l], dims[l + 1]) or b.shape != (dims[l + 1],):
                raise ParameterError(f"layer {l} has shapes {W.shape}, {b.shape}; expected {(dims[l], dims[l + 1])}")
        self.layer_dims = dims

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self):
        return AcousticNet(list(self.layer_dims), [W.copy() for W in self.weights],
                           [b.copy() for b in self.biases], self.epoch)

    def is_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.params())


def init_net(layer_dims, seed):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, drawn W then b per layer."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ParameterError("need at least input and output dims, all >= 1")
    stream = Stream.for_domain(seed, NET_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        r = 1.0 / np.sqrt(fan_in)
        weights.append((2.0 * stream.uniform(fan_in * fan_out) - 1.0).reshape(fan_in, fan_out) * r)
        biases.append((2.0 * stream.uniform(fan_out) - 1.0) * r)
    return AcousticNet(dims, weights, biases)


def widen_input(net, extra):
    """Append ``extra`` zero input rows to the first weight matrix.

    The widened net ignores the appended inputs until training moves them.
    """
    W0 = np.vstack([net.weights[0], np.zeros((extra, net.weights[0].shape[1]))])
    dims = [net.input_dim + extra] + net.layer_dims[1:]
    return AcousticNet(dims, [W0] + [W.copy() for W in net.weights[1:]],
                       [b.copy() for b in net.biases], net.epoch)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.input_dim or x.ndim > 2:
        raise ParameterError(f"input must have trailing dimension {net.input_dim}, got shape {x.shape}")
    return x


def _activations(net, X):
    acts = [X]
    h = X
    last = len(net.weights) - 1
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ W + b
        h = z if l == last else np.tanh(z)
        acts.append(h)
    return acts


def logits(net, x):
    return _activations(net, _check_input(net, x))[-1]


def forward(net, x):
    """Softmax posteriors for one input vector or a ``(n, input_dim)`` batch."""
    return _softmax(logits(net, x))


def _backprop(net, acts, dz, grads):
    """Accumulate parameter gradients given d(loss)/d(logits)."""
    delta = dz
    for l in range(len(net.weights) - 1, -1, -1):
        grads[2 * l] += acts[l].T @ delta
        grads[2 * l + 1] += delta.sum(axis=0)
        if l:
            delta = (delta @ net.weights[l].T) * (1.0 - acts[l] ** 2)


@dataclass
class LossReport:
    primary_ce: float
    auxiliary_ce: float
    total: float
    frames: int


@dataclass
class AuxBatch:
    """Inputs for the auxiliary language-level objective on one batch.

    Row ``r`` describes the context of training frame ``r``:

    * ``prev_inputs[r]`` is the network input of the previous frame; its
      posterior ``o`` is the differentiable estimate branch.
    * ``carry[r]`` multiplies ``o`` before renormalisation.  It is all ones
      for context-independent processing and the (constant) one-step
      prediction from older history for context-dependent processing.
    * ``target[r]`` is the label-derived prediction (no gradient).
    * ``mask[r]`` is False for utterance-initial frames, which have no context.

    The estimate is ``q = compress(step(normalise(carry * o), T))`` where
    ``step`` is the sum- or max-mode transform with flat emissions.
    """

    prev_inputs: np.ndarray
    carry: np.ndarray
    target: np.ndarray
    transitions: np.ndarray
    compression: np.ndarray = None
    mode: str = "sum"
    mask: np.ndarray = None


def _aux_estimate(o, aux):
    s = aux.carry * o
    ssum = s.sum(axis=1, keepdims=True)
    P = s / ssum
    if aux.mode == "sum":
        u = P @ aux.transitions
        arg = None
    else:
        cand = P[:, :, None] * aux.transitions[None, :, :]
        arg = cand.argmax(axis=1)
        u = np.take_along_axis(cand, arg[:, None, :], axis=1)[:, 0, :]
    usum = u.sum(axis=1, keepdims=True)
    qf = u / usum
    q = qf if aux.compression is None else qf @ aux.compression
    return q, (s, ssum, P, arg, u, usum, qf)


def _aux_backward(dq, o, aux, cache):
    s, ssum, P, arg, u, usum, qf = cache
    dqf = dq if aux.compression is None else dq @ aux.compression.T
    du = (dqf - (dqf * qf).sum(axis=1, keepdims=True)) / usum
    if aux.mode == "sum":
        dP = du @ aux.transitions.T
    else:
        n = P.shape[1]
        sel = (arg[:, None, :] == np.arange(n)[None, :, None])
        dP = (sel * aux.transitions[None, :, :] * du[:, None, :]).sum(axis=2)
    ds = (dP - (dP * P).sum(axis=1, keepdims=True)) / ssum
    do = ds * aux.carry
    return o * (do - (do * o).sum(axis=1, keepdims=True))


def loss_and_gradients(net, inputs, targets, aux=None, aux_weight=0.0):
    """Composite objective ``primary_ce + aux_weight * auxiliary_ce`` and its gradients.

    ``targets`` are integer pdf-ids or one-hot rows.  Gradients are returned as
    a list parallel to ``net.params()``.
    """
    X = _check_input(net, inputs)
    X = np.atleast_2d(X)
    targets = np.asarray(targets)
    if targets.ndim == 2:
        if targets.shape != (X.shape[0], net.output_dim):
            raise ParameterError("one-hot targets must be (batch, num_pdfs)")
        targets = targets.argmax(axis=1)
    if targets.shape != (X.shape[0],) or X.shape[0] == 0:
        raise ParameterError("need one target per input row and a non-empty batch")
    if aux_weight < 0:
        raise ParameterError("aux_weight must be non-negative")
    n = X.shape[0]
    grads = [np.zeros_like(p) for p in net.params()]

    acts = _activations(net, X)
    logp = _log_softmax(acts[-1])
    rows = np.arange(n)
    primary = float(-logp[rows, targets].mean())
    dz = np.exp(logp)
    dz[rows, targets] -= 1.0
    dz /= n
    _backprop(net, acts, dz, grads)

    auxiliary = 0.0
    if aux is not None:
        mask = np.ones(n, dtype=bool) if aux.mask is None else np.asarray(aux.mask, dtype=bool)
        width = net.output_dim if aux.compression is None else aux.compression.shape[1]
        if (aux.prev_inputs.shape != X.shape or aux.carry.shape != (n, net.output_dim)
                or aux.target.shape != (n, width) or mask.shape != (n,)):
            raise ParameterError("auxiliary batch shapes disagree with the primary batch")
        n_aux = int(mask.sum())
        if n_aux:
            sub = AuxBatch(aux.prev_inputs[mask], aux.carry[mask], aux.target[mask],
                           aux.transitions, aux.compression, aux.mode)
            pacts = _activations(net, sub.prev_inputs)
            o = _softmax(pacts[-1])
            q, cache = _aux_estimate(o, sub)
            qf = np.maximum(q, PROB_FLOOR)
            auxiliary = float(-(sub.target * np.log(qf)).sum(axis=1).mean())
            if aux_weight > 0:
                dq = np.where(q > PROB_FLOOR, -sub.target / qf, 0.0) * (aux_weight / n_aux)
                _backprop(net, pacts, _aux_backward(dq, o, sub, cache), grads)

    total = primary + aux_weight * auxiliary
    return LossReport(primary, auxiliary, total, n), grads


def sgd_step(net, grads, learning_rate):
    """In-place ``param -= learning_rate * grad``; returns ``net``."""
    params = net.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ParameterError("gradient shapes do not match the network")
    if not all(np.all(np.isfinite(g)) for g in grads):
        bad = [i for i, g in enumerate(grads) if not np.all(np.isfinite(g))]
        raise TrainingError(f"non-finite gradient in parameter block(s) {bad} during epoch {net.epoch + 1}")
    if learning_rate < 0:
        raise ParameterError("learning_rate must be non-negative")
    for p, g in zip(params, grads):
        p -= learning_rate * g
    return net


def dumps_checkpoint(net):
    parts = [MAGIC, struct.pack("<QQ", net.epoch, len(net.layer_dims)),
             np.asarray(net.layer_dims, dtype="<u8").tobytes()]
    for W, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def loads_checkpoint(data):
    if len(data) < 20:
        raise LoadError(f"offset {len(data)}: truncated header (need 20 bytes)")
    if data[:4] != MAGIC:
        raise LoadError(f"offset 0: bad magic {data[:4]!r}, expected {MAGIC!r}")
    epoch, n_dims = struct.unpack_from("<QQ", data, 4)
    if n_dims < 2 or 20 + 8 * n_dims > len(data):
        raise LoadError(f"offset 12: invalid or truncated dimension list ({n_dims} dims)")
    dims = np.frombuffer(data, dtype="<u8", count=n_dims, offset=20).astype(np.int64).tolist()
    if min(dims) < 1:
        raise LoadError("offset 20: layer dims must be >= 1")
    offset = 20 + 8 * n_dims
    need = offset + 8 * sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    if len(data) != need:
        raise LoadError(f"offset {min(len(data), need)}: expected {need} bytes, file has {len(data)}")
    weights, biases = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        weights.append(np.frombuffer(data, "<f8", a * b, offset).astype(np.float64).reshape(a, b))
        offset += 8 * a * b
        biases.append(np.frombuffer(data, "<f8", b, offset).astype(np.float64))
        offset += 8 * b
    net = AcousticNet(dims, weights, biases, int(epoch))
    if not net.is_finite():
        raise LoadError("offset 20: checkpoint contains non-finite parameters")
    return net


def save_checkpoint(net, path):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps_checkpoint(net))
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads_checkpoint(fh.read())
