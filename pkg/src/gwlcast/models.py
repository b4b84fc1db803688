"""Recurrent sequence models: cells, encoder-decoder unrolling, BPTT.

A model keeps all of its parameters in one flat float64 vector.  The cell
parameter objects returned by :attr:`SequenceModel.layers` are views into
that vector, so optimizers can work on the flat array directly.

Unrolling: the encoder consumes ``lookback`` rows of (rain, tide, gwl); the
same recurrence then runs ``horizon`` more steps fed (rain, tide, 0) and a
shared dense head maps each decoder hidden state of the top layer to one
groundwater prediction.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _pykernels, backend
from ._pykernels import LSTM, RNN, param_layout
from .numerics import Prng, ShapeError, sigmoid_vec, uniform_init

__all__ = [
    "GATES",
    "RnnCellParams",
    "LstmCellParams",
    "InputWindow",
    "SequenceModel",
    "Gradients",
    "ForwardTape",
    "rnn_cell_forward",
    "lstm_cell_forward",
    "model_forward",
    "model_backward",
    "clip_by_global_norm",
    "gradient_check",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]

GATES = ("input", "forget", "output", "candidate")
_KIND_CODES = {"rnn": RNN, "lstm": LSTM}
MODEL_FORMAT = "gwlcast.sequence-model"


@dataclass(frozen=True)
class RnnCellParams:
    w_x: np.ndarray  # (h, d)
    w_h: np.ndarray  # (h, h)
    b: np.ndarray  # (h,)


@dataclass(frozen=True)
class LstmCellParams:
    """Per-gate weights keyed by the names in :data:`GATES`."""

    w_x: dict
    w_h: dict
    b: dict


def _check_cell_shapes(x, h_prev, w_x, w_h, b):
    h, d = w_x.shape
    if x.shape != (d,) or h_prev.shape != (h,) or w_h.shape != (h, h) or b.shape != (h,):
        raise ShapeError(
            f"cell shape mismatch: x {x.shape}, h_prev {h_prev.shape}, "
            f"w_x {w_x.shape}, w_h {w_h.shape}, b {b.shape}"
        )


def rnn_cell_forward(x, h_prev, p: RnnCellParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    _check_cell_shapes(x, h_prev, p.w_x, p.w_h, p.b)
    return np.tanh(p.w_x @ x + p.w_h @ h_prev + p.b)


def lstm_cell_forward(x, h_prev, c_prev, p: LstmCellParams):
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    for g in GATES:
        _check_cell_shapes(x, h_prev, p.w_x[g], p.w_h[g], p.b[g])
    if c_prev.shape != h_prev.shape:
        raise ShapeError(f"c_prev shape {c_prev.shape} != h_prev shape {h_prev.shape}")

    def pre(g):
        return p.w_x[g] @ x + p.w_h[g] @ h_prev + p.b[g]

    i = sigmoid_vec(pre("input"))
    f = sigmoid_vec(pre("forget"))
    o = sigmoid_vec(pre("output"))
    g = np.tanh(pre("candidate"))
    c = f * c_prev + i * g
    return o * np.tanh(c), c


@dataclass(frozen=True)
class InputWindow:
    """Normalized model input: past (lookback, 3) and future (horizon, 2)."""

    past: np.ndarray
    future: np.ndarray

    def __post_init__(self):
        past = np.ascontiguousarray(self.past, dtype=np.float64)
        future = np.ascontiguousarray(self.future, dtype=np.float64)
        if past.ndim != 2 or past.shape[1] != 3:
            raise ShapeError(f"past block must be (lookback, 3), got {past.shape}")
        if future.ndim != 2 or future.shape[1] != 2:
            raise ShapeError(f"future block must be (horizon, 2), got {future.shape}")
        if past.shape[0] < 1 or future.shape[0] < 1:
            raise ShapeError("lookback and horizon must both be at least 1")
        object.__setattr__(self, "past", past)
        object.__setattr__(self, "future", future)

    @property
    def lookback(self) -> int:
        return self.past.shape[0]

    @property
    def horizon(self) -> int:
        return self.future.shape[0]


@dataclass(frozen=True, eq=False)
class SequenceModel:
    """Recurrent stack plus a dense head, parameters in one flat vector."""

    kind: str
    input_size: int
    hidden_size: int
    n_layers: int
    params: np.ndarray

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "rnn" and self.n_layers != 1:
            raise ValueError("an RNN model has exactly one recurrent layer")
        if self.kind == "lstm" and self.n_layers < 2:
            raise ValueError("an LSTM model has at least two stacked layers")
        if self.input_size < 1 or self.hidden_size < 1:
            raise ValueError("input and hidden sizes must be positive")
        params = np.ascontiguousarray(self.params, dtype=np.float64).copy()
        expected = self.layout[3]
        if params.shape != (expected,):
            raise ShapeError(
                f"{self.kind} model with these sizes needs {expected} parameters, "
                f"got array of shape {params.shape}"
            )
        if not np.all(np.isfinite(params)):
            raise ValueError("model parameters contain non-finite entries")
        params.flags.writeable = False
        object.__setattr__(self, "params", params)

    @property
    def kind_code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def layout(self):
        return param_layout(self.kind_code, self.n_layers, self.hidden_size, self.input_size)

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    @property
    def layers(self) -> list:
        h = self.hidden_size
        out = []
        for wx, wh, b, d in self.layout[0]:
            if self.kind == "rnn":
                out.append(
                    RnnCellParams(
                        self.params[wx:wh].reshape(h, d),
                        self.params[wh:b].reshape(h, h),
                        self.params[b : b + h],
                    )
                )
            else:
                Wx = self.params[wx:wh].reshape(4 * h, d)
                Wh = self.params[wh:b].reshape(4 * h, h)
                B = self.params[b : b + 4 * h]
                blocks = {g: slice(k * h, (k + 1) * h) for k, g in enumerate(GATES)}
                out.append(
                    LstmCellParams(
                        {g: Wx[s] for g, s in blocks.items()},
                        {g: Wh[s] for g, s in blocks.items()},
                        {g: B[s] for g, s in blocks.items()},
                    )
                )
        return out

    @property
    def head_w(self) -> np.ndarray:
        hw = self.layout[1]
        return self.params[hw : hw + self.hidden_size].reshape(1, self.hidden_size)

    @property
    def head_b(self) -> np.ndarray:
        hb = self.layout[2]
        return self.params[hb : hb + 1]

    def with_params(self, params) -> "SequenceModel":
        return type(self)(self.kind, self.input_size, self.hidden_size, self.n_layers, params)

    def same_architecture(self, other: "SequenceModel") -> bool:
        return (self.kind, self.input_size, self.hidden_size, self.n_layers) == (
            other.kind,
            other.input_size,
            other.hidden_size,
            other.n_layers,
        )

    @classmethod
    def zeros(cls, kind: str, hidden_size: int = 20, n_layers: int | None = None,
              input_size: int = 3) -> "SequenceModel":
        n_layers = _default_layers(kind, n_layers)
        total = param_layout(_KIND_CODES[kind], n_layers, hidden_size, input_size)[3]
        return cls(kind, input_size, hidden_size, n_layers, np.zeros(total))

    @classmethod
    def initialize(cls, kind: str, prng: Prng, hidden_size: int = 20,
                   n_layers: int | None = None, input_size: int = 3,
                   forget_bias: float = 1.0) -> "SequenceModel":
        """Uniform +-1/sqrt(fan_in) weights, zero biases, LSTM forget bias 1."""
        model = cls.zeros(kind, hidden_size, n_layers, input_size)
        p = np.zeros(model.n_params)
        h = hidden_size
        g = 4 if kind == "lstm" else 1
        layers, hw, hb, _ = model.layout
        for wx, wh, b, d in layers:
            scale = 1.0 / math.sqrt(d + h)
            p[wx:wh] = uniform_init(prng, g * h, d, scale).ravel()
            p[wh:b] = uniform_init(prng, g * h, h, scale).ravel()
            if kind == "lstm":
                p[b + h : b + 2 * h] = forget_bias
        p[hw:hb] = uniform_init(prng, 1, h, 1.0 / math.sqrt(h)).ravel()
        return model.with_params(p)


class Gradients(SequenceModel):
    """Gradient tree with the same shapes as the model it belongs to."""

    def global_norm(self) -> float:
        return float(np.sqrt(np.dot(self.params, self.params)))


def _default_layers(kind: str, n_layers: int | None) -> int:
    if kind not in _KIND_CODES:
        raise ValueError(f"unknown model kind {kind!r}")
    if n_layers is not None:
        return n_layers
    return 1 if kind == "rnn" else 2


@dataclass(frozen=True, eq=False)
class ForwardTape:
    """Every activation of one forward pass, as needed by BPTT."""

    kind: str
    input_size: int
    hidden_size: int
    n_layers: int
    lookback: int
    horizon: int
    preds: np.ndarray
    x0: np.ndarray
    hs: np.ndarray
    cs: np.ndarray
    acts: np.ndarray


def model_forward(w: InputWindow, m: SequenceModel, kernels=None):
    """Run the encoder-decoder unroll; returns ``(preds, tape)``."""
    if m.input_size != 3:
        raise ShapeError(f"model input size must be 3, got {m.input_size}")
    k = kernels or backend
    preds, x0, hs, cs, acts = k.forward(
        m.kind_code, m.n_layers, m.hidden_size, m.input_size, m.params, w.past, w.future
    )
    preds = np.asarray(preds)
    tape = ForwardTape(
        m.kind, m.input_size, m.hidden_size, m.n_layers, w.lookback, w.horizon,
        preds, x0, hs, cs, acts,
    )
    return preds, tape


def clip_by_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.sqrt(np.dot(grad, grad)))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def model_backward(tape: ForwardTape, dloss_dpreds, m: SequenceModel,
                   clip_norm: float | None = 5.0, kernels=None) -> Gradients:
    """Backpropagation through time for one window.

    ``dloss_dpreds`` is the loss gradient w.r.t. each horizon prediction.
    The result is clipped to global L2 norm ``clip_norm`` unless that is None.
    """
    if (tape.kind, tape.input_size, tape.hidden_size, tape.n_layers) != (
        m.kind, m.input_size, m.hidden_size, m.n_layers,
    ):
        raise ShapeError("forward tape was produced by a different model architecture")
    dp = np.ascontiguousarray(dloss_dpreds, dtype=np.float64)
    if dp.shape != (tape.horizon,):
        raise ShapeError(f"dloss_dpreds must have length {tape.horizon}, got {dp.shape}")
    k = kernels or backend
    grad = k.backward(
        m.kind_code, m.n_layers, m.hidden_size, m.input_size, m.params,
        tape.x0, tape.hs, tape.cs, tape.acts, tape.lookback, dp,
    )
    grad = np.asarray(grad)
    if clip_norm is not None:
        grad = clip_by_global_norm(grad, clip_norm)
    return Gradients(m.kind, m.input_size, m.hidden_size, m.n_layers, grad)


def _fd_loss(m: SequenceModel, params: np.ndarray, w: InputWindow, target: np.ndarray) -> float:
    preds = _pykernels.forward(
        m.kind_code, m.n_layers, m.hidden_size, m.input_size, params,
        w.past.astype(params.dtype), w.future.astype(params.dtype),
    )[0]
    return np.mean((preds - target.astype(params.dtype)) ** 2)


def gradient_check(m: SequenceModel, w: InputWindow, target, eps: float = 1e-6,
                   mutate: bool = False, kernels=None) -> float:
    """Max relative error between BPTT and central finite differences.

    The loss is the window MSE.  Finite-difference losses are evaluated by
    the numpy reference unroll in ``np.longdouble``; in plain float64 the
    rounding noise of the loss (~1e-11 after dividing by 2*eps) swamps
    gradients of order 1e-7.  ``mutate`` flips the sign of the largest
    analytic gradient component, which the check must detect.
    """
    if not 1e-8 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-8, 1e-4]")
    target = np.asarray(target, dtype=np.float64)
    preds, tape = model_forward(w, m, kernels)
    dpreds = 2.0 * (preds - target) / preds.shape[0]
    analytic = model_backward(tape, dpreds, m, clip_norm=None, kernels=kernels).params.copy()
    if mutate:
        j = int(np.argmax(np.abs(analytic)))
        analytic[j] = -analytic[j]
    base = m.params.astype(np.longdouble)
    step = np.longdouble(eps)
    worst = 0.0
    for j in range(base.shape[0]):
        p = base.copy()
        p[j] = base[j] + step
        plus = _fd_loss(m, p, w, target)
        p[j] = base[j] - step
        minus = _fd_loss(m, p, w, target)
        numeric = float((plus - minus) / (2 * step))
        a = analytic[j]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
        worst = max(worst, rel)
    return worst


def model_to_dict(m: SequenceModel, meta: dict | None = None) -> dict:
    layers = []
    for cell in m.layers:
        if m.kind == "rnn":
            layers.append({"w_x": cell.w_x.tolist(), "w_h": cell.w_h.tolist(), "b": cell.b.tolist()})
        else:
            layers.append(
                {
                    "w_x": {g: cell.w_x[g].tolist() for g in GATES},
                    "w_h": {g: cell.w_h[g].tolist() for g in GATES},
                    "b": {g: cell.b[g].tolist() for g in GATES},
                }
            )
    doc = {
        "format": MODEL_FORMAT,
        "version": 1,
        "kind": m.kind,
        "input_size": m.input_size,
        "hidden_size": m.hidden_size,
        "n_layers": m.n_layers,
        "layers": layers,
        "head_w": m.head_w.tolist(),
        "head_b": m.head_b.tolist(),
    }
    if meta is not None:
        doc["meta"] = meta
    return doc


def model_from_dict(doc: dict):
    """Inverse of :func:`model_to_dict`; returns ``(model, meta)``."""
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")
    model = SequenceModel.zeros(doc["kind"], doc["hidden_size"], doc["n_layers"], doc["input_size"])
    h = model.hidden_size
    p = np.zeros(model.n_params)
    layers, hw, hb, _ = model.layout
    if len(doc["layers"]) != len(layers):
        raise ValueError("layer count does not match n_layers")
    for (wx, wh, b, d), cell in zip(layers, doc["layers"]):
        if model.kind == "rnn":
            p[wx:wh] = np.asarray(cell["w_x"], dtype=np.float64).reshape(h * d)
            p[wh:b] = np.asarray(cell["w_h"], dtype=np.float64).reshape(h * h)
            p[b : b + h] = np.asarray(cell["b"], dtype=np.float64).reshape(h)
        else:
            p[wx:wh] = np.concatenate([np.asarray(cell["w_x"][g], dtype=np.float64).reshape(h * d) for g in GATES])
            p[wh:b] = np.concatenate([np.asarray(cell["w_h"][g], dtype=np.float64).reshape(h * h) for g in GATES])
            p[b : b + 4 * h] = np.concatenate([np.asarray(cell["b"][g], dtype=np.float64).reshape(h) for g in GATES])
    p[hw:hb] = np.asarray(doc["head_w"], dtype=np.float64).reshape(h)
    p[hb] = np.asarray(doc["head_b"], dtype=np.float64).reshape(1)[0]
    return model.with_params(p), doc.get("meta")


def save_model(path, m: SequenceModel, meta: dict | None = None) -> None:
    # json writes floats with repr, the shortest string that round-trips exactly
    text = json.dumps(model_to_dict(m, meta), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
