"""Single-layer tanh recurrent network with a sigmoid read-out of the last state."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, EmptySequence, EmptyTrainingSet

PARAM_NAMES = ("W_xh", "W_hh", "b_h", "W_hy", "b_y")
CLIP_NORM = 5.0


@dataclass(frozen=True)
class Rnn:
    W_xh: np.ndarray
    W_hh: np.ndarray
    b_h: np.ndarray
    W_hy: np.ndarray
    b_y: np.ndarray
    epochs: int = 0
    lr: float = 0.0
    seed: int = 42
    history: tuple = field(default=(), compare=False)

    @property
    def hidden(self) -> int:
        return self.W_hh.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.W_xh.shape[1]

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def with_params(self, params: dict) -> "Rnn":
        return Rnn(**{k: np.asarray(params[k], dtype=np.float64) for k in PARAM_NAMES},
                   epochs=self.epochs, lr=self.lr, seed=self.seed)

    def hyperparameters(self) -> dict:
        return {"hidden": self.hidden, "epochs": self.epochs, "lr": self.lr}

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.params().items()}

    @classmethod
    def from_dict(cls, d: dict, hyper: dict, seed: int) -> "Rnn":
        p = {k: np.asarray(d[k], dtype=np.float64) for k in PARAM_NAMES}
        return cls(**p, epochs=int(hyper["epochs"]), lr=float(hyper["lr"]), seed=int(seed))


def init_rnn(n_inputs: int, hidden: int = 32, seed: int = 42) -> Rnn:
    """Weights uniform in +-1/sqrt(hidden); biases zero."""
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(hidden)
    return Rnn(rng.uniform(-s, s, (hidden, n_inputs)), rng.uniform(-s, s, (hidden, hidden)),
               np.zeros(hidden), rng.uniform(-s, s, (1, hidden)), np.zeros(1), seed=seed)


def pad_sequences(sequences, n_inputs: int | None = None):
    """Stack ragged ``(T_i, d)`` sequences into ``(B, T_max, d)`` plus a ``(B, T_max)`` mask."""
    seqs = [np.atleast_2d(np.asarray(s, dtype=np.float64)) for s in sequences]
    if not seqs:
        raise EmptyTrainingSet("no sequences")
    d = seqs[0].shape[1] if n_inputs is None else n_inputs
    for s in seqs:
        if s.shape[0] == 0 or s.size == 0:
            raise EmptySequence("sequence with no time steps")
        if s.shape[1] != d:
            raise DimensionMismatch(f"expected {d} inputs per step, got {s.shape[1]}")
    T = max(s.shape[0] for s in seqs)
    x = np.zeros((len(seqs), T, d))
    mask = np.zeros((len(seqs), T))
    for i, s in enumerate(seqs):
        x[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return x, mask


def _forward(model: Rnn, x: np.ndarray, mask: np.ndarray):
    B, T, _ = x.shape
    hs = np.zeros((T + 1, B, model.hidden))
    cand = np.zeros((T, B, model.hidden))
    inp = x @ model.W_xh.T + model.b_h
    for t in range(T):
        cand[t] = np.tanh(inp[:, t] + hs[t] @ model.W_hh.T)
        m = mask[:, t, None]
        hs[t + 1] = m * cand[t] + (1.0 - m) * hs[t]
    z = hs[T] @ model.W_hy[0] + model.b_y[0]
    return z, hs, cand


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def bce_loss(z: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy from logits, computed stably."""
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def loss_and_gradients(model: Rnn, x: np.ndarray, mask: np.ndarray, y: np.ndarray):
    """Mean BCE over the batch and its exact BPTT gradient for every parameter."""
    B, T, _ = x.shape
    z, hs, cand = _forward(model, x, mask)
    loss = bce_loss(z, y)
    dz = (_sigmoid(z) - y) / B
    g = {
        "W_hy": (dz @ hs[T])[None, :],
        "b_y": np.array([dz.sum()]),
        "W_xh": np.zeros_like(model.W_xh),
        "W_hh": np.zeros_like(model.W_hh),
        "b_h": np.zeros_like(model.b_h),
    }
    dh = dz[:, None] * model.W_hy[0][None, :]
    for t in range(T - 1, -1, -1):
        m = mask[:, t, None]
        da = m * dh * (1.0 - cand[t] ** 2)
        g["W_xh"] += da.T @ x[:, t]
        g["W_hh"] += da.T @ hs[t]
        g["b_h"] += da.sum(axis=0)
        dh = (1.0 - m) * dh + da @ model.W_hh
    return loss, g


def clip_gradients(grads: dict, max_norm: float = CLIP_NORM) -> dict:
    norm = np.sqrt(sum(float(np.sum(v * v)) for v in grads.values()))
    if norm <= max_norm:
        return grads
    return {k: v * (max_norm / norm) for k, v in grads.items()}


def train_rnn(sequences, labels, hidden: int = 32, epochs: int = 60, lr: float = 0.1,
              seed: int = 42) -> Rnn:
    """Full-batch gradient descent with BPTT and global-norm clipping at 5."""
    x, mask = pad_sequences(sequences)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} sequences but {y.shape[0]} labels")
    model = init_rnn(x.shape[2], hidden, seed)
    params = model.params()
    history = []
    for _ in range(epochs):
        loss, grads = loss_and_gradients(model, x, mask, y)
        history.append(loss)
        grads = clip_gradients(grads)
        params = {k: params[k] - lr * grads[k] for k in PARAM_NAMES}
        model = model.with_params(params)
    return Rnn(**model.params(), epochs=epochs, lr=lr, seed=seed, history=tuple(history))


def rnn_proba(model: Rnn, sequences) -> np.ndarray:
    x, mask = pad_sequences(sequences, model.n_inputs)
    z, _, _ = _forward(model, x, mask)
    return _sigmoid(z)


def rnn_predict(model: Rnn, sequence):
    """``(label, probability)``; label is 1 (HFC) iff probability >= 0.5."""
    p = float(rnn_proba(model, [sequence])[0])
    return int(p >= 0.5), p
