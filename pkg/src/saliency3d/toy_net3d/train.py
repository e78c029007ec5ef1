"""Plain SGD training with the step learning-rate schedule.

Defaults follow the classification recipe this harness mirrors: initial
learning rate 0.001, multiplied by 0.1 every 50 epochs, stochastic gradient
descent on cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergedError
from . import model as M


@dataclass
class Hyperparams:
    lr: float = 0.001
    decay_every: int = 50
    decay_factor: float = 0.1
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)


def learning_rate(epoch: int, hp: Hyperparams) -> float:
    """Step schedule: lr * decay_factor ** (epoch // decay_every)."""
    return hp.lr * hp.decay_factor ** (epoch // hp.decay_every)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and the logits gradient (softmax minus one-hot)."""
    B = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    logz = np.log(expv.sum(axis=1))
    loss = float(np.mean(logz - shifted[np.arange(B), labels]))
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1
    return loss, (dlogits / B).astype(logits.dtype)


def _sgd_step(model: M.Model, param_grads, gate_grads, lr: float):
    for p, g in zip(model.params, param_grads):
        for key in p:
            p[key] -= (lr * g[key]).astype(p[key].dtype)
    for name, head_g in (gate_grads or {}).items():
        head = model.gate_heads[name]
        for key in head:
            head[key] -= (lr * head_g[key]).astype(head[key].dtype)


def train(model: M.Model, data, hp: Hyperparams,
          gates: M.GateConfig | None = None) -> TrainResult:
    """SGD over the dataset's clips/labels; updates the model in place.

    With a GateConfig the gate heads are trained jointly with the backbone
    (heads are attached on first use). Raises TrainingDivergedError if the
    loss goes non-finite.
    """
    clips, labels = data.clips, data.labels
    if gates is not None and any(n not in model.gate_heads for n in gates.gate_layers):
        M.attach_gates(model, gates, clips.shape[2:], seed=hp.seed)
    rng = np.random.default_rng(hp.seed)
    result = TrainResult()
    n = len(labels)
    for epoch in range(hp.epochs):
        lr = learning_rate(epoch, hp)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hp.batch_size):
            idx = order[start : start + hp.batch_size]
            batch = clips[idx]
            y = labels[idx]
            if gates is None:
                logits, tape = M.forward(model, batch)
                loss, dlogits = cross_entropy(logits, y)
                _, param_grads, _ = M.backward(model, tape, dlogits)
                gate_grads = None
            else:
                logits, tape = M._gated_forward_tape(model, batch, gates)
                loss, dlogits = cross_entropy(logits, y)
                _, param_grads, gate_grads = M.gated_backward(model, tape, gates, dlogits)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss {loss} at epoch {epoch}")
            _sgd_step(model, param_grads, gate_grads, lr)
            epoch_loss += loss * len(idx)
        result.losses.append(epoch_loss / n)
        result.lrs.append(lr)
    return result


def evaluate_accuracy(model: M.Model, clips: np.ndarray, labels: np.ndarray,
                      gates: M.GateConfig | None = None,
                      batch_size: int = 32) -> float:
    """Fraction of clips whose argmax logit matches the label."""
    correct = 0
    for start in range(0, len(labels), batch_size):
        batch = clips[start : start + batch_size]
        if gates is None:
            logits, _ = M.forward(model, batch)
        else:
            logits = M.gated_forward(model, batch, gates)
        correct += int((logits.argmax(axis=1) == labels[start : start + batch_size]).sum())
    return correct / len(labels)


def predict(model: M.Model, clips: np.ndarray,
            gates: M.GateConfig | None = None,
            batch_size: int = 32) -> np.ndarray:
    """Argmax class per clip."""
    preds = []
    for start in range(0, len(clips), batch_size):
        batch = clips[start : start + batch_size]
        if gates is None:
            logits, _ = M.forward(model, batch)
        else:
            logits = M.gated_forward(model, batch, gates)
        preds.append(logits.argmax(axis=1))
    return np.concatenate(preds)
