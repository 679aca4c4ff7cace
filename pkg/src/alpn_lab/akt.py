"""
AKT-lite: a compact attentive knowledge-tracing model.

Information flow: interaction embeddings (exercise + response) are encoded by
one causal self-attention block with a feed-forward sublayer; a
cross-attention retriever then lets a queried exercise pull the relevant
part of that encoded history; a small head turns the retrieved knowledge and
the exercise embedding into a correctness logit.

A learnable start token is always the first history row, so an empty log
still yields a defined prior state.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from .exceptions import CheckpointError, ConfigurationError, TrainingDivergedError
from .knowledge import InteractionLog, KnowledgeState
from .nn import (
    DTYPE,
    Adam,
    AdamHyper,
    Dense,
    ParamTensor,
    RngStream,
    assign_tensors,
    attention,
    attention_backward,
    bce_with_logits,
    causal_mask,
    checkpoint_int,
    glorot_uniform,
    load_checkpoint,
    save_checkpoint,
    sigmoid,
)

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 128


@dataclass(frozen=True)
class AktTrainHyper:
    lr: float = 1e-2
    epochs: int = 200
    batch: int = 32


@dataclass
class _Encoded:
    """Everything the backward pass needs from one history encoding."""
    exercises: np.ndarray
    responses: np.ndarray
    x: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    self_attn: object
    h: np.ndarray
    ffn1: object
    ffn2: object
    h2: np.ndarray


class AktLiteModel:
    """
    Attentive knowledge-tracing model over a catalog of ``J`` exercises.

    Args:
        J: Number of exercises.
        d: Embedding width.
        rng: Stream used for parameter initialization.
        window: Number of most recent interactions consumed per estimate.
    """

    def __init__(self, J: int, d: int, rng: RngStream, window: int = DEFAULT_WINDOW):
        if J < 1 or d < 1:
            raise ConfigurationError(f"AKT-lite needs J >= 1 and d >= 1, got J={J}, d={d}")
        if window < 1:
            raise ConfigurationError(f"History window must be >= 1, got {window}")
        self.J = J
        self.d = d
        self.window = window
        self.scale = 1.0 / np.sqrt(d)

        self.exercise_embeddings = ParamTensor('embed.exercise', glorot_uniform(rng, J, d))
        self.response_embeddings = ParamTensor('embed.response', glorot_uniform(rng, 2, d))
        self.start_token = ParamTensor('embed.start', glorot_uniform(rng, 1, d))

        self.enc_query = ParamTensor('encoder.query', glorot_uniform(rng, d, d))
        self.enc_key = ParamTensor('encoder.key', glorot_uniform(rng, d, d))
        self.enc_value = ParamTensor('encoder.value', glorot_uniform(rng, d, d))
        self.ffn1 = Dense('encoder.ffn1', d, d, rng, activation='tanh')
        self.ffn2 = Dense('encoder.ffn2', d, d, rng)

        self.ret_query = ParamTensor('retriever.query', glorot_uniform(rng, d, d))
        self.ret_key = ParamTensor('retriever.key', glorot_uniform(rng, d, d))
        self.ret_value = ParamTensor('retriever.value', glorot_uniform(rng, d, d))

        self.head_hidden = Dense('head.hidden', 2 * d, d, rng, activation='tanh')
        self.head_out = Dense('head.out', d, 1, rng)

    def parameters(self) -> list[ParamTensor]:
        return [
            self.exercise_embeddings, self.response_embeddings, self.start_token,
            self.enc_query, self.enc_key, self.enc_value,
            *self.ffn1.parameters(), *self.ffn2.parameters(),
            self.ret_query, self.ret_key, self.ret_value,
            *self.head_hidden.parameters(), *self.head_out.parameters(),
        ]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # -- forward -----------------------------------------------------------

    def _encode(self, exercises: np.ndarray, responses: np.ndarray) -> _Encoded:
        x = np.vstack([
            self.start_token.values,
            self.exercise_embeddings.values[exercises] + self.response_embeddings.values[responses],
        ])
        q = x @ self.enc_query.values
        k = x @ self.enc_key.values
        v = x @ self.enc_value.values
        attended, self_attn = attention(q, k, v, self.scale, causal=True)
        h = x + attended
        f1, ffn1 = self.ffn1.forward(h)
        f2, ffn2 = self.ffn2.forward(f1)
        return _Encoded(exercises, responses, x, q, k, v, self_attn, h, ffn1, ffn2, h + f2)

    def _retrieve(self, enc: _Encoded, query_ids: np.ndarray, mask: Optional[np.ndarray]):
        eq = self.exercise_embeddings.values[query_ids]
        qr = eq @ self.ret_query.values
        kr = enc.h2 @ self.ret_key.values
        vr = enc.h2 @ self.ret_value.values
        retrieved, ret_attn = attention(qr, kr, vr, self.scale, mask=mask)
        z = np.hstack([retrieved, eq])
        hidden, head_hidden = self.head_hidden.forward(z)
        logits, head_out = self.head_out.forward(hidden)
        cache = (query_ids, eq, ret_attn, head_hidden, head_out)
        return logits[:, 0], cache

    def _backward(self, enc: _Encoded, cache, grad_logits: np.ndarray) -> None:
        query_ids, eq, ret_attn, head_hidden, head_out = cache
        d = self.d

        grad_hidden = self.head_out.backward(head_out, grad_logits[:, None])
        grad_z = self.head_hidden.backward(head_hidden, grad_hidden)
        grad_retrieved, grad_eq = grad_z[:, :d], grad_z[:, d:].copy()

        grad_qr, grad_kr, grad_vr = attention_backward(ret_attn, grad_retrieved)
        self.ret_query.grad += eq.T @ grad_qr
        grad_eq += grad_qr @ self.ret_query.values.T
        self.ret_key.grad += enc.h2.T @ grad_kr
        self.ret_value.grad += enc.h2.T @ grad_vr
        grad_h2 = grad_kr @ self.ret_key.values.T + grad_vr @ self.ret_value.values.T
        np.add.at(self.exercise_embeddings.grad, query_ids, grad_eq)

        grad_f1 = self.ffn2.backward(enc.ffn2, grad_h2)
        grad_h = grad_h2 + self.ffn1.backward(enc.ffn1, grad_f1)

        grad_q, grad_k, grad_v = attention_backward(enc.self_attn, grad_h)
        self.enc_query.grad += enc.x.T @ grad_q
        self.enc_key.grad += enc.x.T @ grad_k
        self.enc_value.grad += enc.x.T @ grad_v
        grad_x = (
            grad_h
            + grad_q @ self.enc_query.values.T
            + grad_k @ self.enc_key.values.T
            + grad_v @ self.enc_value.values.T
        )

        self.start_token.grad += grad_x[:1]
        np.add.at(self.exercise_embeddings.grad, enc.exercises, grad_x[1:])
        np.add.at(self.response_embeddings.grad, enc.responses, grad_x[1:])

    def _history(self, log: InteractionLog) -> tuple[np.ndarray, np.ndarray]:
        exercises = log.exercises()[-self.window:]
        responses = log.responses()[-self.window:]
        if exercises.size and (exercises.max() >= self.J or exercises.min() < 0):
            raise ConfigurationError(f"Log references exercises outside 0..{self.J - 1}")
        return exercises, responses

    def predict_logits(self, log: InteractionLog) -> np.ndarray:
        """Correctness logits for every exercise given the (windowed) history."""
        exercises, responses = self._history(log)
        enc = self._encode(exercises, responses)
        logits, _ = self._retrieve(enc, np.arange(self.J), mask=None)
        return logits

    def predict_state(self, log: InteractionLog) -> KnowledgeState:
        return predict_state(self, log)

    def predict_next(self, log: InteractionLog) -> np.ndarray:
        """
        Probability of a correct answer at each position ``t`` of ``log`` given
        only the entries before ``t``.
        """
        probs = [sigmoid(logits) for logits, _, _, _ in self._sequence_chunks(log)]
        return np.concatenate(probs) if probs else np.zeros(0, dtype=DTYPE)

    def _sequence_chunks(self, log: InteractionLog):
        """
        Causal predictions over consecutive, non-overlapping chunks of
        ``window`` entries. Each chunk starts from the start token alone, so a
        position past the first chunk sees only its own chunk's prefix, while
        ``predict_logits`` slides over the last ``window`` entries. The two
        agree for logs no longer than ``window``.
        """
        exercises, responses = log.exercises(), log.responses()
        for start in range(0, len(exercises), self.window):
            ex = exercises[start:start + self.window]
            resp = responses[start:start + self.window]
            enc = self._encode(ex, resp)
            mask = causal_mask(len(ex), len(ex) + 1)
            logits, cache = self._retrieve(enc, ex, mask)
            yield logits, resp, enc, cache

    # -- training ----------------------------------------------------------

    def loss_and_backward(self, logs: Sequence[InteractionLog], backward: bool = True) -> float:
        """
        Mean binary cross-entropy of next-response prediction over every
        position of every log; accumulates gradients when ``backward``.
        """
        total = sum(len(log) for log in logs)
        if total == 0:
            raise ConfigurationError("Cannot compute a loss over empty logs")
        loss_sum = 0.0
        for log in logs:
            for logits, responses, enc, cache in self._sequence_chunks(log):
                loss, grad = bce_with_logits(logits, responses.astype(DTYPE))
                n = logits.size
                loss_sum += loss * n
                if backward:
                    self._backward(enc, cache, grad * n / total)
        return loss_sum / total

    # -- persistence ---------------------------------------------------------

    def to_tensors(self) -> dict[str, np.ndarray]:
        return {p.name: p.values for p in self.parameters()}

    def save(self, path: Union[str, Path], meta: Optional[dict] = None) -> Path:
        header = {'kind': 'akt_lite', 'J': self.J, 'd': self.d, 'window': self.window}
        header.update(meta or {})
        return save_checkpoint(path, self.to_tensors(), header)

    @classmethod
    def load(cls, path: Union[str, Path]) -> tuple['AktLiteModel', dict]:
        tensors, meta = load_checkpoint(path)
        if meta.get('kind') != 'akt_lite':
            raise CheckpointError(f"{path} holds a '{meta.get('kind')}' checkpoint, not akt_lite")
        model = cls(checkpoint_int(meta, 'J', path), checkpoint_int(meta, 'd', path), RngStream(0),
                    window=checkpoint_int(meta, 'window', path))
        assign_tensors(model.parameters(), tensors)
        return model, meta


def predict_state(model: AktLiteModel, log: InteractionLog) -> KnowledgeState:
    """
    Knowledge state after ``log``: ``s_j = sigmoid(logit_j)`` for every
    exercise, clamped into (0, 1) by ``KnowledgeState``.
    """
    return KnowledgeState(sigmoid(model.predict_logits(log)))


def train_akt(model: AktLiteModel, logs: Sequence[InteractionLog], hyper: AktTrainHyper,
              rng: RngStream, progress: bool = False) -> tuple[AktLiteModel, list[float]]:
    """
    Fit ``model`` on ``logs`` by minimizing next-response cross-entropy.

    Returns:
        The trained model (updated in place) and the loss curve: entry 0 is
        the loss before training, entry ``e`` the full-data loss after epoch
        ``e``.

    Raises:
        ConfigurationError: If ``logs`` is empty or contains an empty log.
        TrainingDivergedError: If the loss turns non-finite or ends above its
            starting value.
    """
    logs = list(logs)
    if not logs:
        raise ConfigurationError("train_akt needs at least one interaction log")
    if any(len(log) == 0 for log in logs):
        raise ConfigurationError("Every training log must have at least one entry")
    if hyper.batch < 1 or hyper.epochs < 0:
        raise ConfigurationError(f"Invalid AKT training hyperparameters: {hyper}")

    optimizer = Adam(model.parameters(), AdamHyper(lr=hyper.lr))
    losses = [model.loss_and_backward(logs, backward=False)]
    logger.info("AKT-lite initial loss %.6f over %d logs", losses[0], len(logs))

    epochs = tqdm(range(hyper.epochs), desc="Training AKT-lite", ncols=80, disable=not progress)
    for epoch in epochs:
        order = rng.permutation(len(logs))
        for start in range(0, len(logs), hyper.batch):
            batch = [logs[i] for i in order[start:start + hyper.batch]]
            optimizer.zero_grad()
            model.loss_and_backward(batch)
            optimizer.step()
        loss = model.loss_and_backward(logs, backward=False)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"AKT-lite loss became non-finite at epoch {epoch + 1}",
                                        diagnostics={'losses': losses})
        losses.append(loss)
        epochs.set_postfix(loss=f"{loss:.4f}")
    if losses[-1] > losses[0]:
        raise TrainingDivergedError(
            f"AKT-lite loss rose from {losses[0]:.6f} to {losses[-1]:.6f} over {hyper.epochs} epochs",
            diagnostics={'losses': losses})
    logger.info("AKT-lite final loss %.6f after %d epochs", losses[-1], hyper.epochs)
    return model, losses


def next_response_accuracy(model: AktLiteModel, logs: Sequence[InteractionLog]) -> tuple[float, float]:
    """
    Held-out accuracy of thresholded next-response predictions, alongside
    the accuracy of always predicting the majority class.
    """
    predictions, targets = [], []
    for log in logs:
        if len(log) == 0:
            continue
        predictions.append(model.predict_next(log) >= 0.5)
        targets.append(log.responses().astype(bool))
    if not targets:
        raise ConfigurationError("No interactions to evaluate")
    predictions = np.concatenate(predictions)
    targets = np.concatenate(targets)
    accuracy = float(np.mean(predictions == targets))
    majority = float(max(targets.mean(), 1.0 - targets.mean()))
    return accuracy, majority
