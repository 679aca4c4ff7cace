"""
Minimal numerical substrate shared by the knowledge-tracing model and the agent.

Reverse-mode gradients are written out by hand for a small, fixed set of
operations: dense layers (identity/tanh/relu), softmax, scaled dot-product
attention, binary cross-entropy and squared error. Each forward function
returns ``(output, cache)`` and the matching backward function consumes the
cache, so a shared model can serve concurrent forward passes without any
per-call state on the model itself.

All arithmetic is float64.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .exceptions import CheckpointError, ConfigurationError, NonFiniteGradientError

logger = logging.getLogger(__name__)

DTYPE = np.float64

ACTIVATIONS = ('identity', 'tanh', 'relu')

CHECKPOINT_MAGIC = b'ALPN-PARAMS\n'
CHECKPOINT_VERSION = 1

_SEED_MASK = (1 << 64) - 1


@dataclass
class ParamTensor:
    """A named parameter with its gradient accumulator."""
    name: str
    values: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=DTYPE)
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        if self.grad.shape != self.values.shape:
            raise ConfigurationError(f"Gradient shape {self.grad.shape} != value shape {self.values.shape} for {self.name}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.grad)))


class RngStream:
    """
    Seeded random stream keyed by ``(seed, stream_id)`` plus optional sub-keys.

    Identical keys yield identical draw sequences, independent of how many
    other streams exist, which is what lets episodes run in any order.
    """

    def __init__(self, seed: int, stream_id: int = 0, *keys: int):
        self.seed = int(seed) & _SEED_MASK
        self.stream_id = int(stream_id)
        self.keys = tuple(int(k) for k in keys)
        sequence = np.random.SeedSequence([self.seed, self.stream_id, *self.keys])
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, keys={self.keys})"

    def substream(self, *keys: int) -> 'RngStream':
        return RngStream(self.seed, self.stream_id, *self.keys, *keys)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low: int, high: Optional[int] = None, size=None):
        return self.generator.integers(low, high, size)

    def bernoulli(self, p: float) -> int:
        return int(self.generator.random() < p)

    def categorical(self, probs: np.ndarray) -> int:
        # Inverse-CDF on one uniform draw keeps the consumption at one draw per sample.
        cdf = np.cumsum(probs)
        u = self.generator.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side='right'), len(probs) - 1))

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)


def glorot_uniform(rng: RngStream, fan_in: int, fan_out: int, shape: Optional[tuple] = None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out)).astype(DTYPE)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=DTYPE)))


# ---------------------------------------------------------------------------
# Dense layers
# ---------------------------------------------------------------------------

@dataclass
class DenseCache:
    inputs: np.ndarray
    output: np.ndarray
    activation: str
    weights: ParamTensor
    bias: ParamTensor
    squeeze: bool


def dense_forward(inputs: np.ndarray, weights: ParamTensor, bias: ParamTensor,
                  activation: str = 'identity') -> tuple[np.ndarray, DenseCache]:
    """
    Affine map ``inputs @ W + b`` followed by ``activation``.

    Accepts a single vector or a batch of row vectors.

    Raises:
        ConfigurationError: On shape mismatch or unknown activation.
    """
    if activation not in ACTIVATIONS:
        raise ConfigurationError(f"Unknown activation '{activation}', expected one of {ACTIVATIONS}")
    x = np.asarray(inputs, dtype=DTYPE)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if weights.values.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ConfigurationError(
            f"Dense '{weights.name}': input width {x.shape[-1]} does not match weights {weights.shape}"
        )
    if bias.shape != (weights.shape[1],):
        raise ConfigurationError(f"Dense '{bias.name}': bias shape {bias.shape} does not match weights {weights.shape}")

    out = x @ weights.values + bias.values
    if activation == 'tanh':
        out = np.tanh(out)
    elif activation == 'relu':
        out = np.maximum(out, 0.0)

    cache = DenseCache(x, out, activation, weights, bias, squeeze)
    return (out[0] if squeeze else out), cache


def dense_backward(cache: DenseCache, grad_output: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients and return the gradient w.r.t. the inputs."""
    g = np.asarray(grad_output, dtype=DTYPE)
    if cache.squeeze:
        g = g[None, :]
    if cache.activation == 'tanh':
        g = g * (1.0 - cache.output ** 2)
    elif cache.activation == 'relu':
        g = g * (cache.output > 0.0)

    cache.weights.grad += cache.inputs.T @ g
    cache.bias.grad += g.sum(axis=0)
    grad_inputs = g @ cache.weights.values.T
    return grad_inputs[0] if cache.squeeze else grad_inputs


class Dense:
    """A dense layer owning its weight and bias tensors."""

    def __init__(self, name: str, fan_in: int, fan_out: int, rng: RngStream, activation: str = 'identity'):
        if activation not in ACTIVATIONS:
            raise ConfigurationError(f"Unknown activation '{activation}'")
        self.activation = activation
        self.weights = ParamTensor(f"{name}.weight", glorot_uniform(rng, fan_in, fan_out))
        self.bias = ParamTensor(f"{name}.bias", np.zeros(fan_out, dtype=DTYPE))

    def forward(self, inputs: np.ndarray) -> tuple[np.ndarray, DenseCache]:
        return dense_forward(inputs, self.weights, self.bias, self.activation)

    @staticmethod
    def backward(cache: DenseCache, grad_output: np.ndarray) -> np.ndarray:
        return dense_backward(cache, grad_output)

    def parameters(self) -> list[ParamTensor]:
        return [self.weights, self.bias]


# ---------------------------------------------------------------------------
# Softmax and losses
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax (max-subtraction) along ``axis``."""
    z = np.asarray(logits, dtype=DTYPE)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=DTYPE)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax_backward(probs: np.ndarray, grad_probs: np.ndarray, axis: int = -1) -> np.ndarray:
    """Vector-Jacobian product of softmax: ``p * (g - <g, p>)``."""
    return probs * (grad_probs - np.sum(grad_probs * probs, axis=axis, keepdims=True))


def entropy(probs: np.ndarray, axis: int = -1) -> np.ndarray:
    p = np.asarray(probs, dtype=DTYPE)
    logp = np.log(np.where(p > 0.0, p, 1.0))
    return -np.sum(p * logp, axis=axis)


def entropy_logits_backward(probs: np.ndarray, grad_entropy: np.ndarray) -> np.ndarray:
    """Gradient of ``H(softmax(z))`` w.r.t. the logits: ``-p (log p + H)``."""
    p = np.asarray(probs, dtype=DTYPE)
    logp = np.log(np.where(p > 0.0, p, 1.0))
    h = -np.sum(p * logp, axis=-1, keepdims=True)
    return -p * (logp + h) * np.asarray(grad_entropy, dtype=DTYPE)[..., None]


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """
    Mean binary cross-entropy on raw logits.

    Returns:
        (loss, gradient w.r.t. the logits).
    """
    z = np.asarray(logits, dtype=DTYPE)
    y = np.asarray(targets, dtype=DTYPE)
    if z.shape != y.shape:
        raise ConfigurationError(f"Logit shape {z.shape} != target shape {y.shape}")
    n = max(z.size, 1)
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = (sigmoid(z) - y) / n
    return float(np.sum(losses) / n), grad


def squared_error(predictions: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. the predictions."""
    diff = np.asarray(predictions, dtype=DTYPE) - np.asarray(targets, dtype=DTYPE)
    n = max(diff.size, 1)
    return float(np.sum(diff ** 2) / n), 2.0 * diff / n


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------

@dataclass
class AttentionCache:
    queries: np.ndarray
    keys: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    scale: float


def causal_mask(n_queries: int, n_keys: int, offset: int = 0) -> np.ndarray:
    """Allowed-position mask where query ``t`` sees keys ``0..t+offset``."""
    rows = np.arange(n_queries)[:, None]
    cols = np.arange(n_keys)[None, :]
    return cols <= rows + offset


def attention(queries: np.ndarray, keys: np.ndarray, values: np.ndarray, scale: float,
              causal: bool = False, mask: Optional[np.ndarray] = None) -> tuple[np.ndarray, AttentionCache]:
    """
    Scaled dot-product attention ``softmax(Q K^T * scale) V``.

    ``mask`` is a boolean (queries x keys) array of allowed positions; with
    ``causal=True`` query row ``t`` only sees key rows ``<= t``.

    Raises:
        ConfigurationError: On non-conforming shapes or a fully masked row.
    """
    q = np.asarray(queries, dtype=DTYPE)
    k = np.asarray(keys, dtype=DTYPE)
    v = np.asarray(values, dtype=DTYPE)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ConfigurationError("attention expects 2-D queries, keys and values")
    if q.shape[1] != k.shape[1]:
        raise ConfigurationError(f"Query width {q.shape[1]} != key width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ConfigurationError(f"{k.shape[0]} keys but {v.shape[0]} values")

    allowed = None
    if causal:
        allowed = causal_mask(q.shape[0], k.shape[0])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (q.shape[0], k.shape[0]):
            raise ConfigurationError(f"Mask shape {mask.shape} != {(q.shape[0], k.shape[0])}")
        allowed = mask if allowed is None else (allowed & mask)
    if allowed is not None and not np.all(allowed.any(axis=1)):
        raise ConfigurationError("Every query row needs at least one visible key")

    scores = (q @ k.T) * scale
    if allowed is not None:
        scores = np.where(allowed, scores, -np.inf)
    weights = softmax(scores, axis=-1)
    out = weights @ v
    return out, AttentionCache(q, k, v, weights, scale)


def attention_backward(cache: AttentionCache, grad_output: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return gradients w.r.t. (queries, keys, values)."""
    g = np.asarray(grad_output, dtype=DTYPE)
    grad_values = cache.weights.T @ g
    grad_weights = g @ cache.values.T
    grad_scores = softmax_backward(cache.weights, grad_weights) * cache.scale
    grad_queries = grad_scores @ cache.keys
    grad_keys = grad_scores.T @ cache.queries
    return grad_queries, grad_keys, grad_values


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamHyper:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8


def adam_step(params: Iterable[ParamTensor], moments: dict[str, tuple[np.ndarray, np.ndarray]],
              hyper: AdamHyper, step_index: int) -> None:
    """
    Apply one bias-corrected Adam update in place, then zero the gradients.

    ``moments`` maps tensor names to their (m, v) arrays and is updated in
    place; missing entries start at zero.

    Raises:
        NonFiniteGradientError: If any gradient is NaN/inf. No tensor is
            modified in that case.
    """
    if step_index < 1:
        raise ConfigurationError(f"Adam step_index must be >= 1, got {step_index}")
    params = list(params)
    bad = [p.name for p in params if not np.all(np.isfinite(p.grad))]
    if bad:
        logger.error("Non-finite gradients in %s; update skipped", ', '.join(bad))
        raise NonFiniteGradientError(f"Non-finite gradient in {len(bad)} tensor(s): {', '.join(bad)}", bad)

    correction1 = 1.0 - hyper.beta1 ** step_index
    correction2 = 1.0 - hyper.beta2 ** step_index
    for p in params:
        m, v = moments.get(p.name) or (np.zeros_like(p.values), np.zeros_like(p.values))
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * p.grad
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * p.grad ** 2
        moments[p.name] = (m, v)
        m_hat = m / correction1
        v_hat = v / correction2
        p.values -= hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps_adam)
        p.zero_grad()


class Adam:
    """Stateful wrapper around ``adam_step`` for one exclusively owned parameter set."""

    def __init__(self, params: Iterable[ParamTensor], hyper: AdamHyper = AdamHyper()):
        self.params = list(params)
        self.hyper = hyper
        self.step_index = 0
        self.moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.moments, self.hyper, self.step_index + 1)
        self.step_index += 1

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, (m, v) in self.moments.items():
            out[f"adam.m.{name}"] = m
            out[f"adam.v.{name}"] = v
        return out

    def load_state(self, tensors: dict[str, np.ndarray], step_index: int) -> None:
        self.step_index = int(step_index)
        self.moments = {}
        for p in self.params:
            m = tensors.get(f"adam.m.{p.name}")
            v = tensors.get(f"adam.v.{p.name}")
            if m is not None and v is not None:
                self.moments[p.name] = (np.array(m, dtype=DTYPE), np.array(v, dtype=DTYPE))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: Union[str, Path], tensors: dict[str, np.ndarray], meta: Optional[dict] = None) -> Path:
    """
    Write tensors and metadata.

    Layout: ``ALPN-PARAMS`` magic line, ``version <n>`` line, one JSON header
    line ``{"meta": ..., "tensors": [{"name", "shape"}, ...]}``, then every
    tensor's values as little-endian float64 in header order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(tensors)
    header = {
        'meta': meta or {},
        'tensors': [{'name': n, 'shape': list(np.shape(tensors[n]))} for n in names],
    }
    tmp = path.with_suffix(path.suffix + '.tmp')
    with open(tmp, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(f"version {CHECKPOINT_VERSION}\n".encode())
        f.write(json.dumps(header, sort_keys=True).encode() + b'\n')
        for n in names:
            f.write(np.ascontiguousarray(tensors[n], dtype='<f8').tobytes())
    tmp.replace(path)
    return path


def load_checkpoint(path: Union[str, Path]) -> tuple[dict[str, np.ndarray], dict]:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        CheckpointError: If the file is missing, of another format or version,
            or its header or payload is malformed.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    with open(path, 'rb') as f:
        if f.readline() != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not an ALPN parameter checkpoint")
        version_line = f.readline().decode(errors='replace').split()
        if len(version_line) != 2 or version_line[0] != 'version' or version_line[1] != str(CHECKPOINT_VERSION):
            raise CheckpointError(f"{path}: unsupported checkpoint version {version_line}")
        try:
            header = json.loads(f.readline())
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise CheckpointError(f"{path}: corrupt header: {e}")
        payload = f.read()

    try:
        entries = [(str(entry['name']), tuple(int(n) for n in entry['shape'])) for entry in header['tensors']]
        meta = header.get('meta', {})
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise CheckpointError(f"{path}: header lacks a valid tensor table ({type(e).__name__}: {e})")
    if not isinstance(meta, dict):
        raise CheckpointError(f"{path}: header meta must be an object")

    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in entries:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * struct.calcsize('<d')
        if count < 0 or offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: truncated payload at tensor {name}")
        tensors[name] = np.frombuffer(payload, dtype='<f8', count=count, offset=offset).astype(DTYPE).reshape(shape)
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - offset} trailing bytes")
    return tensors, meta


def checkpoint_int(meta: dict, key: str, path: Union[str, Path]) -> int:
    """Integer header field ``key``, or ``CheckpointError`` naming the file."""
    try:
        return int(meta[key])
    except (KeyError, TypeError, ValueError):
        raise CheckpointError(f"{path}: header field '{key}' is missing or not an integer")


def assign_tensors(params: Iterable[ParamTensor], tensors: dict[str, np.ndarray]) -> None:
    """Copy checkpoint values into parameters, checking names and shapes."""
    for p in params:
        if p.name not in tensors:
            raise CheckpointError(f"Checkpoint lacks tensor '{p.name}'")
        value = tensors[p.name]
        if value.shape != p.shape:
            raise CheckpointError(f"Tensor '{p.name}' has shape {value.shape}, expected {p.shape}")
        p.values[...] = value
        p.zero_grad()
