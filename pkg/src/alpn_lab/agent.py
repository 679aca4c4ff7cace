"""
Actor-critic agents that recommend exercises.

The network is a shared tanh trunk (J -> 64 -> 64) with a softmax policy head
over the J exercises and a scalar value head. Three updaters share the same
collection loop and advantage estimate:

- ``a2c``: one pass of the plain policy gradient ``log pi * A`` with live
  entropy, no ratio, no clipping, no data reuse.
- ``ppo``: clipped surrogate over several epochs of minibatches; the entropy
  bonus is recomputed from the current policy (and carries gradient).
- ``eppo``: identical to ``ppo`` except that the entropy bonus is the value
  stored in the buffer when the transition was collected. That number is a
  constant with respect to the parameters being optimized.

Advantages are Monte Carlo discounted returns minus the value estimated at
collection time; value targets are the same returns.
"""

import copy
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from .environment import StepInfo, StudentEnvironment
from .exceptions import (
    CatalogMismatchError,
    CheckpointError,
    ConfigurationError,
    NonFiniteGradientError,
    TrainingDivergedError,
)
from .knowledge import KnowledgeState
from .nn import (
    DTYPE,
    Adam,
    AdamHyper,
    Dense,
    ParamTensor,
    RngStream,
    assign_tensors,
    checkpoint_int,
    entropy,
    entropy_logits_backward,
    load_checkpoint,
    log_softmax,
    save_checkpoint,
    softmax,
)

logger = logging.getLogger(__name__)

VARIANTS = ('a2c', 'ppo', 'eppo')

# Stream ids under a run seed.
STREAM_INIT = 0
STREAM_EPISODE = 1
STREAM_SHUFFLE = 2
STREAM_EVAL = 3

ADVANTAGE_EPS = 1e-8


@dataclass(frozen=True)
class AgentHyper:
    gamma: float = 0.99
    clip_eps: float = 0.2
    alpha: float = 0.01
    vf_coef: float = 0.5
    lr: float = 3e-4
    update_epochs: int = 4
    minibatch_size: int = 256
    episodes_per_update: int = 8
    buffer_capacity: int = 64
    hidden: int = 64
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}", field='agent.gamma')
        if self.clip_eps <= 0:
            raise ConfigurationError(f"clip_eps must be > 0, got {self.clip_eps}", field='agent.clip_eps')
        for name in ('update_epochs', 'minibatch_size', 'episodes_per_update', 'buffer_capacity', 'hidden'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1", field=f'agent.{name}')
        if self.buffer_capacity < self.episodes_per_update:
            raise ConfigurationError("buffer_capacity must hold at least one update window",
                                     field='agent.buffer_capacity')


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

@dataclass
class NetCache:
    trunk1: object
    trunk2: object
    policy: object
    value: object


class ActorCriticNet:
    """Shared-trunk actor-critic network over knowledge states of length ``J``."""

    def __init__(self, J: int, rng: RngStream, hidden: int = 64):
        self.J = J
        self.hidden = hidden
        self.trunk1 = Dense('trunk.0', J, hidden, rng, activation='tanh')
        self.trunk2 = Dense('trunk.1', hidden, hidden, rng, activation='tanh')
        self.policy = Dense('policy', hidden, J, rng)
        self.value = Dense('value', hidden, 1, rng)

    def parameters(self) -> list[ParamTensor]:
        return [*self.trunk1.parameters(), *self.trunk2.parameters(),
                *self.policy.parameters(), *self.value.parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def forward(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, NetCache]:
        """
        Returns:
            (logits, probs, values, cache) for a batch of states (B x J).
        """
        x = np.atleast_2d(np.asarray(states, dtype=DTYPE))
        if x.shape[1] != self.J:
            raise ConfigurationError(f"State width {x.shape[1]} != J {self.J}")
        h1, c1 = self.trunk1.forward(x)
        h2, c2 = self.trunk2.forward(h1)
        logits, cp = self.policy.forward(h2)
        values, cv = self.value.forward(h2)
        return logits, softmax(logits), values[:, 0], NetCache(c1, c2, cp, cv)

    def backward(self, cache: NetCache, grad_logits: np.ndarray, grad_values: np.ndarray) -> None:
        grad_h2 = self.policy.backward(cache.policy, grad_logits)
        grad_h2 = grad_h2 + self.value.backward(cache.value, np.asarray(grad_values, dtype=DTYPE)[:, None])
        grad_h1 = self.trunk2.backward(cache.trunk2, grad_h2)
        self.trunk1.backward(cache.trunk1, grad_h1)

    def snapshot(self) -> 'ActorCriticNet':
        """Independent copy used as a read-only policy during collection."""
        return copy.deepcopy(self)

    def to_tensors(self) -> dict[str, np.ndarray]:
        return {p.name: p.values for p in self.parameters()}

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path]) -> tuple['ActorCriticNet', dict[str, np.ndarray], dict]:
        tensors, meta = load_checkpoint(path)
        if meta.get('kind') != 'actor_critic':
            raise CheckpointError(f"{path} holds a '{meta.get('kind')}' checkpoint, not actor_critic")
        net = cls(checkpoint_int(meta, 'J', path), RngStream(0), hidden=checkpoint_int(meta, 'hidden', path))
        assign_tensors(net.parameters(), tensors)
        return net, tensors, meta


@dataclass(frozen=True)
class ActResult:
    action: int
    log_prob: float
    entropy: float
    value: float


def act(net: ActorCriticNet, state: KnowledgeState, rng: Optional[RngStream], greedy: bool = False) -> ActResult:
    """
    Sample an exercise from the policy at ``state``. Action, log-probability,
    entropy and value all come from the same forward pass.
    """
    logits, probs, values, _ = net.forward(state.s[None, :])
    p = probs[0]
    if greedy or rng is None:
        action = int(np.argmax(p))
    else:
        action = rng.categorical(p)
    log_p = log_softmax(logits[0])
    return ActResult(action, float(log_p[action]), float(entropy(p)), float(values[0]))


# ---------------------------------------------------------------------------
# Trajectories and buffer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionRecord:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    log_prob: float
    entropy: float
    value: float
    correctness: int = 0
    info: Optional[StepInfo] = None


@dataclass
class RolloutEpisode:
    index: int
    initial_apr: float
    records: list[TransitionRecord] = field(default_factory=list)
    version: int = 0
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    @property
    def length(self) -> int:
        return len(self.records)

    @property
    def path(self) -> list[int]:
        return [r.action for r in self.records]

    @property
    def cumulative_reward(self) -> float:
        return float(sum(r.reward for r in self.records))

    @property
    def final_apr(self) -> float:
        if not self.records or self.records[-1].info is None:
            return self.initial_apr
        return self.records[-1].info.apr_now

    @property
    def goal_reached(self) -> bool:
        return bool(self.records) and self.records[-1].done and not self.records[-1].info.truncated

    def apr_curve(self) -> list[float]:
        return [self.initial_apr] + [r.info.apr_now for r in self.records]

    def states(self) -> list[np.ndarray]:
        if not self.records:
            return []
        return [self.records[0].state] + [r.next_state for r in self.records]


class ReplayBuffer:
    """
    FIFO store of whole episodes tagged with the policy version that
    collected them. Updates read only the window of the current version.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError(f"Buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.episodes: deque[RolloutEpisode] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.episodes)

    def add(self, episode: RolloutEpisode) -> None:
        self.episodes.append(episode)

    def window(self, version: int) -> list[RolloutEpisode]:
        return [e for e in self.episodes if e.version == version]


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards), dtype=DTYPE)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        out[t] = running
    return out


def discounted_advantages(episode: Sequence[TransitionRecord], gamma: float) -> np.ndarray:
    """``A_t = sum_{t' >= t} gamma^(t'-t) r_t' - V(s_t)`` by backward recursion."""
    if len(episode) == 0:
        raise ConfigurationError("Cannot estimate advantages of an empty episode")
    returns = discounted_returns([r.reward for r in episode], gamma)
    return returns - np.array([r.value for r in episode], dtype=DTYPE)


def prob_ratio(log_prob_new, log_prob_old):
    """
    Probability ratio between the current and the collecting policy.

    Args:
        log_prob_new: Log-probabilities of the taken actions under the
            current parameters.
        log_prob_old: Log-probabilities stored at collection time.

    Returns:
        np.ndarray: ``exp(log_prob_new - log_prob_old)``, elementwise; 1 where
        the policy has not moved.

    Examples:
        >>> prob_ratio([0.0, -1.0], [0.0, -1.0]).tolist()
        [1.0, 1.0]
    """
    return np.exp(np.asarray(log_prob_new, dtype=DTYPE) - np.asarray(log_prob_old, dtype=DTYPE))


def clipped_surrogate(ratio, advantage, clip_eps: float):
    """``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``."""
    if clip_eps <= 0:
        raise ConfigurationError(f"clip_eps must be > 0, got {clip_eps}")
    ratio = np.asarray(ratio, dtype=DTYPE)
    advantage = np.asarray(advantage, dtype=DTYPE)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage)


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

@dataclass
class Minibatch:
    states: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    entropies: np.ndarray

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    def take(self, idx: np.ndarray) -> 'Minibatch':
        return Minibatch(self.states[idx], self.actions[idx], self.old_log_probs[idx],
                         self.advantages[idx], self.returns[idx], self.entropies[idx])


@dataclass(frozen=True)
class ObjectiveResult:
    """Value of the maximized objective and its components (batch means)."""
    objective: float
    surrogate: float
    value_loss: float
    entropy_term: float
    mean_ratio: float

    @property
    def loss(self) -> float:
        return -self.objective


def build_minibatch(episodes: Sequence[RolloutEpisode], normalize: bool) -> Minibatch:
    records = [r for e in episodes for r in e.records]
    if not records:
        raise ConfigurationError("No transitions to build a batch from")
    advantages = np.concatenate([e.advantages for e in episodes if e.records])
    returns = np.concatenate([e.returns for e in episodes if e.records])
    if normalize and advantages.size > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + ADVANTAGE_EPS)
    return Minibatch(
        states=np.stack([r.state for r in records]),
        actions=np.array([r.action for r in records], dtype=np.int64),
        old_log_probs=np.array([r.log_prob for r in records], dtype=DTYPE),
        advantages=advantages,
        returns=returns,
        entropies=np.array([r.entropy for r in records], dtype=DTYPE),
    )


def _objective(batch: Minibatch, net: ActorCriticNet, hyper: AgentHyper, *,
               clipped: bool, live_entropy: bool, backward: bool) -> ObjectiveResult:
    if len(batch) == 0:
        raise ConfigurationError("Objective needs a non-empty minibatch")
    n = len(batch)
    rows = np.arange(n)
    logits, probs, values, cache = net.forward(batch.states)
    log_probs = log_softmax(logits)[rows, batch.actions]
    advantages = batch.advantages

    if clipped:
        ratio = prob_ratio(log_probs, batch.old_log_probs)
        surrogate = clipped_surrogate(ratio, advantages, hyper.clip_eps)
        unclipped_active = ratio * advantages <= np.clip(ratio, 1 - hyper.clip_eps, 1 + hyper.clip_eps) * advantages
        d_surrogate = np.where(unclipped_active, ratio * advantages, 0.0)
    else:
        ratio = np.ones(n, dtype=DTYPE)
        surrogate = log_probs * advantages
        d_surrogate = advantages

    value_error = batch.returns - values
    value_loss = hyper.vf_coef * value_error ** 2

    if live_entropy:
        entropies = entropy(probs)
    else:
        entropies = batch.entropies
    entropy_term = hyper.alpha * entropies

    objective = float(np.mean(surrogate - value_loss + entropy_term))

    if backward:
        onehot = np.zeros_like(probs)
        onehot[rows, batch.actions] = 1.0
        grad_logits = d_surrogate[:, None] * (onehot - probs)
        if live_entropy and hyper.alpha != 0.0:
            grad_logits += entropy_logits_backward(probs, np.full(n, hyper.alpha))
        grad_values = 2.0 * hyper.vf_coef * value_error
        # Parameters store the gradient of the loss, i.e. of -objective.
        net.backward(cache, -grad_logits / n, -grad_values / n)

    return ObjectiveResult(
        objective=objective,
        surrogate=float(np.mean(surrogate)),
        value_loss=float(np.mean(value_loss)),
        entropy_term=float(np.mean(entropy_term)),
        mean_ratio=float(np.mean(ratio)),
    )


def eppo_objective(minibatch: Minibatch, net: ActorCriticNet, hyper: AgentHyper,
                   backward: bool = True) -> ObjectiveResult:
    """Clipped surrogate - value error + alpha * entropy stored at collection."""
    return _objective(minibatch, net, hyper, clipped=True, live_entropy=False, backward=backward)


def ppo_objective(minibatch: Minibatch, net: ActorCriticNet, hyper: AgentHyper,
                  backward: bool = True) -> ObjectiveResult:
    """Clipped surrogate - value error + alpha * entropy of the current policy."""
    return _objective(minibatch, net, hyper, clipped=True, live_entropy=True, backward=backward)


def a2c_objective(minibatch: Minibatch, net: ActorCriticNet, hyper: AgentHyper,
                  backward: bool = True) -> ObjectiveResult:
    """Policy gradient ``log pi * A`` - value error + alpha * live entropy."""
    return _objective(minibatch, net, hyper, clipped=False, live_entropy=True, backward=backward)


# ---------------------------------------------------------------------------
# Updaters
# ---------------------------------------------------------------------------

@dataclass
class UpdateStats:
    objectives: list[ObjectiveResult] = field(default_factory=list)
    # entropy term per (epoch, minibatch position), in visiting order
    entropy_terms: list[list[float]] = field(default_factory=list)

    @property
    def last(self) -> Optional[ObjectiveResult]:
        return self.objectives[-1] if self.objectives else None


def _optimizer_step(optimizer: Adam, result: ObjectiveResult) -> None:
    if not np.isfinite(result.objective):
        raise TrainingDivergedError(
            f"Non-finite objective {result.objective}",
            diagnostics={'surrogate': result.surrogate, 'value_loss': result.value_loss,
                         'entropy_term': result.entropy_term, 'mean_ratio': result.mean_ratio},
        )
    try:
        optimizer.step()
    except NonFiniteGradientError as e:
        raise TrainingDivergedError(str(e), diagnostics={'tensors': e.tensors})


def a2c_update(episodes: Sequence[RolloutEpisode], net: ActorCriticNet, optimizer: Adam,
               hyper: AgentHyper) -> UpdateStats:
    """One full-batch policy-gradient step on fresh on-policy episodes."""
    batch = build_minibatch(episodes, hyper.normalize_advantages)
    optimizer.zero_grad()
    result = a2c_objective(batch, net, hyper)
    _optimizer_step(optimizer, result)
    return UpdateStats([result], [[result.entropy_term]])


def ppo_update(episodes: Sequence[RolloutEpisode], net: ActorCriticNet, optimizer: Adam,
               hyper: AgentHyper, rng: RngStream, buffered_entropy: bool) -> UpdateStats:
    """
    Several epochs of shuffled minibatch updates with the clipped surrogate.

    ``buffered_entropy`` selects EPPO (stored entropy) over PPO (live entropy).
    """
    batch = build_minibatch(episodes, hyper.normalize_advantages)
    objective_fn = eppo_objective if buffered_entropy else ppo_objective
    stats = UpdateStats()
    for _ in range(hyper.update_epochs):
        order = rng.permutation(len(batch))
        epoch_entropy = []
        for start in range(0, len(batch), hyper.minibatch_size):
            optimizer.zero_grad()
            result = objective_fn(batch.take(order[start:start + hyper.minibatch_size]), net, hyper)
            _optimizer_step(optimizer, result)
            stats.objectives.append(result)
            epoch_entropy.append(result.entropy_term)
        stats.entropy_terms.append(epoch_entropy)
    return stats


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def collect_episode(env: StudentEnvironment, net: ActorCriticNet, rng: RngStream, index: int,
                    version: int = 0, greedy: bool = False) -> RolloutEpisode:
    """Roll out one episode with ``net`` until the goal or ``t_max``."""
    state, episode = env.reset(rng)
    rollout = RolloutEpisode(index=index, initial_apr=episode.initial_apr, version=version)
    while not episode.done:
        decision = act(net, state, rng, greedy=greedy)
        step = env.env_step(episode, decision.action, rng)
        rollout.records.append(TransitionRecord(
            state=state.s,
            action=decision.action,
            reward=step.reward,
            next_state=step.next_state.s,
            done=step.done,
            log_prob=decision.log_prob,
            entropy=decision.entropy,
            value=decision.value,
            correctness=step.correctness,
            info=step.info,
        ))
        state = step.next_state
    return rollout


@dataclass
class TrainingHistory:
    seed: int
    variant: str
    episodes: list[RolloutEpisode] = field(default_factory=list)
    objectives: list[ObjectiveResult] = field(default_factory=list)


class Trainer:
    """
    Runs the collection/update loop for one seed and one agent variant.

    Episodes are grouped into update windows of ``episodes_per_update``;
    every window is collected under one frozen parameter version, optionally
    on several threads, merged by episode index, then used for one update.
    A window cut short by the episode budget stays pending: its episodes are
    recorded but the update waits until a later ``run`` completes the window.

    Args:
        env: Student environment.
        variant: One of ``a2c``, ``ppo``, ``eppo``.
        hyper: Agent hyperparameters.
        seed: Run seed; every random stream derives from it.
        workers: Threads used to collect a window.
        checkpoint_every: Updates between checkpoint hook calls (0 disables).
        checkpoint_hook: Called after every ``checkpoint_every`` updates with
            the trainer; returns the path of the checkpoint it wrote.
    """

    def __init__(self, env: StudentEnvironment, variant: str, hyper: AgentHyper, seed: int,
                 workers: int = 1, progress: bool = False,
                 checkpoint_every: int = 0,
                 checkpoint_hook: Optional[Callable[['Trainer'], Optional[str]]] = None):
        if variant not in VARIANTS:
            raise ConfigurationError(f"Unknown agent variant '{variant}', expected one of {VARIANTS}",
                                     field='agent.variant')
        self.env = env
        self.variant = variant
        self.hyper = hyper
        self.seed = seed
        self.workers = max(1, workers)
        self.progress = progress
        self.checkpoint_every = checkpoint_every
        self.checkpoint_hook = checkpoint_hook
        self.net = ActorCriticNet(env.J, RngStream(seed, STREAM_INIT), hidden=hyper.hidden)
        self.optimizer = Adam(self.net.parameters(), AdamHyper(lr=hyper.lr))
        self.buffer = ReplayBuffer(hyper.buffer_capacity)
        self.history = TrainingHistory(seed, variant)
        self.episodes_done = 0
        self.updates_done = 0
        # episodes of the open window, all collected under version updates_done
        self.pending: list[RolloutEpisode] = []
        self.last_checkpoint: Optional[str] = None

    # -- persistence ---------------------------------------------------------

    def state_tensors(self) -> dict[str, np.ndarray]:
        tensors = dict(self.net.to_tensors())
        tensors.update(self.optimizer.state_tensors())
        return tensors

    def checkpoint_meta(self) -> dict:
        return {
            'kind': 'actor_critic',
            'J': self.env.J,
            'hidden': self.hyper.hidden,
            'variant': self.variant,
            'seed': self.seed,
            'episodes_done': self.episodes_done,
            'updates_done': self.updates_done,
            'optimizer_step': self.optimizer.step_index,
            'catalog': self.env.catalog.fingerprint(),
        }

    def save(self, path: Union[str, Path], extra_meta: Optional[dict] = None) -> Path:
        meta = self.checkpoint_meta()
        meta.update(extra_meta or {})
        return save_checkpoint(path, self.state_tensors(), meta)

    def restore(self, path: Union[str, Path]) -> dict:
        """
        Load parameters, optimizer moments and progress from a checkpoint.

        Episodes of a pending window are collected again under the restored
        parameters; they are not added to ``history`` a second time.
        """
        tensors, meta = load_checkpoint(path)
        if meta.get('kind') != 'actor_critic':
            raise CheckpointError(f"{path} is not an actor_critic checkpoint")
        if meta.get('catalog') != self.env.catalog.fingerprint():
            raise CatalogMismatchError(f"{path} was trained on a different catalog")
        episodes_done = checkpoint_int(meta, 'episodes_done', path)
        if 'updates_done' in meta:
            updates_done = checkpoint_int(meta, 'updates_done', path)
        else:
            updates_done = episodes_done // self.hyper.episodes_per_update
        optimizer_step = checkpoint_int(meta, 'optimizer_step', path)
        window_start = updates_done * self.hyper.episodes_per_update
        if not window_start <= episodes_done < window_start + self.hyper.episodes_per_update:
            raise CheckpointError(
                f"{path} records {episodes_done} episodes after {updates_done} updates, "
                f"which does not fit windows of {self.hyper.episodes_per_update}")
        assign_tensors(self.net.parameters(), tensors)
        self.optimizer.load_state(tensors, optimizer_step)
        self.episodes_done = episodes_done
        self.updates_done = updates_done
        self.pending = self._collect_window(list(range(window_start, episodes_done)), updates_done)
        self.last_checkpoint = str(path)
        return meta

    # -- loop ----------------------------------------------------------------

    def _collect_window(self, indices: list[int], version: int) -> list[RolloutEpisode]:
        if not indices:
            return []
        policy = self.net.snapshot()

        def run(index: int) -> RolloutEpisode:
            return collect_episode(self.env, policy, RngStream(self.seed, STREAM_EPISODE, index), index, version)

        if self.workers > 1 and len(indices) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(run, indices))
        return [run(i) for i in indices]

    def _update(self, episodes: list[RolloutEpisode], version: int) -> UpdateStats:
        for episode in episodes:
            episode.advantages = discounted_advantages(episode.records, self.hyper.gamma)
            episode.returns = discounted_returns([r.reward for r in episode.records], self.hyper.gamma)
            self.buffer.add(episode)
        window = self.buffer.window(version)
        if self.variant == 'a2c':
            return a2c_update(window, self.net, self.optimizer, self.hyper)
        return ppo_update(window, self.net, self.optimizer, self.hyper,
                          RngStream(self.seed, STREAM_SHUFFLE, version),
                          buffered_entropy=self.variant == 'eppo')

    def run(self, n_episodes: int) -> TrainingHistory:
        """Train until ``n_episodes`` episodes have been collected in total."""
        if n_episodes < 0:
            raise ConfigurationError("Episode count must be >= 0", field='run.episodes')
        per_update = self.hyper.episodes_per_update
        bar = tqdm(total=n_episodes, initial=min(self.episodes_done, n_episodes),
                   desc=f"Training {self.variant} seed={self.seed}", ncols=80, disable=not self.progress)
        try:
            while self.episodes_done < n_episodes:
                version = self.updates_done
                stop = min((version + 1) * per_update, n_episodes)
                episodes = self._collect_window(list(range(self.episodes_done, stop)), version)
                self.history.episodes.extend(episodes)
                self.pending.extend(episodes)
                self.episodes_done = stop
                bar.update(len(episodes))
                if len(self.pending) < per_update:
                    break
                try:
                    stats = self._update(self.pending, version)
                except TrainingDivergedError as e:
                    e.last_checkpoint = self.last_checkpoint
                    logger.error("Training diverged at update %d (seed=%d): %s", version, self.seed, e)
                    raise
                self.pending = []
                self.updates_done += 1
                self.history.objectives.extend(stats.objectives)
                if stats.last is not None:
                    bar.set_postfix(apr=f"{episodes[-1].final_apr:.3f}", obj=f"{stats.last.objective:.3f}")
                if self.checkpoint_hook and self.checkpoint_every and self.updates_done % self.checkpoint_every == 0:
                    self.last_checkpoint = self.checkpoint_hook(self)
        finally:
            bar.close()
        if self.pending:
            logger.info("Update %d waits for %d more episodes (seed=%d)",
                        self.updates_done, per_update - len(self.pending), self.seed)
        logger.info("Finished %s seed=%d after %d episodes", self.variant, self.seed, self.episodes_done)
        return self.history


def train(env: StudentEnvironment, variant: str, hyper: AgentHyper, seeds: Sequence[int],
          n_episodes: int, workers: int = 1, progress: bool = False) -> dict[int, TrainingHistory]:
    """Run ``Trainer`` once per seed; returns histories keyed by seed."""
    return {seed: Trainer(env, variant, hyper, seed, workers=workers, progress=progress).run(n_episodes)
            for seed in seeds}


def evaluate_policy(env: StudentEnvironment, net: ActorCriticNet, students: int, seed: int,
                    greedy: bool = False, workers: int = 1) -> list[RolloutEpisode]:
    """Roll out ``students`` episodes without learning."""
    def run(index: int) -> RolloutEpisode:
        return collect_episode(env, net, RngStream(seed, STREAM_EVAL, index), index, greedy=greedy)

    if workers > 1 and students > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, range(students)))
    return [run(i) for i in range(students)]
