"""
Episodic student environment.

One episode is one student's goal-directed session: the environment samples
a student and the initial knowledge state, then repeats recommend, respond,
update until the APR reaches the goal or ``t_max`` steps have been taken.

Two backings produce the knowledge state:

- ``analytic``: a BKT-flavored simulated student whose mastery moves toward 1
  after every attempt (more after a correct answer), with partial transfer
  to exercises of the same topic, observed through slip/guess noise.
- ``akt``: an AKT-lite model re-evaluates the growing interaction log; the
  analytic student only supplies the seed history that fixes ``s_1``.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .akt import AktLiteModel, predict_state
from .exceptions import ConfigurationError, EpisodeFinishedError
from .knowledge import (
    STATE_EPS,
    ExerciseCatalog,
    GoalConfig,
    InteractionLog,
    KnowledgeState,
    apr,
    distance_to_goal,
    goal_reached,
    learning_gain,
)
from .nn import RngStream, sigmoid
from .reward import (
    BRANCH_GAIN,
    DEFAULT_D_FLOOR,
    RecommendationCounts,
    RewardParams,
    penalty_lambda,
    step_reward_with_branch,
)

logger = logging.getLogger(__name__)

BACKINGS = ('analytic', 'akt')


@dataclass(frozen=True)
class StudentParams:
    """Learning dynamics and response noise of the simulated student."""
    eta_correct: float = 0.25
    eta_wrong: float = 0.05
    kappa: float = 0.15
    slip: float = 0.05
    guess: float = 0.1

    def __post_init__(self):
        for name in ('eta_correct', 'eta_wrong', 'kappa', 'slip', 'guess'):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1), got {value}",
                                         field=f'environment.student.{name}')
        if self.eta_wrong > self.eta_correct:
            raise ConfigurationError("eta_wrong must not exceed eta_correct",
                                     field='environment.student.eta_wrong')

    def observe(self, mastery: np.ndarray) -> np.ndarray:
        """Correct-answer probability from mastery: ``(1-slip) m + guess (1-m)``."""
        return (1.0 - self.slip) * mastery + self.guess * (1.0 - mastery)


@dataclass(frozen=True)
class ProfileConfig:
    """
    Distribution of initial mastery.

    Each student draws an ability ``g ~ Normal(mu_g, sigma_g)`` and each
    exercise an offset ``z_j ~ Normal(0, sigma_z)``; ``m_j = sigmoid(g + z_j)``.
    ``fixed_mastery`` bypasses sampling and sets every ``m_j`` to that value.
    """
    mu_g: float = -0.8
    sigma_g: float = 0.5
    sigma_z: float = 0.7
    fixed_mastery: Optional[float] = None

    def __post_init__(self):
        if self.sigma_g < 0 or self.sigma_z < 0:
            raise ConfigurationError("Profile standard deviations must be >= 0", field='environment.profile')
        if self.fixed_mastery is not None and not 0.0 < self.fixed_mastery < 1.0:
            raise ConfigurationError("fixed_mastery must lie in (0, 1)", field='environment.profile.fixed_mastery')

    def sample_mastery(self, rng: RngStream, J: int) -> np.ndarray:
        if self.fixed_mastery is not None:
            return np.full(J, self.fixed_mastery, dtype=np.float64)
        ability = rng.normal(self.mu_g, self.sigma_g)
        offsets = rng.normal(0.0, self.sigma_z, size=J)
        return np.clip(sigmoid(ability + offsets), STATE_EPS, 1.0 - STATE_EPS)

    def expected_mastery(self, nodes: int = 64) -> float:
        """``E[sigmoid(g + z)]`` by Gauss-Hermite quadrature; ``g + z`` is normal."""
        if self.fixed_mastery is not None:
            return float(self.fixed_mastery)
        sd = np.hypot(self.sigma_g, self.sigma_z)
        x, w = np.polynomial.hermite_e.hermegauss(nodes)
        return float(np.sum(w * sigmoid(self.mu_g + sd * x)) / np.sqrt(2.0 * np.pi))

    def expected_apr(self, student: StudentParams) -> float:
        """Mean of ``apr(s_1)`` under this profile for the analytic backing."""
        m = self.expected_mastery()
        return float(student.observe(np.array([m]))[0])


@dataclass(frozen=True)
class EnvConfig:
    backing: str = 'analytic'
    student: StudentParams = field(default_factory=StudentParams)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    seed_history: int = 10
    d_floor: float = DEFAULT_D_FLOOR

    def __post_init__(self):
        if self.backing not in BACKINGS:
            raise ConfigurationError(f"backing must be one of {BACKINGS}, got '{self.backing}'",
                                     field='environment.backing')
        if self.seed_history < 0:
            raise ConfigurationError("seed_history must be >= 0", field='environment.seed_history')


class AnalyticStudent:
    """Simulated student with per-exercise mastery."""

    def __init__(self, mastery: np.ndarray, params: StudentParams):
        self.mastery = np.clip(np.asarray(mastery, dtype=np.float64), STATE_EPS, 1.0 - STATE_EPS)
        self.params = params

    def state(self) -> KnowledgeState:
        return KnowledgeState(self.params.observe(self.mastery))

    def learn(self, action: int, correctness: int, catalog: ExerciseCatalog) -> None:
        eta = self.params.eta_correct if correctness else self.params.eta_wrong
        m = self.mastery
        m[action] += eta * (1.0 - m[action])
        related = catalog.same_topic_mask(action)
        m[related] += self.params.kappa * eta * (1.0 - m[related])
        np.clip(m, STATE_EPS, 1.0 - STATE_EPS, out=m)

    def copy(self) -> 'AnalyticStudent':
        return AnalyticStudent(self.mastery.copy(), self.params)


@dataclass(frozen=True)
class StepInfo:
    apr_now: float
    lg: float
    d: float
    penalty_applied: bool
    branch: str
    lam: float
    n_action: int
    step_index: int
    truncated: bool


@dataclass(frozen=True)
class EnvStep:
    correctness: int
    next_state: KnowledgeState
    reward: float
    done: bool
    info: StepInfo


@dataclass
class Episode:
    """Mutable state of one running episode."""
    state: KnowledgeState
    log: InteractionLog
    counts: RecommendationCounts
    reward_params: RewardParams
    initial_apr: float
    apr: float
    student: Optional[AnalyticStudent] = None
    step_index: int = 0
    done: bool = False

    def snapshot(self) -> 'Episode':
        return copy.deepcopy(self)


class StudentEnvironment:
    """
    Environment over a fixed catalog and learning goal.

    Args:
        catalog: Exercise catalog (the action space).
        config: Backing choice, student dynamics and initial profile.
        goal: APR threshold and maximum path length.
        akt_model: Trained AKT-lite model, required for the ``akt`` backing.
    """

    def __init__(self, catalog: ExerciseCatalog, config: EnvConfig, goal: GoalConfig,
                 akt_model: Optional[AktLiteModel] = None):
        if config.backing == 'akt':
            if akt_model is None:
                raise ConfigurationError("The akt backing needs a trained AKT-lite model",
                                         field='environment.akt_checkpoint')
            if akt_model.J != catalog.J:
                raise ConfigurationError(f"AKT-lite model covers {akt_model.J} exercises, catalog has {catalog.J}")
        self.catalog = catalog
        self.config = config
        self.goal = goal
        self.akt_model = akt_model

    @property
    def J(self) -> int:
        return self.catalog.J

    def reset(self, rng: RngStream, profile: Optional[ProfileConfig] = None) -> tuple[KnowledgeState, Episode]:
        """Sample a fresh student; return ``s_1`` and the episode handle."""
        profile = profile or self.config.profile
        student = AnalyticStudent(profile.sample_mastery(rng, self.J), self.config.student)
        log = InteractionLog()

        if self.config.backing == 'akt':
            for _ in range(self.config.seed_history):
                action = int(rng.integers(0, self.J))
                correctness = rng.bernoulli(student.state()[action])
                log.append(action, correctness, J=self.J)
                student.learn(action, correctness, self.catalog)
            state = predict_state(self.akt_model, log)
            student = None
        else:
            state = student.state()

        apr1 = apr(state)
        lam = penalty_lambda(distance_to_goal(self.goal.beta, apr1), self.J, self.goal.t_max)
        episode = Episode(
            state=state,
            log=log,
            counts=RecommendationCounts.zeros(self.J),
            reward_params=RewardParams(lam, self.J, self.config.d_floor),
            initial_apr=apr1,
            apr=apr1,
            student=student,
        )
        return state, episode

    def respond(self, episode: Episode, action: int, rng: RngStream) -> int:
        """Sample the student's correctness ``~ Bernoulli(s_action)``."""
        action = self.catalog.check_exercise(action)
        return rng.bernoulli(episode.state[action])

    def transition(self, episode: Episode, action: int, correctness: int) -> KnowledgeState:
        """
        Record the attempt and move to the next knowledge state.

        Deterministic in (episode state, action, correctness).
        """
        action = self.catalog.check_exercise(action)
        episode.log.append(action, correctness, J=self.J)
        if episode.student is not None:
            episode.student.learn(action, correctness, self.catalog)
            episode.state = episode.student.state()
        else:
            episode.state = predict_state(self.akt_model, episode.log)
        return episode.state

    def env_step(self, episode: Episode, action: int, rng: RngStream) -> EnvStep:
        """
        Respond, update, compute the reward on the post-update APR, then test
        termination (reward first, then the goal check).

        Raises:
            EpisodeFinishedError: If the episode already terminated.
        """
        if episode.done:
            raise EpisodeFinishedError(f"Episode finished after {episode.step_index} steps")
        correctness = self.respond(episode, action, rng)
        next_state = self.transition(episode, action, correctness)

        apr_now = apr(next_state)
        lg = learning_gain(apr_now, episode.apr)
        d = distance_to_goal(self.goal.beta, apr_now)
        n_action = episode.counts.record(action)
        reward, branch = step_reward_with_branch(lg, d, episode.reward_params, n_action)

        episode.apr = apr_now
        episode.step_index += 1
        reached = goal_reached(apr_now, self.goal.beta)
        truncated = not reached and episode.step_index >= self.goal.t_max
        episode.done = reached or truncated

        info = StepInfo(
            apr_now=apr_now,
            lg=lg,
            d=d,
            penalty_applied=branch == BRANCH_GAIN and episode.reward_params.lam > 0.0,
            branch=branch,
            lam=episode.reward_params.lam,
            n_action=n_action,
            step_index=episode.step_index,
            truncated=truncated,
        )
        return EnvStep(correctness, next_state, reward, episode.done, info)
