"""
Reward shaping: learning gain scaled by the inverse distance to the goal,
minus a repetition penalty ``lambda ** n`` on non-negative gains.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError

DEFAULT_D_FLOOR = 1e-3

BRANCH_GAIN = 'gain'
BRANCH_LOSS = 'loss'


@dataclass(frozen=True)
class RewardParams:
    lam: float
    action_count: int
    d_floor: float = DEFAULT_D_FLOOR

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"Penalty base must be >= 0, got {self.lam}", field='reward.lambda')
        if self.action_count < 1:
            raise ConfigurationError(f"action_count must be >= 1, got {self.action_count}")
        if self.d_floor <= 0:
            raise ConfigurationError(f"d_floor must be > 0, got {self.d_floor}", field='reward.d_floor')


@dataclass
class RecommendationCounts:
    """Per-episode count of how often each exercise was recommended."""
    n: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def zeros(cls, J: int) -> 'RecommendationCounts':
        return cls(np.zeros(J, dtype=np.int64))

    def record(self, action: int) -> int:
        """Count the recommendation of ``action`` and return its new count."""
        self.n[action] += 1
        return int(self.n[action])


def penalty_lambda(d1: float, action_count: int, t_max: int) -> float:
    """
    Penalty base of an episode, fixed at reset from the initial distance.

    A student who starts closer to the goal gets a smaller base.

    Args:
        d1: Distance to the goal at the first state; floored at 0.
        action_count: Number of recommendable exercises.
        t_max: Maximum path length.

    Returns:
        float: ``max(d1, 0) * action_count / t_max``.

    Raises:
        ConfigurationError: If ``t_max < 1``.

    Examples:
        >>> penalty_lambda(0.5, 10, 50)
        0.1
        >>> penalty_lambda(-0.1, 20, 100)
        0.0
    """
    if t_max < 1:
        raise ConfigurationError(f"t_max must be >= 1, got {t_max}")
    return max(d1, 0.0) * action_count / t_max


def step_reward(lg: float, d: float, params: RewardParams, n_action: int) -> float:
    """
    Reward of one recommendation.

    Args:
        lg: Learning gain of the step.
        d: Distance to the goal after the step.
        params: Penalty base, action count and distance floor of the episode.
        n_action: Recommendations of this exercise so far, this one included.

    Returns:
        float: ``lg * |A| / max(d, d_floor)``, minus ``lam ** n_action`` when
        ``lg >= 0``.

    Raises:
        ConfigurationError: If ``n_action < 1``.

    Examples:
        >>> step_reward(0.25, 0.5, RewardParams(lam=0.5, action_count=4), 2)
        1.75
        >>> step_reward(-0.25, 0.5, RewardParams(lam=0.5, action_count=4), 2)
        -2.0
    """
    return step_reward_with_branch(lg, d, params, n_action)[0]


def step_reward_with_branch(lg: float, d: float, params: RewardParams, n_action: int) -> tuple[float, str]:
    """
    Reward for one step and the branch taken.

    ``n_action`` counts the current recommendation, so the first use of an
    exercise pays ``lambda ** 1``. The distance is floored at ``d_floor`` so
    the step that reaches (or passes) the goal keeps a finite, correctly
    signed reward.
    """
    if n_action < 1:
        raise ConfigurationError(f"n_action must count the current recommendation (>= 1), got {n_action}")
    d_eff = max(d, params.d_floor)
    scaled = lg * params.action_count / d_eff
    if lg >= 0:
        return scaled - params.lam ** n_action, BRANCH_GAIN
    return scaled, BRANCH_LOSS
