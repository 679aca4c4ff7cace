"""
Shared fixtures for the test suite: finite-difference gradients and small
environments.
"""

from typing import Callable

import numpy as np

from alpn_lab.environment import EnvConfig, ProfileConfig, StudentEnvironment, StudentParams
from alpn_lab.knowledge import ExerciseCatalog, GoalConfig, goal_reached
from alpn_lab.nn import ParamTensor, RngStream

FD_STEP = 1e-5


def numeric_gradient(f: Callable[[], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of ``f`` w.r.t. ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=['multi_index'])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        plus = f()
        x[idx] = orig - step
        minus = f()
        x[idx] = orig
        grad[idx] = (plus - minus) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / denom)


def param_gradients_match(testcase, params: list[ParamTensor], loss: Callable[[], float],
                          backward: Callable[[], None], tol: float = 1e-4) -> None:
    """Assert analytic parameter gradients of ``loss`` match finite differences."""
    for p in params:
        p.zero_grad()
    backward()
    analytic = {p.name: p.grad.copy() for p in params}
    for p in params:
        numeric = numeric_gradient(loss, p.values)
        err = relative_error(analytic[p.name], numeric)
        testcase.assertLess(err, tol, f"gradient mismatch for {p.name}: {err:.2e}")


def small_catalog(J: int = 6, topics: int = 3, areas: int = 2) -> ExerciseCatalog:
    return ExerciseCatalog.synthetic(J, topics, areas)


def small_env(J: int = 6, beta: float = 0.8, t_max: int = 20, student: StudentParams = None,
              profile: ProfileConfig = None, topics: int = 3, areas: int = 2,
              **env_kwargs) -> StudentEnvironment:
    config = EnvConfig(
        student=student or StudentParams(),
        profile=profile or ProfileConfig(),
        **env_kwargs,
    )
    return StudentEnvironment(small_catalog(J, topics, areas), config, GoalConfig(beta=beta, t_max=t_max))


def check_random_episodes(testcase, env: StudentEnvironment, episodes: int, seed: int = 0) -> None:
    """
    Roll out uniformly random recommendations and assert the episode
    invariants: bounded length, states inside (0, 1), termination exactly at
    the first goal hit, and transitions that replay bit-exactly.
    """
    for i in range(episodes):
        rng = RngStream(seed, 1, i)
        _, episode = env.reset(rng)
        replay = episode.snapshot()
        steps = []
        while not episode.done:
            action = int(rng.integers(0, env.J))
            steps.append((action, env.env_step(episode, action, rng)))

        testcase.assertLessEqual(len(steps), env.goal.t_max)
        for k, (action, step) in enumerate(steps):
            values = step.next_state.as_array()
            testcase.assertTrue(np.all((values > 0.0) & (values < 1.0)))
            reached = goal_reached(step.info.apr_now, env.goal.beta)
            last = k == len(steps) - 1
            testcase.assertEqual(step.done, last)
            if not last:
                testcase.assertFalse(reached)
            else:
                testcase.assertTrue(reached or len(steps) == env.goal.t_max)
                testcase.assertEqual(step.info.truncated, not reached)
            np.testing.assert_array_equal(env.transition(replay, action, step.correctness).as_array(), values)


class _ScriptedGenerator:

    def __init__(self, draws):
        self.draws = list(draws)

    def random(self) -> float:
        return self.draws.pop(0)


class ScriptedStream(RngStream):
    """Stream whose uniform draws come from a fixed list, for hand-checked trajectories."""

    def __init__(self, draws):
        super().__init__(0)
        self.generator = _ScriptedGenerator(draws)

    @property
    def remaining(self) -> int:
        return len(self.generator.draws)
