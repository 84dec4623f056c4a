"""Baseline policies and the batch evaluation harness.

Two scripted baselines: a random policy that holds each sampled action for
a drawn duration, and a raycast heuristic that steers toward the nearest
visible target category, wanders when nothing is visible, and wiggles free
when it stops making progress.  ``run_evaluation`` runs seeded episode
batches into a CSV report; ``compare_agents`` is a two-sample rank-sum
test over the final rewards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .config_dsl import load_config
from .episode import Action, Episode
from .observations import ObsSpec

# Raycast category rows the heuristics care about.
GOOD_GOAL_ROW = 3
MULTI_GOAL_ROW = 4
SPAWNER_ROW = 7


# --- random policy ----------------------------------------------------------


@dataclass
class RandomPolicyParams:
    """Action weights plus a hold-duration distribution.

    ``duration`` is a tagged tuple: ("fixed", n), ("normal", mean, sd)
    (rounded, clipped to >= 1), or ("geometric", p).  ``correlation`` is
    the probability of keeping the previous action instead of resampling
    when a hold expires.
    """

    action_weights: tuple[float, ...] = (1.0,) * 9
    duration: tuple = ("normal", 5.0, 1.0)
    correlation: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.action_weights, dtype=float)
        if w.shape != (9,) or (w < 0).any() or w.sum() == 0:
            raise ValueError("action_weights must be 9 non-negative values, not all zero")
        if not 0.0 <= self.correlation <= 1.0:
            raise ValueError("correlation must be in [0, 1]")
        draw_duration(self.duration, np.random.default_rng(0))  # validate shape


def draw_duration(spec: tuple, rng: np.random.Generator) -> int:
    kind = spec[0]
    if kind == "fixed":
        n = int(spec[1])
        if n < 1:
            raise ValueError("fixed duration must be >= 1")
        return n
    if kind == "normal":
        mean, sd = float(spec[1]), float(spec[2])
        if sd < 0:
            raise ValueError("duration sd must be >= 0")
        return max(1, int(round(rng.normal(mean, sd))))
    if kind == "geometric":
        p = float(spec[1])
        if not 0.0 < p <= 1.0:
            raise ValueError("geometric p must be in (0, 1]")
        return int(rng.geometric(p))
    raise ValueError(f"unknown duration distribution {spec[0]!r}")


def random_policy_step(
    params: RandomPolicyParams, rng: np.random.Generator, memory=None
) -> tuple[Action, tuple]:
    """One action; ``memory`` is (current action, steps remaining)."""
    if memory is not None:
        action, remaining = memory
        if remaining > 1:
            return action, (action, remaining - 1)
        if rng.random() < params.correlation:
            return action, (action, draw_duration(params.duration, rng))
    w = np.asarray(params.action_weights, dtype=float)
    action = Action(int(rng.choice(9, p=w / w.sum())))
    return action, (action, draw_duration(params.duration, rng))


# --- heuristic policy -------------------------------------------------------


@dataclass
class HeuristicPolicyParams:
    """Steer toward the strongest entry in the target rows of the raycast.

    With ``switch_rows`` set, targeting moves there permanently once any
    of those rows lights up (a button-pusher chases the button until the
    first spawned goal is seen).  ``explore_backwards`` wanders with
    equal-probability Forwards/Backwards instead of forward turn bursts.
    """

    ray_count: int = 15
    fov_degrees: float = 60.0
    target_rows: tuple[int, ...] = (GOOD_GOAL_ROW, MULTI_GOAL_ROW)
    switch_rows: tuple[int, ...] | None = None
    explore_backwards: bool = False
    stuck_speed_epsilon: float = 0.01
    stuck_window: int = 10
    unstick_duration: int = 15
    turn_burst_chance: float = 0.1
    turn_burst_steps: int = 15  # 15 turns of 6 degrees = a 90-degree sweep

    def __post_init__(self):
        if self.ray_count % 2 == 0 or self.ray_count < 1:
            raise ValueError("ray_count must be odd")
        if self.stuck_speed_epsilon <= 0:
            raise ValueError("stuck_speed_epsilon must be > 0")

    def obs_spec(self) -> ObsSpec:
        return ObsSpec(rays=self.ray_count, ray_fov=self.fov_degrees, vector=True)


@dataclass
class HeuristicMemory:
    slow_steps: int = 0
    unstick_left: int = 0
    unstick_action: Action = Action.Forwards
    burst_left: int = 0
    burst_action: Action = Action.Forwards
    switched: bool = False


def heuristic_policy_step(
    params: HeuristicPolicyParams,
    raycast: np.ndarray,
    vector: np.ndarray,
    memory: HeuristicMemory,
    rng: np.random.Generator,
) -> tuple[Action, HeuristicMemory]:
    if raycast.shape[1] != params.ray_count:
        raise ValueError(
            f"raycast has {raycast.shape[1]} columns, policy expects {params.ray_count}"
        )

    speed = float(np.linalg.norm(vector[1:4]))
    memory.slow_steps = memory.slow_steps + 1 if speed < params.stuck_speed_epsilon else 0

    if memory.unstick_left > 0:
        memory.unstick_left -= 1
        return memory.unstick_action, memory
    if memory.slow_steps >= params.stuck_window:
        memory.unstick_action = (
            Action.ForwardsLeft if rng.random() < 0.5 else Action.ForwardsRight
        )
        memory.unstick_left = params.unstick_duration - 1
        memory.slow_steps = 0
        return memory.unstick_action, memory

    if params.switch_rows is not None and not memory.switched:
        if raycast[list(params.switch_rows)].max() > 0.0:
            memory.switched = True
    rows = params.switch_rows if memory.switched else params.target_rows

    visible = raycast[list(rows)]
    if visible.max() > 0.0:
        memory.burst_left = 0
        col = int(np.unravel_index(np.argmax(visible), visible.shape)[1])
        if col == 0:
            return Action.Forwards, memory
        # Odd columns fan to the left of the center ray, even to the right.
        return (Action.ForwardsLeft if col % 2 == 1 else Action.ForwardsRight), memory

    # Nothing visible: wander.
    if params.explore_backwards:
        return (Action.Forwards if rng.random() < 0.5 else Action.Backwards), memory
    if memory.burst_left > 0:
        memory.burst_left -= 1
        return memory.burst_action, memory
    if rng.random() < params.turn_burst_chance:
        memory.burst_action = (
            Action.ForwardsLeft if rng.random() < 0.5 else Action.ForwardsRight
        )
        memory.burst_left = params.turn_burst_steps - 1
        return memory.burst_action, memory
    return Action.Forwards, memory


def foraging_heuristic_params() -> HeuristicPolicyParams:
    """Forager: 15 rays across the frontal 60 degrees, chasing goal rows."""
    return HeuristicPolicyParams()


def button_heuristic_params() -> HeuristicPolicyParams:
    """Button-pusher: near-panoramic 101 rays over 358 degrees; heads for
    the spawner until a spawned goal appears, then chases the goal."""
    return HeuristicPolicyParams(
        ray_count=101,
        fov_degrees=358.0,
        target_rows=(SPAWNER_ROW,),
        switch_rows=(GOOD_GOAL_ROW,),
        explore_backwards=True,
    )


# --- policy objects ---------------------------------------------------------


class RandomPolicy:
    """Samples weighted actions and holds each for a drawn duration."""

    def __init__(self, params: RandomPolicyParams | None = None):
        self.params = params if params is not None else RandomPolicyParams()
        self.obs_spec = ObsSpec(rays=None, camera=None, vector=False)
        self.reset(0)

    def reset(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)
        self.memory = None

    def act(self, observation) -> Action:
        action, self.memory = random_policy_step(self.params, self.rng, self.memory)
        return action


class HeuristicPolicy:
    """Raycast chaser with stuck recovery and wander exploration."""

    def __init__(self, params: HeuristicPolicyParams | None = None):
        self.params = params if params is not None else HeuristicPolicyParams()
        self.obs_spec = self.params.obs_spec()
        self.reset(0)

    def reset(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)
        self.memory = HeuristicMemory()

    def act(self, observation) -> Action:
        action, self.memory = heuristic_policy_step(
            self.params, observation.raycast, observation.vector, self.memory, self.rng
        )
        return action


# --- evaluation harness -----------------------------------------------------

REPORT_HEADER = "config,episode,seed,reward,passed,steps,done_reason"


@dataclass
class EvaluationRow:
    config: str
    episode: int
    seed: int
    reward: float
    passed: bool
    steps: int
    done_reason: str


@dataclass
class EvaluationReport:
    rows: list[EvaluationRow] = field(default_factory=list)

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.rows], dtype=float)

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.rewards()))

    @property
    def median(self) -> float:
        return float(np.nanmedian(self.rewards()))

    @property
    def pass_rate(self) -> float:
        return sum(r.passed for r in self.rows) / len(self.rows)

    def to_csv(self) -> str:
        lines = [REPORT_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.config},{r.episode},{r.seed},{r.reward!r},{r.passed},"
                f"{r.steps},{r.done_reason}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "EvaluationReport":
        lines = [
            ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")
        ]
        if not lines or lines[0] != REPORT_HEADER:
            raise ValueError(f"expected header {REPORT_HEADER!r}")
        report = cls()
        for ln in lines[1:]:
            config, episode, seed, reward, passed, steps, reason = ln.split(",")
            report.rows.append(
                EvaluationRow(
                    config=config,
                    episode=int(episode),
                    seed=int(seed),
                    reward=float(reward),
                    passed=passed == "True",
                    steps=int(steps),
                    done_reason=reason,
                )
            )
        return report


def run_episode(policy, cfg, arena_index: int, seed: int, max_steps: int = 20000):
    """One policy rollout; returns the episode summary."""
    ep = Episode.from_config(cfg, arena_index, seed, obs_spec=policy.obs_spec)
    policy.reset(seed)
    obs = ep.observe()
    while not ep.done:
        if ep.step_count >= max_steps:
            ep.skip()  # untimed arena and the policy never finished
            break
        result = ep.step(policy.act(obs))
        obs = result.observation
    return ep.finish_episode()


def run_evaluation(
    config_paths, policy, episodes: int, base_seed: int = 0, max_steps: int = 20000
) -> EvaluationReport:
    """Seeded episode batch over one or more config files.

    Episode i uses seed base_seed + i; files with several arenas cycle
    through them.  A simulation fault becomes a NaN-reward row rather than
    aborting the batch.
    """
    if isinstance(config_paths, (str, Path)):
        config_paths = [config_paths]
    report = EvaluationReport()
    for path in config_paths:
        cfg = load_config(path)
        indices = sorted(cfg.arenas)
        for i in range(episodes):
            seed = base_seed + i
            try:
                summary = run_episode(
                    policy, cfg, indices[i % len(indices)], seed, max_steps
                )
                row = EvaluationRow(
                    config=str(path),
                    episode=i,
                    seed=seed,
                    reward=summary.final_reward,
                    passed=summary.passed,
                    steps=summary.steps,
                    done_reason=summary.done_reason,
                )
            except Exception as exc:  # noqa: BLE001 - fault captured per-row
                row = EvaluationRow(
                    config=str(path),
                    episode=i,
                    seed=seed,
                    reward=float("nan"),
                    passed=False,
                    steps=0,
                    done_reason=f"error:{type(exc).__name__}",
                )
            report.rows.append(row)
    return report


def compare_agents(report_a: EvaluationReport, report_b: EvaluationReport) -> dict:
    """Two-sided Mann-Whitney rank-sum test on final rewards.

    Exact distribution for small tie-free samples (n <= 20 each), normal
    approximation otherwise.
    """
    a, b = report_a.rewards(), report_b.rewards()
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both reports must be non-empty")
    ties = len(np.unique(np.concatenate([a, b]))) < len(a) + len(b)
    method = "exact" if (len(a) <= 20 and len(b) <= 20 and not ties) else "asymptotic"
    res = stats.mannwhitneyu(a, b, alternative="two-sided", method=method)
    return {"rank_sum_statistic": float(res.statistic), "p_value": float(res.pvalue)}
