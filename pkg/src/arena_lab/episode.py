"""The episodic loop: actions, physics, contacts, reward/health, logging.

One step applies the action (turn, then thrust along the new facing),
integrates physics, advances entity schedules and dispensers, and then
resolves consequences in a fixed order: goal consumption, button presses,
zone effects, time decrement, termination.  The per-step time decrement is
1/t (0 for untimed arenas), replaced by 10/t while standing in a HotZone;
a DeathZone ending charges an extra -1.  Health tracks reward at 100
health per unit, clamped to [0, 100]; reaching 0 ends the episode.

Terminal causes are ranked: death_zone, then an episode-ending goal (the
lowest entity id if several were eaten at once), then timeout, then
health_zero.  During an initial frozen delay the agent's actions are
suppressed and time does not decrement, but the world keeps evolving and
contacts still apply.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import PROTOCOL_VERSION
from .config_dsl import ArenaConfigFile, ArenaSpec, blackout_active
from .entities import EntityKind, is_button_face_contact, on_agent_contact, press_button
from .geometry import facing
from .observations import Observation, ObsSpec, build_observation
from .physics import PhysicsParams, step_bodies
from .world import instantiate_arena

START_HEALTH = 100.0
HEALTH_PER_REWARD = 100.0
HOT_ZONE_DECREMENT_FACTOR = 10.0


class Action(enum.IntEnum):
    """The nine discrete actions (member names appear in logs verbatim)."""

    NoAction = 0
    Forwards = 1
    Left = 2
    Right = 3
    ForwardsLeft = 4
    ForwardsRight = 5
    Backwards = 6
    BackwardsLeft = 7
    BackwardsRight = 8


_THRUST = {
    Action.Forwards: 1.0,
    Action.ForwardsLeft: 1.0,
    Action.ForwardsRight: 1.0,
    Action.Backwards: -1.0,
    Action.BackwardsLeft: -1.0,
    Action.BackwardsRight: -1.0,
}
# Positive yaw turns clockwise (Right); Left is counter-clockwise.
_TURN = {
    Action.Left: -1.0,
    Action.ForwardsLeft: -1.0,
    Action.BackwardsLeft: -1.0,
    Action.Right: 1.0,
    Action.ForwardsRight: 1.0,
    Action.BackwardsRight: 1.0,
}


@dataclass
class EpisodeState:
    step: int
    t: int
    reward: float
    health: float
    prev_episode_reward: float
    frozen_remaining: int
    lights_on: bool
    done: bool
    done_reason: str | None


@dataclass
class StepResult:
    observation: Observation
    reward_delta: float
    done: bool
    health: float
    position: np.ndarray  # agent base (x, base height, z)
    velocity: np.ndarray
    step: int
    reward: float
    done_reason: str | None
    lights_on: bool


# --- trajectory log ---------------------------------------------------------

TRAJECTORY_HEADER = "step,x,y,z,yaw,action,reward_delta,reward,health"


@dataclass
class TrajectoryRow:
    step: int
    x: float
    y: float  # base height (bottom of the agent), not sphere centre
    z: float
    yaw: float
    action: str  # the requested action's name (replay recomputes freezing)
    reward_delta: float
    reward: float
    health: float


@dataclass
class TrajectoryLog:
    seed: int
    arena_index: int = 0
    version: str = PROTOCOL_VERSION
    rows: list[TrajectoryRow] = field(default_factory=list)

    def actions(self) -> list[Action]:
        return [Action[r.action] for r in self.rows]

    def to_csv(self) -> str:
        lines = [
            f"# {self.version} seed={self.seed} arena={self.arena_index}",
            TRAJECTORY_HEADER,
        ]
        for r in self.rows:
            lines.append(
                f"{r.step},{r.x!r},{r.y!r},{r.z!r},{r.yaw!r},{r.action},"
                f"{r.reward_delta!r},{r.reward!r},{r.health!r}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrajectoryLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# "):
            raise ValueError("trajectory file must start with a '# <version> ...' line")
        meta = lines[0][2:].split()
        fields = dict(part.split("=", 1) for part in meta[1:] if "=" in part)
        log = cls(
            seed=int(fields.get("seed", 0)),
            arena_index=int(fields.get("arena", 0)),
            version=meta[0],
        )
        if len(lines) < 2 or lines[1] != TRAJECTORY_HEADER:
            raise ValueError(f"expected header {TRAJECTORY_HEADER!r}")
        for ln in lines[2:]:
            parts = ln.split(",")
            if len(parts) != 9:
                raise ValueError(f"malformed trajectory row: {ln!r}")
            log.rows.append(
                TrajectoryRow(
                    step=int(parts[0]),
                    x=float(parts[1]),
                    y=float(parts[2]),
                    z=float(parts[3]),
                    yaw=float(parts[4]),
                    action=Action[parts[5]].name,
                    reward_delta=float(parts[6]),
                    reward=float(parts[7]),
                    health=float(parts[8]),
                )
            )
        return log


@dataclass
class Summary:
    final_reward: float
    passed: bool
    steps: int
    done_reason: str
    trajectory: TrajectoryLog


# --- episode ----------------------------------------------------------------


class Episode:
    """One arena run from instantiation to a terminal event."""

    def __init__(
        self,
        arena: ArenaSpec,
        seed: int,
        obs_spec: ObsSpec | None = None,
        arena_index: int = 0,
        prev_episode_reward: float = 0.0,
        params: PhysicsParams | None = None,
    ):
        self.arena = arena
        self.seed = int(seed)
        self.obs_spec = obs_spec if obs_spec is not None else ObsSpec()
        self.rng = np.random.default_rng(self.seed)
        self.world = instantiate_arena(arena, self.rng)
        self.params = params if params is not None else PhysicsParams()
        self.step_count = 0
        self.reward = 0.0
        self.health = START_HEALTH
        self.frozen_remaining = self.world.frozen_delay
        self.done = False
        self.done_reason: str | None = None
        self.prev_episode_reward = prev_episode_reward
        self.log = TrajectoryLog(seed=self.seed, arena_index=arena_index)

    @classmethod
    def from_config(
        cls,
        cfg: ArenaConfigFile,
        arena_index: int,
        seed: int,
        obs_spec: ObsSpec | None = None,
        prev_episode_reward: float = 0.0,
        params: PhysicsParams | None = None,
    ) -> "Episode":
        if arena_index not in cfg.arenas:
            raise ValueError(
                f"arena index {arena_index} not in file (have {sorted(cfg.arenas)})"
            )
        return cls(
            cfg.arenas[arena_index],
            seed,
            obs_spec=obs_spec,
            arena_index=arena_index,
            prev_episode_reward=prev_episode_reward,
            params=params,
        )

    @property
    def lights_on(self) -> bool:
        return not blackout_active(self.arena.blackouts, self.step_count)

    def state(self) -> EpisodeState:
        return EpisodeState(
            step=self.step_count,
            t=self.arena.t,
            reward=self.reward,
            health=self.health,
            prev_episode_reward=self.prev_episode_reward,
            frozen_remaining=self.frozen_remaining,
            lights_on=self.lights_on,
            done=self.done,
            done_reason=self.done_reason,
        )

    def observe(self) -> Observation:
        return build_observation(self.world, self.health, self.obs_spec, self.lights_on)

    def step(self, action: Action | int) -> StepResult:
        if self.done:
            raise RuntimeError("episode is done; no further steps are allowed")
        action = Action(action)
        world = self.world
        agent = world.agent

        frozen = self.frozen_remaining > 0
        if frozen:
            self.frozen_remaining -= 1
        applied = Action.NoAction if frozen else action

        turn = _TURN.get(applied, 0.0)
        if turn:
            agent.body.yaw = (agent.body.yaw + turn * self.params.turn_degrees) % 360.0
        drives: dict[int, np.ndarray] = {}
        thrust = _THRUST.get(applied, 0.0)
        if thrust:
            drives[agent.eid] = facing(agent.body.yaw) * (self.params.impulse * thrust)

        events = step_bodies(
            world.bodies(), world.colliders, self.params, drives, agent_eid=agent.eid
        )
        world.tick_entities()

        reward_delta = 0.0
        endings: list[tuple[int, str]] = []

        # Goal consumption: the agent passes through goal bodies, so contact
        # is a post-move overlap scan (speeds are far below goal diameters).
        for eid in sorted(world.entities):
            ent = world.entities[eid]
            if eid == agent.eid or not ent.alive or ent.body is None:
                continue
            if not ent.record.consumable:
                continue
            d = ent.body.center - agent.body.center
            reach = ent.body.radius + agent.body.radius
            if float(d @ d) < reach * reach:
                outcome = on_agent_contact(ent)
                reward_delta += outcome.reward
                if outcome.consume:
                    world.consume(eid)
                if outcome.ends:
                    endings.append((eid, outcome.reason))

        # Button presses: a blocking contact on the blue face this step.
        for other_eid, _normal in events.blocking_contacts.get(agent.eid, ()):
            ent = world.entities.get(other_eid)
            if ent is None or ent.kind is not EntityKind.SPAWNER_BUTTON:
                continue
            if is_button_face_contact(ent, agent.body.center):
                req = press_button(ent, self.rng)
                if req is not None:
                    world.spawn_goal(req)

        hot = False
        death = False
        for zone in world.zones_overlapping_agent():
            if zone.kind is EntityKind.DEATH_ZONE:
                if not death:  # one terminal charge even if zones overlap
                    reward_delta += on_agent_contact(zone).reward
                death = True
            else:
                hot = True

        if self.arena.t > 0 and not frozen:
            factor = HOT_ZONE_DECREMENT_FACTOR if hot else 1.0
            reward_delta -= factor / self.arena.t

        self.step_count += 1
        self.reward += reward_delta
        self.health = min(100.0, max(0.0, self.health + HEALTH_PER_REWARD * reward_delta))

        if death:
            self._finish("death_zone")
        elif endings:
            self._finish(min(endings)[1])
        elif self.arena.t > 0 and self.step_count >= self.arena.t:
            self._finish("timeout")
        elif self.health <= 0.0:
            self._finish("health_zero")

        body = agent.body
        self.log.rows.append(
            TrajectoryRow(
                step=self.step_count,
                x=float(body.center[0]),
                y=float(body.center[1]) - body.radius,
                z=float(body.center[2]),
                yaw=float(body.yaw),
                action=action.name,
                reward_delta=reward_delta,
                reward=self.reward,
                health=self.health,
            )
        )
        return StepResult(
            observation=self.observe(),
            reward_delta=reward_delta,
            done=self.done,
            health=self.health,
            position=np.array(
                [body.center[0], body.center[1] - body.radius, body.center[2]]
            ),
            velocity=body.velocity.copy(),
            step=self.step_count,
            reward=self.reward,
            done_reason=self.done_reason,
            lights_on=self.lights_on,
        )

    def skip(self) -> None:
        """End the episode at the user's request (play-mode escape hatch)."""
        if not self.done:
            self._finish("user_skip")

    def _finish(self, reason: str) -> None:
        self.done = True
        self.done_reason = reason

    def finish_episode(self) -> Summary:
        if not self.done:
            raise RuntimeError("episode is still running")
        return Summary(
            final_reward=self.reward,
            passed=self.reward >= self.arena.pass_mark,
            steps=self.step_count,
            done_reason=self.done_reason,
            trajectory=self.log,
        )


def replay(
    arena: ArenaSpec, log: TrajectoryLog, params: PhysicsParams | None = None
) -> TrajectoryLog:
    """Re-simulate a recorded episode; the result should match bitwise."""
    ep = Episode(
        arena,
        log.seed,
        obs_spec=ObsSpec(rays=None, camera=None, vector=False),
        arena_index=log.arena_index,
        params=params,
    )
    for action in log.actions():
        ep.step(action)
        if ep.done:
            break
    return ep.log
