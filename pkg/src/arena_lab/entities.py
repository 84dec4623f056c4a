"""Entity ontology: kinds, canonical properties, and per-step behaviour.

Each entity couples a collider record (geometry), an optional dynamic body
(physics), and semantic state: a signed valence (`value`), an optional
valence schedule (decay/ripen/grow/shrink), dispenser state (trees, the two
hatch dispensers, buttons), or sign-board content.

Valence convention: positive goals carry value = +size, BadGoal carries
value = -size; touching a goal adds its current value to the reward and
consumes it.  DeathZone contributes a flat -1 and ends the episode; HotZone
has no contact reward of its own but multiplies the per-step time decrement
by 10 while overlapped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import (
    BoxPart,
    BoxShape,
    ColliderRecord,
    SphereShape,
    WedgeShape,
    roll_matrix,
    yaw_matrix,
    facing,
)
from .physics import Body


class EntityKind(str, Enum):
    AGENT = "Agent"
    WALL = "Wall"
    WALL_TRANSPARENT = "WallTransparent"
    RAMP = "Ramp"
    CYLINDER_TUNNEL = "CylinderTunnel"
    CYLINDER_TUNNEL_TRANSPARENT = "CylinderTunnelTransparent"
    LIGHT_BLOCK = "LightBlock"
    HEAVY_BLOCK = "HeavyBlock"
    U_BLOCK = "UBlock"
    L_BLOCK = "LBlock"
    J_BLOCK = "JBlock"
    GOOD_GOAL = "GoodGoal"
    GOOD_GOAL_BOUNCE = "GoodGoalBounce"
    GOOD_GOAL_MULTI = "GoodGoalMulti"
    GOOD_GOAL_MULTI_BOUNCE = "GoodGoalMultiBounce"
    BAD_GOAL = "BadGoal"
    BAD_GOAL_BOUNCE = "BadGoalBounce"
    DECAY_GOAL = "DecayGoal"
    RIPEN_GOAL = "RipenGoal"
    GROW_GOAL = "GrowGoal"
    SHRINK_GOAL = "ShrinkGoal"
    HOT_ZONE = "HotZone"
    DEATH_ZONE = "DeathZone"
    SPAWNER_TREE = "SpawnerTree"
    SPAWNER_DISPENSER_TALL = "SpawnerDispenserTall"
    SPAWNER_DISPENSER_SHORT = "SpawnerDispenserShort"
    SPAWNER_BUTTON = "SpawnerButton"
    SIGN_BOARD = "SignBoard"


# --- classification tables --------------------------------------------------

# Raycast observation rows: 0 arena boundary, 1 immovable obstacles,
# 2 movable blocks (and the agent itself, never visible to its own rays),
# 3 episode-ending positive goals, 4 non-ending positive goals,
# 5 negatively valenced entities and zones, 6 goal dispensers, 7 buttons.
RAYCAST_CATEGORY: dict[EntityKind, int] = {
    EntityKind.AGENT: 2,
    EntityKind.WALL: 1,
    EntityKind.WALL_TRANSPARENT: 1,
    EntityKind.RAMP: 1,
    EntityKind.CYLINDER_TUNNEL: 1,
    EntityKind.CYLINDER_TUNNEL_TRANSPARENT: 1,
    EntityKind.SIGN_BOARD: 1,
    EntityKind.LIGHT_BLOCK: 2,
    EntityKind.HEAVY_BLOCK: 2,
    EntityKind.U_BLOCK: 2,
    EntityKind.L_BLOCK: 2,
    EntityKind.J_BLOCK: 2,
    EntityKind.GOOD_GOAL: 3,
    EntityKind.GOOD_GOAL_BOUNCE: 3,
    EntityKind.GOOD_GOAL_MULTI: 4,
    EntityKind.GOOD_GOAL_MULTI_BOUNCE: 4,
    EntityKind.DECAY_GOAL: 4,
    EntityKind.RIPEN_GOAL: 4,
    EntityKind.GROW_GOAL: 4,
    EntityKind.SHRINK_GOAL: 4,
    EntityKind.BAD_GOAL: 5,
    EntityKind.BAD_GOAL_BOUNCE: 5,
    EntityKind.DEATH_ZONE: 5,
    EntityKind.HOT_ZONE: 5,
    EntityKind.SPAWNER_TREE: 6,
    EntityKind.SPAWNER_DISPENSER_TALL: 6,
    EntityKind.SPAWNER_DISPENSER_SHORT: 6,
    EntityKind.SPAWNER_BUTTON: 7,
}

GOAL_KINDS = {
    EntityKind.GOOD_GOAL,
    EntityKind.GOOD_GOAL_BOUNCE,
    EntityKind.GOOD_GOAL_MULTI,
    EntityKind.GOOD_GOAL_MULTI_BOUNCE,
    EntityKind.BAD_GOAL,
    EntityKind.BAD_GOAL_BOUNCE,
    EntityKind.DECAY_GOAL,
    EntityKind.RIPEN_GOAL,
    EntityKind.GROW_GOAL,
    EntityKind.SHRINK_GOAL,
}
ENDING_GOAL_KINDS = {
    EntityKind.GOOD_GOAL,
    EntityKind.GOOD_GOAL_BOUNCE,
    EntityKind.BAD_GOAL,
    EntityKind.BAD_GOAL_BOUNCE,
}
BAD_GOAL_KINDS = {EntityKind.BAD_GOAL, EntityKind.BAD_GOAL_BOUNCE}
BOUNCE_KINDS = {
    EntityKind.GOOD_GOAL_BOUNCE,
    EntityKind.GOOD_GOAL_MULTI_BOUNCE,
    EntityKind.BAD_GOAL_BOUNCE,
}
SCHEDULE_KINDS = {
    EntityKind.DECAY_GOAL,
    EntityKind.RIPEN_GOAL,
    EntityKind.GROW_GOAL,
    EntityKind.SHRINK_GOAL,
}
SIZE_TRACKING_KINDS = {EntityKind.GROW_GOAL, EntityKind.SHRINK_GOAL}
ZONE_KINDS = {EntityKind.HOT_ZONE, EntityKind.DEATH_ZONE}
BLOCK_KINDS = {
    EntityKind.LIGHT_BLOCK,
    EntityKind.HEAVY_BLOCK,
    EntityKind.U_BLOCK,
    EntityKind.L_BLOCK,
    EntityKind.J_BLOCK,
}
DISPENSER_KINDS = {
    EntityKind.SPAWNER_TREE,
    EntityKind.SPAWNER_DISPENSER_TALL,
    EntityKind.SPAWNER_DISPENSER_SHORT,
}
TRANSPARENT_KINDS = {
    EntityKind.WALL_TRANSPARENT,
    EntityKind.CYLINDER_TUNNEL_TRANSPARENT,
}

MASS: dict[EntityKind, float] = {
    EntityKind.AGENT: 1.0,
    EntityKind.LIGHT_BLOCK: 1.0,
    EntityKind.HEAVY_BLOCK: 2.0,
    EntityKind.U_BLOCK: 1.5,
    EntityKind.L_BLOCK: 1.5,
    EntityKind.J_BLOCK: 1.5,
}

# Kinds whose size comes from the config; everything else is canonical.
RESIZABLE_KINDS = (
    {
        EntityKind.WALL,
        EntityKind.WALL_TRANSPARENT,
        EntityKind.RAMP,
        EntityKind.CYLINDER_TUNNEL,
        EntityKind.CYLINDER_TUNNEL_TRANSPARENT,
        EntityKind.HOT_ZONE,
        EntityKind.DEATH_ZONE,
    }
    | BLOCK_KINDS
    | GOAL_KINDS
)

FIXED_SIZE: dict[EntityKind, tuple[float, float, float]] = {
    EntityKind.AGENT: (1.0, 1.0, 1.0),
    EntityKind.SPAWNER_TREE: (1.0, 4.0, 1.0),  # trunk; branches at the top
    EntityKind.SPAWNER_DISPENSER_TALL: (1.5, 3.0, 1.5),
    EntityKind.SPAWNER_DISPENSER_SHORT: (1.5, 1.5, 1.5),
    EntityKind.SPAWNER_BUTTON: (1.0, 1.5, 1.0),
    EntityKind.SIGN_BOARD: (2.0, 1.5, 0.25),
}

DEFAULT_SIZE: dict[EntityKind, tuple[float, float, float]] = {
    EntityKind.CYLINDER_TUNNEL: (4.0, 3.0, 4.0),
    EntityKind.CYLINDER_TUNNEL_TRANSPARENT: (4.0, 3.0, 4.0),
}

# Kinds accepting a configured colour.  Sign boards use it for the glyph.
COLORABLE_KINDS = {
    EntityKind.WALL,
    EntityKind.RAMP,
    EntityKind.CYLINDER_TUNNEL,
    EntityKind.SPAWNER_DISPENSER_TALL,
    EntityKind.SPAWNER_DISPENSER_SHORT,
    EntityKind.SIGN_BOARD,
}

BASE_COLOR: dict[EntityKind, tuple[float, float, float]] = {
    EntityKind.WALL: (150, 150, 150),
    EntityKind.WALL_TRANSPARENT: (190, 210, 225),
    EntityKind.RAMP: (190, 120, 150),
    EntityKind.CYLINDER_TUNNEL: (140, 130, 120),
    EntityKind.CYLINDER_TUNNEL_TRANSPARENT: (190, 210, 225),
    EntityKind.LIGHT_BLOCK: (130, 130, 130),
    EntityKind.HEAVY_BLOCK: (90, 90, 90),
    EntityKind.U_BLOCK: (115, 105, 140),
    EntityKind.L_BLOCK: (115, 105, 140),
    EntityKind.J_BLOCK: (115, 105, 140),
    EntityKind.GOOD_GOAL: (25, 170, 35),
    EntityKind.GOOD_GOAL_BOUNCE: (25, 170, 35),
    EntityKind.GOOD_GOAL_MULTI: (225, 200, 35),
    EntityKind.GOOD_GOAL_MULTI_BOUNCE: (225, 200, 35),
    EntityKind.BAD_GOAL: (200, 40, 30),
    EntityKind.BAD_GOAL_BOUNCE: (200, 40, 30),
    EntityKind.HOT_ZONE: (240, 140, 40),
    EntityKind.DEATH_ZONE: (210, 40, 40),
    EntityKind.SPAWNER_TREE: (110, 80, 50),
    EntityKind.SPAWNER_DISPENSER_TALL: (100, 110, 120),
    EntityKind.SPAWNER_DISPENSER_SHORT: (100, 110, 120),
    EntityKind.SPAWNER_BUTTON: (210, 190, 160),
    EntityKind.SIGN_BOARD: (70, 65, 60),
    EntityKind.AGENT: (150, 110, 70),
}

# Valence-scheduled goals interpolate grey (empty) -> purple (full).
SCHEDULE_GREY = np.array([128.0, 128.0, 128.0])
SCHEDULE_PURPLE = np.array([150.0, 60.0, 180.0])

ZONE_ALPHA = 0.35
TRANSPARENT_ALPHA = 0.3

AGENT_SKINS = ("hedgehog", "panda", "pig")
SKIN_COLOR = {
    "hedgehog": (150, 110, 70),
    "panda": (235, 235, 235),
    "pig": (235, 170, 180),
}

BOUNCE_SPEED = 1.0
TREE_BRANCH_RADIUS = 2.0
TREE_BRANCH_HEIGHT = 4.0
BUTTON_FACE_COLOR = (40, 90, 220)
BUTTON_FACE_HALF_ANGLE = 60.0  # contact within this of the facing axis = press
ARCH_SEGMENTS = 8  # 2 near-vertical side chords + 6 arch chords
ARCH_THICKNESS = 0.15

# Default valence schedules (overridable per item in the config DSL).
DEFAULT_SCHEDULE = {
    EntityKind.DECAY_GOAL: (1.0, 0.0, 0, 0.005),
    EntityKind.RIPEN_GOAL: (0.0, 1.0, 0, 0.005),
    EntityKind.GROW_GOAL: (0.5, 2.0, 0, 0.005),
    EntityKind.SHRINK_GOAL: (2.0, 0.5, 0, 0.005),
}

MIN_TRACKED_DIAMETER = 0.05  # grow/shrink collider floor


@dataclass
class ValenceSchedule:
    initial: float
    final: float
    delay: int
    rate: float  # magnitude per step toward final (sign ignored)
    elapsed: int = 0

    def full_value(self) -> float:
        return max(abs(self.initial), abs(self.final))

    def low_value(self) -> float:
        return min(abs(self.initial), abs(self.final))


@dataclass
class DispenserState:
    remaining: int | None = None  # None = unlimited
    interval: int = 0  # steps between spawns
    countdown: int = 0
    goal_size: float = 1.0
    goal_kind: EntityKind = EntityKind.GOOD_GOAL_MULTI
    # button parameters
    spawn_probability: float = 1.0
    reward_weights: tuple[float, float, float] = (1.0, 0.0, 0.0)
    spawn_position: tuple[float, float, float] | None = None  # base position
    reset_duration: int = 0
    cooldown: int = 0


@dataclass
class SignContent:
    symbol: str | None = None
    grid: np.ndarray | None = None  # (rows, cols, 3) uint8, resolved
    color: tuple[float, float, float] = (240, 240, 240)


@dataclass
class SpawnRequest:
    kind: EntityKind
    base_position: tuple[float, float, float]
    size: float
    source_eid: int


@dataclass
class Entity:
    eid: int
    kind: EntityKind
    base_position: np.ndarray  # (x, bottom y, z) as configured
    yaw: float
    size: np.ndarray  # (3,)
    color: tuple[float, float, float]
    value: float = 0.0  # signed current valence
    schedule: ValenceSchedule | None = None
    dispenser: DispenserState | None = None
    sign: SignContent | None = None
    skin: str | None = None
    record: ColliderRecord | None = None
    body: Body | None = None
    alive: bool = True


# --- shape construction -----------------------------------------------------


def _compound_parts(kind: EntityKind, size: np.ndarray) -> list[BoxPart]:
    sx, sy, sz = (float(v) for v in size)
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    if kind == EntityKind.U_BLOCK:
        return [
            BoxPart(np.array([0.0, 0.0, -3 * sz / 8]), np.array([hx, hy, sz / 8])),
            BoxPart(np.array([-3 * sx / 8, 0.0, sz / 8]), np.array([sx / 8, hy, 3 * sz / 8])),
            BoxPart(np.array([3 * sx / 8, 0.0, sz / 8]), np.array([sx / 8, hy, 3 * sz / 8])),
        ]
    if kind == EntityKind.L_BLOCK:
        return [
            BoxPart(np.array([-3 * sx / 8, 0.0, 0.0]), np.array([sx / 8, hy, hz])),
            BoxPart(np.array([sx / 8, 0.0, -3 * sz / 8]), np.array([3 * sx / 8, hy, sz / 8])),
        ]
    if kind == EntityKind.J_BLOCK:
        return [
            BoxPart(np.array([3 * sx / 8, 0.0, 0.0]), np.array([sx / 8, hy, hz])),
            BoxPart(np.array([-sx / 8, 0.0, -3 * sz / 8]), np.array([3 * sx / 8, hy, sz / 8])),
        ]
    raise ValueError(f"not a compound block kind: {kind}")


def _tunnel_parts(size: np.ndarray) -> list[BoxPart]:
    """Two near-vertical side chords plus a 6-chord arch over a semi-ellipse.

    Offsets are measured from the tunnel's base centre (y = 0 at the floor);
    the opening runs along local z.
    """
    w, h, length = (float(v) for v in size)
    rx, ry = w / 2.0, h
    parts = []
    for k in range(ARCH_SEGMENTS):
        a0 = math.pi * k / ARCH_SEGMENTS
        a1 = math.pi * (k + 1) / ARCH_SEGMENTS
        p0 = np.array([rx * math.cos(a0), ry * math.sin(a0)])
        p1 = np.array([rx * math.cos(a1), ry * math.sin(a1)])
        mid = (p0 + p1) / 2.0
        chord = p1 - p0
        clen = float(np.linalg.norm(chord))
        roll = math.degrees(math.atan2(chord[1], chord[0]))
        parts.append(
            BoxPart(
                np.array([mid[0], mid[1], 0.0]),
                np.array([clen / 2.0, ARCH_THICKNESS / 2.0, length / 2.0]),
                roll_matrix(roll),
            )
        )
    return parts


def entity_shape(kind: EntityKind, size: np.ndarray):
    if kind == EntityKind.AGENT or kind in GOAL_KINDS:
        return SphereShape(float(size[0]) / 2.0)
    if kind == EntityKind.RAMP:
        return WedgeShape(np.asarray(size, dtype=float))
    if kind in (EntityKind.CYLINDER_TUNNEL, EntityKind.CYLINDER_TUNNEL_TRANSPARENT):
        return BoxShape(_tunnel_parts(size))
    if kind in (EntityKind.U_BLOCK, EntityKind.L_BLOCK, EntityKind.J_BLOCK):
        return BoxShape(_compound_parts(kind, size))
    half = np.asarray(size, dtype=float) / 2.0
    if kind in ZONE_KINDS:
        half = half.copy()
        half[1] = max(half[1], 0.01)  # flat zones keep a sliver so rays can see them
    return BoxShape.single(half)


def record_center(kind: EntityKind, base_position: np.ndarray, size: np.ndarray) -> np.ndarray:
    """Collider reference point from a base (bottom) position."""
    x, y, z = (float(v) for v in base_position)
    if kind == EntityKind.AGENT or kind in GOAL_KINDS:
        return np.array([x, y + float(size[0]) / 2.0, z])
    if kind in (
        EntityKind.RAMP,
        EntityKind.CYLINDER_TUNNEL,
        EntityKind.CYLINDER_TUNNEL_TRANSPARENT,
    ):
        return np.array([x, y, z])  # wedge/tunnel reference is the base centre
    return np.array([x, y + float(size[1]) / 2.0, z])


def build_entity(
    eid: int,
    kind: EntityKind,
    base_position,
    yaw: float,
    size,
    color: tuple[float, float, float] | None = None,
    schedule: ValenceSchedule | None = None,
    dispenser: DispenserState | None = None,
    sign: SignContent | None = None,
    skin: str | None = None,
) -> Entity:
    """Assemble an entity with its collider record and (if movable) body."""
    base_position = np.asarray(base_position, dtype=float)
    size = np.asarray(size, dtype=float)
    kind = EntityKind(kind)

    if schedule is None and kind in SCHEDULE_KINDS:
        ini, fin, delay, rate = DEFAULT_SCHEDULE[kind]
        schedule = ValenceSchedule(ini, fin, delay, rate)
    if kind in SIZE_TRACKING_KINDS and schedule is not None:
        d = max(abs(schedule.initial), MIN_TRACKED_DIAMETER)
        size = np.array([d, d, d])

    if kind in SCHEDULE_KINDS:
        value = schedule.initial
    elif kind in BAD_GOAL_KINDS:
        value = -float(size[0])
    elif kind in GOAL_KINDS:
        value = float(size[0])
    else:
        value = 0.0

    if kind == EntityKind.AGENT and skin:
        rgb = SKIN_COLOR.get(skin, BASE_COLOR[kind])
    elif color is not None and kind != EntityKind.SIGN_BOARD:
        rgb = color
    elif kind in SCHEDULE_KINDS:
        rgb = tuple(schedule_color(schedule, value))
    else:
        rgb = BASE_COLOR[kind]

    alpha = 1.0
    if kind in TRANSPARENT_KINDS:
        alpha = TRANSPARENT_ALPHA
    elif kind in ZONE_KINDS:
        alpha = ZONE_ALPHA

    rec = ColliderRecord(
        eid=eid,
        shape=entity_shape(kind, size),
        center=record_center(kind, base_position, size),
        yaw=float(yaw),
        category=RAYCAST_CATEGORY[kind],
        solid=kind not in ZONE_KINDS,
        consumable=kind in GOAL_KINDS,
        movable=kind in MASS or kind in GOAL_KINDS,
        rgb=tuple(float(c) for c in rgb),
        alpha=alpha,
    )

    body = None
    if kind == EntityKind.AGENT or kind in GOAL_KINDS:
        velocity = np.zeros(3)
        if kind in BOUNCE_KINDS:
            velocity = facing(yaw) * BOUNCE_SPEED
        body = Body(
            eid=eid,
            mass=MASS.get(kind, 1.0),
            center=rec.center.copy(),
            velocity=velocity,
            yaw=float(yaw),
            radius=float(size[0]) / 2.0,
            is_agent=(kind == EntityKind.AGENT),
            consumable=(kind in GOAL_KINDS),
        )
    elif kind in BLOCK_KINDS:
        # Compound blocks move as their bounding box; parts stay for rays.
        body = Body(
            eid=eid,
            mass=MASS[kind],
            center=rec.center.copy(),
            velocity=np.zeros(3),
            yaw=float(yaw),
            half=np.asarray(size, dtype=float) / 2.0,
        )

    ent = Entity(
        eid=eid,
        kind=kind,
        base_position=base_position,
        yaw=float(yaw),
        size=size,
        color=tuple(float(c) for c in rgb),
        value=value,
        schedule=schedule,
        dispenser=dispenser,
        sign=sign,
        skin=skin,
        record=rec,
        body=body,
    )
    return ent


# --- schedules and colours --------------------------------------------------


def schedule_color(schedule: ValenceSchedule, value: float) -> np.ndarray:
    """Grey (empty) to purple (full) interpolation by current value."""
    lo, hi = schedule.low_value(), schedule.full_value()
    f = 0.0 if hi <= lo else (abs(value) - lo) / (hi - lo)
    f = min(max(f, 0.0), 1.0)
    return SCHEDULE_GREY + (SCHEDULE_PURPLE - SCHEDULE_GREY) * f


def tick_schedule(entity: Entity, overlap_check=None) -> None:
    """Advance a valence schedule one step (after its delay elapses).

    overlap_check(center, radius, exclude_eid) -> bool reports whether an
    enlarged collider would intersect a solid; growth is skipped while it
    would (shrinking is never blocked).
    """
    s = entity.schedule
    s.elapsed += 1
    if s.elapsed <= s.delay or s.initial == s.final:
        return
    direction = 1.0 if s.final > s.initial else -1.0
    proposed = entity.value + direction * abs(s.rate)
    if direction > 0:
        proposed = min(proposed, s.final)
    else:
        proposed = max(proposed, s.final)
    if entity.kind in SIZE_TRACKING_KINDS:
        new_d = max(abs(proposed), MIN_TRACKED_DIAMETER)
        if proposed > entity.value and overlap_check is not None:
            center = entity.record.center.copy()
            center[1] = entity.base_position[1] + new_d / 2.0
            if overlap_check(center, new_d / 2.0, entity.eid):
                return  # growth blocked by surrounding solids this step
        entity.value = proposed
        entity.size = np.array([new_d, new_d, new_d])
        entity.record.shape.radius = new_d / 2.0
        center = entity.record.center
        center[1] = entity.base_position[1] + new_d / 2.0
        if entity.body is not None:
            entity.body.radius = new_d / 2.0
            entity.body.center[1] = center[1]
            entity.body.sleeping = False  # new radius voids any rest state
    else:
        entity.value = proposed
    entity.record.rgb = tuple(schedule_color(s, entity.value))
    entity.color = entity.record.rgb


# --- dispensers -------------------------------------------------------------


def tick_dispenser(entity: Entity, rng: np.random.Generator) -> list[SpawnRequest]:
    """Advance tree/hatch dispenser countdowns; emit due spawn requests."""
    d = entity.dispenser
    out: list[SpawnRequest] = []
    if entity.kind == EntityKind.SPAWNER_BUTTON:
        if d.cooldown > 0:
            d.cooldown -= 1
        return out
    if d.remaining is not None and d.remaining <= 0:
        return out
    d.countdown -= 1
    if d.countdown > 0:
        return out
    d.countdown = max(d.interval, 1)
    if d.remaining is not None:
        d.remaining -= 1
    r = d.goal_size / 2.0
    if entity.kind == EntityKind.SPAWNER_TREE:
        # Uniform over the branch disc, then the goal falls to the floor.
        rad = TREE_BRANCH_RADIUS * math.sqrt(float(rng.random()))
        ang = 2.0 * math.pi * float(rng.random())
        pos = (
            float(entity.base_position[0]) + rad * math.cos(ang),
            float(entity.base_position[1]) + TREE_BRANCH_HEIGHT,
            float(entity.base_position[2]) + rad * math.sin(ang),
        )
    else:
        # Hatch dispensers emit at floor level just in front of the body.
        f = facing(entity.yaw)
        gap = float(entity.size[2]) / 2.0 + r + 0.05
        pos = (
            float(entity.base_position[0]) + f[0] * gap,
            float(entity.base_position[1]),
            float(entity.base_position[2]) + f[2] * gap,
        )
    out.append(SpawnRequest(d.goal_kind, pos, d.goal_size, entity.eid))
    return out


BUTTON_REWARD_KINDS = (
    EntityKind.GOOD_GOAL,
    EntityKind.GOOD_GOAL_MULTI,
    EntityKind.BAD_GOAL,
)


def press_button(entity: Entity, rng: np.random.Generator) -> SpawnRequest | None:
    """Handle one press: roll spawn probability, weighted goal choice.

    A press off cooldown always rearms the cooldown, whether or not the
    probability roll produces a goal.  Draw order: probability roll, then
    (if successful) one uniform draw mapped through the cumulative weights.
    """
    d = entity.dispenser
    if d.cooldown > 0:
        return None
    d.cooldown = max(d.reset_duration, 1)
    if float(rng.random()) >= d.spawn_probability:
        return None
    w = np.asarray(d.reward_weights, dtype=float)
    total = float(w.sum())
    if total <= 0.0:
        return None
    u = float(rng.random()) * total
    acc = 0.0
    kind = BUTTON_REWARD_KINDS[-1]
    for k, wk in zip(BUTTON_REWARD_KINDS, w):
        acc += float(wk)
        if u < acc:
            kind = k
            break
    return SpawnRequest(kind, tuple(d.spawn_position), d.goal_size, entity.eid)


def is_button_face_contact(entity: Entity, agent_center: np.ndarray) -> bool:
    """True when the agent touches the button on its (blue) facing side."""
    f = facing(entity.yaw)
    to_agent = np.array(
        [
            float(agent_center[0]) - float(entity.base_position[0]),
            0.0,
            float(agent_center[2]) - float(entity.base_position[2]),
        ]
    )
    n = float(np.linalg.norm(to_agent))
    if n < 1e-9:
        return False
    cosang = float(to_agent @ f) / n
    return cosang >= math.cos(math.radians(BUTTON_FACE_HALF_ANGLE))


# --- contact outcomes -------------------------------------------------------


@dataclass
class ContactOutcome:
    reward: float
    ends: bool
    consume: bool
    reason: str | None


def on_agent_contact(entity: Entity) -> ContactOutcome:
    """Reward/termination outcome of the agent touching this entity."""
    if entity.kind in GOAL_KINDS:
        ends = entity.kind in ENDING_GOAL_KINDS
        reason = None
        if ends:
            reason = "bad_goal" if entity.kind in BAD_GOAL_KINDS else "goal"
        return ContactOutcome(entity.value, ends, True, reason)
    if entity.kind == EntityKind.DEATH_ZONE:
        return ContactOutcome(-1.0, True, False, "death_zone")
    return ContactOutcome(0.0, False, False, None)


# --- sign-board glyphs ------------------------------------------------------

# 7x7 preset glyph bitmaps ('#' = glyph colour, '.' = board face).
_GLYPHS = {
    "left-arrow": [
        ".......",
        "..#....",
        ".##....",
        "#######",
        ".##....",
        "..#....",
        ".......",
    ],
    "right-arrow": [
        ".......",
        "....#..",
        "....##.",
        "#######",
        "....##.",
        "....#..",
        ".......",
    ],
    "up-arrow": [
        "...#...",
        "..###..",
        ".#.#.#.",
        "...#...",
        "...#...",
        "...#...",
        "...#...",
    ],
    "down-arrow": [
        "...#...",
        "...#...",
        "...#...",
        "...#...",
        ".#.#.#.",
        "..###..",
        "...#...",
    ],
    "u-turn-arrow": [
        ".##....",
        "#..#...",
        "#...#..",
        "....#..",
        "..#.#..",
        ".##.#..",
        "#####..",
    ],
    "letter-a": [
        "..###..",
        ".#...#.",
        "#.....#",
        "#######",
        "#.....#",
        "#.....#",
        "#.....#",
    ],
    "letter-b": [
        "#####..",
        "#....#.",
        "#....#.",
        "#####..",
        "#....#.",
        "#....#.",
        "#####..",
    ],
    "letter-c": [
        ".#####.",
        "#.....#",
        "#......",
        "#......",
        "#......",
        "#.....#",
        ".#####.",
    ],
    "square": [
        "#######",
        "#.....#",
        "#.....#",
        "#.....#",
        "#.....#",
        "#.....#",
        "#######",
    ],
    "triangle": [
        "...#...",
        "...#...",
        "..#.#..",
        "..#.#..",
        ".#...#.",
        ".#...#.",
        "#######",
    ],
    "circle": [
        "..###..",
        ".#...#.",
        "#.....#",
        "#.....#",
        "#.....#",
        ".#...#.",
        "..###..",
    ],
    "star": [
        "...#...",
        "...#...",
        "#######",
        ".#####.",
        "..###..",
        ".#...#.",
        "#.....#",
    ],
    "tick": [
        ".......",
        "......#",
        ".....#.",
        "....#..",
        "#..#...",
        ".##....",
        ".......",
    ],
    "cross": [
        "#.....#",
        ".#...#.",
        "..#.#..",
        "...#...",
        "..#.#..",
        ".#...#.",
        "#.....#",
    ],
}

SIGN_SYMBOLS = tuple(sorted(_GLYPHS))
SIGN_BOARD_FACE = np.array([235.0, 235.0, 225.0])


def sign_pixels(sign: SignContent) -> np.ndarray:
    """(rows, cols, 3) uint8 image shown on the board's facing side."""
    if sign.grid is not None:
        return sign.grid
    rows = _GLYPHS[sign.symbol]
    img = np.empty((len(rows), len(rows[0]), 3), dtype=np.uint8)
    glyph = np.array(sign.color, dtype=float)
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            img[i, j] = (glyph if ch == "#" else SIGN_BOARD_FACE).astype(np.uint8)
    return img


def resolve_sign_grid(cells, rng: np.random.Generator) -> np.ndarray:
    """Resolve a pixel-grid spec (RGB triples or "random") to a uint8 image.

    Random cells draw three channel values each, row-major, at build time.
    """
    rows = len(cells)
    cols = len(cells[0])
    img = np.zeros((rows, cols, 3), dtype=np.uint8)
    for i in range(rows):
        for j in range(cols):
            cell = cells[i][j]
            if isinstance(cell, str):
                img[i, j] = rng.integers(0, 256, size=3, dtype=np.int64).astype(np.uint8)
            else:
                img[i, j] = np.array(cell, dtype=np.uint8)
    return img
