"""Arena instantiation and live world state.

The arena is a 40x40 floor at y=0 enclosed by four boundary walls.  Entity
ids are stable: 0 is the (analytic) floor, 1-4 the boundary walls, 5 the
agent, and items take 6, 7, ... in file order; goals spawned mid-episode
continue the sequence.  The agent is always placed first, so its random
draws come before any item's, wherever it appears in the file.

Placement resolves, per instance and in this order: rotation (if -1), then
position x, y, z (each -1 sampled uniformly inside the bounds minus the
footprint half-extent; y over [0, wall height - height]).  Instances with
any random component are rejection-sampled against existing solids, up to
100 attempts; fully fixed instances that overlap a solid are an error
naming both entities.  Kind-specific draws (a "random" skin, "random" sign
cells) happen once, after placement succeeds.
"""

from __future__ import annotations

import math

import numpy as np

from .config_dsl import ARENA_SIZE, ARENA_WALL_HEIGHT, ArenaSpec, pick
from .entities import (
    AGENT_SKINS,
    DEFAULT_SCHEDULE,
    DEFAULT_SIZE,
    DISPENSER_KINDS,
    FIXED_SIZE,
    MIN_TRACKED_DIAMETER,
    SCHEDULE_KINDS,
    SIZE_TRACKING_KINDS,
    SKIN_COLOR,
    ZONE_KINDS,
    DispenserState,
    Entity,
    EntityKind,
    SignContent,
    SpawnRequest,
    ValenceSchedule,
    build_entity,
    resolve_sign_grid,
    tick_dispenser,
    tick_schedule,
)
from .geometry import BoxShape, ColliderRecord, ColliderSet, yaw_matrix

FLOOR_EID = 0
BOUNDARY_EIDS = (1, 2, 3, 4)
AGENT_EID = 5
FIRST_ITEM_EID = 6

BOUNDARY_THICKNESS = 1.0
FENCE_RENDER_HEIGHT = 2.0  # visible fence band; the wall blocks to full height
FENCE_COLOR = (140.0, 150.0, 160.0)
MAX_PLACEMENT_ATTEMPTS = 100
PLACEMENT_TOLERANCE = 1e-6  # abutting faces may read as ~1e-15 deep after rotation
ZONE_TRIGGER_BAND = 0.25  # vertical reach of a floor zone above/below its extent


class InstantiationError(ValueError):
    pass


def _footprint_half(kind: EntityKind, size: np.ndarray, yaw: float) -> tuple[float, float]:
    """Axis-aligned half extents of the yawed footprint, for bounds sampling."""
    if kind == EntityKind.AGENT or kind in SCHEDULE_KINDS or size[0] == size[2]:
        hx = hz = float(max(size[0], size[2])) / 2.0
        if kind == EntityKind.AGENT:
            hx = hz = 0.5
        return hx, hz
    c, s = abs(math.cos(math.radians(yaw))), abs(math.sin(math.radians(yaw)))
    hx, hz = float(size[0]) / 2.0, float(size[2]) / 2.0
    return c * hx + s * hz, s * hx + c * hz


class World:
    """Entities, their colliders, and the shared episode RNG."""

    def __init__(self, arena: ArenaSpec, rng: np.random.Generator):
        self.arena = arena
        self.rng = rng
        self.colliders = ColliderSet()
        self.entities: dict[int, Entity] = {}
        self.labels: dict[int, str] = {}
        self.agent: Entity | None = None
        self.next_eid = FIRST_ITEM_EID
        self.frozen_delay = 0
        self._add_boundary()

    # -- construction --------------------------------------------------------

    def _add_boundary(self) -> None:
        s, h, th = ARENA_SIZE, ARENA_WALL_HEIGHT / 2.0, BOUNDARY_THICKNESS / 2.0
        long = s / 2.0 + BOUNDARY_THICKNESS
        walls = [
            ((-th, h, s / 2.0), (th, h, long)),
            ((s + th, h, s / 2.0), (th, h, long)),
            ((s / 2.0, h, -th), (long, h, th)),
            ((s / 2.0, h, s + th), (long, h, th)),
        ]
        for eid, (center, half) in zip(BOUNDARY_EIDS, walls):
            rec = ColliderRecord(
                eid=eid,
                shape=BoxShape.single(np.array(half)),
                center=np.array(center, dtype=float),
                yaw=0.0,
                category=0,
                rgb=FENCE_COLOR,
                fence_height=FENCE_RENDER_HEIGHT,
            )
            self.colliders.add(rec)
            self.labels[eid] = "boundary"

    def _resolved_size(self, item, index: int) -> np.ndarray:
        kind = item.kind
        if kind in FIXED_SIZE:
            return np.array(FIXED_SIZE[kind], dtype=float)
        if item.sizes is not None:
            return np.array(pick(item.sizes, index), dtype=float)
        if kind in SCHEDULE_KINDS:
            sched = self._schedule_for(item, index)
            if kind in SIZE_TRACKING_KINDS:
                d = max(abs(sched.initial), MIN_TRACKED_DIAMETER)
            else:
                d = max(abs(sched.initial), abs(sched.final))
            return np.array([d, d, d])
        return np.array(DEFAULT_SIZE.get(kind, (1.0, 1.0, 1.0)), dtype=float)

    def _schedule_for(self, item, index: int) -> ValenceSchedule:
        ini, fin, delay, rate = DEFAULT_SCHEDULE[item.kind]
        if item.initial_values is not None:
            ini = pick(item.initial_values, index)
        if item.final_values is not None:
            fin = pick(item.final_values, index)
        if item.delays is not None:
            delay = int(pick(item.delays, index))
        if item.change_rates is not None:
            rate = pick(item.change_rates, index)
        return ValenceSchedule(float(ini), float(fin), delay, float(rate))

    def _dispenser_for(self, item, index: int, size: np.ndarray) -> DispenserState | None:
        kind = item.kind
        # On spawner items the `sizes` attribute names the spawned goal size.
        goal_size = 1.0
        if item.sizes is not None:
            goal_size = float(pick(item.sizes, index)[0])
        if kind in DISPENSER_KINDS:
            remaining = -1.0
            if item.spawn_counts is not None:
                remaining = pick(item.spawn_counts, index)
            interval = 100
            if item.spawn_intervals is not None:
                interval = int(pick(item.spawn_intervals, index))
            return DispenserState(
                remaining=None if remaining < 0 else int(remaining),
                interval=interval,
                countdown=interval,
                goal_size=goal_size,
            )
        if kind is EntityKind.SPAWNER_BUTTON:
            prob = 1.0
            if item.spawn_probabilities is not None:
                prob = float(pick(item.spawn_probabilities, index))
            weights = (1.0, 1.0, 1.0)
            if item.reward_weights is not None:
                weights = tuple(float(w) for w in pick(item.reward_weights, index))
            spawn_pos = (-1.0, 0.0, -1.0)
            if item.reward_spawn_positions is not None:
                spawn_pos = tuple(float(c) for c in pick(item.reward_spawn_positions, index))
            reset = 0
            if item.reset_durations is not None:
                reset = int(pick(item.reset_durations, index))
            return DispenserState(
                goal_size=goal_size,
                goal_kind=EntityKind.GOOD_GOAL,
                spawn_probability=prob,
                reward_weights=weights,
                spawn_position=spawn_pos,
                reset_duration=reset,
            )
        return None

    def _sample_pose(self, pos, rot, kind, size) -> tuple[np.ndarray, float]:
        yaw = float(rot)
        if yaw == -1.0:
            yaw = float(self.rng.uniform(0.0, 360.0))
        hx, hz = _footprint_half(kind, size, yaw)
        height = float(size[1])
        if kind == EntityKind.AGENT or kind in SCHEDULE_KINDS:
            height = float(size[0]) if kind != EntityKind.AGENT else 1.0
        x, y, z = (float(c) for c in pos)
        if x == -1.0:
            x = float(self.rng.uniform(hx, ARENA_SIZE - hx))
        if y == -1.0:
            top = max(0.0, ARENA_WALL_HEIGHT - height)
            y = float(self.rng.uniform(0.0, top)) if top > 0.0 else 0.0
        if z == -1.0:
            z = float(self.rng.uniform(hz, ARENA_SIZE - hz))
        return np.array([x, y, z]), yaw

    def _try_place(self, item, index: int, eid: int, label: str) -> Entity:
        pos = item.positions[index]
        rot = pick(item.rotations, index)
        size = self._resolved_size(item, index)
        randomized = rot == -1.0 or any(c == -1.0 for c in pos)
        attempts = MAX_PLACEMENT_ATTEMPTS if randomized else 1

        schedule = self._schedule_for(item, index) if item.kind in SCHEDULE_KINDS else None
        dispenser = self._dispenser_for(item, index, size)
        color = None
        if item.colors is not None:
            color = tuple(float(c) for c in pick(item.colors, index))

        for _ in range(attempts):
            center_pos, yaw = self._sample_pose(pos, rot, item.kind, size)
            ent = build_entity(
                eid,
                item.kind,
                center_pos,
                yaw,
                size,
                color=color,
                schedule=schedule,
                dispenser=dispenser,
            )
            if item.kind in ZONE_KINDS:
                return ent  # zones overlap freely
            hit = self.colliders.overlaps_record(
                ent.record, include=lambda r: r.solid, min_depth=PLACEMENT_TOLERANCE
            )
            if hit is None:
                return ent
        if not randomized:
            raise InstantiationError(
                f"{label} at {tuple(round(float(c), 3) for c in pos)} overlaps "
                f"{self.labels.get(hit.eid, f'entity {hit.eid}')}"
            )
        raise InstantiationError(
            f"could not place {label} after {MAX_PLACEMENT_ATTEMPTS} attempts"
        )

    def _place_agent(self, item) -> None:
        if item is not None:
            pos = item.positions[0]
            rot = pick(item.rotations, 0)
        else:
            pos, rot = (-1.0, 0.0, -1.0), -1.0
        size = np.array(FIXED_SIZE[EntityKind.AGENT])
        for attempt in range(MAX_PLACEMENT_ATTEMPTS):
            center_pos, yaw = self._sample_pose(pos, rot, EntityKind.AGENT, size)
            ent = build_entity(AGENT_EID, EntityKind.AGENT, center_pos, yaw, size)
            hit = self.colliders.overlaps_record(
                ent.record, include=lambda r: r.solid, min_depth=PLACEMENT_TOLERANCE
            )
            if hit is None:
                break
            if rot != -1.0 and all(c != -1.0 for c in pos):
                raise InstantiationError(
                    f"Agent at {tuple(pos)} overlaps "
                    f"{self.labels.get(hit.eid, f'entity {hit.eid}')}"
                )
        else:
            raise InstantiationError(
                f"could not place Agent after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )
        skin = "hedgehog"
        if item is not None and item.skins is not None:
            skin = pick(item.skins, 0)
        if skin == "random":
            skin = AGENT_SKINS[int(self.rng.integers(len(AGENT_SKINS)))]
        ent.skin = skin
        ent.record.rgb = ent.color = tuple(float(c) for c in SKIN_COLOR[skin])
        if item is not None and item.frozen_delays is not None:
            self.frozen_delay = int(pick(item.frozen_delays, 0))
        self.agent = ent
        self._register(ent, "Agent")

    def _register(self, ent: Entity, label: str) -> None:
        self.entities[ent.eid] = ent
        self.labels[ent.eid] = label
        self.colliders.add(ent.record)
        self._wake_touching(ent.record)

    def _wake_touching(self, rec: ColliderRecord) -> None:
        """Resting bodies a new collider may spawn against must re-verify
        their support (a falling spawn that lands on one wakes it through
        the contact itself, so only spawn-time overlap needs checking)."""
        shape = rec.shape
        if isinstance(shape, BoxShape):
            reach = max(
                float(np.linalg.norm(p.offset) + np.linalg.norm(p.half)) for p in shape.parts
            )
        else:
            reach = getattr(shape, "radius", None)
            if reach is None:
                reach = float(np.linalg.norm(shape.size))
        for ent in self.entities.values():
            body = ent.body
            if body is None or not body.sleeping:
                continue
            br = body.radius if body.radius is not None else float(np.linalg.norm(body.half))
            if float(np.linalg.norm(rec.center - body.center)) <= reach + br + 1e-6:
                body.sleeping = False

    def _attach_sign(self, ent: Entity, item, index: int) -> None:
        symbol = "circle"
        if item.symbols is not None:
            symbol = pick(item.symbols, index)
        color = (20.0, 20.0, 20.0)  # glyph ink; the board frame keeps its own color
        if item.colors is not None:
            color = tuple(float(c) for c in pick(item.colors, index))
        if isinstance(symbol, str):
            ent.sign = SignContent(symbol=symbol, color=color)
        else:
            grid = resolve_sign_grid(symbol, self.rng)
            ent.sign = SignContent(grid=grid, color=color)

    # -- live-world operations ----------------------------------------------

    def bodies(self) -> dict[int, object]:
        return {
            eid: e.body for eid, e in sorted(self.entities.items()) if e.alive and e.body is not None
        }

    def solid_sphere_overlap(self, center, radius: float, exclude_eid: int) -> bool:
        contacts = self.colliders.sphere_contacts(
            center, radius, include=lambda r: r.solid and r.eid != exclude_eid
        )
        return bool(contacts)

    def tick_entities(self) -> None:
        """Advance schedules and dispensers one step, in ascending eid order."""
        requests: list[SpawnRequest] = []
        for eid in sorted(self.entities):
            ent = self.entities[eid]
            if not ent.alive:
                continue
            if ent.schedule is not None:
                tick_schedule(ent, overlap_check=self._grow_blocked)
                if ent.kind in SIZE_TRACKING_KINDS:
                    # The tick edits radius and centre in place.
                    self.colliders.refresh_record(eid)
            if ent.dispenser is not None:
                requests.extend(tick_dispenser(ent, self.rng))
        for req in requests:
            self.spawn_goal(req)

    def _grow_blocked(self, center, radius: float, eid: int) -> bool:
        return self.solid_sphere_overlap(center, radius, eid)

    def spawn_goal(self, req: SpawnRequest) -> Entity | None:
        """Create a goal from a spawn request; None if the spot is blocked.

        Position components of -1 are drawn uniformly inside the arena (y
        falls to the floor).  Only static solids block a spawn — the source
        dispenser is exempt (tree drops may graze the trunk) and overlaps
        with movable bodies are left for the physics step to separate.
        """
        r = req.size / 2.0
        x, y, z = (float(c) for c in req.base_position)
        randomized = x == -1.0 or z == -1.0
        attempts = MAX_PLACEMENT_ATTEMPTS if randomized else 1

        def blocks(rec) -> bool:
            return rec.solid and not rec.movable and rec.eid != req.source_eid

        for _ in range(attempts):
            px = float(self.rng.uniform(r, ARENA_SIZE - r)) if x == -1.0 else x
            pz = float(self.rng.uniform(r, ARENA_SIZE - r)) if z == -1.0 else z
            py = 0.0 if y == -1.0 else y
            center = np.array([px, py + r, pz])
            if not self.colliders.sphere_contacts(center, r, include=blocks):
                ent = build_entity(self.next_eid, req.kind, [px, py, pz], 0.0, [req.size] * 3)
                self.next_eid += 1
                self._register(ent, f"{req.kind.value}(spawned)")
                return ent
        return None

    def consume(self, eid: int) -> None:
        ent = self.entities[eid]
        ent.alive = False
        self.colliders.remove_eid(eid)

    def zones_overlapping_agent(self) -> list[Entity]:
        """Hot/death zones the agent currently stands in.

        Zones are (possibly flat) floor patches, so this is a footprint
        test: the agent's horizontal disc must overlap the zone rectangle
        and the agent's base must sit within a small band of the zone's
        vertical extent -- a tangent sphere still counts, but walking on a
        bridge above a zone does not.
        """
        body = self.agent.body
        base = float(body.center[1]) - body.radius
        out = []
        for ent in self.entities.values():
            if ent.kind not in ZONE_KINDS or not ent.alive:
                continue
            zy = float(ent.base_position[1])
            top = zy + float(ent.size[1])
            if not zy - ZONE_TRIGGER_BAND <= base <= top + ZONE_TRIGGER_BAND:
                continue
            R = yaw_matrix(ent.yaw)
            d = body.center - ent.record.center
            lx = R[0, 0] * d[0] + R[2, 0] * d[2]
            lz = R[0, 2] * d[0] + R[2, 2] * d[2]
            qx = min(max(lx, -ent.size[0] / 2.0), ent.size[0] / 2.0)
            qz = min(max(lz, -ent.size[2] / 2.0), ent.size[2] / 2.0)
            if (lx - qx) ** 2 + (lz - qz) ** 2 < body.radius**2:
                out.append(ent)
        return out


def instantiate_arena(arena: ArenaSpec, seed) -> World:
    """Resolve an arena spec into a live world (agent first, then items)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    world = World(arena, rng)
    agent_items = [it for it in arena.items if it.kind is EntityKind.AGENT]
    world._place_agent(agent_items[0] if agent_items else None)
    for item_idx, item in enumerate(arena.items):
        if item.kind is EntityKind.AGENT:
            continue
        for index in range(item.count):
            label = f"{item.kind.value}[{index}]"
            ent = world._try_place(item, index, world.next_eid, label)
            world.next_eid += 1
            if item.kind is EntityKind.SIGN_BOARD:
                world._attach_sign(ent, item, index)
            world._register(ent, label)
    return world
