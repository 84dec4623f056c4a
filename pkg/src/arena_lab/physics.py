"""Fixed-timestep rigid-body stepping for arena bodies.

One simulation step = one environment step (dt folded into the constants).
Per step, each dynamic body integrates semi-implicit Euler style:

    v_horizontal <- v_horizontal * drag + drive_impulse
    v_vertical   <- v_vertical - gravity

(the drag-then-impulse order gives the documented terminal speed
impulse / (1 - drag) = 1.5 at the defaults), then moves and collides.
Sphere bodies (agent, goals) move with swept collide-and-slide so they can
never cross a thin solid in one step; box bodies (blocks) move discretely
with iterative positional correction, which is safe at their friction-damped
speeds.  Grounded box bodies with no drive lose `friction` speed per step and
stop within a few steps; spheres roll, damped by drag, until rolling
resistance ends the roll at speeds below `rest_speed`.

Colliding pairs exchange an impulse of magnitude min(m_a, m_b) * closing
speed along the contact normal: equal and opposite, so momentum is conserved
exactly, and the velocity granted to the struck body scales with 1/mass
(a mass-2 block picks up half the speed a mass-1 block would).  Immovable
geometry acts as infinite mass: the normal velocity component just vanishes.

Surfaces whose contact normal satisfies n_y >= WALKABLE_NY (gradient <= 4:1)
count as ground: bodies stand on them and slide projection may climb.  Steeper
surfaces act as walls: motion is deflected horizontally only, so no amount of
driving gains height against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import WALKABLE_NY, ColliderSet, FLOOR_EID, SweepHit

_EPS = 1e-12

# Debug escape hatch: False runs every body every step (no rest skipping).
SLEEP_RESTING = True


@dataclass
class PhysicsParams:
    """Tunable constants; defaults are the documented reference profile."""

    gravity: float = 0.02  # units/step^2
    drag: float = 0.9  # horizontal velocity retained per step
    impulse: float = 0.15  # forward/backward drive, units/step
    friction: float = 0.25  # per-step speed loss for grounded undriven boxes
    rest_speed: float = 0.002  # grounded spheres stop rolling below this
    turn_degrees: float = 6.0  # kinematic yaw per turn action
    iterations: int = 4  # positional correction passes
    skin: float = 1e-3  # separation kept after a swept stop
    max_slides: int = 3

    @property
    def terminal_speed(self) -> float:
        """Fixed point of the horizontal update under constant drive."""
        return self.impulse / (1.0 - self.drag)


@dataclass
class Body:
    """Dynamic state for one movable entity."""

    eid: int
    mass: float
    center: np.ndarray
    velocity: np.ndarray
    yaw: float = 0.0
    # sphere bodies set radius; box bodies set half (extents) instead
    radius: float | None = None
    half: np.ndarray | None = None
    grounded: bool = False
    is_agent: bool = False
    consumable: bool = False  # goal bodies pass through the agent
    # Rest-state bookkeeping: `sleeping` marks a body whose last full move was
    # verified to be a fixed point (state bitwise unchanged), so the move can
    # be skipped until something external disturbs it.  `rest_contact` is the
    # single support contact that verified move produced.
    sleeping: bool = False
    rest_contact: tuple[int, np.ndarray] | None = None

    @property
    def bottom(self) -> float:
        if self.radius is not None:
            return float(self.center[1]) - self.radius
        return float(self.center[1]) - float(self.half[1])


@dataclass
class StepEvents:
    """What the episode layer needs to know about one physics step."""

    # eid -> [(other_eid, normal pointing toward the body)]
    blocking_contacts: dict[int, list[tuple[int, np.ndarray]]] = field(default_factory=dict)
    # eids of (a, b) pairs that exchanged an impulse this step
    impulses: list[tuple[int, int]] = field(default_factory=list)


def integrate(body: Body, params: PhysicsParams, drive: np.ndarray | None) -> None:
    """Velocity update for one step; drive is a horizontal impulse or None."""
    v = body.velocity
    v[0] *= params.drag
    v[2] *= params.drag
    if drive is not None:
        v[0] += drive[0]
        v[2] += drive[2]
    elif body.half is not None and body.grounded:
        speed = math.hypot(v[0], v[2])
        if speed <= params.friction:
            v[0] = 0.0
            v[2] = 0.0
        else:
            k = 1.0 - params.friction / speed
            v[0] *= k
            v[2] *= k
    elif body.grounded:
        # Rolling resistance: drag decays a rolling sphere geometrically and
        # on its own never reaches zero; below rest_speed the roll ends.
        if v[0] * v[0] + v[2] * v[2] <= params.rest_speed * params.rest_speed:
            v[0] = 0.0
            v[2] = 0.0
    v[1] -= params.gravity


def _exchange_impulse(a: Body, b: Body, normal: np.ndarray, events: StepEvents) -> None:
    """Normal impulse j = min(m) * closing speed; normal points toward a."""
    pair = (min(a.eid, b.eid), max(a.eid, b.eid))
    if pair in {(p, q) for p, q in events.impulses}:
        return
    closing = float((b.velocity - a.velocity) @ normal)
    if closing <= 0.0:
        return
    j = min(a.mass, b.mass) * closing
    a.velocity += (j / a.mass) * normal
    b.velocity -= (j / b.mass) * normal
    a.sleeping = False
    b.sleeping = False
    events.impulses.append(pair)


def _floor_sweep(center: np.ndarray, radius: float, disp: np.ndarray) -> SweepHit | None:
    """Swept hit against the floor plane y = 0."""
    if disp[1] >= -_EPS:
        return None
    gap = center[1] - radius
    if gap < 0.0:
        return SweepHit(0.0, FLOOR_EID, np.array([0.0, 1.0, 0.0]), None)
    t = gap / (-disp[1])
    if t > 1.0:
        return None
    return SweepHit(t, FLOOR_EID, np.array([0.0, 1.0, 0.0]), None)


def move_sphere(
    body: Body,
    colliders: ColliderSet,
    bodies: dict[int, Body],
    params: PhysicsParams,
    events: StepEvents,
    blocks,
) -> None:
    """Swept collide-and-slide for a sphere body (dt = 1)."""
    contacts = events.blocking_contacts.setdefault(body.eid, [])
    body.grounded = False
    disp = body.velocity.copy()

    for _ in range(params.max_slides):
        dist = math.sqrt(float(disp.dot(disp)))
        if dist < _EPS:
            break
        hit = colliders.sweep_sphere(body.center, body.radius, disp, include=blocks)
        fhit = _floor_sweep(body.center, body.radius, disp)
        if fhit is not None and (hit is None or fhit.toi < hit.toi):
            hit = fhit
        if hit is None:
            body.center = body.center + disp
            break
        stop = max(0.0, hit.toi - params.skin / dist)
        body.center = body.center + disp * stop
        n = hit.normal
        contacts.append((hit.eid, n))
        if n[1] >= WALKABLE_NY:
            body.grounded = True
        other = bodies.get(hit.eid)
        if other is not None:
            # Dynamic obstacle: physical response only; motion continues with
            # the post-impulse velocity (now separating, so no re-hit).
            _exchange_impulse(other, body, -n, events)
            disp = body.velocity * (1.0 - hit.toi)
            continue
        rem = disp * (1.0 - hit.toi)
        if n[1] >= WALKABLE_NY:
            if hit.eid == FLOOR_EID:
                body.center[1] = body.radius  # exact rest height, no drift
            rem = rem - (rem @ n) * n
            body.velocity = body.velocity - (body.velocity @ n) * n
        elif n[1] <= -WALKABLE_NY:
            rem = rem - (rem @ n) * n
            body.velocity = body.velocity - (body.velocity @ n) * n
        else:
            # Wall-like: deflect horizontally only; vertical motion keeps
            # falling and driving cannot climb the face.
            nf = np.array([n[0], 0.0, n[2]])
            nlen = math.sqrt(float(nf.dot(nf)))
            if nlen > _EPS:
                nf /= nlen
                rem = rem - (rem @ nf) * nf
                body.velocity = body.velocity - (body.velocity @ nf) * nf
            else:
                rem = rem - (rem @ n) * n
                body.velocity = body.velocity - (body.velocity @ n) * n
        disp = rem

    # Exact correction pass: resolve any residual penetration.
    for _ in range(params.iterations):
        cs = colliders.sphere_contacts(body.center, body.radius, include=blocks)
        pen_floor = body.radius - body.center[1]
        deepest = None
        for c in cs:
            if deepest is None or c.depth > deepest.depth:
                deepest = c
        if pen_floor > 0.0 and (deepest is None or pen_floor > deepest.depth):
            body.center[1] = body.radius
            if body.velocity[1] < 0.0:
                body.velocity[1] = 0.0
            body.grounded = True
            contacts.append((FLOOR_EID, np.array([0.0, 1.0, 0.0])))
            continue
        if deepest is None or deepest.depth <= 1e-9:
            break
        n = deepest.normal
        contacts.append((deepest.eid, n))
        if n[1] >= WALKABLE_NY:
            body.grounded = True
        other = bodies.get(deepest.eid)
        if other is not None:
            share = (1.0 / body.mass) / (1.0 / body.mass + 1.0 / other.mass)
            body.center = body.center + n * (deepest.depth * share)
            other.center = other.center - n * (deepest.depth * (1.0 - share))
            other.sleeping = False  # displaced, so its rest state is void
            colliders.move(other.eid, other.center)
            _exchange_impulse(other, body, -n, events)
            continue
        body.center = body.center + n * deepest.depth
        vn = float(body.velocity @ n)
        if vn < 0.0:
            body.velocity = body.velocity - vn * n


def move_box(
    body: Body,
    colliders: ColliderSet,
    bodies: dict[int, Body],
    params: PhysicsParams,
    events: StepEvents,
    blocks,
) -> None:
    """Discrete move + iterative positional correction for a box body."""
    contacts = events.blocking_contacts.setdefault(body.eid, [])
    body.grounded = False
    body.center = body.center + body.velocity

    for _ in range(params.iterations):
        cs = colliders.box_contacts(body.center, body.half, body.yaw, include=blocks)
        pen_floor = float(body.half[1]) - float(body.center[1])
        deepest = None
        for c in cs:
            if deepest is None or c.depth > deepest.depth:
                deepest = c
        if pen_floor > 0.0 and (deepest is None or pen_floor > deepest.depth):
            body.center[1] = float(body.half[1])
            if body.velocity[1] < 0.0:
                body.velocity[1] = 0.0
            body.grounded = True
            contacts.append((FLOOR_EID, np.array([0.0, 1.0, 0.0])))
            continue
        if deepest is None or deepest.depth <= 1e-9:
            break
        n = deepest.normal
        contacts.append((deepest.eid, n))
        if n[1] >= WALKABLE_NY:
            body.grounded = True
        other = bodies.get(deepest.eid)
        if other is not None:
            share = (1.0 / body.mass) / (1.0 / body.mass + 1.0 / other.mass)
            body.center = body.center + n * (deepest.depth * share)
            other.center = other.center - n * (deepest.depth * (1.0 - share))
            other.sleeping = False  # displaced, so its rest state is void
            colliders.move(other.eid, other.center)
            _exchange_impulse(other, body, -n, events)
            continue
        body.center = body.center + n * deepest.depth
        vn = float(body.velocity @ n)
        if vn < 0.0:
            body.velocity = body.velocity - vn * n


def step_bodies(
    bodies: dict[int, Body],
    colliders: ColliderSet,
    params: PhysicsParams,
    drives: dict[int, np.ndarray],
    agent_eid: int | None = None,
) -> StepEvents:
    """Integrate and move every dynamic body in ascending eid order.

    A body whose previous full move was verified to change nothing (resting
    on static support with zero velocity) is skipped: the skip reproduces the
    move's outputs exactly — vertical velocity re-zeroed, the cached support
    contact re-emitted — until a drive, an impulse, a displacement, or a new
    nearby collider wakes it.
    """
    events = StepEvents()
    order = sorted(bodies)
    for eid in order:
        integrate(bodies[eid], params, drives.get(eid))
    for eid in order:
        body = bodies[eid]
        v = body.velocity
        if (
            SLEEP_RESTING
            and body.sleeping
            and eid not in drives
            and v[0] == 0.0
            and v[2] == 0.0
            and v[1] == -params.gravity
        ):
            v[1] = 0.0
            events.blocking_contacts.setdefault(eid, []).append(body.rest_contact)
            continue

        def blocks(rec, _self=body):
            if not rec.solid or rec.eid == _self.eid:
                return False
            if _self.is_agent and rec.consumable:
                return False
            if _self.consumable and agent_eid is not None and rec.eid == agent_eid:
                return False
            return True

        before = body.center.copy()
        if body.radius is not None:
            move_sphere(body, colliders, bodies, params, events, blocks)
        else:
            move_box(body, colliders, bodies, params, events, blocks)
        colliders.move(eid, body.center)
        v = body.velocity  # the move may rebind the array
        contacts = events.blocking_contacts[eid]
        body.sleeping = (
            body.grounded
            and v[0] == 0.0
            and v[1] == 0.0
            and v[2] == 0.0
            and len(contacts) == 1
            and contacts[0][0] not in bodies  # static support only
            and body.center[0] == before[0]
            and body.center[1] == before[1]
            and body.center[2] == before[2]
        )
        if body.sleeping:
            body.rest_contact = contacts[0]
    return events
