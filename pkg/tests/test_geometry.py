"""Geometry-layer tests: ray queries, contacts, and swept motion.

Ray distances are checked against a dense-march oracle and per-shape
analytic oracles; sweeps are checked against sub-stepped overlap tests.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arena_lab.geometry import (
    ARENA_SIZE,
    MAX_RAY_RANGE,
    WALKABLE_NY,
    BoxPart,
    BoxShape,
    ColliderRecord,
    ColliderSet,
    SphereShape,
    WedgeShape,
    facing,
    wrap_yaw,
    yaw_matrix,
)

import oracles
from oracles import OracleRecord, OracleShape


def make_set(*recs: ColliderRecord) -> ColliderSet:
    cs = ColliderSet()
    for r in recs:
        cs.add(r)
    return cs


def box_record(eid, center, half, yaw=0.0, **kw) -> ColliderRecord:
    return ColliderRecord(
        eid=eid,
        shape=BoxShape.single(np.asarray(half, dtype=float)),
        center=np.asarray(center, dtype=float),
        yaw=yaw,
        category=1,
        **kw,
    )


def sphere_record(eid, center, radius, **kw) -> ColliderRecord:
    return ColliderRecord(
        eid=eid,
        shape=SphereShape(radius),
        center=np.asarray(center, dtype=float),
        yaw=0.0,
        category=3,
        **kw,
    )


def wedge_record(eid, center, size, yaw=0.0, **kw) -> ColliderRecord:
    return ColliderRecord(
        eid=eid,
        shape=WedgeShape(np.asarray(size, dtype=float)),
        center=np.asarray(center, dtype=float),
        yaw=yaw,
        category=1,
        **kw,
    )


# --- conventions ------------------------------------------------------------


def test_facing_convention():
    assert np.allclose(facing(0.0), [0.0, 0.0, 1.0])
    assert np.allclose(facing(90.0), [1.0, 0.0, 0.0])
    assert np.allclose(facing(180.0), [0.0, 0.0, -1.0])
    assert np.allclose(facing(270.0), [-1.0, 0.0, 0.0])


def test_yaw_matrix_rotates_facing():
    for yaw in (0.0, 33.0, 90.0, 123.4, 270.0):
        R = yaw_matrix(yaw)
        assert np.allclose(R @ np.array([0.0, 0.0, 1.0]), facing(yaw))
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)


def test_wrap_yaw():
    assert wrap_yaw(365.0) == pytest.approx(5.0)
    assert wrap_yaw(-6.0) == pytest.approx(354.0)
    assert wrap_yaw(720.0) == 0.0


def test_max_ray_range_is_arena_diagonal():
    assert MAX_RAY_RANGE == pytest.approx(math.sqrt(2.0) * ARENA_SIZE)
    assert MAX_RAY_RANGE == pytest.approx(56.568542494923804)


def test_walkable_normal_threshold():
    # Slope normal vertical component for gradient g is 1 / sqrt(1 + g^2).
    ny_at_4 = 1.0 / math.sqrt(17.0)
    assert ny_at_4 >= WALKABLE_NY  # gradient exactly 4 counts as walkable
    ny_steeper = 1.0 / math.sqrt(1.0 + 4.01**2)
    assert ny_steeper < WALKABLE_NY


def test_wedge_slope_normal_matches_gradient():
    size = np.array([2.0, 4.0, 1.0])  # gradient 4
    cs = make_set(wedge_record(1, [10.0, 0.0, 10.0], size))
    # Fire a ray straight down at the slope midpoint.
    origin = np.array([10.0, 10.0, 10.0])
    dist, rec, normals = cs.trace_full(origin, np.array([[0.0, -1.0, 0.0]]), 60.0)
    assert rec[0] == 0
    assert normals[0][1] == pytest.approx(1.0 / math.sqrt(17.0), abs=1e-12)


# --- analytic ray oracles ---------------------------------------------------


def test_ray_sphere_matches_quadratic():
    rng = np.random.default_rng(101)
    for _ in range(300):
        c = rng.uniform(2.0, 18.0, size=3)
        r = float(rng.uniform(0.2, 2.0))
        o = rng.uniform(0.0, 20.0, size=3)
        if np.linalg.norm(o - c) <= r + 1e-6:
            continue
        d = oracles.random_unit(rng)
        cs = make_set(sphere_record(1, c, r))
        dist, rec = cs.raycast(o, d[None, :], 100.0)
        # Independent quadratic solution.
        oc = o - c
        b = float(d @ oc)
        disc = b * b - (float(oc @ oc) - r * r)
        if disc < 0.0:
            expect = np.inf
        else:
            t0 = -b - math.sqrt(disc)
            expect = t0 if t0 >= 0.0 else np.inf
        if math.isinf(expect):
            assert rec[0] == -1
        else:
            assert dist[0] == pytest.approx(expect, abs=1e-9)


def test_ray_box_matches_face_planes():
    rng = np.random.default_rng(102)
    for _ in range(300):
        c = rng.uniform(4.0, 16.0, size=3)
        half = rng.uniform(0.2, 2.5, size=3)
        yaw = float(rng.uniform(0.0, 360.0))
        o = rng.uniform(0.0, 20.0, size=3)
        R = yaw_matrix(yaw)
        lp = R.T @ (o - c)
        if np.all(np.abs(lp) <= half):
            continue
        d = oracles.random_unit(rng)
        cs = make_set(box_record(1, c, half, yaw))
        dist, rec = cs.raycast(o, d[None, :], 100.0)
        # Oracle: intersect all six face planes, keep hits inside the face.
        best = np.inf
        ld = R.T @ d
        for axis in range(3):
            for sgn in (-1.0, 1.0):
                if abs(ld[axis]) < 1e-12:
                    continue
                t = (sgn * half[axis] - lp[axis]) / ld[axis]
                if t < 0.0:
                    continue
                p = lp + ld * t
                others = [a for a in range(3) if a != axis]
                if all(abs(p[a]) <= half[a] + 1e-9 for a in others):
                    best = min(best, t)
        if math.isinf(best):
            assert rec[0] == -1 or dist[0] > 99.0
        else:
            assert dist[0] == pytest.approx(best, abs=1e-7)


def test_ray_march_oracle_random_scenes():
    rng = np.random.default_rng(103)
    checked = 0
    for _ in range(120):
        recs = oracles.random_scene(rng)
        cs = oracles.build_set(recs)
        origin = oracles.free_point(rng, recs, [1.0, 0.3, 1.0], [19.0, 2.5, 19.0])
        dirs = np.stack([oracles.random_unit(rng) for _ in range(8)])
        dist, hit = cs.raycast(origin, dirs, 15.0)
        odist, oeid = oracles.march_first_hits(origin, dirs, recs, 15.0)
        for k in range(len(dirs)):
            checked += 1
            both_miss = hit[k] == -1 and math.isinf(odist[k])
            if both_miss:
                continue
            if hit[k] != -1 and not math.isinf(odist[k]):
                assert abs(dist[k] - odist[k]) <= 2e-3, (
                    f"ray {k}: raycast {dist[k]} vs march {odist[k]}"
                )
            elif hit[k] != -1:
                # March missed a hit the analytic query found: must be a
                # grazing sliver thinner than the march can resolve.
                rec = next(r for r in recs if r.eid == cs.records[hit[k]].eid)
                chord = oracles.dense_chord(origin, dirs[k], rec, float(dist[k]))
                assert chord <= 1e-3, f"march missed a non-grazing hit (chord {chord})"
            else:
                pytest.fail(f"march found a surface at {odist[k]} the raycast missed")
    assert checked >= 900


def test_raycast_tie_breaks_to_lower_eid():
    # Coincident surfaces: the lower eid wins regardless of insertion order.
    a = box_record(7, [10.0, 1.0, 10.0], [1.0, 1.0, 1.0])
    b = box_record(3, [10.0, 1.0, 10.0], [1.0, 1.0, 1.0])
    origin = np.array([10.0, 1.0, 0.0])
    d = np.array([[0.0, 0.0, 1.0]])
    for cs in (make_set(a, b), make_set(b, a)):
        dist, rec = cs.raycast(origin, d, 60.0)
        assert cs.records[rec[0]].eid == 3
        assert dist[0] == pytest.approx(9.0, abs=1e-12)
    # Mixed families: a sphere surface coinciding with a box face.
    sp = sphere_record(2, [10.0, 1.0, 11.0], 2.0)
    bx = box_record(5, [10.0, 1.0, 10.0], [1.0, 1.0, 1.0])
    cs = make_set(bx, sp)
    dist, rec = cs.raycast(origin, d, 60.0)
    assert cs.records[rec[0]].eid == 2
    assert dist[0] == pytest.approx(9.0, abs=1e-12)


def test_raycast_include_filters_categories():
    wall = box_record(1, [10.0, 1.0, 8.0], [2.0, 1.0, 0.2])
    goal = sphere_record(2, [10.0, 0.5, 12.0], 0.5)
    cs = make_set(wall, goal)
    origin = np.array([10.0, 0.5, 0.0])
    d = np.array([[0.0, 0.0, 1.0]])
    dist_all, rec_all = cs.raycast(origin, d, 60.0)
    assert cs.records[rec_all[0]].category == 1
    dist_goal, rec_goal = cs.raycast(origin, d, 60.0, include=lambda r: r.category == 3)
    assert cs.records[rec_goal[0]].category == 3
    assert dist_goal[0] > dist_all[0]


def test_trace_group_hits_merges_compound_parts():
    parts = [
        BoxPart(np.array([0.0, 0.0, -1.5]), np.array([2.0, 0.5, 0.5])),
        BoxPart(np.array([-1.5, 0.0, 0.5]), np.array([0.5, 0.5, 1.5])),
        BoxPart(np.array([1.5, 0.0, 0.5]), np.array([0.5, 0.5, 1.5])),
    ]
    rec = ColliderRecord(
        eid=4,
        shape=BoxShape(parts),
        center=np.array([10.0, 0.5, 10.0]),
        yaw=0.0,
        category=2,
    )
    cs = make_set(rec)
    origin = np.array([10.0, 0.5, 0.0])
    dirs = np.array([[0.0, 0.0, 1.0]])
    groups = cs.trace_group_hits(origin, dirs, 60.0, include=lambda r: True)
    assert len(groups) == 1  # one record even though three parts were hit
    idx, t = groups[0]
    assert cs.records[idx].eid == 4
    # Nearest part face: the cross bar at z = 10 - 1.5 - 0.5 = 8.
    assert t[0] == pytest.approx(8.0, abs=1e-9)


def test_trace_full_normals_on_box_faces():
    cs = make_set(box_record(1, [10.0, 1.0, 10.0], [1.0, 1.0, 1.0]))
    cases = [
        (np.array([10.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])),
        (np.array([0.0, 1.0, 10.0]), np.array([1.0, 0.0, 0.0]), np.array([-1.0, 0.0, 0.0])),
        (np.array([10.0, 10.0, 10.0]), np.array([0.0, -1.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    ]
    for origin, d, expect_n in cases:
        dist, rec, normals = cs.trace_full(origin, d[None, :], 60.0)
        assert rec[0] == 0
        assert np.allclose(normals[0], expect_n, atol=1e-12)


# --- contacts ---------------------------------------------------------------


def test_sphere_contact_depth_resolves_penetration():
    rng = np.random.default_rng(104)
    resolved = 0
    for _ in range(200):
        recs = oracles.random_scene(rng, n_records=1)
        cs = oracles.build_set(recs)
        target = recs[0].shapes[0].center + rng.normal(scale=1.0, size=3)
        radius = 0.5
        contacts = cs.sphere_contacts(target, radius)
        if not contacts:
            continue
        c = max(contacts, key=lambda c: c.depth)
        assert c.depth > 0.0
        assert np.linalg.norm(c.normal) == pytest.approx(1.0, abs=1e-9)
        moved = target + c.normal * (c.depth + 1e-9)
        after = cs.sphere_contacts(moved, radius)
        max_after = max((a.depth for a in after), default=0.0)
        # One push along the deepest contact resolves single convex records.
        assert max_after <= 1e-6
        resolved += 1
    assert resolved >= 50


def test_sphere_contact_depth_agrees_with_oracle():
    rng = np.random.default_rng(105)
    compared = 0
    for _ in range(150):
        recs = oracles.random_scene(rng, n_records=1)
        cs = oracles.build_set(recs)
        target = recs[0].shapes[0].center + rng.normal(scale=1.2, size=3)
        radius = float(rng.uniform(0.2, 0.8))
        contacts = cs.sphere_contacts(target, radius)
        depth_impl = max((c.depth for c in contacts), default=0.0)
        depth_orc = oracles.sphere_depth(target, radius, recs[0])
        if depth_orc <= -0.01:
            assert depth_impl == 0.0
        elif depth_orc >= 0.01 and depth_orc < radius:  # clear penetration, not engulfed
            assert depth_impl == pytest.approx(depth_orc, abs=5e-3)
            compared += 1
    assert compared >= 20


def test_box_contacts_axis_aligned_oracle():
    rng = np.random.default_rng(106)
    for _ in range(200):
        c1 = rng.uniform(5.0, 15.0, size=3)
        h1 = rng.uniform(0.3, 2.0, size=3)
        c2 = c1 + rng.uniform(-2.5, 2.5, size=3)
        h2 = rng.uniform(0.3, 2.0, size=3)
        cs = make_set(box_record(1, c2, h2))
        contacts = cs.box_contacts(c1, h1, 0.0)
        # Interval-overlap oracle per axis.
        ov = [(h1[a] + h2[a]) - abs(c1[a] - c2[a]) for a in range(3)]
        overlapping = all(o > 0.0 for o in ov)
        if not overlapping:
            assert contacts == []
        else:
            assert len(contacts) == 1
            expect_depth = min(ov)
            assert contacts[0].depth == pytest.approx(expect_depth, abs=1e-9)
            axis = int(np.argmin(ov))
            n = contacts[0].normal
            assert abs(n[axis]) == pytest.approx(1.0, abs=1e-9)
            # Normal points from the obstacle toward the queried box.
            assert n[axis] * (c1[axis] - c2[axis]) >= 0.0


def test_box_contacts_vs_sphere_flipped():
    cs = make_set(sphere_record(1, [10.0, 0.5, 10.0], 0.5))
    contacts = cs.box_contacts(np.array([10.0, 0.5, 10.8]), np.array([0.5, 0.5, 0.5]), 0.0)
    assert len(contacts) == 1
    c = contacts[0]
    # Sphere surface reaches z = 10.5; box face at z = 10.3 -> depth 0.2.
    assert c.depth == pytest.approx(0.2, abs=1e-9)
    assert np.allclose(c.normal, [0.0, 0.0, 1.0], atol=1e-9)


def test_overlaps_record_detects_placement_clash():
    base = box_record(1, [10.0, 1.0, 10.0], [1.0, 1.0, 1.0])
    cs = make_set(base)
    clash = box_record(2, [11.0, 1.0, 10.5], [1.0, 1.0, 1.0])
    assert cs.overlaps_record(clash) is not None
    clear = box_record(3, [14.0, 1.0, 10.0], [1.0, 1.0, 1.0])
    assert cs.overlaps_record(clear) is None


# --- swept motion -----------------------------------------------------------


def test_sweep_vs_substep_oracle():
    rng = np.random.default_rng(107)
    agree = 0
    n_sub = 4000
    for _ in range(60):
        recs = oracles.random_scene(rng)
        cs = oracles.build_set(recs)
        radius = 0.5
        start = oracles.free_point(
            rng, recs, [2.0, 0.6, 2.0], [18.0, 3.0, 18.0], margin=radius + 1e-3
        )
        # Aim at a random record so most sweeps actually reach a surface.
        target = recs[int(rng.integers(len(recs)))].shapes[0]
        aim = np.asarray(target.center, dtype=float) + rng.normal(scale=0.4, size=3)
        to_aim = aim - start
        gap = float(np.linalg.norm(to_aim))
        disp = to_aim / gap * min(gap * float(rng.uniform(0.9, 1.6)), 4.0)
        hit = cs.sweep_sphere(start, radius, disp)
        t_orc, eid_orc = oracles.substep_first_contact(start, radius, disp, recs, n=n_sub)
        slack = 2.0 / n_sub
        if t_orc is None:
            # No penetration anywhere along the path: a reported block may
            # only be a touching graze, never an early stop.
            if hit is not None:
                end = start + disp * hit.toi
                depth = max(oracles.sphere_depth(end + disp * 1e-3, radius, r) for r in recs)
                assert depth <= 2e-3
        else:
            assert hit is not None, f"sweep missed a contact at fraction {t_orc}"
            assert hit.toi <= t_orc + slack, "sweep stopped after true first contact"
            assert hit.toi >= t_orc - slack - 0.02 / max(np.linalg.norm(disp), 1e-9), (
                f"sweep stopped early: {hit.toi} vs {t_orc}"
            )
            agree += 1
        if hit is not None:
            stop = start + disp * hit.toi
            pen = max(oracles.sphere_depth(stop, radius, r) for r in recs)
            assert pen <= 1e-6, "swept position penetrates"
    assert agree >= 15


def test_sweep_head_on_box_corner_is_tight():
    # Approach the corner of a box dead-on along the diagonal; the stop
    # distance must match the exact sphere-corner contact, not the
    # conservative expanded-plane estimate.
    cs = make_set(box_record(1, [10.0, 1.0, 10.0], [1.0, 1.0, 1.0]))
    corner = np.array([9.0, 1.0, 9.0])
    d = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
    start = corner - d * 3.0
    hit = cs.sweep_sphere(start, 0.5, d * 5.0)
    assert hit is not None
    stop = start + d * 5.0 * hit.toi
    gap = np.linalg.norm(stop - corner)
    assert gap == pytest.approx(0.5, abs=1e-6)


def test_sweep_separating_contact_does_not_block():
    cs = make_set(box_record(1, [10.0, 1.0, 12.0], [2.0, 1.0, 0.5]))
    # Touching the front face (z = 11.5) exactly, sliding parallel to it.
    start = np.array([9.0, 1.0, 11.0])
    hit = cs.sweep_sphere(start, 0.5, np.array([1.0, 0.0, 0.0]))
    assert hit is None
    # Moving away is also free.
    hit = cs.sweep_sphere(start, 0.5, np.array([0.0, 0.0, -1.0]))
    assert hit is None
    # Moving in is blocked immediately.
    hit = cs.sweep_sphere(start, 0.5, np.array([0.0, 0.0, 1.0]))
    assert hit is not None and hit.toi == pytest.approx(0.0, abs=1e-9)


def test_sweep_mass_no_tunnel_through_thin_wall():
    """10^5 random max-speed sweeps against a 0.1-thick wall: the motion the
    sweep permits never passes through a penetrating state."""
    rng = np.random.default_rng(108)
    wall_c = np.array([10.0, 2.0, 10.0])
    half = np.array([4.0, 2.0, 0.05])
    cs = make_set(box_record(1, wall_c, half))
    radius = 0.5
    n = 100_000
    # Starts on the near side, aimed across the wall plane at v_max.
    xs = rng.uniform(5.0, 15.0, size=n)
    ys = rng.uniform(0.5, 4.5, size=n)
    z0 = rng.uniform(10.0 - 2.5, 10.0 - 0.55 - 1e-6, size=n)
    v = np.stack(
        [
            rng.uniform(-1.0, 1.0, size=n),
            rng.uniform(-1.0, 1.0, size=n),
            rng.uniform(0.1, 1.0, size=n),
        ],
        axis=1,
    )
    v *= (1.5 / np.linalg.norm(v, axis=1))[:, None]
    starts = np.stack([xs, ys, z0], axis=1)
    ends = np.empty_like(starts)
    for i in range(n):
        hit = cs.sweep_sphere(starts[i], radius, v[i])
        ends[i] = starts[i] + v[i] * (hit.toi if hit is not None else 1.0)
    # Sample each permitted segment densely; penetration depth of the sphere
    # into the wall must stay ~0 everywhere (the Minkowski slab is 1.1 units
    # thick in z, far wider than the sample spacing, so a pass-through
    # cannot hide between samples).
    k = 64
    fracs = np.linspace(0.0, 1.0, k)
    worst = 0.0
    for s in range(0, n, 10_000):
        e = min(s + 10_000, n)
        pts = starts[s:e, None, :] + (ends[s:e] - starts[s:e])[:, None, :] * fracs[None, :, None]
        lp = pts.reshape(-1, 3) - wall_c
        q = np.clip(lp, -half, half)
        dist = np.linalg.norm(lp - q, axis=1)
        inside = dist <= 1e-12
        depth = radius - dist
        depth[inside] = radius  # center inside the wall: fully tunnelled
        worst = max(worst, float(depth.max()))
    assert worst <= 1e-6, f"motion passed through the wall (max depth {worst})"


def test_sweep_sphere_all_reports_touched_records():
    goal = sphere_record(5, [10.0, 0.5, 12.0], 0.5, consumable=True, solid=False)
    zone = box_record(6, [10.0, 0.25, 14.0], [1.5, 0.25, 1.5], solid=False)
    cs = make_set(goal, zone)
    start = np.array([10.0, 0.5, 10.0])
    hits = cs.sweep_sphere_all(start, 0.5, np.array([0.0, 0.0, 5.0]), include=lambda r: True)
    eids = [h.eid for h in hits]
    assert eids == [5, 6]
    assert hits[0].toi < hits[1].toi
    assert all(0.0 <= h.toi <= 1.0 for h in hits)


# --- hypothesis properties --------------------------------------------------


@settings(deadline=None, max_examples=60)
@given(st.integers(min_value=0, max_value=10**9))
def test_property_sweep_stop_never_penetrates(seed):
    rng = np.random.default_rng(seed)
    recs = oracles.random_scene(rng, n_records=3)
    cs = oracles.build_set(recs)
    try:
        start = oracles.free_point(rng, recs, [2.0, 0.6, 2.0], [18.0, 3.0, 18.0], margin=0.501)
    except RuntimeError:
        return
    disp = oracles.random_unit(rng) * float(rng.uniform(0.0, 2.0))
    hit = cs.sweep_sphere(start, 0.5, disp)
    if hit is not None:
        assert 0.0 <= hit.toi <= 1.0
        stop = start + disp * hit.toi
        assert max(oracles.sphere_depth(stop, 0.5, r) for r in recs) <= 1e-6


@settings(deadline=None, max_examples=60)
@given(st.integers(min_value=0, max_value=10**9))
def test_property_contact_normals_are_unit(seed):
    rng = np.random.default_rng(seed)
    recs = oracles.random_scene(rng, n_records=2)
    cs = oracles.build_set(recs)
    p = rng.uniform([3.0, 0.0, 3.0], [17.0, 3.0, 17.0])
    for c in cs.sphere_contacts(p, 0.6):
        assert np.linalg.norm(c.normal) == pytest.approx(1.0, abs=1e-9)
        assert c.depth > 0.0
