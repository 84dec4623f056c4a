"""Raycast matrix, camera render, and vector observation checks."""

import math

import numpy as np
import pytest

import oracles
from arena_lab.config_dsl import load_config_text
from arena_lab.entities import (
    BUTTON_FACE_COLOR,
    SIGN_BOARD_FACE,
    ZONE_ALPHA,
    EntityKind,
)
from arena_lab.observations import (
    AMBIENT,
    FLOOR_DARK,
    FLOOR_LIGHT,
    LIGHT_DIR,
    RAYCAST_MAX_RANGE,
    SKY_COLOR,
    ObsSpec,
    build_observation,
    camera_observation,
    ray_angles,
    ray_directions,
    raycast_observation,
    save_png,
    vector_observation,
)
from arena_lab.world import instantiate_arena


def make_world(items_yaml: str = "", agent="x: 20, y: 0, z: 20", rot=0, seed=0):
    text = (
        "!ArenaConfig\n"
        "arenas:\n"
        "  0: !Arena\n"
        "    pass_mark: 0\n"
        "    t: 100\n"
        "    items:\n"
        "    - !Item\n"
        "      name: Agent\n"
        "      positions:\n"
        f"      - !Vector3 {{{agent}}}\n"
        f"      rotations: [{rot}]\n" + items_yaml
    )
    return instantiate_arena(load_config_text(text).arenas[0], seed)


def item(name, x, z, extra="", y=0, rot=0):
    return (
        f"    - !Item\n"
        f"      name: {name}\n"
        f"      positions:\n"
        f"      - !Vector3 {{x: {x}, y: {y}, z: {z}}}\n"
        f"      rotations: [{rot}]\n" + extra
    )


def lambert(rgb, normal):
    lam = AMBIENT + (1.0 - AMBIENT) * max(0.0, float(np.dot(normal, LIGHT_DIR)))
    return np.clip(np.rint(np.asarray(rgb, dtype=float) * lam), 0, 255).astype(np.uint8)


# --- ray fan ----------------------------------------------------------------


class TestRayFan:
    def test_enumeration_order(self):
        assert ray_angles(5, 60.0).tolist() == [0.0, -15.0, 15.0, -30.0, 30.0]

    def test_single_ray(self):
        assert ray_angles(1, 60.0).tolist() == [0.0]

    def test_even_count_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            ray_angles(8, 60.0)
        with pytest.raises(ValueError, match="odd"):
            ray_angles(0, 60.0)

    def test_fov_bounds(self):
        with pytest.raises(ValueError, match="view"):
            ray_angles(5, 0.0)
        with pytest.raises(ValueError, match="view"):
            ray_angles(5, 400.0)
        assert ray_angles(101, 358.0)[-1] == pytest.approx(179.0)

    def test_directions_are_horizontal_units(self):
        d = ray_directions(33.0, 15, 60.0)
        assert d.shape == (15, 3)
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
        assert np.all(d[:, 1] == 0.0)

    def test_yaw_rotates_fan(self):
        ahead = ray_directions(90.0, 3, 60.0)[0]
        assert np.allclose(ahead, [1.0, 0.0, 0.0], atol=1e-12)


# --- raycast matrix ---------------------------------------------------------


class TestRaycast:
    def test_shape_and_empty_scene_rows(self):
        w = make_world(agent="x: 20, y: 0, z: 5")
        obs = raycast_observation(w, 15, 60.0)
        assert obs.shape == (8, 15)
        # only the boundary row fires in an empty arena
        assert np.all(obs[1:] == 0.0)
        assert np.all(obs[0] > 0.0)

    def test_forward_distance_encoding(self):
        w = make_world(
            item("Wall", 20, 30, extra="      sizes:\n      - !Vector3 {x: 4, y: 2, z: 1}\n"),
            agent="x: 20, y: 0, z: 5",
        )
        obs = raycast_observation(w, 15, 60.0)
        expected = 1.0 - 24.5 / RAYCAST_MAX_RANGE  # front face 24.5 ahead of the eye
        assert obs[1, 0] == pytest.approx(expected, abs=1e-12)
        assert np.count_nonzero(obs[:, 0]) == 1

    def test_boundary_distance(self):
        w = make_world(agent="x: 20, y: 0, z: 5")
        obs = raycast_observation(w, 15, 60.0)
        assert obs[0, 0] == pytest.approx(1.0 - 35.0 / RAYCAST_MAX_RANGE, abs=1e-12)

    def test_goal_row_and_sphere_distance(self):
        w = make_world(
            item("GoodGoal", 20, 30, extra="      sizes:\n      - !Vector3 {x: 2, y: 2, z: 2}\n"),
            agent="x: 20, y: 0, z: 5",
        )
        obs = raycast_observation(w, 15, 60.0)
        # eye (20, .5, 5) -> sphere centre (20, 1, 30), radius 1
        d = 25.0 - math.sqrt(1.0 - 0.25)
        assert obs[3, 0] == pytest.approx(1.0 - d / RAYCAST_MAX_RANGE, abs=1e-9)

    def test_nearest_entity_wins_the_column(self):
        w = make_world(
            item("Wall", 20, 25, extra="      sizes:\n      - !Vector3 {x: 4, y: 2, z: 1}\n")
            + item("BadGoal", 20, 30),
            agent="x: 20, y: 0, z: 5",
        )
        obs = raycast_observation(w, 15, 60.0)
        assert obs[1, 0] > 0.0
        assert obs[5, 0] == 0.0  # occluded by the wall

    def test_lights_out_zeroes_matrix(self):
        w = make_world(agent="x: 20, y: 0, z: 5")
        obs = raycast_observation(w, 15, 60.0, lights_on=False)
        assert obs.shape == (8, 15)
        assert np.all(obs == 0.0)

    def test_matches_march_oracle(self):
        w = make_world(
            item("Wall", 12, 26, extra="      sizes:\n      - !Vector3 {x: 3, y: 4, z: 2}\n", rot=30)
            + item("Ramp", 28, 14, extra="      sizes:\n      - !Vector3 {x: 4, y: 2, z: 6}\n", rot=200)
            + item("GoodGoal", 30, 31)
            + item("SpawnerButton", 8, 12, rot=45),
            agent="x: 20, y: 0, z: 20",
            rot=37,
        )
        obs = raycast_observation(w, 15, 60.0)
        recs = [r for r in w.colliders.records if r.eid != w.agent.eid]
        orecs = [oracles.oracle_from_collider(r) for r in recs]
        cat = {r.eid: r.category for r in recs}
        dirs = ray_directions(w.agent.body.yaw, 15, 60.0)
        dist, eid = oracles.march_first_hits(w.agent.body.center, dirs, orecs, RAYCAST_MAX_RANGE)
        for col in range(15):
            expected = np.zeros(8)
            if eid[col] >= 0:
                expected[cat[eid[col]]] = 1.0 - dist[col] / RAYCAST_MAX_RANGE
            assert np.allclose(obs[:, col], expected, atol=2e-3), f"column {col}"

    def test_at_most_one_hit_per_column(self):
        for seed in range(5):
            w = make_world(
                item("Wall", 15, 25) + item("GoodGoalMulti", 25, 25) + item("BadGoal", 25, 15),
                agent="x: 20, y: 0, z: 20",
                rot=-1,
                seed=seed,
            )
            obs = raycast_observation(w, 33, 90.0)
            assert np.all((obs >= 0.0) & (obs <= 1.0))
            assert np.all(np.count_nonzero(obs, axis=0) <= 1)


# --- vector -----------------------------------------------------------------


class TestVector:
    def test_layout(self):
        w = make_world(agent="x: 12, y: 0, z: 31")
        v = vector_observation(w, health=87.5)
        assert v.shape == (7,)
        assert v[0] == 87.5
        assert np.all(v[1:4] == 0.0)
        assert v[4] == 12.0
        assert v[5] == 0.0  # base height, not sphere-centre height
        assert v[6] == 31.0

    def test_velocity_passthrough(self):
        w = make_world()
        w.agent.body.velocity = np.array([0.3, -0.1, 0.2])
        v = vector_observation(w, health=100.0)
        assert v[1:4].tolist() == [0.3, -0.1, 0.2]


# --- camera -----------------------------------------------------------------


class TestCamera:
    def test_shape_dtype_and_bounds(self):
        w = make_world()
        img = camera_observation(w, 16)
        assert img.shape == (16, 16, 3) and img.dtype == np.uint8
        gray = camera_observation(w, 16, grayscale=True)
        assert gray.shape == (16, 16) and gray.dtype == np.uint8
        for bad in (3, 513, 0):
            with pytest.raises(ValueError):
                camera_observation(w, bad)

    def test_deterministic(self):
        a = camera_observation(make_world(item("Wall", 18, 28)), 32)
        b = camera_observation(make_world(item("Wall", 18, 28)), 32)
        assert np.array_equal(a, b)

    def test_sky_above_floor_below(self):
        img = camera_observation(make_world(), 32)
        assert np.array_equal(img[0, 16], SKY_COLOR.astype(np.uint8))
        floor_shades = {tuple(FLOOR_LIGHT.astype(np.uint8)), tuple(FLOOR_DARK.astype(np.uint8))}
        bottom = {tuple(px) for px in img[-1]}
        assert bottom <= floor_shades
        assert len({tuple(px) for row in img[16:] for px in row} & floor_shades) == 2

    def test_wall_lambert_shading(self):
        w = make_world(
            item("Wall", 20, 30, extra=(
                "      sizes:\n      - !Vector3 {x: 30, y: 8, z: 1}\n"
                "      colors:\n      - !RGB {r: 200, g: 40, b: 40}\n"
            )),
        )
        img = camera_observation(w, 32)
        expected = lambert((200, 40, 40), np.array([0.0, 0.0, -1.0]))
        assert np.all(np.abs(img[16, 16].astype(int) - expected.astype(int)) <= 1)

    def test_boundary_renders_as_fence_below_sky(self):
        from arena_lab.world import FENCE_COLOR

        img = camera_observation(make_world(), 64)
        col = img[:, 32].astype(int)
        fence = lambert(FENCE_COLOR, np.array([0.0, 0.0, -1.0])).astype(int)
        fence_rows = [r for r in range(64) if np.all(np.abs(col[r] - fence) <= 1)]
        sky_rows = [r for r in range(64) if np.array_equal(col[r], SKY_COLOR.astype(int))]
        assert fence_rows and sky_rows
        assert max(sky_rows) < min(fence_rows)  # sky strictly above the fence band
        # the fence band is shallow: boundary above 2 units shows sky instead
        eye_to_wall = 19.5
        top_angle = math.degrees(math.atan((2.0 - 0.5) / eye_to_wall))
        assert top_angle < 6.0  # sanity: the band should hug the horizon
        assert min(fence_rows) > 24  # well below the frame's top quarter

    def test_translucent_zone_alpha_blend(self):
        zone = item(
            "DeathZone", 20, 26, extra="      sizes:\n      - !Vector3 {x: 6, y: 0, z: 6}\n"
        )
        with_zone = camera_observation(make_world(zone), 64).astype(float)
        without = camera_observation(make_world(), 64).astype(float)
        diff = np.any(with_zone != without, axis=2)
        assert diff.sum() > 20  # the patch is visible
        zone_rgb = np.array(make_world(zone).entities[6].record.rgb)
        blended = np.rint(ZONE_ALPHA * zone_rgb + (1.0 - ZONE_ALPHA) * without[diff])
        assert np.max(np.abs(blended - with_zone[diff])) <= 1.0

    def test_grayscale_is_rec601_of_color(self):
        w = make_world(item("Wall", 20, 28) + item("GoodGoal", 24, 26))
        rgb = camera_observation(w, 32).astype(np.float64)
        gray = camera_observation(w, 32, grayscale=True)
        expected = np.rint(rgb @ np.array([0.299, 0.587, 0.114])).astype(np.uint8)
        assert np.array_equal(gray, expected)

    def test_sign_glyph_rendered_on_facing_side(self):
        sign = item(
            "SignBoard", 20, 24, rot=180,
            extra=(
                "      symbolNames: [cross]\n"
                "      colors:\n      - !RGB {r: 200, g: 30, b: 30}\n"
            ),
        )
        img = camera_observation(make_world(sign, agent="x: 20, y: 0, z: 20"), 64)
        n = np.array([0.0, 0.0, -1.0])
        ink = lambert((200, 30, 30), n).astype(int)
        face = lambert(tuple(SIGN_BOARD_FACE), n).astype(int)
        flat_px = img.reshape(-1, 3).astype(int)
        has_ink = np.any(np.all(np.abs(flat_px - ink) <= 1, axis=1))
        has_face = np.any(np.all(np.abs(flat_px - face) <= 1, axis=1))
        assert has_ink and has_face

    def test_button_face_blue_from_front_only(self):
        # Button faces +z (yaw 0); the agent south of it sees the plain body.
        behind = camera_observation(
            make_world(item("SpawnerButton", 20, 24), agent="x: 20, y: 0, z: 20"), 64
        )
        front = camera_observation(
            make_world(item("SpawnerButton", 20, 16), agent="x: 20, y: 0, z: 20", rot=180), 64
        )
        blue = lambert(BUTTON_FACE_COLOR, np.array([0.0, 0.0, 1.0])).astype(int)
        fr = front.reshape(-1, 3).astype(int)
        bk = behind.reshape(-1, 3).astype(int)
        assert np.any(np.all(np.abs(fr - blue) <= 1, axis=1))
        blue_back = lambert(BUTTON_FACE_COLOR, np.array([0.0, 0.0, -1.0])).astype(int)
        assert not np.any(np.all(np.abs(bk - blue_back) <= 1, axis=1))

    def test_lights_out_black_frame(self):
        w = make_world(item("Wall", 20, 28))
        img = camera_observation(w, 16, lights_on=False)
        assert img.shape == (16, 16, 3)
        assert np.all(img == 0)
        gray = camera_observation(w, 16, grayscale=True, lights_on=False)
        assert gray.shape == (16, 16)
        assert np.all(gray == 0)


# --- spec plumbing and export -----------------------------------------------


class TestObsSpec:
    def test_channel_toggles(self):
        w = make_world()
        obs = build_observation(w, 100.0, ObsSpec(rays=9, camera=8, vector=True), lights_on=True)
        assert obs.raycast.shape == (8, 9)
        assert obs.camera.shape == (8, 8, 3)
        assert obs.vector.shape == (7,)
        off = build_observation(w, 100.0, ObsSpec(rays=None, camera=None, vector=False), True)
        assert off.raycast is None and off.camera is None and off.vector is None

    def test_vector_not_blanked_in_blackout(self):
        w = make_world()
        obs = build_observation(w, 55.0, ObsSpec(rays=5, camera=8, vector=True), lights_on=False)
        assert np.all(obs.raycast == 0.0)
        assert np.all(obs.camera == 0)
        assert obs.vector[0] == 55.0 and obs.vector[4] == 20.0

    def test_png_round_trip(self, tmp_path):
        from PIL import Image

        img = camera_observation(make_world(item("Wall", 20, 28)), 16)
        path = tmp_path / "frame.png"
        save_png(img, path)
        back = np.asarray(Image.open(path))
        assert np.array_equal(back, img)
