"""Observation channels: raycast matrix, camera tensor, vector summary.

Raycast rows by entity class:

    0 arena boundary          4 multi/valence-schedule goals
    1 immovable structures    5 negatively valenced (bad goals, zones)
    2 movable blocks          6 tree/hatch dispensers
    3 episode-ending goods    7 buttons

Ray 0 points dead ahead; the remaining rays fan out at equal spacing over
the field of view, enumerated left-first (column 1 is the first ray to the
left, column 2 the first to the right, and so on outward).  An entry is
1 - distance/max_range in the hit record's category row; columns with no
hit are all zero, and a lights-out step zeroes the whole matrix.

The camera is a pinhole at the agent's eye (sphere centre, 0.5 above the
ground when grounded) with a 60 degree square frustum: flat per-entity
color scaled by one fixed directional light plus ambient, checkered floor,
constant sky, translucent records alpha-composited front-to-back.  The
arena boundary renders only up to a low fence height so the sky stays
open.  Sign boards show their glyph on the facing side; buttons show their
pressable face in blue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config_dsl import ARENA_SIZE
from .entities import BUTTON_FACE_COLOR, BUTTON_FACE_HALF_ANGLE, EntityKind, sign_pixels
from .geometry import facing, yaw_matrix

RAYCAST_MAX_RANGE = math.sqrt(2.0) * ARENA_SIZE  # arena diagonal
CAMERA_FOV_DEGREES = 60.0
CAMERA_MIN_SIZE = 4
CAMERA_MAX_SIZE = 512
EYE_HEIGHT = 0.5

AMBIENT = 0.35
_LIGHT = np.array([-0.4, 0.85, -0.35])
LIGHT_DIR = _LIGHT / np.linalg.norm(_LIGHT)

SKY_COLOR = np.array([140.0, 185.0, 235.0])
FLOOR_LIGHT = np.array([172.0, 176.0, 160.0])
FLOOR_DARK = np.array([148.0, 152.0, 138.0])
APRON_COLOR = np.array([120.0, 122.0, 112.0])

_GRAY = np.array([0.299, 0.587, 0.114])


@dataclass
class ObsSpec:
    """Which channels an episode serves, and their resolutions."""

    rays: int | None = 15
    ray_fov: float = 60.0
    camera: int | None = None
    grayscale: bool = False
    vector: bool = True


@dataclass
class Observation:
    raycast: np.ndarray | None = None
    camera: np.ndarray | None = None
    vector: np.ndarray | None = None


def ray_angles(r: int, fov_degrees: float) -> np.ndarray:
    """Yaw offsets in enumeration order: 0, -s, +s, -2s, +2s, ..."""
    if r < 1 or r % 2 == 0:
        raise ValueError(f"ray count must be odd and positive, got {r}")
    if not 0.0 < fov_degrees <= 360.0:
        raise ValueError(f"field of view must be in (0, 360], got {fov_degrees}")
    out = np.zeros(r)
    spacing = fov_degrees / (r - 1) if r > 1 else 0.0
    for m in range(1, (r - 1) // 2 + 1):
        out[2 * m - 1] = -m * spacing
        out[2 * m] = m * spacing
    return out


_RAY_DIR_CACHE: dict[tuple[float, int, float], np.ndarray] = {}


def ray_directions(yaw: float, r: int, fov_degrees: float) -> np.ndarray:
    """Unit ray directions for a yaw-centred fan.  Cached and read-only:
    turning quantises yaw to a 6-degree lattice, so few keys recur per
    episode; the cache is cleared when spawn-yaw churn grows it too far.
    """
    key = (yaw, r, fov_degrees)
    cached = _RAY_DIR_CACHE.get(key)
    if cached is not None:
        return cached
    angles = ray_angles(r, fov_degrees)
    rad = np.radians(yaw + angles)
    dirs = np.stack([np.sin(rad), np.zeros(r), np.cos(rad)], axis=1)
    dirs.flags.writeable = False
    if len(_RAY_DIR_CACHE) >= 4096:
        _RAY_DIR_CACHE.clear()
    _RAY_DIR_CACHE[key] = dirs
    return dirs


def raycast_observation(
    world, r: int = 15, fov_degrees: float = 60.0, lights_on: bool = True
) -> np.ndarray:
    """The 8 x r category/proximity matrix (proximity = 1 - d/max_range)."""
    dirs = ray_directions(world.agent.body.yaw, r, fov_degrees)
    obs = np.zeros((8, r))
    if not lights_on:
        return obs
    origin = world.agent.body.center
    dist, rec = world.colliders.raycast(
        origin, dirs, RAYCAST_MAX_RANGE, exclude_eid=world.agent.eid
    )
    hit = rec >= 0
    cats = world.colliders.rec_categories()[rec[hit]]
    obs[cats, np.nonzero(hit)[0]] = 1.0 - dist[hit] / RAYCAST_MAX_RANGE
    return obs


def vector_observation(world, health: float) -> np.ndarray:
    """(health, velocity xyz, position xyz); position y is the base height."""
    body = world.agent.body
    return np.array(
        [
            float(health),
            float(body.velocity[0]),
            float(body.velocity[1]),
            float(body.velocity[2]),
            float(body.center[0]),
            float(body.center[1]) - body.radius,
            float(body.center[2]),
        ]
    )


# --- camera -----------------------------------------------------------------

_DIR_CACHE: dict[int, np.ndarray] = {}
_ROT_DIR_CACHE: dict[tuple[int, float], np.ndarray] = {}


def _local_dirs(k: int) -> np.ndarray:
    cached = _DIR_CACHE.get(k)
    if cached is not None:
        return cached
    half = math.tan(math.radians(CAMERA_FOV_DEGREES / 2.0))
    px = (np.arange(k) + 0.5) / k * 2.0 - 1.0
    xs, ys = np.meshgrid(px * half, -px * half)  # row 0 = top of frame
    d = np.stack([xs, ys, np.ones_like(xs)], axis=-1).reshape(-1, 3)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    _DIR_CACHE[k] = d
    return d


def _camera_dirs(k: int, yaw: float) -> np.ndarray:
    """World-frame camera rays, cached per (resolution, yaw) and read-only."""
    key = (k, yaw)
    cached = _ROT_DIR_CACHE.get(key)
    if cached is not None:
        return cached
    dirs = _local_dirs(k) @ yaw_matrix(yaw).T
    dirs.flags.writeable = False
    if len(_ROT_DIR_CACHE) >= 512:
        _ROT_DIR_CACHE.clear()
    _ROT_DIR_CACHE[key] = dirs
    return dirs


def _trace_opaque(world, origin, dirs):
    """First opaque hit per ray, with boundary fence see-through applied."""
    colliders = world.colliders
    agent_eid = world.agent.eid
    dist, rec, normals = colliders.trace_full(
        origin, dirs, 1e9, include=lambda rc: rc.eid != agent_eid and rc.alpha >= 1.0
    )
    # Fence band: boundary hits above the fence line see through to the sky.
    fences = [(i, r.fence_height) for i, r in enumerate(colliders.records) if r.fence_height > 0.0]
    if fences:
        hit_y = origin[1] + dirs[:, 1] * np.where(np.isfinite(dist), dist, 0.0)
        for i, fh in fences:
            over = (rec == i) & (hit_y > fh)
            if np.any(over):
                dist = np.where(over, np.inf, dist)
                rec = np.where(over, -1, rec)
    return dist, rec, normals


def view_columns(world, columns: int, lights_on: bool = True):
    """Per-column wall view for remote renderers: a horizontal fan over the
    camera's field of view at eye height.

    Returns (distance, rgb, category): distance is +inf where a column sees
    sky (or the whole frame during a blackout), rgb is the Lambert-shaded
    surface colour as uint8, category the hit record's raycast row.
    """
    if not 1 <= columns <= 1024:
        raise ValueError("view columns must be in [1, 1024]")
    dist = np.full(columns, np.inf)
    rgb = np.zeros((columns, 3), dtype=np.uint8)
    category = np.full(columns, -1, dtype=np.int64)
    if not lights_on:
        return dist, rgb, category

    body = world.agent.body
    half = math.tan(math.radians(CAMERA_FOV_DEGREES / 2.0))
    px = (np.arange(columns) + 0.5) / columns * 2.0 - 1.0  # left -> right
    local = np.stack([px * half, np.zeros(columns), np.ones(columns)], axis=-1)
    local /= np.linalg.norm(local, axis=1, keepdims=True)
    dirs = local @ yaw_matrix(body.yaw).T

    dist, rec, normals = _trace_opaque(world, body.center, dirs)
    hit = np.isfinite(dist)
    if np.any(hit):
        idx = np.nonzero(hit)[0]
        recs = rec[idx]
        colors = np.array([r.rgb for r in world.colliders.records])[recs]
        lam = AMBIENT + (1.0 - AMBIENT) * np.maximum(normals[idx] @ LIGHT_DIR, 0.0)
        rgb[idx] = np.clip(np.rint(colors * lam[:, None]), 0.0, 255.0).astype(np.uint8)
        category[idx] = world.colliders.rec_categories()[recs]
    return dist, rgb, category


def camera_observation(
    world, k: int = 64, grayscale: bool = False, lights_on: bool = True
) -> np.ndarray:
    if not CAMERA_MIN_SIZE <= k <= CAMERA_MAX_SIZE:
        raise ValueError(f"camera size must be in [{CAMERA_MIN_SIZE}, {CAMERA_MAX_SIZE}]")
    if not lights_on:
        shape = (k, k) if grayscale else (k, k, 3)
        return np.zeros(shape, dtype=np.uint8)

    body = world.agent.body
    origin = body.center
    dirs = _camera_dirs(k, body.yaw)
    n_rays = dirs.shape[0]
    colliders = world.colliders

    dist, rec, normals = _trace_opaque(world, origin, dirs)

    # Floor plane y = 0 (checker inside the arena, plain apron outside).
    down = dirs[:, 1] < -1e-9
    t_floor = np.where(down, origin[1] / np.maximum(-dirs[:, 1], 1e-12), np.inf)
    floor_hit = t_floor < dist

    color = np.empty((n_rays, 3))
    color[:] = SKY_COLOR

    ft = np.where(np.isfinite(t_floor), t_floor, 0.0)
    fx = origin[0] + dirs[:, 0] * ft
    fz = origin[2] + dirs[:, 2] * ft
    inside = (fx >= 0.0) & (fx <= ARENA_SIZE) & (fz >= 0.0) & (fz <= ARENA_SIZE)
    parity = (np.floor(fx) + np.floor(fz)).astype(np.int64) % 2 == 0
    floor_color = np.where(parity[:, None], FLOOR_LIGHT[None, :], FLOOR_DARK[None, :])
    floor_color = np.where(inside[:, None], floor_color, APRON_COLOR[None, :])
    color[floor_hit] = floor_color[floor_hit]

    solid_hit = np.isfinite(dist) & ~floor_hit
    if np.any(solid_hit):
        idx = np.nonzero(solid_hit)[0]
        recs = rec[idx]
        rgb = np.array([r.rgb for r in colliders.records])[recs]
        lam = AMBIENT + (1.0 - AMBIENT) * np.maximum(normals[idx] @ LIGHT_DIR, 0.0)
        color[idx] = rgb * lam[:, None]
        pts = origin[None, :] + dirs[idx] * dist[idx, None]
        _paint_faces(world, idx, recs, pts, lam, color)

    base_t = np.where(floor_hit, t_floor, dist)
    _composite_translucent(world, origin, dirs, base_t, color)

    img = np.clip(np.rint(color), 0.0, 255.0).astype(np.uint8).reshape(k, k, 3)
    if grayscale:
        img = np.rint(img.astype(np.float64) @ _GRAY).astype(np.uint8)
    return img


def _paint_faces(world, idx, recs, pts, lam, color) -> None:
    """Overlay sign glyphs and button faces on already-shaded pixels."""
    for rec_i in np.unique(recs):
        record = world.colliders.records[rec_i]
        ent = world.entities.get(record.eid)
        if ent is None:
            continue
        sel = recs == rec_i
        rows = idx[sel]
        if ent.kind is EntityKind.SIGN_BOARD and ent.sign is not None:
            R = yaw_matrix(record.yaw)
            lp = (pts[sel] - record.center) @ R  # local coords
            hx, hy, hz = ent.size[0] / 2.0, ent.size[1] / 2.0, ent.size[2] / 2.0
            front = lp[:, 2] >= hz - 1e-6
            if not np.any(front):
                continue
            grid = sign_pixels(ent.sign)
            gr, gc = grid.shape[0], grid.shape[1]
            u = np.clip((hx - lp[front, 0]) / (2.0 * hx), 0.0, 1.0 - 1e-9)
            v = np.clip((hy - lp[front, 1]) / (2.0 * hy), 0.0, 1.0 - 1e-9)
            cell = grid[(v * gr).astype(int), (u * gc).astype(int)].astype(np.float64)
            color[rows[front]] = cell * lam[sel][front, None]
        elif ent.kind is EntityKind.SPAWNER_BUTTON:
            flat = pts[sel] - np.asarray(ent.base_position)
            flat[:, 1] = 0.0
            norms = np.linalg.norm(flat, axis=1)
            f = facing(ent.yaw)
            with np.errstate(invalid="ignore"):
                cosang = (flat @ f) / np.where(norms < 1e-9, 1.0, norms)
            face = cosang >= math.cos(math.radians(BUTTON_FACE_HALF_ANGLE))
            face &= norms >= 1e-9
            if np.any(face):
                blue = np.asarray(BUTTON_FACE_COLOR, dtype=np.float64)
                color[rows[face]] = blue[None, :] * lam[sel][face, None]


def _composite_translucent(world, origin, dirs, base_t, color) -> None:
    agent_eid = world.agent.eid
    layers = world.colliders.trace_group_hits(
        origin, dirs, 1e9, include=lambda rc: rc.eid != agent_eid and rc.alpha < 1.0
    )
    if not layers:
        return
    ts = np.stack([t for _, t in layers])  # (L, R)
    ts = np.where(ts < base_t[None, :], ts, np.inf)
    if not np.isfinite(ts).any():
        return
    order = np.argsort(ts, axis=0)  # nearest translucent first, per pixel
    recs = [world.colliders.records[i] for i, _ in layers]
    rgbs = np.array([r.rgb for r in recs])
    alphas = np.array([r.alpha for r in recs])
    acc = np.zeros_like(color)
    trans = np.ones(color.shape[0])
    for layer in range(len(layers)):
        pick_layer = order[layer]  # (R,) indices into layers
        t_here = np.take_along_axis(ts, pick_layer[None, :], axis=0)[0]
        live = np.isfinite(t_here)
        if not np.any(live):
            break
        a = alphas[pick_layer] * live
        acc += (trans * a)[:, None] * rgbs[pick_layer]
        trans = trans * (1.0 - a)
    color[:] = acc + trans[:, None] * color


def save_png(array: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


def build_observation(world, health: float, spec: ObsSpec, lights_on: bool) -> Observation:
    obs = Observation()
    if spec.rays is not None:
        obs.raycast = raycast_observation(world, spec.rays, spec.ray_fov, lights_on)
    if spec.camera is not None:
        obs.camera = camera_observation(world, spec.camera, spec.grayscale, lights_on)
    if spec.vector:
        obs.vector = vector_observation(world, health)
    return obs
