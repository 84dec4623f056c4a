"""Collision and ray-query geometry for the arena.

Conventions: y is up, the floor is the plane y = 0, and the arena spans
[0, ARENA_SIZE] on x and z.  Yaw is measured in degrees clockwise when viewed
from above, with yaw 0 facing +z, so facing(yaw) = (sin yaw, 0, cos yaw).
Positive yaw offsets turn right, negative turn left.

Three collider families cover every entity: spheres, oriented boxes (full 3x3
rotation so tunnel-arch segments can roll about their long axis), and ramp
wedges (right prisms with a sloped top face).  A ColliderSet compiles records
into flat numpy arrays; query order is fixed so results are bit-reproducible.

Wedge local frame: width along x, length along z, the sloped face rising from
the low edge at +z/2 (height 0) to the high edge at -z/2 (height h).  Surface
gradient is h / l; gradients above WALKABLE_GRADIENT behave like walls.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

ARENA_SIZE = 40.0
# Longest sight line: the arena diagonal.
MAX_RAY_RANGE = math.sqrt(2.0) * ARENA_SIZE

# Ramps steeper than 4:1 (height:length) cannot be walked up.
WALKABLE_GRADIENT = 4.0
# cos of the steepest walkable surface normal against +y, with slack so a
# gradient of exactly 4 classifies as walkable.
WALKABLE_NY = 1.0 / math.sqrt(1.0 + WALKABLE_GRADIENT**2) - 1e-9

_EPS = 1e-12
_INF = float("inf")

FLOOR_EID = -5
BOUNDARY_EIDS = (-1, -2, -3, -4)

# Debug escape hatch: False recompiles the flat arrays on every body move.
PATCH_COMPILED = True

# Debug escape hatch: False disables AABB candidate pruning in the overlap
# and sweep queries (every column gets the exact narrow-phase test).
BROAD_PHASE = True
# Below this many compiled columns a full scan is cheaper than pruning.
_BROAD_MIN_COLS = 16
# Query boxes grow by this much, so conservative bound arithmetic can round
# either way without ever dropping a touching column.
_AABB_SLACK = 1e-6


def yaw_matrix(yaw_deg: float) -> np.ndarray:
    """World-from-local rotation for a yaw in degrees (clockwise from above)."""
    a = math.radians(yaw_deg)
    c, s = math.cos(a), math.sin(a)
    # Columns are the local x/y/z axes in world coordinates.
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def roll_matrix(roll_deg: float) -> np.ndarray:
    """Rotation about the local z axis (used by tunnel arch segments)."""
    a = math.radians(roll_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def facing(yaw_deg: float) -> np.ndarray:
    """Unit horizontal facing vector for a yaw in degrees."""
    a = math.radians(yaw_deg)
    return np.array([math.sin(a), 0.0, math.cos(a)])


def wrap_yaw(yaw_deg: float) -> float:
    """Normalize a yaw to [0, 360)."""
    return yaw_deg % 360.0


# ---------------------------------------------------------------------------
# Shape descriptions (pre-compilation)


@dataclass
class SphereShape:
    radius: float


@dataclass
class BoxPart:
    """One oriented box: local-frame offset from the record centre, half
    extents, and an extra local rotation composed with the record yaw."""

    offset: np.ndarray
    half: np.ndarray
    local_rot: np.ndarray | None = None


@dataclass
class BoxShape:
    """A compound of one or more oriented boxes sharing a pose."""

    parts: list[BoxPart]

    @staticmethod
    def single(half) -> "BoxShape":
        return BoxShape([BoxPart(np.zeros(3), np.asarray(half, dtype=float))])


@dataclass
class WedgeShape:
    """Ramp prism; size = (width x, height y, length z)."""

    size: np.ndarray

    @property
    def gradient(self) -> float:
        return self.size[1] / self.size[2]


@dataclass
class ColliderRecord:
    """One compiled collider with everything queries need to know."""

    eid: int
    shape: SphereShape | BoxShape | WedgeShape
    center: np.ndarray  # shape centre (sphere centre / box centre / wedge base centre)
    yaw: float
    category: int  # raycast category row, 0..7
    solid: bool = True  # participates in collision blocking
    consumable: bool = False  # agent passes through and consumes (goals)
    movable: bool = False
    rgb: tuple[float, float, float] = (128.0, 128.0, 128.0)
    alpha: float = 1.0  # < 1 renders translucent
    fence_height: float = 0.0  # > 0: render only below this height (arena fence)


# ---------------------------------------------------------------------------
# Wedge plane machinery

_WEDGE_PLANE_COUNT = 5


def _wedge_planes(size: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Local half-space planes (n, b) with inside = {p : n.p <= b}.

    Order: +x side, -x side, bottom, back (high edge, -z), slope.  The wedge
    base centre is the local origin; the prism occupies y in [0, h].
    """
    w, h, length = size
    slope_n = np.array([0.0, length, h]) / math.hypot(length, h)
    slope_b = slope_n[1] * h + slope_n[2] * (-length / 2.0)  # plane through high edge
    normals = np.array(
        [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
            slope_n,
        ]
    )
    offsets = np.array([w / 2.0, w / 2.0, 0.0, length / 2.0, slope_b])
    return normals, offsets


def wedge_surface_height(size: np.ndarray, z_local: float) -> float:
    """Height of the sloped face at a local z inside the footprint."""
    w, h, length = size
    return h * (length / 2.0 - z_local) / length


def _closest_point_triangle_2d(p, a, b, c):
    """Closest point to p on triangle abc, all 2-vectors (numpy)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        return a
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0.0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        return a + ab * (d1 / (d1 - d3))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0.0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        return a + ac * (d2 / (d2 - d6))
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + (c - b) * w
    # Inside the triangle.
    return p


# ---------------------------------------------------------------------------
# Contact record


@dataclass
class Contact:
    eid: int
    normal: np.ndarray  # pointing from the collider toward the body
    depth: float
    record: ColliderRecord | None = None


@dataclass
class SweepHit:
    toi: float  # fraction of the displacement [0, 1]
    eid: int
    normal: np.ndarray
    record: ColliderRecord | None = None
    toi_exit: float = 1.0  # conservative exit fraction (refinement window)
    rec_index: int = -1
    exact: bool = False  # True when toi/normal need no refinement


def _argmin_rows(t: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First-minimum index and value along axis 1.

    Matches np.argmin semantics (ties keep the earliest column); the
    column-chain path exists because numpy reductions over a short last axis
    pay per-row overhead that dwarfs the arithmetic.
    """
    n = t.shape[1]
    if n > 3:
        j = np.argmin(t, axis=1)
        return j, t[rows, j]
    j = np.zeros(t.shape[0], dtype=np.int64)
    bv = t[:, 0]
    for c in range(1, n):
        tc = t[:, c]
        take = tc < bv
        j = np.where(take, c, j)
        bv = np.where(take, tc, bv)
    return j, bv


# ---------------------------------------------------------------------------
# Compiled collider set


class ColliderSet:
    """Flat-array compilation of collider records for vectorized queries.

    Records keep their insertion order; every query breaks distance ties by
    preferring the earlier (lower-index â†’ lower-eid) record, which makes
    results independent of grouping.
    """

    def __init__(self):
        self.records: list[ColliderRecord] = []
        self._dirty = True
        # sphere arrays
        self._sp_c = np.zeros((0, 3))
        self._sp_r = np.zeros(0)
        self._sp_rec: list[int] = []
        # box arrays (one row per part)
        self._bx_c = np.zeros((0, 3))
        self._bx_R = np.zeros((0, 3, 3))
        self._bx_h = np.zeros((0, 3))
        self._bx_rec: list[int] = []
        # wedge arrays
        self._wd_c = np.zeros((0, 3))
        self._wd_size = np.zeros((0, 3))
        self._wd_R = np.zeros((0, 3, 3))
        self._wd_rec: list[int] = []

    # -- construction -------------------------------------------------------

    def add(self, rec: ColliderRecord) -> None:
        self.records.append(rec)
        self._dirty = True

    def remove_eid(self, eid: int) -> None:
        self.records = [r for r in self.records if r.eid != eid]
        self._dirty = True

    def move(self, eid: int, new_center: np.ndarray) -> None:
        """Update a record centre in place (dynamic bodies each step).

        While the set is compiled, the flat arrays are patched with the same
        values a recompile would produce, so moving a body does not force a
        rebuild of everything else.
        """
        new_center = np.asarray(new_center, dtype=float)
        if self._dirty or not PATCH_COMPILED:
            for r in self.records:
                if r.eid == eid:
                    r.center = new_center
            self._dirty = True
            return
        for i in self._eid_rows.get(eid, ()):
            rec = self.records[i]
            rec.center = new_center
            if isinstance(rec.shape, BoxShape):
                Ry = yaw_matrix(rec.yaw)
                for (_, col), part in zip(self._rec_cols[i], rec.shape.parts):
                    bc = new_center + Ry @ part.offset
                    self._bx_c[col] = bc
                    row = self._n_sp + col
                    self._aabb_lo[row] = bc - self._bx_ext[col]
                    self._aabb_hi[row] = bc + self._bx_ext[col]
            else:
                for kind, col in self._rec_cols[i]:
                    if kind == "sp":
                        self._sp_c[col] = new_center
                        r = self._sp_r[col]
                        self._aabb_lo[col] = new_center - r
                        self._aabb_hi[col] = new_center + r
                    else:
                        self._wd_c[col] = new_center
                        row = self._n_sp + self._n_bx + col
                        mid = new_center + self._wd_lift[col]
                        self._aabb_lo[row] = mid - self._wd_ext[col]
                        self._aabb_hi[row] = mid + self._wd_ext[col]

    def refresh_record(self, eid: int) -> None:
        """Re-read a record's centre and sphere radius into the compiled
        arrays, for callers that edit those fields in place (growing and
        shrinking goals).  Non-sphere edits fall back to a full recompile."""
        if self._dirty:
            return
        for i in self._eid_rows.get(eid, ()):
            rec = self.records[i]
            if not isinstance(rec.shape, SphereShape):
                self._dirty = True
                return
            for _, col in self._rec_cols[i]:
                self._sp_c[col] = rec.center
                self._sp_r[col] = rec.shape.radius
                self._aabb_lo[col] = rec.center - rec.shape.radius
                self._aabb_hi[col] = rec.center + rec.shape.radius

    def _compile(self) -> None:
        sp_c, sp_r, sp_rec = [], [], []
        bx_c, bx_R, bx_h, bx_rec = [], [], [], []
        wd_c, wd_size, wd_R, wd_rec = [], [], [], []
        # Compile in ascending eid order so first-minimum scans break exact
        # distance ties toward the lower eid within each shape family.
        order = sorted(range(len(self.records)), key=lambda i: self.records[i].eid)
        for i in order:
            rec = self.records[i]
            if isinstance(rec.shape, SphereShape):
                sp_c.append(rec.center)
                sp_r.append(rec.shape.radius)
                sp_rec.append(i)
            elif isinstance(rec.shape, BoxShape):
                Ry = yaw_matrix(rec.yaw)
                for part in rec.shape.parts:
                    R = Ry if part.local_rot is None else Ry @ part.local_rot
                    bx_c.append(rec.center + Ry @ part.offset)
                    bx_R.append(R)
                    bx_h.append(part.half)
                    bx_rec.append(i)
            else:
                wd_c.append(rec.center)
                wd_size.append(rec.shape.size)
                wd_R.append(yaw_matrix(rec.yaw))
                wd_rec.append(i)
        self._sp_c = np.array(sp_c) if sp_c else np.zeros((0, 3))
        self._sp_r = np.array(sp_r) if sp_r else np.zeros(0)
        self._sp_rec = sp_rec
        self._bx_c = np.array(bx_c) if bx_c else np.zeros((0, 3))
        self._bx_R = np.array(bx_R) if bx_R else np.zeros((0, 3, 3))
        self._bx_h = np.array(bx_h) if bx_h else np.zeros((0, 3))
        self._bx_rec = bx_rec
        self._wd_c = np.array(wd_c) if wd_c else np.zeros((0, 3))
        self._wd_size = np.array(wd_size) if wd_size else np.zeros((0, 3))
        self._wd_R = np.array(wd_R) if wd_R else np.zeros((0, 3, 3))
        self._wd_rec = wd_rec
        # Columns per record, for single-record depth queries.
        self._rec_cols = [[] for _ in self.records]
        for col, i in enumerate(sp_rec):
            self._rec_cols[i].append(("sp", col))
        for col, i in enumerate(bx_rec):
            self._rec_cols[i].append(("bx", col))
        for col, i in enumerate(wd_rec):
            self._rec_cols[i].append(("wd", col))
        # Record rows per eid, for in-place centre patches.
        self._eid_rows: dict[int, list[int]] = {}
        for i, rec in enumerate(self.records):
            self._eid_rows.setdefault(rec.eid, []).append(i)
        # Query-side caches: per-family record-index and eid arrays for the
        # ray queries, categories per record, wedge plane tables in local and
        # world frames.
        self._sp_rec_arr = np.array(sp_rec, dtype=int)
        self._bx_rec_arr = np.array(bx_rec, dtype=int)
        self._wd_rec_arr = np.array(wd_rec, dtype=int)
        self._sp_eids = np.array([self.records[i].eid for i in sp_rec], dtype=np.int64)
        self._bx_eids = np.array([self.records[i].eid for i in bx_rec], dtype=np.int64)
        self._wd_eids = np.array([self.records[i].eid for i in wd_rec], dtype=np.int64)
        self._rec_cat = np.array([r.category for r in self.records], dtype=np.int64)
        self._wd_pl = [_wedge_planes(s) for s in self._wd_size]
        self._wd_world_n = [
            np.stack([self._wd_R[k] @ pl[0][p] for p in range(_WEDGE_PLANE_COUNT)])
            for k, pl in enumerate(self._wd_pl)
        ]
        # One conservative world AABB per column (spheres, then box parts,
        # then wedges) for broad-phase pruning of the overlap/sweep queries.
        n_sp, n_bx, n_wd = len(sp_rec), len(bx_rec), len(wd_rec)
        self._n_sp, self._n_bx = n_sp, n_bx
        lo = np.empty((n_sp + n_bx + n_wd, 3))
        hi = np.empty_like(lo)
        if n_sp:
            lo[:n_sp] = self._sp_c - self._sp_r[:, None]
            hi[:n_sp] = self._sp_c + self._sp_r[:, None]
        if n_bx:
            self._bx_ext = np.einsum("nij,nj->ni", np.abs(self._bx_R), self._bx_h)
            lo[n_sp : n_sp + n_bx] = self._bx_c - self._bx_ext
            hi[n_sp : n_sp + n_bx] = self._bx_c + self._bx_ext
        else:
            self._bx_ext = np.zeros((0, 3))
        if n_wd:
            lift = np.zeros((n_wd, 3))
            lift[:, 1] = self._wd_size[:, 1] / 2.0
            self._wd_lift = np.einsum("nij,nj->ni", self._wd_R, lift)
            self._wd_ext = np.einsum(
                "nij,nj->ni", np.abs(self._wd_R), self._wd_size / 2.0
            )
            mid = self._wd_c + self._wd_lift
            lo[n_sp + n_bx :] = mid - self._wd_ext
            hi[n_sp + n_bx :] = mid + self._wd_ext
        else:
            self._wd_lift = np.zeros((0, 3))
            self._wd_ext = np.zeros((0, 3))
        self._aabb_lo = lo
        self._aabb_hi = hi
        self._dirty = False

    def _ensure(self) -> None:
        if self._dirty:
            self._compile()

    def _mask(self, rec_indices: list[int], include) -> np.ndarray:
        if not rec_indices:
            return np.zeros(0, dtype=bool)
        return np.array([include(self.records[i]) for i in rec_indices])

    def rec_categories(self) -> np.ndarray:
        """Raycast category row per record index (compiled order)."""
        self._ensure()
        return self._rec_cat

    def _candidate_cols(self, q_lo, q_hi):
        """Per-family column indices whose AABB overlaps the query box, or
        None meaning scan everything (pruning disabled or the set is small).

        Pruning is result-neutral: a column whose AABB misses the padded
        query box is separated from the swept volume by more than the
        contact radius, so its exact test could only ever produce
        conservative hits that refinement discards.
        """
        lo = self._aabb_lo
        if not BROAD_PHASE or lo.shape[0] < _BROAD_MIN_COLS:
            return None
        hi = self._aabb_hi
        m = (
            (lo[:, 0] <= q_hi[0])
            & (hi[:, 0] >= q_lo[0])
            & (lo[:, 1] <= q_hi[1])
            & (hi[:, 1] >= q_lo[1])
            & (lo[:, 2] <= q_hi[2])
            & (hi[:, 2] >= q_lo[2])
        )
        idx = np.nonzero(m)[0]
        a = int(np.searchsorted(idx, self._n_sp))
        b = int(np.searchsorted(idx, self._n_sp + self._n_bx))
        return idx[:a], idx[a:b] - self._n_sp, idx[b:] - (self._n_sp + self._n_bx)

    # -- ray queries ---------------------------------------------------------

    def _ray_boxes(self, origin, dirs, want_normals: bool = True):
        """(t_enter, axis, sign) per (ray, box part); misses are +inf.

        axis/sign are None when want_normals is False (distance-only query).
        Axis-2 reductions are spelled as chained minimum/maximum and the
        parallel-ray fixup is skipped when no component is parallel: both
        produce the same elements with far less per-row numpy overhead.
        """
        n = self._bx_c.shape[0]
        R = dirs.shape[0]
        if n == 0:
            return np.full((R, 0), _INF), None, None
        lo = np.einsum("nij,ni->nj", self._bx_R, origin[None, :] - self._bx_c)
        ld = np.einsum("nij,ri->rnj", self._bx_R, dirs)
        lo = lo[None, :, :]
        h = self._bx_h[None, :, :]
        par = np.abs(ld) < _EPS
        safe = np.where(par, _EPS, ld) if par.any() else ld
        t1 = (-h - lo) / safe
        t2 = (h - lo) / safe
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        if safe is not ld:
            inside = np.abs(lo) <= h
            tmin = np.where(par, np.where(inside, -_INF, _INF), tmin)
            tmax = np.where(par, np.where(inside, _INF, -_INF), tmax)
        m0, m1, m2 = tmin[:, :, 0], tmin[:, :, 1], tmin[:, :, 2]
        t_enter = np.maximum(np.maximum(m0, m1), m2)
        t_exit = np.minimum(np.minimum(tmax[:, :, 0], tmax[:, :, 1]), tmax[:, :, 2])
        hit = (t_enter <= t_exit) & (t_exit >= 0.0)
        t = np.where(hit, np.maximum(t_enter, 0.0), _INF)
        if not want_normals:
            return t, None, None
        # First-maximum axis, then the matching direction component.
        axis = np.where(m0 >= m1, np.where(m0 >= m2, 0, 2), np.where(m1 >= m2, 1, 2))
        ld_ax = np.where(axis == 0, ld[:, :, 0], np.where(axis == 1, ld[:, :, 1], ld[:, :, 2]))
        sign = -np.sign(ld_ax)
        return t, axis, sign

    def _ray_spheres(self, origin, dirs):
        n = self._sp_c.shape[0]
        R = dirs.shape[0]
        if n == 0:
            return np.full((R, 0), _INF)
        oc = origin[None, :] - self._sp_c  # (n, 3)
        b = np.einsum("rj,nj->rn", dirs, oc)
        c = np.einsum("nj,nj->n", oc, oc) - self._sp_r**2
        disc = b * b - c[None, :]
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 >= 0.0, t0, np.where(t1 >= 0.0, 0.0, _INF))
        return np.where(ok, t, _INF)

    def _ray_wedges(self, origin, dirs):
        """(t_enter, plane_idx) per (ray, wedge); misses +inf.

        The length-5 plane reductions run as column chains (first-maximum
        kept, like argmax) to dodge numpy's per-row reduction overhead.
        """
        n = self._wd_c.shape[0]
        R = dirs.shape[0]
        if n == 0:
            return np.full((R, 0), _INF), None
        t_all = np.full((R, n), _INF)
        plane_all = np.zeros((R, n), dtype=int)
        for k in range(n):
            normals, offsets = self._wd_pl[k]
            Rm = self._wd_R[k]
            lo = Rm.T @ (origin - self._wd_c[k])
            ld = dirs @ Rm  # (R, 3)
            denom = ld @ normals.T  # (R, 5)
            dist = offsets[None, :] - lo @ normals.T  # b - n.o, per plane
            neg = denom < -_EPS
            pos = denom > _EPS
            with np.errstate(divide="ignore", invalid="ignore"):
                q = dist / denom
            t_entry = np.where(neg, q, -_INF)
            t_exit = np.where(pos, q, _INF)
            # Parallel and outside -> miss.
            par = ~(neg | pos)
            enter_idx = np.zeros(R, dtype=np.int64)
            t_enter = t_entry[:, 0]
            t_ex = t_exit[:, 0]
            any_par_out = par[:, 0] & (dist[:, 0] < 0.0)
            for p in range(1, _WEDGE_PLANE_COUNT):
                ep = t_entry[:, p]
                take = ep > t_enter
                enter_idx = np.where(take, p, enter_idx)
                t_enter = np.where(take, ep, t_enter)
                t_ex = np.minimum(t_ex, t_exit[:, p])
                any_par_out = any_par_out | (par[:, p] & (dist[:, p] < 0.0))
            ok = (t_enter <= t_ex) & (t_ex >= 0.0) & ~any_par_out
            t_all[:, k] = np.where(ok, np.maximum(t_enter, 0.0), _INF)
            plane_all[:, k] = enter_idx
        return t_all, plane_all

    def raycast(self, origin, dirs, max_range: float, include=None, exclude_eid=None):
        """Nearest hit per ray.

        origin: (3,); dirs: (R, 3) unit vectors.  Filter with `include`
        (predicate over ColliderRecord) or the cheaper `exclude_eid` (skip
        one eid — the common self-exclusion).  Returns (dist, rec_index)
        arrays; misses have dist = +inf and rec_index = -1.
        """
        self._ensure()
        origin = np.asarray(origin, dtype=float)
        dirs = np.asarray(dirs, dtype=float)
        R = dirs.shape[0]
        rows = np.arange(R)
        best_t = np.full(R, _INF)
        best_rec = np.full(R, -1, dtype=int)
        best_eid = np.full(R, np.iinfo(np.int64).max, dtype=np.int64)

        def family_mask(rec_indices, eids):
            if include is not None:
                return self._mask(rec_indices, include)
            if exclude_eid is not None:
                return eids != exclude_eid
            return None

        def consider(t, rec_arr, eid_arr, mask):
            nonlocal best_t, best_rec, best_eid
            if mask is not None and not mask.all():
                t = np.where(mask[None, :], t, _INF)
            t = np.where(t <= max_range, t, _INF)
            j, tm = _argmin_rows(t, rows)
            fin = np.isfinite(tm)
            # A large finite stand-in for misses keeps inf - inf out of the
            # tie test; the final `& fin` discards those rays either way.
            tm_f = np.where(fin, tm, 1e300)
            better = tm_f < best_t - 1e-12
            eids = eid_arr[j]
            # Exact distance tie across shape families: lower eid wins.
            tie = (np.abs(tm_f - best_t) <= 1e-12) & (eids < best_eid)
            upd = (better | tie) & fin
            best_t = np.where(upd, tm, best_t)
            best_rec = np.where(upd, rec_arr[j], best_rec)
            best_eid = np.where(upd, eids, best_eid)

        if self._bx_c.shape[0]:
            tb, _, _ = self._ray_boxes(origin, dirs, want_normals=False)
            consider(tb, self._bx_rec_arr, self._bx_eids, family_mask(self._bx_rec, self._bx_eids))
        if self._sp_c.shape[0]:
            ts = self._ray_spheres(origin, dirs)
            consider(ts, self._sp_rec_arr, self._sp_eids, family_mask(self._sp_rec, self._sp_eids))
        if self._wd_c.shape[0]:
            tw, _ = self._ray_wedges(origin, dirs)
            consider(tw, self._wd_rec_arr, self._wd_eids, family_mask(self._wd_rec, self._wd_eids))
        return best_t, best_rec

    # -- trace with normals (camera rendering) -------------------------------

    def trace_full(self, origin, dirs, max_range: float, include=None):
        """Nearest hit per ray with normals: (dist, rec_index, normal (R,3)).

        Slower than raycast; intended for rendering-scale ray batches.
        """
        self._ensure()
        origin = np.asarray(origin, dtype=float)
        dirs = np.asarray(dirs, dtype=float)
        R = dirs.shape[0]
        rows = np.arange(R)
        best_t = np.full(R, _INF)
        best_rec = np.full(R, -1, dtype=int)
        normals = np.zeros((R, 3))
        inc = include if include is not None else (lambda r: True)

        if self._bx_c.shape[0]:
            tb, axis, sign = self._ray_boxes(origin, dirs)
            mask = self._mask(self._bx_rec, inc)
            if not mask.all():
                tb = np.where(mask[None, :], tb, _INF)
            tb = np.where(tb <= max_range, tb, _INF)
            j, tm = _argmin_rows(tb, rows)
            upd = tm < best_t
            best_t = np.where(upd, tm, best_t)
            best_rec = np.where(upd, self._bx_rec_arr[j], best_rec)
            ax = axis[rows, j]
            sg = sign[rows, j]
            cols = self._bx_R[j]  # (R,3,3)
            n = cols[rows, :, ax] * sg[:, None]
            normals = np.where(upd[:, None], n, normals)

        if self._sp_c.shape[0]:
            ts = self._ray_spheres(origin, dirs)
            mask = self._mask(self._sp_rec, inc)
            if not mask.all():
                ts = np.where(mask[None, :], ts, _INF)
            ts = np.where(ts <= max_range, ts, _INF)
            j, tm = _argmin_rows(ts, rows)
            upd = tm < best_t
            tm_safe = np.where(np.isfinite(tm), tm, 0.0)  # misses are discarded below
            pts = origin[None, :] + dirs * tm_safe[:, None]
            n = pts - self._sp_c[j]
            nn = n[:, 0] * n[:, 0] + n[:, 1] * n[:, 1] + n[:, 2] * n[:, 2]
            norm = np.sqrt(nn)[:, None]
            n = n / np.where(norm < _EPS, 1.0, norm)
            best_t = np.where(upd, tm, best_t)
            best_rec = np.where(upd, self._sp_rec_arr[j], best_rec)
            normals = np.where(upd[:, None], n, normals)

        if self._wd_c.shape[0]:
            tw, plane = self._ray_wedges(origin, dirs)
            mask = self._mask(self._wd_rec, inc)
            if not mask.all():
                tw = np.where(mask[None, :], tw, _INF)
            tw = np.where(tw <= max_range, tw, _INF)
            j, tm = _argmin_rows(tw, rows)
            upd = tm < best_t
            if np.any(upd):
                n = np.zeros((R, 3))
                for wi in np.unique(j[upd]):
                    sel = upd & (j == wi)
                    n[sel] = self._wd_world_n[wi][plane[sel, wi]]
                best_t = np.where(upd, tm, best_t)
                best_rec = np.where(upd, self._wd_rec_arr[j], best_rec)
                normals = np.where(upd[:, None], n, normals)

        return best_t, best_rec, normals

    def trace_group_hits(self, origin, dirs, max_range: float, include):
        """All per-record hit distances for rays: list of (rec_index, t (R,)).

        Used by the renderer to gather translucent layers; t is +inf on miss.
        """
        self._ensure()
        if not any(include(r) for r in self.records):
            return []
        origin = np.asarray(origin, dtype=float)
        dirs = np.asarray(dirs, dtype=float)
        out = []
        bx_cols = [col for col, rec_i in enumerate(self._bx_rec) if include(self.records[rec_i])]
        if bx_cols:
            tb, _, _ = self._ray_boxes(origin, dirs, want_normals=False)
            for col in bx_cols:
                t = tb[:, col]
                out.append((self._bx_rec[col], np.where(t <= max_range, t, _INF)))
        sp_cols = [col for col, rec_i in enumerate(self._sp_rec) if include(self.records[rec_i])]
        if sp_cols:
            ts = self._ray_spheres(origin, dirs)
            for col in sp_cols:
                t = ts[:, col]
                out.append((self._sp_rec[col], np.where(t <= max_range, t, _INF)))
        wd_cols = [col for col, rec_i in enumerate(self._wd_rec) if include(self.records[rec_i])]
        if wd_cols:
            tw, _ = self._ray_wedges(origin, dirs)
            for col in wd_cols:
                t = tw[:, col]
                out.append((self._wd_rec[col], np.where(t <= max_range, t, _INF)))
        # Multi-part records (compounds): merge to the nearest part.
        merged: dict[int, np.ndarray] = {}
        for rec_i, t in out:
            if rec_i in merged:
                merged[rec_i] = np.minimum(merged[rec_i], t)
            else:
                merged[rec_i] = t
        return sorted(merged.items())

    # -- overlap queries -----------------------------------------------------

    def sphere_contacts(self, center, radius: float, include=None) -> list[Contact]:
        """Exact contacts of a sphere against all included records."""
        self._ensure()
        center = np.asarray(center, dtype=float)
        inc = include if include is not None else (lambda r: True)
        contacts: list[Contact] = []
        # Candidate pruning is conservative: a positive-depth contact implies
        # the centre lies within `radius` of the shape, hence of its box.
        pad = radius + _AABB_SLACK
        cand = self._candidate_cols(center - pad, center + pad)
        if cand is None:
            sp_cols: Iterable[int] = range(len(self._sp_rec))
            bx_cols: Iterable[int] = range(len(self._bx_rec))
            wd_cols: Iterable[int] = range(len(self._wd_rec))
        else:
            sp_cols, bx_cols, wd_cols = cand

        for col in sp_cols:
            rec = self.records[self._sp_rec[col]]
            if not inc(rec):
                continue
            d = center - self._sp_c[col]
            dist = math.sqrt(float(d @ d))
            depth = radius + self._sp_r[col] - dist
            if depth > 0.0:
                n = d / dist if dist > _EPS else np.array([0.0, 1.0, 0.0])
                contacts.append(Contact(rec.eid, n, depth, rec))

        for col in bx_cols:
            rec = self.records[self._bx_rec[col]]
            if not inc(rec):
                continue
            R = self._bx_R[col]
            h = self._bx_h[col]
            lp = R.T @ (center - self._bx_c[col])
            q = np.clip(lp, -h, h)
            d = lp - q
            dist2 = float(d @ d)
            if dist2 > _EPS:
                dist = math.sqrt(dist2)
                depth = radius - dist
                if depth > 0.0:
                    contacts.append(Contact(rec.eid, R @ (d / dist), depth, rec))
            else:
                # Centre inside the box: push out along the least-penetrated face.
                pen = h - np.abs(lp)
                ax = int(np.argmin(pen))
                n_local = np.zeros(3)
                n_local[ax] = 1.0 if lp[ax] >= 0.0 else -1.0
                contacts.append(Contact(rec.eid, R @ n_local, radius + pen[ax], rec))

        for col in wd_cols:
            rec = self.records[self._wd_rec[col]]
            if not inc(rec):
                continue
            Rm = self._wd_R[col]
            size = self._wd_size[col]
            lp = Rm.T @ (center - self._wd_c[col])
            w = size[0]
            x = float(np.clip(lp[0], -w / 2.0, w / 2.0))
            a = np.array([-size[2] / 2.0, 0.0])
            b = np.array([size[2] / 2.0, 0.0])
            c2 = np.array([-size[2] / 2.0, size[1]])
            p2 = np.array([lp[2], lp[1]])
            q2 = _closest_point_triangle_2d(p2, a, b, c2)
            dx = lp[0] - x
            dzy = p2 - q2
            dist2 = dx * dx + float(dzy @ dzy)
            if dist2 > _EPS:
                dist = math.sqrt(dist2)
                depth = radius - dist
                if depth > 0.0:
                    n_local = np.array([dx, dzy[1], dzy[0]]) / dist
                    contacts.append(Contact(rec.eid, Rm @ n_local, depth, rec))
            else:
                # Centre inside: least-penetrated plane.
                normals, offsets = self._wd_pl[col]
                pen = offsets - normals @ lp
                pi = int(np.argmin(pen))
                contacts.append(Contact(rec.eid, Rm @ normals[pi], radius + pen[pi], rec))
        return contacts

    def _depth_vs_record(self, rec_index: int, center, radius: float):
        """Deepest exact contact of a sphere against one record.

        Returns (depth, normal) with depth > 0 meaning penetration, or None
        when separated by more than the radius.
        """
        best = None
        for kind, col in self._rec_cols[rec_index]:
            if kind == "sp":
                dvec = center - self._sp_c[col]
                dist = math.sqrt(float(dvec @ dvec))
                depth = radius + self._sp_r[col] - dist
                if depth > (best[0] if best else -_INF):
                    n = dvec / dist if dist > _EPS else np.array([0.0, 1.0, 0.0])
                    best = (depth, n)
            elif kind == "bx":
                R = self._bx_R[col]
                h = self._bx_h[col]
                lp = R.T @ (center - self._bx_c[col])
                q = np.clip(lp, -h, h)
                dvec = lp - q
                d2 = float(dvec @ dvec)
                if d2 > _EPS:
                    dn = math.sqrt(d2)
                    depth = radius - dn
                    if depth > (best[0] if best else -_INF):
                        best = (depth, R @ (dvec / dn))
                else:
                    pen = h - np.abs(lp)
                    ax = int(np.argmin(pen))
                    nl = np.zeros(3)
                    nl[ax] = 1.0 if lp[ax] >= 0.0 else -1.0
                    depth = radius + float(pen[ax])
                    if depth > (best[0] if best else -_INF):
                        best = (depth, R @ nl)
            else:
                Rm = self._wd_R[col]
                size = self._wd_size[col]
                lp = Rm.T @ (center - self._wd_c[col])
                x = float(np.clip(lp[0], -size[0] / 2.0, size[0] / 2.0))
                a = np.array([-size[2] / 2.0, 0.0])
                b = np.array([size[2] / 2.0, 0.0])
                c2 = np.array([-size[2] / 2.0, size[1]])
                p2 = np.array([lp[2], lp[1]])
                q2 = _closest_point_triangle_2d(p2, a, b, c2)
                dx = lp[0] - x
                dzy = p2 - q2
                d2 = dx * dx + float(dzy @ dzy)
                if d2 > _EPS:
                    dn = math.sqrt(d2)
                    depth = radius - dn
                    if depth > (best[0] if best else -_INF):
                        nl = np.array([dx, dzy[1], dzy[0]]) / dn
                        best = (depth, Rm @ nl)
                else:
                    normals, offsets = self._wd_pl[col]
                    pen = offsets - normals @ lp
                    pi = int(np.argmin(pen))
                    depth = radius + float(pen[pi])
                    if depth > (best[0] if best else -_INF):
                        best = (depth, Rm @ normals[pi])
        return best

    def _sweep_hits(self, center, radius, d, dist, include) -> list[SweepHit]:
        """All hits of a swept sphere (direction d, length dist) per record.

        Conservative for boxes/wedges (plane expansion, sharp corners); exact
        for spheres.  Starting-overlap yields toi 0.
        """
        hits: list[SweepHit] = []
        # Candidate pruning: any real contact along the sweep lies within the
        # segment box padded by the radius; conservative hits outside it would
        # be rejected by refinement anyway (no sample can penetrate).
        end = center + d * dist
        pad = radius + _AABB_SLACK
        cand = self._candidate_cols(np.minimum(center, end) - pad, np.maximum(center, end) + pad)
        if cand is None:
            sp_cols: Iterable[int] = range(len(self._sp_rec))
            bx_cols: Iterable[int] = range(len(self._bx_rec))
            wd_cols: Iterable[int] = range(len(self._wd_rec))
        else:
            sp_cols, bx_cols, wd_cols = cand

        for col in sp_cols:
            rec = self.records[self._sp_rec[col]]
            if not include(rec):
                continue
            oc = center - self._sp_c[col]
            rr = radius + self._sp_r[col]
            b = float(d @ oc)
            c0 = float(oc @ oc) - rr * rr
            disc = b * b - c0
            if disc < 0.0:
                continue
            sq = math.sqrt(disc)
            t_out = -b + sq
            if c0 < 0.0:
                t = 0.0
            else:
                t = -b - sq
                if t < 0.0 or t > dist:
                    continue
            p = center + d * t
            n = p - self._sp_c[col]
            nn = math.sqrt(float(n.dot(n)))
            n = n / nn if nn > _EPS else np.array([0.0, 1.0, 0.0])
            exit_f = min(max(t_out, t), dist) / dist
            hits.append(SweepHit(t / dist, rec.eid, n, rec, exit_f, self._sp_rec[col], True))

        for col in bx_cols:
            rec_i = self._bx_rec[col]
            rec = self.records[rec_i]
            if not include(rec):
                continue
            R = self._bx_R[col]
            h = self._bx_h[col] + radius
            lo = R.T @ (center - self._bx_c[col])
            ld = R.T @ d
            t_enter, t_exit, ax = -_INF, _INF, -1
            ok = True
            for a in range(3):
                if abs(ld[a]) < _EPS:
                    if abs(lo[a]) > h[a]:
                        ok = False
                        break
                    continue
                t1 = (-h[a] - lo[a]) / ld[a]
                t2 = (h[a] - lo[a]) / ld[a]
                if t1 > t2:
                    t1, t2 = t2, t1
                if t1 > t_enter:
                    t_enter, ax = t1, a
                t_exit = min(t_exit, t2)
            if not ok or t_enter > t_exit or t_exit < _EPS or t_enter > dist:
                continue
            n_local = np.zeros(3)
            if ax >= 0:
                if t_enter > 0.0:
                    n_local[ax] = -math.copysign(1.0, ld[ax])
                else:
                    # Starting inside the expanded slab: outward by position.
                    n_local[ax] = 1.0 if lo[ax] >= 0.0 else -1.0
            else:
                n_local[1] = 1.0
            t0 = max(t_enter, 0.0)
            # Entry over a face interior (not an edge/corner region) is exact.
            pe = lo + ld * t0
            exact = ax >= 0 and all(
                abs(pe[a]) <= self._bx_h[col][a] + 1e-9 for a in range(3) if a != ax
            )
            hits.append(
                SweepHit(
                    t0 / dist,
                    rec.eid,
                    R @ n_local,
                    rec,
                    min(t_exit, dist) / dist,
                    rec_i,
                    exact,
                )
            )

        for col in wd_cols:
            rec_i = self._wd_rec[col]
            rec = self.records[rec_i]
            if not include(rec):
                continue
            Rm = self._wd_R[col]
            normals, offsets = self._wd_pl[col]
            lo = Rm.T @ (center - self._wd_c[col])
            ld = Rm.T @ d
            t_enter, t_exit, pi = -_INF, _INF, -1
            ok = True
            for p in range(_WEDGE_PLANE_COUNT):
                dn = float(normals[p] @ ld)
                db = offsets[p] + radius - float(normals[p] @ lo)
                if abs(dn) < _EPS:
                    if db < 0.0:
                        ok = False
                        break
                    continue
                t = db / dn
                if dn < 0.0:
                    if t > t_enter:
                        t_enter, pi = t, p
                else:
                    t_exit = min(t_exit, t)
            if not ok or t_enter > t_exit or t_exit < _EPS or t_enter > dist:
                continue
            n = Rm @ normals[pi] if pi >= 0 else np.array([0.0, 1.0, 0.0])
            t0 = max(t_enter, 0.0)
            pe = lo + ld * t0
            exact = pi >= 0 and all(
                float(normals[p] @ pe) <= offsets[p] + 1e-9
                for p in range(_WEDGE_PLANE_COUNT)
                if p != pi
            )
            hits.append(
                SweepHit(
                    t0 / dist,
                    rec.eid,
                    n,
                    rec,
                    min(t_exit, dist) / dist,
                    rec_i,
                    exact,
                )
            )
        return hits

    def _refine_hit(self, hit: SweepHit, center, radius, disp, limit: float) -> SweepHit | None:
        """Bisect a conservative box/wedge hit to the true contact time.

        Samples the exact sphere-record distance along the conservative
        entry/exit window (spacing <= 0.02 world units), then bisects the
        first penetrating bracket.  When no sample penetrates, the original
        conservative hit is dropped: corner-region whiskers thinner than the
        sampling never correspond to a real face crossing.
        """
        t0 = hit.toi
        t1 = min(hit.toi_exit, limit)
        if t0 > t1 + 1e-12:
            return None
        dep = self._depth_vs_record(hit.rec_index, center + disp * t0, radius)
        if dep is not None and dep[0] > 0.0:
            return SweepHit(t0, hit.eid, dep[1], hit.record, hit.toi_exit, hit.rec_index, True)
        if dep is not None and dep[0] > -1e-9 and float(disp @ dep[1]) >= -1e-9:
            # Touching at the window start and not moving into the surface:
            # along a straight line the distance to a convex part is convex,
            # so it can never dip below zero later.  (Fast path for sliding.)
            if len(self._rec_cols[hit.rec_index]) == 1:
                return None
        seg = math.sqrt(float(disp.dot(disp))) * (t1 - t0)
        n_samples = min(256, max(8, int(math.ceil(seg / 0.02))))
        lo = t0
        bracket = None
        for k in range(1, n_samples + 1):
            t = t0 + (t1 - t0) * k / n_samples
            dp = self._depth_vs_record(hit.rec_index, center + disp * t, radius)
            if dp is not None and dp[0] > 0.0:
                bracket = (lo, t)
                break
            lo = t
        if bracket is None:
            return None
        blo, bhi = bracket
        for _ in range(40):
            mid = 0.5 * (blo + bhi)
            dp = self._depth_vs_record(hit.rec_index, center + disp * mid, radius)
            if dp is not None and dp[0] > 0.0:
                bhi = mid
            else:
                blo = mid
        dp = self._depth_vs_record(hit.rec_index, center + disp * bhi, radius)
        return SweepHit(blo, hit.eid, dp[1], hit.record, hit.toi_exit, hit.rec_index, True)

    def sweep_sphere(self, center, radius: float, disp, include=None) -> SweepHit | None:
        """Earliest blocking hit for a sphere swept along disp.

        Box/wedge candidates found by conservative plane expansion are
        refined to exact contact times unless the entry already lies over a
        face interior.  Hits whose surface the motion is leaving
        (d . n >= 0) are ignored so resting contact does not pin a sliding
        body.  Returns None when the full displacement is free.
        """
        self._ensure()
        center = np.asarray(center, dtype=float)
        disp = np.asarray(disp, dtype=float)
        dist = math.sqrt(float(disp.dot(disp)))
        if dist < _EPS:
            return None
        d = disp / dist
        inc = include if include is not None else (lambda r: True)
        best: SweepHit | None = None
        for hit in sorted(
            self._sweep_hits(center, radius, d, dist, inc), key=lambda h: (h.toi, h.eid)
        ):
            if best is not None and hit.toi > best.toi:
                break  # sorted: nothing later can beat the current best
            if hit.exact:
                if float(d @ hit.normal) >= -1e-9:
                    continue
                cand = hit
            else:
                cand = self._refine_hit(hit, center, radius, disp, best.toi if best else 1.0)
                if cand is None or float(d @ cand.normal) >= -1e-9:
                    continue
            if (
                best is None
                or cand.toi < best.toi
                or (cand.toi == best.toi and cand.eid < best.eid)
            ):
                best = cand
        return best

    def sweep_sphere_all(self, center, radius: float, disp, include) -> list[SweepHit]:
        """Every record touched by the swept sphere anywhere along disp.

        Non-blocking detection used for goal consumption and zone overlap;
        records already overlapping at the start report toi 0.
        """
        self._ensure()
        center = np.asarray(center, dtype=float)
        disp = np.asarray(disp, dtype=float)
        dist = math.sqrt(float(disp.dot(disp)))
        if dist < _EPS:
            hits = [
                SweepHit(0.0, c.eid, c.normal, c.record, exact=True)
                for c in self.sphere_contacts(center, radius, include)
            ]
        else:
            hits = []
            for h in self._sweep_hits(center, radius, disp / dist, dist, include):
                if not h.exact:
                    h = self._refine_hit(h, center, radius, disp, 1.0)
                    if h is None:
                        continue
                hits.append(h)
        dedup: dict[int, SweepHit] = {}
        for h in hits:
            if h.eid not in dedup or h.toi < dedup[h.eid].toi:
                dedup[h.eid] = h
        return sorted(dedup.values(), key=lambda h: (h.toi, h.eid))

    # -- box (block) contacts ------------------------------------------------

    def box_contacts(self, center, half, yaw_deg: float, include=None) -> list[Contact]:
        """Contacts of an upright yawed box body against included records.

        Upright-vs-upright uses exact SAT (vertical axis + both footprints'
        face normals); non-upright parts and wedges are approximated by their
        bounding boxes.
        """
        self._ensure()
        center = np.asarray(center, dtype=float)
        half = np.asarray(half, dtype=float)
        inc = include if include is not None else (lambda r: True)
        contacts: list[Contact] = []
        # Candidate pruning against the query box's own world-aligned bounds.
        a0 = math.radians(yaw_deg)
        ca0, sa0 = abs(math.cos(a0)), abs(math.sin(a0))
        ext = np.array(
            [ca0 * half[0] + sa0 * half[2], half[1], sa0 * half[0] + ca0 * half[2]]
        )
        cand = self._candidate_cols(center - ext - _AABB_SLACK, center + ext + _AABB_SLACK)
        if cand is None:
            sp_cols: Iterable[int] = range(len(self._sp_rec))
            bx_cols: Iterable[int] = range(len(self._bx_rec))
            wd_cols: Iterable[int] = range(len(self._wd_rec))
        else:
            sp_cols, bx_cols, wd_cols = cand

        def sat_upright(c2, h2, yaw2) -> tuple[np.ndarray, float] | None:
            dy = (half[1] + h2[1]) - abs(center[1] - c2[1])
            if dy <= 0.0:
                return None
            a1 = math.radians(yaw_deg)
            a2 = math.radians(yaw2)
            axes = []
            for a in (a1, a1 + math.pi / 2.0, a2, a2 + math.pi / 2.0):
                axes.append(np.array([math.cos(a), math.sin(a)]))

            def corners(cx, cz, hx, hz, ang):
                ca, sa = math.cos(ang), math.sin(ang)
                # Local x axis (ca, sa)? footprint axes in the xz plane:
                ux = np.array([ca, sa])
                uz = np.array([-sa, ca])
                base = np.array([cx, cz])
                return [base + sx * hx * ux + sz * hz * uz for sx in (-1, 1) for sz in (-1, 1)]

            ca = corners(center[0], center[2], half[0], half[2], a1)
            cb = corners(c2[0], c2[2], h2[0], h2[2], a2)
            best_d, best_ax = _INF, None
            for ax in axes:
                pa = [float(p @ ax) for p in ca]
                pb = [float(p @ ax) for p in cb]
                d = min(max(pa), max(pb)) - max(min(pa), min(pb))
                ov = min(max(pa) - min(pb), max(pb) - min(pa))
                if ov <= 0.0:
                    return None
                if ov < best_d:
                    # Normal pushes this body away from the other.
                    sgn = 1.0 if (center[0] - c2[0]) * ax[0] + (center[2] - c2[2]) * ax[1] >= 0 else -1.0
                    best_d, best_ax = ov, ax * sgn
            if dy < best_d:
                sgn = 1.0 if center[1] >= c2[1] else -1.0
                return np.array([0.0, sgn, 0.0]), dy
            return np.array([best_ax[0], 0.0, best_ax[1]]), best_d

        for col in bx_cols:
            rec = self.records[self._bx_rec[col]]
            if not inc(rec):
                continue
            R = self._bx_R[col]
            h = self._bx_h[col]
            c2 = self._bx_c[col]
            if abs(R[1, 1] - 1.0) < 1e-9:
                yaw2 = math.degrees(math.atan2(R[0, 2], R[2, 2]))
                res = sat_upright(c2, h, yaw2)
            else:
                # Rolled part: world-aligned bounding box.
                hb = np.abs(R) @ h
                res = sat_upright(c2, hb, 0.0)
            if res is not None:
                n, depth = res
                contacts.append(Contact(rec.eid, n, depth, rec))

        for col in wd_cols:
            rec = self.records[self._wd_rec[col]]
            if not inc(rec):
                continue
            size = self._wd_size[col]
            hb = np.array([size[0] / 2.0, size[1] / 2.0, size[2] / 2.0])
            c2 = self._wd_c[col] + np.array([0.0, size[1] / 2.0, 0.0])
            yaw2 = math.degrees(math.atan2(self._wd_R[col][0, 2], self._wd_R[col][2, 2]))
            res = sat_upright(c2, hb, yaw2)
            if res is not None:
                n, depth = res
                contacts.append(Contact(rec.eid, n, depth, rec))

        for col in sp_cols:
            rec = self.records[self._sp_rec[col]]
            if not inc(rec):
                continue
            # Sphere vs this box: reuse the sphere-box closest point, flipped.
            R = yaw_matrix(yaw_deg)
            lp = R.T @ (self._sp_c[col] - center)
            q = np.clip(lp, -half, half)
            d = lp - q
            dist2 = float(d @ d)
            r = self._sp_r[col]
            if dist2 > _EPS:
                dist = math.sqrt(dist2)
                depth = r - dist
                if depth > 0.0:
                    contacts.append(Contact(rec.eid, -(R @ (d / dist)), depth, rec))
            else:
                pen = half - np.abs(lp)
                ax = int(np.argmin(pen))
                n_local = np.zeros(3)
                n_local[ax] = 1.0 if lp[ax] >= 0.0 else -1.0
                contacts.append(Contact(rec.eid, -(R @ n_local), r + pen[ax], rec))
        return contacts

    # -- bulk occupancy ------------------------------------------------------

    def overlaps_record(self, rec: ColliderRecord, include=None, min_depth: float = 0.0) -> Contact | None:
        """First overlap of a candidate record against the set (placement).

        `min_depth` ignores shallower contacts, so exactly abutting geometry
        (which floating-point yaw rotation can turn into ~1e-15 "overlap")
        still counts as touching rather than intersecting.
        """
        inc = include if include is not None else (lambda r: True)

        def deepest(cs):
            cs = [c for c in cs if c.depth > min_depth]
            return cs[0] if cs else None

        if isinstance(rec.shape, SphereShape):
            return deepest(self.sphere_contacts(rec.center, rec.shape.radius, inc))
        if isinstance(rec.shape, WedgeShape):
            s = rec.shape.size
            c = rec.center + yaw_matrix(rec.yaw) @ np.array([0.0, s[1] / 2.0, 0.0])
            return deepest(
                self.box_contacts(c, np.array([s[0] / 2, s[1] / 2, s[2] / 2]), rec.yaw, inc)
            )
        Ry = yaw_matrix(rec.yaw)
        for part in rec.shape.parts:
            c = rec.center + Ry @ part.offset
            if part.local_rot is None:
                hit = deepest(self.box_contacts(c, part.half, rec.yaw, inc))
            else:
                R = Ry @ part.local_rot
                hb = np.abs(R) @ part.half
                hit = deepest(self.box_contacts(c, hb, 0.0, inc))
            if hit is not None:
                return hit
        return None
