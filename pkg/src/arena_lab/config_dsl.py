"""Arena-configuration file format.

A configuration is YAML (1.1 subset, UTF-8) built from five tagged object
types::

    !ArenaConfig   top level; global flags plus a 0-indexed map of arenas
    !Arena         pass_mark, t, blackouts, and an ordered item list
    !Item          one entity kind with parallel per-instance attribute lists
    !Vector3       {x, y, z} (missing components default to 0)
    !RGB           {r, g, b}

Parsing (`parse_config`) checks syntax and shape and reports diagnostics
with line/column; `validate` adds semantic checks (attribute applicability,
list lengths, bounds).  Anchors and aliases are rejected.  `serialize_config`
writes a file back out in canonical form; parse -> serialize -> parse is a
structural fixed point.

Per-instance attribute lists follow a broadcast rule: a list of length 1
applies to every instance, otherwise its length must equal the number of
positions.  A coordinate of -1 in a position, or a rotation of -1, means
"randomize at instantiation"; omitted positions/rotations are treated as
all--1 (randomized), while omitted sizes and colors fall back to per-kind
defaults.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .entities import (
    AGENT_SKINS,
    COLORABLE_KINDS,
    DISPENSER_KINDS,
    RESIZABLE_KINDS,
    SCHEDULE_KINDS,
    SIGN_SYMBOLS,
    SIZE_TRACKING_KINDS,
    ZONE_KINDS,
    EntityKind,
)

ARENA_SIZE = 40.0  # square arena side length
ARENA_WALL_HEIGHT = 10.0  # boundary wall height; also the -1 vertical range

Vec3 = tuple[float, float, float]

RANDOM_VEC: Vec3 = (-1.0, -1.0, -1.0)


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int | None = None
    column: int | None = None
    path: str = ""

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}: " if self.line is not None else ""
        where = f" [{self.path}]" if self.path else ""
        return f"{loc}{self.severity}: {self.message}{where}"


class ConfigError(ValueError):
    """Raised by the load helpers when a file has error-level diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass
class ItemSpec:
    kind: EntityKind
    positions: list[Vec3]  # components may be -1 (randomize)
    rotations: list[float]  # degrees; -1 = randomize
    sizes: list[Vec3] | None = None
    colors: list[Vec3] | None = None
    skins: list[str] | None = None
    frozen_delays: list[float] | None = None
    initial_values: list[float] | None = None
    final_values: list[float] | None = None
    delays: list[float] | None = None
    change_rates: list[float] | None = None
    symbols: list[object] | None = None  # symbol name or grid of RGB/"random"
    spawn_counts: list[float] | None = None
    spawn_intervals: list[float] | None = None
    spawn_probabilities: list[float] | None = None
    reward_weights: list[tuple[float, float, float]] | None = None
    reward_spawn_positions: list[Vec3] | None = None
    reset_durations: list[float] | None = None
    loc: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    @property
    def count(self) -> int:
        return len(self.positions)


@dataclass
class ArenaSpec:
    pass_mark: float = 0.0
    t: int = 0  # steps; 0 = untimed
    blackouts: list[int] = field(default_factory=list)
    items: list[ItemSpec] = field(default_factory=list)
    loc: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class ArenaConfigFile:
    arenas: dict[int, ArenaSpec]
    show_notification: bool = False
    can_reset_episode: bool = True
    can_change_perspective: bool = True
    default_perspective: str = "first-person"


# YAML key -> (ItemSpec field, reader kind, applicable entity kinds).
# On spawners, `sizes` sets the spawned goal's diameter (the body is fixed).
_SIZED_KINDS = (RESIZABLE_KINDS - SIZE_TRACKING_KINDS) | DISPENSER_KINDS | {
    EntityKind.SPAWNER_BUTTON
}
_ITEM_ATTRS: dict[str, tuple[str, str, frozenset]] = {
    "positions": ("positions", "vec3list", frozenset(EntityKind)),
    "rotations": ("rotations", "floatlist", frozenset(EntityKind)),
    "sizes": ("sizes", "vec3list", frozenset(_SIZED_KINDS)),
    "colors": ("colors", "rgblist", frozenset(COLORABLE_KINDS)),
    "skins": ("skins", "strlist", frozenset({EntityKind.AGENT})),
    "frozenAgentDelays": ("frozen_delays", "floatlist", frozenset({EntityKind.AGENT})),
    "initialValues": ("initial_values", "floatlist", frozenset(SCHEDULE_KINDS)),
    "finalValues": ("final_values", "floatlist", frozenset(SCHEDULE_KINDS)),
    "delays": ("delays", "floatlist", frozenset(SCHEDULE_KINDS)),
    "changeRates": ("change_rates", "floatlist", frozenset(SCHEDULE_KINDS)),
    "symbolNames": ("symbols", "symbollist", frozenset({EntityKind.SIGN_BOARD})),
    "spawnCount": ("spawn_counts", "floatlist", frozenset(DISPENSER_KINDS)),
    "timeBetweenSpawns": ("spawn_intervals", "floatlist", frozenset(DISPENSER_KINDS)),
    "spawnProbability": (
        "spawn_probabilities",
        "floatlist",
        frozenset({EntityKind.SPAWNER_BUTTON}),
    ),
    "rewardWeights": ("reward_weights", "weightlist", frozenset({EntityKind.SPAWNER_BUTTON})),
    "rewardSpawnPos": (
        "reward_spawn_positions",
        "vec3list",
        frozenset({EntityKind.SPAWNER_BUTTON}),
    ),
    "resetDuration": ("reset_durations", "floatlist", frozenset({EntityKind.SPAWNER_BUTTON})),
}

_PERSPECTIVES = ("first-person", "birds-eye")


def _mark(node_or_mark) -> tuple[int | None, int | None]:
    mark = getattr(node_or_mark, "start_mark", node_or_mark)
    if mark is None:
        return None, None
    return mark.line + 1, mark.column + 1


def _diag(diags: list[Diagnostic], severity: str, message: str, node=None, path: str = "") -> None:
    line, column = _mark(node)
    diags.append(Diagnostic(severity, message, line, column, path))


def _err(diags, message, node=None, path=""):
    _diag(diags, "error", message, node, path)


def _warn(diags, message, node=None, path=""):
    _diag(diags, "warning", message, node, path)


# --- node readers -----------------------------------------------------------


def _scalar(node, diags, path) -> str | None:
    if not isinstance(node, yaml.ScalarNode):
        _err(diags, f"expected a scalar, got {node.tag}", node, path)
        return None
    return node.value


def _read_float(node, diags, path) -> float | None:
    raw = _scalar(node, diags, path)
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        _err(diags, f"expected a number, got {raw!r}", node, path)
        return None


def _read_int(node, diags, path) -> int | None:
    val = _read_float(node, diags, path)
    if val is None:
        return None
    if val != int(val):
        _err(diags, f"expected an integer, got {val}", node, path)
        return None
    return int(val)


def _read_bool(node, diags, path) -> bool | None:
    raw = _scalar(node, diags, path)
    if raw is None:
        return None
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    _err(diags, f"expected true/false, got {raw!r}", node, path)
    return None


def _read_tagged_triple(node, tag, keys, diags, path) -> Vec3 | None:
    if not isinstance(node, yaml.MappingNode) or node.tag != tag:
        _err(diags, f"expected {tag} {{{keys[0]}: .., {keys[1]}: .., {keys[2]}: ..}}", node, path)
        return None
    out = {k: 0.0 for k in keys}
    for key_node, val_node in node.value:
        key = key_node.value
        if key not in out:
            _warn(diags, f"unknown {tag} component {key!r}", key_node, path)
            continue
        val = _read_float(val_node, diags, f"{path}.{key}")
        if val is not None:
            out[key] = val
    return (out[keys[0]], out[keys[1]], out[keys[2]])


def _read_vec3(node, diags, path):
    return _read_tagged_triple(node, "!Vector3", ("x", "y", "z"), diags, path)


def _read_rgb(node, diags, path):
    return _read_tagged_triple(node, "!RGB", ("r", "g", "b"), diags, path)


def _elements(node) -> list:
    """A sequence's elements, or the node itself as a singleton."""
    if isinstance(node, yaml.SequenceNode):
        return list(node.value)
    return [node]


def _read_weights(node, diags, path) -> tuple[float, float, float] | None:
    if not isinstance(node, yaml.SequenceNode) or len(node.value) != 3:
        _err(diags, "expected a [good, multi, bad] weight triple", node, path)
        return None
    vals = [_read_float(sub, diags, path) for sub in node.value]
    if any(v is None for v in vals):
        return None
    return (vals[0], vals[1], vals[2])


def _read_symbol(node, diags, path):
    if isinstance(node, yaml.ScalarNode):
        return node.value
    if isinstance(node, yaml.SequenceNode):  # pixel grid: rows of cells
        grid = []
        for r, row_node in enumerate(node.value):
            if not isinstance(row_node, yaml.SequenceNode):
                _err(diags, "grid rows must be sequences", row_node, f"{path}[{r}]")
                return None
            row = []
            for c, cell in enumerate(row_node.value):
                if isinstance(cell, yaml.ScalarNode) and cell.value == "random":
                    row.append("random")
                else:
                    rgb = _read_rgb(cell, diags, f"{path}[{r}][{c}]")
                    if rgb is None:
                        return None
                    row.append(rgb)
            grid.append(row)
        return grid
    _err(diags, "expected a symbol name or a pixel grid", node, path)
    return None


_LIST_READERS = {
    "floatlist": _read_float,
    "strlist": _scalar,
    "vec3list": _read_vec3,
    "rgblist": _read_rgb,
    "weightlist": _read_weights,
    "symbollist": _read_symbol,
}


def _read_list(node, reader_kind, diags, path) -> list | None:
    reader = _LIST_READERS[reader_kind]
    out = []
    for i, sub in enumerate(_elements(node)):
        val = reader(sub, diags, f"{path}[{i}]")
        if val is None:
            return None
        out.append(val)
    if not out:
        _err(diags, "empty attribute list", node, path)
        return None
    return out


# --- parse ------------------------------------------------------------------


def parse_config(text: str) -> tuple[ArenaConfigFile | None, list[Diagnostic]]:
    """Parse configuration text.

    Returns (config, diagnostics); config is None when any diagnostic is an
    error.  Warnings never block.
    """
    diags: list[Diagnostic] = []
    try:
        for event in yaml.parse(io.StringIO(text)):
            if isinstance(event, yaml.AliasEvent):
                _err(diags, f"YAML aliases are not supported (*{event.anchor})", event)
            elif getattr(event, "anchor", None):
                _err(diags, f"YAML anchors are not supported (&{event.anchor})", event)
        root = yaml.compose(io.StringIO(text))
    except yaml.MarkedYAMLError as exc:
        _err(diags, f"syntax error: {exc.problem}", exc.problem_mark or exc.context_mark)
        return None, diags
    except yaml.YAMLError as exc:  # pragma: no cover - non-marked errors
        _err(diags, f"YAML error: {exc}")
        return None, diags
    if any(d.severity == "error" for d in diags):
        return None, diags
    if root is None:
        _err(diags, "empty configuration")
        return None, diags

    cfg = _walk_file(root, diags)
    if any(d.severity == "error" for d in diags):
        return None, diags
    return cfg, diags


def _walk_file(node, diags) -> ArenaConfigFile | None:
    if node.tag != "!ArenaConfig" or not isinstance(node, yaml.MappingNode):
        _err(diags, f"top-level object must be !ArenaConfig, got {node.tag}", node)
        return None
    cfg = ArenaConfigFile(arenas={})
    seen = set()
    for key_node, val_node in node.value:
        key = key_node.value
        if key in seen:
            _warn(diags, f"duplicate attribute {key!r}; last value wins", key_node)
        seen.add(key)
        if key == "arenas":
            _walk_arenas(val_node, cfg, diags)
        elif key == "showNotification":
            val = _read_bool(val_node, diags, key)
            cfg.show_notification = cfg.show_notification if val is None else val
        elif key == "canResetEpisode":
            val = _read_bool(val_node, diags, key)
            cfg.can_reset_episode = cfg.can_reset_episode if val is None else val
        elif key == "canChangePerspective":
            val = _read_bool(val_node, diags, key)
            cfg.can_change_perspective = cfg.can_change_perspective if val is None else val
        elif key == "defaultPerspective":
            val = _scalar(val_node, diags, key)
            if val is not None:
                cfg.default_perspective = val
        else:
            _warn(diags, f"unknown attribute {key!r} ignored", key_node)
    if not cfg.arenas:
        _err(diags, "configuration defines no arenas", node)
        return None
    indices = sorted(cfg.arenas)
    if indices != list(range(len(indices))):
        _err(diags, f"arena indices must be contiguous from 0, got {indices}", node)
    return cfg


def _walk_arenas(node, cfg, diags) -> None:
    if not isinstance(node, yaml.MappingNode):
        _err(diags, "'arenas' must be a mapping of index -> !Arena", node, "arenas")
        return
    for key_node, val_node in node.value:
        idx = _read_int(key_node, diags, "arenas")
        if idx is None:
            continue
        if idx in cfg.arenas:
            _err(diags, f"duplicate arena index {idx}", key_node, "arenas")
            continue
        arena = _walk_arena(val_node, diags, f"arenas.{idx}")
        if arena is not None:
            cfg.arenas[idx] = arena


def _walk_arena(node, diags, path) -> ArenaSpec | None:
    if node.tag != "!Arena" or not isinstance(node, yaml.MappingNode):
        _err(diags, f"expected !Arena, got {node.tag}", node, path)
        return None
    arena = ArenaSpec(loc=_mark(node))
    seen = set()
    for key_node, val_node in node.value:
        key = key_node.value
        if key in seen:
            _warn(diags, f"duplicate attribute {key!r}; last value wins", key_node, path)
        seen.add(key)
        if key == "pass_mark":
            val = _read_float(val_node, diags, f"{path}.pass_mark")
            arena.pass_mark = arena.pass_mark if val is None else val
        elif key == "t":
            val = _read_int(val_node, diags, f"{path}.t")
            arena.t = arena.t if val is None else val
        elif key == "blackouts":
            vals = _read_list(val_node, "floatlist", diags, f"{path}.blackouts")
            if vals is not None:
                if any(v != int(v) for v in vals):
                    _err(diags, "blackout steps must be integers", val_node, f"{path}.blackouts")
                else:
                    arena.blackouts = [int(v) for v in vals]
        elif key == "items":
            if not isinstance(val_node, yaml.SequenceNode):
                _err(diags, "'items' must be a list of !Item", val_node, f"{path}.items")
                continue
            for i, item_node in enumerate(val_node.value):
                item = _walk_item(item_node, diags, f"{path}.items.{i}")
                if item is not None:
                    arena.items.append(item)
        else:
            _warn(diags, f"unknown attribute {key!r} ignored", key_node, path)
    if not arena.items:
        _warn(diags, "arena has no items; the agent will spawn at random", node, path)
    return arena


def _walk_item(node, diags, path) -> ItemSpec | None:
    if node.tag != "!Item" or not isinstance(node, yaml.MappingNode):
        _err(diags, f"expected !Item, got {node.tag}", node, path)
        return None
    kind: EntityKind | None = None
    raw: dict[str, list] = {}
    seen = set()
    for key_node, val_node in node.value:
        key = key_node.value
        if key in seen:
            _warn(diags, f"duplicate attribute {key!r}; last value wins", key_node, path)
        seen.add(key)
        if key == "name":
            name = _scalar(val_node, diags, f"{path}.name")
            if name is None:
                continue
            try:
                kind = EntityKind(name)
            except ValueError:
                _err(diags, f"unknown entity name {name!r}", val_node, f"{path}.name")
                return None
        elif key in _ITEM_ATTRS:
            field_name, reader_kind, _ = _ITEM_ATTRS[key]
            vals = _read_list(val_node, reader_kind, diags, f"{path}.{key}")
            if vals is not None:
                raw[field_name] = vals
        else:
            _warn(diags, f"unknown attribute {key!r} ignored", key_node, path)
    if kind is None:
        _err(diags, "item is missing its 'name'", node, path)
        return None

    positions = raw.pop("positions", None)
    rotations = raw.pop("rotations", None)
    if positions is None:
        # No positions: one instance per entry of the longest attribute list.
        count = max((len(v) for v in raw.values()), default=1)
        if rotations is not None:
            count = max(count, len(rotations))
        positions = [RANDOM_VEC] * count
    if rotations is None:
        rotations = [-1.0]
    return ItemSpec(kind=kind, positions=positions, rotations=rotations, loc=_mark(node), **raw)


# --- validate ---------------------------------------------------------------


def validate(cfg: ArenaConfigFile) -> list[Diagnostic]:
    """Semantic checks on a parsed file.  Returns diagnostics (never raises)."""
    diags: list[Diagnostic] = []
    if cfg.default_perspective not in _PERSPECTIVES:
        _warn(diags, f"unknown defaultPerspective {cfg.default_perspective!r}")
    for idx, arena in cfg.arenas.items():
        _validate_arena(arena, f"arenas.{idx}", diags)
    return diags


def _validate_arena(arena: ArenaSpec, path: str, diags: list[Diagnostic]) -> None:
    line, col = arena.loc

    def err(msg, where=path):
        diags.append(Diagnostic("error", msg, line, col, where))

    if arena.t < 0:
        err(f"t must be >= 0, got {arena.t}", f"{path}.t")
    b = arena.blackouts
    if b:
        if b[0] < 0:
            if len(b) != 1:
                err("alternating blackout schedule must be a single negative", f"{path}.blackouts")
        else:
            if any(x < 0 for x in b[1:]):
                err("blackout steps must all be >= 0", f"{path}.blackouts")
            elif any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
                err(f"blackout steps must be strictly increasing, got {b}", f"{path}.blackouts")

    agents = [it for it in arena.items if it.kind is EntityKind.AGENT]
    if len(agents) > 1:
        err("at most one Agent item per arena")
    if agents and agents[0].count > 1:
        err("the Agent item must have a single position")
    for i, item in enumerate(arena.items):
        _validate_item(item, f"{path}.items.{i}", diags)


def _pair_name(field_name: str) -> str:
    for key, (fname, _, _) in _ITEM_ATTRS.items():
        if fname == field_name:
            return key
    return field_name


def _validate_item(item: ItemSpec, path: str, diags: list[Diagnostic]) -> None:
    line, col = item.loc

    def err(msg, where=path):
        diags.append(Diagnostic("error", msg, line, col, where))

    kind = item.kind
    if len(item.rotations) not in (1, item.count):
        err(
            f"'rotations' has {len(item.rotations)} entries but the item has "
            f"{item.count} positions",
            f"{path}.rotations",
        )
    for key, (field_name, _, applicable) in _ITEM_ATTRS.items():
        values = getattr(item, field_name)
        if values is None or field_name in ("positions", "rotations"):
            continue
        if kind not in applicable:
            err(f"attribute {key!r} is not applicable to {kind.value}", f"{path}.{key}")
        elif len(values) not in (1, item.count):
            err(
                f"{key!r} has {len(values)} entries but the item has "
                f"{item.count} positions",
                f"{path}.{key}",
            )

    for j, pos in enumerate(item.positions):
        for axis, val in zip("xyz", pos):
            if val != -1.0 and not 0.0 <= val <= ARENA_SIZE:
                err(
                    f"position {axis}={val:g} out of arena bounds [0, {ARENA_SIZE:g}]",
                    f"{path}.positions[{j}]",
                )
    if item.sizes is not None:
        flat_ok = kind in ZONE_KINDS  # zones may be height-zero floor patches
        for j, size in enumerate(item.sizes):
            sx, sy, sz = size
            if sx <= 0 or sz <= 0 or (sy < 0 if flat_ok else sy <= 0):
                err(f"size components must be positive, got {size}", f"{path}.sizes[{j}]")
    if item.colors is not None:
        for j, rgb in enumerate(item.colors):
            if any(not 0 <= c <= 255 for c in rgb):
                err(f"color channels must be in [0, 255], got {rgb}", f"{path}.colors[{j}]")
    if item.skins is not None:
        for skin in item.skins:
            if skin not in AGENT_SKINS and skin != "random":
                err(f"unknown skin {skin!r} (choose from {', '.join(AGENT_SKINS)} or random)")
    if item.frozen_delays is not None and any(d < 0 for d in item.frozen_delays):
        err("frozenAgentDelays must be >= 0")
    if item.delays is not None and any(d < 0 for d in item.delays):
        err("schedule delays must be >= 0")
    if item.spawn_probabilities is not None:
        for p in item.spawn_probabilities:
            if not 0.0 <= p <= 1.0:
                err(f"spawnProbability must be in [0, 1], got {p:g}")
    if item.reward_weights is not None:
        for w in item.reward_weights:
            if any(x < 0 for x in w) or sum(w) <= 0:
                err(f"rewardWeights must be >= 0 and not all zero, got {list(w)}")
    if item.reset_durations is not None and any(d < 0 for d in item.reset_durations):
        err("resetDuration must be >= 0")
    if item.spawn_counts is not None and any(c < -1 for c in item.spawn_counts):
        err("spawnCount must be >= 0, or -1 for unlimited")
    if item.spawn_intervals is not None and any(t < 1 for t in item.spawn_intervals):
        err("timeBetweenSpawns must be >= 1")
    if item.symbols is not None:
        for sym in item.symbols:
            if isinstance(sym, str):
                if sym not in SIGN_SYMBOLS:
                    err(f"unknown symbol {sym!r}")
            else:
                widths = {len(row) for row in sym}
                if not sym or len(widths) != 1 or 0 in widths:
                    err("symbol grids must be rectangular and non-empty")


# --- load helpers -----------------------------------------------------------


def load_config_text(text: str) -> ArenaConfigFile:
    """Parse + validate; raise ConfigError on any error-level diagnostic."""
    cfg, diags = parse_config(text)
    if cfg is not None:
        diags = diags + validate(cfg)
    errors = [d for d in diags if d.severity == "error"]
    if errors or cfg is None:
        raise ConfigError(errors or diags)
    return cfg


def load_config(path) -> ArenaConfigFile:
    return load_config_text(Path(path).read_text(encoding="utf-8"))


# --- schedule helpers -------------------------------------------------------


def blackout_active(blackouts: list[int], step: int) -> bool:
    """True when the lights are off at `step` (completed-step count).

    `[a, b, c, d]` switches the lights off during [a, b) and [c, d); a final
    odd entry means off until the episode ends.  `[-n]` alternates every n
    steps, starting on.
    """
    if not blackouts:
        return False
    if blackouts[0] < 0:
        period = -blackouts[0]
        return (step // period) % 2 == 1
    off = False
    for bound in blackouts:
        if step < bound:
            return off
        off = not off
    return off


def pick(values: list, index: int):
    """Broadcast-aware list indexing (length-1 lists apply to every instance)."""
    return values[index] if len(values) > 1 else values[0]


# --- serialize --------------------------------------------------------------


def _num(v: float) -> str:
    f = float(v)
    return str(int(f)) if f == int(f) and abs(f) < 1e15 else repr(f)


def _vec(v: Vec3, keys="xyz") -> str:
    parts = ", ".join(f"{k}: {_num(c)}" for k, c in zip(keys, v))
    tag = "!Vector3" if keys == "xyz" else "!RGB"
    return f"{tag} {{{parts}}}"


def _emit_symbol(sym, out, pad) -> None:
    if isinstance(sym, str):
        out.append(f"{pad}- {sym}")
        return
    out.append(f"{pad}-")
    for row in sym:
        cells = ", ".join("random" if c == "random" else _vec(c, "rgb") for c in row)
        out.append(f"{pad}  - [{cells}]")


def serialize_config(cfg: ArenaConfigFile) -> str:
    """Write a configuration back to canonical text form."""
    out = [
        "!ArenaConfig",
        f"showNotification: {'true' if cfg.show_notification else 'false'}",
        f"canResetEpisode: {'true' if cfg.can_reset_episode else 'false'}",
        f"canChangePerspective: {'true' if cfg.can_change_perspective else 'false'}",
        f"defaultPerspective: {cfg.default_perspective}",
        "arenas:",
    ]
    for idx in sorted(cfg.arenas):
        arena = cfg.arenas[idx]
        out.append(f"  {idx}: !Arena")
        out.append(f"    pass_mark: {_num(arena.pass_mark)}")
        out.append(f"    t: {arena.t}")
        if arena.blackouts:
            out.append(f"    blackouts: [{', '.join(str(b) for b in arena.blackouts)}]")
        if arena.items:
            out.append("    items:")
        for item in arena.items:
            out.append("    - !Item")
            out.append(f"      name: {item.kind.value}")
            out.append("      positions:")
            for pos in item.positions:
                out.append(f"      - {_vec(pos)}")
            out.append(f"      rotations: [{', '.join(_num(r) for r in item.rotations)}]")
            for key, (field_name, reader_kind, _) in _ITEM_ATTRS.items():
                if field_name in ("positions", "rotations"):
                    continue
                values = getattr(item, field_name)
                if values is None:
                    continue
                if reader_kind == "vec3list":
                    out.append(f"      {key}:")
                    for v in values:
                        out.append(f"      - {_vec(v)}")
                elif reader_kind == "rgblist":
                    out.append(f"      {key}:")
                    for v in values:
                        out.append(f"      - {_vec(v, 'rgb')}")
                elif reader_kind == "weightlist":
                    rows = ", ".join(f"[{', '.join(_num(x) for x in w)}]" for w in values)
                    out.append(f"      {key}: [{rows}]")
                elif reader_kind == "symbollist":
                    out.append(f"      {key}:")
                    for sym in values:
                        _emit_symbol(sym, out, "      ")
                elif reader_kind == "strlist":
                    out.append(f"      {key}: [{', '.join(values)}]")
                else:
                    out.append(f"      {key}: [{', '.join(_num(v) for v in values)}]")
    return "\n".join(out) + "\n"
