"""Template expansion: one config template -> a battery of config files.

A template is an ordinary arena config in which any value position may
hold a directive tag:

    !Choice [a, b, ...]      enumerate these alternatives
    !RandomColor             draw an !RGB {r, g, b} (sampling mode only)
    !RandomRange [lo, hi]    draw a uniform float in [lo, hi) (sampling only)
    !Label [name, <node>]    bind a name to the node's resolved value
    !If [name, match, then, else]
                             pick a branch by comparing a label's value

Exhaustive expansion takes the Cartesian product over every Choice in
document order; sampling draws n independent seeded assignments.  Every
emitted file must parse and validate cleanly, or the expansion fails.
"""

from __future__ import annotations

import copy
import csv
import io
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np
import yaml

from .config_dsl import parse_config, validate

DIRECTIVE_TAGS = {"!Choice", "!RandomColor", "!RandomRange", "!Label", "!If"}


class TemplateError(Exception):
    pass


@dataclass
class _Directive:
    node: yaml.Node  # the tagged node inside the template tree
    kind: str  # "choice" | "color" | "range" | "label" | "if"
    name: str
    options: list = field(default_factory=list)  # choice option nodes
    child: object = None  # label: wrapped directive or plain node
    lo: float = 0.0
    hi: float = 0.0
    if_label: str = ""
    match: str = ""
    then: yaml.Node | None = None
    other: yaml.Node | None = None


def _assert_plain(node: yaml.Node, context: str) -> None:
    """Directive options and branches must not nest further directives."""
    if node.tag in DIRECTIVE_TAGS:
        raise TemplateError(f"nested directive {node.tag} inside {context}")
    if isinstance(node, yaml.SequenceNode):
        for c in node.value:
            _assert_plain(c, context)
    elif isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _assert_plain(k, context)
            _assert_plain(v, context)


def _scalar(node: yaml.Node, what: str) -> str:
    if not isinstance(node, yaml.ScalarNode):
        raise TemplateError(f"{what} must be a scalar")
    return node.value


def _parse_directive(node: yaml.Node, ordinal: int, label: str | None = None):
    name = label if label is not None else None
    if node.tag == "!Choice":
        if not isinstance(node.value, list) or not node.value:
            raise TemplateError("!Choice needs a non-empty list of options")
        for opt in node.value:
            _assert_plain(opt, "!Choice options")
        return _Directive(
            node, "choice", name or f"choice_{ordinal}", options=list(node.value)
        )
    if node.tag == "!RandomColor":
        return _Directive(node, "color", name or f"color_{ordinal}")
    if node.tag == "!RandomRange":
        if not isinstance(node.value, list) or len(node.value) != 2:
            raise TemplateError("!RandomRange needs [lo, hi]")
        lo = float(_scalar(node.value[0], "!RandomRange lo"))
        hi = float(_scalar(node.value[1], "!RandomRange hi"))
        if not hi > lo:
            raise TemplateError("!RandomRange needs hi > lo")
        return _Directive(node, "range", name or f"range_{ordinal}", lo=lo, hi=hi)
    raise TemplateError(f"unexpected directive {node.tag}")


def _collect(root: yaml.Node) -> list[_Directive]:
    """Directives in document order; labels absorb the node they wrap."""
    out: list[_Directive] = []

    def visit(node: yaml.Node) -> None:
        if node.tag == "!Label":
            if not isinstance(node.value, list) or len(node.value) != 2:
                raise TemplateError("!Label needs [name, value]")
            name = _scalar(node.value[0], "!Label name")
            inner = node.value[1]
            if inner.tag in ("!Choice", "!RandomColor", "!RandomRange"):
                d = _parse_directive(inner, len(out), label=name)
                d.node = node  # replace the whole label wrapper
                d.kind = d.kind
                out.append(d)
            elif inner.tag in DIRECTIVE_TAGS:
                raise TemplateError(f"!Label cannot wrap {inner.tag}")
            else:
                _assert_plain(inner, "!Label value")
                out.append(_Directive(node, "label", name, child=inner))
            return
        if node.tag == "!If":
            if not isinstance(node.value, list) or len(node.value) != 4:
                raise TemplateError("!If needs [label, match, then, else]")
            ref = _scalar(node.value[0], "!If label reference")
            match = _scalar(node.value[1], "!If match value")
            _assert_plain(node.value[2], "!If branches")
            _assert_plain(node.value[3], "!If branches")
            out.append(
                _Directive(
                    node,
                    "if",
                    f"if_{len(out)}",
                    if_label=ref,
                    match=match,
                    then=node.value[2],
                    other=node.value[3],
                )
            )
            return
        if node.tag in ("!Choice", "!RandomColor", "!RandomRange"):
            out.append(_parse_directive(node, len(out)))
            return
        if isinstance(node, yaml.SequenceNode):
            for c in node.value:
                visit(c)
        elif isinstance(node, yaml.MappingNode):
            for _k, v in node.value:
                visit(v)

    visit(root)

    named = [d.name for d in out if d.kind != "if"]
    if len(named) != len(set(named)):
        raise TemplateError("duplicate directive label")
    labels = set(named)
    for d in out:
        if d.kind == "if" and d.if_label not in labels:
            raise TemplateError(f"!If references undeclared label {d.if_label!r}")
    return out


def _rebuild(node: yaml.Node, repl: dict[int, yaml.Node]) -> yaml.Node:
    """Fresh copy of the tree with directive nodes substituted.

    Every emitted node is a new object, so shared template nodes (YAML
    aliases) never serialize back as anchors."""
    if id(node) in repl:
        return copy.deepcopy(repl[id(node)])
    if isinstance(node, yaml.ScalarNode):
        return yaml.ScalarNode(node.tag, node.value, style=node.style)
    if isinstance(node, yaml.SequenceNode):
        return yaml.SequenceNode(
            node.tag, [_rebuild(c, repl) for c in node.value], flow_style=node.flow_style
        )
    if isinstance(node, yaml.MappingNode):
        return yaml.MappingNode(
            node.tag,
            [(_rebuild(k, repl), _rebuild(v, repl)) for k, v in node.value],
            flow_style=node.flow_style,
        )
    raise TemplateError(f"unsupported node type {type(node).__name__}")


def _int_scalar(v: int) -> yaml.ScalarNode:
    return yaml.ScalarNode("tag:yaml.org,2002:int", str(int(v)))


def _rgb_node(r: int, g: int, b: int) -> yaml.MappingNode:
    return yaml.MappingNode(
        "!RGB",
        [
            (yaml.ScalarNode("tag:yaml.org,2002:str", "r"), _int_scalar(r)),
            (yaml.ScalarNode("tag:yaml.org,2002:str", "g"), _int_scalar(g)),
            (yaml.ScalarNode("tag:yaml.org,2002:str", "b"), _int_scalar(b)),
        ],
        flow_style=True,
    )


def _render(node: yaml.Node) -> str:
    """Compact one-line rendering of a node for manifests and matching."""
    if isinstance(node, yaml.ScalarNode):
        return node.value
    text = yaml.serialize(_rebuild(node, {})).strip()
    return " ".join(text.split())


@dataclass
class Battery:
    """Expanded config texts plus the per-file directive assignments."""

    texts: list[str]
    choices: list[dict[str, str]]  # directive name -> rendered value
    seed: int | None = None  # None for exhaustive expansion


def _resolve(root: yaml.Node, directives, pick_value) -> tuple[str, dict[str, str]]:
    """One output: pick_value assigns generator nodes, then ifs resolve."""
    repl: dict[int, yaml.Node] = {}
    resolved: dict[str, str] = {}
    chosen: dict[str, str] = {}
    for d in directives:
        if d.kind == "if":
            continue
        if d.kind == "label":
            value_node = d.child
        else:
            value_node = pick_value(d)
        repl[id(d.node)] = value_node
        resolved[d.name] = _render(value_node)
        chosen[d.name] = resolved[d.name]
    for d in directives:
        if d.kind != "if":
            continue
        branch = d.then if resolved[d.if_label] == d.match else d.other
        repl[id(d.node)] = branch
        chosen[d.name] = _render(branch)
    text = yaml.serialize(_rebuild(root, repl))
    cfg, diags = parse_config(text)
    if cfg is not None:
        diags = diags + validate(cfg)
    errors = [d for d in diags if d.severity == "error"]
    if errors or cfg is None:
        raise TemplateError(
            "expansion produced an invalid config: "
            + "; ".join(str(e) for e in errors or diags)
        )
    return text, chosen


def _compose(template_text: str) -> yaml.Node:
    try:
        root = yaml.compose(template_text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise TemplateError(f"template does not parse: {exc}") from exc
    if root is None:
        raise TemplateError("template is empty")
    return root


def exhaustive_count(template_text: str) -> int:
    """Product of Choice cardinalities (what expand_exhaustive will emit)."""
    directives = _collect(_compose(template_text))
    count = 1
    for d in directives:
        if d.kind == "choice":
            count *= len(d.options)
        elif d.kind in ("color", "range"):
            raise TemplateError(f"!{d.kind.title()} has no finite domain")
    return count


def expand_exhaustive(template_text: str) -> Battery:
    root = _compose(template_text)
    directives = _collect(root)
    choices = [d for d in directives if d.kind == "choice"]
    for d in directives:
        if d.kind in ("color", "range"):
            raise TemplateError(
                "exhaustive expansion cannot enumerate !RandomColor/!RandomRange; "
                "use sampling"
            )
    texts, assignments = [], []
    for combo in product(*(range(len(d.options)) for d in choices)):
        picked = dict(zip((id(d.node) for d in choices), combo))

        def pick_value(d):
            return d.options[picked[id(d.node)]]

        text, chosen = _resolve(root, directives, pick_value)
        texts.append(text)
        assignments.append(chosen)
    return Battery(texts=texts, choices=assignments)


def expand_sample(template_text: str, n: int, seed: int) -> Battery:
    if n < 1:
        raise TemplateError("sample count must be >= 1")
    root = _compose(template_text)
    directives = _collect(root)
    rng = np.random.default_rng(seed)
    texts, assignments = [], []
    for _ in range(n):

        def pick_value(d):
            if d.kind == "choice":
                return d.options[int(rng.integers(len(d.options)))]
            if d.kind == "color":
                r, g, b = (int(v) for v in rng.integers(0, 256, size=3))
                return _rgb_node(r, g, b)
            if d.kind == "range":
                x = float(rng.uniform(d.lo, d.hi))
                return yaml.ScalarNode("tag:yaml.org,2002:float", repr(x))
            raise TemplateError(f"unexpected generator {d.kind}")

        text, chosen = _resolve(root, directives, pick_value)
        texts.append(text)
        assignments.append(chosen)
    return Battery(texts=texts, choices=assignments, seed=seed)


MANIFEST_HEADER = ["file", "directive", "value", "seed"]


def write_battery(battery: Battery, out_dir, stem: str = "arena") -> Path:
    """Write numbered config files plus a manifest CSV; returns its path."""
    if not battery.texts:
        raise TemplateError("nothing to write: expansion is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(battery.texts) - 1)))
    seed = "" if battery.seed is None else battery.seed
    manifest_path = out_dir / f"{stem}_manifest.csv"
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for i, (text, chosen) in enumerate(zip(battery.texts, battery.choices)):
            name = f"{stem}_{i:0{width}d}.yml"
            (out_dir / name).write_text(text)
            for directive, value in chosen.items():
                writer.writerow([name, directive, value, seed])
    return manifest_path
