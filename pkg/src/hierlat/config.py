"""Plain-text experiment configuration.

The format is ``key = value`` lines with ``#`` comments. A composed combiner
names its parts, and each part is described in a ``[section]`` of its own::

    combiner = compose
    outer = top
    inner = left, right
    index_sets = 0,1; 2,3
    scale = none

    [top]
    combiner = lp
    p = 1
    weights = 1,1

    [left]
    combiner = lp
    p = -1
    weights = 1,1

    [right]
    combiner = lp
    p = -1
    weights = 1,1

Numbers may be written as fractions (``2/3``). Values are kept as the
strings that were written so a config survives a write/read cycle unchanged.
"""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import combiner as cmb
from .dist import DiscreteDist
from .engine import SimConfig, UniformInterval
from .errors import SpecError

HEADER_MARKER = "hierlat config"

_COMBINER_KEYS = ("combiner", "weights", "p", "k", "index", "outer", "inner", "index_sets", "scale")
_SECTION_RE = re.compile(r"^\[\s*([A-Za-z0-9_.\-]+)\s*\]$")


def parse_number(text: str) -> float:
    """Float from a decimal or fraction literal such as ``2/3``."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"not a number: {text!r}") from exc


def parse_list(text: str) -> np.ndarray:
    parts = [t for t in (s.strip() for s in str(text).split(",")) if t]
    return np.array([parse_number(t) for t in parts], dtype=np.float64)


def _norm_list(text: str) -> str:
    return ",".join(t.strip() for t in str(text).split(",") if t.strip())


def parse_text(text: str) -> tuple:
    """Split config text into ``(root, sections)`` dictionaries of strings."""
    root: dict = {}
    sections: dict = {}
    current = root
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1)
            if name in sections:
                raise SpecError(f"line {lineno}: duplicate section [{name}]")
            current = sections[name] = {}
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise SpecError(f"line {lineno}: empty key")
        if key in current:
            raise SpecError(f"line {lineno}: duplicate key {key!r}")
        current[key] = value
    return root, sections


# ----------------------------------------------------------------------
# Combiner specification trees


def _tree(node: dict, sections: dict, trail: tuple) -> dict:
    kind = node.get("combiner")
    if kind is None:
        where = f"section [{trail[-1]}]" if trail else "top level"
        raise SpecError(f"{where}: missing 'combiner = ...'")
    out = {k: node[k] for k in _COMBINER_KEYS if k in node and k not in ("outer", "inner")}
    if kind != "compose":
        return out

    def resolve(name: str) -> dict:
        name = name.strip()
        if name in trail:
            raise SpecError(f"composition cycle through section [{name}]")
        if name not in sections:
            raise SpecError(f"unknown section [{name}]")
        return _tree(sections[name], sections, trail + (name,))

    if "outer" not in node or "inner" not in node:
        raise SpecError("compose needs 'outer' and 'inner'")
    out["outer"] = resolve(node["outer"])
    out["inner"] = [resolve(n) for n in node["inner"].split(",") if n.strip()]
    return out


def spec_tree(root: dict, sections: dict) -> dict:
    """Resolve section references into a nested combiner specification."""
    return _tree(root, sections, ())


def _index_sets(text: str) -> list:
    try:
        return [[int(v) for v in grp.split(",") if v.strip()] for grp in text.split(";")]
    except ValueError as exc:
        raise SpecError(f"bad index_sets {text!r}") from exc


def combiner_from_tree(tree: dict) -> cmb.Combiner:
    """Build a :class:`~hierlat.combiner.Combiner` from a specification tree."""
    kind = tree.get("combiner", "").strip().lower()
    if kind == "diamond":
        return cmb.diamond(parse_list(tree.get("weights", "1,1,1,1")))
    if kind == "lp":
        if "p" not in tree:
            raise SpecError("lp combiner needs 'p'")
        w = parse_list(tree.get("weights", "1,1"))
        return cmb.lp_combiner(w, parse_number(tree["p"]))
    if kind == "mean":
        return cmb.mean_combiner(int(tree.get("k", 2)))
    if kind == "min":
        return cmb.min_combiner(int(tree.get("k", 2)))
    if kind in ("projection", "proj"):
        return cmb.projection_combiner(int(tree.get("k", 2)), int(tree.get("index", 0)))
    if kind == "identity":
        return cmb.identity()
    if kind == "compose":
        scale_text = tree.get("scale", "none").strip().lower()
        if scale_text in ("none", ""):
            scale = None
        elif scale_text == "auto":
            scale = "auto"
        else:
            scale = parse_list(scale_text)
        inner = [combiner_from_tree(t) for t in tree["inner"]]
        if "index_sets" in tree:
            sets = _index_sets(tree["index_sets"])
        else:
            sets, start = [], 0
            for c in inner:
                sets.append(list(range(start, start + c.arity)))
                start += c.arity
        spec = cmb.CompositionSpec(combiner_from_tree(tree["outer"]), inner, sets, scale=scale)
        return cmb.compose(spec)
    raise SpecError(f"unknown combiner {kind!r}")


def combiner_from_config(text: str) -> cmb.Combiner:
    root, sections = parse_text(text)
    return combiner_from_tree(spec_tree(root, sections))


def tree_to_sections(tree: dict, name: str = "") -> tuple:
    """Inverse of :func:`spec_tree`: flat root keys plus named sections."""
    flat = {k: v for k, v in tree.items() if k not in ("outer", "inner")}
    sections: dict = {}
    if tree.get("combiner") == "compose":
        prefix = f"{name}." if name else ""
        outer_name = f"{prefix}outer"
        inner_names = [f"{prefix}inner{i + 1}" for i in range(len(tree["inner"]))]
        flat["outer"] = outer_name
        flat["inner"] = ", ".join(inner_names)
        for sub_name, sub in [(outer_name, tree["outer"])] + list(zip(inner_names, tree["inner"])):
            sub_flat, sub_sections = tree_to_sections(sub, sub_name)
            sections[sub_name] = sub_flat
            sections.update(sub_sections)
    return flat, sections


# ----------------------------------------------------------------------
# Experiment configuration


@dataclass
class ExperimentConfig:
    """Every setting a CLI run depends on.

    Only strings and integers are stored, so writing and re-reading a config
    reproduces it exactly.
    """

    subcommand: str = "simulate"
    combiner: dict = field(default_factory=lambda: {"combiner": "diamond", "weights": "1,1,1,1"})
    x0_atoms: str = "1/2,3/2"
    x0_probs: str = "1/2,1/2"
    x0_uniform: str = ""
    levels: int = 8
    pool_size: int = 100_000
    mode: str = "pooled"
    seed: int = 0
    workers: int = 1
    output: str = ""
    family: str = ""
    grid: str = ""
    box: str = "0.5,2"
    n_samples: int = 10_000
    window: str = ""
    slack: str = "0.1"

    _INT_FIELDS = ("levels", "pool_size", "seed", "workers", "n_samples")

    # -- conversion ------------------------------------------------------

    def build_combiner(self) -> cmb.Combiner:
        return combiner_from_tree(self.combiner)

    def build_x0(self):
        if self.x0_uniform:
            a, b = parse_list(self.x0_uniform)
            return UniformInterval(float(a), float(b))
        atoms = [t for t in self.x0_atoms.split(",") if t.strip()]
        if self.x0_probs:
            probs = [t for t in self.x0_probs.split(",") if t.strip()]
        else:
            probs = [f"1/{len(atoms)}"] * len(atoms)
        if len(atoms) != len(probs):
            raise SpecError("x0_atoms and x0_probs differ in length")
        return DiscreteDist([parse_number(a) for a in atoms], [parse_number(p) for p in probs])

    def window_tuple(self) -> Optional[tuple]:
        if not self.window:
            return None
        parts = [int(v) for v in self.window.split(",")]
        if len(parts) != 2:
            raise SpecError("window needs two levels 'lo,hi'")
        return tuple(parts)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            combiner=self.build_combiner(),
            x0=self.build_x0(),
            levels=self.levels,
            pool_size=self.pool_size,
            mode=self.mode,
            seed=self.seed,
            workers=self.workers,
        )

    # -- text round trip -------------------------------------------------

    def to_text(self) -> str:
        flat, sections = tree_to_sections(self.combiner)
        lines = [f"subcommand = {self.subcommand}"]
        lines += [f"{k} = {v}" for k, v in flat.items()]
        for f in dataclasses.fields(self):
            if f.name in ("subcommand", "combiner"):
                continue
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        for name, body in sections.items():
            lines.append("")
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in body.items()]
        return "\n".join(lines) + "\n"

    def header(self) -> str:
        """The config as ``#`` comment lines, readable by :func:`load_config`."""
        body = self.to_text().splitlines()
        return "".join(f"# {ln}\n" if ln else "#\n" for ln in [HEADER_MARKER] + body)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        root, sections = parse_text(text)
        kwargs = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for key, value in root.items():
            if key in _COMBINER_KEYS:
                continue
            if key not in names:
                raise SpecError(f"unknown config key {key!r}")
            kwargs[key] = value
        if "combiner" in root:
            kwargs["combiner"] = spec_tree(root, sections)
        for key in cls._INT_FIELDS:
            if key in kwargs:
                try:
                    kwargs[key] = int(kwargs[key])
                except ValueError as exc:
                    raise SpecError(f"{key} must be an integer, got {kwargs[key]!r}") from exc
        return cls(**kwargs)


def strip_header(text: str) -> str:
    """Recover config text from a header written by :meth:`ExperimentConfig.header`."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {HEADER_MARKER}":
        return text
    body = []
    for ln in lines[1:]:
        if not ln.startswith("#"):
            break
        body.append(ln[2:] if ln.startswith("# ") else ln[1:])
    return "\n".join(body) + "\n"


def load_config(path: str) -> ExperimentConfig:
    """Read a config file, or the header block of a previous run's output."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return ExperimentConfig.from_text(strip_header(text))
