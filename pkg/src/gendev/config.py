"""Line-oriented problem configuration files.

::

    # unit sphere in flat 3-space
    [base]
    dim = 2
    g_1_1 = 1
    g_2_2 = sin(x1)^2
    lower = 0.02, -3.5
    upper = 3.12, 3.5

    [ambient]
    dim = 3
    g_1_1 = 1
    ...

Sections: ``base`` and ``ambient`` (metrics ``g_a_b``, optional box
``lower``/``upper``), ``bundle`` (``rank``, fiber metric ``frak_alpha_beta``,
connection ``omega_a_alpha_beta``), ``h`` (``h_alpha_a_b``), ``seed`` (``p``,
``ptilde``, row-major ``phi``) or ``submanifold`` (``r``, ``embed``,
``ambient_embed``, row-major ``psi``, ``samples``), ``family`` (``v``,
``theta``, ``u``), ``grid`` (``x1``, ``x2`` ranges) and ``options``.  All
indices are 1-based; bundle indices run over ``1..s``.  Expression lists are
separated by ``;``, number lists by commas or blanks.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .charts import AmbientSpec, BundleSpec, ChartDomain, MetricField, SecondFundamentalField
from .errors import ExprError, GeometryError
from .problem import PointSeed, Problem, SubmanifoldSeed

__all__ = ["ConfigError", "Entry", "ProblemConfig", "parse_config", "load_config", "SECTIONS"]

SECTIONS = ("base", "ambient", "bundle", "h", "seed", "submanifold", "family", "grid", "options")
_HEADER = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ConfigError(GeometryError):
    """Invalid configuration text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class Entry:
    value: str
    line: int


@dataclass
class ProblemConfig:
    sections: dict[str, dict[str, Entry]] = field(default_factory=dict)

    def has(self, section: str) -> bool:
        return section in self.sections

    def section(self, name: str) -> dict[str, Entry]:
        if name not in self.sections:
            raise ConfigError(f"missing section [{name}]")
        return self.sections[name]

    def get(self, section: str, key: str, default: str | None = None) -> str | None:
        entry = self.sections.get(section, {}).get(key)
        return default if entry is None else entry.value

    def require(self, section: str, *keys: str) -> list[str]:
        sec = self.section(section)
        missing = [k for k in keys if k not in sec]
        if missing:
            raise ConfigError(f"missing keys in [{section}]: {', '.join(missing)}")
        return [sec[k].value for k in keys]

    def to_text(self) -> str:
        blocks = []
        for name, entries in self.sections.items():
            lines = [f"[{name}]"] + [f"{k} = {e.value}" for k, e in entries.items()]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"

    # -- typed access -------------------------------------------------------------------

    def floats(self, section: str, key: str) -> np.ndarray:
        text = self.require(section, key)[0]
        return _floats(text, self.sections[section][key].line)

    def integer(self, section: str, key: str) -> int:
        text = self.require(section, key)[0]
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {text!r}",
                              self.sections[section][key].line) from None

    def indexed(self, section: str, prefix: str, arity: int) -> dict[tuple[int, ...], Entry]:
        """Entries ``prefix_i_j...`` as 0-based index tuples."""
        out = {}
        for key, entry in self.sections.get(section, {}).items():
            parts = key.split("_")
            if parts[0] != prefix or len(parts) == 1:
                continue
            if len(parts) != arity + 1 or not all(p.isdigit() and int(p) > 0 for p in parts[1:]):
                raise ConfigError(f"malformed key {key!r}; expected {prefix}" + "_<i>" * arity,
                                  entry.line)
            out[tuple(int(p) - 1 for p in parts[1:])] = entry
        return out

    def options(self) -> dict[str, str]:
        return {k: e.value for k, e in self.sections.get("options", {}).items()}

    # -- problem assembly -----------------------------------------------------------------

    def dimensions(self) -> tuple[int, int, int]:
        n = self.integer("base", "dim")
        big_n = self.integer("ambient", "dim")
        s = self.integer("bundle", "rank") if "rank" in self.sections.get("bundle", {}) else big_n - n
        if n < 1 or s < 0 or big_n != n + s:
            raise ConfigError(f"dimension mismatch: base {n} + bundle rank {s} != ambient {big_n}")
        return n, s, big_n

    def build(self) -> Problem:
        for name in ("base", "ambient"):
            self.section(name)
        if not (self.has("seed") or self.has("submanifold")):
            raise ConfigError("missing section [seed] (or [submanifold])")
        n, s, big_n = self.dimensions()
        self._check_seed_sizes(n, s, big_n)
        try:
            base = MetricField(n, self._components("base", "g", n), self._domain("base", n))
            ambient = AmbientSpec(big_n, self._components("ambient", "g", big_n),
                                  self._domain("ambient", big_n))
            bundle = BundleSpec(s, n, self._components("bundle", "frak", s),
                                self._indexed_values("bundle", "omega", 3, (n, s, s)))
            h = SecondFundamentalField(n, s, self._indexed_values("h", "h", 3, (s, n, n)))
            seed = self._seed(n, s, big_n)
        except ExprError as exc:
            raise ConfigError(f"bad expression: {exc}") from exc
        return Problem(base, bundle, h, ambient, seed, name=self.get("options", "name", "") or "")

    def _components(self, section: str, prefix: str, dim: int) -> dict:
        return self._indexed_values(section, prefix, 2, (dim, dim))

    def _indexed_values(self, section, prefix, arity, bounds) -> dict:
        out = {}
        for idx, entry in self.indexed(section, prefix, arity).items():
            if any(i >= b for i, b in zip(idx, bounds)):
                raise ConfigError(f"index out of range in {prefix}_"
                                  + "_".join(str(i + 1) for i in idx), entry.line)
            out[idx] = entry.value
        return out

    def _domain(self, section: str, dim: int) -> ChartDomain | None:
        sec = self.sections.get(section, {})
        if "lower" not in sec and "upper" not in sec:
            return None
        lo, hi = self.floats(section, "lower"), self.floats(section, "upper")
        if len(lo) != dim or len(hi) != dim:
            raise ConfigError(f"[{section}] domain bounds need {dim} values")
        return ChartDomain(tuple(lo), tuple(hi))

    def _check_seed_sizes(self, n: int, s: int, big_n: int) -> None:
        if self.has("seed"):
            self.require("seed", "p", "ptilde", "phi")
            for key, size in (("p", n), ("ptilde", big_n), ("phi", big_n * (n + s))):
                vals = self.floats("seed", key)
                if len(vals) != size:
                    raise ConfigError(f"dimension mismatch: {key} needs {size} values, got {len(vals)}",
                                      self.sections["seed"][key].line)
        else:
            r = self.integer("submanifold", "r")
            embed, amb, psi = self.require("submanifold", "embed", "ambient_embed", "psi")
            for key, text, size in (("embed", embed, n), ("ambient_embed", amb, big_n),
                                    ("psi", psi, big_n * (n + s))):
                if len(_exprs(text)) != size:
                    raise ConfigError(f"dimension mismatch: {key} needs {size} expressions",
                                      self.sections["submanifold"][key].line)
            if not 1 <= r < n:
                raise ConfigError(f"submanifold dimension r = {r} must lie in 1..{n - 1}")

    def _seed(self, n: int, s: int, big_n: int):
        if self.has("seed"):
            phi = self.floats("seed", "phi").reshape(big_n, n + s)
            return PointSeed(self.floats("seed", "p"), self.floats("seed", "ptilde"), phi)
        r = self.integer("submanifold", "r")
        psi = _exprs(self.get("submanifold", "psi"))
        rows = [psi[i * (n + s):(i + 1) * (n + s)] for i in range(big_n)]
        samples = None
        if self.get("submanifold", "samples") is not None:
            samples = self.floats("submanifold", "samples").reshape(-1, r)
        return SubmanifoldSeed(r, _exprs(self.get("submanifold", "embed")),
                               _exprs(self.get("submanifold", "ambient_embed")), rows,
                               domain=self._domain("submanifold", r), samples=samples)


def _floats(text: str, line: int | None = None) -> np.ndarray:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise ConfigError(f"expected numbers, got {text!r}", line) from None


def _exprs(text: str) -> list[str]:
    return [p.strip() for p in text.split(";")]


def parse_config(text: str | bytes) -> ProblemConfig:
    """Parse configuration text (see the module docstring for the format)."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    cfg = ProblemConfig()
    current: dict[str, Entry] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            m = _HEADER.match(line)
            if not m:
                raise ConfigError(f"malformed section header {line!r}", lineno)
            name = m.group(1)
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name in cfg.sections:
                raise ConfigError(f"duplicate section [{name}]", lineno)
            current = cfg.sections[name] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("entry before the first section header", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"malformed key {key!r}", lineno)
        if key in current:
            raise ConfigError(f"duplicate key {key!r} (first given on line {current[key].line})",
                              lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        current[key] = Entry(value, lineno)
    return cfg


def load_config(path) -> ProblemConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read())
