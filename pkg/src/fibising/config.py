"""Run configuration: flat ``key = value`` text with units and a version key."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .dynamics import OrbitBudget
from .export import fmt
from .spectrum import DEFAULT_DENSITY, DEFAULT_EDGE_TOL, DEFAULT_TANGENCY_TOL, ScanOptions
from .tracecore import CouplingParams, ParameterError

CONFIG_VERSION = 1
THREADS_ENV = "FIBISING_THREADS"


class ConfigError(ValueError):
    pass


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _join(values) -> str:
    return ",".join(fmt(v) for v in values)


def _opt_float(text: str):
    return None if text.strip() in ("", "auto") else float(text)


def _offset(text: str):
    return "auto" if text.strip() == "auto" else int(text)


def _grid(text: str):
    if not text.strip():
        return None
    a, b, n = text.split(":")
    return float(a), float(b), int(n)


def _windows(text: str):
    """Either a count ("8") or ``center:halfwidth`` pairs separated by ';'."""
    text = text.strip()
    if not text:
        return None
    if ":" not in text:
        return int(text)
    return tuple(tuple(float(v) for v in w.split(":")) for w in text.split(";") if w.strip())


def _windows_text(w) -> str:
    if w is None:
        return ""
    if isinstance(w, int):
        return str(w)
    return ";".join(f"{fmt(c)}:{fmt(h)}" for c, h in w)


# name -> (parse, format, unit comment)
_CODECS = {
    "J0": (float, fmt, "coupling, energy units"),
    "J1": (float, fmt, "coupling, energy units"),
    "k": (int, str, "level (largest level for sweeps)"),
    "k_min": (int, str, "smallest level for sweeps"),
    "N": (_offset, str, "cover offset, integer or auto"),
    "density": (float, fmt, "scan points per unit s"),
    "edge_tol": (float, fmt, "band edge tolerance, units of s"),
    "tangency_tol": (float, fmt, "gap acceptance threshold on |x|-1"),
    "s_max": (_opt_float, lambda v: "auto" if v is None else fmt(v), "scan window end, units of s, or auto"),
    "max_refine": (int, str, "grid refinements when bands crowd"),
    "inflate": (float, fmt, "containment slack, units of s"),
    "max_steps": (int, str, "orbit step budget"),
    "overflow_guard": (float, fmt, "orbit magnitude guard"),
    "escape_threshold": (float, fmt, "escape threshold C"),
    "strategy": (str, str, "escape test: witness or threshold"),
    "s_grid": (_grid, lambda v: "" if v is None else f"{fmt(v[0])}:{fmt(v[1])}:{v[2]}", "start:stop:num in s, empty for 0:s_max:1001"),
    "point": (lambda t: _floats(t) or None, lambda v: "" if v is None else _join(v), "x,y,z for the orbit dump, empty for none"),
    "dump_steps": (int, str, "orbit dump length, steps"),
    "windows": (_windows, _windows_text, "dimension windows: count or c:h;c:h, empty for 8"),
    "r_list": (_floats, _join, "ratios J0/J1 for the dimension sweep"),
    "V_list": (_floats, _join, "surface levels"),
    "surface_window": (lambda t: _floats(t.replace(":", ",")), lambda v: f"{fmt(v[0])}:{fmt(v[1])}", "lo:hi for both x and y"),
    "surface_grid": (int, str, "grid points per axis"),
    "out": (str, str, "output directory"),
    "threads": (int, str, "worker threads"),
    "seed": (int, str, "RNG seed for randomized checks"),
}


@dataclass(frozen=True)
class RunConfig:
    J0: float = 1.0
    J1: float = 1.0
    k: int = 8
    k_min: int = 1
    N: int | str = 0
    density: float = DEFAULT_DENSITY
    edge_tol: float = DEFAULT_EDGE_TOL
    tangency_tol: float = DEFAULT_TANGENCY_TOL
    s_max: float | None = None
    max_refine: int = 2
    inflate: float = 1e-9
    max_steps: int = 10_000
    overflow_guard: float = 1e150
    escape_threshold: float = 1.0
    strategy: str = "witness"
    s_grid: tuple | None = None
    point: tuple | None = None
    dump_steps: int = 20
    windows: int | tuple | None = None
    r_list: tuple = ()
    V_list: tuple = (0.0001, 0.01, 0.05, 1.0)
    surface_window: tuple = (-2.0, 2.0)
    surface_grid: int = 201
    out: str = "out"
    threads: int = field(default_factory=_default_threads)
    seed: int = 0

    def __post_init__(self):
        try:
            self.params
            self.scan_options
            self.budget
        except (ParameterError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not self.inflate >= 0:
            raise ConfigError("inflate must be non-negative")
        if self.k < 1 or self.k_min < 1 or self.k_min > self.k:
            raise ConfigError(f"need 1 <= k_min <= k, got k_min={self.k_min}, k={self.k}")
        if self.N != "auto" and (not isinstance(self.N, int) or self.N < 0):
            raise ConfigError(f"N must be a non-negative integer or 'auto', got {self.N!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.dump_steps < 0 or self.surface_grid < 0:
            raise ConfigError("dump_steps and surface_grid must be non-negative")
        if self.s_grid is not None and (self.s_grid[2] < 1 or self.s_grid[0] < 0 or self.s_grid[1] < self.s_grid[0]):
            raise ConfigError(f"bad s_grid {self.s_grid}")
        if self.point is not None and len(self.point) != 3:
            raise ConfigError("point needs three coordinates")
        if len(self.surface_window) != 2 or not self.surface_window[0] <= self.surface_window[1]:
            raise ConfigError("surface_window needs lo <= hi")
        if any(v < 0 for v in self.V_list):
            raise ConfigError("surface levels must be non-negative")
        if any(not r > 0 for r in self.r_list):
            raise ConfigError("ratios must be positive")

    @property
    def params(self) -> CouplingParams:
        return CouplingParams(self.J0, self.J1)

    @property
    def scan_options(self) -> ScanOptions:
        return ScanOptions(self.s_max, self.density, self.edge_tol, self.tangency_tol, self.max_refine)

    @property
    def budget(self) -> OrbitBudget:
        return OrbitBudget(self.max_steps, self.escape_threshold, self.overflow_guard, self.strategy)

    @property
    def levels(self) -> list[int]:
        return list(range(self.k_min, self.k + 1))

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # --- text form ---------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"version = {CONFIG_VERSION}"]
        for f in dataclasses.fields(self):
            _, to_text, unit = _CODECS[f.name]
            lines.append(f"{f.name} = {to_text(getattr(self, f.name))}  # {unit}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        return (base or cls()).with_overrides(parse_pairs(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.loads(text)

    def with_overrides(self, pairs: dict[str, str]) -> "RunConfig":
        """Apply textual ``key -> value`` overrides."""
        changes = {}
        for key, raw in pairs.items():
            if key not in _CODECS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                changes[key] = _CODECS[key][0](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
        return dataclasses.replace(self, **changes)


def parse_pairs(text: str) -> dict[str, str]:
    """Parse ``key = value  # comment`` lines; checks the version key."""
    pairs = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        pairs[key] = value
    version = pairs.pop("version", str(CONFIG_VERSION))
    if version != str(CONFIG_VERSION):
        raise ConfigError(f"unsupported config version {version}")
    return pairs


def config_keys() -> list[str]:
    return list(_CODECS)
