"""Run configuration: flat ``key = value`` files, flag overrides, manifests."""

from dataclasses import dataclass, field, fields, asdict
import json
from pathlib import Path
from typing import List, Optional

from .errors import UsageError


@dataclass
class RunConfig:
    tau: float = 12.0
    gamma: float = -0.05
    slope: float = 60.0
    dt: float = 0.1
    n_steps: int = 10_000
    eps: float = -0.05
    D: float = 1e-5
    eps_grid: List[float] = field(default_factory=lambda: frange(-0.4, 0.25, 0.01))
    D_grid: List[float] = field(default_factory=lambda: [0.0, 1e-5])
    n_trials: int = 500
    master_seed: int = 0
    out: str = "out"
    u_init: float = 0.01
    window_fraction: float = 0.25
    decimation: int = 10
    horizon: float = 1000.0
    n_real: int = 200
    threshold: Optional[float] = None

    def validate(self):
        if not self.tau > 0:
            raise UsageError(f"tau must be > 0, got {self.tau}")
        if not self.dt > 0:
            raise UsageError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1 or self.n_trials < 1 or self.decimation < 1:
            raise UsageError("n_steps, n_trials and decimation must be >= 1")
        if self.D < 0 or any(D < 0 for D in self.D_grid):
            raise UsageError("noise intensities must be >= 0")
        if not self.eps_grid or not self.D_grid:
            raise UsageError("eps_grid and D_grid must be non-empty")
        if not 0 < self.window_fraction <= 0.5:
            raise UsageError(f"window_fraction must lie in (0, 0.5], got {self.window_fraction}")
        return self


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
LIST_FIELDS = {"eps_grid", "D_grid"}


def frange(start, stop, step):
    """Inclusive arithmetic range, values rounded to 12 decimals."""
    if step <= 0:
        raise UsageError(f"range step must be positive, got {step}")
    n = int(round((stop - start) / step))
    if start + n * step > stop + 1e-12 * max(1.0, abs(stop)):
        n -= 1
    return [round(start + k * step, 12) for k in range(n + 1)]


def parse_list(text):
    """``"a, b, c"`` or an inclusive range ``"start:stop:step"``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be start:stop:step, got {text!r}")
        return frange(*(float(p) for p in parts))
    return [float(v) for v in text.split(",") if v.strip()]


def _convert(key, value):
    if key not in FIELD_TYPES:
        raise UsageError(f"unknown config key {key!r}")
    try:
        if key in LIST_FIELDS:
            return parse_list(value) if isinstance(value, str) else [float(v) for v in value]
        if key == "threshold":
            return None if value in (None, "", "none", "None") else float(value)
        if key == "out":
            return str(value)
        if key in ("n_steps", "n_trials", "master_seed", "decimation", "n_real"):
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"bad value for {key}: {value!r}") from None


def parse(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = _convert(key, value)
    return values


def serialize(config):
    lines = []
    for key, value in asdict(config).items():
        if key in LIST_FIELDS:
            value = ", ".join(repr(float(v)) for v in value)
        elif value is None:
            value = "none"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load(path):
    """Values from a ``key = value`` file or from the ``config`` block of a manifest."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text).get("config", {})
        return {k: _convert(k, v) for k, v in data.items()}
    return parse(text)


def resolve(path=None, **overrides):
    """Defaults, then the config file, then non-None overrides (flags win)."""
    values = load(path) if path else {}
    for key, value in overrides.items():
        if value is not None:
            values[key] = _convert(key, value)
    return RunConfig(**values).validate()
