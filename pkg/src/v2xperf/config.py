"""Flat ``key = value`` run configuration with ``radio.``/``mac.``/``scenario.``/``run.`` prefixes."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .mac import MacPhyParams
from .radio import LinkBudget, PathLossModel, Radio
from .scenarios import ScenarioSpec

COMMANDS = ("simulate", "hidden-sweep", "lut-gen", "estimate", "fit", "validate")

# Command-specific defaults, applied beneath the file and the flags.
COMMAND_DEFAULTS = {
    "simulate": {"scenario.kind": "collocated", "run.cams_per_node": "300"},
    "hidden-sweep": {"run.cams_per_node": "300", "run.runs_per_point": "5",
                     "run.separations": "0:220:20", "scenario.total_neighbors": "80"},
    "lut-gen": {"run.grid": "5:200:5", "run.runs_per_point": "5",
                "run.tx_per_node": "1000", "run.clusters": "1,2"},
    "estimate": {},
    "fit": {},
    "validate": {"scenario.kind": "highway", "run.duration": "100"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunOptions:
    duration: float = 10.0
    cams_per_node: int = 0  # 0: derive from duration
    separations: str = "0:220:20"
    runs_per_point: int = 5
    tx_per_node: int = 1000
    grid: str = "5:200:5"
    clusters: str = "1,2"
    loss_receivers: str = "paired"
    delayed_only: bool = True
    packet_log: bool = False


@dataclass
class RunConfig:
    command: str = "simulate"
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    params: MacPhyParams = field(default_factory=MacPhyParams)
    radio: Radio = field(default_factory=Radio)
    run: RunOptions = field(default_factory=RunOptions)
    seed: int = 0
    out: str = "out"
    workers: int = 0  # 0: one per processor

    def to_flat(self) -> dict[str, str]:
        flat = {"command": self.command, "seed": str(self.seed), "out": self.out,
                "workers": str(self.workers)}
        groups = {
            "radio": [self.radio.budget, self.radio.model],
            "mac": [self.params],
            "scenario": [self.scenario],
            "run": [self.run],
        }
        for prefix, objs in groups.items():
            for obj in objs:
                for f in dataclasses.fields(obj):
                    flat[f"{prefix}.{f.name}"] = _fmt(getattr(obj, f.name))
        return flat

    def dump(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.to_flat().items()))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(raw: str, like, key: str):
    try:
        if isinstance(like, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(like).__name__}") from exc


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    flat = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        flat[key.strip()] = value.strip()
    return flat


def load_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        return parse_text(path.read_text(), str(path))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build(cls, prefix: str, flat: dict[str, str], used: set):
    default = cls()
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = f"{prefix}.{f.name}"
        if key in flat:
            kwargs[f.name] = _coerce(flat[key], getattr(default, f.name), key)
            used.add(key)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def build_config(command: str, *layers: dict[str, str]) -> RunConfig:
    """Merge layers left to right (later wins) over the command defaults."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    flat = dict(COMMAND_DEFAULTS[command])
    for layer in layers:
        flat.update({k: v for k, v in layer.items() if v is not None})
    flat["command"] = command
    # one transmit power drives both records
    if "mac.tx_power" in flat and "radio.tx_power" not in flat:
        flat["radio.tx_power"] = flat["mac.tx_power"]
    elif "radio.tx_power" in flat:
        flat["mac.tx_power"] = flat["radio.tx_power"]
    used = {"command"}
    cfg = RunConfig(command=command)
    for key in ("seed", "workers"):
        if key in flat:
            setattr(cfg, key, _coerce(flat[key], 0, key))
            used.add(key)
    if "out" in flat:
        cfg.out = flat["out"]
        used.add("out")
    cfg.radio = Radio(_build(LinkBudget, "radio", flat, used), _build(PathLossModel, "radio", flat, used))
    cfg.params = _build(MacPhyParams, "mac", flat, used)
    cfg.scenario = _build(ScenarioSpec, "scenario", flat, used)
    cfg.run = _build(RunOptions, "run", flat, used)
    unknown = sorted(set(flat) - used)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    return cfg


def parse_range(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ConfigError(f"non-positive step in {text!r}")
            n = int(round((b - a) / step))
            return [a + k * step for k in range(n + 1) if a + k * step <= b + 1e-9]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}") from exc
