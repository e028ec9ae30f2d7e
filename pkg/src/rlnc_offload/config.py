"""Scenario files: flat ``key = value`` settings under ``[scenario]``, ``[channel]``, ``[sweep]``.

Lists are comma-separated. ``#`` and ``;`` start comment lines. Every error
names the file, line and key it concerns::

    [scenario]
    R = 4
    trials = 10000

    [channel]
    kind = disk
    eps = 0.02
    radius_m = 600

    [sweep]
    q = 2, 256
    K = 10, 15, 20
    overhead = 0, 1, 2
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .sim import ChannelModel, ScenarioConfig

_SCENARIO_KEYS = {
    "R": int, "isd_m": float, "width_m": float, "K": int, "N": int, "d": int, "C": int,
    "q": int, "poly": lambda s: int(s, 0), "eaves_pos_m": float, "eaves_range_m": float,
    "packet_len": int, "trials": int, "seed": int,
}
_CHANNEL_KEYS = {"kind": str, "eps": float, "radius_m": float, "table": str}
_SWEEP_KEYS = {"q": int, "K": int, "d": int, "C": int, "overhead": int}
_SECTIONS = {"scenario": _SCENARIO_KEYS, "channel": _CHANNEL_KEYS, "sweep": _SWEEP_KEYS}


@dataclass(frozen=True)
class SweepGrid:
    q: tuple[int, ...]
    K: tuple[int, ...]
    d: tuple[int, ...]
    C: tuple[int, ...]
    overhead: tuple[int, ...]


@dataclass(frozen=True)
class LoadedConfig:
    path: Path
    scenario: ScenarioConfig
    sweep: SweepGrid


def resolve_path(path) -> Path:
    """Return ``path`` if it exists, else the bundled config of that name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("rlnc_offload") / "configs" / p.name
    if p.parent == Path(".") and bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"{p}: no such config file")


def parse_text(text: str, source: str = "<config>") -> dict[str, dict[str, tuple[str, int]]]:
    """Raw ``{section: {key: (value, lineno)}}``."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: malformed section header {line!r}")
            current = line[1:-1].strip()
            if current not in _SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key '{key}' appears before any section")
        if key not in _SECTIONS[current]:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}' in [{current}]")
        if key in sections[current]:
            raise ConfigError(f"{source}:{lineno}: key '{key}' repeated in [{current}]")
        sections[current][key] = (value, lineno)
    return sections


def _convert(section, key, value, lineno, source, as_list=False):
    conv = _SECTIONS[section][key]
    items = [v.strip() for v in value.split(",")] if as_list else [value]
    if as_list and items == [""]:
        return ()
    try:
        out = tuple(conv(v) for v in items)
    except ValueError:
        raise ConfigError(f"{source}:{lineno}: key '{key}': cannot parse {value!r}") from None
    return out if as_list else out[0]


def load_text(text: str, source: str = "<config>", base_dir: Path | None = None) -> tuple[ScenarioConfig, SweepGrid]:
    sections = parse_text(text, source)

    def where(section, key):
        entry = sections.get(section, {}).get(key)
        return f"{source}:{entry[1]}" if entry else source

    scen = {
        k: _convert("scenario", k, v, n, source) for k, (v, n) in sections.get("scenario", {}).items()
    }
    chan = {k: _convert("channel", k, v, n, source) for k, (v, n) in sections.get("channel", {}).items()}
    try:
        table = chan.pop("table", None)
        if table is not None:
            path = Path(table)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            chan.setdefault("kind", "table")
            if chan["kind"] != "table":
                raise ConfigError("a table file requires kind = table", "kind")
            channel = ChannelModel.from_csv(path)
        else:
            channel = ChannelModel(**chan)
    except ConfigError as exc:
        key = exc.key or "table"
        raise ConfigError(f"{where('channel', key)}: key '{key}': {exc}") from None

    try:
        if "N" not in scen and "K" in scen:
            scen["N"] = max(scen["K"], ScenarioConfig.N)
        scenario = ScenarioConfig(channel=channel, **scen)
    except ConfigError as exc:
        key = exc.key or "?"
        raise ConfigError(f"{where('scenario', key)}: key '{key}': {exc}") from None

    sw = {k: _convert("sweep", k, v, n, source, as_list=True) for k, (v, n) in sections.get("sweep", {}).items()}
    grid = SweepGrid(
        q=sw.get("q", (scenario.q,)),
        K=sw.get("K", (scenario.K,)),
        d=sw.get("d", (scenario.d,)),
        C=sw.get("C", (scenario.C,)),
        overhead=sw.get("overhead", (scenario.N - scenario.K,)),
    )
    for key in ("q", "K", "d", "C", "overhead"):
        for v in getattr(grid, key):
            probe = {"overhead": {"N": scenario.K + v}, "K": {"K": v, "N": v}}.get(key, {key: v})
            if key == "overhead" and v < 0:
                raise ConfigError(f"{where('sweep', key)}: key '{key}': overhead must be >= 0, got {v}")
            try:
                replace(scenario, **probe)
            except ConfigError as exc:
                raise ConfigError(f"{where('sweep', key)}: key '{key}': {exc}") from None
    return scenario, grid


def load(path) -> LoadedConfig:
    p = resolve_path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: {exc.strerror}") from None
    scenario, grid = load_text(text, str(p), p.parent)
    return LoadedConfig(p, scenario, grid)
