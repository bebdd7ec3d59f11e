"""INI-style experiment configuration with a stable content hash."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..channel import ChannelModel

EXPERIMENT_KINDS = ("bler_vs_snr", "bler_vs_pnr", "outage", "covertness", "complexity")
STATISTICAL_KINDS = ("bler_vs_snr", "bler_vs_pnr", "outage")
MIN_BLOCKS = 10_000
NON_RESULT_KEYS = ("out_dir", "workers")


class ConfigError(ValueError):
    pass


def canonical_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def parse_optional_float(text: str | None) -> float | None:
    if text is None:
        return None
    text = text.strip()
    if text == "" or text.lower() in ("none", "na"):
        return None
    return parse_float(text)


def parse_float(text) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    return float(t)


def parse_list(text: str | None) -> list[str]:
    if not text:
        return []
    return [part.strip() for part in text.split(",") if part.strip()]


def sweep_values(start: float, stop: float, step: float) -> list[float]:
    """Inclusive dB grid; values are rounded to 10 decimals to keep them exact-looking."""
    if step <= 0:
        raise ConfigError("sweep step must be positive")
    if stop < start:
        raise ConfigError("sweep stop must be >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def coerce_dataclass(cls, section) -> object:
    """Build ``cls`` from string values, coercing by each field's annotation."""
    kwargs = {}
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key, raw in section.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        ann = str(names[key].type)
        if "tuple" in ann:
            kwargs[key] = tuple(parse_float(v) for v in parse_list(raw))
        elif ann.startswith("bool"):
            kwargs[key] = str(raw).strip().lower() in ("1", "true", "yes", "on")
        elif ann.startswith("int"):
            kwargs[key] = int(raw)
        elif "float" in ann and "None" in ann:
            kwargs[key] = parse_optional_float(raw)
        elif ann.startswith("float"):
            kwargs[key] = parse_float(raw)
        elif "None" in ann:
            kwargs[key] = None if str(raw).strip().lower() in ("", "none") else raw
        else:
            kwargs[key] = raw
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__} settings: {exc}") from exc


@dataclass
class ExperimentConfig:
    kind: str
    experiment_id: str
    seed: int
    blocks: int
    channel: ChannelModel
    sweep: list[float]
    snrs: list[float] = field(default_factory=list)
    pnr_db: float = 0.0
    out_dir: Path = Path("results")
    autoencoder: Path | None = None
    attacks: list[str] = field(default_factory=list)
    baselines: list[str] = field(default_factory=list)
    analytic: bool = True
    workers: int = 1
    rate_mbps: float = 50.0
    bandwidth_mhz: float = 18.0
    outage_draws: int = 1_000_000
    covert_samples: int = 64
    sections: dict = field(default_factory=dict)
    config_hash: str = ""


def read_sections(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    return {name: dict(parser[name]) for name in parser.sections()}


def channel_from_section(sec: dict[str, str], default_snr: float = 8.0) -> ChannelModel:
    return ChannelModel(
        kind=sec.get("kind", "awgn").strip(),
        snr_db=parse_float(sec.get("snr_db", default_snr)),
        distance_m=parse_optional_float(sec.get("distance_m")),
        k_db=parse_optional_float(sec.get("k_db")),
    )


def load_experiment(path) -> ExperimentConfig:
    path = Path(path)
    sections = read_sections(path)
    base = path.parent
    exp = sections.get("experiment")
    if exp is None:
        raise ConfigError("config needs an [experiment] section")
    kind = exp.get("kind", "").strip()
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"experiment kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    try:
        channel = channel_from_section(sections.get("channel", {}))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    sweep_sec = sections.get("sweep", {})
    sweep: list[float] = []
    if kind != "complexity" and kind != "covertness":
        if kind == "bler_vs_pnr":
            default = ("-10", "0", "1")
        elif kind == "outage":
            default = ("2", "20", "2")
        else:
            default = (None, None, None)
        start = sweep_sec.get("start", default[0])
        stop = sweep_sec.get("stop", default[1])
        step = sweep_sec.get("step", default[2])
        if start is None or stop is None or step is None:
            raise ConfigError("[sweep] needs start, stop and step")
        sweep = sweep_values(parse_float(start), parse_float(stop), parse_float(step))
        if not sweep:
            raise ConfigError("sweep axis is empty")

    blocks = int(exp.get("blocks", 1_000_000))
    if kind in STATISTICAL_KINDS and blocks < MIN_BLOCKS:
        raise ConfigError(f"statistical experiments need blocks >= {MIN_BLOCKS}")

    models = sections.get("models", {})
    ae = models.get("autoencoder")
    outage = sections.get("outage", {})
    covert = sections.get("covertness", {})
    cfg = ExperimentConfig(
        kind=kind,
        experiment_id=exp.get("id", path.stem).strip(),
        seed=int(exp.get("seed", 0)),
        blocks=blocks,
        channel=channel,
        sweep=sweep,
        snrs=[parse_float(v) for v in parse_list(sweep_sec.get("snrs", "0, 4, 8"))],
        pnr_db=parse_float(sweep_sec.get("pnr_db", covert.get("pnr_db", "0"))),
        out_dir=(base / exp.get("out_dir", "results")).resolve(),
        autoencoder=(base / ae).resolve() if ae else None,
        attacks=[_resolve_attack(a, base) for a in parse_list(models.get("attacks"))],
        baselines=parse_list(models.get("baselines")),
        analytic=models.get("analytic", "true").strip().lower() in ("1", "true", "yes"),
        workers=int(exp.get("workers", 1)),
        rate_mbps=parse_float(outage.get("rate_mbps", 50)),
        bandwidth_mhz=parse_float(outage.get("bandwidth_mhz", 18)),
        outage_draws=int(outage.get("draws", 1_000_000)),
        covert_samples=int(covert.get("samples", 64)),
        sections=sections,
    )
    cfg.config_hash = canonical_hash(hashable_sections(sections))
    return cfg


def hashable_sections(sections: dict) -> dict:
    """Sections minus keys that cannot change results (output location, worker count)."""
    out = {k: dict(v) for k, v in sections.items()}
    for key in NON_RESULT_KEYS:
        out.get("experiment", {}).pop(key, None)
    return out


def _resolve_attack(spec: str, base: Path) -> str:
    if spec == "jamming":
        return spec
    return str((base / spec).resolve())
