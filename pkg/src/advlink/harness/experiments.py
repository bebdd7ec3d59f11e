"""Experiment runners: BLER sweeps, outage, covertness dump, complexity table."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import advgan, attacks_baseline, autoenc, classical
from ..channel import ChannelModel
from ..numerics import checkpoint as ckpt
from ..numerics import count_flops, count_params
from ..power import mean_power, scale_to_pnr
from ..rng import derive_seed, substream
from .config import ConfigError, ExperimentConfig, canonical_hash
from .results import ResultRow, bler_fields, write_csv

# published trainable-parameter and FLOP counts per network
PUBLISHED_COMPLEXITY = {
    "generator": (543, 50_180),
    "critic": (417, 12_290),
    "encoder": (133, 4_480),
    "decoder": (400, 11_780),
}


def load_attack(source: str):
    """``"jamming"`` or a path to a GAN / baseline attack artifact."""
    if source == "jamming":
        return attacks_baseline.BaselineAttack("jamming")
    meta = ckpt.load(source).metadata
    if meta.get("type") != "attack":
        raise ConfigError(f"{source} is not an attack artifact")
    if meta.get("kind") == "gan":
        return advgan.load_artifact(source)
    return attacks_baseline.load_baseline(source)


def attack_label(attack) -> str:
    return attack.kind


def snr_seed(seed: int, snr_db: float) -> int:
    """Per-SNR point seed shared by every curve, so curves see common noise."""
    return derive_seed(seed, "snr", repr(float(snr_db)))


def _bler_point(args):
    model, channel, blocks, seed, attack, pnr = args
    est = autoenc.evaluate_bler(model, channel, blocks, seed, attack=attack, pnr_db=pnr)
    return est.errors


def _classical_point(args):
    scheme, channel, blocks, seed = args
    return classical.simulate_bler(scheme, channel, blocks, substream(seed, "classical", scheme))[0]


def _map(fn, tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _require_model(cfg: ExperimentConfig):
    if cfg.autoencoder is None:
        raise ConfigError("[models] autoencoder is required for this experiment")
    if not Path(cfg.autoencoder).exists():
        raise ConfigError(f"missing autoencoder checkpoint {cfg.autoencoder}")
    return autoenc.load_model(cfg.autoencoder)


def _load_attacks(cfg: ExperimentConfig):
    out = []
    for src in cfg.attacks:
        if src != "jamming" and not Path(src).exists():
            raise ConfigError(f"missing attack artifact {src}")
        out.append(load_attack(src))
    return out


def _row(cfg, curve, channel, snr, pnr, attack, seed, errors=None, blocks=None,
         analytic=None, outage=None) -> ResultRow:
    stats = bler_fields(errors, blocks) if errors is not None else {
        "blocks": None, "errors": None, "bler": None, "ci95": None}
    return ResultRow(experiment=cfg.experiment_id, curve=curve, channel=channel.label(),
                     snr_db=snr, pnr_db=pnr, attack=attack, analytic_bler=analytic,
                     outage_prob=outage, seed=seed, config_hash=cfg.config_hash, **stats)


def sweep_bler_vs_snr(cfg: ExperimentConfig) -> dict[str, list[ResultRow]]:
    curves: dict[str, list[ResultRow]] = {}
    base = cfg.channel
    if cfg.autoencoder is not None:
        model = _require_model(cfg)
        attacks = _load_attacks(cfg)
        tasks, keys = [], []
        for snr in cfg.sweep:
            ch = base.with_snr(snr)
            tasks.append((model, ch, cfg.blocks, snr_seed(cfg.seed, snr), None, None))
            keys.append(("autoencoder", snr, None, None))
            for atk in attacks:
                tasks.append((model, ch, cfg.blocks, snr_seed(cfg.seed, snr), atk, cfg.pnr_db))
                keys.append((attack_label(atk), snr, cfg.pnr_db, attack_label(atk)))
        for (curve, snr, pnr, label), errors in zip(keys, _map(_bler_point, tasks, cfg.workers)):
            curves.setdefault(curve, []).append(
                _row(cfg, curve, base, snr, pnr, label, snr_seed(cfg.seed, snr), errors, cfg.blocks))
    for scheme in cfg.baselines:
        name = classical.SCHEME_ALIASES.get(scheme, scheme)
        tasks = [(name, base.with_snr(s), cfg.blocks, snr_seed(cfg.seed, s)) for s in cfg.sweep]
        rows = []
        for snr, errors in zip(cfg.sweep, _map(_classical_point, tasks, cfg.workers)):
            analytic = None
            if cfg.analytic and base.kind == "awgn":
                analytic = classical.analytic_bler(name, snr)
            rows.append(_row(cfg, scheme, base, snr, None, None, snr_seed(cfg.seed, snr),
                             errors, cfg.blocks, analytic=analytic))
        curves[scheme] = rows
    if not curves:
        raise ConfigError("bler_vs_snr needs an autoencoder and/or classical baselines")
    return curves


def sweep_bler_vs_pnr(cfg: ExperimentConfig) -> dict[str, list[ResultRow]]:
    model = _require_model(cfg)
    attacks = _load_attacks(cfg)
    if not attacks:
        raise ConfigError("bler_vs_pnr needs at least one attack in [models] attacks")
    tasks, keys = [], []
    for snr in cfg.snrs:
        ch = cfg.channel.with_snr(snr)
        seed = snr_seed(cfg.seed, snr)
        tasks.append((model, ch, cfg.blocks, seed, None, None))
        keys.append(("no_attack", snr, None, None))
        for atk in attacks:
            for pnr in cfg.sweep:
                tasks.append((model, ch, cfg.blocks, seed, atk, pnr))
                keys.append((attack_label(atk), snr, pnr, attack_label(atk)))
    curves: dict[str, list[ResultRow]] = {}
    for (curve, snr, pnr, label), errors in zip(keys, _map(_bler_point, tasks, cfg.workers)):
        curves.setdefault(curve, []).append(
            _row(cfg, curve, cfg.channel, snr, pnr, label, snr_seed(cfg.seed, snr),
                 errors, cfg.blocks))
    return curves


def outage_threshold(rate_mbps: float = 50.0, bandwidth_mhz: float = 18.0) -> float:
    """Smallest |h|^2 * SNR meeting the rate: 2^(R/B) - 1."""
    if rate_mbps <= 0 or bandwidth_mhz <= 0:
        raise ValueError("rate and bandwidth must be positive")
    return 2.0 ** (rate_mbps / bandwidth_mhz) - 1.0


def outage_probability(channel: ChannelModel, snr_grid_db, rate_mbps: float = 50.0,
                       bandwidth_mhz: float = 18.0, n_draws: int = 1_000_000,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    """P(B log2(1 + |h|^2 SNR) < R) per grid point, from one shared set of fading draws."""
    threshold = outage_threshold(rate_mbps, bandwidth_mhz)
    rng = rng if rng is not None else np.random.default_rng(0)
    gain = np.sort(channel.fading(n_draws, rng) ** 2)
    snr_lin = 10.0 ** (np.asarray(snr_grid_db, dtype=np.float64) / 10.0)
    # count of draws with gain < threshold / snr
    counts = np.searchsorted(gain, threshold / snr_lin, side="left")
    return counts / n_draws


def run_outage(cfg: ExperimentConfig) -> dict[str, list[ResultRow]]:
    probs = outage_probability(cfg.channel, cfg.sweep, cfg.rate_mbps, cfg.bandwidth_mhz,
                               cfg.outage_draws, substream(cfg.seed, "outage"))
    curves = {"outage": [
        _row(cfg, "outage", cfg.channel, snr, None, None, cfg.seed, outage=float(p))
        for snr, p in zip(cfg.sweep, probs)
    ]}
    if cfg.autoencoder is not None:
        curves.update(sweep_bler_vs_snr(_without_baselines(cfg)))
    return curves


def _without_baselines(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(cfg, baselines=[])


def covertness_dump(victim: autoenc.AutoencoderModel, artifact, snr_db: float = 8.0,
                    pnr_db: float = 0.0, n: int = 64, seed: int = 0,
                    channel: ChannelModel | None = None):
    """Paired clean/adversarial received waveforms plus summary statistics."""
    channel = (channel or ChannelModel("awgn")).with_snr(snr_db)
    msgs = substream(seed, "messages", 0).integers(0, victim.num_messages, size=n)
    clean = channel.apply(autoenc.encode(victim, msgs), substream(seed, "channel", 0))
    p = scale_to_pnr(artifact.sample(n, substream(seed, "attack", 0)), channel.noise_var, pnr_db)
    adv = clean + p
    rows = []
    for i in range(n):
        row = {"index": i}
        row.update({f"clean_{j}": float(clean[i, j]) for j in range(clean.shape[1])})
        row.update({f"adv_{j}": float(adv[i, j]) for j in range(adv.shape[1])})
        rows.append(row)
    noise_std = math.sqrt(channel.noise_var)
    diff = adv - clean
    summary = {
        "snr_db": snr_db,
        "pnr_db": pnr_db,
        "samples": n,
        "noise_power": channel.noise_var,
        "perturbation_power": mean_power(p),
        "power_ratio": mean_power(p) / channel.noise_var,
        "clean_power": mean_power(clean),
        "adv_power": mean_power(adv),
        "mean_l2_diff": float(np.linalg.norm(diff, axis=1).mean()),
        "max_abs_deviation": float(np.abs(diff).max()),
        "max_deviation_noise_std": float(np.abs(diff).max() / noise_std),
        "imperceptible": bool(mean_power(p) <= channel.noise_var * (1 + 1e-9)),
    }
    return rows, summary


def waveform_columns(n_symbols: int = 7) -> list[str]:
    return (["index"] + [f"clean_{j}" for j in range(n_symbols)]
            + [f"adv_{j}" for j in range(n_symbols)])


SUMMARY_COLUMNS = [
    "snr_db", "pnr_db", "samples", "noise_power", "perturbation_power", "power_ratio",
    "clean_power", "adv_power", "mean_l2_diff", "max_abs_deviation", "max_deviation_noise_std",
    "imperceptible", "seed", "config_hash",
]


def reference_stacks() -> dict:
    return {
        "generator": advgan.build_generator(),
        "critic": advgan.build_critic(),
        "encoder": autoenc.build_encoder(),
        "decoder": autoenc.build_decoder(),
    }


COMPLEXITY_COLUMNS = ["network", "params", "flops", "published_params", "published_flops",
                      "params_match", "flops_match"]


def complexity_report(stacks: dict | None = None) -> list[dict]:
    """Params and FLOPs per network next to the published counts, with match flags."""
    stacks = stacks or reference_stacks()
    rows = []
    for name, stack in stacks.items():
        params, flops = count_params(stack), count_flops(stack)
        published_params, published_flops = PUBLISHED_COMPLEXITY.get(name, (None, None))
        rows.append({
            "network": name,
            "params": params,
            "flops": flops,
            "published_params": published_params,
            "published_flops": published_flops,
            "params_match": published_params == params if published_params is not None else None,
            "flops_match": published_flops == flops if published_flops is not None else None,
        })
    return rows


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance_hash(cfg: ExperimentConfig) -> str:
    """Config hash extended with the bytes of every model file the run reads."""
    files = [cfg.autoencoder] if cfg.autoencoder is not None else []
    files += [a for a in cfg.attacks if a != "jamming"]
    digests = [file_digest(f) for f in files if Path(f).exists()]
    return canonical_hash([cfg.config_hash, digests]) if digests else cfg.config_hash


def run_sweep(cfg: ExperimentConfig) -> dict[str, Path]:
    """Run the configured experiment and write one CSV per curve; returns curve -> path."""
    out = Path(cfg.out_dir)
    cfg = replace(cfg, config_hash=provenance_hash(cfg))
    if cfg.kind == "bler_vs_snr":
        curves = sweep_bler_vs_snr(cfg)
    elif cfg.kind == "bler_vs_pnr":
        curves = sweep_bler_vs_pnr(cfg)
    elif cfg.kind == "outage":
        curves = run_outage(cfg)
    elif cfg.kind == "covertness":
        victim = _require_model(cfg)
        attacks = _load_attacks(cfg)
        if not attacks:
            raise ConfigError("covertness needs an attack in [models] attacks")
        rows, summary = covertness_dump(victim, attacks[0], cfg.channel.snr_db, cfg.pnr_db,
                                        cfg.covert_samples, cfg.seed, cfg.channel)
        summary.update(seed=cfg.seed, config_hash=cfg.config_hash)
        return {
            "waveforms": write_csv(out / f"{cfg.experiment_id}_waveforms.csv", rows,
                                   waveform_columns()),
            "summary": write_csv(out / f"{cfg.experiment_id}_summary.csv", [summary],
                                 SUMMARY_COLUMNS),
        }
    elif cfg.kind == "complexity":
        rows = complexity_report()
        for r in rows:
            r["config_hash"] = cfg.config_hash
        return {"complexity": write_csv(out / f"{cfg.experiment_id}_complexity.csv", rows,
                                        COMPLEXITY_COLUMNS + ["config_hash"])}
    else:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
    return {
        curve: write_csv(out / f"{cfg.experiment_id}_{curve}.csv", rows)
        for curve, rows in curves.items()
    }
