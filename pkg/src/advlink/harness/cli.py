"""Command-line entry point: ``advlink <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .. import advgan, attacks_baseline, autoenc, classical
from ..channel import KINDS as CHANNEL_KINDS
from ..channel import ChannelModel, noise_variance
from ..rng import substream
from . import experiments
from .config import (
    ConfigError,
    canonical_hash,
    channel_from_section,
    coerce_dataclass,
    load_experiment,
    parse_float,
    read_sections,
)
from .results import ProvenanceError, ResultRow, bler_fields, merge_result_files, to_csv

log = logging.getLogger("advlink")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


FILE_ARGS = ("model", "victim", "artifact", "attack")


def _args_hash(args, *names) -> str:
    """Hash of the named arguments; model files contribute their bytes, not their path."""
    values = {}
    for n in names:
        v = getattr(args, n)
        if n in FILE_ARGS and v is not None and v != "jamming":
            v = experiments.file_digest(v)
        values[n] = v
    return canonical_hash(values)


def _channel_args(p: argparse.ArgumentParser, snr: bool = True) -> None:
    p.add_argument("--channel", choices=CHANNEL_KINDS, default="awgn")
    if snr:
        p.add_argument("--snr-db", type=parse_float, required=True)
    p.add_argument("--distance-m", type=float, default=None)
    p.add_argument("--k-db", type=float, default=None, help="fixed Rician K override (dB)")


def _channel(args, snr_db=None) -> ChannelModel:
    snr = args.snr_db if snr_db is None else snr_db
    return ChannelModel(args.channel, snr, args.distance_m, args.k_db)


def _config_sections(path) -> tuple[dict, str]:
    if path is None:
        return {}, canonical_hash({})
    sections = read_sections(path)
    return sections, canonical_hash(sections)


def _seed(args, sections) -> int:
    if args.seed is not None:
        return args.seed
    return int(sections.get("experiment", {}).get("seed", 0))


def cmd_train_autoencoder(args) -> None:
    sections, chash = _config_sections(args.config)
    cfg = coerce_dataclass(autoenc.AutoencoderConfig, sections.get("autoencoder", {}))
    seed = _seed(args, sections)
    model = autoenc.train_autoencoder(cfg, substream(seed, "autoencoder"))
    autoenc.save_model(args.out, model, config_hash=canonical_hash([chash, seed]))
    log.info("saved autoencoder to %s (final loss %.5f)", args.out, model.loss_history[-1])


def _training_channel(args, sections) -> ChannelModel:
    if args.channel is not None:
        return ChannelModel(args.channel, 8.0, args.distance_m, args.k_db)
    return channel_from_section(sections.get("channel", {}))


def cmd_train_attack(args) -> None:
    sections, chash = _config_sections(args.config)
    cfg = coerce_dataclass(advgan.GanTrainConfig, sections.get("gan", {}))
    seed = _seed(args, sections)
    victim = autoenc.load_model(args.victim)
    channel = _training_channel(args, sections)
    dataset = advgan.build_dataset(cfg, victim, channel, substream(seed, "dataset"))
    art = advgan.train_attack(cfg, victim, channel, substream(seed, "gan"), dataset=dataset)
    art.metadata["dataset_seed"] = seed
    advgan.save_artifact(args.out, art, config_hash=canonical_hash([chash, seed]))
    tlog = art.training_log
    log.info("saved GAN attack to %s after %d critic steps (max |w| = %.4f)", args.out,
             tlog.critic_steps, tlog.max_abs_critic_weight)


def cmd_train_baseline_attack(args) -> None:
    sections, chash = _config_sections(args.config)
    seed = _seed(args, sections)
    sec = dict(sections.get("baseline_attack", {}))
    params = {}
    for key in ("iters", "batch_size", "max_samples", "restarts", "score_samples"):
        if key in sec:
            params[key] = int(sec[key])
    for key in ("step", "lr", "kappa", "init_scale", "radius"):
        if key in sec:
            params[key] = float(sec[key])
    if "target_snr_db" in sec:
        # optimize at the norm the vector will have when deployed
        pnr = parse_float(sec.get("target_pnr_db", "0"))
        params["radius"] = math.sqrt(7 * noise_variance(parse_float(sec["target_snr_db"]))
                                     * 10.0 ** (pnr / 10.0))
    if args.kind == "jamming":
        attack = attacks_baseline.BaselineAttack("jamming")
    else:
        if args.victim is None:
            raise ConfigError(f"--victim is required for {args.kind}")
        victim = autoenc.load_model(args.victim)
        gan_cfg = coerce_dataclass(advgan.GanTrainConfig, sections.get("gan", {}))
        channel = _training_channel(args, sections)
        dataset = advgan.build_dataset(gan_cfg, victim, channel, substream(seed, "dataset"))
        if args.kind == "universal":
            params = {k: v for k, v in params.items()
                      if k in ("iters", "step", "batch_size", "radius", "restarts",
                               "score_samples")}
        else:
            params = {k: v for k, v in params.items()
                      if k in ("iters", "lr", "kappa", "init_scale", "max_samples")}
        attack = attacks_baseline.train_baseline_attack(
            args.kind, victim, dataset, substream(seed, "baseline", args.kind), **params)
    attacks_baseline.save_baseline(args.out, attack, config_hash=canonical_hash([chash, seed]))
    log.info("saved %s baseline attack to %s", args.kind, args.out)


def _eval_row(args, channel, attack_name, est, chash, experiment) -> str:
    row = ResultRow(experiment=experiment, curve=attack_name or "no_attack",
                    channel=channel.label(), snr_db=channel.snr_db,
                    pnr_db=args.pnr_db if attack_name else None, attack=attack_name,
                    analytic_bler=None, outage_prob=None, seed=args.seed, config_hash=chash,
                    **bler_fields(est.errors, est.blocks))
    return to_csv([row])


def cmd_eval_bler(args) -> None:
    model = autoenc.load_model(args.model)
    channel = _channel(args)
    attack = None
    if args.attack:
        if args.pnr_db is None:
            raise ConfigError("--attack needs --pnr-db")
        attack = experiments.load_attack(args.attack)
    est = autoenc.evaluate_bler(model, channel, args.blocks, args.seed, attack=attack,
                                pnr_db=args.pnr_db if attack else None)
    chash = _args_hash(args, "model", "channel", "snr_db", "distance_m", "k_db", "blocks",
                       "seed", "attack", "pnr_db")
    _emit(_eval_row(args, channel, attack.kind if attack else None, est, chash, "eval-bler"),
          args.out)


def cmd_validate_attack(args) -> None:
    victim = autoenc.load_model(args.victim)
    art = experiments.load_attack(args.artifact)
    channel = _channel(args)
    est = advgan.validate_attack(art, victim, channel, args.pnr_db, args.blocks, args.seed)
    chash = _args_hash(args, "artifact", "victim", "channel", "snr_db", "distance_m", "k_db",
                       "pnr_db", "blocks", "seed")
    _emit(_eval_row(args, channel, art.kind, est, chash, "validate-attack"), args.out)


def cmd_baseline_bler(args) -> None:
    chash = _args_hash(args, "scheme", "channel", "snr_db", "distance_m", "k_db", "blocks",
                       "seed", "analytic")
    rows = []
    for snr in args.snr_db:
        channel = _channel(args, snr)
        analytic = None
        if args.analytic:
            analytic = classical.analytic_bler(args.scheme, snr, channel.kind)
        if args.blocks > 0:
            errors, blocks = classical.simulate_bler(
                args.scheme, channel, args.blocks,
                substream(experiments.snr_seed(args.seed, snr), "classical",
                          classical.SCHEME_ALIASES[args.scheme]))
            stats = bler_fields(errors, blocks)
        else:
            stats = {"blocks": None, "errors": None, "bler": None, "ci95": None}
        rows.append(ResultRow(experiment="baseline-bler", curve=args.scheme,
                              channel=channel.label(), snr_db=snr, pnr_db=None, attack=None,
                              analytic_bler=analytic, outage_prob=None, seed=args.seed,
                              config_hash=chash, **stats))
    _emit(to_csv(rows), args.out)


def cmd_sweep(args) -> None:
    cfg = load_experiment(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    for curve, path in experiments.run_sweep(cfg).items():
        print(f"{curve}\t{path}")


def cmd_outage(args) -> None:
    if args.config:
        cfg = load_experiment(args.config)
        if cfg.kind != "outage":
            raise ConfigError("config kind must be 'outage'")
        for curve, path in experiments.run_sweep(cfg).items():
            print(f"{curve}\t{path}")
        return
    channel = ChannelModel(args.channel, 0.0, args.distance_m, args.k_db)
    grid = [args.start + i * args.step
            for i in range(int(round((args.stop - args.start) / args.step)) + 1)]
    probs = experiments.outage_probability(channel, grid, args.rate_mbps, args.bandwidth_mhz,
                                           args.draws, substream(args.seed, "outage"))
    chash = _args_hash(args, "channel", "distance_m", "k_db", "start", "stop", "step",
                       "rate_mbps", "bandwidth_mhz", "draws", "seed")
    rows = [ResultRow(experiment="outage", curve="outage", channel=channel.label(),
                      snr_db=float(s), pnr_db=None, attack=None, blocks=None, errors=None,
                      bler=None, ci95=None, analytic_bler=None, outage_prob=float(p),
                      seed=args.seed, config_hash=chash)
            for s, p in zip(grid, probs)]
    _emit(to_csv(rows), args.out)


def cmd_covertness(args) -> None:
    victim = autoenc.load_model(args.victim)
    art = experiments.load_attack(args.artifact)
    rows, summary = experiments.covertness_dump(victim, art, args.snr_db, args.pnr_db,
                                                args.samples, args.seed, _channel(args))
    chash = _args_hash(args, "victim", "artifact", "channel", "snr_db", "pnr_db", "samples",
                       "seed", "distance_m", "k_db")
    summary.update(seed=args.seed, config_hash=chash)
    out = Path(args.out_prefix)
    out.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{out}_waveforms.csv").write_text(
        to_csv(rows, experiments.waveform_columns()), encoding="utf-8", newline="")
    Path(f"{out}_summary.csv").write_text(
        to_csv([summary], experiments.SUMMARY_COLUMNS), encoding="utf-8", newline="")
    print(to_csv([summary], experiments.SUMMARY_COLUMNS), end="")


def cmd_report_complexity(args) -> None:
    _emit(to_csv(experiments.complexity_report(), experiments.COMPLEXITY_COLUMNS), args.out)


def cmd_export(args) -> None:
    _emit(merge_result_files(args.inputs), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advlink", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-autoencoder", help="train the (7,4) autoencoder")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train_autoencoder)

    p = sub.add_parser("train-attack", help="train the WGAN perturbation generator")
    p.add_argument("--victim", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--channel", choices=CHANNEL_KINDS)
    p.add_argument("--distance-m", type=float)
    p.add_argument("--k-db", type=float)
    p.set_defaults(func=cmd_train_attack)

    p = sub.add_parser("train-baseline-attack", help="build a comparison attack artifact")
    p.add_argument("--kind", choices=attacks_baseline.KINDS, required=True)
    p.add_argument("--victim")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--channel", choices=CHANNEL_KINDS)
    p.add_argument("--distance-m", type=float)
    p.add_argument("--k-db", type=float)
    p.set_defaults(func=cmd_train_baseline_attack)

    p = sub.add_parser("eval-bler", help="Monte Carlo BLER of a trained autoencoder")
    p.add_argument("--model", required=True)
    _channel_args(p)
    p.add_argument("--blocks", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attack", help="attack artifact path or 'jamming'")
    p.add_argument("--pnr-db", type=parse_float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_bler)

    p = sub.add_parser("baseline-bler", help="BLER of uncoded BPSK / Hamming(7,4)")
    p.add_argument("--scheme", choices=sorted(classical.SCHEME_ALIASES), required=True)
    p.add_argument("--channel", choices=CHANNEL_KINDS, default="awgn")
    p.add_argument("--snr-db", type=parse_float, nargs="+", required=True)
    p.add_argument("--distance-m", type=float)
    p.add_argument("--k-db", type=float)
    p.add_argument("--blocks", type=int, default=1_000_000, help="0 skips Monte Carlo")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--analytic", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline_bler)

    p = sub.add_parser("validate-attack", help="BLER under a trained attack at a given PNR")
    p.add_argument("--artifact", required=True)
    p.add_argument("--victim", required=True)
    _channel_args(p)
    p.add_argument("--pnr-db", type=parse_float, required=True)
    p.add_argument("--blocks", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate_attack)

    p = sub.add_parser("sweep", help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("outage", help="outage probability versus SNR")
    p.add_argument("--config")
    p.add_argument("--channel", choices=CHANNEL_KINDS, default="rician")
    p.add_argument("--distance-m", type=float)
    p.add_argument("--k-db", type=float)
    p.add_argument("--start", type=float, default=2.0)
    p.add_argument("--stop", type=float, default=20.0)
    p.add_argument("--step", type=float, default=2.0)
    p.add_argument("--rate-mbps", type=float, default=50.0)
    p.add_argument("--bandwidth-mhz", type=float, default=18.0)
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_outage)

    p = sub.add_parser("covertness", help="dump clean/adversarial waveforms")
    p.add_argument("--victim", required=True)
    p.add_argument("--artifact", required=True)
    p.add_argument("--channel", choices=CHANNEL_KINDS, default="awgn")
    p.add_argument("--snr-db", type=parse_float, default=8.0)
    p.add_argument("--pnr-db", type=parse_float, default=0.0)
    p.add_argument("--distance-m", type=float)
    p.add_argument("--k-db", type=float)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_covertness)

    p = sub.add_parser("report-complexity", help="parameter and FLOP counts per network")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report_complexity)

    p = sub.add_parser("export", help="merge result CSVs for plotting (single provenance only)")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, ProvenanceError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
