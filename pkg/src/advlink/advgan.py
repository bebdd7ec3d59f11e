"""Input-agnostic adversarial perturbation generator trained as a WGAN.

The generator maps a 5-dim Gaussian latent to a 7-symbol perturbation. A
weight-clipped critic scores received signals. The generator loss mixes the
critic's realism score with the victim decoder's true-class log-probability::

    L_G = -lam * D(r + G(m)) + (1 - lam) * sum_i c_i log I(r_i + G(m_i))

Training follows the WGAN recipe: a critic update on every batch, with
weights clamped to [-c, c], and a generator update on every n_critic-th batch.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np

from .autoenc import AutoencoderModel, BlerEstimate, encode, evaluate_bler, one_hot
from .channel import ChannelModel
from .numerics import (
    Conv1d,
    ConvTranspose1d,
    Dropout,
    LayerStack,
    LeakyReLU,
    Linear,
    NonFiniteError,
    ReLU,
    Reshape,
    RMSprop,
    clip_weights,
    max_abs_weight,
)
from .numerics import checkpoint as ckpt
from .power import scale_to_pnr

log = logging.getLogger(__name__)


class AttackTrainingError(RuntimeError):
    pass


def build_generator(latent_dim: int = 5, n: int = 7) -> LayerStack:
    """latent -> Linear(8) -> (2, 4) -> ConvT(6, k4) -> (6, 7) -> Conv(20) -> Conv(1) -> 7."""
    if n != 7:
        raise ValueError("reference generator layout is fixed to 7 output symbols")
    return LayerStack([
        Linear(latent_dim, 8),
        Reshape((2, 4)),
        ConvTranspose1d(2, 6, 4),
        ReLU(),
        Conv1d(6, 20, 3, padding=1),
        ReLU(),
        Conv1d(20, 1, 3, padding=1),
        Reshape((7,)),
    ], (latent_dim,), name="generator")


def build_critic(n: int = 7, dropout: float = 0.2, slope: float = 0.2) -> LayerStack:
    return LayerStack([
        Reshape((1, n)),
        Conv1d(1, 8, 3, padding=1),
        LeakyReLU(slope),
        Dropout(dropout),
        Conv1d(8, 12, 3, padding=1),
        LeakyReLU(slope),
        Dropout(dropout),
        Reshape((12 * n,)),
        Linear(12 * n, 1),
    ], (n,), name="critic")


@dataclass
class GanTrainConfig:
    lr: float = 0.0005
    clip: float = 0.1
    batch_size: int = 32
    n_critic: int = 5
    latent_dim: int = 5
    lam: float = 0.5
    dataset_size: int = 100_000
    epochs: int = 50
    # "mixed" draws each sample's SNR from train_snrs_db; a number fixes it
    snr_policy: str = "mixed"
    train_snrs_db: tuple[float, ...] = (0.0, 4.0, 8.0)
    rmsprop_decay: float = 0.99
    rmsprop_eps: float = 1e-8
    dropout: float = 0.2
    leaky_slope: float = 0.2
    early_stop_patience: int = 5
    early_stop_tol: float = 1e-5
    # perturbations are power-normalized to this PNR (per-sample noise) while
    # training; None feeds the raw generator output to critic and decoder
    train_pnr_db: float | None = 0.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.clip <= 0 or self.n_critic < 1 or self.batch_size < 1:
            raise ValueError("clip, n_critic and batch_size must be positive")
        self.train_snrs_db = tuple(float(s) for s in self.train_snrs_db)
        self.snr_policy = str(self.snr_policy)


@dataclass
class GanTrainingLog:
    critic_loss: list[float] = field(default_factory=list)
    generator_loss: list[float] = field(default_factory=list)
    batches_per_epoch: list[int] = field(default_factory=list)
    generator_updates_per_epoch: list[int] = field(default_factory=list)
    # critic-step count at the moment of each generator update
    generator_steps: list[int] = field(default_factory=list)
    critic_steps: int = 0
    max_abs_critic_weight: float = 0.0
    victim_checksum_before: str = ""
    victim_checksum_after: str = ""
    stopped_early: bool = False


@dataclass
class AttackArtifact:
    generator: LayerStack
    latent_dim: int = 5
    kind: str = "gan"
    pnr_rule: str = "mean_power"
    metadata: dict = field(default_factory=dict)
    training_log: GanTrainingLog | None = None

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return generate_perturbation(self, n, rng)


def normalize_power(p: np.ndarray, amplitude: np.ndarray | None):
    """Scale ``p`` to unit mean-square power over the batch, then by ``amplitude`` rows.

    Returns the scaled batch and a function mapping its gradient back to ``p``.
    ``amplitude=None`` is the identity.
    """
    if amplitude is None:
        return p, lambda g: g
    power = float(np.mean(p * p))
    if power == 0.0:
        raise NonFiniteError("zero-power generator output")
    root = math.sqrt(power)
    u = p / root

    def backward(g):
        gu = g * amplitude
        return (gu - u * float(np.mean(gu * u))) / root

    return u * amplitude, backward


def pnr_amplitude(noise_var: np.ndarray, pnr_db: float | None) -> np.ndarray | None:
    """Per-row target RMS amplitude sqrt(noise_var * 10^(pnr/10)), shape (B, 1)."""
    if pnr_db is None:
        return None
    return np.sqrt(np.asarray(noise_var, dtype=np.float64).reshape(-1, 1) * 10.0 ** (pnr_db / 10.0))


def critic_loss(critic: LayerStack, r_real: np.ndarray, r_fake: np.ndarray, *,
                training: bool = False, rng=None, backward: bool = False) -> float:
    """mean D(fake) - mean D(real). With ``backward`` the critic's grads are populated."""
    r_real = np.asarray(r_real, dtype=np.float64)
    r_fake = np.asarray(r_fake, dtype=np.float64)
    if r_real.shape != r_fake.shape:
        raise ValueError("real and fake batches must have the same shape")
    b = r_real.shape[0]
    scores = critic.forward(np.concatenate([r_real, r_fake]), training=training, rng=rng)
    loss = float(scores[b:].mean() - scores[:b].mean())
    if not math.isfinite(loss):
        raise NonFiniteError("critic loss")
    if backward:
        g = np.empty_like(scores)
        g[:b] = -1.0 / b
        g[b:] = 1.0 / b
        critic.backward(g)
    return loss


def generator_loss(critic: LayerStack, decoder: LayerStack, generator: LayerStack,
                   r: np.ndarray, labels: np.ndarray, m: np.ndarray, lam: float, *,
                   amplitude: np.ndarray | None = None, training: bool = False, rng=None,
                   backward: bool = False) -> float:
    """Batch mean of -lam*D(r+G(m)) + (1-lam)*<c, log I(r+G(m))>.

    ``labels`` are one-hot rows and ``decoder`` must emit log-probabilities.
    ``amplitude`` optionally power-normalizes G(m) (see ``normalize_power``).
    With ``backward`` only the generator's grads are populated; the critic and
    decoder pass gradients through without accumulating.
    """
    b = r.shape[0]
    raw = generator.forward(m, training=training, rng=rng)
    p, p_backward = normalize_power(raw, amplitude)
    fake = r + p
    scores = critic.forward(fake, training=training, rng=rng)
    logp = decoder.forward(fake, training=False)
    realism = float(scores.mean())
    true_logp = float((labels * logp).sum(axis=1).mean())
    loss = -lam * realism + (1.0 - lam) * true_logp
    if not math.isfinite(loss):
        raise NonFiniteError("generator loss")
    if backward:
        g_fake = np.zeros_like(fake)
        if lam != 0.0:
            g_fake += critic.backward(np.full_like(scores, -lam / b), accumulate=False)
        if lam != 1.0:
            g_fake += decoder.backward((1.0 - lam) / b * labels, accumulate=False)
        generator.backward(p_backward(g_fake))
    return loss


def build_dataset(cfg: GanTrainConfig, victim: AutoencoderModel, channel: ChannelModel,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Received signals r = H(F(c)), their message labels and per-sample noise variance."""
    n = cfg.dataset_size
    msgs = rng.integers(0, victim.num_messages, size=n)
    s = encode(victim, msgs)
    if cfg.snr_policy == "mixed":
        snrs = rng.choice(np.asarray(cfg.train_snrs_db), size=n)
    else:
        snrs = np.full(n, float(cfg.snr_policy))
    r, _ = channel.transmit(s, rng, snr_db=snrs)
    return r, msgs, 10.0 ** (-snrs / 10.0)


def train_attack(cfg: GanTrainConfig, victim: AutoencoderModel, channel: ChannelModel,
                 rng: np.random.Generator,
                 on_critic_step: Callable[[int, LayerStack], None] | None = None,
                 dataset: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
                 ) -> AttackArtifact:
    """Train generator and critic against a frozen victim decoder.

    ``on_critic_step(step, critic)`` runs after every clamp, for monitoring.
    """
    before = victim.checksum()
    r_all, msgs_all, noise_all = dataset if dataset is not None else build_dataset(cfg, victim, channel, rng)
    labels_all = one_hot(msgs_all, victim.num_messages)
    n_samples = r_all.shape[0]

    generator = build_generator(cfg.latent_dim, r_all.shape[1]).initialize(rng)
    critic = build_critic(r_all.shape[1], cfg.dropout, cfg.leaky_slope).initialize(rng)
    opt_d = RMSprop(critic.params(), lr=cfg.lr, decay=cfg.rmsprop_decay, eps=cfg.rmsprop_eps)
    opt_g = RMSprop(generator.params(), lr=cfg.lr, decay=cfg.rmsprop_decay, eps=cfg.rmsprop_eps)
    tlog = GanTrainingLog(victim_checksum_before=before)
    stagnant = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_samples)
        d_losses, g_losses, g_updates, n_batches = [], [], 0, 0
        for i, start in enumerate(range(0, n_samples, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            real, labels = r_all[idx], labels_all[idx]
            amplitude = pnr_amplitude(noise_all[idx], cfg.train_pnr_db)
            try:
                opt_d.zero_grad()
                m = rng.standard_normal((real.shape[0], cfg.latent_dim))
                raw = generator.forward(m, training=True, rng=rng)
                fake = real + normalize_power(raw, amplitude)[0]
                d_losses.append(critic_loss(critic, real, fake, training=True, rng=rng,
                                            backward=True))
                opt_d.step()
                clip_weights(critic, cfg.clip)
                tlog.critic_steps += 1
                tlog.max_abs_critic_weight = max(tlog.max_abs_critic_weight,
                                                 max_abs_weight(critic))
                if on_critic_step is not None:
                    on_critic_step(tlog.critic_steps, critic)
                if (i + 1) % cfg.n_critic == 0:
                    opt_g.zero_grad()
                    g_losses.append(generator_loss(critic, victim.decoder, generator, real,
                                                   labels, m, cfg.lam, amplitude=amplitude,
                                                   training=True, rng=rng, backward=True))
                    opt_g.step()
                    g_updates += 1
                    tlog.generator_steps.append(tlog.critic_steps)
            except NonFiniteError as exc:
                raise AttackTrainingError(
                    f"GAN training diverged at epoch {epoch}, batch {i}: {exc}"
                ) from exc
            n_batches += 1
        critic.zero_grad()
        tlog.batches_per_epoch.append(n_batches)
        tlog.generator_updates_per_epoch.append(g_updates)
        tlog.critic_loss.append(float(np.mean(d_losses)))
        tlog.generator_loss.append(float(np.mean(g_losses)) if g_losses else float("nan"))
        log.debug("epoch %d critic %.6f generator %.6f", epoch, tlog.critic_loss[-1],
                  tlog.generator_loss[-1])
        if epoch > 0 and abs(tlog.critic_loss[-1] - tlog.critic_loss[-2]) < cfg.early_stop_tol:
            stagnant += 1
            if stagnant >= cfg.early_stop_patience:
                tlog.stopped_early = True
                break
        else:
            stagnant = 0

    tlog.victim_checksum_after = victim.checksum()
    if tlog.victim_checksum_after != before:
        raise AttackTrainingError("victim parameters changed during attack training")
    meta = {
        "latent_dim": cfg.latent_dim,
        "lam": cfg.lam,
        "train_channel": channel.kind,
        "snr_policy": cfg.snr_policy,
        "train_snrs_db": list(cfg.train_snrs_db),
        "train_pnr_db": cfg.train_pnr_db,
        "config": asdict(cfg),
    }
    return AttackArtifact(generator, cfg.latent_dim, "gan", "mean_power", meta, tlog)


def generate_perturbation(art: AttackArtifact, n: int, rng: np.random.Generator) -> np.ndarray:
    """p = G(m) with m ~ N(0, I); no message or received signal is involved."""
    m = rng.standard_normal((n, art.latent_dim))
    return art.generator.forward(m, training=False)


def validate_attack(art, victim: AutoencoderModel, channel: ChannelModel, pnr_db: float,
                    n_blocks: int, seed: int) -> BlerEstimate:
    """BLER of the victim with scaled perturbations added to every received block."""
    return evaluate_bler(victim, channel, n_blocks, seed, attack=art, pnr_db=pnr_db)


def save_artifact(path, art: AttackArtifact, config_hash: str = "") -> None:
    meta = dict(art.metadata, type="attack", kind=art.kind, latent_dim=art.latent_dim,
                pnr_rule=art.pnr_rule)
    ckpt.save(path, ckpt.Checkpoint(stacks={"generator": art.generator}, metadata=meta,
                                    config_hash=config_hash))


def load_artifact(path) -> AttackArtifact:
    c = ckpt.load(path)
    meta = c.metadata
    if meta.get("type") != "attack" or meta.get("kind") != "gan":
        raise ckpt.CheckpointError(f"{path} is not a GAN attack artifact")
    return AttackArtifact(c.stacks["generator"], int(meta["latent_dim"]), "gan",
                          meta.get("pnr_rule", "mean_power"), meta)


__all__ = [
    "AttackArtifact", "AttackTrainingError", "GanTrainConfig", "GanTrainingLog",
    "build_critic", "build_dataset", "build_generator", "critic_loss", "generate_perturbation",
    "generator_loss", "load_artifact", "save_artifact", "scale_to_pnr", "train_attack", "validate_attack",
]
