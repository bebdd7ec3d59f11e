"""The (7,4) end-to-end autoencoder transceiver."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import ChannelModel
from .numerics import (
    Adam,
    BatchNorm1d,
    LayerStack,
    Linear,
    LogSoftmax,
    NonFiniteError,
    ReLU,
)
from .numerics import checkpoint as ckpt
from .power import scale_to_pnr
from .rng import substream

log = logging.getLogger(__name__)

EVAL_CHUNK = 100_000


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class AutoencoderConfig:
    n: int = 7
    k: int = 4
    channel: str = "awgn"
    train_snr_db: float | None = None  # 4 dB on AWGN, 10 dB on fading channels
    k_db: float | None = None
    distance_m: float | None = None
    epochs: int = 100
    messages_per_epoch: int = 10_000
    batch_size: int = 256
    lr: float = 1e-3
    train_bn_affine: bool = False

    @property
    def num_messages(self) -> int:
        return 2 ** self.k

    def effective_snr_db(self) -> float:
        if self.train_snr_db is not None:
            return self.train_snr_db
        return 4.0 if self.channel == "awgn" else 10.0

    def channel_model(self) -> ChannelModel:
        return ChannelModel(self.channel, self.effective_snr_db(), self.distance_m, self.k_db)


def build_encoder(num_messages: int = 16, n: int = 7) -> LayerStack:
    return LayerStack(
        [Linear(num_messages, num_messages), ReLU(), Linear(num_messages, n), BatchNorm1d(n)],
        (num_messages,), name="encoder",
    )


def build_decoder(n: int = 7, num_messages: int = 16) -> LayerStack:
    return LayerStack(
        [Linear(n, num_messages), ReLU(), Linear(num_messages, num_messages), LogSoftmax()],
        (n,), name="decoder",
    )


@dataclass
class AutoencoderModel:
    encoder: LayerStack
    decoder: LayerStack
    config: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    loss_history: list[float] = field(default_factory=list)

    @property
    def num_messages(self) -> int:
        return self.encoder.input_shape[0]

    def checksum(self) -> str:
        return self.encoder.checksum() + self.decoder.checksum()


def one_hot(messages, num_messages: int = 16) -> np.ndarray:
    messages = np.asarray(messages, dtype=np.int64)
    if messages.size and (messages.min() < 0 or messages.max() >= num_messages):
        raise IndexError(f"message index outside [0, {num_messages})")
    out = np.zeros((messages.size, num_messages))
    out[np.arange(messages.size), messages.reshape(-1)] = 1.0
    return out


def encode(model: AutoencoderModel, messages) -> np.ndarray:
    return model.encoder.forward(one_hot(messages, model.num_messages), training=False)


def decode(model: AutoencoderModel, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log-probabilities and argmax estimates; ties resolve to the lowest index."""
    log_probs = model.decoder.forward(r, training=False)
    return log_probs, np.argmax(log_probs, axis=1)


def train_autoencoder(config: AutoencoderConfig, rng: np.random.Generator) -> AutoencoderModel:
    M = config.num_messages
    encoder = build_encoder(M, config.n).initialize(rng)
    decoder = build_decoder(config.n, M).initialize(rng)
    params = decoder.params()
    for layer in encoder.layers:
        if isinstance(layer, BatchNorm1d) and not config.train_bn_affine:
            continue
        params.extend(t for _, t in layer.params())
    opt = Adam(params, lr=config.lr)
    channel = config.channel_model()
    model = AutoencoderModel(encoder, decoder, config)

    steps = math.ceil(config.messages_per_epoch / config.batch_size)
    for epoch in range(config.epochs):
        total = 0.0
        for step in range(steps):
            size = min(config.batch_size, config.messages_per_epoch - step * config.batch_size)
            msgs = rng.integers(0, M, size=size)
            x = one_hot(msgs, M)
            try:
                s = encoder.forward(x, training=True)
                r, amp = channel.transmit(s, rng)
                logp = decoder.forward(r, training=True)
                loss = -float(logp[np.arange(size), msgs].mean())
                if not math.isfinite(loss):
                    raise NonFiniteError("autoencoder loss")
                glogp = -x / size
                gr = decoder.backward(glogp)
                encoder.backward(gr * amp)
                opt.step()
            except NonFiniteError as exc:
                raise TrainingDivergedError(
                    f"autoencoder training diverged at epoch {epoch}, step {step}: {exc}"
                ) from exc
            total += loss * size
        model.loss_history.append(total / config.messages_per_epoch)
        log.debug("epoch %d loss %.5f", epoch, model.loss_history[-1])
    return model


@dataclass
class BlerEstimate:
    errors: int
    blocks: int

    @property
    def bler(self) -> float:
        return self.errors / self.blocks

    @property
    def ci95(self) -> float:
        """Normal-approximation binomial 95% half-width."""
        p = self.bler
        return 1.96 * math.sqrt(p * (1.0 - p) / self.blocks)

    def sigma(self, p: float | None = None) -> float:
        p = self.bler if p is None else p
        return math.sqrt(p * (1.0 - p) / self.blocks)


def evaluate_bler(model: AutoencoderModel, channel: ChannelModel, n_blocks: int, seed: int,
                  attack=None, pnr_db: float | None = None) -> BlerEstimate:
    """Monte Carlo BLER with optional additive perturbation on the received signal.

    Messages, channel draws and attack draws come from separate named streams
    of ``seed``, chunk by chunk, so attacked and clean runs with the same seed
    see identical messages and noise. ``attack`` is any object with a
    ``sample(n, rng)`` method returning raw (n, 7) perturbations; they are
    rescaled to ``pnr_db`` relative to the channel noise power.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if attack is not None and pnr_db is None:
        raise ValueError("an attack needs a PNR")
    errors = 0
    for chunk, start in enumerate(range(0, n_blocks, EVAL_CHUNK)):
        n = min(EVAL_CHUNK, n_blocks - start)
        msgs = substream(seed, "messages", chunk).integers(0, model.num_messages, size=n)
        s = encode(model, msgs)
        r = channel.apply(s, substream(seed, "channel", chunk))
        if attack is not None:
            p = attack.sample(n, substream(seed, "attack", chunk))
            r = r + scale_to_pnr(p, channel.noise_var, pnr_db)
        _, est = decode(model, r)
        errors += int((est != msgs).sum())
    return BlerEstimate(errors, n_blocks)


def save_model(path, model: AutoencoderModel, config_hash: str = "") -> None:
    meta = {"type": "autoencoder", "config": asdict(model.config),
            "loss_history": model.loss_history}
    ckpt.save(path, ckpt.Checkpoint(
        stacks={"encoder": model.encoder, "decoder": model.decoder},
        metadata=meta, config_hash=config_hash,
    ))


def load_model(path) -> AutoencoderModel:
    c = ckpt.load(path)
    if c.metadata.get("type") != "autoencoder":
        raise ckpt.CheckpointError(f"{path} is not an autoencoder checkpoint")
    return AutoencoderModel(
        c.stacks["encoder"], c.stacks["decoder"],
        AutoencoderConfig(**c.metadata["config"]), list(c.metadata["loss_history"]),
    )
