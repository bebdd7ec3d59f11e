"""Comparison attacks: Gaussian jamming plus two SIMPLIFIED white-box stand-ins.

``universal_grad_perturbation`` and ``cw_style_perturbation`` are simplified
re-implementations in the spirit of universal-perturbation and C&W-style
attacks on the decoder. They are not faithful reproductions of any
published method. Every baseline goes through the same ``scale_to_pnr``
path as the GAN attack at evaluation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autoenc import AutoencoderModel, one_hot
from .numerics import checkpoint as ckpt

KINDS = ("jamming", "universal", "cw")
SIMPLIFIED = {"jamming": False, "universal": True, "cw": True}


class BaselineDivergedError(RuntimeError):
    pass


def jamming_perturbation(n: int, rng: np.random.Generator, dim: int = 7) -> np.ndarray:
    return rng.standard_normal((n, dim))


def _loss_and_input_grad(victim: AutoencoderModel, r: np.ndarray, labels: np.ndarray):
    """Mean NLL of the true class and its gradient w.r.t. the received batch."""
    b = r.shape[0]
    logp = victim.decoder.forward(r, training=False)
    loss = -float((labels * logp).sum(axis=1).mean())
    grad = victim.decoder.backward(-labels / b, accumulate=False)
    return loss, grad


def _batches(n: int, batch_size: int):
    start = 0
    while True:
        stop = start + batch_size
        if stop <= n:
            yield slice(start, stop)
            start = stop % n
        else:
            yield slice(start, n)
            start = 0


def universal_grad_perturbation(victim: AutoencoderModel, dataset, iters: int = 200,
                                step: float = 0.05, rng: np.random.Generator | None = None,
                                batch_size: int = 1024, radius: float | None = None,
                                restarts: int = 1, score_samples: int = 20_000) -> np.ndarray:
    """One fixed direction raising the mean decoder loss (simplified stand-in).

    p <- normalize(p + step * mean_batch(sign(dL/dr at r + p))), where
    normalize() projects onto ||p|| = radius. ``radius`` defaults to sqrt(n),
    unit average symbol power; passing the deployment norm
    sqrt(n * noise_var * 10**(pnr/10)) optimizes the direction at the scale it
    will be used. ``step`` is relative to sqrt(n). With ``restarts`` > 1 the
    direction with the highest mean loss on the first ``score_samples`` rows
    wins. The result is always returned with norm sqrt(n).
    """
    r_all, msgs = dataset[0], dataset[1]
    n_dim = r_all.shape[1]
    radius = math.sqrt(n_dim) if radius is None else radius
    if radius <= 0 or restarts < 1:
        raise ValueError("radius and restarts must be positive")
    rng = rng if rng is not None else np.random.default_rng(0)
    labels_all = one_hot(msgs, victim.num_messages)
    score = slice(0, min(score_samples, r_all.shape[0]))
    best, best_loss = None, -math.inf
    for _ in range(restarts):
        p = _project(rng.standard_normal(n_dim), radius)
        batches = _batches(r_all.shape[0], batch_size)
        for _ in range(iters):
            sl = next(batches)
            _, grad = _loss_and_input_grad(victim, r_all[sl] + p, labels_all[sl])
            p = _project(p + step * radius / math.sqrt(n_dim) * np.sign(grad).mean(axis=0),
                         radius)
            if not np.isfinite(p).all():
                raise BaselineDivergedError("universal perturbation became non-finite")
        loss = _loss_and_input_grad(victim, r_all[score] + p, labels_all[score])[0]
        if loss > best_loss:
            best, best_loss = p, loss
    return _project(best, math.sqrt(n_dim))


def _project(p: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(p))
    if norm == 0.0:
        raise BaselineDivergedError("universal perturbation collapsed to zero")
    return p * (radius / norm)


def cw_objective(victim: AutoencoderModel, r: np.ndarray, labels: np.ndarray, p: np.ndarray,
                 kappa: float) -> tuple[float, np.ndarray]:
    """||p||^2 - kappa * mean NLL(r + p), and its gradient w.r.t. p."""
    loss, grad = _loss_and_input_grad(victim, r + p, labels)
    value = float(p @ p) - kappa * loss
    return value, 2.0 * p - kappa * grad.sum(axis=0)


def cw_style_perturbation(victim: AutoencoderModel, dataset, iters: int = 200, lr: float = 0.01,
                          kappa: float = 1.0, rng: np.random.Generator | None = None,
                          init_scale: float = 0.1, history: list | None = None,
                          max_samples: int = 10_000) -> np.ndarray:
    """Penalized optimization of one fixed vector by full-batch gradient descent.

    Minimizes ||p||^2 - kappa * mean decoder NLL at r + p over the first
    ``max_samples`` dataset rows (simplified stand-in). Objective values are
    appended to ``history``.
    """
    r_all, msgs = dataset[0][:max_samples], dataset[1][:max_samples]
    labels = one_hot(msgs, victim.num_messages)
    rng = rng if rng is not None else np.random.default_rng(0)
    p = init_scale * rng.standard_normal(r_all.shape[1])
    for _ in range(iters):
        value, grad = cw_objective(victim, r_all, labels, p, kappa)
        if history is not None:
            history.append(value)
        p = p - lr * grad
        if not np.isfinite(p).all():
            raise BaselineDivergedError("C&W-style perturbation became non-finite")
    if history is not None:
        history.append(cw_objective(victim, r_all, labels, p, kappa)[0])
    return p


@dataclass
class BaselineAttack:
    """Deployable baseline: Gaussian draws for jamming, a tiled fixed vector otherwise."""

    kind: str
    vector: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline attack {self.kind!r}")
        if self.kind != "jamming" and self.vector is None:
            raise ValueError(f"{self.kind} attack needs a fixed perturbation vector")

    @property
    def simplified(self) -> bool:
        return SIMPLIFIED[self.kind]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "jamming":
            return jamming_perturbation(n, rng)
        return np.tile(self.vector, (n, 1))


def train_baseline_attack(kind: str, victim: AutoencoderModel | None = None, dataset=None,
                          rng: np.random.Generator | None = None, **params) -> BaselineAttack:
    if kind == "jamming":
        return BaselineAttack("jamming", None, {})
    if victim is None or dataset is None:
        raise ValueError(f"{kind} attack needs a victim and a dataset")
    if kind == "universal":
        vec = universal_grad_perturbation(victim, dataset, rng=rng, **params)
    elif kind == "cw":
        vec = cw_style_perturbation(victim, dataset, rng=rng, **params)
    else:
        raise ValueError(f"unknown baseline attack {kind!r}")
    return BaselineAttack(kind, vec, dict(params))


def save_baseline(path, attack: BaselineAttack, config_hash: str = "") -> None:
    arrays = {} if attack.vector is None else {"vector": attack.vector}
    meta = {"type": "attack", "kind": attack.kind, "simplified": attack.simplified,
            "params": attack.params, "pnr_rule": "mean_power"}
    ckpt.save(path, ckpt.Checkpoint(arrays=arrays, metadata=meta, config_hash=config_hash))


def load_baseline(path) -> BaselineAttack:
    c = ckpt.load(path)
    meta = c.metadata
    if meta.get("type") != "attack" or meta.get("kind") not in KINDS:
        raise ckpt.CheckpointError(f"{path} is not a baseline attack artifact")
    return BaselineAttack(meta["kind"], c.arrays.get("vector"), meta.get("params", {}))


__all__ = [
    "BaselineAttack", "BaselineDivergedError", "cw_objective", "cw_style_perturbation",
    "jamming_perturbation", "load_baseline", "save_baseline", "train_baseline_attack",
    "universal_grad_perturbation",
]
