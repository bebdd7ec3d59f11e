import inspect
import math

import numpy as np
import pytest

from advlink import advgan, autoenc
from advlink.channel import ChannelModel
from advlink.numerics import LayerStack, Linear, LogSoftmax, count_params
from advlink.rng import substream


def linear_critic(weight=1.0, bias=0.0):
    layer = Linear(7, 1)
    layer.weight.value = np.full((1, 7), weight)
    layer.bias.value = np.array([bias])
    return LayerStack([layer], (7,), name="critic")


def test_reference_architectures():
    g, c = advgan.build_generator(), advgan.build_critic()
    assert g.input_shape == (5,) and g.output_shape == (7,)
    assert c.input_shape == (7,) and c.output_shape == (1,)
    assert count_params(g) == 543
    assert count_params(c) == 417
    kinds = {layer.kind for layer in g.layers}
    assert {"Linear", "ConvTranspose1d", "Conv1d"} <= kinds


def test_critic_loss_examples():
    rng = np.random.default_rng(0)
    real = rng.standard_normal((8, 7))
    critic = advgan.build_critic().initialize(rng)
    assert advgan.critic_loss(critic, real, real.copy()) == 0.0
    assert advgan.critic_loss(linear_critic(0.0, 3.0), real, real + 1.0) == 0.0
    ones = np.ones((4, 7))
    assert advgan.critic_loss(linear_critic(), ones, ones + 0.1) == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(ValueError):
        advgan.critic_loss(critic, real, real[:4])


def test_critic_loss_backward_sign():
    critic = linear_critic()
    ones = np.ones((4, 7))
    advgan.critic_loss(critic, ones, ones + 0.1, backward=True)
    # d/dw [mean w.fake - mean w.real] = mean(fake - real) = 0.1 per input
    np.testing.assert_allclose(critic.layers[0].weight.grad, np.full((1, 7), 0.1), atol=1e-12)
    assert critic.layers[0].bias.grad[0] == pytest.approx(0.0, abs=1e-15)


@pytest.fixture
def small_nets():
    rng = np.random.default_rng(3)
    gen = advgan.build_generator().initialize(rng)
    critic = advgan.build_critic().initialize(rng)
    decoder = autoenc.build_decoder().initialize(rng)
    r = rng.standard_normal((6, 7))
    labels = autoenc.one_hot(rng.integers(0, 16, 6))
    m = rng.standard_normal((6, 5))
    return gen, critic, decoder, r, labels, m


def test_generator_loss_reductions(small_nets):
    gen, critic, decoder, r, labels, m = small_nets
    fake = r + gen.forward(m)
    d_mean = float(critic.forward(fake).mean())
    logp_mean = float((labels * decoder.forward(fake)).sum(axis=1).mean())
    l1 = advgan.generator_loss(critic, decoder, gen, r, labels, m, 1.0)
    l0 = advgan.generator_loss(critic, decoder, gen, r, labels, m, 0.0)
    assert abs(l1 - (-d_mean)) <= 1e-12
    assert abs(l0 - logp_mean) <= 1e-12
    half = advgan.generator_loss(critic, decoder, gen, r, labels, m, 0.5)
    assert half == pytest.approx(0.5 * l1 + 0.5 * l0, abs=1e-12)


def test_generator_loss_certain_decoder_is_zero(small_nets):
    gen, critic, _, r, _, m = small_nets
    head = Linear(7, 16)
    head.weight.value = np.zeros((16, 7))
    head.bias.value = np.where(np.arange(16) == 3, 60.0, 0.0)
    decoder = LayerStack([head, LogSoftmax()], (7,))
    labels = autoenc.one_hot(np.full(6, 3))
    loss = advgan.generator_loss(critic, decoder, gen, r, labels, m, 0.0)
    assert -1e-20 < loss <= 0.0


@pytest.mark.parametrize("lam", [0.0, 0.3, 1.0])
@pytest.mark.parametrize("normalized", [False, True])
def test_generator_loss_gradient(small_nets, lam, normalized):
    gen, critic, decoder, r, labels, m = small_nets
    amplitude = advgan.pnr_amplitude(np.linspace(0.2, 1.0, 6), 0.0) if normalized else None

    def loss():
        return advgan.generator_loss(critic, decoder, gen, r, labels, m, lam, amplitude=amplitude)

    gen.zero_grad()
    critic.zero_grad()
    decoder.zero_grad()
    advgan.generator_loss(critic, decoder, gen, r, labels, m, lam, amplitude=amplitude,
                          backward=True)
    assert all(t.grad is None for t in critic.params() + decoder.params())
    h = 1e-6
    worst = 0.0
    for _, t in gen.named_params():
        flat = t.value.reshape(-1)
        grad = t.grad.reshape(-1)
        for i in range(0, flat.size, max(1, flat.size // 12)):
            orig = flat[i]
            flat[i] = orig + h
            up = loss()
            flat[i] = orig - h
            down = loss()
            flat[i] = orig
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - grad[i]) / max(abs(num), abs(grad[i]), 1e-2))
    assert worst < 1e-4


def test_normalize_power_targets_amplitude():
    rng = np.random.default_rng(0)
    p = 30 * rng.standard_normal((1000, 7))
    noise = rng.choice([1.0, 0.1], size=1000)
    amp = advgan.pnr_amplitude(noise, -3.0)
    out, _ = advgan.normalize_power(p, amp)
    # unit mean power before per-row scaling, so E[out^2] per row tracks amp^2
    assert np.mean((out / amp) ** 2) == pytest.approx(1.0, abs=1e-12)
    same, back = advgan.normalize_power(p, None)
    assert same is p and back(p) is p


def _small_run(victim, **overrides):
    cfg = advgan.GanTrainConfig(**{"dataset_size": 1_000, "epochs": 2, **overrides})
    return cfg, advgan.train_attack(cfg, victim, ChannelModel("awgn"), substream(1, "gan"))


def test_training_contract(trained_ae, monkeypatch):
    steps_seen, gen_calls, clip_values = [0], [], []

    def on_step(step, critic):
        steps_seen[0] = step
        clip_values.append(max(float(np.abs(t.value).max()) for t in critic.params()))

    real_loss = advgan.generator_loss

    def spy(*args, **kwargs):
        gen_calls.append(steps_seen[0])
        return real_loss(*args, **kwargs)

    monkeypatch.setattr(advgan, "generator_loss", spy)
    before = trained_ae.checksum()
    cfg = advgan.GanTrainConfig(dataset_size=1_000, epochs=2)
    art = advgan.train_attack(cfg, trained_ae, ChannelModel("awgn"), substream(1, "gan"),
                              on_critic_step=on_step)
    log = art.training_log
    batches = math.ceil(1_000 / 32)
    assert log.batches_per_epoch == [batches, batches]
    assert log.generator_updates_per_epoch == [batches // 5] * 2
    assert log.critic_steps == 2 * batches == len(clip_values)
    assert max(clip_values) <= 0.1
    assert log.max_abs_critic_weight <= 0.1
    expected = [e * batches + 5 * k for e in range(2) for k in range(1, batches // 5 + 1)]
    assert gen_calls == expected
    assert trained_ae.checksum() == before == log.victim_checksum_after


def test_training_is_deterministic(trained_ae):
    _, a = _small_run(trained_ae)
    _, b = _small_run(trained_ae)
    assert a.generator.checksum() == b.generator.checksum()


def test_raw_output_mode_runs(trained_ae):
    _, art = _small_run(trained_ae, train_pnr_db=None, epochs=1)
    assert art.metadata["train_pnr_db"] is None
    assert np.isfinite(art.training_log.critic_loss).all()


def test_early_stop(trained_ae):
    _, art = _small_run(trained_ae, epochs=10, early_stop_tol=1e9, early_stop_patience=2)
    assert art.training_log.stopped_early
    assert len(art.training_log.critic_loss) == 3


def test_config_validation():
    with pytest.raises(ValueError):
        advgan.GanTrainConfig(lam=1.5)
    with pytest.raises(ValueError):
        advgan.GanTrainConfig(clip=0.0)


def test_dataset_mixed_snr(trained_ae):
    cfg = advgan.GanTrainConfig(dataset_size=30_000)
    r, msgs, noise = advgan.build_dataset(cfg, trained_ae, ChannelModel("awgn"), substream(0))
    assert r.shape == (30_000, 7) and msgs.shape == (30_000,)
    np.testing.assert_allclose(sorted(set(noise.round(12))),
                               sorted(10 ** (-s / 10) for s in (0.0, 4.0, 8.0)))
    fixed = advgan.GanTrainConfig(dataset_size=100, snr_policy="8")
    _, _, noise = advgan.build_dataset(fixed, trained_ae, ChannelModel("awgn"), substream(0))
    assert np.all(noise == 10 ** -0.8)


def test_generate_perturbation_is_input_agnostic():
    art = advgan.AttackArtifact(advgan.build_generator().initialize(np.random.default_rng(0)))
    params = list(inspect.signature(advgan.generate_perturbation).parameters)
    assert params == ["art", "n", "rng"]
    a = advgan.generate_perturbation(art, 64, substream(4, "attack"))
    b = advgan.generate_perturbation(art, 64, substream(4, "attack"))
    c = advgan.generate_perturbation(art, 64, substream(5, "attack"))
    assert a.shape == (64, 7)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_artifact_round_trip(tmp_path, trained_ae):
    _, art = _small_run(trained_ae, epochs=1)
    path = tmp_path / "gan.ckpt"
    advgan.save_artifact(path, art, config_hash="x")
    back = advgan.load_artifact(path)
    assert back.generator.checksum() == art.generator.checksum()
    assert back.metadata["lam"] == 0.5 and back.metadata["latent_dim"] == 5
    a = back.sample(10, substream(0))
    np.testing.assert_array_equal(a, art.sample(10, substream(0)))


def test_validate_attack_limits(trained_ae, attack_bundle):
    art = attack_bundle["artifact"]
    ch = ChannelModel("awgn", 4.0)
    clean = autoenc.evaluate_bler(trained_ae, ch, 200_000, 7)
    # same seed: the -inf PNR run sees exactly the clean messages and noise
    assert advgan.validate_attack(art, trained_ae, ch, -math.inf, 200_000, 7) == clean
    lower = advgan.validate_attack(art, trained_ae, ch, -2.0, 1_000_000, 8)
    upper = advgan.validate_attack(art, trained_ae, ch, 0.0, 1_000_000, 8)
    assert lower.bler <= upper.bler


def test_trained_critic_record(attack_bundle):
    record = attack_bundle["clip_record"]
    log = attack_bundle["artifact"].training_log
    assert record.size == log.critic_steps > 0
    assert record.max() <= 0.1
