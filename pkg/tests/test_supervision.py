import numpy as np
import pytest
from scipy.stats import chisquare

from stylelab.autodiff import Adam, Tensor, backward, grad
from stylelab.discriminator import Discriminator, DiscriminatorConfig
from stylelab.errors import ConfigError, ContractError
from stylelab.styles import AttributeSchema
from stylelab.supervision import LossWeights, MrtSpec, Regime, TrainState, backtranslate, lambda_schedule, \
    loss_adv, loss_dae, loss_mrt, mrt_delta, mrt_risk, perturb_style, sample_pool, soft_outputs, train_step
from stylelab.text import NoiseSpec

from gradcases import SCHEMA, VOCAB, tiny_batch, tiny_classifier, tiny_generator

ZERO_NOISE = NoiseSpec(0.0, 0)


def test_lambda_schedule_points():
    assert lambda_schedule(0, 100).ae == 1.0
    assert lambda_schedule(100, 100).ae == 0.0
    assert lambda_schedule(50, 100).ae == 0.5
    assert lambda_schedule(150, 100).ae == 0.0
    for step in range(0, 101, 10):
        w = lambda_schedule(step, 100, Regime.DAE_BT_MRT)
        assert (w.bt, w.adv, w.mrt) == (1.0, 0.0, 1.0)
    assert lambda_schedule(7, 10, Regime.DAE_BT_ADV).adv == 1.0
    assert lambda_schedule(7, 10, Regime.DAE) == LossWeights(1.0, 0.0, 0.0, 0.0)


def test_loss_weights_non_negative():
    with pytest.raises(ContractError):
        LossWeights(-1.0, 1.0, 0.0, 0.0)


def test_regime_parse():
    assert Regime.parse("DAE + BT + MRT") is Regime.DAE_BT_MRT
    with pytest.raises(ConfigError):
        Regime.parse("bt")


def test_perturb_style_chi_square_over_seeds():
    schema = AttributeSchema(("a", "b"), (("x", "y"), ("p", "q", "r")))
    counts = {}
    for seed in range(100_000):
        s = perturb_style((0, 0), schema, seed)
        counts[s] = counts.get(s, 0) + 1
    assert len(counts) == 5 and (0, 0) not in counts
    assert chisquare(list(counts.values())).pvalue > 0.01


def test_perturb_style_multi_attribute_and_degenerate():
    schema = AttributeSchema(("a", "b", "c"), (("x", "y"), ("p", "q"), ("u", "v")))
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = tuple(int(rng.integers(2)) for _ in range(3))
        assert perturb_style(s, schema, rng) != s
    with pytest.raises(ContractError):
        perturb_style((0,), AttributeSchema(("a",), (("only",),)), rng)


def test_mrt_pool_size_and_alpha_validation():
    with pytest.raises(ContractError):
        MrtSpec(n_samples=1)
    with pytest.raises(ContractError):
        MrtSpec(alpha=0.0)


def test_loss_dae_non_negative_and_overfits_one_sentence():
    gen = tiny_generator(0)
    gen.config.dropout = 0.0
    ids, styles = [[4, 7, 8, 5]], [(0, 1)]
    opt = Adam(gen.parameters(), lr=0.03)
    first = None
    for _ in range(300):
        opt.zero_grad()
        loss = loss_dae(gen, ids, styles, ZERO_NOISE)
        assert loss.item() >= 0
        first = loss.item() if first is None else first
        backward(loss)
        opt.step()
    assert first > 1.0
    assert loss_dae(gen, ids, styles, ZERO_NOISE).item() < 0.05


def test_loss_dae_rejects_empty_batch():
    with pytest.raises(ContractError):
        loss_dae(tiny_generator(0), [], [], ZERO_NOISE)


def test_bt_with_copy_decoder_equals_dae():
    gen = tiny_generator(1)
    gen.config.dropout = 0.0
    ids, styles = tiny_batch(np.random.default_rng(1), b=3)
    gen.decode = lambda latent, styles, max_len, **kw: ([list(x) for x in ids], None)
    bt = backtranslate(gen, ids, styles, np.random.default_rng(0))
    assert bt.x_hat == ids
    assert bt.loss.item() == pytest.approx(loss_dae(gen, ids, styles, ZERO_NOISE).item(), rel=1e-12)


def test_bt_touches_encoder_and_decoder():
    gen = tiny_generator(2)
    ids, styles = tiny_batch(np.random.default_rng(2), b=3)
    bt = backtranslate(gen, ids, styles, np.random.default_rng(2))
    assert bt.loss.item() >= 0
    assert all(s != t for s, t in zip(styles, bt.target_styles))
    names = ["enc_fw_wx", "enc_bw_wh", "dec_wx", "att_w", "out_w"]
    grads = grad(bt.loss, [gen.params[n] for n in names])
    assert all(np.abs(g).max() > 0 for g in grads)


def _adv_setup(seed=3):
    gen = tiny_generator(seed)
    gen.config.dropout = 0.0
    disc = Discriminator(DiscriminatorConfig(len(VOCAB), 4, 3), SCHEMA, seed=seed)
    ids, styles = tiny_batch(np.random.default_rng(seed), b=3)
    bt = backtranslate(gen, ids, styles, np.random.default_rng(seed))
    return gen, disc, ids, bt


def test_adv_uniform_discriminator_gives_ln_k_plus_one():
    gen, disc, ids, bt = _adv_setup()
    for k in range(SCHEMA.m):
        disc.params[f"head{k}_w"].data[:] = 0.0
    loss = loss_adv(gen, disc, ids, bt.x_hat, bt.target_styles)[0].item()
    assert loss == pytest.approx((np.log(3) + np.log(4)) / 2)


def test_adv_gradient_isolated_from_discriminator():
    gen, disc, ids, bt = _adv_setup()
    loss, _, _ = loss_adv(gen, disc, ids, bt.x_hat, bt.target_styles)
    backward(loss)
    assert all(p.grad is None for p in disc.parameters())
    assert np.abs(gen.params["out_w"].grad).max() > 0


def test_adv_loss_decreases_along_its_gradient():
    gen, disc, ids, bt = _adv_setup(4)
    before = loss_adv(gen, disc, ids, bt.x_hat, bt.target_styles)[0]
    g = grad(before, [gen.params["out_b"]])[0]
    gen.params["out_b"].data -= 1e-2 * g / np.linalg.norm(g)
    after = loss_adv(gen, disc, ids, bt.x_hat, bt.target_styles)[0].item()
    assert after < before.item()


def test_soft_outputs_are_distributions():
    gen, disc, ids, bt = _adv_setup()
    probs, mask = soft_outputs(gen, ids, bt.x_hat, bt.target_styles)
    np.testing.assert_allclose(probs.data.sum(-1), 1.0, atol=1e-12)
    assert mask.sum(1).tolist() == [len(x) for x in bt.x_hat]


def test_mrt_risk_examples():
    risk, q = mrt_risk(np.zeros((1, 2)), [[0.0, 1.0]], 0.005)
    assert risk.item() == pytest.approx(0.5)
    # identical candidates: risk equals their delta and does not depend on alpha
    logp = np.full((1, 3), -2.0)
    a, _ = mrt_risk(logp, [[0.3, 0.3, 0.3]], 1.0)
    b, _ = mrt_risk(logp, [[0.3, 0.3, 0.3]], 7.0)
    assert a.item() == pytest.approx(0.3) and b.item() == pytest.approx(0.3)
    sharp, _ = mrt_risk(np.array([[-1.0, -3.0, -2.0]]), [[0.2, 0.9, 0.6]], 1e3)
    assert sharp.item() == pytest.approx(0.2)


def test_mrt_risk_alpha_gradient_zero_for_identical_candidates():
    alpha = Tensor(np.array(2.0), requires_grad=True)
    logp = Tensor(np.full((1, 3), -1.5))
    from stylelab.autodiff import ops
    q = ops.softmax(logp * alpha, axis=-1)
    (g,) = grad(ops.sum(q * np.array([[0.4, 0.4, 0.4]])), [alpha])
    assert abs(g) < 1e-12


def test_mrt_q_sums_to_one_and_risk_bounded():
    rng = np.random.default_rng(5)
    for _ in range(50):
        logp = rng.normal(size=(4, 6)) * 10
        delta = rng.random((4, 6))
        risk, q = mrt_risk(logp, delta, float(rng.uniform(0.001, 5)))
        np.testing.assert_allclose(q.data.sum(-1), 1.0, atol=1e-12)
        assert ((risk.data >= 0) & (risk.data <= 1)).all()


def test_mrt_delta_rewards_return_to_source():
    # moving back toward the source style (index 0) scores delta 0
    assert mrt_delta([np.array([0.0, 1.0])], [np.array([1.0, 0.0])], (0,)) == pytest.approx(0.0, abs=1e-12)
    assert mrt_delta([np.array([0.2, 0.8])], [np.array([0.9, 0.1])], (0,)) == pytest.approx(0.3)
    assert mrt_delta([np.array([0.9, 0.1])], [np.array([0.2, 0.8])], (0,)) == 1.0
    assert mrt_delta([np.array([0.5, 0.5])], [np.array([0.5, 0.5])], (0,)) == 1.0


def test_loss_mrt_pool_and_errors():
    gen = tiny_generator(6)
    ids, styles = tiny_batch(np.random.default_rng(6), b=3)
    bt = backtranslate(gen, ids, styles, np.random.default_rng(6))
    clf = tiny_classifier()
    spec = MrtSpec(n_samples=3, alpha=0.5, max_examples=2)
    pool = sample_pool(gen, clf, VOCAB, bt, spec, np.random.default_rng(0))
    assert pool.delta.shape == (2, 3) and len(pool.candidates) == 6
    assert ((pool.delta >= 0) & (pool.delta <= 1)).all()
    loss = loss_mrt(gen, clf, VOCAB, bt, spec, np.random.default_rng(0))
    assert 0.0 <= loss.item() <= 1.0
    with pytest.raises(ConfigError):
        loss_mrt(gen, None, VOCAB, bt, spec, np.random.default_rng(0))
    other = tiny_classifier()
    other.schema = AttributeSchema(("x",), (("a", "b"),))
    with pytest.raises(ContractError):
        loss_mrt(gen, other, VOCAB, bt, spec, np.random.default_rng(0))


def _state(regime, seed=0, **kw):
    gen = tiny_generator(seed)
    extra = {}
    if regime.uses_adv:
        disc = Discriminator(DiscriminatorConfig(len(VOCAB), 4, 3), SCHEMA, seed=seed)
        extra = dict(discriminator=disc, disc_opt=Adam(disc.parameters(), lr=1e-3))
    if regime.uses_mrt:
        extra["classifier"] = tiny_classifier()
        extra["mrt_spec"] = MrtSpec(n_samples=2, alpha=0.5)
    extra.update(kw)
    return TrainState(gen, Adam(gen.parameters(), lr=1e-3), VOCAB, regime, seed=seed, **extra)


def test_train_step_dae_only_has_ae():
    st = _state(Regime.DAE)
    ids, styles = tiny_batch(np.random.default_rng(0))
    out = train_step(st, ids, styles, 5, 10)
    assert {k for k in out if k.startswith("loss_")} == {"loss_ae"}
    assert out["total"] == pytest.approx(out["loss_ae"], rel=1e-12)


def test_train_step_bt_at_final_step_is_pure_bt():
    st = _state(Regime.DAE_BT)
    ids, styles = tiny_batch(np.random.default_rng(0))
    out = train_step(st, ids, styles, 10, 10)
    assert out["lambda_ae"] == 0.0 and "loss_ae" not in out
    assert out["total"] == out["loss_bt"]


@pytest.mark.parametrize("regime", list(Regime))
def test_train_step_total_is_weighted_sum(regime):
    st = _state(regime, seed=1)
    ids, styles = tiny_batch(np.random.default_rng(1))
    out = train_step(st, ids, styles, 3, 10)
    expect = sum(out[f"lambda_{k}"] * out[f"loss_{k}"] for k in ("ae", "bt", "adv", "mrt") if f"loss_{k}" in out)
    assert abs(out["total"] - expect) < 1e-12


def test_train_step_adv_updates_both_models():
    st = _state(Regime.DAE_BT_ADV, seed=2)
    g0 = {k: v.copy() for k, v in st.generator.state_dict().items()}
    d0 = {k: v.copy() for k, v in st.discriminator.state_dict().items()}
    ids, styles = tiny_batch(np.random.default_rng(2))
    out = train_step(st, ids, styles, 1, 10)
    assert "loss_disc" in out
    assert any(not np.array_equal(v, g0[k]) for k, v in st.generator.state_dict().items())
    assert any(not np.array_equal(v, d0[k]) for k, v in st.discriminator.state_dict().items())


def test_train_step_leaves_unused_discriminator_alone():
    disc = Discriminator(DiscriminatorConfig(len(VOCAB), 4, 3), SCHEMA, seed=0)
    d0 = {k: v.copy() for k, v in disc.state_dict().items()}
    st = _state(Regime.DAE_BT, discriminator=disc)
    train_step(st, *tiny_batch(np.random.default_rng(3)), 1, 10)
    for k, v in disc.state_dict().items():
        np.testing.assert_array_equal(v, d0[k])


def test_train_state_requires_components():
    gen = tiny_generator(0)
    with pytest.raises(ConfigError):
        TrainState(gen, Adam(gen.parameters()), VOCAB, Regime.DAE_BT_MRT)
    with pytest.raises(ConfigError):
        TrainState(gen, Adam(gen.parameters()), VOCAB, Regime.DAE_BT_ADV)


def test_train_steps_bit_reproducible():
    def run():
        st = _state(Regime.DAE_BT, seed=4)
        rng = np.random.default_rng(4)
        outs = [train_step(st, *tiny_batch(rng), step, 5) for step in range(1, 6)]
        return outs, st.generator.state_dict()
    a, pa = run()
    b, pb = run()
    assert a == b
    for k in pa:
        assert np.array_equal(pa[k], pb[k])
