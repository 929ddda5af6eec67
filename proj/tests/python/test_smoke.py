import math

import numpy as np
import pytest

import mpogpt


def test_plan_and_param_count():
    plan = mpogpt.plan_balanced(128, 128, 2, 8)
    assert plan.d_out == [8, 16]
    assert mpogpt.param_count(plan) == 2560
    assert mpogpt.bond_dims(plan) == [1, 8, 1]
    assert mpogpt.param_count(mpogpt.plan_min_params(128, 128, 2, 8)) == 2048


def test_tt_svd_full_rank_round_trip():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((12, 8))
    plan = mpogpt.FactorizationPlan([3, 4], [2, 4], 64)
    cores, discarded = mpogpt.tt_svd(w, plan)
    assert len(cores) == 2
    assert mpogpt.relative_error(w, mpogpt.reconstruct(cores)) < 1e-12
    assert sum(discarded) < 1e-20


def test_truncation_error_matches_discarded_energy():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((16, 16))
    cores, discarded = mpogpt.tt_svd(w, mpogpt.FactorizationPlan([4, 4], [4, 4], 3))
    err = np.linalg.norm(w - mpogpt.reconstruct(cores)) ** 2
    assert err == pytest.approx(sum(discarded), rel=1e-8)


def test_apply_direct_matches_reconstruction():
    rng = np.random.default_rng(2)
    cores = mpogpt.random_init(mpogpt.FactorizationPlan([2, 3], [3, 2], 2), 5)
    x = rng.standard_normal((4, 6))
    w = mpogpt.reconstruct(cores)
    np.testing.assert_allclose(mpogpt.apply_direct(cores, x), x @ w.T, atol=1e-12)


def test_schedule():
    assert mpogpt.lr_at(0) == 0.0
    assert mpogpt.lr_at(100) == pytest.approx(3e-4)
    assert mpogpt.lr_at(2000) == pytest.approx(0.0, abs=1e-15)


def test_vocab_round_trip():
    v = mpogpt.CharVocab("hello world")
    assert len(v) == 8
    assert v.decode(v.encode("low")) == "low"
    with pytest.raises(ValueError):
        v.encode("xyz")


def test_model_logits_compress_generate():
    model = mpogpt.Model.random(vocab=7, embed=8, heads=2, layers=1, context=8, seed=3)
    assert model.mode == "dense"
    logits = model.logits([[0, 1, 2], [3, 4, 5]])
    assert logits.shape == (2, 3, 7)
    assert np.all(np.isfinite(logits))

    compressed, layers = model.compress(64)
    assert compressed.mode == "mpo"
    assert len(layers) == 6 + 1
    assert max(layer.rel_err for layer in layers) < 1e-5
    np.testing.assert_allclose(compressed.logits([[0, 1, 2]]), logits[:1], atol=1e-4)

    out = model.generate([1, 2], 5, temperature=0.0)
    assert len(out) == 7 and out[:2] == [1, 2]
    assert model.generate([1, 2], 5, temperature=0.0) == out


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        mpogpt.FactorizationPlan([2, 2], [2], 4)
    with pytest.raises(mpogpt.DomainError):
        mpogpt.relative_error(np.zeros((2, 2)), np.ones((2, 2)))
    assert math.isfinite(mpogpt.init_scale(mpogpt.FactorizationPlan([4, 4], [4, 4], 4), 16))
