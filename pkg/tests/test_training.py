import math

import numpy as np
import pytest

from incongruity.corpus import prepare_corpus
from incongruity.graph import NewsGraph, batch_graphs
from incongruity.model import BGHDE
from incongruity.synthgen import build_dataset
from incongruity.textenc import build_vocab, random_embeddings
from incongruity.toy import make_toy_corpus
from incongruity.training import (Adam, TrainConfig, TrainHistory, TrainingAborted, check_gradients, clip_gradients,
                                  global_norm, loss_gradients, lr_at, micro_config, total_loss, train)

LN2 = math.log(2.0)


def test_perfect_predictions_near_zero_loss():
    loss = total_loss([1.0, 0.0], [1, 0], [1.0, 0.0], [1, 0], 0.1)
    assert loss.doc <= 1e-6 and loss.total <= 1e-6


def test_half_probabilities_give_ln2():
    loss = total_loss([0.5] * 4, [1, 0, 0, 1], [0.5] * 3, [1, 1, 0], 0.1)
    assert loss.doc == pytest.approx(LN2) and loss.edge == pytest.approx(LN2)
    assert loss.total == pytest.approx(1.1 * LN2)


def test_lambda_zero_is_doc_only():
    loss = total_loss([0.3, 0.8], [0, 1], [0.1, 0.9], [1, 0], 0.0)
    assert loss.total == loss.doc


def logit(p):
    return math.log(p / (1 - p))


def test_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    s_doc, s_edge = rng.normal(size=3), rng.normal(size=5)
    y_doc, y_edge = rng.integers(0, 2, 3), rng.integers(0, 2, 5)
    sig = lambda s: 1 / (1 + np.exp(-s))
    f = lambda a, b: total_loss(sig(a), y_doc, sig(b), y_edge, 0.1).total
    d_doc, d_edge = loss_gradients(sig(s_doc), y_doc, sig(s_edge), y_edge, 0.1)
    h = 1e-6
    for i in range(3):
        e = np.eye(3)[i] * h
        assert d_doc[i] == pytest.approx((f(s_doc + e, s_edge) - f(s_doc - e, s_edge)) / (2 * h), abs=1e-8)
    for i in range(5):
        e = np.eye(5)[i] * h
        assert d_edge[i] == pytest.approx((f(s_doc, s_edge + e) - f(s_doc, s_edge - e)) / (2 * h), abs=1e-8)


def test_edge_gradient_closed_form_at_half():
    # d/ds of lam * mean BCE(sigmoid(s), y) at s = 0 is lam * (0.5 - y) / E
    _, d_edge = loss_gradients(np.array([0.5]), [0], np.full(4, 0.5), np.array([1, 0, 1, 1]), 0.1)
    np.testing.assert_allclose(d_edge, 0.1 * (0.5 - np.array([1, 0, 1, 1])) / 4)


def test_zero_scorer_model_edge_gradient():
    cfg = micro_config()
    emb = np.random.default_rng(0).normal(size=(10, cfg.embed_dim))
    model = BGHDE(cfg, emb)
    for k in ("edge.w", "edge.b", "edge.v"):
        model.params[k][...] = 0.0
    g = NewsGraph(np.array([2, 3]), [np.array([4]), np.array([5, 6])], np.array([1, 0]), 1)
    out = model.forward(batch_graphs([g]))
    np.testing.assert_array_equal(out.edge_weights, [0.5, 0.5])
    _, d_edge = loss_gradients(out.doc_prob, [1], out.edge_weights, [1, 0], 0.1)
    np.testing.assert_allclose(d_edge, [-0.025, 0.025])


@pytest.mark.parametrize("epoch, lr", [(0, 1e-3), (2, 1e-3), (3, 1e-4), (6, 1e-5), (8, 1e-5)])
def test_lr_schedule(epoch, lr):
    assert lr_at(epoch, TrainConfig()) == pytest.approx(lr, rel=1e-12)


def test_clip_scales_to_threshold():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([[4.0]])}
    clipped, norm, scale = clip_gradients(grads, 1.0)
    assert norm == 5.0 and scale == 0.2
    np.testing.assert_array_equal(clipped["a"], grads["a"] * 0.2)
    np.testing.assert_array_equal(clipped["b"], grads["b"] * 0.2)
    assert global_norm(clipped) == pytest.approx(1.0)
    same, _, s = clip_gradients({"a": np.array([0.3])}, 1.0)
    assert s == 1.0 and same["a"][0] == 0.3


def test_value_clipping():
    clipped, _, _ = clip_gradients({"a": np.array([-3.0, 0.5, 2.0])}, 1.0, mode="value")
    np.testing.assert_array_equal(clipped["a"], [-1.0, 0.5, 1.0])


def test_adam_matches_reference_updates():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam(p)
    m = v = np.zeros(2)
    ref = p["w"].copy()
    for t in range(1, 4):
        g = np.array([0.5, -1.5]) * t
        opt.step(p, {"w": g.copy()}, 1e-2)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(p["w"], ref, rtol=1e-12)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr0=0)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"momentum": 0.9})


@pytest.fixture(scope="module")
def small_data():
    arts = prepare_corpus(make_toy_corpus(n_articles=330, seed=5))
    pool = arts[300:]
    train_s = build_dataset(arts[:240], pool, seed=5, stream=1)
    dev_s = build_dataset(arts[240:300], pool, seed=5, stream=2)
    vocab = build_vocab(train_s)
    return train_s, dev_s, vocab, random_embeddings(vocab, 5, seed=5)


def test_one_epoch_two_steps(small_data, tmp_path):
    train_s, dev_s, vocab, emb = small_data
    res = train(train_s, dev_s, vocab, emb, micro_config(dtype="float32"), TrainConfig(epochs=1))
    assert res.history.steps == 2 and res.history.epochs[0].steps == 2
    assert len(res.history.step_grad_norms) == 2 and res.optimizer.t == 2
    res.history.write(tmp_path / "h.jsonl")
    back = TrainHistory.read(tmp_path / "h.jsonl")
    assert back.epochs == res.history.epochs and back.best_epoch == 0


def test_partial_final_batch_kept(small_data):
    train_s, dev_s, vocab, emb = small_data
    res = train(train_s[:130], dev_s, vocab, emb, micro_config(dtype="float32"), TrainConfig(epochs=1))
    assert res.history.steps == 2


def test_training_reproducible(small_data):
    train_s, dev_s, vocab, emb = small_data
    cfg = micro_config(dtype="float32", dropout=0.3)
    a = train(train_s, dev_s, vocab, emb, cfg, TrainConfig(epochs=2, seed=3))
    b = train(train_s, dev_s, vocab, emb, cfg, TrainConfig(epochs=2, seed=3))
    assert [e.train_loss for e in a.history.epochs] == [e.train_loss for e in b.history.epochs]


def test_non_finite_loss_aborts(small_data, monkeypatch):
    train_s, dev_s, vocab, emb = small_data
    bad = emb.copy()
    bad[2:] = np.nan
    with pytest.raises(TrainingAborted, match="batch 0"):
        train(train_s, dev_s, vocab, bad, micro_config(dtype="float32"), TrainConfig(epochs=1))


def test_gradient_check_with_dropout_off_and_separate_encoders():
    cfg = micro_config(shared_word_encoder=False)
    emb = np.random.default_rng(1).normal(size=(12, cfg.embed_dim))
    model = BGHDE(cfg, emb, seed=1)
    rng = np.random.default_rng(2)
    graphs = [NewsGraph(rng.integers(1, 12, 3), [rng.integers(1, 12, 2) for _ in range(k)],
                        np.array(c), int(0 in c)) for k, c in ((2, [1, 0]), (3, [1, 1, 1]))]
    res = check_gradients(model, batch_graphs(graphs), 0.1)
    assert res.max_rel_error <= 1e-4, res.per_group
    assert "head_gru.w_ih" in res.per_group
