"""Softmax classifier: training, prediction, gradients."""

import math

import numpy as np
import pytest

from conftest import build_corpus, build_oracle
from mnid.classifier import (
    SoftmaxModel,
    TrainConfig,
    loss_gradient,
    predict,
    train,
)
from mnid.core import LabeledPool
from mnid.errors import DegenerateLabels
from mnid.ingest import EmbeddingMatrix


def separable_pool(scale=1.0, per_class=5):
    rows = []
    for j in range(per_class):
        rows.append((f"a{j}", "neg", "init", [-scale, 0.01 * j]))
        rows.append((f"b{j}", "pos", "init", [scale, 0.01 * j]))
    corpus, matrix = build_corpus(rows)
    oracle = build_oracle(corpus, total=2 * per_class)
    return oracle.pool, matrix


def matrix_for(points):
    values = np.asarray(points, dtype=np.float32)
    ids = tuple(f"q{j}" for j in range(len(points)))
    return EmbeddingMatrix(values=values, ids=ids, normalized=False)


class TestTrain:
    def test_separable_reaches_full_training_accuracy(self):
        pool, matrix = separable_pool()
        model = train(pool, matrix, TrainConfig(epochs=500))
        table = predict(model, sorted(pool.ids()), matrix)
        assert all(table.predicted(i) == pool.get(i).label for i in pool.ids())

    def test_single_class_rejected(self):
        pool = LabeledPool()
        pool.add("a", 0, "initial")
        pool.add("b", 0, "initial")
        matrix = EmbeddingMatrix(np.eye(2, dtype=np.float32), ("a", "b"))
        with pytest.raises(DegenerateLabels):
            train(pool, matrix, TrainConfig())

    def test_determinism(self):
        pool, matrix = separable_pool()
        m1 = train(pool, matrix, TrainConfig())
        m2 = train(pool, matrix, TrainConfig())
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.bias, m2.bias)

    def test_insertion_order_irrelevant(self):
        rows = [(f"n{j}", "neg", "init", [-1.0, 0.1 * j]) for j in range(4)]
        rows += [(f"p{j}", "pos", "init", [1.0, 0.1 * j]) for j in range(4)]
        corpus, matrix = build_corpus(rows)
        forward = build_oracle(corpus, total=9).pool
        backward = LabeledPool()
        for point_id in reversed(sorted(forward.ids())):
            entry = forward.get(point_id)
            backward.add(point_id, entry.label, entry.provenance)
        m1 = train(forward, matrix, TrainConfig())
        m2 = train(backward, matrix, TrainConfig())
        assert np.array_equal(m1.weights, m2.weights)


class TestPredict:
    def test_softmax_value_on_fixed_model(self):
        # W = I2, zero bias, point (2, 0): p = (e^2, 1) / (e^2 + 1)
        model = SoftmaxModel(weights=np.eye(2), bias=np.zeros(2), classes=(0, 1))
        matrix = matrix_for([[2.0, 0.0]])
        table = predict(model, ["q0"], matrix)
        expected = math.exp(2) / (math.exp(2) + 1)
        assert table.predicted("q0") == 0
        assert table.confidence("q0") == pytest.approx(expected, abs=1e-9)
        assert abs(expected - 0.8808) < 5e-5

    def test_argmax_tie_breaks_to_lowest_class(self):
        # logits (1.0, 1.0, 0.3) via a crafted weight matrix
        weights = np.array([[1.0], [1.0], [0.3]])
        model = SoftmaxModel(weights=weights, bias=np.zeros(3), classes=(0, 1, 2))
        table = predict(model, ["q0"], matrix_for([[1.0]]))
        assert table.predicted("q0") == 0

    def test_symmetric_point_has_half_confidence(self):
        pool, matrix = separable_pool()
        model = train(pool, matrix, TrainConfig(epochs=300))
        mid = EmbeddingMatrix(
            np.array([[0.0, 0.0]], np.float32), ("mid",), normalized=False
        )
        table = predict(model, ["mid"], mid)
        assert table.confidence("mid") == pytest.approx(0.5, abs=1e-6)

    def test_probability_simplex(self):
        pool, matrix = separable_pool()
        model = train(pool, matrix, TrainConfig())
        table = predict(model, sorted(pool.ids()), matrix)
        for entry in table.entries.values():
            assert abs(entry.probabilities.sum() - 1.0) <= 1e-6
            assert np.all(entry.probabilities >= 0.0)
            assert entry.confidence == pytest.approx(entry.probabilities.max())


class TestLossGradient:
    def test_uniform_loss_at_zero_weights(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]])
        y = np.array([0, 1, 0, 1])
        loss, _, _ = loss_gradient(np.zeros((2, 2)), np.zeros(2), x, y, 0.0)
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            c, d, n = 3, 4, 8
            weights = rng.normal(size=(c, d))
            bias = rng.normal(size=c)
            x = rng.normal(size=(n, d))
            y = rng.integers(0, c, size=n)
            _, grad_w, grad_b = loss_gradient(weights, bias, x, y, 1e-3)
            step = 1e-4
            for index in np.ndindex(c, d):
                bump = np.zeros_like(weights)
                bump[index] = step
                up, _, _ = loss_gradient(weights + bump, bias, x, y, 1e-3)
                down, _, _ = loss_gradient(weights - bump, bias, x, y, 1e-3)
                assert abs((up - down) / (2 * step) - grad_w[index]) <= 1e-5
            for k in range(c):
                bump = np.zeros_like(bias)
                bump[k] = step
                up, _, _ = loss_gradient(weights, bias + bump, x, y, 1e-3)
                down, _, _ = loss_gradient(weights, bias - bump, x, y, 1e-3)
                assert abs((up - down) / (2 * step) - grad_b[k]) <= 1e-5

    def test_l2_component_scales_linearly(self):
        rng = np.random.default_rng(3)
        weights = rng.normal(size=(2, 3))
        x = rng.normal(size=(5, 3))
        y = rng.integers(0, 2, size=5)
        _, g0, _ = loss_gradient(weights, np.zeros(2), x, y, 0.0)
        _, g1, _ = loss_gradient(weights, np.zeros(2), x, y, 0.01)
        _, g2, _ = loss_gradient(weights, np.zeros(2), x, y, 0.02)
        np.testing.assert_allclose(g2 - g0, 2 * (g1 - g0), rtol=1e-10)


def test_training_loss_never_increases():
    pool, matrix = separable_pool()
    cfg = TrainConfig(learning_rate=2.0, epochs=120)  # large step forces backtracking
    xb = matrix.rows(sorted(pool.ids())).astype(np.float64)
    yb = np.array([pool.get(i).label for i in sorted(pool.ids())])
    model = train(pool, matrix, cfg)
    # retrace the published losses by replaying training epochs
    losses = []
    weights = np.zeros_like(model.weights)
    bias = np.zeros_like(model.bias)
    step = cfg.learning_rate
    loss, gw, gb = loss_gradient(weights, bias, xb, yb, cfg.l2_penalty)
    losses.append(loss)
    for _ in range(cfg.epochs):
        while True:
            cand_w, cand_b = weights - step * gw, bias - step * gb
            cand_loss, cgw, cgb = loss_gradient(cand_w, cand_b, xb, yb, cfg.l2_penalty)
            if cand_loss <= loss or step < 1e-12:
                break
            step /= 2
        if step < 1e-12:
            break
        weights, bias, loss, gw, gb = cand_w, cand_b, cand_loss, cgw, cgb
        losses.append(loss)
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
