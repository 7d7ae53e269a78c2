import numpy as np
import pytest

from seedloop import LinearSegmenter, loss_and_grad, predict, train_epochs
from seedloop.errors import InvalidParams, NoLabeledRegions, ShapeMismatch
from seedloop.features import FeatureMatrix
from seedloop.seeds import make_state
from seedloop.segmenter import load_model, save_model


def feat(values):
    values = np.asarray(values, dtype=np.float64)
    return FeatureMatrix(values.shape[0], values.shape[1], values)


def test_zero_model_uniform_predictions(rng):
    model = LinearSegmenter(5, 4)
    out = predict(model, feat(rng.standard_normal((7, 5))))
    assert np.allclose(out.probs, 0.25)


def test_bias_saturation():
    model = LinearSegmenter(2, 3)
    model.bias = np.array([10.0, 0.0, 0.0])
    out = predict(model, feat(np.zeros((3, 2))))
    assert np.allclose(out.probs[0], 1.0, atol=1e-4)


def test_predict_matches_straight_line_softmax(rng):
    model = LinearSegmenter(4, 3)
    model.weights = rng.standard_normal((4, 3))
    model.bias = rng.standard_normal(3)
    f = rng.standard_normal((5, 4))
    out = predict(model, feat(f))
    for j in range(5):
        logits = model.weights.T @ f[j] + model.bias
        e = np.exp(logits)
        assert np.allclose(out.probs[:, j], e / e.sum(), atol=1e-12)
    assert np.allclose(out.probs.sum(axis=0), 1.0, atol=1e-6)


def test_predict_shape_mismatch(rng):
    model = LinearSegmenter(4, 3)
    with pytest.raises(ShapeMismatch):
        predict(model, feat(rng.standard_normal((5, 6))))


def test_loss_no_labeled_regions(rng):
    model = LinearSegmenter(3, 2)
    with pytest.raises(NoLabeledRegions):
        loss_and_grad(model, feat(rng.standard_normal((4, 3))), make_state(np.zeros((2, 4))))


def test_perfect_predictions_near_zero_loss():
    model = LinearSegmenter(2, 2, l2=0.0)
    model.bias = np.array([50.0, -50.0])
    f = feat(np.zeros((3, 2)))
    mixed = make_state(np.vstack([np.ones(3), np.zeros(3)]))
    loss, _, _ = loss_and_grad(model, f, mixed)
    assert loss == pytest.approx(0.0, abs=1e-20)


def test_gradient_matches_finite_differences(rng):
    h = 1e-5
    for _ in range(5):
        model = LinearSegmenter(4, 3, l2=1e-3)
        model.weights = rng.standard_normal((4, 3))
        model.bias = rng.standard_normal(3)
        f = feat(rng.standard_normal((6, 4)))
        probs = rng.random((3, 6))
        probs[:, rng.integers(0, 6)] = 0.0  # keep an unlabeled column
        mixed = make_state(probs / np.maximum(probs.sum(axis=0, keepdims=True), 1.0))
        _, grad_w, grad_b = loss_and_grad(model, f, mixed)

        def loss_at(wts, bias):
            m = LinearSegmenter(4, 3, l2=1e-3, weights=wts, bias=bias)
            return loss_and_grad(m, f, mixed)[0]

        fd_w = np.zeros_like(grad_w)
        for i in range(4):
            for c in range(3):
                wp, wm = model.weights.copy(), model.weights.copy()
                wp[i, c] += h
                wm[i, c] -= h
                fd_w[i, c] = (loss_at(wp, model.bias) - loss_at(wm, model.bias)) / (2 * h)
        fd_b = np.zeros_like(grad_b)
        for c in range(3):
            bp, bm = model.bias.copy(), model.bias.copy()
            bp[c] += h
            bm[c] -= h
            fd_b[c] = (loss_at(model.weights, bp) - loss_at(model.weights, bm)) / (2 * h)
        scale = max(np.abs(grad_w).max(), np.abs(fd_w).max())
        assert np.abs(grad_w - fd_w).max() / scale < 1e-4
        assert np.abs(grad_b - fd_b).max() / max(np.abs(grad_b).max(), 1e-8) < 1e-4


def test_training_decreases_loss_on_separable_toy(rng):
    f_vals = np.vstack([rng.normal(-2, 0.2, size=(10, 3)), rng.normal(2, 0.2, size=(10, 3))])
    f = feat(f_vals)
    labels = np.zeros((2, 20))
    labels[0, :10] = 1.0
    labels[1, 10:] = 1.0
    mixed = make_state(labels)
    model = LinearSegmenter(3, 2, learning_rate=1e-2, l2=0.0)
    losses = []
    for _ in range(50):
        losses.append(loss_and_grad(model, f, mixed)[0])
        train_epochs(model, f, mixed, 1)
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_train_epochs_rejects_zero(rng):
    model = LinearSegmenter(3, 2)
    f = feat(rng.standard_normal((4, 3)))
    mixed = make_state(np.vstack([np.ones(4), np.zeros(4)]))
    with pytest.raises(InvalidParams):
        train_epochs(model, f, mixed, 0)


def test_training_deterministic(rng):
    f = feat(rng.standard_normal((6, 4)))
    mixed = make_state(np.vstack([np.ones(6) * 0.5, np.ones(6) * 0.5]))
    runs = []
    for _ in range(2):
        model = LinearSegmenter(4, 2)
        train_epochs(model, f, mixed, 10)
        runs.append((model.weights.copy(), model.bias.copy()))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert np.array_equal(runs[0][1], runs[1][1])


def test_model_serialization_roundtrip(tmp_path, rng):
    model = LinearSegmenter(4, 3)
    model.weights = rng.standard_normal((4, 3))
    model.bias = rng.standard_normal(3)
    save_model(model, tmp_path / "m.dfnt")
    back = load_model(tmp_path / "m.dfnt")
    assert np.allclose(back.weights, model.weights, atol=1e-6)
    assert np.allclose(back.bias, model.bias, atol=1e-6)
