import numpy as np
import pytest

from src.infra.errors import NonFiniteError, ShapeError, StaleTapeError
from src.nn.layers import Dense, Embedding, masked_softmax
from src.nn.network import Network, NetworkSpec, backward, forward
from src.nn.optim import OptimizerState, adam_step


def numeric_grad(f, params, name, idx, h=1e-6):
    orig = params[name][idx]
    params[name][idx] = orig + h
    up = f()
    params[name][idx] = orig - h
    down = f()
    params[name][idx] = orig
    return (up - down) / (2 * h)


def assert_close(analytic, numeric, tol=1e-4):
    denom = max(abs(analytic), abs(numeric), 1e-8)
    assert abs(analytic - numeric) / denom < tol or abs(analytic - numeric) < 1e-9


@pytest.mark.parametrize("activation", ["tanh", "identity", "relu"])
def test_dense_gradient(activation):
    rng = np.random.default_rng(0)
    layer = Dense("d", 4, 3, activation)
    params = layer.init_params(rng)
    params["d.bias"] = rng.normal(size=3)
    x = rng.normal(size=(5, 4))
    g = rng.normal(size=(5, 3))

    def f():
        return float(np.sum(layer.forward(params, x)[0] * g))

    _, cache = layer.forward(params, x)
    _, grads = layer.backward(params, cache, g)
    for name in ("d.weight", "d.bias"):
        for idx in np.ndindex(params[name].shape):
            assert_close(grads[name][idx], numeric_grad(f, params, name, idx))


def test_embedding_gradient_accumulates_repeated_rows():
    rng = np.random.default_rng(1)
    layer = Embedding("e", 4, 2)
    params = layer.init_params(rng)
    t = np.array([1, 3, 3, 4])
    g = rng.normal(size=(4, 2))
    _, rows = layer.forward(params, t)
    grads = layer.backward(params, rows, g)["e.weight"]
    assert np.allclose(grads[2], g[1] + g[2])
    assert np.allclose(grads[1], 0.0)


def test_embedding_rejects_out_of_range_epoch():
    layer = Embedding("e", 4, 2)
    params = layer.init_params(np.random.default_rng(0))
    with pytest.raises(ShapeError):
        layer.forward(params, np.array([0]))
    with pytest.raises(ShapeError):
        layer.forward(params, np.array([5]))


def test_masked_softmax():
    logits = np.array([[1.0, 2.0, 3.0, 4.0], [0.5, -1.0, 2.0, 0.0]])
    mask = np.array([[True, False, True, False], [False, False, False, True]])
    probs = masked_softmax(logits, mask)
    assert np.all(probs[~mask] == 0.0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert probs[1, 3] == 1.0
    with pytest.raises(ShapeError):
        masked_softmax(logits, np.zeros_like(mask))


def small_network(head="softmax", out=6, seed=3):
    spec = NetworkSpec(vocab=5, embedding_dim=2, input_dim=4, hidden_sizes=(7, 5), output_dim=out,
                       head=head, activation="tanh")
    return Network(spec, seed)


@pytest.mark.parametrize("head", ["softmax", "identity"])
def test_network_gradient(head):
    net = small_network(head)
    rng = np.random.default_rng(4)
    t = np.array([1, 2, 5])
    x = rng.normal(size=(3, 4))
    mask = np.array([[1, 1, 0, 1, 0, 1], [0, 1, 1, 1, 1, 1], [1, 0, 0, 0, 0, 1]], dtype=bool)
    g = rng.normal(size=(3, 6))
    use_mask = mask if head == "softmax" else None

    def f():
        return float(np.sum(forward(net, t, x, use_mask)[0] * g))

    _, tape = forward(net, t, x, use_mask)
    grads = backward(tape, g)
    for name, value in net.params.items():
        for idx in list(np.ndindex(value.shape))[:12]:
            assert_close(grads[name][idx], numeric_grad(f, net.params, name, idx))


def test_single_sample_forward_matches_batch():
    net = small_network()
    x = np.linspace(0, 1, 4)
    single, _ = forward(net, 2, x)
    batch, _ = forward(net, np.array([2]), x[None, :])
    assert single.shape == (6,)
    assert np.array_equal(single, batch[0])


def test_forward_matches_explicit_three_layer_computation():
    spec = NetworkSpec(vocab=5, embedding_dim=3, input_dim=4, hidden_sizes=(6, 5), output_dim=2, activation="tanh")
    net = Network(spec, 12)
    p = net.params
    rng = np.random.default_rng(13)
    t = np.array([1, 5, 2, 2])
    x = rng.normal(size=(4, 4))

    h1 = np.tanh(np.hstack([p["embedding.weight"][t - 1], x]) @ p["dense0.weight"] + p["dense0.bias"])
    h2 = np.tanh(h1 @ p["dense1.weight"] + p["dense1.bias"])
    expected = h2 @ p["dense2.weight"] + p["dense2.bias"]

    out, _ = forward(net, t, x)
    assert np.max(np.abs(out - expected)) < 1e-12


def test_stale_tape_detected():
    net = small_network()
    _, tape = forward(net, 1, np.zeros(4))
    net.set_params({k: v * 0.5 for k, v in net.params.items()})
    with pytest.raises(StaleTapeError):
        backward(tape, np.ones(6))


def test_wrong_feature_length():
    with pytest.raises(ShapeError):
        forward(small_network(), 1, np.zeros(3))


def test_adam_first_step_by_hand():
    params = {"w": np.array([1.0])}
    opt = OptimizerState.for_params(params, lr=0.1)
    new, opt = adam_step(params, {"w": np.array([0.5])}, opt)
    # bias-corrected moments are g and g^2 on the first step
    assert new["w"][0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8))
    assert opt.step == 1
    assert opt.m["w"][0] == pytest.approx(0.05)
    assert opt.v["w"][0] == pytest.approx(0.001 * 0.25)


def test_adam_applies_group_decay():
    params = {"embedding.weight": np.array([2.0]), "dense0.weight": np.array([2.0])}
    groups = {"embedding.weight": "embedding", "dense0.weight": "dense"}
    opt = OptimizerState.for_params(params, 0.01, groups, {"embedding": 0.005})
    assert opt.decay == {"embedding.weight": 0.005, "dense0.weight": 0.0}
    _, opt = adam_step(params, {"embedding.weight": np.array([0.0]), "dense0.weight": np.array([0.0])}, opt)
    assert opt.m["embedding.weight"][0] == pytest.approx(0.1 * 0.005 * 2.0)
    assert opt.m["dense0.weight"][0] == 0.0


def test_adam_rejects_non_finite_gradient():
    params = {"dense1.weight": np.ones(2)}
    opt = OptimizerState.for_params(params, 0.1)
    with pytest.raises(NonFiniteError, match="dense1"):
        adam_step(params, {"dense1.weight": np.array([1.0, np.nan])}, opt)
