import sys
import os

import numpy as np
import pytest

# 将项目根目录添加到 python 路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from choquet.exceptions import ShapeError
from choquet.models import ConstraintProfile, LipschitzKind, NetShape, ProfileMode
from choquet.net import MaxoutNet, ResidualMaxoutGenerator, linear_net, make_rng

SOFT_FREE = ConstraintProfile(mode=ProfileMode.UNCONSTRAINED, lipschitz=LipschitzKind.SOFT)
SOFT_CONVEX = ConstraintProfile(mode=ProfileMode.INPUT_CONVEX, lipschitz=LipschitzKind.SOFT)


def abs_net() -> MaxoutNet:
    """L=2, k=2 的 |x| 网络"""
    shape = NetShape(depth=2, widths=[1, 1], kernel=2)
    return MaxoutNet(shape, SOFT_CONVEX, {"w1": np.array([[[1.0, 0.0], [-1.0, 0.0]]]), "a": np.array([1.0])})


def fd_param_grad(fun, params, h=1e-6):
    """对每个参数分量做中心差分"""
    grads = {}
    for key, value in params.items():
        g = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            up = {k: v.copy() for k, v in params.items()}
            down = {k: v.copy() for k, v in params.items()}
            up[key][idx] += h
            down[key][idx] -= h
            g[idx] = (fun(up) - fun(down)) / (2 * h)
        grads[key] = g
    return grads


def test_abs_network_forward():
    net = abs_net()
    assert net.forward(np.array([2.0]))[0] == pytest.approx(2.0)
    assert net.forward(np.array([-0.5]))[0] == pytest.approx(0.5)


def test_layer_scaling_uses_next_width():
    # M = (1, 2, 1)，第二层两个单元，f(x) = |x| / √2
    shape = NetShape(depth=3, widths=[1, 2, 1], kernel=2)
    w1 = np.zeros((2, 2, 2))
    w1[0, 0, 0], w1[0, 1, 0] = 1.0, -1.0
    w2 = np.zeros((1, 2, 3))
    w2[0, 0, 0] = 1.0
    net = MaxoutNet(shape, SOFT_CONVEX, {"w1": w1, "w2": w2, "a": np.array([1.0])})
    value, _ = net.forward(np.array([3.0]))
    assert value == pytest.approx(3.0 / np.sqrt(2.0), abs=1e-12)


def test_zero_network_is_zero():
    shape = NetShape.uniform(3, 5, 4, 3)
    net = MaxoutNet.zeros(shape, SOFT_CONVEX)
    x = make_rng(0).normal(size=(10, 3))
    assert np.all(net(x) == 0.0)
    assert np.all(net.input_gradient(x) == 0.0)


def test_init_is_deterministic():
    shape = NetShape(depth=2, widths=[2, 6], kernel=3)
    first = MaxoutNet.init(shape, SOFT_FREE, 7)
    second = MaxoutNet.init(shape, SOFT_FREE, 7)
    for key in first.params:
        assert np.array_equal(first.params[key], second.params[key])


def test_init_respects_profiles():
    shape = NetShape.uniform(2, 8, 4, 3)
    convex = MaxoutNet.init(shape, SOFT_CONVEX, 1)
    for ell in (2, 3):
        assert convex.params[f"w{ell}"][..., :-1].min() >= 0.0
    assert convex.params["a"].min() >= 0.0

    hard = MaxoutNet.init(shape, ConstraintProfile(radius=1.0), 1)
    for ell in (1, 2, 3):
        assert np.linalg.norm(hard.params[f"w{ell}"], axis=2).max() <= 1.0 + 1e-12
    assert np.linalg.norm(hard.params["a"]) <= 1.0 + 1e-12
    assert hard.is_feasible()


def test_forward_rejects_wrong_dimension():
    net = abs_net()
    with pytest.raises(ShapeError):
        net.forward(np.array([1.0, 2.0]))
    with pytest.raises(ShapeError):
        MaxoutNet(net.shape, net.profile, {"w1": np.zeros((1, 2, 3)), "a": np.ones(1)})


def test_abs_network_gradients():
    net = abs_net()
    assert net.input_gradient(np.array([2.0]))[0] == pytest.approx(1.0)
    assert net.input_gradient(np.array([-1.0]))[0] == pytest.approx(-1.0)

    grads = net.param_gradient(np.array([2.0]))
    assert grads["a"][0] == pytest.approx(2.0)
    assert np.allclose(grads["w1"][0, 0], [2.0, 1.0])
    # 未被选中的仿射片梯度为 0
    assert np.all(grads["w1"][0, 1] == 0.0)


def test_ties_pick_lowest_index():
    net = abs_net()
    _, trace = net.forward_batch(np.array([[0.0]]))
    assert trace.selections[0][0, 0] == 0
    assert net.input_gradient(np.array([0.0]))[0] == pytest.approx(1.0)


def test_input_gradient_matches_finite_differences():
    shape = NetShape(depth=4, widths=[3, 6, 5, 4], kernel=3)
    rng = make_rng(11)
    h = 1e-5
    for seed in range(100):
        net = MaxoutNet.init(shape, SOFT_FREE, seed)
        x = rng.uniform(-2.0, 2.0, size=3)
        numeric = np.array([(net.forward(x + h * e)[0] - net.forward(x - h * e)[0]) / (2 * h) for e in np.eye(3)])
        np.testing.assert_allclose(net.input_gradient(x), numeric, rtol=1e-5, atol=1e-9)


def test_param_gradient_matches_finite_differences():
    shape = NetShape(depth=3, widths=[2, 3, 2], kernel=2)
    rng = make_rng(12)
    for seed in range(100):
        net = MaxoutNet.init(shape, SOFT_FREE, seed)
        x = rng.uniform(-2.0, 2.0, size=2)
        upstream = rng.uniform(0.5, 2.0)
        numeric = fd_param_grad(lambda p: upstream * net.with_params(p).forward(x)[0], net.params)
        analytic = net.param_gradient(x, upstream)
        for key in net.params:
            np.testing.assert_allclose(analytic[key], numeric[key], rtol=1e-4, atol=1e-7)


def test_batch_backward_sums_over_samples():
    net = MaxoutNet.init(NetShape.uniform(2, 4, 3, 2), SOFT_FREE, 3)
    x = make_rng(3).normal(size=(6, 2))
    weights = np.linspace(0.1, 0.6, 6)
    _, trace = net.forward_batch(x)
    grads, input_grads = net.backward(trace, weights)
    single = [net.param_gradient(x[i], weights[i]) for i in range(6)]
    for key in grads:
        np.testing.assert_allclose(grads[key], sum(g[key] for g in single), atol=1e-12)
    np.testing.assert_allclose(input_grads, weights[:, None] * net.input_gradient(x), atol=1e-12)


def test_gradient_penalty_parameter_gradient():
    shape = NetShape(depth=3, widths=[2, 4, 3], kernel=2)
    x = make_rng(5).uniform(-1.0, 1.0, size=(8, 2))
    for seed in range(5):
        net = MaxoutNet.init(shape, SOFT_FREE, seed)
        value, grads = net.input_gradient_penalty(x)
        norms = np.linalg.norm(net.input_gradient(x), axis=1)
        assert value == pytest.approx(np.mean((norms - 1.0) ** 2))
        numeric = fd_param_grad(lambda p: net.with_params(p).input_gradient_penalty(x)[0], net.params)
        for key in net.params:
            np.testing.assert_allclose(grads[key], numeric[key], rtol=1e-4, atol=1e-7)
        for ell in (1, 2):
            assert np.all(grads[f"w{ell}"][..., -1] == 0.0)


def test_project_clamps_signs_but_not_biases():
    shape = NetShape(depth=3, widths=[1, 2, 1], kernel=2)
    w1 = np.full((2, 2, 2), 0.5)
    w2 = np.full((1, 2, 3), 0.5)
    w2[0, 0, 0] = -0.3
    w2[0, 0, -1] = -0.3
    net = MaxoutNet(shape, SOFT_CONVEX, {"w1": w1, "w2": w2, "a": np.array([-0.2])})
    projected = net.project()
    assert projected.params["w2"][0, 0, 0] == 0.0
    assert projected.params["w2"][0, 0, -1] == -0.3
    assert projected.params["a"][0] == 0.0
    # 输入层在非递减模式下不截断
    assert np.array_equal(projected.params["w1"], w1)
    # 原对象不变
    assert net.params["w2"][0, 0, 0] == -0.3


def test_project_decreasing_mode_first_layer():
    shape = NetShape(depth=2, widths=[1, 2], kernel=2)
    w1 = np.array([[[0.4, 0.1], [-0.4, 0.1]], [[0.2, -0.5], [-0.1, 0.0]]])
    profile = ConstraintProfile(mode=ProfileMode.INPUT_CONVEX_DECREASING, lipschitz=LipschitzKind.SOFT)
    projected = MaxoutNet(shape, profile, {"w1": w1, "a": np.ones(2)}).project()
    assert projected.params["w1"][..., 0].max() <= 0.0
    assert np.array_equal(projected.params["w1"][..., 1], w1[..., 1])


def test_project_hard_rescales_norms():
    shape = NetShape(depth=2, widths=[1, 2], kernel=1)
    profile = ConstraintProfile(mode=ProfileMode.UNCONSTRAINED, lipschitz=LipschitzKind.HARD, radius=2.0)
    w1 = np.array([[[2.4, 3.2]], [[0.3, 0.4]]])
    a = np.array([1.8, 2.4])
    projected = MaxoutNet(shape, profile, {"w1": w1, "a": a}).project()
    np.testing.assert_allclose(projected.params["w1"][0, 0], [0.6, 0.8])
    np.testing.assert_allclose(projected.params["w1"][1, 0], [0.3, 0.4])
    assert np.linalg.norm(projected.params["a"]) == pytest.approx(2.0)
    np.testing.assert_allclose(projected.params["a"] / np.linalg.norm(projected.params["a"]), [0.6, 0.8])


def test_project_is_idempotent_on_feasible_nets():
    net = MaxoutNet.init(NetShape.uniform(2, 6, 4, 3), SOFT_CONVEX, 4)
    again = net.project()
    for key in net.params:
        assert np.array_equal(net.params[key], again.params[key])

    # 单位范数的舍入误差在 1 ulp 量级
    hard = MaxoutNet.init(NetShape.uniform(2, 6, 4, 3), ConstraintProfile(), 4)
    again = hard.project()
    for key in hard.params:
        np.testing.assert_allclose(again.params[key], hard.params[key], rtol=1e-14, atol=0)


def test_input_convex_nets_are_convex():
    rng = make_rng(21)
    for seed in range(3):
        net = MaxoutNet.init(NetShape.uniform(2, 8, 4, 3), SOFT_CONVEX, seed)
        x = rng.uniform(-2.0, 2.0, size=(10_000, 2))
        y = rng.uniform(-2.0, 2.0, size=(10_000, 2))
        t = rng.uniform(size=(10_000, 1))
        lhs = net(t * x + (1 - t) * y)
        rhs = t[:, 0] * net(x) + (1 - t[:, 0]) * net(y)
        assert np.all(lhs <= rhs + 1e-9)


def test_decreasing_nets_are_monotone():
    profile = ConstraintProfile(mode=ProfileMode.INPUT_CONVEX_DECREASING, lipschitz=LipschitzKind.SOFT)
    rng = make_rng(22)
    for seed in range(3):
        net = MaxoutNet.init(NetShape.uniform(1, 8, 3, 4), profile, seed)
        pairs = np.sort(rng.uniform(-3.0, 3.0, size=(5_000, 2)), axis=1)
        assert np.all(net(pairs[:, :1]) >= net(pairs[:, 1:]) - 1e-9)


def test_hard_class_bounds():
    depth = 4
    rng = make_rng(23)
    for seed in range(1_000):
        net = MaxoutNet.init(NetShape.uniform(3, 6, depth, 3), ConstraintProfile(radius=1.0), seed)
        x = rng.normal(size=(200, 3)) * 3.0
        assert np.linalg.norm(net.input_gradient(x), axis=1).max() <= 1.0 + 1e-6

        ball = rng.normal(size=(200, 3))
        ball *= (rng.uniform(size=(200, 1)) ** (1 / 3)) / np.linalg.norm(ball, axis=1, keepdims=True)
        values, trace = net.forward_batch(ball)
        assert np.abs(values).max() <= depth + 1e-6
        for ell, activation in enumerate(trace.activations, start=1):
            assert np.linalg.norm(activation, axis=1).max() <= ell + 1e-6


def test_affine_network_realizes_linear_function():
    c = np.array([0.3, -0.4, 0.5])
    shape = NetShape(depth=4, widths=[3, 5, 7, 4], kernel=3)
    net = MaxoutNet.affine(shape, ConstraintProfile(radius=1.0), c)
    x = make_rng(24).normal(size=(50, 3)) * 2.0
    np.testing.assert_allclose(net(x), x @ c, atol=1e-12)
    np.testing.assert_allclose(net.input_gradient(x), np.tile(c, (50, 1)), atol=1e-12)
    assert net.is_feasible()

    # ‖c‖ = C 时恰好落在 hard 球面上
    boundary = MaxoutNet.affine(shape, ConstraintProfile(radius=2.0), 2.0 * c / np.linalg.norm(c))
    assert boundary.is_feasible()
    assert np.linalg.norm(boundary.params["a"]) == pytest.approx(2.0)

    decreasing = ConstraintProfile(mode=ProfileMode.INPUT_CONVEX_DECREASING)
    assert MaxoutNet.affine(NetShape.uniform(1, 8, 3, 4), decreasing, [-1.0]).is_feasible()
    assert np.all(MaxoutNet.affine(shape, ConstraintProfile(), np.zeros(3))(x) == 0.0)
    with pytest.raises(ShapeError):
        MaxoutNet.affine(shape, ConstraintProfile(), [1.0, 0.0])


def test_forward_is_affine_on_constant_selection():
    net = MaxoutNet.init(NetShape.uniform(2, 5, 3, 3), SOFT_FREE, 9)
    x = np.array([0.3, -0.7])
    direction = np.array([0.6, 0.8])
    ts = np.array([0.0, 1e-6, 2e-6])
    points = x + ts[:, None] * direction
    values, trace = net.forward_batch(points)
    for idx in trace.selections:
        assert np.all(idx == idx[0])
    assert values[2] - 2 * values[1] + values[0] == pytest.approx(0.0, abs=1e-9)


def test_json_document_restores_network(tmp_path):
    net = MaxoutNet.init(NetShape.uniform(2, 4, 3, 2), ConstraintProfile(radius=0.5), 2)
    path = tmp_path / "critic.json"
    net.save_json(str(path))
    restored = MaxoutNet.load_json(str(path))
    assert restored.shape == net.shape
    assert restored.profile == net.profile
    x = make_rng(2).normal(size=(5, 2))
    assert np.array_equal(restored(x), net(x))
    with pytest.raises(ShapeError):
        MaxoutNet.from_dict({"kind": "residual_maxout_generator"})


def test_linear_net():
    net = linear_net([0.5, -2.0])
    x = np.array([[1.0, 1.0], [2.0, 0.0]])
    np.testing.assert_allclose(net(x), [-1.5, 1.0])
    np.testing.assert_allclose(net.input_gradient(x), [[0.5, -2.0], [0.5, -2.0]])


def test_generator_backward_matches_finite_differences():
    generator = ResidualMaxoutGenerator.init(latent_dim=3, hidden=4, depth=4, kernel=2, output_dim=2, seed=1)
    rng = make_rng(1)
    z = rng.normal(size=(5, 3))
    upstream = rng.normal(size=(5, 2))
    outputs, trace = generator.forward(z)
    assert outputs.shape == (5, 2)
    grads = generator.backward(trace, upstream)
    numeric = fd_param_grad(lambda p: float(np.sum(upstream * generator.with_params(p)(z))), generator.params)
    for key in generator.params:
        np.testing.assert_allclose(grads[key], numeric[key], rtol=1e-4, atol=1e-7)


def test_generator_shapes_and_json(tmp_path):
    generator = ResidualMaxoutGenerator.init(latent_dim=4, hidden=6, depth=3, kernel=2, output_dim=2, seed=3)
    assert set(generator.params) == {"w0", "w1", "v1", "out"}
    path = tmp_path / "generator.json"
    generator.save_json(str(path))
    restored = ResidualMaxoutGenerator.load_json(str(path))
    z = make_rng(3).normal(size=(4, 4))
    assert np.array_equal(restored(z), generator(z))
    with pytest.raises(ShapeError):
        generator(np.zeros((4, 3)))
    with pytest.raises(ShapeError):
        ResidualMaxoutGenerator.init(latent_dim=4, hidden=6, depth=1, kernel=2, output_dim=2, seed=3)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
