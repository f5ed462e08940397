"""
Maxout 网络与输入凸 maxout 网络 (ICMN)

前向计算严格使用每层 1/√m_ℓ 的缩放：

    x^(ℓ+1)_i = (1/√m_{ℓ+1}) max_j <w^(ℓ)_{i,j}, (x^(ℓ), 1)>,   ℓ = 1..L-1
    f(x)      = Σ_i a_i x^(L)_i

参数以 dict[str, np.ndarray] 保存，键为 "w1".."w{L-1}" 与 "a"，
其中 w{ℓ} 形状为 (m_{ℓ+1}, k, m_ℓ + 1)，最后一列为偏置。
梯度使用同样的键，优化器因此可以统一处理任意网络。
"""
import json
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from choquet.exceptions import ShapeError
from choquet.models import ConstraintProfile, LipschitzKind, NetShape, ProfileMode

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


def make_rng(seed) -> np.random.Generator:
    """基于计数器的 Philox 生成器，seed 可以是整数或 SeedSequence"""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def add_grads(*grads: Params) -> Params:
    """按键逐项相加，键的顺序保持第一个参数的顺序"""
    total = {key: value.copy() for key, value in grads[0].items()}
    for grad in grads[1:]:
        for key, value in grad.items():
            total[key] += value
    return total


def scale_grads(grads: Params, factor: float) -> Params:
    return {key: value * factor for key, value in grads.items()}


def grad_norm(grads: Params) -> float:
    return float(np.sqrt(sum(float(np.sum(value * value)) for value in grads.values())))


def _maxout(pre: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """pre 形状 (n, m, k)；argmax 在并列时取最小下标"""
    idx = pre.argmax(axis=2)
    sel = np.take_along_axis(pre, idx[..., None], axis=2)[..., 0]
    return sel, idx


def _selected_weights(weight: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """按 trace 中记录的下标取出被选中的权重，返回 (n, m_out, m_in + 1)"""
    rows = np.arange(weight.shape[0])[None, :]
    return weight[rows, idx]


def _scatter_selected(d_sel: np.ndarray, idx: np.ndarray, inputs: np.ndarray, kernel: int) -> np.ndarray:
    """把对被选仿射片的梯度写回 (m_out, k, m_in) 的张量，未被选中的片梯度为 0"""
    grad = np.empty((d_sel.shape[1], kernel, inputs.shape[1]))
    for j in range(kernel):
        grad[:, j, :] = np.where(idx == j, d_sel, 0.0).T @ inputs
    return grad


def _pullback(d_sel: np.ndarray, idx: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """沿被选仿射片把 (n, m_out) 的梯度传回输入侧 (n, m_in)"""
    g = np.zeros((d_sel.shape[0], weight.shape[2] - 1))
    for j in range(weight.shape[1]):
        g += np.where(idx == j, d_sel, 0.0) @ weight[:, j, :-1]
    return g


def _augment(h: np.ndarray) -> np.ndarray:
    return np.concatenate([h, np.ones((h.shape[0], 1))], axis=1)


@dataclass
class ForwardTrace:
    # x^(1), ..., x^(L)，每个形状 (n, m_ℓ)
    activations: List[np.ndarray]
    # 每层每个单元选中的仿射片下标，形状 (n, m_{ℓ+1})
    selections: List[np.ndarray]
    # 输出 f(x)，形状 (n,)
    values: np.ndarray


class MaxoutNet:
    """
    k-maxout 网络，按 ConstraintProfile 可以是无约束、输入凸或输入凸且递减的网络。

    forward / input_gradient / param_gradient 只读取参数，可以在多个线程中并发调用；
    project 返回新的网络对象，不修改原对象。
    """

    def __init__(self, shape: NetShape, profile: ConstraintProfile, params: Params):
        self.shape = shape
        self.profile = profile
        self.params = params
        self._check_params()

    def _check_params(self):
        widths, k = self.shape.widths, self.shape.kernel
        for ell in range(1, self.shape.depth):
            expected = (widths[ell], k, widths[ell - 1] + 1)
            weight = self.params.get(f"w{ell}")
            if weight is None or weight.shape != expected:
                got = None if weight is None else weight.shape
                raise ShapeError(f"w{ell} has shape {got}, expected {expected}")
        a = self.params.get("a")
        if a is None or a.shape != (widths[-1],):
            raise ShapeError(f"a has shape {None if a is None else a.shape}, expected {(widths[-1],)}")

    # ------------------------------------------------------------------
    # 构造
    # ------------------------------------------------------------------
    @classmethod
    def init(cls, shape: NetShape, profile: ConstraintProfile, seed) -> "MaxoutNet":
        """
        按 fan-in 均匀初始化：每个权重独立服从 U[-1/√fan_in, 1/√fan_in]，随后投影到可行集。
        同一个 seed 得到逐位相同的参数。
        """
        rng = make_rng(seed)
        widths, k = shape.widths, shape.kernel
        params: Params = {}
        for ell in range(1, shape.depth):
            fan_in = widths[ell - 1]
            bound = 1.0 / np.sqrt(fan_in)
            params[f"w{ell}"] = rng.uniform(-bound, bound, size=(widths[ell], k, fan_in + 1))
        bound = 1.0 / np.sqrt(widths[-1])
        params["a"] = rng.uniform(-bound, bound, size=widths[-1])
        return cls(shape, profile, params).project()

    @classmethod
    def zeros(cls, shape: NetShape, profile: ConstraintProfile) -> "MaxoutNet":
        """全零网络，f ≡ 0，属于每一种约束模式的可行集"""
        widths, k = shape.widths, shape.kernel
        params = {f"w{ell}": np.zeros((widths[ell], k, widths[ell - 1] + 1)) for ell in range(1, shape.depth)}
        params["a"] = np.zeros(widths[-1])
        return cls(shape, profile, params)

    @classmethod
    def affine(cls, shape: NetShape, profile: ConstraintProfile, direction) -> "MaxoutNet":
        """
        实现 u(x) = <c, x> 的网络：第一层所有单元与仿射片都取 c/‖c‖，之后各层权重取 1/√m_ℓ，
        a 的每个分量取 ‖c‖/√m_L。hard 模式下 ‖c‖ ≤ C 时该网络可行；递减模式要求 c ≤ 0。
        """
        c = np.asarray(direction, dtype=float).reshape(-1)
        if c.shape[0] != shape.input_dim:
            raise ShapeError(f"direction has {c.shape[0]} entries, expected {shape.input_dim}")
        norm = float(np.linalg.norm(c))
        if norm == 0.0:
            return cls.zeros(shape, profile)
        widths, k = shape.widths, shape.kernel
        params: Params = {}
        first = np.zeros((widths[1], k, widths[0] + 1))
        first[..., :-1] = c / norm
        params["w1"] = first
        for ell in range(2, shape.depth):
            weight = np.zeros((widths[ell], k, widths[ell - 1] + 1))
            weight[..., :-1] = 1.0 / np.sqrt(widths[ell - 1])
            params[f"w{ell}"] = weight
        params["a"] = np.full(widths[-1], norm / np.sqrt(widths[-1]))
        return cls(shape, profile, params)

    def copy(self) -> "MaxoutNet":
        return MaxoutNet(self.shape, self.profile, {key: value.copy() for key, value in self.params.items()})

    def with_params(self, params: Params) -> "MaxoutNet":
        return MaxoutNet(self.shape, self.profile, params)

    @property
    def depth(self) -> int:
        return self.shape.depth

    @property
    def input_dim(self) -> int:
        return self.shape.input_dim

    def _scale(self, ell: int) -> float:
        # 第 ℓ 层权重输出 x^(ℓ+1)，缩放因子为 1/√m_{ℓ+1}
        return 1.0 / np.sqrt(self.shape.widths[ell])

    # ------------------------------------------------------------------
    # 前向与反向
    # ------------------------------------------------------------------
    def _as_batch(self, x) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.input_dim:
            raise ShapeError(f"input has shape {np.shape(x)}, expected (..., {self.input_dim})")
        return arr, single

    def forward_batch(self, x: np.ndarray) -> Tuple[np.ndarray, ForwardTrace]:
        h, _ = self._as_batch(x)
        activations = [h]
        selections = []
        for ell in range(1, self.depth):
            weight = self.params[f"w{ell}"]
            pre = np.tensordot(h, weight[..., :-1], axes=([1], [2])) + weight[..., -1]
            sel, idx = _maxout(pre)
            h = sel * self._scale(ell)
            activations.append(h)
            selections.append(idx)
        values = h @ self.params["a"]
        return values, ForwardTrace(activations, selections, values)

    def forward(self, x):
        """
        单点输入 (d,) 返回 (float, trace)，批量输入 (n, d) 返回 ((n,), trace)。
        """
        arr, single = self._as_batch(x)
        values, trace = self.forward_batch(arr)
        if single:
            return float(values[0]), trace
        return values, trace

    def __call__(self, x) -> np.ndarray:
        values, _ = self.forward_batch(x)
        return values

    def backward(self, trace: ForwardTrace, upstream) -> Tuple[Params, np.ndarray]:
        """
        沿 trace 记录的仿射片反传 Σ_n upstream_n f(x_n)。

        返回 (参数梯度, 每个样本的输入梯度 (n, d))。批内归约按仿射片分组做矩阵乘法，顺序固定。
        """
        up = np.asarray(upstream, dtype=float).reshape(-1)
        n = trace.values.shape[0]
        if up.shape[0] != n:
            raise ShapeError(f"upstream has {up.shape[0]} entries for a batch of {n}")
        a = self.params["a"]
        grads: Params = {"a": up @ trace.activations[-1]}
        g = up[:, None] * a[None, :]
        for ell in range(self.depth - 1, 0, -1):
            weight = self.params[f"w{ell}"]
            idx = trace.selections[ell - 1]
            d_sel = g * self._scale(ell)
            h_aug = _augment(trace.activations[ell - 1])
            grads[f"w{ell}"] = _scatter_selected(d_sel, idx, h_aug, self.shape.kernel)
            g = _pullback(d_sel, idx, weight)
        ordered = {f"w{ell}": grads[f"w{ell}"] for ell in range(1, self.depth)}
        ordered["a"] = grads["a"]
        return ordered, g

    def input_gradient(self, x) -> np.ndarray:
        """所选仿射片上的梯度 ∇f(x)，即被选权重子矩阵的乘积作用在 a 上"""
        arr, single = self._as_batch(x)
        values, trace = self.forward_batch(arr)
        _, g = self.backward(trace, np.ones_like(values))
        return g[0] if single else g

    def param_gradient(self, x, upstream=1.0) -> Params:
        """upstream · f(x) 对全部权重与偏置的梯度；批量输入时对样本求和"""
        arr, _ = self._as_batch(x)
        values, trace = self.forward_batch(arr)
        up = np.broadcast_to(np.asarray(upstream, dtype=float), values.shape)
        grads, _ = self.backward(trace, up)
        return grads

    def input_gradient_penalty(self, x) -> Tuple[float, Params]:
        """
        mean_n (‖∇_x f(x_n)‖ - 1)^2 及其对参数的精确梯度。

        在固定的仿射片选择下 ∇_x f 是各层被选权重的乘积，对参数用乘积法则求导；偏置梯度为 0。
        """
        arr, _ = self._as_batch(x)
        n = arr.shape[0]
        _, trace = self.forward_batch(arr)
        # 自顶向下: v_L = a, v_ℓ = s_ℓ · W_sel^T v_{ℓ+1}
        v = np.broadcast_to(self.params["a"], (n, self.shape.widths[-1])).copy()
        upper: Dict[int, np.ndarray] = {}
        selected: Dict[int, np.ndarray] = {}
        for ell in range(self.depth - 1, 0, -1):
            w_sel = _selected_weights(self.params[f"w{ell}"], trace.selections[ell - 1])[..., :-1]
            upper[ell] = v
            selected[ell] = w_sel
            v = self._scale(ell) * np.einsum("no,noi->ni", v, w_sel)
        norms = np.linalg.norm(v, axis=1)
        value = float(np.mean((norms - 1.0) ** 2))
        safe = np.where(norms > 0, norms, 1.0)
        r = (2.0 * (norms - 1.0) / n / safe)[:, None] * v
        r[norms == 0] = 0.0
        grads: Params = {}
        for ell in range(1, self.depth):
            scale = self._scale(ell)
            weight = self.params[f"w{ell}"]
            grad_w = np.zeros_like(weight)
            grad_w[..., :-1] = _scatter_selected(scale * upper[ell], trace.selections[ell - 1], r, self.shape.kernel)
            grads[f"w{ell}"] = grad_w
            r = scale * np.einsum("noi,ni->no", selected[ell], r)
        grads["a"] = r.sum(axis=0)
        return value, grads

    # ------------------------------------------------------------------
    # 投影
    # ------------------------------------------------------------------
    def project(self) -> "MaxoutNet":
        """
        按约束模式投影：
        - 凸模式: 第 2..L-1 层非偏置权重截断为非负，a 截断为非负
        - 递减模式: 另外把第 1 层非偏置权重截断为非正
        - hard(C): 范数大于 1 的隐藏权重向量（含偏置）缩放到单位范数，a 缩放到范数不超过 C
        偏置从不做符号截断。
        """
        mode = self.profile.mode
        params: Params = {}
        for ell in range(1, self.depth):
            weight = self.params[f"w{ell}"].copy()
            if mode != ProfileMode.UNCONSTRAINED and ell >= 2:
                np.maximum(weight[..., :-1], 0.0, out=weight[..., :-1])
            if mode == ProfileMode.INPUT_CONVEX_DECREASING and ell == 1:
                np.minimum(weight[..., :-1], 0.0, out=weight[..., :-1])
            if self.profile.lipschitz == LipschitzKind.HARD:
                norms = np.linalg.norm(weight, axis=2, keepdims=True)
                weight = np.where(norms > 1.0, weight / np.where(norms > 0, norms, 1.0), weight)
            params[f"w{ell}"] = weight
        a = self.params["a"].copy()
        if mode != ProfileMode.UNCONSTRAINED:
            np.maximum(a, 0.0, out=a)
        if self.profile.lipschitz == LipschitzKind.HARD:
            norm = np.linalg.norm(a)
            if norm > self.profile.radius:
                a = a * (self.profile.radius / norm)
        params["a"] = a
        return MaxoutNet(self.shape, self.profile, params)

    def is_feasible(self, tol: float = 1e-12) -> bool:
        """检查符号与范数约束是否成立"""
        mode = self.profile.mode
        for ell in range(1, self.depth):
            weight = self.params[f"w{ell}"]
            if mode != ProfileMode.UNCONSTRAINED and ell >= 2 and weight[..., :-1].min(initial=0.0) < -tol:
                return False
            if mode == ProfileMode.INPUT_CONVEX_DECREASING and ell == 1 and weight[..., :-1].max(initial=0.0) > tol:
                return False
            if self.profile.is_hard and np.linalg.norm(weight, axis=2).max(initial=0.0) > 1.0 + tol:
                return False
        a = self.params["a"]
        if mode != ProfileMode.UNCONSTRAINED and a.min(initial=0.0) < -tol:
            return False
        if self.profile.is_hard and np.linalg.norm(a) > self.profile.radius + tol:
            return False
        return True

    # ------------------------------------------------------------------
    # 序列化
    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "kind": "maxout",
            "shape": self.shape.model_dump(),
            "profile": self.profile.model_dump(mode="json"),
            "params": {key: value.tolist() for key, value in self.params.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MaxoutNet":
        if data.get("kind") != "maxout":
            raise ShapeError(f"expected a maxout network document, got kind={data.get('kind')}")
        shape = NetShape(**data["shape"])
        profile = ConstraintProfile(**data["profile"])
        params = {key: np.asarray(value, dtype=float) for key, value in data["params"].items()}
        return cls(shape, profile, params)

    def save_json(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path: str) -> "MaxoutNet":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class GeneratorTrace:
    latent: np.ndarray
    # 每个隐藏层的输入 h（第一项为 None，对应直接读取隐变量的第一层）
    hidden: List[np.ndarray]
    selections: List[np.ndarray]
    outputs: np.ndarray


class ResidualMaxoutGenerator:
    """
    无约束残差 maxout 生成器

    第一层从隐变量 z 出发；之后每个隐藏层为 maxout(W h + V z + b)，V 为输入到隐藏层的残差连接；
    最后一层为线性层输出 data_dim 维样本。depth 计入首层与输出层。
    """

    def __init__(self, latent_dim: int, hidden: int, depth: int, kernel: int, output_dim: int, params: Params):
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.depth = depth
        self.kernel = kernel
        self.output_dim = output_dim
        self.params = params
        expected = self._expected_shapes()
        for key, shape in expected.items():
            if key not in params or params[key].shape != shape:
                got = params[key].shape if key in params else None
                raise ShapeError(f"{key} has shape {got}, expected {shape}")

    def _expected_shapes(self) -> Dict[str, tuple]:
        shapes = {"w0": (self.hidden, self.kernel, self.latent_dim + 1)}
        for ell in range(1, self.depth - 1):
            shapes[f"w{ell}"] = (self.hidden, self.kernel, self.hidden + 1)
            shapes[f"v{ell}"] = (self.hidden, self.kernel, self.latent_dim)
        shapes["out"] = (self.output_dim, self.hidden + 1)
        return shapes

    @classmethod
    def init(cls, latent_dim: int, hidden: int, depth: int, kernel: int, output_dim: int, seed) -> "ResidualMaxoutGenerator":
        if depth < 2:
            raise ShapeError(f"generator depth must be >= 2, got {depth}")
        rng = make_rng(seed)
        params: Params = {}
        bound = 1.0 / np.sqrt(latent_dim)
        params["w0"] = rng.uniform(-bound, bound, size=(hidden, kernel, latent_dim + 1))
        for ell in range(1, depth - 1):
            bound = 1.0 / np.sqrt(hidden + latent_dim)
            params[f"w{ell}"] = rng.uniform(-bound, bound, size=(hidden, kernel, hidden + 1))
            params[f"v{ell}"] = rng.uniform(-bound, bound, size=(hidden, kernel, latent_dim))
        bound = 1.0 / np.sqrt(hidden)
        params["out"] = rng.uniform(-bound, bound, size=(output_dim, hidden + 1))
        return cls(latent_dim, hidden, depth, kernel, output_dim, params)

    def with_params(self, params: Params) -> "ResidualMaxoutGenerator":
        return ResidualMaxoutGenerator(self.latent_dim, self.hidden, self.depth, self.kernel, self.output_dim, params)

    def copy(self) -> "ResidualMaxoutGenerator":
        return self.with_params({key: value.copy() for key, value in self.params.items()})

    def forward(self, z: np.ndarray) -> Tuple[np.ndarray, GeneratorTrace]:
        z = np.asarray(z, dtype=float)
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ShapeError(f"latent batch has shape {z.shape}, expected (n, {self.latent_dim})")
        w0 = self.params["w0"]
        pre = np.tensordot(z, w0[..., :-1], axes=([1], [2])) + w0[..., -1]
        h, idx = _maxout(pre)
        hidden = [None]
        selections = [idx]
        for ell in range(1, self.depth - 1):
            weight, residual = self.params[f"w{ell}"], self.params[f"v{ell}"]
            pre = (
                np.tensordot(h, weight[..., :-1], axes=([1], [2]))
                + np.tensordot(z, residual, axes=([1], [2]))
                + weight[..., -1]
            )
            hidden.append(h)
            h, idx = _maxout(pre)
            selections.append(idx)
        hidden.append(h)
        out = self.params["out"]
        outputs = h @ out[:, :-1].T + out[:, -1]
        return outputs, GeneratorTrace(z, hidden, selections, outputs)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        outputs, _ = self.forward(z)
        return outputs

    def backward(self, trace: GeneratorTrace, upstream: np.ndarray) -> Params:
        """upstream 形状 (n, output_dim)，返回 Σ_n <upstream_n, g(z_n)> 的参数梯度"""
        up = np.asarray(upstream, dtype=float)
        if up.shape != trace.outputs.shape:
            raise ShapeError(f"upstream has shape {up.shape}, expected {trace.outputs.shape}")
        out = self.params["out"]
        grads: Params = {"out": up.T @ _augment(trace.hidden[-1])}
        g = up @ out[:, :-1]
        z = trace.latent
        for ell in range(self.depth - 2, 0, -1):
            idx = trace.selections[ell]
            h_prev = trace.hidden[ell]
            grads[f"w{ell}"] = _scatter_selected(g, idx, _augment(h_prev), self.kernel)
            grads[f"v{ell}"] = _scatter_selected(g, idx, z, self.kernel)
            g = _pullback(g, idx, self.params[f"w{ell}"])
        grads["w0"] = _scatter_selected(g, trace.selections[0], _augment(z), self.kernel)
        return {key: grads[key] for key in self.params}

    def to_dict(self) -> dict:
        return {
            "kind": "residual_maxout_generator",
            "dims": {
                "latent_dim": self.latent_dim,
                "hidden": self.hidden,
                "depth": self.depth,
                "kernel": self.kernel,
                "output_dim": self.output_dim,
            },
            "params": {key: value.tolist() for key, value in self.params.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResidualMaxoutGenerator":
        if data.get("kind") != "residual_maxout_generator":
            raise ShapeError(f"expected a generator document, got kind={data.get('kind')}")
        params = {key: np.asarray(value, dtype=float) for key, value in data["params"].items()}
        return cls(params=params, **data["dims"])

    def save_json(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path: str) -> "ResidualMaxoutGenerator":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def linear_net(direction, profile: Optional[ConstraintProfile] = None) -> MaxoutNet:
    """u(x) = <c, x> 的单层网络 (L=2, m_2=1, k=1)"""
    c = np.asarray(direction, dtype=float).reshape(-1)
    shape = NetShape(depth=2, widths=[c.shape[0], 1], kernel=1)
    profile = profile or ConstraintProfile(mode=ProfileMode.UNCONSTRAINED, lipschitz=LipschitzKind.SOFT)
    weight = np.concatenate([c, [0.0]]).reshape(1, 1, -1)
    return MaxoutNet(shape, profile, {"w1": weight, "a": np.ones(1)})
