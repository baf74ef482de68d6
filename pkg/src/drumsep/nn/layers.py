"""Dense-tensor layers with explicit forward/backward passes.

Everything operates on (batch, channels, freq, time) float arrays. Each layer
caches what its backward pass needs during forward; calling backward first is
a state error. Convolutions are cross-correlations implemented with an
im2col/col2im pair so the heavy lifting is a single matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import ConfigError, ShapeError, StateError


def conv_out_size(n: int, k: int, s: int, p: int, d: int) -> int:
    return (n + 2 * p - d * (k - 1) - 1) // s + 1


def conv_transpose_out_size(n: int, k: int, s: int, p: int, d: int, op: int) -> int:
    return (n - 1) * s - 2 * p + d * (k - 1) + 1 + op


def _pair(v) -> Tuple[int, int]:
    if isinstance(v, int):
        return (v, v)
    return (int(v[0]), int(v[1]))


@dataclass(frozen=True)
class ConvSpec:
    out_channels: int
    kernel: Tuple[int, int] = (5, 5)
    stride: Tuple[int, int] = (2, 2)
    padding: Tuple[int, int] = (2, 2)
    dilation: Tuple[int, int] = (1, 1)
    transposed: bool = False
    out_padding: Tuple[int, int] = (0, 0)  # transposed only; resolves output-size ambiguity

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        object.__setattr__(self, "stride", _pair(self.stride))
        object.__setattr__(self, "padding", _pair(self.padding))
        object.__setattr__(self, "dilation", _pair(self.dilation))
        object.__setattr__(self, "out_padding", _pair(self.out_padding))
        if self.out_channels < 1:
            raise ConfigError("out_channels must be >= 1")
        for name in ("kernel", "stride", "dilation"):
            if min(getattr(self, name)) < 1:
                raise ConfigError(f"{name} entries must be >= 1")
        if min(self.padding) < 0 or min(self.out_padding) < 0:
            raise ConfigError("padding entries must be >= 0")
        if self.transposed and (self.out_padding[0] >= self.stride[0]
                                or self.out_padding[1] >= self.stride[1]):
            raise ConfigError("out_padding must be smaller than stride")


def _im2col(x, kernel, stride, padding, dilation, out_hw):
    """Gather sliding-window patches into (B, C, kh, kw, oh, ow)."""
    b, c, _, _ = x.shape
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    dh, dw = dilation
    oh, ow = out_hw
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        i0 = i * dh
        for j in range(kw):
            j0 = j * dw
            cols[:, :, i, j] = xp[:, :, i0:i0 + sh * (oh - 1) + 1:sh,
                                  j0:j0 + sw * (ow - 1) + 1:sw]
    return cols


def _col2im(cols, image_hw, stride, padding, dilation):
    """Scatter-add patches back; adjoint of _im2col.

    For strides > 1 the writes are grouped per output phase so each
    accumulation hits a contiguous block instead of a strided slice.
    """
    b, c, kh, kw, oh, ow = cols.shape
    sh, sw = stride
    ph, pw = padding
    dh, dw = dilation
    h, w = image_hw
    hp, wp = h + 2 * ph, w + 2 * pw

    if sh == 1 and sw == 1:
        xp = np.zeros((b, c, hp, wp), dtype=cols.dtype)
        for i in range(kh):
            i0 = i * dh
            for j in range(kw):
                j0 = j * dw
                xp[:, :, i0:i0 + oh, j0:j0 + ow] += cols[:, :, i, j]
        return xp[:, :, ph:ph + h, pw:pw + w]

    # phase buffer: xph[..., a, b, :, :] holds rows congruent to a mod sh etc.
    nh = -(-hp // sh)
    nw = -(-wp // sw)
    xph = np.zeros((b, c, sh, sw, nh, nw), dtype=cols.dtype)
    for i in range(kh):
        i0 = i * dh
        for j in range(kw):
            j0 = j * dw
            ai, qi = i0 % sh, i0 // sh
            aj, qj = j0 % sw, j0 // sw
            xph[:, :, ai, aj, qi:qi + oh, qj:qj + ow] += cols[:, :, i, j]
    xp = np.empty((b, c, nh * sh, nw * sw), dtype=cols.dtype)
    for ai in range(sh):
        for aj in range(sw):
            xp[:, :, ai::sh, aj::sw] = xph[:, :, ai, aj]
    return xp[:, :, ph:ph + h, pw:pw + w]


class Layer:
    """Base class: named parameters, matching gradient buffers, caching."""

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _require_cache(self):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called before forward")
        return self._cache

    def zero_grads(self):
        for k, p in self.params.items():
            self.grads[k] = np.zeros_like(p)


def kaiming_uniform(shape, fan_in, rng, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Layer):
    def __init__(self, in_channels: int, spec: ConvSpec,
                 rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        if spec.transposed:
            raise ConfigError("Conv2d requires a non-transposed ConvSpec")
        self.in_channels = in_channels
        self.spec = spec
        kh, kw = spec.kernel
        rng = rng or np.random.default_rng(0)
        self.params["weight"] = kaiming_uniform(
            (spec.out_channels, in_channels, kh, kw), in_channels * kh * kw, rng, dtype)
        self.params["bias"] = np.zeros(spec.out_channels, dtype=dtype)
        self.zero_grads()

    def _out_hw(self, x):
        s = self.spec
        oh = conv_out_size(x.shape[2], s.kernel[0], s.stride[0], s.padding[0], s.dilation[0])
        ow = conv_out_size(x.shape[3], s.kernel[1], s.stride[1], s.padding[1], s.dilation[1])
        if oh < 1 or ow < 1:
            raise ShapeError(f"conv output size ({oh}, {ow}) < 1 for input {x.shape}")
        return oh, ow

    def forward(self, x, train=False):
        if x.shape[1] != self.in_channels:
            raise ShapeError(
                f"conv expects {self.in_channels} input channels, got input shape {x.shape}")
        s = self.spec
        oh, ow = self._out_hw(x)
        cols = _im2col(x, s.kernel, s.stride, s.padding, s.dilation, (oh, ow))
        b = x.shape[0]
        ckk = self.in_channels * s.kernel[0] * s.kernel[1]
        cols2 = cols.reshape(b, ckk, oh * ow)
        w2 = self.params["weight"].reshape(s.out_channels, ckk)
        out = np.matmul(w2[None], cols2).reshape(b, s.out_channels, oh, ow)
        out += self.params["bias"][None, :, None, None]
        self._cache = (x.shape, cols2)
        return out

    def backward(self, dout):
        x_shape, cols2 = self._require_cache()
        s = self.spec
        b, _, oh, ow = dout.shape
        self.grads["bias"] += dout.sum(axis=(0, 2, 3))
        dout2 = dout.reshape(b, s.out_channels, oh * ow)
        ckk = self.in_channels * s.kernel[0] * s.kernel[1]
        w2 = self.params["weight"].reshape(s.out_channels, ckk)
        self.grads["weight"] += np.matmul(
            dout2, cols2.transpose(0, 2, 1)).sum(axis=0).reshape(self.params["weight"].shape)
        dcols = np.matmul(w2.T[None], dout2).reshape(
            b, self.in_channels, s.kernel[0], s.kernel[1], oh, ow)
        return _col2im(dcols, x_shape[2:], s.stride, s.padding, s.dilation)


class ConvTranspose2d(Layer):
    """Adjoint of Conv2d; weight layout is (in_channels, out_channels, kh, kw)."""

    def __init__(self, in_channels: int, spec: ConvSpec,
                 rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        if not spec.transposed:
            raise ConfigError("ConvTranspose2d requires a transposed ConvSpec")
        self.in_channels = in_channels
        self.spec = spec
        kh, kw = spec.kernel
        rng = rng or np.random.default_rng(0)
        self.params["weight"] = kaiming_uniform(
            (in_channels, spec.out_channels, kh, kw), spec.out_channels * kh * kw, rng, dtype)
        self.params["bias"] = np.zeros(spec.out_channels, dtype=dtype)
        self.zero_grads()

    def _out_hw(self, x):
        s = self.spec
        oh = conv_transpose_out_size(x.shape[2], s.kernel[0], s.stride[0], s.padding[0],
                                     s.dilation[0], s.out_padding[0])
        ow = conv_transpose_out_size(x.shape[3], s.kernel[1], s.stride[1], s.padding[1],
                                     s.dilation[1], s.out_padding[1])
        if oh < 1 or ow < 1:
            raise ShapeError(f"transposed conv output size ({oh}, {ow}) < 1 for input {x.shape}")
        return oh, ow

    def forward(self, x, train=False):
        if x.shape[1] != self.in_channels:
            raise ShapeError(
                f"transposed conv expects {self.in_channels} input channels, "
                f"got input shape {x.shape}")
        s = self.spec
        out_hw = self._out_hw(x)
        b, _, h, w = x.shape
        kh, kw = s.kernel
        okk = s.out_channels * kh * kw
        w2 = self.params["weight"].reshape(self.in_channels, okk)
        x2 = x.reshape(b, self.in_channels, h * w)
        cols = np.matmul(w2.T[None], x2).reshape(b, s.out_channels, kh, kw, h, w)
        out = _col2im(cols, out_hw, s.stride, s.padding, s.dilation)
        out += self.params["bias"][None, :, None, None]
        self._cache = (x2, (h, w))
        return out

    def backward(self, dout):
        x2, in_hw = self._require_cache()
        s = self.spec
        b = dout.shape[0]
        kh, kw = s.kernel
        okk = s.out_channels * kh * kw
        self.grads["bias"] += dout.sum(axis=(0, 2, 3))
        dcols = _im2col(dout, s.kernel, s.stride, s.padding, s.dilation, in_hw)
        dcols2 = dcols.reshape(b, okk, in_hw[0] * in_hw[1])
        self.grads["weight"] += np.matmul(
            x2, dcols2.transpose(0, 2, 1)).sum(axis=0).reshape(self.params["weight"].shape)
        w2 = self.params["weight"].reshape(self.in_channels, okk)
        dx = np.matmul(w2[None], dcols2)
        return dx.reshape(b, self.in_channels, in_hw[0], in_hw[1])


class FreqBatchNorm(Layer):
    """Batch norm whose statistics pool over batch, channel, and time per band."""

    _POOL_AXES = (0, 1, 3)

    def __init__(self, bands: int, eps: float = 1e-5, momentum: float = 0.1,
                 dtype=np.float32):
        super().__init__()
        self.bands = bands
        self.eps = eps
        self.momentum = momentum
        self.params["gamma"] = np.ones(bands, dtype=dtype)
        self.params["beta"] = np.zeros(bands, dtype=dtype)
        self.running_mean = np.zeros(bands, dtype=dtype)
        self.running_var = np.ones(bands, dtype=dtype)
        self.zero_grads()

    def _check(self, x):
        if x.shape[2] != self.bands:
            raise ShapeError(f"FreqBN sized for {self.bands} bands, got input shape {x.shape}")

    def forward(self, x, train=False):
        self._check(x)
        if train:
            mean = x.mean(axis=self._POOL_AXES)
            var = x.var(axis=self._POOL_AXES)
            n = x.shape[0] * x.shape[1] * x.shape[3]
            unbiased = var * (n / (n - 1)) if n > 1 else var
            m = self.momentum
            self.running_mean = ((1 - m) * self.running_mean + m * mean).astype(
                self.running_mean.dtype)
            self.running_var = ((1 - m) * self.running_var + m * unbiased).astype(
                self.running_var.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, None, :, None]) * inv_std[None, None, :, None]
        out = (self.params["gamma"][None, None, :, None] * xhat
               + self.params["beta"][None, None, :, None])
        self._cache = (xhat, inv_std, train)
        return out

    def backward(self, dout):
        xhat, inv_std, train = self._require_cache()
        g = self.params["gamma"][None, None, :, None]
        self.grads["gamma"] += (dout * xhat).sum(axis=self._POOL_AXES)
        self.grads["beta"] += dout.sum(axis=self._POOL_AXES)
        dxhat = dout * g
        if not train:
            return dxhat * inv_std[None, None, :, None]
        n = dout.shape[0] * dout.shape[1] * dout.shape[3]
        sum_dxhat = dxhat.sum(axis=self._POOL_AXES, keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=self._POOL_AXES, keepdims=True)
        return (inv_std[None, None, :, None] / n) * (
            n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)


class Activation(Layer):
    KINDS = ("leaky-relu", "relu", "sigmoid", "tanh")

    def __init__(self, kind: str, slope: float = 0.2):
        super().__init__()
        if kind not in self.KINDS:
            raise ConfigError(f"unknown activation {kind!r}; expected one of {self.KINDS}")
        self.kind = kind
        self.slope = slope

    def forward(self, x, train=False):
        if self.kind == "relu":
            out = np.maximum(x, 0.0)
            self._cache = x > 0
        elif self.kind == "leaky-relu":
            pos = x > 0
            out = np.where(pos, x, self.slope * x)
            self._cache = pos
        elif self.kind == "sigmoid":
            # stable form: the exponent is always non-positive
            pos = x >= 0
            z = np.exp(np.where(pos, -x, x))
            out = np.where(pos, 1.0 / (1.0 + z), z / (1.0 + z))
            self._cache = out
        else:  # tanh
            out = np.tanh(x)
            self._cache = out
        return out

    def backward(self, dout):
        cache = self._require_cache()
        if self.kind == "relu":
            return dout * cache
        if self.kind == "leaky-relu":
            return dout * np.where(cache, 1.0, self.slope)
        if self.kind == "sigmoid":
            return dout * cache * (1.0 - cache)
        return dout * (1.0 - cache * cache)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Elementwise-sum L1 norm of the error."""
    if pred.shape != target.shape:
        raise ShapeError(f"L1 loss shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.abs(pred - target).sum())


def l1_loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Subgradient w.r.t. pred, with sign(0) = 0."""
    return np.sign(pred - target)
