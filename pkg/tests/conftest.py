"""Shared oracles and helpers for the test suite.

Everything here is deliberately naive (loops, O(n^2) transforms) so it can
serve as an independent reference for the vectorized library code.
"""

from __future__ import annotations

import struct
from typing import Dict, List, Sequence, Tuple

import numpy as np


# -- naive DFT oracle ---------------------------------------------------------


def naive_dft(x: np.ndarray) -> np.ndarray:
    """O(n^2) DFT by direct summation; oracle for anything FFT-based."""
    n = len(x)
    k = np.arange(n)
    out = np.empty(n, dtype=complex)
    for f in range(n):
        out[f] = np.sum(x * np.exp(-2j * np.pi * f * k / n))
    return out


# -- naive convolution oracles ------------------------------------------------


def naive_conv2d(x, weight, bias, stride, padding, dilation):
    """Direct-loop cross-correlation; oracle for Conv2d.forward."""
    b, c, h, w = x.shape
    o, _, kh, kw = weight.shape
    sh, sw = stride
    ph, pw = padding
    dh, dw = dilation
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    oh = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    ow = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    out = np.zeros((b, o, oh, ow))
    for bi in range(b):
        for oc in range(o):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ic in range(c):
                        for ki in range(kh):
                            for kj in range(kw):
                                acc += (xp[bi, ic, i * sh + ki * dh, j * sw + kj * dw]
                                        * weight[oc, ic, ki, kj])
                    out[bi, oc, i, j] = acc + bias[oc]
    return out


def naive_conv_transpose2d(x, weight, bias, stride, padding, dilation, out_padding):
    """Direct scatter-add; oracle for ConvTranspose2d.forward.

    weight layout (in_channels, out_channels, kh, kw).
    """
    b, c, h, w = x.shape
    _, o, kh, kw = weight.shape
    sh, sw = stride
    ph, pw = padding
    dh, dw = dilation
    oph, opw = out_padding
    oh = (h - 1) * sh - 2 * ph + dh * (kh - 1) + 1 + oph
    ow = (w - 1) * sw - 2 * pw + dw * (kw - 1) + 1 + opw
    full = np.zeros((b, o, oh + 2 * ph, ow + 2 * pw))
    for bi in range(b):
        for ic in range(c):
            for i in range(h):
                for j in range(w):
                    v = x[bi, ic, i, j]
                    for oc in range(o):
                        for ki in range(kh):
                            for kj in range(kw):
                                full[bi, oc, i * sh + ki * dh, j * sw + kj * dw] += (
                                    v * weight[ic, oc, ki, kj])
    out = full[:, :, ph:ph + oh, pw:pw + ow]
    return out + bias[None, :, None, None]


# -- finite-difference gradient check -----------------------------------------


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a.ravel()), np.linalg.norm(b.ravel()), 1e-12)
    return float(np.linalg.norm((a - b).ravel()) / denom)


def check_layer_gradients(layer, x: np.ndarray, rng, tol: float = 1e-4,
                          h: float = 1e-5) -> float:
    """FD-check d(loss)/d(input) and every parameter of a layer.

    loss = sum(forward(x) * r) for a fixed random r, so d(loss)/d(out) = r.
    Returns the worst relative error observed.
    """
    out = layer.forward(x, train=True)
    r = rng.standard_normal(out.shape)

    def loss():
        return float(np.sum(layer.forward(x, train=True) * r))

    layer.forward(x, train=True)
    layer.zero_grads()
    dx = layer.backward(r)
    worst = rel_err(dx, numeric_grad(loss, x, h))
    for name, p in layer.params.items():
        worst = max(worst, rel_err(layer.grads[name], numeric_grad(loss, p, h)))
    return worst


# -- minimal Standard MIDI File writer (test-side oracle) ---------------------


def varlen(value: int) -> bytes:
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def midi_track(events: Sequence[tuple]) -> bytes:
    """events: (delta_ticks, message_bytes) pairs; end-of-track appended."""
    body = b"".join(varlen(d) + bytes(msg) for d, msg in events)
    body += varlen(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + body


def midi_file(tracks: Sequence[bytes], fmt: int = 1, division: int = 480) -> bytes:
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division)
    return header + b"".join(tracks)


def note_on(pitch: int, velocity: int, channel: int = 9) -> bytes:
    return bytes((0x90 | channel, pitch, velocity))


def tempo_meta(us_per_quarter: int) -> bytes:
    return b"\xff\x51\x03" + us_per_quarter.to_bytes(3, "big")
