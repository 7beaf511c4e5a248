"""Slow, obviously-correct reference implementations used only by the tests.

Nothing here imports the package: each oracle is written from the defining
formula with plain loops so that a shared bug cannot hide.
"""

from __future__ import annotations

import math

import numpy as np


def naive_matmul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def naive_rdft(x):
    """re[k] = sum x cos(2 pi k n / L), im[k] = -sum x sin(...), k = 0..L/2."""
    x = np.asarray(x, dtype=float)
    L = len(x)
    re = np.zeros(L // 2 + 1)
    im = np.zeros(L // 2 + 1)
    for k in range(L // 2 + 1):
        for n in range(L):
            ang = 2.0 * math.pi * k * n / L
            re[k] += x[n] * math.cos(ang)
            im[k] -= x[n] * math.sin(ang)
    return re, im


def naive_inverse_parts(x):
    """Split x into its cosine and sine parts through the full complex inverse DFT."""
    x = np.asarray(x, dtype=float)
    L = len(x)
    spec = [sum(x[n] * complex(math.cos(2 * math.pi * k * n / L), -math.sin(2 * math.pi * k * n / L))
                for n in range(L)) for k in range(L)]
    cos_part = np.zeros(L)
    sin_part = np.zeros(L)
    for n in range(L):
        for k in range(L):
            ang = 2 * math.pi * k * n / L
            cos_part[n] += spec[k].real * math.cos(ang) / L
            sin_part[n] -= spec[k].imag * math.sin(ang) / L
    return cos_part, sin_part


def metrics(y, yhat):
    """Mean squared / absolute / root-mean-square / mean absolute percentage error."""
    y = [float(v) for v in np.ravel(y)]
    p = [float(v) for v in np.ravel(yhat)]
    n = len(y)
    mse = sum((b - a) ** 2 for a, b in zip(y, p)) / n
    mae = sum(abs(b - a) for a, b in zip(y, p)) / n
    kept = [(a, b) for a, b in zip(y, p) if abs(a) >= 1e-8]
    mape = 100.0 * sum(abs((b - a) / a) for a, b in kept) / len(kept) if kept else None
    return mse, mae, math.sqrt(mse), mape


def softmax(row):
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


def central_difference(f, x, h=1e-5):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def rk2_oscillator_error(dt, t_end=2.0):
    """Global error of the midpoint rule on x'' = -x, x(0)=1, v(0)=0."""
    n = int(round(t_end / dt))
    x, v = 1.0, 0.0
    for _ in range(n):
        xm = x + 0.5 * dt * v
        vm = v - 0.5 * dt * x
        x, v = x + dt * vm, v - dt * xm
    return abs(x - math.cos(n * dt))
