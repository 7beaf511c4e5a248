"""Irregular incident waves: JONSWAP spectrum, random-phase components,
finite-depth dispersion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

G = 9.81


@dataclass(frozen=True)
class WaveCondition:
    Hs: float = 0.18
    Tp: float = 2.0
    depth: float = 0.8
    gamma: float = 3.3
    n_components: int = 200
    seed: int = 0
    # spectral band as multiples of the peak frequency
    band_lo: float = 0.5
    band_hi: float = 3.5

    def __post_init__(self):
        if self.Hs <= 0 or self.Tp <= 0 or self.depth <= 0:
            raise ValueError("Hs, Tp and depth must be positive")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.n_components < 1:
            raise ValueError("need at least one wave component")
        if not 0 < self.band_lo < 1 < self.band_hi:
            raise ValueError("spectral band must bracket the peak")


@dataclass(frozen=True)
class WaveComponents:
    amplitude: np.ndarray
    omega: np.ndarray
    k: np.ndarray
    phase: np.ndarray

    def __len__(self) -> int:
        return len(self.amplitude)

    def __getitem__(self, j):
        return (self.amplitude[j], self.omega[j], self.k[j], self.phase[j])

    def scaled(self, factor) -> "WaveComponents":
        return WaveComponents(self.amplitude * factor, self.omega, self.k, self.phase)


def jonswap(omega, Tp: float, gamma: float = 3.3) -> np.ndarray:
    """Unnormalised JONSWAP shape; callers rescale to the target Hs."""
    omega = np.asarray(omega, dtype=float)
    wp = 2.0 * np.pi / Tp
    sigma = np.where(omega <= wp, 0.07, 0.09)
    r = np.exp(-((omega - wp) ** 2) / (2.0 * sigma**2 * wp**2))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        s = G**2 * omega**-5.0 * np.exp(-1.25 * (wp / omega) ** 4) * gamma**r
    return np.where(omega > 0, s, 0.0)


def wavenumber(omega, depth: float, max_iter: int = 400) -> np.ndarray:
    """Solve omega^2 = g k tanh(k depth) for k by bisection (vectorised).

    Bisection runs until the bracket cannot shrink further in float64, then
    the endpoint with the smaller residual is returned.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    target = omega**2
    lo = np.zeros_like(omega)
    # deep- and shallow-water estimates both bound the root from below
    hi = 2.0 * np.maximum(target / G, omega / np.sqrt(G * depth)) + 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        f = G * mid * np.tanh(mid * depth) - target
        lo = np.where(active & (f < 0), mid, lo)
        hi = np.where(active & (f >= 0), mid, hi)
    r_lo = dispersion_residual(omega, lo, depth)
    r_hi = dispersion_residual(omega, hi, depth)
    k = np.where(r_lo <= r_hi, lo, hi)
    k[omega == 0] = 0.0
    return k


def dispersion_residual(omega, k, depth: float) -> np.ndarray:
    return np.abs(np.asarray(omega) ** 2 - G * np.asarray(k) * np.tanh(np.asarray(k) * depth))


def synthesize_components(cond: WaveCondition) -> WaveComponents:
    """Random-phase components on a jittered frequency grid.

    Amplitudes are scaled so the zeroth spectral moment is exactly
    ``Hs**2 / 16``; jitter keeps the record from repeating.
    """
    rng = np.random.default_rng(cond.seed)
    wp = 2.0 * np.pi / cond.Tp
    lo, hi = cond.band_lo * wp, cond.band_hi * wp
    n = cond.n_components
    dw = (hi - lo) / n
    omega = lo + (np.arange(n) + rng.uniform(0.0, 1.0, n)) * dw
    phase = rng.uniform(0.0, 2.0 * np.pi, n)
    amp = np.sqrt(2.0 * jonswap(omega, cond.Tp, cond.gamma) * dw)
    m0 = 0.5 * np.sum(amp**2)
    amp *= np.sqrt(cond.Hs**2 / 16.0 / m0)
    return WaveComponents(amp, omega, wavenumber(omega, cond.depth), phase)


def surface_elevation(components: WaveComponents, x, t) -> np.ndarray:
    """Linear superposition sum a cos(k x - w t + phi); broadcasts over x and t."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x.shape, t.shape)
    xf = np.broadcast_to(x, shape).reshape(-1)
    tf = np.broadcast_to(t, shape).reshape(-1)
    out = np.empty(xf.size)
    step = 4096
    for s in range(0, xf.size, step):
        arg = (
            np.outer(xf[s:s + step], components.k)
            - np.outer(tf[s:s + step], components.omega)
            + components.phase
        )
        out[s:s + step] = np.cos(arg) @ components.amplitude
    return out.reshape(shape) if shape else out[0]


def phasor_series(components: WaveComponents, coeff: np.ndarray, t) -> np.ndarray:
    """Evaluate Re(sum_j coeff_j exp(-i w_j t)) for complex per-component coefficients."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    coeff = np.asarray(coeff)
    out = np.empty((t.size,) + coeff.shape[1:])
    step = 4096
    for s in range(0, t.size, step):
        ph = np.exp(-1j * np.outer(t[s:s + step], components.omega))
        out[s:s + step] = (ph @ coeff).real
    return out


def phasor_series_uniform(components: WaveComponents, coeff: np.ndarray, t0: float, step: float, n: int,
                          block: int = 2048) -> np.ndarray:
    """:func:`phasor_series` on the clock ``t0 + step * arange(n)``.

    Each block of times reuses one table of per-step rotations, so only a
    handful of complex exponentials are evaluated per block.
    """
    coeff = np.asarray(coeff)
    w = components.omega
    rot = np.exp(-1j * np.outer(np.arange(block) * step, w))
    out = np.empty((n,) + coeff.shape[1:])
    for s in range(0, n, block):
        m = min(block, n - s)
        base = np.exp(-1j * w * (t0 + s * step))
        out[s:s + m] = ((rot[:m] * base) @ coeff).real
    return out
