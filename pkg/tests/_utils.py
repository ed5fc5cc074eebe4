"""Shared test helpers: deterministic fields and fixed-noise-path runners."""

import numpy as np

from sdnlw.noise import NoiseIncrement, sample_increment
from sdnlw.spectral import zero_field, zero_pair


def cosine_field(N: int, k=(1, 0), amplitude: float = 1.0) -> np.ndarray:
    """amplitude * cos(2 pi k.x) as coefficients (modes +-k with weight 1/2)."""
    c = zero_field(N)
    c[N + k[0], N + k[1]] = 0.5 * amplitude
    c[N - k[0], N - k[1]] = 0.5 * amplitude
    return c


def cosine_pair(N: int, k=(1, 0), amplitude: float = 1.0,
                component: int = 0) -> np.ndarray:
    p = zero_pair(N)
    p[component] = cosine_field(N, k, amplitude)
    return p


def fine_increments(N: int, delta: float, n_steps: int, seed: int) -> list:
    return [sample_increment(N, delta, seed, k).coeffs for k in range(n_steps)]


def coarsen(fine: list, ratio: int, delta: float) -> list:
    """Sum consecutive fine white-noise increments into coarse ones."""
    out = []
    for k in range(len(fine) // ratio):
        c = fine[k * ratio]
        for j in range(1, ratio):
            c = c + fine[k * ratio + j]
        out.append(NoiseIncrement(c, delta))
    return out


def zero_increments(N: int, delta: float, n_steps: int) -> list:
    return [NoiseIncrement(zero_field(N), delta) for _ in range(n_steps)]
