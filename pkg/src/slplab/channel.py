"""Channel and noise sampling plus the downlink signal model y = Hx + n.

Randomness is always drawn from an explicit stream derived from a master
seed and a stream id, so trials can run concurrently yet reproduce the
single-threaded draws bit for bit.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for (seed, stream); identical arguments reproduce draws."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def sample_rayleigh(k: int, nt: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0,1) channel matrix of shape (k, nt)."""
    if k < 1 or nt < 1:
        raise DimensionMismatch(f"need K, Nt >= 1, got ({k}, {nt})")
    g = rng.standard_normal((2, k, nt))
    return (g[0] + 1j * g[1]) / np.sqrt(2)


def transmit(H: np.ndarray, x: np.ndarray, sigma2: float,
             rng: np.random.Generator | None = None) -> np.ndarray:
    """Received vector(s) y = Hx + n with per-user noise variance sigma2.

    x may be a single (Nt,) vector or an (Nt, S) batch of symbol slots.
    sigma2 == 0 skips the noise draw entirely (noiseless evaluation).
    """
    H = np.asarray(H)
    x = np.asarray(x)
    if H.ndim != 2 or x.shape[0] != H.shape[1]:
        raise DimensionMismatch(f"H is {H.shape}, x is {x.shape}")
    y = H @ x
    if sigma2 > 0:
        if rng is None:
            raise ValueError("rng required when sigma2 > 0")
        g = rng.standard_normal((2,) + y.shape)
        y = y + np.sqrt(sigma2 / 2) * (g[0] + 1j * g[1])
    return y


def save_channel_csv(path, H: np.ndarray) -> None:
    """Dump a channel matrix as CSV: K rows of interleaved re,im entries."""
    H = np.asarray(H)
    inter = np.empty((H.shape[0], 2 * H.shape[1]))
    inter[:, 0::2] = H.real
    inter[:, 1::2] = H.imag
    with open(path, "w") as f:
        for row in inter:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_channel_csv(path) -> np.ndarray:
    """Inverse of save_channel_csv."""
    inter = np.loadtxt(path, delimiter=",", ndmin=2)
    return inter[:, 0::2] + 1j * inter[:, 1::2]
