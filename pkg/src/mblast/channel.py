"""Random MIMO channel and noise generation with explicit SNR bookkeeping.

The average received SNR at any receive antenna is

    gamma = (E_s / sigma_v^2) * M * sigma_h^2,

so fixing gamma and the symbol energy determines the noise variance.  All
draws consume a caller-owned ``numpy.random.Generator``; there is no hidden
global stream.

Scaling convention for outage work: the layer-wise outage statistics are
stated against a standard chi-square law for ``||h_j||^2`` with ``2N``
degrees of freedom, which requires unit variance per real dimension, i.e.
entries ``CN(0, 2)``.  Use ``sigma_h_sq=2.0`` for those runs; symbol error
rate experiments use the conventional ``sigma_h_sq=1.0``.  Mixing the two
conventions shifts outage curves by a factor of two in x.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelConfig",
    "LinkBudget",
    "draw_channel",
    "transmit",
    "noise_variance_for_snr",
]


@dataclass(frozen=True)
class ChannelConfig:
    """Antenna geometry and fading model for one simulated link.

    ``fading`` is "rayleigh" or "rician" (with factor ``rician_k``).  Setting
    either correlation coefficient nonzero applies the Kronecker model with
    exponential correlation matrices ``[R]_{mn} = rho^|m-n|``.  For Rician
    fading the correlation shapes the scattered part only; the line-of-sight
    matrix is all-ones (unit modulus, zero phase).
    """

    tx: int
    rx: int
    fading: str = "rayleigh"
    rician_k: float = 0.0
    sigma_h_sq: float = 1.0
    corr_rho_tx: float = 0.0
    corr_rho_rx: float = 0.0

    def __post_init__(self):
        if not (self.rx >= self.tx >= 1):
            raise ValueError("need rx >= tx >= 1 for full-column-rank channels")
        if self.fading not in ("rayleigh", "rician"):
            raise ValueError(f"unknown fading model {self.fading!r}")
        if self.rician_k < 0:
            raise ValueError("rician_k must be >= 0")
        if not self.sigma_h_sq > 0:
            raise ValueError("sigma_h_sq must be positive")
        for rho in (self.corr_rho_tx, self.corr_rho_rx):
            if not 0.0 <= rho < 1.0:
                raise ValueError("correlation coefficients must lie in [0, 1)")


@dataclass(frozen=True)
class LinkBudget:
    """Symbol energy, noise variance, and the average SNR they imply."""

    symbol_energy: float
    noise_variance: float
    avg_snr: float

    def __post_init__(self):
        if min(self.symbol_energy, self.noise_variance, self.avg_snr) <= 0:
            raise ValueError("all link budget quantities must be positive")

    @classmethod
    def from_snr_db(cls, snr_db, symbol_energy, tx, sigma_h_sq):
        nv = noise_variance_for_snr(snr_db, symbol_energy, tx, sigma_h_sq)
        return cls(
            symbol_energy=symbol_energy,
            noise_variance=nv,
            avg_snr=symbol_energy * tx * sigma_h_sq / nv,
        )


def noise_variance_for_snr(snr_db, symbol_energy, tx, sigma_h_sq):
    """Noise variance giving average received SNR ``snr_db`` (dB) per antenna."""
    if symbol_energy <= 0 or tx < 1 or sigma_h_sq <= 0:
        raise ValueError("symbol_energy, tx, sigma_h_sq must be positive")
    return symbol_energy * tx * sigma_h_sq / (10.0 ** (snr_db / 10.0))


def _exp_corr_cholesky(n, rho):
    idx = np.arange(n)
    R = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(R)


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channel(cfg, rng, count=None):
    """Draw channel matrices, shape ``(rx, tx)`` or ``(count, rx, tx)``.

    Rayleigh entries are iid ``CN(0, sigma_h_sq)``.  Rician mixes a fixed
    all-ones line-of-sight matrix with a scattered part so that the total
    per-entry power stays ``sigma_h_sq``; Kronecker correlation, when
    configured, is applied to the scattered part only.
    """
    shape = (cfg.rx, cfg.tx) if count is None else (int(count), cfg.rx, cfg.tx)
    H = _complex_normal(rng, shape)
    if cfg.corr_rho_rx > 0.0:
        H = np.einsum("ij,...jm->...im", _exp_corr_cholesky(cfg.rx, cfg.corr_rho_rx), H)
    if cfg.corr_rho_tx > 0.0:
        Lt = _exp_corr_cholesky(cfg.tx, cfg.corr_rho_tx)
        H = np.einsum("...ij,kj->...ik", H, Lt.conj())
    if cfg.fading == "rician":
        k = cfg.rician_k
        H = np.sqrt(k / (k + 1.0)) + np.sqrt(1.0 / (k + 1.0)) * H
    return np.sqrt(cfg.sigma_h_sq) * H


def transmit(H, x, noise_variance, rng):
    """Received vector(s) ``r = H x + v`` with ``v ~ CN(0, noise_variance I)``.

    Accepts a single ``(N, M)`` / ``(M,)`` pair or batched ``(B, N, M)`` /
    ``(B, M)`` arrays.
    """
    H = np.asarray(H, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if noise_variance < 0:
        raise ValueError("noise variance must be >= 0")
    if H.ndim == 2:
        hx = H @ x
    else:
        hx = np.einsum("bnm,bm->bn", H, x)
    v = np.sqrt(noise_variance) * _complex_normal(rng, hx.shape)
    return hx + v
