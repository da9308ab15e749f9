"""Distributions of the first-layer decision statistics and their ratio.

For two transmit streams and a binary alphabet, the subchannel picked first
is decided by comparing ``||h_j||^2 * u_j`` across the two streams, where
``u_j`` is a decision-dependent scalar built from the nulled observation.
This module provides:

* the average post-nulling noise scale ``sigma_bar^2 = M E_s / ((N-M+1) gamma)``,
* the Gaussian laws of ``u_j`` under perfect and actual (minimum-distance)
  tentative decisions,
* the exact density of the ratio ``u = u_2/u_1`` of two iid ``N(mu, sigma^2)``
  variables, parameterized solely by ``c = mu/sigma``, together with its
  low-SNR (Cauchy-like) and high-SNR approximations,
* the sign-agreement coefficient ``beta`` entering the outage integrals, and
* a channel-level Monte Carlo sampler of ``(u_1, u_2)`` pairs.

The number of transmit streams is fixed at two throughout; the receive count
``N`` is free.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import modulation
from .channel import ChannelConfig, draw_channel, transmit
from .detectors import decision_statistic

__all__ = [
    "sigma_bar_sq",
    "RatioModel",
    "pdf_uj_perfect",
    "pdf_uj_imperfect",
    "pdf_ratio_exact",
    "pdf_ratio_high_snr",
    "pdf_ratio_low_snr",
    "beta_coefficient",
    "positive_mass",
    "simulate_uj",
]

_SQRT2 = np.sqrt(2.0)
# Square-norm convention for the chi-square outage laws: unit variance per
# real dimension, i.e. channel entries CN(0, 2).
SIM_SIGMA_H_SQ = 2.0


def sigma_bar_sq(tx, rx, symbol_energy, snr_linear):
    """Average post-nulling noise variance ``M E_s / ((N - M + 1) gamma)``."""
    if not (rx >= tx >= 1):
        raise ValueError("need rx >= tx >= 1")
    if symbol_energy <= 0 or snr_linear <= 0:
        raise ValueError("symbol_energy and snr_linear must be positive")
    return tx * symbol_energy / ((rx - tx + 1) * snr_linear)


def _norm_cdf(x):
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=float) / _SQRT2))


@dataclass(frozen=True)
class RatioModel:
    """Gaussian model of the decision statistic ``u_j`` for one binary modulation.

    ``modulation`` is "bpsk" or "bfsk" with first point ``a1`` (real positive).
    ``noise_scale_sq`` is sigma_bar^2.  The statistic is modeled as
    ``N(mu, sigma^2)`` with (mu, sigma^2) = (a1, sigma_bar^2/2) for BPSK and
    (a1^2, a1^2 sigma_bar^2) for BFSK; the single ratio parameter is
    ``c = mu/sigma``.
    """

    modulation: str
    a1: float
    noise_scale_sq: float

    def __post_init__(self):
        if self.modulation not in ("bpsk", "bfsk"):
            raise ValueError("modulation must be 'bpsk' or 'bfsk'")
        if self.a1 <= 0 or self.noise_scale_sq <= 0:
            raise ValueError("a1 and noise_scale_sq must be positive")

    @classmethod
    def for_link(cls, mod, n_rx, snr_linear, a1=1.0):
        """Model at receive count ``n_rx`` and average SNR (linear), two streams."""
        sb2 = sigma_bar_sq(2, n_rx, a1 * a1, snr_linear)
        return cls(modulation=mod, a1=a1, noise_scale_sq=sb2)

    @property
    def mu(self):
        return self.a1 if self.modulation == "bpsk" else self.a1**2

    @property
    def var(self):
        if self.modulation == "bpsk":
            return self.noise_scale_sq / 2.0
        return self.a1**2 * self.noise_scale_sq

    @property
    def sigma(self):
        return float(np.sqrt(self.var))

    @property
    def c(self):
        return self.mu / self.sigma


def _gauss(x, mu, var):
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - mu) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def pdf_uj_perfect(model, x):
    """Density of ``u_j`` when tentative decisions equal the sent symbols."""
    return _gauss(x, model.mu, model.var)


def pdf_uj_imperfect(model, x):
    """Density of ``u_j`` under actual minimum-distance tentative decisions.

    The statistic is then a folded value, supported on x >= 0; the density is
    the Gaussian law times ``1 + exp(-4 a1 x / sigma_bar^2)`` (BPSK) or
    ``1 + exp(-2 x / sigma_bar^2)`` (BFSK) on that support and zero below it.
    Evaluated as the sum of the two mirrored Gaussian lobes, which is the same
    function without large exponentials.
    """
    x = np.asarray(x, dtype=float)
    lobes = _gauss(x, model.mu, model.var) + _gauss(x, -model.mu, model.var)
    out = np.where(x >= 0, lobes, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _cauchy(u):
    return 1.0 / (np.pi * (1.0 + u * u))


def pdf_ratio_exact(model, u):
    """Exact density of the ratio of two iid ``N(mu, sigma^2)`` variables.

    Only ``c = mu/sigma`` enters:

        f(u) = c/sqrt(2 pi) * (1+u)/(1+u^2)^(3/2)
               * exp(-c^2/2 * (1-u)^2/(1+u^2)) * dPhi(c (1+u)/sqrt(1+u^2))
               + exp(-c^2) * cauchy(u),

    with dPhi(z) = Phi(z) - Phi(-z).
    """
    return _ratio_pdf_exact(model.c, u)


def _ratio_pdf_exact(c, u):
    u = np.asarray(u, dtype=float)
    q = 1.0 + u * u
    z = c * (1.0 + u) / np.sqrt(q)
    dphi = erf(z / _SQRT2)
    main = (
        c
        / np.sqrt(2.0 * np.pi)
        * (1.0 + u)
        / q**1.5
        * np.exp(-0.5 * c * c * (1.0 - u) ** 2 / q)
        * dphi
    )
    return main + np.exp(-c * c) * _cauchy(u)


def pdf_ratio_high_snr(model, u):
    """High-SNR (c >> 1) approximation ``c/(2 sqrt(pi)) (2-u) exp(...)``, clamped at u=2."""
    c = model.c
    u = np.asarray(u, dtype=float)
    q = 1.0 + u * u
    val = c / (2.0 * np.sqrt(np.pi)) * (2.0 - u) * np.exp(-0.5 * c * c * (1.0 - u) ** 2 / q)
    out = np.where(u > 2.0, 0.0, val)
    if out.ndim == 0:
        return float(out)
    return out


def pdf_ratio_low_snr(model, u):
    """Low-SNR (c << 1) approximation: damped Cauchy with a first-order correction."""
    c = model.c
    u = np.asarray(u, dtype=float)
    q = 1.0 + u * u
    return _cauchy(u) * np.exp(-c * c) * (1.0 + c * c * (1.0 + u) ** 2 / q)


def beta_coefficient(model):
    """Sign-agreement coefficient ``beta = 1 - 2 Phi(-c)``.

    Equals (P{u_j > 0})^2 - (P{u_j < 0})^2 under the independent Gaussian
    model; a constant of the model.
    """
    return float(1.0 - 2.0 * _norm_cdf(-model.c))


def positive_mass(model):
    """Mass of the ratio density on [0, inf): Phi(c)^2 + Phi(-c)^2.

    This is the probability that the two statistics share a sign; it is the
    normalizer used when the outage integrals restrict u to [0, inf).
    """
    p = _norm_cdf(model.c)
    return float(p * p + (1.0 - p) * (1.0 - p))


_SIM_CHUNK = 1 << 15


def simulate_uj(mod, n_rx, snr_linear, mode, count, rng, a1=1.0):
    """Sample ``(u_1, u_2)`` pairs from full channel simulation, shape (count, 2).

    Per trial: draw H (entries CN(0, 2)), symbols, and noise; null the
    interference at the first layer; form the per-stream statistics.
    ``mode`` is "perfect" (tentative decisions replaced by the sent symbols)
    or "imperfect" (minimum-distance decisions).  Chunked internally with a
    fixed chunk size, so output depends only on the stream state.
    """
    if mode not in ("perfect", "imperfect"):
        raise ValueError("mode must be 'perfect' or 'imperfect'")
    if count < 1:
        raise ValueError("count must be >= 1")
    alphabet = modulation.bpsk(a1) if mod == "bpsk" else modulation.bfsk(a1)
    cfg = ChannelConfig(tx=2, rx=n_rx, sigma_h_sq=SIM_SIGMA_H_SQ)
    noise_var = alphabet.symbol_energy * 2 * SIM_SIGMA_H_SQ / snr_linear
    out = np.empty((count, 2))
    done = 0
    while done < count:
        b = min(_SIM_CHUNK, count - done)
        H = draw_channel(cfg, rng, count=b)
        x = modulation.random_symbols(alphabet, 2 * b, rng).reshape(b, 2)
        r = transmit(H, x, noise_var, rng)
        # y1 = x + W1 v, computed as the least-squares solve pinv(H) r.
        q, rr = np.linalg.qr(H)
        y = np.linalg.solve(rr, np.einsum("bnm,bn->bm", q.conj(), r)[..., None])[..., 0]
        if mode == "perfect":
            s = x
        else:
            s = modulation.quantize(alphabet, y)
        out[done : done + b] = decision_statistic(alphabet, y, s)
        done += b
    return out
