"""Built-in cross-validation suite (the CLI ``validate`` subcommand).

Each check pits two independent computation routes against each other:
closed forms against quadrature, the layered detector against the two-stream
ordering statistic, nulling norms against Gram-inverse diagonals, and the
degenerate SNR-ordered outage forms against their chi-square identities.

``inject_fault`` flips a sign inside a designated check's closed-form route;
it exists so the harness itself can be shown to catch a regression.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import detectors, linalg, modulation, outage, stats

__all__ = ["CheckResult", "run_validation", "FAULT_MODES"]

FAULT_MODES = ("pu-sign",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _check_pu_closed_vs_numeric(fault):
    worst = 0.0
    for n in (3, 10):
        for u in (0.1, 0.9, 2.5):
            for a in (0.5, 8.0, 30.0):
                closed = outage.prob_P_closed(n, u, a)
                if fault == "pu-sign":
                    closed = outage.chi2_cdf(n, a) + (closed - outage.chi2_cdf(n, a)) * -1.0
                worst = max(worst, abs(closed - outage.prob_P_numeric(n, u, a)))
    return worst <= 1e-8, f"max |closed - numeric| = {worst:.2e} (tol 1e-8)"


def _check_degenerate_identities(fault):
    xs = np.linspace(0.2, 60.0, 50)
    n = 10
    fx = outage.chi2_cdf(n, xs)
    d1 = np.max(np.abs(outage.f1_tilde(None, n, xs) - fx * fx))
    d2 = np.max(np.abs(outage.f2(None, n, xs) - (2.0 * fx - fx * fx)))
    worst = max(d1, d2)
    return worst <= 1e-12, f"max deviation = {worst:.2e} (tol 1e-12)"


def _check_pdf_normalizations(fault):
    from scipy.integrate import quad

    worst = 0.0
    for mod, snr_db in (("bpsk", -5.0), ("bfsk", 5.0)):
        model = stats.RatioModel.for_link(mod, 10, 10 ** (snr_db / 10.0))
        lo = model.mu - 12 * model.sigma
        hi = model.mu + 12 * model.sigma
        ip, _ = quad(lambda x: stats.pdf_uj_perfect(model, x), lo, hi,
                     epsabs=1e-12, limit=200)
        ii, _ = quad(lambda x: stats.pdf_uj_imperfect(model, x), 0.0, hi,
                     epsabs=1e-12, limit=200)
        # The ratio density has algebraic 1/u^2 tails; compactify the real
        # line exactly with u = tan(t) before integrating.
        ir, _ = quad(
            lambda t: stats.pdf_ratio_exact(model, np.tan(t)) / np.cos(t) ** 2,
            -np.pi / 2, np.pi / 2,
            points=[np.arctan(1.0)], epsabs=1e-12, limit=400,
        )
        worst = max(worst, abs(ip - 1.0), abs(ii - 1.0), abs(ir - 1.0))
    return worst <= 1e-6, f"max |integral - 1| = {worst:.2e} (tol 1e-6)"


def _check_ordering_equivalence(fault):
    rng = np.random.default_rng(20240817)
    mismatches = 0
    trials = 10_000
    for mod in ("bpsk", "bfsk"):
        alphabet = modulation.bpsk() if mod == "bpsk" else modulation.bfsk()
        noise_var = alphabet.symbol_energy * 2 * 2.0 / 1.0  # 0 dB, entries CN(0,2)
        H = np.sqrt(2.0 / 2.0) * (rng.standard_normal((trials, 10, 2))
                                  + 1j * rng.standard_normal((trials, 10, 2)))
        x = alphabet.points[rng.integers(0, 2, (trials, 2))]
        v = np.sqrt(noise_var / 2.0) * (rng.standard_normal((trials, 10))
                                        + 1j * rng.standard_normal((trials, 10)))
        r = np.einsum("bnm,bm->bn", H, x) + v
        res = detectors.mblast_batch(H, r, alphabet, noise_var, max_layers=1)
        events = detectors.ordering_events(H, res.first_layer["y"],
                                           res.first_layer["s"], alphabet)
        mismatches += int(np.sum(res.order[:, 0] != events - 1))
    return mismatches == 0, f"{mismatches} mismatches over {2 * trials} draws"


def _check_nulling_identity(fault):
    rng = np.random.default_rng(5151)
    worst = 0.0
    for _ in range(100):
        H = rng.standard_normal((10, 4)) + 1j * rng.standard_normal((10, 4))
        diag = linalg.gram_inverse_diagonal(H)
        for j in range(4):
            perp = linalg.null_component(H, j)
            worst = max(worst, abs(diag[j] * np.sum(np.abs(perp) ** 2) - 1.0))
    return worst <= 1e-9, f"max |diag * perp_norm_sq - 1| = {worst:.2e} (tol 1e-9)"


_CHECKS = (
    ("P(u,a) closed form vs quadrature", _check_pu_closed_vs_numeric),
    ("degenerate SNR-ordered outage identities", _check_degenerate_identities),
    ("analytical pdf normalizations", _check_pdf_normalizations),
    ("layer-1 ordering rule vs two-stream statistic", _check_ordering_equivalence),
    ("Gram-inverse diagonal vs null component", _check_nulling_identity),
)


def run_validation(inject_fault=None):
    """Run all cross-checks; returns a list of CheckResult."""
    if inject_fault is not None and inject_fault not in FAULT_MODES:
        raise ValueError(f"unknown fault mode {inject_fault!r}")
    results = []
    for name, fn in _CHECKS:
        t0 = time.perf_counter()
        try:
            passed, detail = fn(inject_fault)
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, detail, time.perf_counter() - t0))
    return results
