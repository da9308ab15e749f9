"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured figure next to its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s``.  The full suite is
Monte Carlo heavy (several minutes); every test is seeded and deterministic.
"""

import time

import numpy as np
import pytest

from mblast import detectors
from mblast.channel import ChannelConfig
from mblast.linalg import gram_inverse_diagonal, null_component
from mblast.modulation import bfsk, bpsk, random_symbols
from mblast.montecarlo import (
    SimPlan,
    estimate_outage_empirical,
    run_ser_sweep,
)
from mblast.outage import (
    OutageQuery,
    chi2_cdf,
    f1,
    f1_tilde,
    f2,
    prob_P_closed,
    prob_P_limit,
    prob_P_numeric,
    prob_P_slope,
)
from mblast.stats import (
    RatioModel,
    pdf_ratio_exact,
    pdf_uj_imperfect,
    pdf_uj_perfect,
    simulate_uj,
)
from mblast.validation import run_validation

SEED = 20240817


def report(num, name, passed, detail):
    print(f"\nACCEPTANCE {num:>2} [{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"criterion {num} ({name}): {detail}"


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="module")
def uj_cache():
    """Shared channel-simulation samples keyed by (mod, snr_db, mode, pairs)."""
    import zlib

    cache = {}

    def get(mod, snr_db, mode, pairs):
        key = (mod, snr_db, mode, pairs)
        if key not in cache:
            rng = np.random.default_rng([SEED, zlib.crc32(repr(key).encode())])
            cache[key] = simulate_uj(mod, 10, 10.0 ** (snr_db / 10.0), mode,
                                     pairs, rng)
        return cache[key]

    return get


def l1_distance(samples, lo, hi, width, pdf):
    nbins = int(round((hi - lo) / width))
    counts, edges = np.histogram(samples, bins=nbins, range=(lo, hi))
    dens = counts / samples.size / np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return float(np.sum(np.abs(dens - pdf(centers)) * np.diff(edges)))


def test_c01_ordering_rule_equivalence():
    """Layer-1 pick of the layered detector == two-stream statistic, always."""
    t0 = time.time()
    rng = np.random.default_rng(SEED)
    mismatches = 0
    total = 0
    for alphabet in (bpsk(), bfsk()):
        for snr_db in (-5.0, 0.0, 5.0):
            trials = 100_000
            noise_var = alphabet.symbol_energy * 2 / 10.0 ** (snr_db / 10.0)
            H = crandn(rng, trials, 10, 2) / np.sqrt(2)
            x = random_symbols(alphabet, 2 * trials, rng).reshape(trials, 2)
            v = np.sqrt(noise_var / 2) * crandn(rng, trials, 10)
            r = np.einsum("bnm,bm->bn", H, x) + v
            res = detectors.mblast_batch(H, r, alphabet, noise_var, max_layers=1)
            events = detectors.ordering_events(
                H, res.first_layer["y"], res.first_layer["s"], alphabet
            )
            mismatches += int(np.sum(res.order[:, 0] != events - 1))
            total += trials
    report(1, "ordering-rule equivalence", mismatches == 0,
           f"{mismatches} mismatches over {total} draws "
           f"(2 mods x 3 SNRs x 1e5; {time.time() - t0:.0f}s)")


def test_c02_gram_inverse_identity():
    """diag((H^H H)^-1)_j * ||h_j_perp||^2 = 1 within 1e-9."""
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for m in (2, 4):
        for _ in range(500):
            H = crandn(rng, 10, m)
            d = gram_inverse_diagonal(H)
            for j in range(m):
                perp_sq = np.sum(np.abs(null_component(H, j)) ** 2)
                worst = max(worst, abs(d[j] * perp_sq - 1.0))
    report(2, "nulling-gain identity", worst <= 1e-9,
           f"max |deviation| = {worst:.2e} on 1000 matrices (tol 1e-9)")


def test_c03_pu_oracle_equivalence():
    """Closed P(u,a) vs quadrature, large-a limit, and slope vs differences."""
    t0 = time.time()
    worst_pn = 0.0
    for n in (3, 10, 20):
        for u in np.linspace(0.1, 5.0, 20):
            for a in np.linspace(0.5, 50.0, 20):
                worst_pn = max(worst_pn, abs(prob_P_closed(n, u, a)
                                             - prob_P_numeric(n, u, a)))
    worst_lim = 0.0
    for n in (3, 10, 20):
        for u in (0.1, 0.5, 1.0, 2.0, 5.0):
            worst_lim = max(worst_lim, abs(prob_P_closed(n, u, 50.0 * n)
                                           - prob_P_limit(n, u)))
    worst_slope = 0.0
    h = 1e-4
    for n in (3, 10, 20):
        for a in (2.0, 15.0, 40.0):
            fd = (prob_P_closed(n, 1 + h, a) - prob_P_closed(n, 1 - h, a)) / (2 * h)
            worst_slope = max(worst_slope, abs(prob_P_slope(n, a) - fd))
    ok = worst_pn <= 1e-8 and worst_lim <= 1e-7 and worst_slope <= 1e-5
    report(3, "P(u,a) oracle equivalence", ok,
           f"closed-vs-numeric {worst_pn:.2e} (tol 1e-8), "
           f"limit {worst_lim:.2e} (tol 1e-7), "
           f"slope-vs-FD {worst_slope:.2e} (tol 1e-5); {time.time() - t0:.0f}s")


def test_c04_snr_ordered_degenerate_identities():
    """Point mass u=1, beta=1 collapses the outage forms to chi-square identities."""
    xs = np.linspace(0.2, 90.0, 100)
    fx = chi2_cdf(10, xs)
    d1 = float(np.max(np.abs(f1_tilde(None, 10, xs) - fx * fx)))
    d2 = float(np.max(np.abs(f2(None, 10, xs) - (2 * fx - fx * fx))))
    ok = d1 <= 1e-12 and d2 <= 1e-12
    report(4, "SNR-ordered degenerate identities", ok,
           f"|ft1 - F^2| = {d1:.2e}, |F2 - (2F - F^2)| = {d2:.2e} (tol 1e-12)")


def test_c05_decision_statistic_pdfs(uj_cache):
    """Histograms of u_j vs the Gaussian / folded laws, L1 <= 0.05."""
    t0 = time.time()
    results = []
    for mod, snr_db in (("bpsk", -5.0), ("bpsk", 0.0), ("bfsk", 0.0),
                        ("bfsk", 5.0)):
        model = RatioModel.for_link(mod, 10, 10.0 ** (snr_db / 10.0))
        for mode in ("perfect", "imperfect"):
            u = uj_cache(mod, snr_db, mode, 500_000).ravel()
            if mode == "perfect":
                lo, hi = model.mu - 5 * model.sigma, model.mu + 5 * model.sigma
                pdf = lambda x, m=model: pdf_uj_perfect(m, x)
            else:
                lo, hi = 0.0, model.mu + 5 * model.sigma
                pdf = lambda x, m=model: pdf_uj_imperfect(m, x)
            l1 = l1_distance(u, lo, hi, 0.05, pdf)
            results.append((mod, snr_db, mode, l1))
    worst = max(r[3] for r in results)
    detail = ", ".join(f"{m}{s:+.0f}dB/{md[:4]}={v:.3f}" for m, s, md, v in results)
    report(5, "decision-statistic pdfs", worst <= 0.05,
           f"L1: {detail} (tol 0.05 each; {time.time() - t0:.0f}s)")


def test_c06_ratio_pdf(uj_cache):
    """Histogram of u2/u1 vs the exact ratio density."""
    t0 = time.time()
    cases = [
        ("bpsk", -5.0, "perfect", (-2.0, 4.0), 0.05),
        ("bfsk", 5.0, "perfect", (0.0, 2.0), 0.05),
        ("bfsk", 5.0, "imperfect", (0.0, 2.0), 0.07),
    ]
    results = []
    ok = True
    for mod, snr_db, mode, (lo, hi), tol in cases:
        model = RatioModel.for_link(mod, 10, 10.0 ** (snr_db / 10.0))
        pairs = uj_cache(mod, snr_db, mode, 1_000_000)
        ratio = pairs[:, 1] / pairs[:, 0]
        l1 = l1_distance(ratio, lo, hi, 0.05,
                         lambda x, m=model: pdf_ratio_exact(m, x))
        results.append(f"{mod}{snr_db:+.0f}dB/{mode[:4]}={l1:.3f} (tol {tol})")
        ok &= l1 <= tol
    report(6, "ratio pdf", ok, ", ".join(results) + f"; {time.time() - t0:.0f}s")


def test_c07_outage_curves():
    """Analytical F1/F2 vs 1e6-trial empirical cdfs, sup-norm <= 0.015."""
    t0 = time.time()
    grid = tuple(np.linspace(0.5, 60.0, 80))
    results = []
    ok = True
    for mod, snr_db in (("bpsk", -5.0), ("bfsk", 5.0)):
        snr = 10.0 ** (snr_db / 10.0)
        for layer in (1, 2):
            q = OutageQuery(layer=layer, modulation=mod, n_rx=10,
                            snr_linear=snr, x_grid=grid)
            emp = estimate_outage_empirical(q, 1_000_000, SEED + layer)
            if layer == 1:
                ana = f1(q.model, 10, np.asarray(grid))
            else:
                ana = f2(q.model, 10, np.asarray(grid))
            sup = float(np.max(np.abs(ana - emp.values)))
            results.append(f"{mod}{snr_db:+.0f}dB F{layer}={sup:.4f}")
            ok &= sup <= 0.015
    report(7, "outage curves", ok,
           ", ".join(results) + f" (tol 0.015 each; {time.time() - t0:.0f}s)")


def _ser_crossing_db(points, detector, level):
    pts = sorted((p for p in points if p.detector == detector),
                 key=lambda p: p.snr_db)
    snr = np.array([p.snr_db for p in pts])
    ser = np.array([p.ser for p in pts])
    for i in range(len(pts) - 1):
        if ser[i] >= level > ser[i + 1] and ser[i + 1] > 0:
            lo, hi = np.log10(ser[i]), np.log10(ser[i + 1])
            frac = (np.log10(level) - lo) / (hi - lo)
            return float(snr[i] + frac * (snr[i + 1] - snr[i]))
    return None


def test_c08_ser_dominance_and_gain():
    """(a) detector dominance on 2x10 BPSK; (b) ordering gain on 16x24 16-QAM."""
    t0 = time.time()
    plan_a = SimPlan(
        channel=ChannelConfig(tx=2, rx=10), alphabet="bpsk",
        detectors=("ml", "mblast", "vblast", "zf"),
        snr_db=tuple(np.arange(0.0, 12.1, 2.0)),
        trials=1_000_000, min_errors=500, master_seed=SEED,
    )
    points_a = run_ser_sweep(plan_a, workers=1)
    chain = ("ml", "mblast", "vblast", "zf")
    dominance_ok = True
    detail_a = []
    for snr_db in plan_a.snr_db:
        at = {p.detector: p for p in points_a if p.snr_db == snr_db}
        for lo_name, hi_name in zip(chain[:-1], chain[1:]):
            a, b = at[lo_name], at[hi_name]
            sig = np.sqrt(a.ser * (1 - a.ser) / a.symbols_sent
                          + b.ser * (1 - b.ser) / b.symbols_sent)
            if a.ser > b.ser + 3 * sig:
                dominance_ok = False
                detail_a.append(f"{lo_name}>{hi_name}@{snr_db:g}dB")
    errs = {p.snr_db: max(q.symbol_errors for q in points_a
                          if q.snr_db == p.snr_db) for p in points_a}
    detail_a.append("errors/point " + ",".join(f"{int(s)}:{errs[s]}"
                                               for s in plan_a.snr_db))

    plan_b = SimPlan(
        channel=ChannelConfig(tx=16, rx=24), alphabet="qam16",
        detectors=("mblast", "vblast"), snr_db=(16.0, 17.0, 18.0, 19.0),
        trials=50_000, min_errors=500, master_seed=SEED,
    )
    points_b = run_ser_sweep(plan_b, workers=1)
    x_mb = _ser_crossing_db(points_b, "mblast", 1e-3)
    x_vb = _ser_crossing_db(points_b, "vblast", 1e-3)
    gain_ok = x_mb is not None and x_vb is not None and (x_vb - x_mb) >= 0.5
    gain = None if x_mb is None or x_vb is None else x_vb - x_mb
    ok = dominance_ok and gain_ok
    report(8, "SER dominance and ordering gain", ok,
           f"(a) dominance {'holds' if dominance_ok else 'violated: '}"
           f"{'' if dominance_ok else ';'.join(detail_a[:-1])} [{detail_a[-1]}]; "
           f"(b) SNR gain at SER=1e-3: {gain if gain is None else round(gain, 2)} dB "
           f"(mblast {x_mb}, vblast {x_vb}; bar 0.5 dB, informational target 2 dB); "
           f"{time.time() - t0:.0f}s")


def test_c09_cli_determinism(tmp_path):
    """Same seed, workers 1 vs 8: byte-identical CSV."""
    from mblast.cli import main

    t0 = time.time()
    args = ["ser", "--tx", "2", "--rx", "6", "--alphabet", "bpsk",
            "--snr-db", "0", "2", "--trials", "3000", "--seed", "77"]
    outs = []
    for name, workers in (("w1", "1"), ("w8", "8"), ("w1b", "1")):
        d = tmp_path / name
        assert main(args + ["--workers", workers, "--out", str(d)]) == 0
        outs.append((d / "ser.csv").read_bytes())
    ser_ok = outs[0] == outs[1] == outs[2]

    oargs = ["outage", "--layer", "1", "--mod", "bpsk", "--snr-db", "-5",
             "--points", "10", "--x-max", "40", "--empirical", "20000",
             "--seed", "78"]
    oouts = []
    for name, workers in (("o1", "1"), ("o8", "8")):
        d = tmp_path / name
        assert main(oargs + ["--workers", workers, "--out", str(d)]) == 0
        oouts.append((d / "outage.csv").read_bytes())
    outage_ok = oouts[0] == oouts[1]
    report(9, "CLI determinism", ser_ok and outage_ok,
           f"ser reruns+workers identical: {ser_ok}, outage workers identical: "
           f"{outage_ok} ({time.time() - t0:.0f}s)")


def test_c10_validate_suite():
    """Built-in cross-check suite passes inside its runtime budget."""
    t0 = time.time()
    results = run_validation()
    elapsed = time.time() - t0
    ok = all(r.passed for r in results) and elapsed < 60.0
    report(10, "cmd_validate suite", ok,
           f"{sum(r.passed for r in results)}/{len(results)} checks passed "
           f"in {elapsed:.1f}s (budget 60s)")
