"""Deterministic, parallelizable Monte Carlo drivers.

Every randomized quantity is drawn from a counter-based Philox stream keyed
by ``(master_seed, point_index, trial_index)``, so any subset of trials can
be computed by any worker in any order and the aggregate is byte-identical
regardless of scheduling.  Trials are processed in fixed-size chunks (a
module constant, independent of the worker count) and chunk results are
folded in chunk order.

Symbol errors are counted per transmit stream: a detected vector of M
symbols contributes up to M errors.
"""

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from . import detectors, modulation, stats
from .channel import ChannelConfig, draw_channel, noise_variance_for_snr
from .outage import OutageCurve

__all__ = [
    "SimPlan",
    "SerPoint",
    "EmpiricalDistribution",
    "trial_stream",
    "run_ser_sweep",
    "estimate_outage_empirical",
    "estimate_pdf_empirical",
    "wilson_interval",
]

CHUNK = 4096  # trials per vectorized batch; fixed so results ignore worker count

_POINT_BITS = 16
_TRIAL_BITS = 44
_RETRY_BITS = 4


def trial_stream(master_seed, point_index, trial_index, retry=0):
    """Philox generator for one trial, keyed by (seed, point, trial, retry).

    The 128-bit Philox key is ``seed << 64 | point << 48 | retry << 44 |
    trial``; distinct tuples give independent, non-overlapping streams.
    """
    if not 0 <= point_index < 2**_POINT_BITS:
        raise ValueError("point_index out of range")
    if not 0 <= trial_index < 2**_TRIAL_BITS:
        raise ValueError("trial_index out of range")
    if not 0 <= retry < 2**_RETRY_BITS:
        raise ValueError("retry out of range")
    key = (
        (int(master_seed) & (2**64 - 1)) << 64
        | point_index << (_TRIAL_BITS + _RETRY_BITS)
        | retry << _TRIAL_BITS
        | trial_index
    )
    return np.random.Generator(np.random.Philox(key=key))


def wilson_interval(errors, total, z=1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if total <= 0:
        return (0.0, 1.0)
    p = errors / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * np.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class SimPlan:
    """Full description of a symbol-error-rate sweep."""

    channel: "ChannelConfig"
    alphabet: str
    detectors: tuple
    snr_db: tuple
    trials: int
    min_errors: int = 500
    master_seed: int = 0
    # literal reading of the SNR-ordered rule (largest row norm first);
    # kept for comparison runs
    vblast_literal_argmax: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_db:
            raise ValueError("need at least one SNR point")
        if not self.detectors:
            raise ValueError("need at least one detector")
        for d in self.detectors:
            if d not in detectors.DETECTOR_NAMES:
                raise ValueError(f"unknown detector {d!r}")
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "snr_db", tuple(float(v) for v in self.snr_db))


@dataclass
class SerPoint:
    """Result of one (SNR, detector) cell of a sweep."""

    snr_db: float
    detector: str
    symbol_errors: int
    symbols_sent: int
    resampled: int = 0

    @property
    def ser(self):
        return self.symbol_errors / self.symbols_sent if self.symbols_sent else 0.0

    @property
    def ci95(self):
        return wilson_interval(self.symbol_errors, self.symbols_sent)


@dataclass
class EmpiricalDistribution:
    """Density-normalized histogram.

    ``density`` integrates to one over the binned range; multiply by the
    in-range fraction (``absolute_density``) to compare against a density
    with mass outside the range.
    """

    edges: np.ndarray
    density: np.ndarray
    n_samples: int
    n_in_range: int

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def coverage(self):
        return self.n_in_range / self.n_samples if self.n_samples else 0.0

    @property
    def absolute_density(self):
        return self.density * self.coverage


def _draw_chunk(cfg, alphabet, noise_var, master_seed, point_index, t0, t1):
    """Draw (H, x, r) for trials [t0, t1) from their per-trial streams."""
    b = t1 - t0
    M, N = cfg.tx, cfg.rx
    H = np.empty((b, N, M), dtype=complex)
    x = np.empty((b, M), dtype=complex)
    v = np.empty((b, N), dtype=complex)
    scale = np.sqrt(noise_var / 2.0)
    for t in range(b):
        g = trial_stream(master_seed, point_index, t0 + t)
        H[t] = draw_channel(cfg, g)
        x[t] = modulation.random_symbols(alphabet, M, g)
        zv = g.standard_normal(2 * N)
        v[t] = scale * (zv[:N] + 1j * zv[N:])
    return H, x, np.einsum("bnm,bm->bn", H, x) + v


def _redraw_bad(cfg, alphabet, noise_var, master_seed, point_index, t0, bad_idx, H, x, r):
    """Resample rank-deficient draws on their retry substreams."""
    resampled = 0
    scale = np.sqrt(noise_var / 2.0)
    for t in bad_idx:
        for retry in range(1, 2**_RETRY_BITS):
            g = trial_stream(master_seed, point_index, t0 + t, retry=retry)
            Ht = draw_channel(cfg, g)
            xt = modulation.random_symbols(alphabet, cfg.tx, g)
            zv = g.standard_normal(2 * cfg.rx)
            vt = scale * (zv[: cfg.rx] + 1j * zv[cfg.rx :])
            resampled += 1
            _, ok = detectors.first_layer_pinv(Ht[None])
            if ok[0]:
                H[t], x[t], r[t] = Ht, xt, Ht @ xt + vt
                break
        else:
            raise RuntimeError("could not draw a full-rank channel after retries")
    return resampled


def _ser_chunk(plan, alphabet, point_index, noise_var, t0, t1):
    """Error counts per detector for trials [t0, t1); returns (counts, resampled)."""
    cfg = plan.channel
    H, x, r = _draw_chunk(cfg, alphabet, noise_var, plan.master_seed, point_index,
                          t0, t1)
    W1, ok = detectors.first_layer_pinv(H)
    resampled = 0
    if not np.all(ok):
        bad = np.flatnonzero(~ok)
        resampled = _redraw_bad(cfg, alphabet, noise_var, plan.master_seed,
                                point_index, t0, bad, H, x, r)
        W1, ok = detectors.first_layer_pinv(H)
    shared = (W1, ok)
    counts = {}
    for name in plan.detectors:
        if name == "mblast":
            dec = detectors.mblast_batch(H, r, alphabet, noise_var, W1=shared).decisions
        elif name == "vblast":
            dec = detectors.vblast_batch(
                H, r, alphabet, noise_var, W1=shared,
                literal_argmax=plan.vblast_literal_argmax,
            ).decisions
        elif name == "zf":
            dec, _ = detectors.zf_batch(H, r, alphabet, W1=shared)
        else:
            dec = detectors.ml_batch(H, r, alphabet)
        counts[name] = int(np.sum(dec != x))
    return counts, resampled


def _run_point_chunks(worker_pool, workers, fn, n_trials, min_done_errors):
    """Fold chunk results in chunk order, stopping once the slowest detector
    has collected ``min_done_errors`` errors (or trials are exhausted)."""
    starts = list(range(0, n_trials, CHUNK))
    totals = None
    consumed = 0
    resampled = 0
    it = iter(starts)
    pending = {}
    next_fold = 0
    launched = 0

    def launch():
        nonlocal launched
        try:
            t0 = next(it)
        except StopIteration:
            return False
        pending[launched] = worker_pool.submit(fn, t0, min(t0 + CHUNK, n_trials))
        launched += 1
        return True

    for _ in range(min(workers, len(starts))):
        launch()
    while next_fold in pending:
        counts, res = pending.pop(next_fold).result()
        next_fold += 1
        launch()
        consumed = min(next_fold * CHUNK, n_trials)
        resampled += res
        if totals is None:
            totals = dict(counts)
        else:
            for k, v in counts.items():
                totals[k] += v
        if min(totals.values()) >= min_done_errors:
            for f in pending.values():
                f.cancel()
            pending.clear()
            break
    return totals, consumed, resampled


def run_ser_sweep(plan, workers=1):
    """Run the SER sweep described by ``plan``; returns a list of SerPoint.

    Results depend only on ``(plan, master_seed)``: chunk size and fold order
    are fixed, and the early-stop rule (at least ``min_errors`` symbol errors
    for every detector, or ``trials`` trials) is evaluated at chunk
    boundaries in chunk order.
    """
    alphabet = modulation.alphabet_by_name(plan.alphabet)
    workers = max(1, workers)
    points = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        for pi, snr_db in enumerate(plan.snr_db):
            noise_var = noise_variance_for_snr(
                snr_db, alphabet.symbol_energy, plan.channel.tx,
                plan.channel.sigma_h_sq,
            )

            def fn(t0, t1, _pi=pi, _nv=noise_var):
                return _ser_chunk(plan, alphabet, _pi, _nv, t0, t1)

            totals, consumed, resampled = _run_point_chunks(
                pool, workers, fn, plan.trials, plan.min_errors
            )
            sent = consumed * plan.channel.tx
            for name in plan.detectors:
                points.append(
                    SerPoint(
                        snr_db=snr_db,
                        detector=name,
                        symbol_errors=totals[name],
                        symbols_sent=sent,
                        resampled=resampled,
                    )
                )
    return points


def _outage_chunk(query, ordering, decisions_mode, master_seed, t0, t1):
    """Layer-gain samples for trials [t0, t1) of an outage simulation.

    Returns (perp_gain_k1, column_gain_k2, column_gain_k1) triples so callers
    can build either layer's empirical cdf (and the first-layer column-norm
    variant used by cross-checks).
    """
    alphabet = (modulation.bpsk(query.a1) if query.modulation == "bpsk"
                else modulation.bfsk(query.a1))
    cfg = ChannelConfig(tx=2, rx=query.n_rx, sigma_h_sq=stats.SIM_SIGMA_H_SQ)
    noise_var = (alphabet.symbol_energy * 2 * stats.SIM_SIGMA_H_SQ
                 / query.snr_linear)
    H, x, r = _draw_chunk(cfg, alphabet, noise_var, master_seed, 0, t0, t1)
    W1, ok = detectors.first_layer_pinv(H)
    if not np.all(ok):
        bad = np.flatnonzero(~ok)
        _redraw_bad(cfg, alphabet, noise_var, master_seed, 0, t0, bad, H, x, r)
        W1, ok = detectors.first_layer_pinv(H)
    y = np.einsum("bmn,bn->bm", W1, r)
    row_sq = np.sum(np.abs(W1) ** 2, axis=2)
    if ordering == "mblast":
        if decisions_mode == "perfect":
            s_idx = modulation.quantize_index(alphabet, x)
        else:
            s_idx = modulation.quantize_index(alphabet, y)
        key = detectors._unreliability_key(y, s_idx, alphabet, noise_var * row_sq)
    else:  # SNR-ordered: smallest nulling-row norm first
        key = row_sq
    k1 = np.argmin(key, axis=1)
    rows = np.arange(H.shape[0])
    col_sq = np.sum(np.abs(H) ** 2, axis=1)
    perp_sq = 1.0 / row_sq  # ||h_j_perp||^2 = 1 / ||(W_1)_j||^2
    return (perp_sq[rows, k1], col_sq[rows, 1 - k1], col_sq[rows, k1])


def estimate_outage_empirical(query, trials, master_seed, ordering="mblast",
                              decisions="actual", workers=1, confidence=0.95):
    """Empirical outage cdf on the query grid from full channel simulation.

    Each trial draws H (entries CN(0, 2)), symbols, and noise, runs the first
    detection layer, and records ``||h_{k1}_perp||^2`` (layer 1) or
    ``||h_{k2}||^2`` (layer 2).  ``ordering`` is "mblast" (reliability) or
    "vblast" (row norms); ``decisions`` is "actual" (minimum-distance) or
    "perfect".  The returned band is the Dvoretzky-Kiefer-Wolfowitz envelope
    at the given confidence.
    """
    if ordering not in ("mblast", "vblast"):
        raise ValueError("ordering must be 'mblast' or 'vblast'")
    if decisions not in ("actual", "perfect"):
        raise ValueError("decisions must be 'actual' or 'perfect'")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    starts = list(range(0, trials, CHUNK))
    samples = np.empty(trials)
    sel = 0 if query.layer == 1 else 1
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futs = {
            t0: pool.submit(_outage_chunk, query, ordering, decisions, master_seed,
                            t0, min(t0 + CHUNK, trials))
            for t0 in starts
        }
        for t0 in starts:
            out = futs[t0].result()
            samples[t0 : t0 + out[sel].size] = out[sel]
    xs = np.asarray(query.x_grid, dtype=float)
    sorted_samples = np.sort(samples)
    values = np.searchsorted(sorted_samples, xs, side="right") / trials
    eps = np.sqrt(np.log(2.0 / (1.0 - confidence)) / (2.0 * trials))
    return OutageCurve(
        x_grid=xs,
        values=values,
        method="empirical",
        metadata={
            "trials": trials,
            "master_seed": master_seed,
            "ordering": ordering,
            "decisions": decisions,
            "confidence": confidence,
        },
        band=(np.clip(values - eps, 0.0, 1.0), np.clip(values + eps, 0.0, 1.0)),
    )


def _default_range(var, model):
    if var == "uj":
        return (model.mu - 5.0 * model.sigma, model.mu + 5.0 * model.sigma)
    lo = 1.0 - 10.0 / model.c
    hi = 1.0 + 10.0 / model.c
    return (lo, hi)


def estimate_pdf_empirical(var, mod, mode, n_rx, snr_linear, samples, bins,
                           master_seed, a1=1.0, bin_range=None):
    """Histogram of the decision statistic (``var="uj"``) or of the ratio
    ``u_2/u_1`` (``var="ratio"``) from full channel simulation."""
    if var not in ("uj", "ratio"):
        raise ValueError("var must be 'uj' or 'ratio'")
    if samples < 1 or bins < 1:
        raise ValueError("samples and bins must be >= 1")
    model = stats.RatioModel.for_link(mod, n_rx, snr_linear, a1=a1)
    rng = np.random.Generator(np.random.Philox(key=int(master_seed)))
    pairs = stats.simulate_uj(mod, n_rx, snr_linear,
                              "perfect" if mode == "perfect" else "imperfect",
                              samples if var == "ratio" else (samples + 1) // 2,
                              rng, a1=a1)
    if var == "uj":
        data = pairs.ravel()[:samples]
        if mode == "imperfect":
            default = (0.0, model.mu + 5.0 * model.sigma)
        else:
            default = _default_range("uj", model)
    else:
        data = pairs[:, 1] / pairs[:, 0]
        default = _default_range("ratio", model)
    lo, hi = bin_range if bin_range is not None else default
    counts, edges = np.histogram(data, bins=bins, range=(lo, hi))
    n_in = int(counts.sum())
    widths = np.diff(edges)
    density = counts / n_in / widths if n_in else np.zeros(bins)
    return EmpiricalDistribution(
        edges=edges, density=density, n_samples=int(data.size), n_in_range=n_in
    )
