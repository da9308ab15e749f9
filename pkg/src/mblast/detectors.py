"""Layered MIMO detectors sharing one nulling/cancellation skeleton.

Four detectors over the model ``r = H x + v``:

* ``mblast``: successive interference cancellation where each layer nulls all
  undetected streams, quantizes them, and commits the stream whose tentative
  decision has the largest posterior reliability among the candidates.
* ``vblast``: same skeleton, but the layer order is decided from the channel
  matrix alone by the post-processing SNR (smallest nulling-row norm).
* ``zf``: one-shot nulling and quantization, no cancellation.
* ``ml``: exhaustive minimum-distance search over all candidate vectors.

Reliability ordering is carried out on a log-domain key: the argmax of

    p_ij = f(y_ij | s_ij) / sum_a f(y_ij | a)

is the argmin of ``log(1/p_ij - 1 + 1)``'s log-sum-exp core, which never
saturates even when the p values themselves round to 1.0 at high SNR.  The
committed reliabilities reported in traces are the actual p values.

Scalar entry points (``detect_*``) wrap the batched kernels (``*_batch``)
that Monte Carlo drivers call on stacked draws.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import RankDeficient, pseudoinverse, pseudoinverse_batch
from .modulation import quantize_index

__all__ = [
    "TooLarge",
    "DetectionTrace",
    "BinaryOrderingStatistic",
    "BatchDetection",
    "reliability",
    "detect_mblast",
    "detect_vblast",
    "detect_zf",
    "detect_ml",
    "mblast_batch",
    "vblast_batch",
    "zf_batch",
    "ml_batch",
    "first_layer_pinv",
    "decision_statistic",
    "decision_statistic_generic",
    "binary_ordering_statistic",
    "ordering_events",
    "post_processing_snr",
    "DETECTOR_NAMES",
]

DETECTOR_NAMES = ("mblast", "vblast", "zf", "ml")

ML_ENUMERATION_CAP = 2**20


class TooLarge(Exception):
    """Exhaustive search space exceeds the enumeration cap."""


@dataclass
class DetectionTrace:
    """Full record of one layered detection.

    ``order[i]`` is the stream index committed at layer ``i`` (0-based).
    The per-layer arrays are ``(M, M)`` with entry ``[i, j]`` describing
    stream ``j`` at layer ``i`` and NaN where stream ``j`` was already
    processed before layer ``i``.
    """

    order: np.ndarray
    decisions: np.ndarray
    nulled: np.ndarray
    tentatives: np.ndarray
    reliabilities: np.ndarray
    noise_vars: np.ndarray


@dataclass(frozen=True)
class BinaryOrderingStatistic:
    """Two-stream ordering comparison ``||h_1||^2 u_1`` vs ``||h_2||^2 u_2``."""

    u1: float
    u2: float
    lhs: float
    rhs: float
    event: int  # 1 -> stream order (1, 2); 2 -> stream order (2, 1)

    @property
    def first_index(self):
        """0-based index of the stream detected first."""
        return self.event - 1


@dataclass
class BatchDetection:
    """Batched detection output.

    ``decisions`` is ``(B, M)``, ``order`` is ``(B, layers)`` and
    ``rank_ok`` flags draws that passed the rank tolerance (others carry
    unusable results and should be resampled by the caller).  ``first_layer``
    holds the layer-1 nulled observations, tentative decisions, noise
    variances and nulling-row square norms, each ``(B, M)``.
    """

    decisions: np.ndarray
    order: np.ndarray
    rank_ok: np.ndarray
    first_layer: dict


def _unreliability_key(y, s_idx, alphabet, sigma_sq):
    """Log-domain ordering key: log sum_{a != s} exp(-(d_a^2 - d_s^2)/sigma^2).

    Monotone decreasing in the reliability p, with none of p's saturation:
    subtracting the committed-point distance keeps every exponent finite.
    """
    pts = alphabet.points
    d2 = np.abs(y[..., None] - pts) ** 2
    ds2 = np.take_along_axis(d2, s_idx[..., None], axis=-1)
    z = -(d2 - ds2) / sigma_sq[..., None]
    np.put_along_axis(z, s_idx[..., None], -np.inf, axis=-1)
    zmax = np.max(z, axis=-1)
    # all points coincide is impossible (|A| >= 2), so zmax > -inf
    return zmax + np.log(np.sum(np.exp(z - zmax[..., None]), axis=-1))


def reliability(y, s, alphabet, noise_var_post):
    """Posterior reliability of decision ``s`` for nulled observation ``y``.

    ``noise_var_post`` is the post-processing noise variance of the
    subchannel.  Vectorized; scalars in give a float back.  Values lie in
    (0, 1], and are at least 1/2 for binary alphabets when ``s`` is the
    minimum-distance decision.
    """
    y_arr = np.asarray(y, dtype=complex)
    s_idx = quantize_index(alphabet, np.asarray(s, dtype=complex))
    sig = np.broadcast_to(np.asarray(noise_var_post, dtype=float), y_arr.shape)
    if np.any(sig <= 0):
        raise ValueError("post-processing noise variance must be positive")
    L = _unreliability_key(np.atleast_1d(y_arr), np.atleast_1d(s_idx), alphabet,
                           np.atleast_1d(sig))
    p = 1.0 / (1.0 + np.exp(L))
    if np.isscalar(y) or y_arr.ndim == 0:
        return float(p[0])
    return p


def first_layer_pinv(H):
    """Batched pseudoinverse of the unreduced channel, shared across detectors."""
    return pseudoinverse_batch(H)


def _drop_column(surv, j):
    """Remove per-row element ``j`` from index matrix ``surv`` (keeps order)."""
    B, Ms = surv.shape
    keep = np.arange(Ms - 1)[None, :] + (np.arange(Ms - 1)[None, :] >= j[:, None])
    return np.take_along_axis(surv, keep, axis=1)


def _sic_batch(H, r, alphabet, noise_var, rule, W1=None, max_layers=None,
               collect_layers=None):
    """Shared SIC loop.  ``rule`` is "map" (reliability) or "snr"/"snr-literal"."""
    H = np.asarray(H, dtype=complex)
    r = np.asarray(r, dtype=complex)
    B, N, M = H.shape
    layers = M if max_layers is None else int(max_layers)
    pts = alphabet.points
    surv = np.tile(np.arange(M), (B, 1))
    decisions = np.zeros((B, M), dtype=complex)
    order = np.empty((B, layers), dtype=np.intp)
    rank_ok = np.ones(B, dtype=bool)
    first = None
    r_cur = r.copy()
    rows = np.arange(B)
    for i in range(layers):
        if i == 0 and W1 is not None:
            Wc, ok = W1
        else:
            Hc = np.take_along_axis(H, surv[:, None, :], axis=2)
            Wc, ok = pseudoinverse_batch(Hc)
        rank_ok &= ok
        y = np.einsum("bmn,bn->bm", Wc, r_cur)
        s_idx = quantize_index(alphabet, y)
        s = pts[s_idx]
        row_sq = np.sum(np.abs(Wc) ** 2, axis=2)
        sigma_sq = noise_var * row_sq
        if rule == "map":
            key = _unreliability_key(y, s_idx, alphabet, sigma_sq)
        elif rule == "snr":
            key = row_sq
        else:  # literal reading of the reliability-free rule: largest row norm
            key = -row_sq
        j = np.argmin(key, axis=1)
        k = np.take_along_axis(surv, j[:, None], axis=1)[:, 0]
        dec = np.take_along_axis(s, j[:, None], axis=1)[:, 0]
        decisions[rows, k] = dec
        order[:, i] = k
        if i == 0:
            first = {"y": y, "s": s, "sigma_sq": sigma_sq, "row_sq": row_sq}
        if collect_layers is not None:
            collect_layers.append(
                {"surv": surv.copy(), "y": y, "s": s, "sigma_sq": sigma_sq}
            )
        if i < layers - 1:
            r_cur = r_cur - dec[:, None] * H[rows, :, k]
            surv = _drop_column(surv, j)
    return BatchDetection(decisions=decisions, order=order, rank_ok=rank_ok,
                          first_layer=first)


def mblast_batch(H, r, alphabet, noise_var, W1=None, max_layers=None,
                 collect_layers=None):
    """Batched reliability-ordered SIC detection."""
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    return _sic_batch(H, r, alphabet, noise_var, "map", W1, max_layers,
                      collect_layers)


def vblast_batch(H, r, alphabet, noise_var, W1=None, literal_argmax=False,
                 max_layers=None, collect_layers=None):
    """Batched SNR-ordered SIC detection.

    The order is the smallest nulling-row square norm (largest post-processing
    SNR).  ``literal_argmax=True`` flips to the largest row norm for
    comparison purposes.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    rule = "snr-literal" if literal_argmax else "snr"
    return _sic_batch(H, r, alphabet, noise_var, rule, W1, max_layers,
                      collect_layers)


def zf_batch(H, r, alphabet, W1=None):
    """Batched one-shot nulling detector.  Returns ``(decisions, rank_ok)``."""
    H = np.asarray(H, dtype=complex)
    if W1 is None:
        W1 = pseudoinverse_batch(H)
    W, ok = W1
    y = np.einsum("bmn,bn->bm", W, np.asarray(r, dtype=complex))
    return alphabet.points[quantize_index(alphabet, y)], ok


def _ml_candidates(alphabet, M, cap):
    K = len(alphabet)
    if K**M > cap:
        raise TooLarge(f"{K}^{M} candidate vectors exceed the cap of {cap}")
    grids = np.meshgrid(*([alphabet.points] * M), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)  # (K^M, M)


def ml_batch(H, r, alphabet, cap=ML_ENUMERATION_CAP):
    """Batched exhaustive minimum-distance detection."""
    H = np.asarray(H, dtype=complex)
    r = np.asarray(r, dtype=complex)
    cand = _ml_candidates(alphabet, H.shape[2], cap)
    hx = np.einsum("bnm,cm->bnc", H, cand)
    cost = np.sum(np.abs(r[:, :, None] - hx) ** 2, axis=1)
    return cand[np.argmin(cost, axis=1)]


def _as_batch(H, r):
    H = np.asarray(H, dtype=complex)
    r = np.asarray(r, dtype=complex)
    if H.ndim != 2 or r.ndim != 1 or r.shape[0] != H.shape[0]:
        raise ValueError("expected H (N, M) and r (N,)")
    return H[None], r[None]


def _trace_from_layers(M, alphabet, result, records):
    nulled = np.full((M, M), np.nan, dtype=complex)
    tents = np.full((M, M), np.nan, dtype=complex)
    relis = np.full((M, M), np.nan)
    nvars = np.full((M, M), np.nan)
    for i, rec in enumerate(records):
        surv = rec["surv"][0]
        nulled[i, surv] = rec["y"][0]
        tents[i, surv] = rec["s"][0]
        nvars[i, surv] = rec["sigma_sq"][0]
        relis[i, surv] = reliability(rec["y"][0], rec["s"][0], alphabet,
                                     rec["sigma_sq"][0])
    return DetectionTrace(
        order=result.order[0].copy(),
        decisions=result.decisions[0].copy(),
        nulled=nulled,
        tentatives=tents,
        reliabilities=relis,
        noise_vars=nvars,
    )


def detect_mblast(H, r, alphabet, noise_var):
    """Reliability-ordered SIC detection of a single received vector."""
    Hb, rb = _as_batch(H, r)
    records = []
    res = mblast_batch(Hb, rb, alphabet, noise_var, collect_layers=records)
    if not res.rank_ok[0]:
        raise RankDeficient("channel matrix fails the rank tolerance")
    return _trace_from_layers(Hb.shape[2], alphabet, res, records)


def detect_vblast(H, r, alphabet, noise_var, literal_argmax=False):
    """SNR-ordered SIC detection of a single received vector."""
    Hb, rb = _as_batch(H, r)
    records = []
    res = vblast_batch(Hb, rb, alphabet, noise_var, literal_argmax=literal_argmax,
                       collect_layers=records)
    if not res.rank_ok[0]:
        raise RankDeficient("channel matrix fails the rank tolerance")
    return _trace_from_layers(Hb.shape[2], alphabet, res, records)


def detect_zf(H, r, alphabet):
    """One-shot nulling detection: quantize(pinv(H) r)."""
    H = np.asarray(H, dtype=complex)
    W = pseudoinverse(H)  # raises RankDeficient itself
    y = W @ np.asarray(r, dtype=complex)
    return alphabet.points[quantize_index(alphabet, y)]


def detect_ml(H, r, alphabet, cap=ML_ENUMERATION_CAP):
    """Exhaustive minimum-distance detection of a single received vector."""
    Hb, rb = _as_batch(H, r)
    return ml_batch(Hb, rb, alphabet, cap)[0]


# ---------------------------------------------------------------------------
# Two-stream binary ordering statistic
# ---------------------------------------------------------------------------


def _delta_delta_vec(binary, s):
    s = np.asarray(s, dtype=complex)
    is_a1 = s == binary.a1
    is_a2 = s == binary.a2
    if not np.all(is_a1 | is_a2):
        from .modulation import NotInAlphabet

        raise NotInAlphabet("decision outside the binary alphabet")
    return np.where(is_a1, 1.0, -1.0)


def decision_statistic_generic(binary, y, s):
    """u_j in its generic binary form: Re{y * conj(delta_a)} * delta_delta(s)."""
    y = np.asarray(y, dtype=complex)
    return (y * np.conj(binary.delta_a)).real * _delta_delta_vec(binary, s)


def decision_statistic(binary, y, s):
    """u_j in reduced per-modulation form.

    BPSK drops the common positive factor 2*a1 (u = Re{y} sgn(s)); BFSK uses
    u = Re{y (1+j)} s^2 / a1.  Generic binary alphabets fall back to the
    unreduced form.  All forms order the two streams identically.
    """
    kind = binary.kind
    y = np.asarray(y, dtype=complex)
    s = np.asarray(s, dtype=complex)
    if kind == "bpsk":
        return y.real * np.where(s.real > 0, 1.0, -1.0)
    if kind == "bfsk":
        return (y * (1.0 + 1.0j)).real * (s * s).real / binary.a1.real
    return decision_statistic_generic(binary, y, s)


def ordering_events(H, y1, s1, binary):
    """Batched first-layer ordering events for two-stream binary detection.

    ``H`` is ``(B, N, 2)``, ``y1``/``s1`` are the layer-1 nulled observations
    and tentative decisions, ``(B, 2)``.  Returns an int array with 1 where
    stream 0 is detected first and 2 otherwise (ties go to 1).
    """
    H = np.asarray(H, dtype=complex)
    u = decision_statistic(binary, y1, s1)
    col_sq = np.sum(np.abs(H) ** 2, axis=1)
    lhs = col_sq[..., 0] * u[..., 0]
    rhs = col_sq[..., 1] * u[..., 1]
    return np.where(lhs >= rhs, 1, 2)


def binary_ordering_statistic(H, y1, s1, binary):
    """Ordering statistic for one two-stream draw; see :func:`ordering_events`."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[1] != 2:
        raise ValueError("binary ordering requires a two-column channel matrix")
    u = decision_statistic(binary, np.asarray(y1), np.asarray(s1))
    col_sq = np.sum(np.abs(H) ** 2, axis=0)
    lhs = float(col_sq[0] * u[0])
    rhs = float(col_sq[1] * u[1])
    return BinaryOrderingStatistic(
        u1=float(u[0]), u2=float(u[1]), lhs=lhs, rhs=rhs,
        event=1 if lhs >= rhs else 2,
    )


def post_processing_snr(H, symbol_energy, noise_var, j):
    """Effective SNR of subchannel ``j`` after nulling: (E_s/sigma_v^2) ||h_j_perp||^2."""
    from .linalg import null_component

    if symbol_energy <= 0 or noise_var <= 0:
        raise ValueError("symbol_energy and noise_var must be positive")
    hp = null_component(H, j)
    return symbol_energy / noise_var * float(np.sum(np.abs(hp) ** 2))
