"""Complex dense linear algebra for nulling-based detection.

Everything here operates on plain numpy arrays: channel matrices are
``(N, M)`` complex arrays (receive antennas by transmit streams), and the
batched helpers accept a leading batch axis ``(B, N, M)``.

Pseudoinverses are computed from the SVD so that near rank-deficient draws
are detected instead of silently amplifying noise.  A matrix that contains
exactly-zero columns (a channel with cancelled streams) is handled by
pseudoinverting the surviving columns and re-inserting zero rows, which is
what the SVD route produces naturally.
"""

import numpy as np

__all__ = [
    "RankDeficient",
    "RANK_RTOL",
    "pseudoinverse",
    "pseudoinverse_batch",
    "gram_inverse_diagonal",
    "null_component",
    "zero_columns",
]

# Relative rank tolerance: smallest retained singular value must exceed
# RANK_RTOL times the largest one.  Continuous random channels are a.s.
# full rank; this only guards degenerate fixtures.
RANK_RTOL = 1e-10


class RankDeficient(Exception):
    """The (surviving) columns of a channel matrix are numerically dependent."""


def _as_matrix(H):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError(f"expected a 2-d matrix, got shape {H.shape}")
    return H.astype(complex, copy=False)


def pseudoinverse(H):
    """Moore-Penrose pseudoinverse of ``H``, shape ``(M, N)`` for ``(N, M)`` input.

    Exactly-zero columns are allowed: the result then has zero rows at those
    positions and equals the pseudoinverse of the surviving submatrix on the
    remaining rows.  Raises :class:`RankDeficient` when the surviving columns
    fail the rank tolerance.
    """
    H = _as_matrix(H)
    n_zero = int(np.sum(~np.any(H != 0, axis=0)))
    expected_rank = H.shape[1] - n_zero
    u, s, vh = np.linalg.svd(H, full_matrices=False)
    if expected_rank > 0:
        tol = RANK_RTOL * s[0]
        if s[expected_rank - 1] <= tol:
            raise RankDeficient(
                f"singular value {s[expected_rank - 1]:.3e} below tolerance {tol:.3e}"
            )
        inv_s = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0), 0.0)
    else:
        inv_s = np.zeros_like(s)
    return (vh.conj().transpose() * inv_s) @ u.conj().transpose()


def pseudoinverse_batch(H):
    """Batched pseudoinverse for ``(B, N, M)`` stacks.

    Returns ``(W, ok)`` where ``W`` is ``(B, M, N)`` and ``ok`` is a boolean
    mask of draws whose surviving columns pass the rank tolerance.  Rows of
    ``W`` at exactly-zero columns of ``H`` are zero.  No exception is raised;
    callers decide whether to resample or abort flagged draws.
    """
    H = np.asarray(H, dtype=complex)
    n_zero = np.sum(~np.any(H != 0, axis=1), axis=1)  # (B,)
    expected_rank = H.shape[2] - n_zero
    u, s, vh = np.linalg.svd(H, full_matrices=False)
    tol = RANK_RTOL * s[:, :1]
    keep = s > tol
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    W = np.einsum("bij,bj,bkj->bik", vh.conj().transpose(0, 2, 1), inv_s, u.conj())
    idx = np.maximum(expected_rank - 1, 0)[:, None]
    smallest_surviving = np.take_along_axis(s, idx, axis=1)[:, 0]
    ok = (smallest_surviving > tol[:, 0]) | (expected_rank == 0)
    return W, ok


def gram_inverse_diagonal(H):
    """Diagonal of ``(H^H H)^{-1}`` as a real vector.

    Computed from the normal equations on purpose: this is the cross-check
    partner of :func:`null_component` (entry ``j`` equals
    ``1 / ||h_j_perp||^2``), so it must not share the SVD code path.
    """
    H = _as_matrix(H)
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficient("Gram matrix not invertible at tolerance")
    gram_inv = np.linalg.inv(H.conj().transpose() @ H)
    d = np.real(np.diagonal(gram_inv)).copy()
    return d


def null_component(H, j):
    """Component of column ``j`` orthogonal to all other columns of ``H``.

    Returns ``P_perp h_j`` where ``P_perp`` projects onto the orthogonal
    complement of the span of the remaining columns.
    """
    H = _as_matrix(H)
    if not 0 <= j < H.shape[1]:
        raise IndexError(f"column {j} out of range for {H.shape[1]} columns")
    h_j = H[:, j]
    rest = np.delete(H, j, axis=1)
    if rest.shape[1] == 0:
        return h_j.copy()
    # Guard the full matrix, not just `rest`: a well-conditioned `rest` with
    # h_j inside its span is exactly the degenerate case callers must see.
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficient("matrix fails rank tolerance")
    return h_j - rest @ (pseudoinverse(rest) @ h_j)


def zero_columns(H, idx):
    """Copy of ``H`` with the listed columns set to zero."""
    H = _as_matrix(H)
    idx = list(idx)
    if len(set(idx)) != len(idx):
        raise ValueError("column indices must be distinct")
    out = H.copy()
    if idx:
        out[:, idx] = 0.0
    return out
