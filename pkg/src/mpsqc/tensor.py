"""Dense real tensor arithmetic and matrix factorizations.

Tensors are plain ``numpy.ndarray`` objects with explicit shapes (row-major
storage), which already provides the dims/flat-data carrier every other
module consumes.  All routines here operate on real arrays; complex
arithmetic lives only in the simulator.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "contract",
    "lq_decompose",
    "svd",
    "gram_schmidt_complete",
    "expm_skew",
    "pseudo_inverse",
]


def contract(a: np.ndarray, b: np.ndarray, axes) -> np.ndarray:
    """Contract ``a`` with ``b`` over pairs of axes.

    ``axes`` is a sequence of ``(axis_in_a, axis_in_b)`` pairs.  The result
    carries the uncontracted axes of ``a`` followed by those of ``b``, in
    their original order.

    Raises ``ValueError`` if any paired axes have mismatched dimensions.
    """
    axes = list(axes)
    for ia, ib in axes:
        if a.shape[ia] != b.shape[ib]:
            raise ValueError(
                f"contracted axes differ: a.shape[{ia}]={a.shape[ia]} vs "
                f"b.shape[{ib}]={b.shape[ib]}"
            )
    if not axes:
        return np.tensordot(a, b, axes=0)
    ax_a, ax_b = zip(*axes)
    return np.tensordot(a, b, axes=(list(ax_a), list(ax_b)))


def lq_decompose(m: np.ndarray):
    """LQ decomposition ``m = L @ Q`` with ``Q @ Q.T = I``.

    ``L`` has shape ``(rows, k)`` and ``Q`` shape ``(k, cols)`` with
    ``k = min(rows, cols)``.  The sign convention makes the diagonal of
    ``L`` non-negative, so the factorization is unique for full-rank input.
    """
    m = np.asarray(m, dtype=float)
    q_t, r_t = np.linalg.qr(m.T)
    lmat = r_t.T.copy()
    q = q_t.T.copy()
    signs = np.where(np.diag(lmat) < 0.0, -1.0, 1.0)
    lmat *= signs[np.newaxis, :]
    q *= signs[:, np.newaxis]
    return lmat, q


def svd(m: np.ndarray):
    """Thin SVD ``m = U @ diag(S) @ Vt`` with ``S`` sorted descending.

    Sign convention: the largest-magnitude entry of each left singular
    vector is made positive, so repeated runs give identical factors.
    """
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    for j in range(u.shape[1]):
        k = np.argmax(np.abs(u[:, j]))
        if u[k, j] < 0.0:
            u[:, j] *= -1.0
            vt[j, :] *= -1.0
    return u, s, vt


def gram_schmidt_complete(q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Complete orthonormal columns ``q`` to a square orthogonal matrix.

    The first ``q.shape[1]`` columns of the result equal ``q`` exactly; the
    remaining ones are Gram-Schmidt orthonormalizations of random vectors,
    re-drawn whenever a candidate is nearly linearly dependent.

    Raises ``ValueError`` if the input columns are not orthonormal.
    """
    q = np.asarray(q, dtype=float)
    rows, cols = q.shape
    if rows < cols:
        raise ValueError(f"need rows >= cols, got {q.shape}")
    if np.linalg.norm(q.T @ q - np.eye(cols)) > 1e-10:
        raise ValueError("input columns are not orthonormal")
    out = np.empty((rows, rows))
    out[:, :cols] = q
    filled = cols
    while filled < rows:
        v = rng.standard_normal(rows)
        v -= out[:, :filled] @ (out[:, :filled].T @ v)
        # second orthogonalization pass for numerical hygiene
        v -= out[:, :filled] @ (out[:, :filled].T @ v)
        nrm = np.linalg.norm(v)
        if nrm < 1e-8:
            continue  # near-dependent draw, retry
        out[:, filled] = v / nrm
        filled += 1
    return out


def expm_skew(a: np.ndarray) -> np.ndarray:
    """Exponential of a real skew-symmetric matrix; the result is in SO(n).

    Computed through the Hermitian eigendecomposition of ``1j * a``, which
    keeps the output orthogonal to machine precision.
    """
    a = np.asarray(a, dtype=float)
    if np.linalg.norm(a + a.T) > 1e-12 * max(1.0, np.linalg.norm(a)):
        raise ValueError("input is not skew-symmetric")
    w, v = np.linalg.eigh(1j * a)
    g = (v * np.exp(-1j * w)) @ v.conj().T
    return np.real(g)


def pseudo_inverse(s: np.ndarray, tol: float) -> np.ndarray:
    """Entry-wise pseudo-inverse of a non-negative vector.

    Entries below ``tol * max(s)`` are mapped to zero instead of inverted.
    """
    s = np.asarray(s, dtype=float)
    if s.size == 0 or np.max(s) <= 0.0:
        return np.zeros_like(s)
    cut = tol * np.max(s)
    out = np.zeros_like(s)
    keep = s > cut
    out[keep] = 1.0 / s[keep]
    return out
