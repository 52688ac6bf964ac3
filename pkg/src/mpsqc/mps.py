"""Matrix product states: canonical forms, overlaps, entropy, compression.

Conventions used throughout the package:

* Site tensors have shape ``(D_left, 2, D_right)``; the physical dimension
  is fixed at 2.
* The state amplitude for the configuration ``s_1 ... s_N`` is
  ``trace(B @ A_1[:, s_1, :] @ ... @ A_N[:, s_N, :])`` where ``B`` is the
  boundary matrix: ``diag(lam)`` when the singular-value vector ``lam`` is
  present, the identity otherwise.  Open boundaries are the special case of
  a dimension-1 loop, which keeps one code path for both boundary kinds.
* Statevectors are big-endian: site 1 is the most significant bit.
* A right-isometric tensor satisfies
  ``sum_{s,r} A[l', s, r] * A[l, s, r] = delta(l', l)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .tensor import lq_decompose, pseudo_inverse, svd

__all__ = [
    "MatrixProductState",
    "CompressionReport",
    "right_canonicalize",
    "mps_norm",
    "overlap",
    "fidelity_mps",
    "to_statevector",
    "from_statevector",
    "compress_obc",
    "hosvd_init",
    "compress_pbc",
    "entanglement_entropy",
    "random_mps",
    "product_mps",
    "ghz_mps",
    "mps_to_dict",
    "mps_from_dict",
]

_STATEVECTOR_SITE_GUARD = 26


@dataclass
class MatrixProductState:
    """Chain of rank-3 tensors with an optional diagonal boundary matrix."""

    tensors: list
    boundary: str  # "obc" | "pbc"
    lam: np.ndarray | None = None

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list:
        """Bond dimensions, loop bond first: [D_0, D_1, ..., D_{N-1}]."""
        return [t.shape[0] for t in self.tensors]

    def validate(self) -> None:
        if self.boundary not in ("obc", "pbc"):
            raise ValidationError(f"unknown boundary {self.boundary!r}")
        if self.n_sites < 2:
            raise ValidationError("need at least 2 sites")
        for i, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != 2:
                raise ValidationError(f"site {i + 1} tensor has shape {t.shape}")
            nxt = self.tensors[(i + 1) % self.n_sites]
            if t.shape[2] != nxt.shape[0]:
                raise ValidationError(
                    f"bond mismatch between sites {i + 1} and {(i + 1) % self.n_sites + 1}"
                )
        if self.boundary == "obc" and (
            self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1
        ):
            raise ValidationError("obc states need dimension-1 end bonds")
        if self.lam is not None:
            lam = np.asarray(self.lam, dtype=float)
            if lam.ndim != 1 or lam.shape[0] != self.tensors[0].shape[0]:
                raise ValidationError("lam length must match the loop bond")
            if np.any(lam < -1e-14):
                raise ValidationError("lam entries must be non-negative")

    def boundary_matrix(self) -> np.ndarray:
        d = self.tensors[0].shape[0]
        if self.lam is None:
            return np.eye(d)
        return np.diag(np.asarray(self.lam, dtype=float))

    def site_matrix(self, i: int, s: int) -> np.ndarray:
        return self.tensors[i][:, s, :]

    def copy(self) -> "MatrixProductState":
        return MatrixProductState(
            [t.copy() for t in self.tensors],
            self.boundary,
            None if self.lam is None else np.array(self.lam, dtype=float),
        )


@dataclass
class CompressionReport:
    sweeps_run: int
    dist_trace: list = field(default_factory=list)
    final_fidelity: float = 0.0


# ---------------------------------------------------------------------------
# constructors


def product_mps(bits, boundary: str = "obc") -> MatrixProductState:
    """Bond-dimension-1 MPS for the basis state given by an iterable of bits."""
    tensors = []
    for b in bits:
        t = np.zeros((1, 2, 1))
        t[0, int(b), 0] = 1.0
        tensors.append(t)
    return MatrixProductState(tensors, boundary)


def ghz_mps(n: int) -> MatrixProductState:
    """Unnormalized |0..0> + |1..1> as a D=2 periodic MPS."""
    t = np.zeros((2, 2, 2))
    t[0, 0, 0] = 1.0
    t[1, 1, 1] = 1.0
    return MatrixProductState([t.copy() for _ in range(n)], "pbc")


def random_mps(n: int, d: int, boundary: str, rng: np.random.Generator) -> MatrixProductState:
    """Random MPS with bond dimension capped at ``d`` (uniform ``d`` for pbc)."""
    tensors = []
    for i in range(n):
        if boundary == "obc":
            dl = min(2**i, d, 2 ** (n - i))
            dr = min(2 ** (i + 1), d, 2 ** (n - i - 1))
        else:
            dl = dr = d
        t = rng.standard_normal((dl, 2, dr)) / np.sqrt(2.0 * dr)
        tensors.append(t)
    m = MatrixProductState(tensors, boundary)
    m.validate()
    return m


# ---------------------------------------------------------------------------
# contraction primitives


def _transfer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Transfer matrix sum_s kron(a[:,s,:], b[:,s,:]) with bra index first."""
    return sum(np.kron(a[:, s, :], b[:, s, :]) for s in range(2))


def overlap(a: MatrixProductState, b: MatrixProductState) -> float:
    """Inner product <a|b> of two real MPS via transfer-matrix contraction.

    Mixed boundaries are allowed; an obc state is simply a dimension-1 loop.
    """
    if a.n_sites != b.n_sites:
        raise ValidationError("site-count mismatch")
    m = np.kron(a.boundary_matrix(), b.boundary_matrix())
    for ta, tb in zip(a.tensors, b.tensors):
        m = m @ _transfer(ta, tb)
    return float(np.trace(m))


def mps_norm(m: MatrixProductState) -> float:
    """Squared 2-norm <psi|psi> of the represented state."""
    return overlap(m, m)


def fidelity_mps(a: MatrixProductState, b: MatrixProductState) -> float:
    """Normalized squared overlap <a|b>^2 / (<a|a><b|b>)."""
    return overlap(a, b) ** 2 / (mps_norm(a) * mps_norm(b))


def to_statevector(m: MatrixProductState) -> np.ndarray:
    """Dense amplitude array of length 2^N, big-endian (site 1 first)."""
    n = m.n_sites
    if n > _STATEVECTOR_SITE_GUARD:
        raise ValidationError(f"refusing to build a statevector for N={n}")
    v = m.boundary_matrix()  # (k_N, k_0)
    for t in m.tensors:
        v = np.tensordot(v, t, axes=(v.ndim - 1, 0))
    # v has indices (k_N, s_1, ..., s_N, k_N'); close the loop
    return np.trace(v, axis1=0, axis2=v.ndim - 1).reshape(-1)


def from_statevector(v: np.ndarray, d_max: int | None = None) -> MatrixProductState:
    """Open-boundary MPS from a dense state by sequential SVD splitting.

    Bonds are truncated to ``d_max`` when given; without truncation the
    round trip through ``to_statevector`` is exact up to float precision.
    """
    v = np.asarray(v, dtype=float)
    n = int(np.log2(v.size))
    if 2**n != v.size:
        raise ValidationError("statevector length must be a power of 2")
    tensors: list = []
    rem = v
    dr = 1
    for _ in range(n - 1, 0, -1):
        mat = rem.reshape(-1, 2 * dr)
        u, s, vt = svd(mat)
        keep = int(np.sum(s > 1e-14 * max(s[0], 1e-300)))
        keep = max(keep, 1)
        if d_max is not None:
            keep = min(keep, d_max)
        tensors.insert(0, vt[:keep].reshape(keep, 2, dr))
        rem = u[:, :keep] * s[:keep]
        dr = keep
    tensors.insert(0, rem.reshape(1, 2, dr))
    out = MatrixProductState(tensors, "obc")
    out.validate()
    return out


# ---------------------------------------------------------------------------
# canonical form


def right_canonicalize(m: MatrixProductState) -> MatrixProductState:
    """Bring an MPS to right-isometric form with a diagonal boundary matrix.

    Sequential LQ decompositions run from the last site to the first; the
    leftover matrix on the loop bond is SVD'd into non-negative descending
    singular values ``lam`` whose orthogonal factors are absorbed into the
    neighboring tensors.  The represented state is unchanged.  For a
    normalized obc state ``lam == [1]``.
    """
    m.validate()
    nrm2 = mps_norm(m)
    if not np.isfinite(nrm2) or nrm2 <= 0.0:
        raise NumericalError("cannot canonicalize a zero-norm state")
    work = m.copy()
    if work.lam is not None:
        # fold an existing boundary matrix into site 1, then redo the sweep
        work.tensors[0] = np.tensordot(work.boundary_matrix(), work.tensors[0], axes=(1, 0))
        work.lam = None
    n = work.n_sites
    for _ in range(3):  # extra passes only trigger on loop-bond rank loss
        tensors = work.tensors
        for i in range(n - 1, 0, -1):
            dl, _, dr = tensors[i].shape
            lmat, q = lq_decompose(tensors[i].reshape(dl, 2 * dr))
            r = lmat.shape[1]
            tensors[i] = q.reshape(r, 2, dr)
            tensors[i - 1] = np.tensordot(tensors[i - 1], lmat, axes=(2, 0))
        dl, _, dr = tensors[0].shape
        lmat, q = lq_decompose(tensors[0].reshape(dl, 2 * dr))
        r = lmat.shape[1]
        tensors[0] = q.reshape(r, 2, dr)
        # lmat lives on the loop bond: psi = Tr[lmat Q_1 ... Q_N]
        w, s, xt = svd(lmat)
        tensors[0] = np.tensordot(xt, tensors[0], axes=(1, 0))
        tensors[-1] = np.tensordot(tensors[-1], w, axes=(2, 0))
        work.lam = s
        if w.shape[0] == w.shape[1]:
            break
        # non-square reduction broke the last tensor's isometry; re-sweep
        work.tensors[0] = np.tensordot(work.boundary_matrix(), work.tensors[0], axes=(1, 0))
        work.lam = None
    work.validate()
    return work


def assert_right_canonical(m: MatrixProductState, atol: float = 1e-10) -> float:
    """Max isometry residual over sites; raises if above ``atol``."""
    worst = 0.0
    for i, t in enumerate(m.tensors):
        dl = t.shape[0]
        mat = t.reshape(dl, -1)
        worst = max(worst, float(np.linalg.norm(mat @ mat.T - np.eye(dl))))
    if worst > atol:
        raise AssertionError(f"isometry residual {worst:.3e} above {atol}")
    return worst


# ---------------------------------------------------------------------------
# compression


def compress_obc(m: MatrixProductState, d_target: int) -> tuple[MatrixProductState, float]:
    """Truncate an obc MPS to bond dimension ``d_target``.

    Right-canonicalizes first, then sweeps left to right truncating each
    bond at a Schmidt decomposition.  Returns the compressed state and its
    fidelity against the input.
    """
    if m.boundary != "obc":
        raise ValidationError("compress_obc needs an obc state")
    if d_target < 1:
        raise ValidationError("d_target must be >= 1")
    rc = right_canonicalize(m)
    carry = rc.boundary_matrix()  # 1x1, carries the norm
    tensors = []
    n = rc.n_sites
    for i in range(n):
        theta = np.tensordot(carry, rc.tensors[i], axes=(1, 0))
        dl, _, dr = theta.shape
        if i == n - 1:
            tensors.append(theta)
            break
        u, s, vt = svd(theta.reshape(dl * 2, dr))
        keep = min(d_target, int(np.sum(s > 1e-14 * max(s[0], 1e-300))) or 1)
        tensors.append(u[:, :keep].reshape(dl, 2, keep))
        carry = s[:keep, np.newaxis] * vt[:keep]
    out = MatrixProductState(tensors, "obc")
    return out, fidelity_mps(out, m)


def hosvd_init(m: MatrixProductState, d_target: int) -> MatrixProductState:
    """Initial guess for periodic compression from local two-site SVDs.

    For every bond, the product of the two adjacent reshaped tensors is
    SVD-truncated and a projector pair ``P = B V sbar^{-1/2}``,
    ``Q = A^T U sbar^{-1/2}`` is inserted, bringing all bonds to
    ``d_target``.
    """
    m.validate()
    n = m.n_sites
    if m.lam is not None:
        m = m.copy()
        m.tensors[0] = np.tensordot(m.boundary_matrix(), m.tensors[0], axes=(1, 0))
        m.lam = None
    proj_p = [None] * n  # proj_p[i]: right projector of site i (bond i+1)
    proj_q = [None] * n  # proj_q[i]: left projector partner on that bond
    for i in range(n):
        j = (i + 1) % n
        ti, tj = m.tensors[i], m.tensors[j]
        a = ti.reshape(-1, ti.shape[2])
        b = tj.reshape(tj.shape[0], -1)
        u, s, vt = svd(a @ b)
        if s[0] <= 1e-300:
            raise NumericalError(f"rank-deficient bond between sites {i + 1} and {j + 1}")
        keep = min(d_target, len(s))
        inv_sqrt = pseudo_inverse(np.sqrt(s[:keep]), 1e-12)
        p = b @ vt[:keep].T * inv_sqrt[np.newaxis, :]
        q = a.T @ u[:, :keep] * inv_sqrt[np.newaxis, :]
        if keep < d_target:  # pad rank-deficient bonds up to the target
            p = np.pad(p, ((0, 0), (0, d_target - keep)))
            q = np.pad(q, ((0, 0), (0, d_target - keep)))
        proj_p[i] = p
        proj_q[i] = q
    tensors = []
    for i in range(n):
        t = np.tensordot(proj_q[(i - 1) % n], m.tensors[i], axes=(0, 0))
        t = np.tensordot(t, proj_p[i], axes=(2, 0))
        tensors.append(t)
    out = MatrixProductState(tensors, "pbc")
    out.validate()
    return out


def compress_pbc(
    target: MatrixProductState,
    d_target: int,
    max_sweeps: int = 100,
    tol: float = 1e-10,
    initial: MatrixProductState | None = None,
) -> tuple[MatrixProductState, CompressionReport]:
    """Fit a uniform-bond periodic MPS to ``target`` by alternating least
    squares on the squared Frobenius distance.

    Each site update solves ``M_env . A = N_env`` through an SVD
    pseudo-inverse, where the environments are the self- and mixed-overlap
    networks with the active tensor removed.  Sweeps run left to right;
    right environments are taken from the sweep start (sites ahead of the
    cursor are still untouched) while left environments are accumulated
    from freshly updated tensors, so every local solve is exact and the
    distance trace is non-increasing.
    """
    target.validate()
    if initial is None:
        initial = hosvd_init(target, d_target)
    fit = initial.copy()
    if fit.lam is not None:
        fit.tensors[0] = np.tensordot(fit.boundary_matrix(), fit.tensors[0], axes=(1, 0))
        fit.lam = None
    n = target.n_sites
    b0 = target.boundary_matrix()
    n0 = mps_norm(target)
    eye_fit = np.eye(fit.tensors[0].shape[0] ** 2)
    b_mix = np.kron(b0, np.eye(fit.tensors[0].shape[0]))

    def current_dist() -> float:
        mix = overlap(target, fit)
        return n0 - 2.0 * mix + mps_norm(fit)

    report = CompressionReport(sweeps_run=0, dist_trace=[])
    prev = current_dist()
    for sweep in range(max_sweeps):
        # right suffixes from the pre-sweep tensors
        suf = [None] * (n + 1)
        suf_m = [None] * (n + 1)
        suf[n] = eye_fit
        suf_m[n] = np.eye(b_mix.shape[0])
        for i in range(n - 1, 0, -1):
            suf[i] = _transfer(fit.tensors[i], fit.tensors[i]) @ suf[i + 1]
            suf_m[i] = _transfer(target.tensors[i], fit.tensors[i]) @ suf_m[i + 1]
        pre = eye_fit
        pre_m = b_mix
        for i in range(n):
            env = (suf[i + 1] if i + 1 <= n else eye_fit) @ pre
            env_m = suf_m[i + 1] @ pre_m
            df = fit.tensors[i].shape[0]
            e4 = env.reshape(df, df, df, df)  # (bra_r, ket_r, bra_l, ket_l)
            m_env = np.einsum("abcd,st->csadtb", e4, np.eye(2)).reshape(df * 2 * df, -1)
            m_env = 0.5 * (m_env + m_env.T)
            d0l = target.tensors[i].shape[0]
            d0r = target.tensors[i].shape[2]
            em4 = env_m.reshape(d0r, df, d0l, df)  # (k0_r, ket_r, k0_l, ket_l)
            n_env = np.einsum("lsr,rbla->asb", target.tensors[i], em4)
            u, s, vt = svd(m_env)
            coeff = pseudo_inverse(s, 1e-12)
            if not np.any(coeff):
                warnings.warn(f"singular environment at site {i + 1}; tensor kept")
            else:
                x = vt.T @ (coeff * (u.T @ n_env.reshape(-1)))
                fit.tensors[i] = x.reshape(df, 2, df)
            pre = pre @ _transfer(fit.tensors[i], fit.tensors[i])
            pre_m = pre_m @ _transfer(target.tensors[i], fit.tensors[i])
        dist = current_dist()
        report.dist_trace.append(dist)
        report.sweeps_run = sweep + 1
        if abs(prev - dist) < tol:
            break
        prev = dist
    report.final_fidelity = float(np.clip(fidelity_mps(fit, target), 0.0, 1.0))
    return fit, report


# ---------------------------------------------------------------------------
# entropy


def entanglement_entropy(v: np.ndarray, cut: int) -> float:
    """Von Neumann entropy (natural log) across ``cut`` for a dense state."""
    v = np.asarray(v)
    n = int(np.log2(v.size))
    if 2**n != v.size:
        raise ValidationError("statevector length must be a power of 2")
    if not 1 <= cut <= n - 1:
        raise ValidationError(f"cut must lie in [1, {n - 1}]")
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise NumericalError("zero state has no entropy")
    if abs(nrm - 1.0) > 1e-8:
        warnings.warn(f"state norm deviates from 1 by {abs(nrm - 1.0):.3e}; normalizing")
    s = np.linalg.svd(v.reshape(2**cut, -1) / nrm, compute_uv=False)
    p = s**2
    p = p[p > 1e-16]
    return float(-np.sum(p * np.log(p)))


# ---------------------------------------------------------------------------
# serialization


def mps_to_dict(m: MatrixProductState) -> dict:
    return {
        "n_sites": m.n_sites,
        "boundary": m.boundary,
        "tensors": [
            {"dims": list(t.shape), "data": t.reshape(-1).tolist()} for t in m.tensors
        ],
        "lambda": None if m.lam is None else np.asarray(m.lam, dtype=float).tolist(),
    }


def mps_from_dict(d: dict) -> MatrixProductState:
    try:
        tensors = [
            np.asarray(t["data"], dtype=float).reshape(t["dims"]) for t in d["tensors"]
        ]
        lam = d.get("lambda")
        m = MatrixProductState(
            tensors, d["boundary"], None if lam is None else np.asarray(lam, dtype=float)
        )
        if m.n_sites != d["n_sites"]:
            raise ValidationError("n_sites does not match tensor count")
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed MPS document: {exc}") from exc
    m.validate()
    return m
