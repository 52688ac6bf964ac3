"""Two-site DMRG with sequential excited-state search.

States are found from lower to higher energy: state ``j`` minimizes the
energy of ``H + w * sum_{m<j} |psi_m><psi_m|``, so each new optimization is
pushed out of the span of the previously converged states.  Local two-site
problems are solved exactly at small dimension and with Lanczos above that.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ValidationError
from .models import MatrixProductOperator
from .mps import MatrixProductState, overlap, random_mps, right_canonicalize
from .tensor import svd

__all__ = ["SpectrumResult", "dmrg_excited_obc", "mpo_expect"]

_DENSE_SOLVE_DIM = 400


@dataclass
class SpectrumResult:
    energies: np.ndarray
    states: list
    bond_dim: int
    converged: list  # per-state |dE| at the final sweep


def mpo_expect(state: MatrixProductState, mpo: MatrixProductOperator) -> float:
    """<psi|H|psi> / <psi|psi> for an obc MPO."""
    env = np.ones((1, 1, 1))
    for a, w in zip(state.tensors, mpo.sites):
        env = np.einsum("xwy,xsa,wstz,ytb->azb", env, a, w, a, optimize=True)
    num = float(env.reshape(-1)[0])
    nrm = overlap(state, state)
    return num / nrm


def _left_env_update(env, a, w):
    return np.einsum("xwy,xsa,wstz,ytb->azb", env, a, w, a, optimize=True)


def _right_env_update(env, a, w):
    return np.einsum("azb,xsa,wstz,ytb->xwy", env, a, w, a, optimize=True)


def _ov_left_update(env, phi, psi):
    return np.einsum("ca,csd,asb->db", env, phi, psi, optimize=True)


def _ov_right_update(env, phi, psi):
    return np.einsum("db,csd,asb->ca", env, phi, psi, optimize=True)


class _TwoSiteProblem:
    """H_eff on the two-site block plus rank-1 orthogonality penalties."""

    def __init__(self, lenv, w1, w2, renv, penalty_vecs, weight):
        self.lenv, self.w1, self.w2, self.renv = lenv, w1, w2, renv
        self.penalty_vecs = penalty_vecs
        self.weight = weight
        self.shape_theta = (lenv.shape[2], 2, 2, renv.shape[2])
        self.dim = int(np.prod(self.shape_theta))

    def matvec(self, vec):
        theta = vec.reshape(self.shape_theta)
        x = np.tensordot(self.lenv, theta, (2, 0))  # a w s1 s2 b'
        x = np.tensordot(x, self.w1, ([1, 2], [0, 2]))  # a s2 b' s1' wm
        x = np.tensordot(x, self.w2, ([4, 1], [0, 2]))  # a b' s1' s2' wr
        x = np.tensordot(x, self.renv, ([4, 1], [1, 2]))  # a s1' s2' b
        out = x.reshape(-1)
        for v in self.penalty_vecs:
            out = out + self.weight * np.dot(v, vec) * v
        return out

    def solve(self, guess):
        if self.dim <= _DENSE_SOLVE_DIM:
            mat = np.empty((self.dim, self.dim))
            eye = np.eye(self.dim)
            for j in range(self.dim):
                mat[:, j] = self.matvec(eye[:, j])
            mat = 0.5 * (mat + mat.T)
            evals, evecs = np.linalg.eigh(mat)
            return evals[0], evecs[:, 0]
        op = spla.LinearOperator((self.dim, self.dim), matvec=self.matvec)
        evals, evecs = spla.eigsh(op, k=1, which="SA", v0=guess.reshape(-1), tol=1e-12)
        return evals[0], evecs[:, 0]


def _truncated_split(theta, d_max, to_right):
    dl, _, _, dr = theta.shape
    u, s, vt = svd(theta.reshape(dl * 2, 2 * dr))
    keep = min(d_max, int(np.sum(s > 1e-14 * max(s[0], 1e-300))) or 1)
    u, s, vt = u[:, :keep], s[:keep], vt[:keep]
    if to_right:
        left = u.reshape(dl, 2, keep)
        right = (s[:, None] * vt).reshape(keep, 2, dr)
    else:
        left = (u * s).reshape(dl, 2, keep)
        right = vt.reshape(keep, 2, dr)
    return left, right


def _single_state(mpo, d_max, sweeps, tol, lower, weight, rng, measure_mpo):
    n = mpo.n_sites
    psi = right_canonicalize(random_mps(n, min(8, d_max), "obc", rng))
    tensors = [t.copy() for t in psi.tensors]
    tensors[0] = tensors[0] * float(psi.lam[0])
    ws = mpo.sites

    lenv = [None] * (n + 1)
    renv = [None] * (n + 1)
    lenv[0] = np.ones((1, 1, 1))
    renv[n] = np.ones((1, 1, 1))
    for i in range(n - 1, 1, -1):
        renv[i] = _right_env_update(renv[i + 1], tensors[i], ws[i])

    ov_l = [[None] * (n + 1) for _ in lower]
    ov_r = [[None] * (n + 1) for _ in lower]
    for m, phi in enumerate(lower):
        ov_l[m][0] = np.ones((1, 1))
        ov_r[m][n] = np.ones((1, 1))
        for i in range(n - 1, 1, -1):
            ov_r[m][i] = _ov_right_update(ov_r[m][i + 1], phi.tensors[i], tensors[i])

    def penalty_vectors(i):
        vecs = []
        for m, phi in enumerate(lower):
            v = np.einsum(
                "ca,csd,dte,eb->astb",
                ov_l[m][i],
                phi.tensors[i],
                phi.tensors[i + 1],
                ov_r[m][i + 2],
                optimize=True,
            )
            vecs.append(v.reshape(-1))
        return vecs

    energy = np.inf
    delta = np.inf
    for sweep in range(sweeps):
        for i in range(n - 1):  # rightward
            prob = _TwoSiteProblem(
                lenv[i], ws[i], ws[i + 1], renv[i + 2], penalty_vectors(i), weight
            )
            guess = np.tensordot(tensors[i], tensors[i + 1], (2, 0))
            _, vec = prob.solve(guess)
            left, right = _truncated_split(vec.reshape(prob.shape_theta), d_max, True)
            tensors[i], tensors[i + 1] = left, right
            lenv[i + 1] = _left_env_update(lenv[i], left, ws[i])
            for m, phi in enumerate(lower):
                ov_l[m][i + 1] = _ov_left_update(ov_l[m][i], phi.tensors[i], left)
        for i in range(n - 2, -1, -1):  # leftward
            prob = _TwoSiteProblem(
                lenv[i], ws[i], ws[i + 1], renv[i + 2], penalty_vectors(i), weight
            )
            guess = np.tensordot(tensors[i], tensors[i + 1], (2, 0))
            val, vec = prob.solve(guess)
            left, right = _truncated_split(vec.reshape(prob.shape_theta), d_max, False)
            tensors[i], tensors[i + 1] = left, right
            renv[i + 1] = _right_env_update(renv[i + 2], right, ws[i + 1])
            for m, phi in enumerate(lower):
                ov_r[m][i + 1] = _ov_right_update(ov_r[m][i + 2], phi.tensors[i + 1], right)
        state = MatrixProductState([t.copy() for t in tensors], "obc")
        new_energy = mpo_expect(state, measure_mpo)
        delta = abs(new_energy - energy)
        energy = new_energy
        if delta < tol and sweep >= 1:
            break
    else:
        warnings.warn(f"dmrg state not converged: |dE| = {delta:.3e} after {sweeps} sweeps")
    nrm = overlap(state, state)
    state.tensors[0] = state.tensors[0] / np.sqrt(nrm)
    return energy, state, delta


def dmrg_excited_obc(
    mpo: MatrixProductOperator,
    k: int,
    d_max: int = 40,
    sweeps: int = 12,
    ortho_weight: float = None,
    rng: np.random.Generator | None = None,
    tol: float = 1e-9,
    measure_mpo: MatrixProductOperator | None = None,
) -> SpectrumResult:
    """Lowest ``k`` eigenstates of an obc MPO, found sequentially.

    ``mpo`` is the operator being minimized (it may carry sector penalties);
    ``measure_mpo`` (default: ``mpo``) is what reported energies and
    convergence are measured on.  ``ortho_weight`` must exceed the spectral
    width; pass roughly 100x the term-coefficient scale.
    """
    if ortho_weight is None:
        raise ValidationError("ortho_weight is required (about 100x the coefficient scale)")
    rng = rng if rng is not None else np.random.default_rng(0)
    measure = measure_mpo if measure_mpo is not None else mpo
    states: list = []
    energies = []
    deltas = []
    for _j in range(k):
        e, state, delta = _single_state(
            mpo, d_max, sweeps, tol, states, ortho_weight, rng, measure
        )
        energies.append(e)
        states.append(state)
        deltas.append(delta)
    energies = np.array(energies)
    if np.any(np.diff(energies) < -1e-6):
        warnings.warn(f"energies not ordered within 1e-6: {energies}")
    return SpectrumResult(energies=energies, states=states, bond_dim=d_max, converged=deltas)
