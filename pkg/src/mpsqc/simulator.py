"""Exact statevector execution with post-selection and observables.

Statevectors are complex arrays of length 2^n in big-endian order.  Gate
application is sequential in list order; no fusion or reordering, so runs
are bit-for-bit deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import GateOp, QuantumCircuit
from .errors import NumericalError, ValidationError
from .models import _OPS, PauliTermSet, heisenberg, trotter_layer
from .mps import MatrixProductState, entanglement_entropy

__all__ = [
    "QuenchTrace",
    "basis_state",
    "apply_gate",
    "run_circuit",
    "post_select",
    "fidelity",
    "expectation",
    "mps_expectation",
    "evolve_quench",
]


@dataclass
class QuenchTrace:
    times: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    energy: list = field(default_factory=list)


def basis_state(bits) -> np.ndarray:
    bits = [int(b) for b in bits]
    n = len(bits)
    v = np.zeros(2**n, dtype=complex)
    idx = 0
    for b in bits:
        idx = (idx << 1) | b
    v[idx] = 1.0
    return v


def _apply_matrix(state: np.ndarray, mat: np.ndarray, qubits, n: int) -> np.ndarray:
    m = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    perm = list(qubits) + rest
    v = state.reshape([2] * n).transpose(perm).reshape(2**m, -1)
    v = mat @ v
    inv = np.argsort(perm)
    return v.reshape([2] * (len(perm))).transpose(inv).reshape(-1)


def _apply_controlled_ry(state, theta, controls, target, n):
    v = state.reshape([2] * n).copy()
    sel = [slice(None)] * n
    for q, pol in controls:
        sel[q] = pol
    s0, s1 = list(sel), list(sel)
    s0[target] = 0
    s1[target] = 1
    a = v[tuple(s0)].copy()
    b = v[tuple(s1)].copy()
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    v[tuple(s0)] = c * a - s * b
    v[tuple(s1)] = s * a + c * b
    return v.reshape(-1)


def _apply_cnot(state, control, target, n):
    v = state.reshape([2] * n).copy()
    sel0 = [slice(None)] * n
    sel0[control] = 1
    sel1 = list(sel0)
    sel0[target] = 0
    sel1[target] = 1
    v[tuple(sel0)], v[tuple(sel1)] = v[tuple(sel1)].copy(), v[tuple(sel0)].copy()
    return v.reshape(-1)


def apply_gate(state: np.ndarray, gate: GateOp, n_qubits: int | None = None) -> np.ndarray:
    """Apply one gate; unitary payloads are checked to 1e-10 first."""
    n = n_qubits if n_qubits is not None else int(np.log2(state.size))
    if 2**n != state.size:
        raise ValidationError("statevector length is not a power of 2")
    gate.validate()
    if any(q >= n for q in gate.all_qubits()):
        raise ValidationError("gate qubit index out of range")
    state = np.asarray(state, dtype=complex)
    if gate.kind == "MCRY":
        return _apply_controlled_ry(state, gate.theta, gate.controls or [], gate.qubits[0], n)
    if gate.kind == "CNOT":
        return _apply_cnot(state, gate.qubits[0], gate.qubits[1], n)
    return _apply_matrix(state, gate.dense_matrix(), gate.qubits, n)


def run_circuit(circuit: QuantumCircuit, init=None) -> np.ndarray:
    """Run all gates from a basis state (default all zeros); output is
    normalized to 1e-10 by unitarity."""
    circuit.validate()
    n = circuit.n_qubits
    if init is None:
        init = [0] * n
    if len(init) != n:
        raise ValidationError(f"init label needs {n} bits")
    state = basis_state(init)
    for gate in circuit.gates:
        state = apply_gate(state, gate, n)
    nrm = np.linalg.norm(state)
    if abs(nrm - 1.0) > 1e-10:
        raise NumericalError(f"norm drift {abs(nrm - 1.0):.3e} after circuit run")
    return state


def post_select(state: np.ndarray, qubits, outcome) -> tuple:
    """Project the listed qubits onto ``outcome`` bits and drop them.

    Returns ``(normalized reduced state, probability)``; probabilities below
    1e-14 signal a wrong circuit or a measure-zero branch and raise.
    """
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits):
        raise ValidationError("post-selection qubits must be distinct")
    n = int(np.log2(state.size))
    sel = [slice(None)] * n
    for q, b in zip(qubits, outcome):
        sel[q] = int(b)
    reduced = np.asarray(state).reshape([2] * n)[tuple(sel)].reshape(-1)
    prob = float(np.real(np.vdot(reduced, reduced)))
    if prob < 1e-14:
        raise NumericalError(f"post-selection probability {prob:.3e} below 1e-14")
    return reduced / np.sqrt(prob), prob


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 on normalized inputs."""
    if a.size != b.size:
        raise ValidationError("statevector size mismatch")
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericalError("zero state in fidelity")
    return float(np.abs(np.vdot(a, b)) ** 2 / (na**2 * nb**2))


def expectation(state: np.ndarray, h) -> float:
    """<s|H|s> for a term set or a dense matrix; real for Hermitian input."""
    state = np.asarray(state, dtype=complex)
    n = int(np.log2(state.size))
    if isinstance(h, PauliTermSet):
        if h.n_sites != n:
            raise ValidationError("operator/statevector size mismatch")
        total = 0.0 + 0.0j
        for coeff, ops in h.terms:
            w = state
            for site, label in enumerate(ops):
                if label == "I":
                    continue
                w = _apply_matrix(w, _OPS[label], [site], n)
            total += coeff * np.vdot(state, w)
        val = total / np.real(np.vdot(state, state))
    else:
        mat = np.asarray(h)
        if mat.shape[0] != state.size:
            raise ValidationError("operator/statevector size mismatch")
        val = np.vdot(state, mat @ state) / np.vdot(state, state)
    if abs(np.imag(val)) > 1e-10 * max(1.0, abs(val)):
        raise NumericalError(f"non-real expectation {val}")
    return float(np.real(val))


def mps_expectation(m: MatrixProductState, h: PauliTermSet) -> float:
    """<psi|H|psi>/<psi|psi> by transfer products with operator insertions.

    Works at any chain length the MPS supports, which is what the large-N
    energy benchmarks use instead of dense statevectors.
    """
    if h.n_sites != m.n_sites:
        raise ValidationError("operator/state size mismatch")
    n = m.n_sites
    b = m.boundary_matrix()
    bb = np.kron(b, b)
    plain = [
        sum(np.kron(t[:, s, :], t[:, s, :]) for s in range(2)) for t in m.tensors
    ]
    suffix = [np.eye(bb.shape[1])] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = plain[i] @ suffix[i + 1]
    norm = float(np.trace(bb @ suffix[0]))

    def op_transfer(i, label):
        op = _OPS[label]
        t = m.tensors[i]
        return sum(
            np.kron(t[:, s, :], t[:, sp, :]) * complex(op[s, sp])
            for s in range(2)
            for sp in range(2)
            if op[s, sp] != 0
        )

    total = 0.0 + 0.0j
    for coeff, ops in h.terms:
        last = max((i for i, lbl in enumerate(ops) if lbl != "I"), default=-1)
        acc = bb.astype(complex)
        for i in range(last + 1):
            acc = acc @ (plain[i] if ops[i] == "I" else op_transfer(i, ops[i]))
        total += coeff * np.trace(acc @ suffix[last + 1])
    if abs(np.imag(total)) > 1e-10 * max(1.0, abs(total)):
        raise NumericalError("non-real MPS expectation; check term pairings")
    return float(np.real(total)) / norm


def evolve_quench(
    init: np.ndarray,
    delta: float,
    dt: float,
    t_final: float,
    record_stride: int = 1,
    boundary: str = "pbc",
) -> QuenchTrace:
    """Second-order split-step evolution recording half-cut entropy and
    quench energy every ``record_stride`` steps."""
    state = np.asarray(init, dtype=complex).copy()
    n = int(np.log2(state.size))
    if boundary == "pbc" and n % 2 != 0:
        raise ValidationError("periodic layering needs even n")
    ham = heisenberg(n, delta, boundary)
    layer = trotter_layer(n, delta, dt, boundary)
    steps = int(round(t_final / dt))
    trace = QuenchTrace()

    def record(t):
        trace.times.append(t)
        trace.entropy.append(entanglement_entropy(state, n // 2))
        trace.energy.append(expectation(state, ham))

    record(0.0)
    for step in range(1, steps + 1):
        for u, pair in layer:
            state = _apply_matrix(state, u, list(pair), n)
        if step % record_stride == 0:
            record(step * dt)
    drift = abs(np.linalg.norm(state) - 1.0)
    if drift > 1e-8:
        raise NumericalError(f"norm drift {drift:.2e} during evolution")
    return trace
