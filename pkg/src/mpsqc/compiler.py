"""Compile canonicalized MPS tensors into quantum circuits.

Staircase wire convention
-------------------------
A right-isometric site tensor reshapes to an isometry with rows ``(s, r)``
(physical then outgoing bond) and columns ``l`` (incoming bond).  After
orthogonal completion, the circuit gate for site ``i`` acts on the wire
window ``(i, i+1, ..., i+k_out)``: at the input the first ``k_in`` wires
carry the incoming bond and the remaining wires arrive in ``|0>``; at the
output the first wire carries the physical index and the rest the outgoing
bond.  Gate columns are therefore indexed ``l * 2**(m - k_in) + e`` where
``e`` runs over the fresh-wire bits, and every column with ``e > 0`` is a
free completion column that never touches the prepared state.

For periodic states the loop bond of dimension ``D = 2**k`` is supplied by
``2k`` ancillas: ``k`` on top of the chain holding the traced half of the
boundary encoding and ``k`` below it catching the final bond, with the
closing gate acting on both ancilla blocks.  Post-selecting all ancillas in
``|0>`` leaves the target state with the predicted success probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import GateOp, QuantumCircuit
from .errors import NumericalError, ValidationError
from .mps import MatrixProductState, mps_norm, right_canonicalize
from .tensor import gram_schmidt_complete

__all__ = [
    "BoundaryEncoding",
    "embed_isometry",
    "fix_determinants",
    "split_bond_matrix",
    "success_rate",
    "build_boundary_unitary",
    "gray_code",
    "binary_from_gray",
    "givens_gray_synthesize",
    "so4_to_native",
    "compile_obc",
    "compile_pbc",
    "staircase_circuit_to_mps",
]


def _log2_exact(d: int) -> int:
    k = int(d).bit_length() - 1
    if 2**k != d:
        raise ValidationError(f"dimension {d} is not a power of 2")
    return k


# ---------------------------------------------------------------------------
# isometry embedding and the gate staircase


def embed_isometry(q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Extend a ``2D x D`` isometry to an orthogonal ``2D x 2D`` matrix.

    The first ``D`` columns equal ``q``; applying the reshaped multi-qubit
    gate with the extension qubit in ``|0>`` reproduces the isometry.
    """
    q = np.asarray(q, dtype=float)
    rows, cols = q.shape
    _log2_exact(cols)
    if rows != 2 * cols:
        raise ValidationError(f"expected a 2D x D matrix, got {q.shape}")
    if np.linalg.norm(q.T @ q - np.eye(cols)) > 1e-10:
        raise ValidationError("input is not an isometry")
    return gram_schmidt_complete(q, rng)


@dataclass
class StairGate:
    """One staircase gate in the wire convention described in the module
    docstring."""

    site: int
    matrix: np.ndarray
    k_in: int
    k_out: int

    @property
    def n_wires(self) -> int:
        return self.k_out + 1

    @property
    def n_ext_bits(self) -> int:
        return self.n_wires - self.k_in

    def extension_columns(self) -> list:
        step = 2**self.n_ext_bits
        return [l * step + e for l in range(2**self.k_in) for e in range(1, step)]

    def used_columns(self) -> list:
        step = 2**self.n_ext_bits
        return [l * step for l in range(2**self.k_in)]

    def tensor(self) -> np.ndarray:
        """Recover the (D_in, 2, D_out) site tensor embedded in the gate."""
        d_in, d_out = 2**self.k_in, 2**self.k_out
        t = np.empty((d_in, 2, d_out))
        step = 2**self.n_ext_bits
        for l in range(d_in):
            col = self.matrix[:, l * step]
            t[l] = col.reshape(2, d_out)
        return t


def build_staircase(rc: MatrixProductState, rng: np.random.Generator) -> list:
    """Orthogonal gates for every right-isometric site tensor."""
    stairs = []
    for i, t in enumerate(rc.tensors):
        dl, _, dr = t.shape[0], t.shape[1], t.shape[2]
        k_in, k_out = _log2_exact(dl), _log2_exact(dr)
        iso = t.transpose(1, 2, 0).reshape(2 * dr, dl)  # rows (s, r), cols l
        if np.linalg.norm(iso.T @ iso - np.eye(dl)) > 1e-10:
            raise ValidationError(f"site {i + 1} tensor is not right-isometric")
        full = gram_schmidt_complete(iso, rng)
        m = k_out + 1
        gate = np.empty_like(full)
        step = 2 ** (m - k_in)
        for l in range(dl):
            for e in range(step):
                gate[:, l * step + e] = full[:, e * dl + l]
        stairs.append(StairGate(site=i, matrix=gate, k_in=k_in, k_out=k_out))
    return stairs


def fix_determinants(stairs: list) -> float:
    """Force determinant +1 on every staircase gate.

    Gates with free completion columns get one such column sign-flipped,
    which cannot touch the prepared state.  Fully-used gates receive a
    diagonal sign pair on their incoming bond: one genuine input column
    flips here and the two matching outgoing rows flip on the left
    neighbor, whose determinant is unchanged.  The sweep runs right to
    left.  Returns the global sign (only not +1 in the fallback where the
    first gate is fully used, which flips the prepared state's sign).
    """
    sign = 1.0
    for i in range(len(stairs) - 1, -1, -1):
        g = stairs[i]
        if np.linalg.slogdet(g.matrix)[0] > 0:
            continue
        ext = g.extension_columns()
        if ext:
            g.matrix[:, ext[0]] *= -1.0
        elif i > 0:
            g.matrix[:, 0] *= -1.0  # incoming bond value 0
            left = stairs[i - 1]
            rows = [s * 2**left.k_out for s in range(2)]  # outgoing bond value 0
            left.matrix[rows, :] *= -1.0
        else:
            g.matrix[:, 0] *= -1.0
            sign = -sign
    for g in stairs:
        if np.linalg.slogdet(g.matrix)[0] < 0:
            raise NumericalError("determinant fixing left a negative gate")
    return sign


# ---------------------------------------------------------------------------
# boundary-matrix encoding


@dataclass
class BoundaryEncoding:
    alpha: float
    v_alpha: np.ndarray
    v_one_minus_alpha: np.ndarray
    c_alpha: float
    c_one_minus_alpha: float
    success_rate: float


def _power_weights(lam: np.ndarray, x: float):
    s = np.asarray(lam, dtype=float)
    if np.all(s <= 0.0):
        raise ValidationError("boundary weights are all zero")
    powered = np.where(s > 0.0, s**x, 0.0)
    c = float(np.sqrt(np.sum(powered**2)))
    return powered / c, c


def split_bond_matrix(lam, alpha: float, state_norm: float = 1.0) -> BoundaryEncoding:
    """Split diag(lam) into the two unit vectors and normalization constants
    of the ancilla encoding.

    ``v_x`` is the reshaped ``diag(lam)**x / C_x`` with
    ``C_x = sqrt(sum_i lam_i**(2x))``; entries sit at positions ``m*(D+1)``
    of a length ``D**2`` vector.  The post-selection success rate is
    ``state_norm / (C_a C_{1-a})**2``.
    """
    lam = np.asarray(lam, dtype=float)
    d = lam.shape[0]
    _log2_exact(d)
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie strictly between 0 and 1")
    out = {}
    for x in (alpha, 1.0 - alpha):
        s_tilde, c = _power_weights(lam, x)
        v = np.zeros(d * d)
        v[np.arange(d) * (d + 1)] = s_tilde
        out[x] = (v, c)
    v_a, c_a = out[alpha]
    v_b, c_b = out[1.0 - alpha]
    return BoundaryEncoding(
        alpha=alpha,
        v_alpha=v_a,
        v_one_minus_alpha=v_b,
        c_alpha=c_a,
        c_one_minus_alpha=c_b,
        success_rate=float(state_norm) / (c_a**2 * c_b**2),
    )


def success_rate(lam, state_norm: float, alpha: float = 0.5) -> float:
    """Post-selection success probability of the boundary encoding."""
    return split_bond_matrix(lam, alpha, state_norm).success_rate


def build_boundary_unitary(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal ``D^2 x D^2`` matrix with ``v`` as its first column."""
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise ValidationError("boundary vector must be unit norm")
    _log2_exact(int(round(np.sqrt(v.size))))
    return gram_schmidt_complete(v.reshape(-1, 1), rng)


# ---------------------------------------------------------------------------
# Gray-coded Givens synthesis of the boundary gates


def gray_code(i: int, n_bits: int) -> tuple:
    """Reflected Gray code of ``i`` as big-endian bits."""
    if i < 0 or i >= 2**n_bits:
        raise ValidationError(f"index {i} out of range for {n_bits} bits")
    g = i ^ (i >> 1)
    return tuple((g >> (n_bits - 1 - b)) & 1 for b in range(n_bits))


def binary_from_gray(bits) -> tuple:
    out = []
    acc = 0
    for g in bits:
        acc ^= int(g)
        out.append(acc)
    return tuple(out)


def givens_gray_synthesize(s_tilde: np.ndarray) -> list:
    """Exact gate sequence preparing ``sum_i s_i |i>|i>`` from ``|0>^(2n)``.

    ``D - 1`` Gray-coded controlled-Y rotations write the amplitudes on the
    first ``n = log2 D`` qubits, ``n - 1`` CNOTs convert Gray to binary
    order, and ``n`` CNOTs copy the first half onto the second.  Rotation
    angles come from the bottom-up Givens sweep ``-2 atan2(s_k, s_{k-1})``;
    an angle on a code pair ordered ``|1>,|0>`` flips sign, and a final
    ``-1`` amplitude (impossible for non-negative input, kept as a guard)
    is cured by a ``2 pi`` shift on the last rotation.
    """
    s = np.asarray(s_tilde, dtype=float)
    d = s.shape[0]
    n = _log2_exact(d)
    if np.any(s < -1e-14):
        raise ValidationError("amplitudes must be non-negative")
    if abs(np.linalg.norm(s) - 1.0) > 1e-10:
        raise ValidationError("amplitude vector must be unit norm")
    cur = s.copy()
    thetas = np.zeros(d)  # thetas[j]: rotation between positions j-1, j
    for j in range(d - 1, 0, -1):
        a, b = cur[j - 1], cur[j]
        theta = -2.0 * np.arctan2(b, a)
        thetas[j] = theta
        cur[j - 1] = np.cos(theta / 2.0) * a - np.sin(theta / 2.0) * b
        cur[j] = 0.0
    if cur[0] < 0.0 and d > 1:
        thetas[1] += 2.0 * np.pi
    gates = []
    for j in range(1, d):
        phi = -thetas[j]
        g_prev = gray_code(j - 1, n)
        g_cur = gray_code(j, n)
        diff = [q for q in range(n) if g_prev[q] != g_cur[q]]
        assert len(diff) == 1
        target = diff[0]
        angle = phi if g_prev[target] == 0 else -phi
        controls = [(q, g_prev[q]) for q in range(n) if q != target]
        if controls:
            gates.append(GateOp("MCRY", [target], theta=angle, controls=controls))
        else:
            gates.append(GateOp("RY", [target], theta=angle))
    for q in range(n - 1):
        gates.append(GateOp("CNOT", [q, q + 1]))
    for q in range(n):
        gates.append(GateOp("CNOT", [q, n + q]))
    return gates


def _invert_gates(gates: list) -> list:
    inv = []
    for g in reversed(gates):
        if g.kind in ("RY", "MCRY"):
            inv.append(GateOp(g.kind, list(g.qubits), theta=-g.theta, controls=g.controls))
        elif g.kind == "CNOT":
            inv.append(GateOp("CNOT", list(g.qubits)))
        elif g.kind == "SO4":
            inv.append(GateOp("SO4", list(g.qubits), params=-np.asarray(g.params)))
        else:
            inv.append(
                GateOp("DENSE_UNITARY", list(g.qubits), matrix=np.asarray(g.matrix).conj().T)
            )
    return inv


# ---------------------------------------------------------------------------
# SO(4) -> CNOT + single-qubit lowering (magic basis)


_S = np.diag([1.0, 1.0j])
_HAD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
_CNOT10 = np.array(
    [[1.0, 0, 0, 0], [0, 0, 0, 1.0], [0, 0, 1.0, 0], [0, 1.0, 0, 0]], dtype=complex
)
# magic basis: E (SO(4)) E^dag lies in SU(2) x SU(2)
_E = _CNOT10 @ np.kron(_S, _HAD @ _S)


def so4_to_native(g: GateOp) -> list:
    """Lower one SO(4) gate to exactly 2 CNOTs and at most 6 single-qubit
    gates through the magic-basis product factorization."""
    if g.kind != "SO4":
        raise ValidationError("expected an SO4 gate")
    mat = g.dense_matrix()
    if (
        np.linalg.norm(mat.T @ mat - np.eye(4)) > 1e-10
        or np.linalg.slogdet(mat)[0] < 0
    ):
        raise ValidationError("payload does not reconstruct an SO(4) matrix")
    if np.linalg.norm(mat - np.eye(4)) < 1e-12:
        return []
    m = _E @ mat @ _E.conj().T
    r = m.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vt = np.linalg.svd(r)
    if s[1] > 1e-9:
        raise NumericalError("magic-basis image is not a tensor product")
    a = (u[:, 0] * np.sqrt(s[0])).reshape(2, 2)
    b = (vt[0] * np.sqrt(s[0])).reshape(2, 2)
    scale = np.sqrt(2.0) / np.linalg.norm(a)
    a = a * scale
    b = b / scale
    q0, q1 = g.qubits
    return [
        GateOp("DENSE_UNITARY", [q0], matrix=_S.copy()),
        GateOp("DENSE_UNITARY", [q1], matrix=_HAD @ _S),
        GateOp("CNOT", [q1, q0]),
        GateOp("DENSE_UNITARY", [q0], matrix=a),
        GateOp("DENSE_UNITARY", [q1], matrix=b),
        GateOp("CNOT", [q1, q0]),
        GateOp("DENSE_UNITARY", [q0], matrix=_S.conj().T),
        GateOp("DENSE_UNITARY", [q1], matrix=_S.conj().T @ _HAD),
    ]


# ---------------------------------------------------------------------------
# full compilation


def _rotation_angle(mat: np.ndarray) -> float:
    return float(2.0 * np.arctan2(mat[1, 0], mat[0, 0]))


def _emit_site_gates(stair: StairGate, wires, layers, cfg, native, seed):
    """Gate list for one staircase gate, optionally ladder-decomposed."""
    m = stair.n_wires
    if m == 1:
        return [GateOp("RY", [wires[0]], theta=_rotation_angle(stair.matrix))], 0.0
    if not layers:
        return [GateOp("DENSE_UNITARY", list(wires), matrix=stair.matrix.copy())], 0.0
    from .decompose import decompose_multiqubit, ladder_gate_ops

    result = decompose_multiqubit(
        stair.matrix, layers, cfg, seed=seed, used_columns=stair.used_columns()
    )
    gates = ladder_gate_ops(result.params, wires)
    if native:
        lowered = []
        for gate in gates:
            lowered.extend(so4_to_native(gate))
        gates = lowered
    return gates, result.frobenius_distance


def compile_obc(
    m: MatrixProductState,
    layers: int | None = None,
    cfg=None,
    native: bool = False,
    rng: np.random.Generator | None = None,
) -> QuantumCircuit:
    """Map an open-boundary MPS with power-of-2 bonds to a circuit.

    Without ``layers`` the staircase gates stay dense (exact); with
    ``layers`` each multi-wire gate is decomposed into that many SO(4)
    ladder layers, and ``native=True`` additionally lowers every SO(4)
    gate to CNOTs plus single-qubit gates.
    """
    if m.boundary != "obc":
        raise ValidationError("compile_obc needs an obc state")
    rng = rng if rng is not None else np.random.default_rng(0)
    rc = right_canonicalize(m)
    stairs = build_staircase(rc, rng)
    sign = fix_determinants(stairs)
    n = rc.n_sites
    gates: list = []
    windows = []
    distances = []
    for stair in stairs:
        wires = list(range(stair.site, stair.site + stair.n_wires))
        seed = int(rng.integers(0, 2**31 - 1))
        site_gates, dist = _emit_site_gates(stair, wires, layers, cfg, native, seed)
        start = len(gates)
        gates.extend(site_gates)
        windows.append(
            {
                "site": stair.site,
                "wires": wires,
                "k_in": stair.k_in,
                "k_out": stair.k_out,
                "gate_slice": (start, len(gates)),
            }
        )
        distances.append(dist)
    circuit = QuantumCircuit(
        n_system=n,
        n_ancilla=0,
        gates=gates,
        postselect_qubits=[],
        norm_factor=1.0,
        global_sign=sign,
        meta={"windows": windows, "gate_distances": distances, "boundary": "obc"},
    )
    circuit.validate()
    return circuit


def compile_pbc(
    m: MatrixProductState,
    layers: int | None = None,
    cfg=None,
    native: bool = False,
    alpha: float = 0.5,
    rng: np.random.Generator | None = None,
) -> QuantumCircuit:
    """Map a periodic MPS to a circuit with ``2 log2 D`` post-selected
    ancillas encoding the diagonal boundary matrix.

    The splitting gate acts on the top ancilla block plus the first ``k``
    chain wires before the staircase; its partner closes on both ancilla
    blocks at the end.  ``native=True`` synthesizes both boundary gates
    exactly from Gray-coded controlled rotations instead of dense
    completions.  The circuit's norm factor carries ``C_a * C_{1-a}``.
    """
    if m.boundary != "pbc":
        raise ValidationError("compile_pbc needs a pbc state")
    rng = rng if rng is not None else np.random.default_rng(0)
    rc = right_canonicalize(m)
    lam = rc.lam
    d_loop = lam.shape[0]
    k = _log2_exact(d_loop)
    norm2 = mps_norm(rc)
    enc = split_bond_matrix(lam, alpha, norm2)
    n = rc.n_sites
    if d_loop == 1:
        # degenerate loop: open-boundary circuit with unit success rate
        flat = rc.copy()
        flat.boundary = "obc"
        flat.lam = None
        circuit = compile_obc(flat, layers, cfg, native, rng)
        circuit.norm_factor = enc.c_alpha * enc.c_one_minus_alpha
        circuit.meta["boundary"] = "pbc"
        circuit.meta["success_rate"] = enc.success_rate
        return circuit

    anc_top = list(range(k))
    anc_bottom = list(range(k + n, k + n + k))
    gates: list = []
    windows = []
    distances = []

    if native:
        s_tilde_a, _ = _power_weights(lam, alpha)
        opener = givens_gray_synthesize(s_tilde_a)
        opener_map = anc_top + list(range(k, 2 * k))
        for g in opener:
            gates.append(_remap_gate(g, opener_map))
    else:
        v_gate = build_boundary_unitary(enc.v_alpha, rng)
        gates.append(GateOp("DENSE_UNITARY", anc_top + list(range(k, 2 * k)), matrix=v_gate))
    opener_end = len(gates)

    stairs = build_staircase(rc, rng)
    sign = fix_determinants(stairs)
    for stair in stairs:
        wires = [k + stair.site + j for j in range(stair.n_wires)]
        seed = int(rng.integers(0, 2**31 - 1))
        site_gates, dist = _emit_site_gates(stair, wires, layers, cfg, native, seed)
        start = len(gates)
        gates.extend(site_gates)
        windows.append(
            {
                "site": stair.site,
                "wires": wires,
                "k_in": stair.k_in,
                "k_out": stair.k_out,
                "gate_slice": (start, len(gates)),
            }
        )
        distances.append(dist)

    closer_map = anc_top + anc_bottom
    if native:
        s_tilde_b, _ = _power_weights(lam, 1.0 - alpha)
        closer = _invert_gates(givens_gray_synthesize(s_tilde_b))
        for g in closer:
            gates.append(_remap_gate(g, closer_map))
    else:
        v_gate = build_boundary_unitary(enc.v_one_minus_alpha, rng)
        gates.append(GateOp("DENSE_UNITARY", closer_map, matrix=v_gate.T))

    circuit = QuantumCircuit(
        n_system=n,
        n_ancilla=2 * k,
        gates=gates,
        postselect_qubits=anc_top + anc_bottom,
        norm_factor=enc.c_alpha * enc.c_one_minus_alpha,
        global_sign=sign,
        meta={
            "windows": windows,
            "gate_distances": distances,
            "boundary": "pbc",
            "success_rate": enc.success_rate,
            "opener_end": opener_end,
        },
    )
    circuit.validate()
    return circuit


def _remap_gate(g: GateOp, mapping) -> GateOp:
    qubits = [mapping[q] for q in g.qubits]
    controls = None
    if g.controls:
        controls = [(mapping[q], pol) for q, pol in g.controls]
    return GateOp(g.kind, qubits, matrix=g.matrix, params=g.params, theta=g.theta,
                  controls=controls)


# ---------------------------------------------------------------------------
# staircase circuits back to MPS (exact, no statevector)


def _lift_in_window(mat: np.ndarray, local_qubits, m: int) -> np.ndarray:
    full = np.eye(2**m, dtype=complex)
    rest = [q for q in range(m) if q not in local_qubits]
    perm = list(local_qubits) + rest
    inv = np.argsort(perm)
    v = full.reshape([2] * m + [2**m]).transpose(perm + [m]).reshape(2 ** len(local_qubits), -1)
    v = mat @ v
    return v.reshape([2] * m + [2**m]).transpose(list(inv) + [m]).reshape(2**m, 2**m)


def staircase_circuit_to_mps(circuit: QuantumCircuit) -> MatrixProductState:
    """Exact MPS for an open-boundary staircase circuit.

    Each site window's gates recombine into one dense gate whose used
    columns are the site tensor, so no statevector is ever formed; this is
    what makes large-N fidelity checks affordable.
    """
    if circuit.meta.get("boundary") != "obc" or not circuit.meta.get("windows"):
        raise ValidationError("need an obc staircase circuit with window metadata")
    tensors = []
    for win in circuit.meta["windows"]:
        wires = win["wires"]
        m = len(wires)
        net = np.eye(2**m, dtype=complex)
        lo, hi = win["gate_slice"]
        for g in circuit.gates[lo:hi]:
            local = [wires.index(q) for q in g.qubits]
            if g.kind == "MCRY":
                raise ValidationError("controlled rotations are not staircase gates")
            net = _lift_in_window(g.dense_matrix(), local, m) @ net
        if np.max(np.abs(net.imag)) > 1e-9:
            raise NumericalError("staircase gate reconstruction is not real")
        net = net.real
        stair = StairGate(win["site"], net, win["k_in"], win["k_out"])
        tensors.append(stair.tensor())
    tensors[0] = circuit.global_sign * tensors[0]
    out = MatrixProductState(tensors, "obc")
    out.validate()
    return out
