"""Gate and circuit data model with deterministic JSON serialization.

Gate kinds:

* ``DENSE_UNITARY`` -- explicit matrix on an ordered qubit list
* ``SO4``           -- two-qubit real rotation, stored as the 6 strict
                       lower-triangle entries of its skew-symmetric generator
* ``RY``            -- single-qubit Y rotation
* ``MCRY``          -- multi-controlled Y rotation with control polarities
* ``CNOT``          -- qubits[0] controls, qubits[1] is the target

Qubits are big-endian throughout: qubit 0 is the most significant bit of a
basis index, and a dense payload's first tensor factor acts on the first
entry of ``qubits``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .tensor import expm_skew

__all__ = ["GateOp", "QuantumCircuit", "skew_from_params", "params_from_skew",
           "circuit_to_dict", "circuit_from_dict", "gate_counts"]

_SKEW_ROWS = (1, 2, 2, 3, 3, 3)
_SKEW_COLS = (0, 0, 1, 0, 1, 2)


def skew_from_params(params) -> np.ndarray:
    params = np.asarray(params, dtype=float).reshape(6)
    a = np.zeros((4, 4))
    a[_SKEW_ROWS, _SKEW_COLS] = params
    return a - a.T


def params_from_skew(a: np.ndarray) -> np.ndarray:
    return np.asarray(a)[_SKEW_ROWS, _SKEW_COLS].copy()


@dataclass
class GateOp:
    kind: str
    qubits: list
    matrix: np.ndarray | None = None
    params: np.ndarray | None = None
    theta: float | None = None
    controls: list | None = None  # [(qubit, polarity)] for MCRY

    def n_qubits(self) -> int:
        return len(self.qubits)

    def dense_matrix(self) -> np.ndarray:
        """Matrix over the qubits in ``self.qubits`` (controls excluded)."""
        if self.kind == "DENSE_UNITARY":
            return np.asarray(self.matrix)
        if self.kind == "SO4":
            return expm_skew(skew_from_params(self.params))
        if self.kind in ("RY", "MCRY"):
            c, s = np.cos(self.theta / 2.0), np.sin(self.theta / 2.0)
            return np.array([[c, -s], [s, c]])
        if self.kind == "CNOT":
            return np.array(
                [[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 0, 1.0], [0, 0, 1.0, 0]]
            )
        raise ValidationError(f"unknown gate kind {self.kind!r}")

    def validate(self) -> None:
        if len(set(self.qubits)) != len(self.qubits):
            raise ValidationError("repeated qubit in gate")
        if self.kind == "DENSE_UNITARY":
            m = np.asarray(self.matrix)
            dim = 2 ** len(self.qubits)
            if m.shape != (dim, dim):
                raise ValidationError(f"matrix shape {m.shape} for {len(self.qubits)} qubits")
            if np.linalg.norm(m.conj().T @ m - np.eye(dim)) > 1e-10:
                raise ValidationError("dense payload is not unitary")
        elif self.kind == "SO4":
            if len(self.qubits) != 2 or np.asarray(self.params).size != 6:
                raise ValidationError("SO4 gate needs 2 qubits and 6 parameters")
        elif self.kind == "RY":
            if len(self.qubits) != 1 or self.theta is None:
                raise ValidationError("RY needs one target and an angle")
        elif self.kind == "MCRY":
            if len(self.qubits) != 1 or self.theta is None:
                raise ValidationError("MCRY needs one target and an angle")
            for q, pol in self.controls or []:
                if pol not in (0, 1):
                    raise ValidationError("control polarity must be 0 or 1")
                if q in self.qubits:
                    raise ValidationError("control overlaps target")
        elif self.kind == "CNOT":
            if len(self.qubits) != 2:
                raise ValidationError("CNOT needs control and target")
        else:
            raise ValidationError(f"unknown gate kind {self.kind!r}")

    def all_qubits(self) -> list:
        qs = list(self.qubits)
        for q, _pol in self.controls or []:
            qs.append(q)
        return qs


@dataclass
class QuantumCircuit:
    n_system: int
    n_ancilla: int = 0
    gates: list = field(default_factory=list)
    postselect_qubits: list = field(default_factory=list)
    norm_factor: float = 1.0
    global_sign: float = 1.0
    meta: dict = field(default_factory=dict)  # in-memory only (site windows)

    @property
    def n_qubits(self) -> int:
        return self.n_system + self.n_ancilla

    def validate(self) -> None:
        n = self.n_qubits
        for g in self.gates:
            g.validate()
            if any(q < 0 or q >= n for q in g.all_qubits()):
                raise ValidationError("gate qubit index out of range")
        if any(q < 0 or q >= n for q in self.postselect_qubits):
            raise ValidationError("postselect qubit out of range")


def gate_counts(circuit: QuantumCircuit) -> dict:
    counts: dict = {}
    for g in circuit.gates:
        counts[g.kind] = counts.get(g.kind, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# JSON wire format


def _gate_to_dict(g: GateOp) -> dict:
    d = {"kind": g.kind, "qubits": [int(q) for q in g.qubits]}
    if g.kind == "DENSE_UNITARY":
        m = np.asarray(g.matrix)
        d["matrix"] = np.real(m).tolist()
        if np.iscomplexobj(m) and np.max(np.abs(m.imag)) > 0.0:
            d["matrix_imag"] = np.imag(m).tolist()
    elif g.kind == "SO4":
        d["params"] = np.asarray(g.params, dtype=float).reshape(6).tolist()
    elif g.kind in ("RY", "MCRY"):
        d["theta"] = float(g.theta)
        if g.kind == "MCRY":
            d["controls"] = [
                {"qubit": int(q), "polarity": int(p)} for q, p in (g.controls or [])
            ]
    return d


def _gate_from_dict(d: dict) -> GateOp:
    kind = d["kind"]
    qubits = [int(q) for q in d["qubits"]]
    if kind == "DENSE_UNITARY":
        m = np.asarray(d["matrix"], dtype=float)
        if "matrix_imag" in d:
            m = m + 1j * np.asarray(d["matrix_imag"], dtype=float)
        return GateOp(kind, qubits, matrix=m)
    if kind == "SO4":
        return GateOp(kind, qubits, params=np.asarray(d["params"], dtype=float))
    if kind in ("RY", "MCRY"):
        controls = [(int(c["qubit"]), int(c["polarity"])) for c in d.get("controls", [])]
        return GateOp(kind, qubits, theta=float(d["theta"]), controls=controls or None)
    if kind == "CNOT":
        return GateOp(kind, qubits)
    raise ValidationError(f"unknown gate kind {kind!r}")


def circuit_to_dict(c: QuantumCircuit) -> dict:
    return {
        "n_system": c.n_system,
        "n_ancilla": c.n_ancilla,
        "postselect_qubits": [int(q) for q in c.postselect_qubits],
        "norm_factor": float(c.norm_factor),
        "global_sign": float(c.global_sign),
        "gates": [_gate_to_dict(g) for g in c.gates],
    }


def circuit_from_dict(d: dict) -> QuantumCircuit:
    try:
        c = QuantumCircuit(
            n_system=int(d["n_system"]),
            n_ancilla=int(d["n_ancilla"]),
            gates=[_gate_from_dict(g) for g in d["gates"]],
            postselect_qubits=[int(q) for q in d["postselect_qubits"]],
            norm_factor=float(d["norm_factor"]),
            global_sign=float(d.get("global_sign", 1.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed circuit document: {exc}") from exc
    c.validate()
    return c
