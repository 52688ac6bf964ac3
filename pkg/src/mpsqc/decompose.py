"""Variational SO(4)-ladder decomposition of multi-qubit gates and
disentangler optimization.

Both optimizations share the same machinery: ladder layers of two-qubit
rotations parameterized through the exponential map of skew-symmetric
matrices, minimized with L-BFGS under a strong-Wolfe line search
(learning rate 0.1, up to 200 steps, best of 10 random restarts with
entries drawn uniformly from [0, 0.1) unless configured otherwise).
Autodiff comes from torch; everything runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import GateOp
from .errors import ValidationError
from .mps import MatrixProductState, to_statevector

__all__ = [
    "OptimizerConfig",
    "DecompositionResult",
    "DisentangleResult",
    "decompose_multiqubit",
    "ladder_gate_ops",
    "ladder_matrix",
    "optimize_disentanglers",
]

_SKEW_ROWS = (1, 2, 2, 3, 3, 3)
_SKEW_COLS = (0, 0, 1, 0, 1, 2)


@dataclass
class OptimizerConfig:
    """Settings for the ladder optimizations.

    The landscape is ill-conditioned: the damped strong-Wolfe steps shrink
    the loss by only a few percent per iteration, so exactly-representable
    targets need on the order of a thousand iterations.  The run is chunked:
    it exits early once the loss drops under ``loss_floor`` (converged) or
    once a chunk improves it by less than ``plateau_ratio`` (stuck, e.g. an
    under-parameterized layer count).  Restarts stop early on a converged
    run.  ``column_restricted`` limits the distance to the input columns a
    staircase gate actually uses; the full-matrix distance is available by
    turning it off, but adjacent-pair ladders cannot represent a generic
    orthogonal gate on all columns, so the full loss plateaus high even
    when the prepared state would be exact.
    """

    max_iter: int = 1500
    restarts: int = 10
    lr: float = 0.1
    init_low: float = 0.0
    init_high: float = 0.1
    track_trace: bool = False
    column_restricted: bool = True
    chunk: int = 50
    loss_floor: float = 1e-11
    plateau_ratio: float = 0.95


@dataclass
class DecompositionResult:
    layers: int
    params: np.ndarray  # (layers, gates_per_layer, 6)
    frobenius_distance: float
    restarts_used: int
    loss_trace: list | None = None


@dataclass
class DisentangleResult:
    layers: int
    params: np.ndarray
    gates: list
    fidelity: float
    restarts_used: int
    loss_trace: list | None = None


def _torch():
    import torch

    torch.set_num_threads(max(1, min(2, torch.get_num_threads())))
    return torch


def ladder_pairs(n_qubits: int) -> list:
    """Adjacent pairs in bottom-to-top ladder order."""
    return [(n_qubits - 2 - g, n_qubits - 1 - g) for g in range(n_qubits - 1)]


def _gate_bank(torch, params):
    """Batched exponentials of the skew generators; params (..., 6)."""
    shape = params.shape[:-1]
    a = params.new_zeros(shape + (4, 4))
    a[..., _SKEW_ROWS, _SKEW_COLS] = params
    a = a - a.transpose(-1, -2)
    return torch.linalg.matrix_exp(a)


def _ladder_matrix_t(torch, params, n_qubits: int):
    gates = _gate_bank(torch, params)
    dim = 2**n_qubits
    m = torch.eye(dim, dtype=params.dtype)
    pairs = ladder_pairs(n_qubits)
    for layer in range(params.shape[0]):
        for gi, (a, _b) in enumerate(pairs):
            lift = gates[layer, gi]
            if a > 0:
                lift = torch.kron(torch.eye(2**a, dtype=params.dtype), lift)
            tail = n_qubits - a - 2
            if tail > 0:
                lift = torch.kron(lift, torch.eye(2**tail, dtype=params.dtype))
            m = lift @ m
    return m


def ladder_matrix(params: np.ndarray, n_qubits: int) -> np.ndarray:
    """Numpy reconstruction of the ladder product (independent of torch)."""
    from .tensor import expm_skew

    params = np.asarray(params, dtype=float)
    dim = 2**n_qubits
    m = np.eye(dim)
    for layer in range(params.shape[0]):
        for gi, (a, _b) in enumerate(ladder_pairs(n_qubits)):
            skew = np.zeros((4, 4))
            skew[_SKEW_ROWS, _SKEW_COLS] = params[layer, gi]
            g = expm_skew(skew - skew.T)
            lift = np.kron(np.kron(np.eye(2**a), g), np.eye(dim // 2 ** (a + 2)))
            m = lift @ m
    return m


def ladder_gate_ops(params: np.ndarray, wires) -> list:
    """SO4 gate ops in application order for the given wire window."""
    n_qubits = len(wires)
    ops = []
    for layer in range(params.shape[0]):
        for gi, (a, b) in enumerate(ladder_pairs(n_qubits)):
            ops.append(GateOp("SO4", [wires[a], wires[b]], params=params[layer, gi].copy()))
    return ops


def _run_lbfgs(torch, params, loss_fn, cfg: OptimizerConfig):
    trace = [] if cfg.track_trace else None
    chunk = 1 if cfg.track_trace else min(cfg.chunk, cfg.max_iter)
    opt = torch.optim.LBFGS(
        [params],
        lr=cfg.lr,
        max_iter=chunk,
        line_search_fn="strong_wolfe",
        tolerance_grad=1e-13,
        tolerance_change=1e-16,
        history_size=30,
    )

    def closure():
        opt.zero_grad()
        loss = loss_fn(params)
        loss.backward()
        return loss

    done = 0
    prev = np.inf
    while done < cfg.max_iter:
        opt.step(closure)
        done += chunk
        with torch.no_grad():
            cur = float(loss_fn(params))
        if cfg.track_trace:
            trace.append(cur)
        if cur < cfg.loss_floor:
            break
        if not cfg.track_trace and cur > cfg.plateau_ratio * prev:
            break
        prev = cur
    with torch.no_grad():
        final = float(loss_fn(params))
    return final, trace


def decompose_multiqubit(
    target: np.ndarray,
    layers: int,
    cfg: OptimizerConfig | None = None,
    seed: int = 0,
    used_columns=None,
) -> DecompositionResult:
    """Fit ``layers`` SO(4)-ladder layers to an orthogonal det-+1 target.

    Minimizes the squared Frobenius distance between the ladder product and
    the target (optionally restricted to the physically used input columns)
    and keeps the best of the configured restarts.
    """
    cfg = cfg or OptimizerConfig()
    target = np.asarray(target, dtype=float)
    dim = target.shape[0]
    n_qubits = int(np.log2(dim))
    if 2**n_qubits != dim or target.shape != (dim, dim):
        raise ValidationError("target must be square with power-of-2 size")
    if n_qubits < 2 or n_qubits > 4:
        raise ValidationError("ladder decomposition covers 2..4 qubit gates")
    if np.linalg.norm(target.T @ target - np.eye(dim)) > 1e-8:
        raise ValidationError("target is not orthogonal")
    if np.linalg.slogdet(target)[0] < 0:
        raise ValidationError("target determinant is -1; fix determinants first")
    torch = _torch()
    target_t = torch.from_numpy(target)
    n_gates = n_qubits - 1
    restrict = cfg.column_restricted and used_columns is not None
    cols = torch.tensor(list(used_columns), dtype=torch.long) if restrict else None

    def loss_fn(p):
        diff = _ladder_matrix_t(torch, p, n_qubits) - target_t
        if cols is not None:
            diff = diff[:, cols]
        return (diff**2).sum()

    best = None
    for restart in range(cfg.restarts):
        gen = torch.Generator().manual_seed(seed + 7919 * restart)
        init = cfg.init_low + (cfg.init_high - cfg.init_low) * torch.rand(
            layers, n_gates, 6, generator=gen, dtype=torch.float64
        )
        params = init.requires_grad_()
        final, trace = _run_lbfgs(torch, params, loss_fn, cfg)
        if best is None or final < best[0]:
            best = (final, params.detach().numpy().copy(), restart + 1, trace)
        if best[0] < cfg.loss_floor:
            break  # already converged; further restarts cannot improve results
    dist, best_params, used, trace = best
    return DecompositionResult(
        layers=layers,
        params=best_params,
        frobenius_distance=float(dist),
        restarts_used=used,
        loss_trace=trace,
    )


# ---------------------------------------------------------------------------
# disentanglers


def _apply_pair_t(torch, state, gate, a: int, n: int):
    """Apply a 4x4 gate to qubit pair (a, a+1) or the wrap pair (n-1, 0)."""
    if a < n - 1:
        left = 2**a
        right = 2 ** (n - a - 2)
        v = state.reshape(left, 4, right)
        return torch.einsum("ij,ajb->aib", gate, v).reshape(-1)
    # wrap-around pair (n-1, 0)
    g4 = gate.reshape(2, 2, 2, 2)  # [out_{n-1}, out_0, in_{n-1}, in_0]
    v = state.reshape(2, 2 ** (n - 2), 2)  # [q0, middle, q_{n-1}]
    return torch.einsum("dcba,amb->cmd", g4, v).reshape(-1)


def disentangler_pairs(n_sites: int, wrap: bool) -> list:
    pairs = [(i, i + 1) for i in range(n_sites - 1)]
    if wrap:
        pairs.append((n_sites - 1, 0))
    return pairs


def optimize_disentanglers(
    original: MatrixProductState,
    compressed: MatrixProductState,
    layers: int,
    cfg: OptimizerConfig | None = None,
    seed: int = 0,
    warm_params: np.ndarray | None = None,
) -> DisentangleResult:
    """Optimize ladder layers of SO(4) gates so the original state, with the
    gates applied, matches the compressed one.

    The ladder runs up the chain once per layer; periodic states append the
    wrap-around gate last.  A warm start extends a previous solution by a
    zero-initialized (identity) layer, guaranteeing the best fidelity is
    non-decreasing in the layer count.
    """
    if original.n_sites != compressed.n_sites:
        raise ValidationError("site-count mismatch")
    cfg = cfg or OptimizerConfig()
    n = original.n_sites
    if n > 20:
        raise ValidationError("statevector objective guarded at n <= 20")
    torch = _torch()
    v_orig = to_statevector(original)
    v_comp = to_statevector(compressed)
    v_orig = torch.from_numpy(v_orig / np.linalg.norm(v_orig))
    v_comp = torch.from_numpy(v_comp / np.linalg.norm(v_comp))
    wrap = original.boundary == "pbc"
    pairs = disentangler_pairs(n, wrap)
    n_gates = len(pairs)
    if layers == 0:
        fid = float(torch.dot(v_comp, v_orig) ** 2)
        return DisentangleResult(0, np.zeros((0, n_gates, 6)), [], fid, 0, None)

    def loss_fn(p):
        gates = _gate_bank(torch, p)
        v = v_orig
        for layer in range(p.shape[0]):
            for gi, (a, _b) in enumerate(pairs):
                v = _apply_pair_t(torch, v, gates[layer, gi], a, n)
        return 1.0 - torch.dot(v_comp, v) ** 2

    inits = []
    for restart in range(cfg.restarts):
        gen = torch.Generator().manual_seed(seed + 6271 * restart)
        inits.append(
            cfg.init_low
            + (cfg.init_high - cfg.init_low)
            * torch.rand(layers, n_gates, 6, generator=gen, dtype=torch.float64)
        )
    if warm_params is not None:
        warm = np.zeros((layers, n_gates, 6))
        w = np.asarray(warm_params)
        warm[: min(layers, w.shape[0])] = w[: min(layers, w.shape[0])]
        inits.append(_torch().from_numpy(warm))

    best = None
    for idx, init in enumerate(inits):
        params = init.clone().requires_grad_()
        final, trace = _run_lbfgs(torch, params, loss_fn, cfg)
        if best is None or final < best[0]:
            best = (final, params.detach().numpy().copy(), idx + 1, trace)
        if best[0] < cfg.loss_floor:
            break
    loss, params, used, trace = best
    gates = []
    for layer in range(layers):
        for gi, (a, b) in enumerate(pairs):
            gates.append(GateOp("SO4", [a, b], params=params[layer, gi].copy()))
    return DisentangleResult(
        layers=layers,
        params=params,
        gates=gates,
        fidelity=float(np.clip(1.0 - loss, 0.0, 1.0)),
        restarts_used=used,
        loss_trace=trace,
    )
