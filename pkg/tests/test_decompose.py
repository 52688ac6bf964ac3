import numpy as np
import pytest

from mpsqc import compiler, decompose, mps, simulator
from mpsqc.decompose import OptimizerConfig
from mpsqc.errors import ValidationError
from mpsqc.tensor import expm_skew


def random_so(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return expm_skew(a - a.T)


class TestDecomposeMultiqubit:
    def test_identity_target(self):
        res = decompose.decompose_multiqubit(
            np.eye(4), 1, OptimizerConfig(restarts=1, loss_floor=1e-13)
        )
        assert res.frobenius_distance < 1e-12

    def test_two_qubit_exact(self):
        rng = np.random.default_rng(0)
        target = random_so(rng, 4, scale=0.5)
        res = decompose.decompose_multiqubit(
            target, 1, OptimizerConfig(restarts=3, loss_floor=1e-15), seed=1
        )
        assert res.frobenius_distance < 1e-14

    def test_three_qubit_ladder_target(self):
        # representable target; the redundant parameterization leaves a slow
        # tail, so only recovery down to a loose floor is asserted
        rng = np.random.default_rng(1)
        params = rng.uniform(0, 0.1, size=(2, 2, 6))
        target = decompose.ladder_matrix(params, 3)
        res = decompose.decompose_multiqubit(
            target, 2, OptimizerConfig(restarts=3, loss_floor=1e-13), seed=2
        )
        assert res.frobenius_distance < 1e-6

    def test_reported_distance_matches_reconstruction(self):
        rng = np.random.default_rng(2)
        target = random_so(rng, 8, scale=0.3)
        res = decompose.decompose_multiqubit(
            target, 2, OptimizerConfig(restarts=2, max_iter=80), seed=3
        )
        rebuilt = decompose.ladder_matrix(res.params, 3)
        assert np.sum((rebuilt - target) ** 2) == pytest.approx(
            res.frobenius_distance, abs=1e-10
        )

    def test_loss_trace_non_increasing(self):
        rng = np.random.default_rng(3)
        target = random_so(rng, 4, scale=0.4)
        res = decompose.decompose_multiqubit(
            target, 1, OptimizerConfig(restarts=1, max_iter=40, track_trace=True), seed=4
        )
        trace = np.array(res.loss_trace)
        assert np.all(np.diff(trace) <= 1e-10)

    def test_negative_determinant_rejected(self):
        bad = np.diag([1.0, 1.0, 1.0, -1.0])
        with pytest.raises(ValidationError):
            decompose.decompose_multiqubit(bad, 1)

    def test_gate_ops_match_matrix(self):
        rng = np.random.default_rng(4)
        params = rng.uniform(0, 0.1, size=(2, 3, 6))
        ops = decompose.ladder_gate_ops(params, [0, 1, 2, 3])
        state = simulator.basis_state([0, 0, 0, 0])
        rng2 = np.random.default_rng(5)
        init = rng2.standard_normal(16) + 1j * rng2.standard_normal(16)
        init /= np.linalg.norm(init)
        state = init
        for op in ops:
            state = simulator.apply_gate(state, op, 4)
        want = decompose.ladder_matrix(params, 4) @ init
        assert np.linalg.norm(state - want) < 1e-12


class TestDisentanglers:
    def test_identical_states_layer_zero(self):
        rng = np.random.default_rng(6)
        m = mps.random_mps(5, 2, "obc", rng)
        res = decompose.optimize_disentanglers(m, m, 0)
        assert res.fidelity == pytest.approx(1.0, abs=1e-12)

    def test_single_layer_improves_compression(self):
        rng = np.random.default_rng(7)
        m = mps.random_mps(6, 4, "obc", rng)
        comp, _fid = mps.compress_obc(m, 2)
        base = decompose.optimize_disentanglers(m, comp, 0).fidelity
        res = decompose.optimize_disentanglers(
            m, comp, 1, OptimizerConfig(restarts=2, max_iter=80), seed=8
        )
        assert res.fidelity > base + 1e-4

    def test_warm_start_extends_monotonically(self):
        rng = np.random.default_rng(8)
        m = mps.random_mps(6, 4, "obc", rng)
        comp, _fid = mps.compress_obc(m, 2)
        cfg = OptimizerConfig(restarts=1, max_iter=60)
        res1 = decompose.optimize_disentanglers(m, comp, 1, cfg, seed=9)
        res2 = decompose.optimize_disentanglers(
            m, comp, 2, cfg, seed=10, warm_params=res1.params
        )
        assert res2.fidelity >= res1.fidelity - 1e-9

    def test_pbc_wrap_gate_present(self):
        rng = np.random.default_rng(9)
        m = mps.random_mps(4, 4, "pbc", rng)
        comp, _rep = mps.compress_pbc(m, 2, max_sweeps=20)
        res = decompose.optimize_disentanglers(
            m, comp, 1, OptimizerConfig(restarts=1, max_iter=40), seed=11
        )
        assert (3, 0) in [tuple(g.qubits) for g in res.gates]

    def test_wrap_application_matches_dense(self):
        import torch

        rng = np.random.default_rng(10)
        n = 4
        g = random_so(rng, 4, 0.7)
        state = rng.standard_normal(2**n)
        got = decompose._apply_pair_t(
            torch, torch.from_numpy(state), torch.from_numpy(g), n - 1, n
        ).numpy()
        # dense oracle: lift acting on (q3, q0)
        full = np.zeros((16, 16))
        for i in range(16):
            b = [(i >> (3 - q)) & 1 for q in range(4)]
            for j in range(16):
                c = [(j >> (3 - q)) & 1 for q in range(4)]
                if b[1] != c[1] or b[2] != c[2]:
                    continue
                full[i, j] = g[2 * b[3] + b[0], 2 * c[3] + c[0]]
        assert np.linalg.norm(got - full @ state) < 1e-12
