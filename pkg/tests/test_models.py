import numpy as np
import pytest

from mpsqc import models, mps
from mpsqc.errors import ValidationError


def total_z_dense(n):
    zs = np.zeros((2**n, 2**n))
    for b in range(2**n):
        zs[b, b] = n - 2 * bin(b).count("1")
    return zs


class TestHeisenberg:
    def test_two_site_spectrum(self):
        h = models.terms_to_dense(models.heisenberg(2, 1.0, "obc"))
        # singlet at -3/4, triplet at +1/4
        hand = 0.25 * np.array(
            [[1, 0, 0, 0], [0, -1, 2, 0], [0, 2, -1, 0], [0, 0, 0, 1]], dtype=float
        )
        assert np.allclose(h, hand, atol=1e-14)
        evals = np.linalg.eigvalsh(h)
        assert np.allclose(evals, [-0.75, 0.25, 0.25, 0.25], atol=1e-12)

    def test_ring_ground_energy_n4(self):
        energies, _ = models.exact_eigs(models.heisenberg(4, 1.0, "pbc"), 1)
        assert energies[0] == pytest.approx(-2.0, abs=1e-12)

    def test_delta_zero_has_no_zz_and_conserves_charge(self):
        h = models.heisenberg(5, 0.0, "obc")
        assert all("Z" not in ops for _, ops in h.terms)
        dense = models.terms_to_dense(h)
        zs = total_z_dense(5)
        assert np.linalg.norm(dense @ zs - zs @ dense) < 1e-12

    def test_pbc_needs_three_sites(self):
        with pytest.raises(ValidationError):
            models.heisenberg(2, 1.0, "pbc")


class TestSchwinger:
    def test_two_site_sector_block(self):
        h = models.schwinger(2, 1.0, 0.0, 0.0)
        dense = models.terms_to_dense(h)
        # chargeless basis |01>, |10>; hand expansion gives [[1, 1], [1, 0]]
        block = dense[np.ix_([1, 2], [1, 2])]
        assert np.allclose(block, [[1.0, 1.0], [1.0, 0.0]], atol=1e-12)
        energies, _ = models.exact_eigs(h, 1, sector=0)
        assert energies[0] == pytest.approx((1.0 - np.sqrt(5.0)) / 2.0, abs=1e-12)

    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_charge_conservation(self, n):
        dense = models.terms_to_dense(models.schwinger(n, 1.3, 0.4, 0.1))
        zs = total_z_dense(n)
        assert np.linalg.norm(dense @ zs - zs @ dense) < 1e-10
        assert np.linalg.norm(dense - dense.T) < 1e-12

    def test_paper_benchmark_point_builds(self):
        h = models.schwinger(12, 1.44, 0.3, 0.0)
        h.validate()
        assert h.n_sites == 12

    def test_odd_n_rejected(self):
        with pytest.raises(ValidationError):
            models.schwinger(3, 1.0, 0.0, 0.0)


class TestTermsToDense:
    def test_single_z(self):
        h = models.PauliTermSet(1, [(1.0, ("Z",))])
        assert np.allclose(models.terms_to_dense(h), np.diag([1.0, -1.0]))

    def test_random_sets_symmetric(self):
        rng = np.random.default_rng(0)
        labels = ["I", "X", "Z"]
        for _ in range(5):
            n = int(rng.integers(2, 6))
            terms = [
                (float(rng.standard_normal()), tuple(rng.choice(labels, size=n)))
                for _ in range(6)
            ]
            dense = models.terms_to_dense(models.PauliTermSet(n, terms))
            assert np.linalg.norm(dense - dense.T) < 1e-12

    def test_splus_sminus_pairing(self):
        h = models.PauliTermSet(
            2, [(1.0, ("S+", "S-")), (1.0, ("S-", "S+"))]
        )
        dense = models.terms_to_dense(h)
        assert np.allclose(dense, dense.T)
        assert dense[1, 2] == pytest.approx(1.0)


class TestMpo:
    def test_single_string_bond_one(self):
        h = models.PauliTermSet(4, [(0.7, ("X", "I", "Z", "X"))])
        mpo = models.terms_to_mpo(h)
        assert all(w == 1 for w in mpo.bond_dims)
        assert np.allclose(models.mpo_to_dense(mpo), models.terms_to_dense(h), atol=1e-12)

    def test_heisenberg_bond_dimension(self):
        h = models.heisenberg(8, 1.0, "obc")
        mpo = models.terms_to_mpo(h)
        assert max(mpo.bond_dims) <= 5
        assert np.allclose(
            models.mpo_to_dense(mpo), models.terms_to_dense(h), atol=1e-10
        )

    def test_schwinger_reconstruction(self):
        h = models.schwinger(10, 1.0, 0.5, 0.0)
        mpo = models.terms_to_mpo(h)
        err = np.max(np.abs(models.mpo_to_dense(mpo) - models.terms_to_dense(h)))
        assert err < 1e-10


class TestExactEigs:
    def test_identity_hamiltonian(self):
        h = models.PauliTermSet(3, [(1.0, ("I", "I", "I"))])
        energies, _ = models.exact_eigs(h, 4)
        assert np.allclose(energies, 1.0)

    def test_sector_overflow(self):
        with pytest.raises(ValidationError):
            models.exact_eigs(models.schwinger(2, 1.0, 0.0, 0.0), 5, sector=0)

    def test_sector_matches_full_spectrum(self):
        h = models.schwinger(6, 1.2, 0.3, 0.0)
        dense = models.terms_to_dense(h)
        all_evals = np.linalg.eigvalsh(dense)
        sec_energies, sec_vecs = models.exact_eigs(h, 3, sector=0)
        for e, v in zip(sec_energies, sec_vecs):
            assert np.min(np.abs(all_evals - e)) < 1e-10
            assert np.linalg.norm(dense @ v - e * v) < 1e-10

    def test_dense_matrix_input(self):
        h = models.heisenberg(4, 1.0, "pbc")
        dense = models.terms_to_dense(h)
        energies, vecs = models.exact_eigs(dense, 2)
        assert energies[0] == pytest.approx(-2.0, abs=1e-12)
        assert np.linalg.norm(dense @ vecs[0] - energies[0] * vecs[0]) < 1e-10


class TestTrotter:
    def test_dt_zero_gives_identities(self):
        for u, _pair in models.trotter_layer(6, 0.7, 0.0, "pbc"):
            assert np.allclose(u, np.eye(4), atol=1e-14)

    def test_gates_unitary_and_layout(self):
        seq = models.trotter_layer(6, -0.5, 0.05, "pbc")
        for u, (a, b) in seq:
            assert np.linalg.norm(u @ u.conj().T - np.eye(4)) < 1e-12
        pairs = [pair for _, pair in seq]
        assert (5, 0) in pairs  # wrap-around bond in the even layer
        assert pairs.count((0, 1)) == 2  # half steps bracket the even layer

    def test_obc_has_no_wrap(self):
        pairs = [pair for _, pair in models.trotter_layer(6, 1.0, 0.1, "obc")]
        assert (5, 0) not in pairs


class TestPbcGroundMps:
    def test_n4_exact_at_d4(self):
        rng = np.random.default_rng(1)
        fit, fid = models.pbc_ground_mps(4, 1.0, 4, rng, max_sweeps=60)
        assert fid == pytest.approx(1.0, abs=1e-8)
        energies, vecs = models.exact_eigs(models.heisenberg(4, 1.0, "pbc"), 1, sector=0)
        v = mps.to_statevector(fit)
        overlap = np.dot(v, vecs[0]) ** 2 / np.dot(v, v)
        assert overlap == pytest.approx(1.0, abs=1e-8)

    def test_translation_covariance_exact_rank(self):
        rng = np.random.default_rng(2)
        fit, fid = models.pbc_ground_mps(6, 1.0, 8, rng, max_sweeps=60)
        assert fid == pytest.approx(1.0, abs=1e-8)
        v = mps.to_statevector(fit)
        v = v / np.linalg.norm(v)
        shifted = v.reshape([2] * 6).transpose([1, 2, 3, 4, 5, 0]).reshape(-1)
        assert abs(np.dot(v, shifted)) == pytest.approx(1.0, abs=1e-6)
