"""Tests for Gram-matrix optimization and the CPTP order test."""

import math

import numpy as np
import pytest

from qdbench.blocksym import gram_of, symmetry_check, twirl
from qdbench.fock import DensityMatrix, coherent_state, fidelity, noisy_coherent
from qdbench.gramopt import (CPTPOrderResult, GramMatrix, cptp_reachable, gram_purity,
                             is_rotation_generated, optimize_gram, purity_upper_bound,
                             rotation_ensemble)

from conftest import coherent_overlap

DIM = 16


def coherent_ring(m, alpha=0.5, dim=DIM):
    return rotation_ensemble(coherent_state(alpha, dim), m)


def noisy_ring(m, alpha=0.45, excess=0.1, dim=DIM):
    return rotation_ensemble(noisy_coherent(alpha, excess, dim), m)


def ring_overlaps(m, alpha=0.5):
    alphas = [alpha * np.exp(-2j * np.pi * k / m) for k in range(m)]
    return np.array([[coherent_overlap(alphas[k], alphas[l]) for l in range(m)]
                     for k in range(m)])


class TestGramMatrix:
    def test_unit_diagonal_enforced(self):
        with pytest.raises(ValueError, match="diagonal"):
            GramMatrix(np.diag([1.0, 0.9]).astype(complex))

    def test_rejects_non_psd(self):
        z = np.array([[1.0, 1.2], [1.2, 1.0]], dtype=complex)
        with pytest.raises(ValueError):
            GramMatrix(z)

    def test_rho_a_convention(self):
        z = np.array([[1.0, 0.3 + 0.1j], [0.3 - 0.1j, 1.0]])
        g = GramMatrix(z)
        # rho_A[k,l] = Z_lk / M
        assert g.rho_a[0, 1] == pytest.approx((0.3 - 0.1j) / 2)
        again = GramMatrix.from_rho_a(g.rho_a)
        np.testing.assert_allclose(again.z, z, atol=1e-14)

    def test_circulant_deviation(self):
        z = np.array([[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]], dtype=complex)
        assert GramMatrix(z).circulant_deviation() <= 1e-15
        z2 = z.copy()
        z2[0, 1] = z2[1, 0] = 0.4
        assert GramMatrix(z2).circulant_deviation() > 0.05

    def test_json_round_trip(self):
        z = np.array([[1.0, 0.2 + 0.4j], [0.2 - 0.4j, 1.0]])
        g = GramMatrix(z)
        again = GramMatrix.from_json_dict(g.to_json_dict())
        np.testing.assert_allclose(again.z, z, atol=1e-15)


class TestGramPurity:
    def test_orthogonal(self):
        assert gram_purity(GramMatrix(np.eye(4, dtype=complex))) == pytest.approx(0.25)

    def test_identical_states(self):
        z = np.ones((3, 3), dtype=complex)
        assert gram_purity(GramMatrix(z)) == pytest.approx(1.0)

    def test_coherent_pair(self):
        f = math.exp(-1.0)  # |<alpha|-alpha>|^2 at alpha = 0.5
        z = np.array([[1.0, math.sqrt(f)], [math.sqrt(f), 1.0]], dtype=complex)
        assert gram_purity(GramMatrix(z)) == pytest.approx((2 + 2 * f) / 4, abs=1e-12)


class TestPurityUpperBound:
    def test_identical(self):
        st = coherent_state(0.3, DIM)
        assert purity_upper_bound([st, st, st]) == pytest.approx(1.0, abs=1e-9)

    def test_two_states(self):
        a, b = noisy_coherent(0.4, 0.1, DIM), noisy_coherent(-0.4, 0.1, DIM)
        f = fidelity(a, b)
        assert purity_upper_bound([a, b]) == pytest.approx((1 + f) / 2, abs=1e-10)


class TestRotationEnsemble:
    def test_generated_and_detected(self):
        states = noisy_ring(5)
        assert is_rotation_generated(states)
        assert symmetry_check

    def test_detects_violation(self):
        states = noisy_ring(3)
        broken = states[:2] + [noisy_coherent(0.47, 0.1, DIM)]
        assert not is_rotation_generated(broken)


class TestOptimizeGram:
    def test_pure_states_recover_overlap_moduli(self):
        for m in (2, 3):
            res = optimize_gram(coherent_ring(m, dim=12))
            expected = np.abs(ring_overlaps(m))
            assert np.max(np.abs(np.abs(res.gram.z) - expected)) <= 1e-5

    def test_two_mixed_states_reach_fidelity_purity(self):
        a, b = noisy_coherent(0.4, 0.15, DIM), noisy_coherent(-0.4, 0.15, DIM)
        res = optimize_gram([a, b])
        target = (1 + fidelity(a, b)) / 2
        assert res.purity == pytest.approx(target, abs=1e-5)

    def test_orthogonal_support_forces_identity(self):
        d = 8
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[0, 0] = 0.7
        rho0[1, 1] = 0.3
        rho1 = np.zeros((d, d), dtype=complex)
        rho1[4, 4] = 0.5
        rho1[5, 5] = 0.5
        res = optimize_gram([DensityMatrix(rho0), DensityMatrix(rho1)])
        assert abs(res.gram.z[0, 1]) <= 1e-6

    def test_uhlmann_bound_respected(self):
        states = noisy_ring(4, dim=12)
        res = optimize_gram(states)
        for k in range(4):
            for l in range(k):
                f = fidelity(states[k], states[l])
                assert abs(res.gram.z[k, l]) ** 2 <= f + 1e-6

    def test_diagonal_blocks_are_test_states(self):
        states = noisy_ring(3)
        res = optimize_gram(states)
        for k in range(3):
            assert np.max(np.abs(res.rho_in.blocks[k, k] - states[k].matrix)) <= 1e-6

    def test_gram_consistent_with_rho_in(self):
        states = noisy_ring(3)
        res = optimize_gram(states)
        np.testing.assert_allclose(gram_of(res.rho_in).z, res.gram.z, atol=1e-6)

    def test_symmetric_output_is_symmetric_and_circulant(self):
        states = noisy_ring(4)
        res = optimize_gram(states, symmetric=True)
        assert res.gram.circulant_deviation() <= 1e-9
        assert symmetry_check(res.rho_in) <= 1e-8

    def test_symmetric_requires_rotation_ensemble(self):
        a, b = noisy_coherent(0.4, 0.1, DIM), noisy_coherent(0.5, 0.1, DIM)
        with pytest.raises(ValueError, match="rotation-generated"):
            optimize_gram([a, b], symmetric=True)

    def test_symmetric_vs_general_cross_validation(self):
        # Guards the parameter reduction.  The h values themselves are not
        # comparable across the two paths (the unsymmetrized optimizer exploits
        # the continuous purification-phase freedom, which the cyclic sector
        # quantizes; at M=2 the gap is exactly a factor sqrt(2)), so the
        # cross-validation asserts the relations that hold exactly:
        #   (a) the general optimum dominates the symmetric one,
        #   (b) twirling the general argmax lands in the symmetric sector where
        #       the symmetric solve is optimal,
        #   (c) with the purity refinement both paths reach the same purity.
        for m in (2, 3, 4):
            states = noisy_ring(m, dim=10)
            res_sym = optimize_gram(states, symmetric=True)
            res_gen = optimize_gram(states, pre_rotate=False)
            assert res_sym.h_value <= res_gen.h_value + 1e-5
            tw = twirl(res_gen.rho_in)
            z_tw = gram_of(tw).z
            h_tw = float(sum(z_tw[k, l].real + z_tw[k, l].imag
                             for k in range(m) for l in range(k)))
            assert h_tw <= res_sym.h_value + 1e-5
            ref_sym = optimize_gram(states, symmetric=True, refine_purity=True)
            ref_gen = optimize_gram(states, pre_rotate=False, refine_purity=True)
            assert ref_sym.purity == pytest.approx(ref_gen.purity, abs=1e-5)

    def test_purity_never_exceeds_upper_bound(self):
        for m in (2, 3, 5):
            res = optimize_gram(noisy_ring(m), symmetric=True)
            assert res.purity <= res.purity_upper_bound + 1e-6

    def test_refinement_does_not_hurt(self):
        states = noisy_ring(3)
        base = optimize_gram(states, symmetric=True)
        refined = optimize_gram(states, symmetric=True, refine_purity=True)
        assert refined.purity >= base.purity - 1e-10

    def test_feasible_set_convexity(self):
        # convex combinations of two feasible inputs stay feasible and mix the Gram
        states = noisy_ring(3)
        res_a = optimize_gram(states, symmetric=True)
        res_b = optimize_gram(states, symmetric=True, refine_purity=True)
        lam = 0.37
        blocks = lam * res_a.rho_in.blocks + (1 - lam) * res_b.rho_in.blocks
        from qdbench.blocksym import BipartiteBlockMatrix
        combo = BipartiteBlockMatrix(blocks)
        assert np.linalg.eigvalsh(combo.full_matrix())[0] >= -1e-9
        for k in range(3):
            assert np.max(np.abs(combo.blocks[k, k] - states[k].matrix)) <= 1e-6
        z_combo = gram_of(combo).z
        np.testing.assert_allclose(z_combo, lam * res_a.gram.z + (1 - lam) * res_b.gram.z,
                                   atol=1e-8)

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            optimize_gram([coherent_state(0.3, 8), coherent_state(0.3, 10)])


class TestCPTPReachable:
    def test_equal_grams_all_ones_witness(self):
        z = np.array([[1.0, 0.5], [0.5, 1.0]], dtype=complex)
        g = GramMatrix(z)
        res = cptp_reachable(g, g)
        assert res.feasible
        np.testing.assert_allclose(res.witness, np.ones((2, 2)), atol=1e-9)

    def test_identity_generators_force_identity(self):
        m = 3
        identity = GramMatrix(np.eye(m, dtype=complex))
        assert cptp_reachable(identity, identity).feasible
        z = np.eye(m, dtype=complex)
        z[0, 1] = z[1, 0] = 0.4
        assert not cptp_reachable(GramMatrix(z), identity).feasible

    def test_modulus_growth_is_infeasible(self):
        g = GramMatrix(np.array([[1.0, 0.9], [0.9, 1.0]], dtype=complex))
        d = GramMatrix(np.array([[1.0, 0.5], [0.5, 1.0]], dtype=complex))
        res = cptp_reachable(g, d)
        assert not res.feasible

    def test_witness_satisfies_hadamard_relation(self, rng):
        m = 4
        for _ in range(5):
            a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            p = a @ a.conj().T
            dnorm = np.sqrt(np.diag(p).real)
            p = p / np.outer(dnorm, dnorm)
            b = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            dz = b @ b.conj().T
            dnorm = np.sqrt(np.diag(dz).real)
            dz = dz / np.outer(dnorm, dnorm)
            g = GramMatrix(p * dz)
            d = GramMatrix(dz)
            res = cptp_reachable(g, d)
            assert res.feasible
            np.testing.assert_allclose(res.witness * d.z, g.z, atol=1e-7)

    def test_free_entry_completion_path(self):
        # D has an exactly-zero off-diagonal entry: the witness entry is free
        m = 3
        dz = np.eye(m, dtype=complex)
        dz[0, 1] = dz[1, 0] = 0.0
        dz[0, 2] = dz[2, 0] = 0.6
        dz[1, 2] = dz[2, 1] = 0.6
        g = np.eye(m, dtype=complex)
        g[0, 2] = g[2, 0] = 0.3
        g[1, 2] = g[2, 1] = 0.3
        res = cptp_reachable(GramMatrix(g), GramMatrix(dz))
        assert isinstance(res, CPTPOrderResult)
        assert res.feasible
        assert np.linalg.eigvalsh(res.witness)[0] >= -1e-8

    def test_purity_monotone_along_feasible_pairs(self, rng):
        m = 4
        for _ in range(10):
            a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            p = a @ a.conj().T
            dnorm = np.sqrt(np.diag(p).real)
            p = p / np.outer(dnorm, dnorm)
            b = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            dz = b @ b.conj().T
            dnorm = np.sqrt(np.diag(dz).real)
            dz = dz / np.outer(dnorm, dnorm)
            g = GramMatrix(p * dz)
            d = GramMatrix(dz)
            assert cptp_reachable(g, d).feasible
            assert gram_purity(g) <= gram_purity(d) + 1e-8
