"""Propagator factors, the period operator, and dense materialization."""

import numpy as np
import pytest

from mpcat import (
    BudgetError,
    StateVector,
    SystemConfig,
    apply_cat_single,
    apply_period_multi,
    build_factors,
    free_phase,
    kick_phase,
    materialize_unitary,
    period_applier,
    scattering_counts,
    unitarity_residual,
)
from mpcat.kinematics import POSITION, random_state


class TestPhases:
    def test_free_phase_values(self):
        assert free_phase(4, 0) == 1.0
        assert np.isclose(free_phase(4, 2), -1.0)
        assert np.isclose(free_phase(2, 1), -1j)

    def test_free_phase_rejects_odd_dim(self):
        with pytest.raises(ValueError):
            free_phase(3, 0)

    def test_free_phase_range_check(self):
        with pytest.raises(ValueError):
            free_phase(4, 4)

    def test_kick_phase_values(self):
        assert kick_phase(4, 0) == 1.0
        assert np.isclose(kick_phase(4, 2), -1.0)
        assert np.isclose(kick_phase(16, 1), np.exp(1j * np.pi / 16))

    def test_unit_modulus(self):
        assert np.allclose(np.abs(free_phase(16, np.arange(16))), 1.0, atol=1e-12)
        assert np.allclose(np.abs(kick_phase(16, np.arange(16))), 1.0, atol=1e-12)


class TestScatteringCounts:
    def test_shift_zero_coincidences(self):
        counts = scattering_counts(SystemConfig(N=4, n=2, I=1, shifts=(0,)))
        expected = np.zeros((4, 2), dtype=int)
        expected[0, 0] = 1
        expected[2, 1] = 1
        assert np.array_equal(counts, expected)

    def test_shift_one_coincidences(self):
        counts = scattering_counts(SystemConfig(N=4, n=2, I=1, shifts=(1,)))
        expected = np.zeros((4, 2), dtype=int)
        expected[1, 0] = 1
        expected[3, 1] = 1
        assert np.array_equal(counts, expected)

    def test_two_particles_can_pile_up(self):
        counts = scattering_counts(SystemConfig(N=4, n=2, I=2, shifts=(0, 0)))
        assert counts[0, 0, 0] == 2
        assert counts[2, 1, 1] == 2
        assert counts.max() == 2 and counts.min() == 0

    def test_values_bounded_by_particle_count(self):
        cfg = SystemConfig(N=8, n=2, I=3)
        counts = scattering_counts(cfg)
        assert counts.min() >= 0 and counts.max() <= cfg.I


class TestSingleParticle:
    def test_hand_evaluated_n2(self):
        psi = StateVector(np.array([1.0, 0.0]), POSITION)
        out = apply_cat_single(psi, 2)
        assert np.allclose(out.amplitudes, [(1 - 1j) / 2, (1j - 1) / 2], atol=1e-12)

    def test_momentum_zero_state_gets_only_kick(self):
        N = 8
        psi = StateVector(np.full(N, 1 / np.sqrt(N), dtype=complex), POSITION)
        out = apply_cat_single(psi, N)
        expected = psi.amplitudes * kick_phase(N, np.arange(N))
        assert np.allclose(out.amplitudes, expected, atol=1e-12)

    def test_norm_preserved_on_random_states(self):
        N = 16
        gen = np.random.default_rng(5)
        cfg = SystemConfig(N=N)
        for _ in range(100):
            psi = random_state(cfg, gen)
            assert abs(apply_cat_single(psi, N).norm() - 1.0) < 1e-12


def small_free_unitary(n):
    F = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
    return F.conj().T @ np.diag(free_phase(n, np.arange(n))) @ F


class TestMultiParticle:
    def test_v0_factorizes_into_tensor_product(self):
        cfg = SystemConfig(N=8, n=2, I=1, V=0.0, R=3)
        U = materialize_unitary(period_applier(cfg), cfg.dim, cfg.axis_dims)
        U_cat = materialize_unitary(period_applier(SystemConfig(N=8)), 8)
        assert np.abs(U - np.kron(U_cat, small_free_unitary(2))).max() < 1e-10

    def test_v0_is_r_independent(self, rng):
        psi = random_state(SystemConfig(N=8, n=2, I=2), rng)
        outs = [
            apply_period_multi(psi, build_factors(SystemConfig(N=8, n=2, I=2, R=R)))
            for R in (1, 4, 16)
        ]
        for out in outs[1:]:
            assert np.allclose(out.amplitudes, outs[0].amplitudes, atol=1e-12)

    def test_i0_reduces_to_single_particle(self, rng):
        cfg = SystemConfig(N=8, V=5.5, R=7)
        psi = random_state(cfg, rng)
        a = apply_period_multi(psi, build_factors(cfg))
        b = apply_cat_single(psi, 8)
        assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-12)

    def test_trotter_first_order_convergence(self):
        cfg = SystemConfig(N=8, n=2, I=1, V=8.0)
        psi = random_state(cfg, np.random.default_rng(12345))

        def evolve(R):
            return apply_period_multi(
                psi, build_factors(SystemConfig(N=8, n=2, I=1, V=8.0, R=R))
            ).amplitudes

        Rs = [1, 2, 4, 8, 16]
        errs = [np.linalg.norm(evolve(R) - evolve(2 * R)) for R in Rs]
        # O(1) saturation can lift the R=1 point; decay sets in from R=2
        assert all(a > b for a, b in zip(errs[1:], errs[2:]))
        slope = np.polyfit(np.log(Rs), np.log(errs), 1)[0]
        assert abs(slope + 1.0) <= 0.2

    def test_norm_preserved(self, rng):
        cfg = SystemConfig(N=16, n=4, I=2, V=3.0, R=4)
        psi = random_state(cfg, rng)
        out = apply_period_multi(psi, build_factors(cfg))
        assert abs(out.norm() - 1.0) < 1e-11


class TestMaterialize:
    def test_identity_applier(self):
        U = materialize_unitary(lambda s: s, 6, (6,))
        assert np.array_equal(U, np.eye(6))

    def test_n2_matrix_matches_hand_computation(self):
        U = materialize_unitary(lambda s: apply_cat_single(s, 2), 2)
        expected = np.array(
            [[(1 - 1j) / 2, (1 + 1j) / 2], [(1j - 1) / 2, (1 + 1j) / 2]]
        )
        assert np.abs(U - expected).max() < 1e-12

    def test_unitarity_residual_multi(self):
        cfg = SystemConfig(N=16, n=2, I=1, V=8.0, R=16)
        U = materialize_unitary(period_applier(cfg), cfg.dim, cfg.axis_dims)
        assert unitarity_residual(U) < 1e-10

    def test_budget_guard(self):
        with pytest.raises(BudgetError):
            materialize_unitary(lambda s: s, 2048, (2048,))

    def test_worker_count_does_not_change_bits(self):
        cfg = SystemConfig(N=8, n=2, I=1, V=2.0, R=4)
        U1 = materialize_unitary(period_applier(cfg), cfg.dim, cfg.axis_dims, workers=1)
        U4 = materialize_unitary(period_applier(cfg), cfg.dim, cfg.axis_dims, workers=4)
        assert np.array_equal(U1, U4)
