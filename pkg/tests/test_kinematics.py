"""Torus kinematics: configs, lattices, indexing, DFT conventions."""

import numpy as np
import pytest

from mpcat import ConfigError, StateVector, SystemConfig, build_lattice
from mpcat.kinematics import (
    MOMENTUM,
    POSITION,
    axis_dft,
    flat_index,
    multi_index,
    random_state,
    to_momentum,
    to_position,
)


class TestSystemConfig:
    def test_defaults(self):
        cfg = SystemConfig(N=16)
        assert cfg.n == 2 and cfg.I == 0 and cfg.V == 0.0
        assert cfg.R == 16 and cfg.K_cells == 4 and cfg.J_max == 6
        assert cfg.dim == 16 and cfg.axis_dims == (16,)

    def test_default_shifts_cycle_mod_p(self):
        cfg = SystemConfig(N=8, n=2, I=6)
        assert cfg.p == 4
        assert cfg.shifts == (0, 1, 2, 3, 0, 1)

    def test_dim_and_axes(self):
        cfg = SystemConfig(N=16, n=2, I=3)
        assert cfg.dim == 16 * 2**3
        assert cfg.axis_dims == (16, 2, 2, 2)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"N": 12},
            {"N": 16, "n": 3},
            {"N": 4, "n": 8},
            {"N": 8, "n": 2, "I": 1, "shifts": (4,)},
            {"N": 8, "n": 2, "I": 1, "shifts": (-1,)},
            {"N": 8, "n": 2, "I": 2, "shifts": (0,)},
            {"N": 16, "K_cells": 3},
            {"N": 16, "R": 0},
            {"N": 16, "J_max": 0},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            SystemConfig(**kwargs)

    def test_hash_ignores_j_max(self):
        a = SystemConfig(N=16, J_max=4)
        b = SystemConfig(N=16, J_max=6)
        c = SystemConfig(N=16, V=1.0)
        assert a.hash() == b.hash()
        assert a.hash() != c.hash()


class TestLattice:
    def test_shift_zero(self):
        lat = build_lattice(SystemConfig(N=4, n=2, I=1, shifts=(0,)))
        assert np.allclose(lat.small_positions[0], [0.0, 0.5])
        assert np.allclose(lat.big_positions, [0.0, 0.25, 0.5, 0.75])

    def test_shift_one(self):
        lat = build_lattice(SystemConfig(N=4, n=2, I=1, shifts=(1,)))
        assert np.allclose(lat.small_positions[0], [0.25, 0.75])

    def test_equal_dims_equal_lattices(self):
        lat = build_lattice(SystemConfig(N=4, n=4, I=1, shifts=(0,)))
        assert np.allclose(lat.small_positions[0], lat.big_positions)

    def test_small_lattice_subset_of_big(self):
        cfg = SystemConfig(N=16, n=4, I=3, shifts=(0, 1, 3))
        lat = build_lattice(cfg)
        big = set(np.round(lat.big_positions * cfg.N).astype(int))
        for pos in lat.small_positions:
            labels = np.round(pos * cfg.N).astype(int)
            assert set(labels) <= big


class TestIndexing:
    def test_flat_zero(self):
        cfg = SystemConfig(N=4, n=2, I=2)
        assert multi_index(0, cfg) == (0, 0, 0)

    def test_row_major_example(self):
        cfg = SystemConfig(N=4, n=2, I=1)
        assert multi_index(5, cfg) == (2, 1)
        assert flat_index((2, 1), cfg) == 5

    def test_round_trip_bijection(self):
        cfg = SystemConfig(N=4, n=2, I=2)
        seen = set()
        for x in range(cfg.dim):
            idx = multi_index(x, cfg)
            assert flat_index(idx, cfg) == x
            seen.add(idx)
        assert len(seen) == cfg.dim

    def test_out_of_range(self):
        cfg = SystemConfig(N=4, n=2, I=1)
        with pytest.raises(IndexError):
            multi_index(cfg.dim, cfg)
        with pytest.raises(IndexError):
            flat_index((4, 0), cfg)
        with pytest.raises(IndexError):
            flat_index((0,), cfg)


class TestTransforms:
    def test_forward_kernel_matches_explicit_dft(self, rng):
        d = 8
        F = np.exp(2j * np.pi * np.outer(np.arange(d), np.arange(d)) / d) / np.sqrt(d)
        psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        state = StateVector(psi, POSITION)
        out = axis_dft(state, 0, "forward")
        assert np.allclose(out.amplitudes, F @ psi, atol=1e-12)
        assert out.representation == MOMENTUM

    def test_round_trip_identity(self, rng):
        cfg = SystemConfig(N=8, n=2, I=2)
        psi = random_state(cfg, rng)
        back = to_position(to_momentum(psi))
        assert np.allclose(back.amplitudes, psi.amplitudes, atol=1e-12)

    def test_norm_preserved(self, rng):
        cfg = SystemConfig(N=16, n=4, I=1)
        psi = random_state(cfg, rng)
        assert abs(to_momentum(psi).norm() - 1.0) < 1e-12

    def test_wrong_representation_rejected(self, rng):
        cfg = SystemConfig(N=8)
        psi = random_state(cfg, rng)
        with pytest.raises(ValueError):
            to_position(psi)
        c = to_momentum(psi)
        with pytest.raises(ValueError):
            axis_dft(c, 0, "forward")
        with pytest.raises(IndexError):
            axis_dft(psi, 3, "forward")

    def test_per_axis_composition_equals_full_transform(self, rng):
        cfg = SystemConfig(N=8, n=2, I=1)
        psi = random_state(cfg, rng)
        full = to_momentum(psi)
        stepped = axis_dft(psi, 0, "forward")
        stepped = StateVector(
            np.fft.ifft(stepped.shaped, axis=1, norm="ortho"),
            MOMENTUM,
            cfg.axis_dims,
        )
        assert np.allclose(stepped.amplitudes, full.amplitudes, atol=1e-12)


class TestStateVector:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            StateVector(np.zeros(6), POSITION, axis_dims=(4, 2, 2))

    def test_random_state_normalized(self, rng):
        cfg = SystemConfig(N=16, n=2, I=2)
        psi = random_state(cfg, rng)
        assert abs(psi.norm() - 1.0) < 1e-12
        assert psi.shaped.shape == cfg.axis_dims
