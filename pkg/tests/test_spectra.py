from math import comb

import numpy as np
import pytest

from eevconv.pauli_algebra import LocalOperator, ModelError, ham_moment, mixed_field_ising, random_local_operator
from eevconv.spectra import (
    HamiltonianSpec,
    SpectrumTable,
    build_dense,
    concentration_fraction,
    cutoff_lambda,
    diagonalize,
    eev_table,
    energy_moment,
    excess_kurtosis,
    momentum_bases,
    translation_matrix,
)

from conftest import mfi_table, transverse_table
from oracles import dense_hamiltonian, embed


def _spectrum_matches(h, n):
    ref = np.linalg.eigvalsh(dense_hamiltonian(h, n))
    table = diagonalize(HamiltonianSpec(h, n))
    np.testing.assert_allclose(np.sort(table.energies), ref, atol=1e-10)


class TestDense:
    def test_zz_is_diagonal(self):
        hd = build_dense(HamiltonianSpec(LocalOperator.parse("Z1Z2"), 4))
        assert np.count_nonzero(hd - np.diag(np.diag(hd))) == 0
        assert np.diag(hd).real.min() == -4
        assert np.diag(hd).real.max() == 4

    def test_hermitian(self):
        hd = build_dense(HamiltonianSpec(mixed_field_ising(), 6))
        np.testing.assert_allclose(hd, hd.conj().T)

    def test_commutes_with_translation(self):
        n = 6
        hd = build_dense(HamiltonianSpec(LocalOperator.parse("X1Y2 + 0.3*Z1 - 0.7*Y1Z3", window=3), n))
        t = translation_matrix(n).toarray()
        np.testing.assert_allclose(hd @ t, t @ hd, atol=1e-12)

    def test_translation_is_unitary_of_order_n(self):
        n = 5
        t = translation_matrix(n).toarray()
        np.testing.assert_allclose(t @ t.T, np.eye(2**n))
        np.testing.assert_allclose(np.linalg.matrix_power(t, n), np.eye(2**n))

    def test_window_too_large(self):
        with pytest.raises(ValueError):
            HamiltonianSpec(LocalOperator.parse("Z1Z3", window=3), 2)

    def test_size_cap(self):
        with pytest.raises(ValueError, match="cap"):
            HamiltonianSpec(mixed_field_ising(), 15)
        HamiltonianSpec(mixed_field_ising(), 15, max_sites=16)


class TestSpectrum:
    def test_transverse_field_binomial(self):
        table = transverse_table(8)
        values, counts = np.unique(np.round(table.energies, 9), return_counts=True)
        np.testing.assert_allclose(values, np.arange(-8, 9, 2))
        assert list(counts) == [comb(8, j) for j in range(9)]

    def test_zz_ground_state(self):
        table = diagonalize(HamiltonianSpec(LocalOperator.parse("Z1Z2"), 4))
        ground = table.energies == table.energies.min()
        assert table.energies.min() == pytest.approx(-4)
        # the two Neel states form momenta 0 and pi
        assert sorted(table.momenta[ground]) == [0, 2]

    @pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
    def test_mixed_field_matches_dense(self, n):
        _spectrum_matches(mixed_field_ising(), n)

    def test_complex_hamiltonian(self):
        h = LocalOperator.parse("X1Y2 - Y1X2 + 0.4*Z1", window=2)
        assert h.is_hermitian()
        _spectrum_matches(h, 6)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_three_local(self, seed):
        h = random_local_operator(np.random.default_rng(seed), 3, n_terms=6)
        _spectrum_matches(h, 7)

    def test_completeness(self):
        for n in (3, 4, 6, 9):
            bases = momentum_bases(n)
            assert sum(b.shape[1] for b in bases) == 2**n
            full = np.hstack([b.toarray() for b in bases])
            np.testing.assert_allclose(full.conj().T @ full, np.eye(2**n), atol=1e-12)

    def test_momentum_eigenvalues(self):
        n = 6
        t = translation_matrix(n)
        for p, b in enumerate(momentum_bases(n)):
            dense = b.toarray()
            np.testing.assert_allclose(t @ dense, np.exp(2j * np.pi * p / n) * dense, atol=1e-12)

    def test_table_checks_dimension(self):
        with pytest.raises(ValueError):
            SpectrumTable(3, np.zeros(7), np.zeros(7))

    def test_sorted(self):
        table = mfi_table(8)
        assert np.all(np.diff(np.round(table.energies, 9)) >= 0)


class TestEEV:
    def test_h_eev_is_energy_density(self):
        table = mfi_table(9)
        np.testing.assert_allclose(table.eev["h"], table.energy_density, atol=1e-12)

    def test_against_dense_eigenvectors(self):
        # nondegenerate spectrum: EEVs are basis independent
        n = 7
        h = mixed_field_ising()
        a = LocalOperator.parse("X1 + 0.3*Z1Z3", window=3)
        table = eev_table(HamiltonianSpec(h, n), {"a": a})
        vals, vecs = np.linalg.eigh(dense_hamiltonian(h, n))
        ad = embed(a, n)
        ref = np.einsum("ij,ik,kj->j", vecs.conj(), ad, vecs).real
        gaps = np.diff(vals)
        if gaps.min() > 1e-8:
            np.testing.assert_allclose(table.eev["a"], ref, atol=1e-10)
        # the sum of EEVs is a trace regardless of degeneracies
        assert table.eev["a"].sum() == pytest.approx(np.trace(ad).real, abs=1e-9)

    def test_translated_observable(self):
        table = eev_table(HamiltonianSpec(mixed_field_ising(), 7), {"x1": LocalOperator.parse("X1"), "x3": LocalOperator.parse("X3", window=3)})
        np.testing.assert_allclose(table.eev["x1"], table.eev["x3"], atol=1e-12)

    def test_y_eev_is_real(self):
        table = eev_table(HamiltonianSpec(mixed_field_ising(), 6), {"Y1": LocalOperator.parse("Y1")})
        assert not np.iscomplexobj(table.eev["Y1"])
        np.testing.assert_allclose(table.eev["Y1"], 0, atol=1e-10)

    def test_non_hermitian_kept_complex(self):
        table = eev_table(HamiltonianSpec(mixed_field_ising(), 5), {"a": LocalOperator.parse("1j*X1")})
        assert np.iscomplexobj(table.eev["a"])

    def test_observable_too_wide(self):
        w = LocalOperator.parse("Z1Z2Z4Z5")
        with pytest.raises(ModelError, match="needs N >= 7"):
            eev_table(HamiltonianSpec(mixed_field_ising(), 6), {"W": w})

    def test_weighted_sums_are_traces(self):
        table = mfi_table(8)
        h = mixed_field_ising()
        assert np.mean(table.energies * table.eev["X1"]) == pytest.approx(1.05, abs=1e-10)
        assert np.mean(table.eev["W"]) == pytest.approx(0, abs=1e-12)


class TestMoments:
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_against_closed_form(self, m):
        table = mfi_table(9)
        assert energy_moment(table, m) == pytest.approx(ham_moment(mixed_field_ising(), 9, m), abs=1e-8)

    def test_concentration_example(self):
        table = transverse_table(10)
        # |E| >= 5 means all spins aligned within two flips
        assert concentration_fraction(table, 0.5) == pytest.approx(2 * 56 / 1024)

    def test_concentration_at_tiny_eps(self):
        table = transverse_table(9)
        assert concentration_fraction(table, 1e-6) == 1.0

    def test_cutoff(self):
        assert cutoff_lambda(np.e, 2.0) == pytest.approx(2 * np.sqrt(np.e))
        with pytest.raises(ValueError):
            cutoff_lambda(10, 0)

    def test_kurtosis_of_binomial(self):
        # sum of N independent +-1 spins: excess kurtosis is -2/N
        assert excess_kurtosis(transverse_table(10)) == pytest.approx(-0.2)
