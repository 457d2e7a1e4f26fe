"""Exact diagonalization of translation-invariant chains in momentum sectors.

Basis states are integers whose bit ``s-1`` holds the spin at site ``s``.
The translation ``T`` moves site ``s`` to ``s+1`` (a cyclic left rotation of
the bit pattern), and the momentum-``p`` sector is the eigenspace of ``T``
with eigenvalue ``exp(2 pi i p / N)``.

Every eigenvector returned here is a simultaneous eigenvector of ``H`` and
``T``. Inside a degenerate block of one sector the orthonormal basis chosen
by LAPACK is kept as is.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .pauli_algebra import LocalOperator, ModelError, PauliSum, trace_min_sites

log = logging.getLogger(__name__)

DEFAULT_MAX_SITES = 14
_CHUNK = 256

# diagnostic counter, read by the CLI to verify cache behaviour
DIAGONALIZATIONS = {"count": 0}


@dataclass(frozen=True)
class HamiltonianSpec:
    h: LocalOperator
    n_sites: int
    max_sites: int = DEFAULT_MAX_SITES

    def __post_init__(self):
        if self.n_sites < self.h.window:
            raise ValueError(f"N={self.n_sites} is smaller than the window k={self.h.window}")
        if self.n_sites > self.max_sites:
            raise ValueError(
                f"N={self.n_sites} exceeds the exact-diagonalization cap of {self.max_sites} sites"
            )


@dataclass
class SpectrumTable:
    """All ``2^N`` eigenpairs of one chain as columns, sorted by energy then momentum."""

    n_sites: int
    energies: np.ndarray
    momenta: np.ndarray
    eev: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.energies) != 2**self.n_sites:
            raise ValueError(
                f"table holds {len(self.energies)} states, expected 2^{self.n_sites}"
            )

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def energy_density(self) -> np.ndarray:
        return self.energies / self.n_sites

    def records(self) -> Iterator[tuple[float, int, dict[str, complex]]]:
        for j in range(self.dim):
            yield self.energies[j], int(self.momenta[j]), {k: v[j] for k, v in self.eev.items()}


def pauli_sum_matrix(terms: PauliSum, n_sites: int) -> sp.csr_matrix:
    """Sparse ``2^N`` matrix of a Pauli sum in the bit-encoded basis."""
    dim = 2**n_sites
    states = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []
    for (x, z), c in terms.items():
        # P(x,z)|b> = i^{|x&z|} (-1)^{|z&b|} |b ^ x>
        sign = 1 - 2 * (np.bitwise_count(states & z) & 1).astype(np.int64)
        phase = (1, 1j, -1, -1j)[(x & z).bit_count() % 4]
        rows.append(states ^ x)
        cols.append(states)
        vals.append(c * phase * sign)
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    return mat.tocsr()


def _ring_hamiltonian(h: LocalOperator, n_sites: int) -> PauliSum:
    out: dict = {}
    for l in range(n_sites):
        for key, c in h.ring_terms(n_sites, l).items():
            out[key] = out.get(key, 0) + c
    return out


def build_dense(spec: HamiltonianSpec) -> np.ndarray:
    """Full ``H = sum_l T^l h T^-l`` as a dense array."""
    return pauli_sum_matrix(_ring_hamiltonian(spec.h, spec.n_sites), spec.n_sites).toarray()


def translation_matrix(n_sites: int) -> sp.csr_matrix:
    dim = 2**n_sites
    states = np.arange(dim, dtype=np.int64)
    return sp.csr_matrix(
        (np.ones(dim), (_rotate(states, 1, n_sites), states)), shape=(dim, dim)
    )


def _rotate(states: np.ndarray, shift: int, n_sites: int) -> np.ndarray:
    shift %= n_sites
    if shift == 0:
        return states.copy()
    mask = (1 << n_sites) - 1
    return ((states << shift) | (states >> (n_sites - shift))) & mask


def momentum_bases(n_sites: int) -> list[sp.csc_matrix]:
    """Orthonormal basis of every momentum sector, as ``2^N x D_p`` sparse columns."""
    dim = 2**n_sites
    states = np.arange(dim, dtype=np.int64)
    rotations = np.stack([_rotate(states, l, n_sites) for l in range(n_sites)])
    is_rep = rotations.min(axis=0) == states
    period = np.full(dim, n_sites)
    for l in range(n_sites - 1, 0, -1):
        period[rotations[l] == states] = l
    reps = states[is_rep]
    rep_period = period[is_rep]
    bases = []
    for p in range(n_sites):
        sel = (p * rep_period) % n_sites == 0
        r, per = reps[sel], rep_period[sel]
        cols_all, rows_all, vals_all = [], [], []
        col = np.arange(len(r))
        for l in range(n_sites):
            live = l < per
            rows_all.append(rotations[l][r[live]])
            cols_all.append(col[live])
            vals_all.append(np.exp(-2j * np.pi * p * l / n_sites) / np.sqrt(per[live]))
        basis = sp.csc_matrix(
            (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(dim, len(r)),
        )
        bases.append(basis)
    total = sum(b.shape[1] for b in bases)
    if total != dim:
        raise RuntimeError(f"momentum sectors hold {total} states, expected {dim}")
    return bases


def _check_observable(spec: HamiltonianSpec, name: str, a: LocalOperator) -> None:
    k = spec.h.window
    need = max(k + a.window, trace_min_sites(k, a.window, 2))
    if spec.n_sites < need:
        raise ModelError(
            f"observable {name!r} (window {a.window}) needs N >= {need} with k={k}, got N={spec.n_sites}"
        )


def _diagonal_elements(
    ops: Mapping[str, sp.csr_matrix], basis: sp.csc_matrix, vecs: np.ndarray, conjugate: bool
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """``<v|A|v>`` for ``v = basis @ vecs`` and, if asked, for the conjugate vectors.

    Works on column chunks so the ``2^N``-long vectors never all sit in memory.
    """
    direct = {name: np.empty(vecs.shape[1], dtype=complex) for name in ops}
    mirror = {name: np.empty(vecs.shape[1], dtype=complex) for name in ops} if conjugate else {}
    for start in range(0, vecs.shape[1], _CHUNK):
        cols = slice(start, start + _CHUNK)
        full = basis @ vecs[:, cols]
        full_c = full.conj()
        for name, op in ops.items():
            direct[name][cols] = np.einsum("ij,ij->j", full_c, op @ full)
            if conjugate:
                # <v*|A|v*> = conj(<v|A*|v>)
                mirror[name][cols] = np.einsum("ij,ij->j", full_c, op.conj() @ full).conj()
    return direct, mirror


def eev_table(
    spec: HamiltonianSpec, observables: Mapping[str, LocalOperator] | None = None
) -> SpectrumTable:
    """Diagonalize sector by sector and record ``<j|A|j>`` for each observable."""
    observables = dict(observables or {})
    for name, a in observables.items():
        _check_observable(spec, name, a)
    n = spec.n_sites
    ham = pauli_sum_matrix(_ring_hamiltonian(spec.h, n), n)
    ops = {name: pauli_sum_matrix(a.ring_terms(n), n) for name, a in observables.items()}
    # a real H makes sector N-p the complex conjugate of sector p
    real_h = ham.nnz == 0 or np.abs(ham.data.imag).max() == 0
    bases = momentum_bases(n)
    energies, momenta = [], []
    eev: dict[str, list] = {name: [] for name in ops}
    for p, basis in enumerate(bases):
        partner = (n - p) % n
        if basis.shape[1] == 0 or (real_h and partner < p):
            continue
        basis_h = basis.conj().T.tocsr()
        block = (basis_h @ ham @ basis).toarray()
        block = 0.5 * (block + block.conj().T)
        if not block.imag.any():
            block = block.real
        vals, vecs = scipy.linalg.eigh(block, driver="evr")
        mirrored = real_h and partner != p
        energies.append(vals)
        momenta.append(np.full(len(vals), p))
        if mirrored:
            energies.append(vals)
            momenta.append(np.full(len(vals), partner))
        if ops:
            direct, mirror = _diagonal_elements(ops, basis, vecs, mirrored)
            for name in ops:
                eev[name].append(direct[name])
                if mirrored:
                    eev[name].append(mirror[name])
    DIAGONALIZATIONS["count"] += 1
    energies = np.concatenate(energies)
    momenta = np.concatenate(momenta)
    order = np.lexsort((momenta, np.round(energies, 9)))
    table_eev = {}
    for name, chunks in eev.items():
        values = np.concatenate(chunks)[order]
        if observables[name].is_hermitian():
            imag = np.abs(values.imag).max()
            if imag > 1e-8:
                log.warning("observable %s: EEV imaginary part %.2e discarded", name, imag)
            values = values.real.copy()
        table_eev[name] = values
    return SpectrumTable(n, energies[order], momenta[order], table_eev)


def diagonalize(spec: HamiltonianSpec) -> SpectrumTable:
    return eev_table(spec, {})


def concentration_fraction(table: SpectrumTable, eps: float) -> float:
    """Fraction of eigenstates with ``|E_j| >= N eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return float(np.mean(np.abs(table.energies) >= table.n_sites * eps))


def cutoff_lambda(n_sites: float, c: float) -> float:
    """Energy cutoff ``C sqrt(N log N)`` used to truncate spectral tails."""
    if c <= 0:
        raise ValueError("C must be positive")
    return c * np.sqrt(n_sites * np.log(n_sites))


def energy_moment(table: SpectrumTable, m: int) -> float:
    return float(np.mean(table.energies**m))


def excess_kurtosis(table: SpectrumTable) -> float:
    """Standardized fourth moment of the spectrum minus 3 (0 for a Gaussian)."""
    e = table.energies - table.energies.mean()
    return float(np.mean(e**4) / np.mean(e**2) ** 2 - 3.0)
