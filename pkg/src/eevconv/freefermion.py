"""Transverse-field Ising chain as free fermions.

Spin model: ``H = -sum_l (Z_l Z_{l+1} + g X_l)``, optionally divided by
``||h|| = sqrt(1 + g^2)``. After a Jordan-Wigner map built on ``X_l = 1 - 2 n_l``
each parity sector of ``P = prod_l X_l`` is a quadratic fermion Hamiltonian,
``H = sum_k eps_k (m_k - 1/2)``, with

* even parity: antiperiodic fermions, ``k = 2 pi (n + 1/2) / N``
* odd parity: periodic fermions, ``k = 2 pi n / N``

and ``eps_k = 2 sqrt(1 + g^2 - 2 g cos k)``. Bogoliubov occupations ``m_k`` are
free bits, except that the parity of ``sum_k m_k`` is fixed per sector: an
unpaired mode (``k = 0`` or ``pi``) with negative bare energy
``s_k = 2 (g - cos k)`` has its quasiparticle vacuum filled with a bare
fermion, which flips the constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .convergence import TargetFunction
from .pauli_algebra import LocalOperator

SECTORS = ("even", "odd")
DEFAULT_MAX_MODES = 4096


@dataclass(frozen=True)
class FermionModel:
    n_sites: int
    g: float
    sector: str
    momenta: np.ndarray
    mode_energies: np.ndarray
    bare_energies: np.ndarray
    scale: float
    gamma_parity: int

    @property
    def ground_energy(self) -> float:
        """Energy of the quasiparticle vacuum (may be parity-forbidden in this sector)."""
        return -0.5 * float(self.mode_energies.sum())

    @property
    def bogoliubov_cos(self) -> np.ndarray:
        """``s_k / eps_k``: weight of mode ``k`` in the transverse magnetization."""
        eps = self.mode_energies / self.scale
        out = np.ones_like(eps)
        nz = eps > 0
        out[nz] = self.bare_energies[nz] / eps[nz]
        return out


def spin_hamiltonian_term(g: float, normalize: bool = True) -> LocalOperator:
    """Local term ``h`` of the spin model that :func:`tfim_modes` solves."""
    h = LocalOperator.from_pairs([(-1.0, "Z1Z2"), (-g, "X1")], window=2)
    return h.scaled(1.0 / np.sqrt(1.0 + g * g)) if normalize else h


def tfim_modes(n_sites: int, g: float, sector: str, normalize: bool = True) -> FermionModel:
    if n_sites < 2:
        raise ValueError("need at least two sites")
    if g < 0:
        raise ValueError("transverse field g must be non-negative")
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {SECTORS}, got {sector!r}")
    offset = 0.5 if sector == "even" else 0.0
    k = 2 * np.pi * (np.arange(n_sites) + offset) / n_sites
    k = np.where(k > np.pi + 1e-12, k - 2 * np.pi, k)
    bare = 2 * (g - np.cos(k))
    eps = 2 * np.sqrt(np.maximum(1 + g * g - 2 * g * np.cos(k), 0.0))
    unpaired = np.isclose(np.sin(k), 0.0, atol=1e-12)
    flips = int(np.count_nonzero(unpaired & (bare < 0)))
    required = 0 if sector == "even" else 1
    scale = 1.0 / np.sqrt(1.0 + g * g) if normalize else 1.0
    return FermionModel(
        n_sites=n_sites,
        g=float(g),
        sector=sector,
        momenta=k,
        mode_energies=eps * scale,
        bare_energies=bare,
        scale=scale,
        gamma_parity=(required + flips) % 2,
    )


def _as_occupation(model: FermionModel, occ) -> np.ndarray:
    occ = np.asarray(occ, dtype=np.int8)
    if occ.shape[-1] != model.n_sites:
        raise ValueError(f"occupation needs {model.n_sites} modes, got {occ.shape[-1]}")
    if np.any(occ.sum(axis=-1) % 2 != model.gamma_parity):
        raise ValueError(
            f"occupation parity does not match the {model.sector} sector "
            f"(quasiparticle number must be {'even' if model.gamma_parity == 0 else 'odd'})"
        )
    return occ


def state_energy(model: FermionModel, occ) -> np.ndarray | float:
    """``E = sum_k eps_k (m_k - 1/2)``; accepts one occupation or a stack of them."""
    occ = _as_occupation(model, occ)
    return model.ground_energy + occ @ model.mode_energies


@dataclass(frozen=True)
class FermionBilinear:
    """Observable of the form ``constant + sum_k weight_k m_k`` on mode occupations."""

    name: str
    constant: Callable[[FermionModel], float]
    weights: Callable[[FermionModel], np.ndarray]

    def evaluate(self, model: FermionModel, occ) -> np.ndarray | float:
        occ = _as_occupation(model, occ)
        return self.constant(model) + occ @ self.weights(model)


def _energy_constant(model: FermionModel) -> float:
    return model.ground_energy / model.n_sites


def _energy_weights(model: FermionModel) -> np.ndarray:
    return model.mode_energies / model.n_sites


def _x_constant(model: FermionModel) -> float:
    return float(model.bogoliubov_cos.sum()) / model.n_sites


def _x_weights(model: FermionModel) -> np.ndarray:
    return -2.0 * model.bogoliubov_cos / model.n_sites


def _zz_constant(model: FermionModel) -> float:
    # h = -(ZZ + g X) * scale  =>  <Z1 Z2> = -<h>/scale - g <X1>
    return -_energy_constant(model) / model.scale - model.g * _x_constant(model)


def _zz_weights(model: FermionModel) -> np.ndarray:
    return -_energy_weights(model) / model.scale - model.g * _x_weights(model)


BILINEARS = {
    "energy": FermionBilinear("energy", _energy_constant, _energy_weights),
    "X1": FermionBilinear("X1", _x_constant, _x_weights),
    "Z1Z2": FermionBilinear("Z1Z2", _zz_constant, _zz_weights),
}

# spin-side operators matching each bilinear, for cross-checks against exact diagonalization
_SPIN_FORMS = {"X1": "X1", "Z1Z2": "Z1Z2"}


def get_bilinear(name: str) -> FermionBilinear:
    try:
        return BILINEARS[name]
    except KeyError:
        raise ValueError(
            f"observable {name!r} is not a fermion bilinear; choose from {sorted(BILINEARS)}"
        ) from None


def spin_observable(name: str, g: float, normalize: bool = True) -> LocalOperator:
    if name == "energy":
        return spin_hamiltonian_term(g, normalize)
    get_bilinear(name)
    return LocalOperator.parse(_SPIN_FORMS[name], window=2)


def eev_bilinear(model: FermionModel, occ, observable: str | FermionBilinear):
    obs = get_bilinear(observable) if isinstance(observable, str) else observable
    return obs.evaluate(model, occ)


def all_occupations(model: FermionModel) -> np.ndarray:
    """Every parity-allowed occupation of the sector (``2^(N-1)`` rows)."""
    n = model.n_sites
    if n > 24:
        raise ValueError(f"exhaustive enumeration of 2^{n - 1} states refused")
    idx = np.arange(2**n, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)
    return bits[bits.sum(axis=1) % 2 == model.gamma_parity]


def many_body_spectrum(n_sites: int, g: float, normalize: bool = True) -> np.ndarray:
    """All ``2^N`` energies from both parity sectors, sorted."""
    out = []
    for sector in SECTORS:
        model = tfim_modes(n_sites, g, sector, normalize)
        out.append(state_energy(model, all_occupations(model)))
    return np.sort(np.concatenate(out))


def exact_r_f(n_sites: int, g: float, observable: str, f: TargetFunction, normalize: bool = True) -> float:
    """``r_f`` by full enumeration of both sectors."""
    total, count = 0.0, 0
    obs = get_bilinear(observable)
    for sector in SECTORS:
        model = tfim_modes(n_sites, g, sector, normalize)
        occ = all_occupations(model)
        dev = obs.evaluate(model, occ) - f(state_energy(model, occ) / n_sites)
        total += float(np.sum(dev**2))
        count += len(occ)
    return float(np.sqrt(total / count))


def _sample_occupations(model_even, model_odd, samples: int, rng: np.random.Generator):
    n = model_even.n_sites
    sector_odd = rng.random(samples) < 0.5
    bits = rng.integers(0, 2, size=(samples, n), dtype=np.int8)
    # the last mode is fixed by the sector's parity constraint
    required = np.where(sector_odd, model_odd.gamma_parity, model_even.gamma_parity)
    bits[:, -1] = (required - bits[:, :-1].sum(axis=1)) % 2
    return sector_odd, bits


def sample_deviations(
    n_sites: int,
    g: float,
    observable: str,
    f: TargetFunction,
    samples: int,
    seed: int,
    normalize: bool = True,
) -> np.ndarray:
    """``EEV - f(E/N)`` on eigenstates drawn uniformly from the whole spectrum."""
    obs = get_bilinear(observable)
    rng = np.random.default_rng(seed)
    even = tfim_modes(n_sites, g, "even", normalize)
    odd = tfim_modes(n_sites, g, "odd", normalize)
    sector_odd, bits = _sample_occupations(even, odd, samples, rng)
    dev = np.empty(samples)
    for model, sel in ((even, ~sector_odd), (odd, sector_odd)):
        occ = bits[sel]
        if len(occ):
            dev[sel] = obs.evaluate(model, occ) - f(state_energy(model, occ) / n_sites)
    return dev


def sample_r_f(
    n_sites: int,
    g: float,
    observable: str,
    f: TargetFunction,
    samples: int,
    seed: int,
    normalize: bool = True,
) -> tuple[float, float]:
    """Monte-Carlo ``r_f`` with a delta-method standard error."""
    if samples < 100:
        raise ValueError(f"need at least 100 samples, got {samples}")
    sq = sample_deviations(n_sites, g, observable, f, samples, seed, normalize) ** 2
    mean = float(sq.mean())
    estimate = float(np.sqrt(mean))
    if mean == 0.0:
        return 0.0, 0.0
    se_mean = float(sq.std(ddof=1)) / np.sqrt(samples)
    return estimate, float(se_mean / (2.0 * estimate))
