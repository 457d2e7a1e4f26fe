"""Deviation of eigenstate expectation values from smooth target functions.

All averages are unweighted over the full eigenbasis, matching
``r_f(N) = sqrt(mean_j |<j|A|j> - f(E_j/N)|^2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pauli_algebra import ChainContext, LocalOperator, ham_op_trace
from .spectra import SpectrumTable

log = logging.getLogger(__name__)

MAX_DEGREE = 5


@dataclass(frozen=True)
class TargetFunction:
    """Polynomial ``f(x) = sum_i c_i x^i`` in the energy density."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients) or (0.0,)
        if len(coeffs) - 1 > MAX_DEGREE:
            raise ValueError(f"degree {len(coeffs) - 1} exceeds the maximum of {MAX_DEGREE}")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def zero(cls) -> TargetFunction:
        return cls((0.0,))

    @classmethod
    def linear(cls, slope: float) -> TargetFunction:
        return cls((0.0, slope))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def derivative(self, order: int = 1) -> float:
        """``f^(order)(0)``."""
        if order > self.degree:
            return 0.0
        return float(self.coefficients[order] * np.prod(np.arange(1, order + 1)))

    def check_bounded(self, lo: float = -1.0, hi: float = 1.0) -> bool:
        x = np.linspace(lo, hi, 201)
        ok = bool(np.all(np.abs(self(x)) <= 1.0 + 1e-12))
        if not ok:
            log.warning("target function leaves the unit disk on [%g, %g]", lo, hi)
        return ok


def _deviation(table: SpectrumTable, obs: str, f: TargetFunction) -> np.ndarray:
    try:
        values = table.eev[obs]
    except KeyError:
        raise KeyError(f"no EEV recorded for observable {obs!r} at N={table.n_sites}") from None
    return np.abs(values - f(table.energy_density))


def r_f(table: SpectrumTable, obs: str, f: TargetFunction) -> float:
    return float(np.sqrt(np.mean(_deviation(table, obs, f) ** 2)))


def r_f_l1(table: SpectrumTable, obs: str, f: TargetFunction) -> float:
    """Mean absolute deviation variant of :func:`r_f`."""
    return float(np.mean(_deviation(table, obs, f)))


def weak_eth_statistic(table: SpectrumTable, obs: str) -> float:
    """Spectrum average of ``|<j|A|j>|^2``."""
    return float(np.mean(np.abs(table.eev[obs]) ** 2))


def R_f_proxy(values: Sequence[float]) -> np.ndarray:
    """Running max from the largest computed size down; stands in for ``sup_{n >= N} r_f(n)``."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise ValueError("need r_f at two or more sizes")
    return np.maximum.accumulate(values[::-1])[::-1]


def pooled_objective(
    tables: Sequence[SpectrumTable], obs: str, f: TargetFunction, weights: Sequence[float] | None = None
) -> float:
    """``sum_N w_N r_f(N)^2``, the quantity minimized by :func:`fit_target`."""
    weights = np.ones(len(tables)) if weights is None else np.asarray(weights, dtype=float)
    return float(sum(w * r_f(t, obs, f) ** 2 for w, t in zip(weights, tables)))


def fit_target(
    tables: Sequence[SpectrumTable],
    obs: str,
    degree: int,
    weights: Sequence[float] | None = None,
    min_sizes: int = 2,
) -> TargetFunction:
    """N-independent polynomial minimizing ``sum_N w_N r_f(N)^2``.

    Every eigenstate at size N enters the pooled least-squares problem with
    weight ``w_N / 2^N``, which is exactly the objective above.
    """
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}], got {degree}")
    if len(tables) < min_sizes:
        raise ValueError(f"need at least {min_sizes} system sizes, got {len(tables)}")
    weights = np.ones(len(tables)) if weights is None else np.asarray(weights, dtype=float)
    rows, rhs = [], []
    for w, table in zip(weights, tables):
        scale = np.sqrt(w / table.dim)
        y = table.eev[obs]
        if np.iscomplexobj(y):
            y = y.real
        rows.append(scale * np.vander(table.energy_density, degree + 1, increasing=True))
        rhs.append(scale * y)
    design = np.vstack(rows)
    target = np.concatenate(rhs)
    if np.ptp(np.concatenate([t.energy_density for t in tables])) == 0 and degree > 0:
        raise np.linalg.LinAlgError("rank-deficient design: all energies coincide")
    coeffs, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < degree + 1:
        raise np.linalg.LinAlgError(f"rank-deficient design (rank {rank} < {degree + 1})")
    return TargetFunction(tuple(coeffs))


def fit_snapshot(table: SpectrumTable, obs: str, degree: int) -> TargetFunction:
    """Best polynomial for a single size, i.e. an N-dependent ``g_N``."""
    return fit_target([table], obs, degree, min_sizes=1)


def eth_slope(h: LocalOperator, a: LocalOperator, ctx: ChainContext | int | None = None) -> float:
    """``tr(HA)/tr(Hh)``, the energy-density slope expected under ETH."""
    if ctx is None:
        ctx = max(h.window + a.window - 1, 2 * h.window - 1)
    num = ham_op_trace(h, a, ctx)
    den = ham_op_trace(h, h, ctx)
    return float((num / den).real)


def eth_linear_predictor(h: LocalOperator, a: LocalOperator) -> TargetFunction:
    return TargetFunction.linear(eth_slope(h, a))


def scaling_exponent(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """OLS slope of ``log(value)`` against ``log(N)`` and its standard error."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    if np.any(pts[:, 1] <= 0):
        raise ValueError("scaling exponent needs strictly positive values")
    x = np.log(pts[:, 0])
    y = np.log(pts[:, 1])
    design = np.column_stack([np.ones_like(x), x])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = len(x) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return float(coef[1]), float(np.sqrt(max(cov[1, 1], 0.0)))


def eev_fluctuation_profile(table: SpectrumTable, obs: str, window: float) -> list[tuple[float, float]]:
    """Standard deviation of the EEV within energy bins of width ``window``.

    Empty bins are skipped. Bins are anchored at zero energy so bin centers
    are comparable across sizes.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    e = table.energies
    values = table.eev[obs]
    idx = np.floor(e / window + 0.5).astype(int)
    out = []
    for b in np.unique(idx):
        sel = idx == b
        out.append((float(b * window), float(np.std(values[sel]))))
    return out


@dataclass
class ConvergenceRecord:
    n_sites: int
    r_f: float
    r_f_l1: float
    weak_eth: float


@dataclass
class ConvergenceReport:
    """r_f and related statistics of one observable across a sweep of sizes."""

    observable: str
    target: TargetFunction
    records: list[ConvergenceRecord] = field(default_factory=list)

    @classmethod
    def from_tables(cls, tables: Sequence[SpectrumTable], obs: str, f: TargetFunction):
        report = cls(obs, f)
        for t in sorted(tables, key=lambda t: t.n_sites):
            report.records.append(
                ConvergenceRecord(t.n_sites, r_f(t, obs, f), r_f_l1(t, obs, f), weak_eth_statistic(t, obs))
            )
        return report

    @property
    def sizes(self) -> np.ndarray:
        return np.array([r.n_sites for r in self.records])

    @property
    def r_values(self) -> np.ndarray:
        return np.array([r.r_f for r in self.records])

    @property
    def proxy(self) -> np.ndarray:
        if len(self.records) < 2:
            return self.r_values
        return R_f_proxy(self.r_values)

    def exponent(self, zero_tol: float = 1e-10) -> tuple[float, float] | None:
        """Log-log exponent of r_f, or None when r_f vanishes numerically or too few sizes."""
        r = self.r_values
        if len(r) < 3 or np.all(r <= zero_tol) or np.any(r <= 0):
            return None
        return scaling_exponent(list(zip(self.sizes, r)))

    def rows(self) -> list[dict]:
        return [
            {"N": rec.n_sites, "r_f": rec.r_f, "r_f_l1": rec.r_f_l1, "weak_eth": rec.weak_eth, "R_f_proxy": float(p)}
            for rec, p in zip(self.records, self.proxy)
        ]

    def summary(self) -> dict:
        exp = self.exponent()
        return {
            "observable": self.observable,
            "target_coefficients": list(self.target.coefficients),
            "exponent": None if exp is None else exp[0],
            "exponent_stderr": None if exp is None else exp[1],
            "exponent_status": "ok" if exp is not None else "undefined: r_f numerically zero or too few sizes",
            "R_f_is_proxy": True,
        }
