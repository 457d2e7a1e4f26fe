"""Symbolic Pauli-string algebra on a periodic qubit chain.

Strings are stored as site -> letter maps with 1-based sites. For products
and traces on an N-site ring each string is packed into a pair of bit masks
``(x, z)`` with the convention ``P = i^{|x & z|} X^x Z^z`` so that ``Y = iXZ``.
Normalized traces ``tr(.)/d`` are then read off as the coefficient of the
identity string, and nothing of dimension ``2^N`` is ever built.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

LETTERS = ("X", "Y", "Z")
_LETTER_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_LETTER_ORDER = {"X": 0, "Y": 1, "Z": 2}

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_MOMENT = 4


class ModelError(ValueError):
    """Raised for malformed model or operator definitions."""


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of X/Y/Z letters; identity sites are omitted."""

    letters: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        items = tuple(sorted(self.letters))
        sites = [s for s, _ in items]
        if len(set(sites)) != len(sites):
            raise ModelError(f"duplicate site in Pauli string {items}")
        for s, a in items:
            if a not in _LETTER_BITS:
                raise ModelError(f"invalid Pauli letter {a!r} at site {s}")
        object.__setattr__(self, "letters", items)

    @classmethod
    def from_dict(cls, letters: Mapping[int, str]) -> PauliString:
        return cls(tuple((int(s), a) for s, a in letters.items() if a != "I"))

    @classmethod
    def parse(cls, text: str) -> PauliString:
        """Parse compact notation such as ``"Z1Z2"``, ``"X1 Y3"`` or ``"I"``."""
        text = text.replace(" ", "")
        if text in ("", "I"):
            return cls()
        letters = {}
        pos = 0
        while pos < len(text):
            a = text[pos]
            if a not in "XYZI":
                raise ModelError(f"invalid Pauli letter {a!r} in {text!r}")
            pos += 1
            start = pos
            while pos < len(text) and text[pos].isdigit():
                pos += 1
            if start == pos:
                raise ModelError(f"missing site index after {a!r} in {text!r}")
            site = int(text[start:pos])
            if site < 1:
                raise ModelError(f"site indices are 1-based, got {site} in {text!r}")
            if a != "I":
                if site in letters:
                    raise ModelError(f"duplicate site {site} in {text!r}")
                letters[site] = a
        return cls.from_dict(letters)

    def as_dict(self) -> dict[int, str]:
        return dict(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.letters)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    @property
    def span(self) -> int:
        """Width ``max - min + 1`` of the support (0 for the identity)."""
        if not self.letters:
            return 0
        return self.letters[-1][0] - self.letters[0][0] + 1

    def sort_key(self) -> tuple:
        return tuple((s, _LETTER_ORDER[a]) for s, a in self.letters)

    def shifted(self, offset: int) -> PauliString:
        return PauliString(tuple((s + offset, a) for s, a in self.letters))

    def to_masks(self, n_sites: int, shift: int = 0) -> tuple[int, int]:
        x = z = 0
        for s, a in self.letters:
            bit = 1 << ((s - 1 + shift) % n_sites)
            bx, bz = _LETTER_BITS[a]
            if bx:
                x |= bit
            if bz:
                z |= bit
        return x, z

    @classmethod
    def from_masks(cls, x: int, z: int, n_sites: int) -> PauliString:
        letters = []
        for b in range(n_sites):
            key = ((x >> b) & 1, (z >> b) & 1)
            if key != (0, 0):
                letters.append((b + 1, _BITS_LETTER[key]))
        return cls(tuple(letters))

    def __str__(self) -> str:
        if not self.letters:
            return "I"
        return "".join(f"{a}{s}" for s, a in self.letters)


def _mask_product(x1: int, z1: int, x2: int, z2: int) -> tuple[int, int, int]:
    """Return ``(power, x, z)`` with ``P1 P2 = i^power P(x, z)``."""
    x = x1 ^ x2
    z = z1 ^ z2
    power = (
        (x1 & z1).bit_count()
        + (x2 & z2).bit_count()
        - (x & z).bit_count()
        + 2 * (z1 & x2).bit_count()
    )
    return power % 4, x, z


_I_POWERS = (1, 1j, -1, -1j)


def multiply_strings(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    """Multiply two strings living on the same chain: ``p q = phase * r``."""
    phase = 1 + 0j
    out = dict(p.letters)
    for s, b in q.letters:
        a = out.pop(s, None)
        if a is None:
            out[s] = b
            continue
        if a == b:
            continue
        power, x, z = _mask_product(*_LETTER_BITS[a], *_LETTER_BITS[b])
        phase *= _I_POWERS[power]
        out[s] = _BITS_LETTER[(x, z)]
    return phase, PauliString.from_dict(out)


@dataclass(frozen=True)
class ChainContext:
    """Periodic chain of ``n_sites`` qubits carrying a ``k``-local Hamiltonian."""

    n_sites: int
    k: int = 1

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError(f"chain needs at least one site, got N={self.n_sites}")


def translate(p: PauliString, shift: int, ctx: ChainContext) -> PauliString:
    """Apply ``T^shift p T^-shift`` on the periodic chain."""
    n = ctx.n_sites
    return PauliString(tuple((((s - 1 + shift) % n) + 1, a) for s, a in p.letters))


@dataclass(frozen=True)
class LocalOperator:
    """Complex-weighted sum of Pauli strings supported in sites ``1..window``."""

    terms: tuple[tuple[complex, PauliString], ...]
    window: int = field(default=0)

    def __post_init__(self):
        terms = tuple((complex(c), p) for c, p in self.terms)
        object.__setattr__(self, "terms", terms)
        reach = max((p.letters[-1][0] for _, p in terms if p.letters), default=1)
        window = self.window or reach
        if reach > window:
            raise ModelError(f"term reaches site {reach} beyond window {window}")
        object.__setattr__(self, "window", int(window))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[complex, str | PauliString]], window: int = 0):
        terms = []
        for c, p in pairs:
            terms.append((c, p if isinstance(p, PauliString) else PauliString.parse(p)))
        return cls(tuple(terms), window)

    @classmethod
    def parse(cls, text: str, window: int = 0) -> LocalOperator:
        """Parse ``"Z1Z2 + 1.05*X1 - 0.5*Z1"`` style sums."""
        src = text.replace(" ", "")
        pairs = []
        for chunk in filter(None, (c.lstrip("+") for c in re.split(r"(?<![eE*])(?=[+-])", src))):
            if "*" in chunk:
                coeff, string = chunk.split("*", 1)
                try:
                    c = complex(coeff.replace("i", "j"))
                except ValueError as exc:
                    raise ModelError(f"bad coefficient {coeff!r} in {text!r}") from exc
            elif chunk.startswith("-"):
                c, string = -1.0, chunk[1:]
            else:
                c, string = 1.0, chunk
            pairs.append((c, PauliString.parse(string)))
        if not pairs:
            raise ModelError(f"empty operator expression {text!r}")
        return cls(tuple(pairs), window)

    def as_dict(self) -> dict[PauliString, complex]:
        out: dict[PauliString, complex] = {}
        for c, p in self.terms:
            out[p] = out.get(p, 0) + c
        return out

    def simplified(self, tol: float = 0.0) -> LocalOperator:
        merged = self.as_dict()
        terms = tuple(
            (c, p) for p, c in sorted(merged.items(), key=lambda kv: kv[0].sort_key()) if abs(c) > tol
        )
        return LocalOperator(terms, self.window)

    def scaled(self, factor: complex) -> LocalOperator:
        return LocalOperator(tuple((factor * c, p) for c, p in self.terms), self.window)

    @property
    def is_traceless(self) -> bool:
        return abs(self.as_dict().get(PauliString(), 0)) == 0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c in self.as_dict().values())

    @property
    def is_canonical(self) -> bool:
        return all(p.letters and p.letters[0][0] == 1 for c, p in self.terms if c != 0)

    def dense(self, n_sites: int | None = None) -> np.ndarray:
        """Dense matrix on ``n_sites`` (default: the window), site 1 leftmost."""
        n = n_sites or self.window
        out = np.zeros((2**n, 2**n), dtype=complex)
        for c, p in self.terms:
            letters = p.as_dict()
            mat = np.ones((1, 1), dtype=complex)
            for s in range(1, n + 1):
                mat = np.kron(mat, PAULI_MATRICES[letters.get(s, "I")])
            out += c * mat
        return out

    def norm(self) -> float:
        """Operator norm, evaluated densely on the window."""
        return float(np.linalg.norm(self.dense(), ord=2))

    def normalized(self) -> LocalOperator:
        nrm = self.norm()
        if nrm == 0:
            raise ModelError("cannot normalize the zero operator")
        return self.scaled(1.0 / nrm)

    def ring_terms(self, n_sites: int, shift: int = 0) -> dict[tuple[int, int], complex]:
        """Coefficients in the ``(x, z)`` mask basis for the copy translated by ``shift``."""
        if self.window > n_sites:
            raise ValueError(f"operator window {self.window} exceeds chain length {n_sites}")
        out: dict[tuple[int, int], complex] = {}
        for c, p in self.terms:
            if c == 0:
                continue
            key = p.to_masks(n_sites, shift)
            # the mask basis carries the i^{|x&z|} factor, so Y maps without phase
            out[key] = out.get(key, 0) + c
        return out

    def __str__(self) -> str:
        parts = []
        for c, p in self.terms:
            coeff = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"
            parts.append(str(p) if coeff == "1" else f"{coeff}*{p}")
        return " + ".join(parts) or "0"


# --- ring-level Pauli sums -------------------------------------------------

PauliSum = dict  # {(x, z): coefficient}


def sum_product(a: PauliSum, b: PauliSum) -> PauliSum:
    out: dict[tuple[int, int], complex] = {}
    for (x1, z1), c1 in a.items():
        for (x2, z2), c2 in b.items():
            power, x, z = _mask_product(x1, z1, x2, z2)
            key = (x, z)
            out[key] = out.get(key, 0) + _I_POWERS[power] * c1 * c2
    return out


def sum_overlap(a: PauliSum, b: PauliSum) -> complex:
    """``tr(A B)/d`` for two Pauli sums (Pauli strings are trace-orthonormal)."""
    if len(a) > len(b):
        a, b = b, a
    return sum(c * b[key] for key, c in a.items() if key in b)


def hamiltonian_sum(h: LocalOperator, n_sites: int) -> PauliSum:
    out: dict[tuple[int, int], complex] = {}
    for l in range(n_sites):
        for key, c in h.ring_terms(n_sites, l).items():
            out[key] = out.get(key, 0) + c
    return out


def _support_mask(terms: PauliSum) -> int:
    m = 0
    for x, z in terms:
        m |= x | z
    return m


def _require_traceless(op: LocalOperator, name: str = "A") -> None:
    if not op.is_traceless:
        raise ModelError(f"{name} must be traceless (identity coefficient is nonzero)")


def trace_min_sites(k: int, k_obs: int, power: int) -> int:
    """Smallest N for which ``tr(H^power A)/d`` is N-independent (power 1 or 2)."""
    if power == 1:
        return k + k_obs - 1
    if power == 2:
        return 2 * k + k_obs - 2
    raise ValueError("only powers 1 and 2 have a closed validity window")


def _ctx_for(h: LocalOperator, ctx: ChainContext | int) -> ChainContext:
    if isinstance(ctx, ChainContext):
        return ctx
    return ChainContext(int(ctx), h.window)


def ham_op_trace(h: LocalOperator, a: LocalOperator, ctx: ChainContext | int) -> complex:
    """``tr(H A)/d`` from the translates of ``h`` that overlap ``A``."""
    _require_traceless(a)
    ctx = _ctx_for(h, ctx)
    n = ctx.n_sites
    a_terms = a.ring_terms(n)
    a_supp = _support_mask(a_terms)
    total = 0j
    for l in range(n):
        hl = h.ring_terms(n, l)
        if _support_mask(hl) & a_supp:
            total += sum_overlap(hl, a_terms)
    return total


def ham2_op_trace(h: LocalOperator, a: LocalOperator, ctx: ChainContext | int) -> complex:
    """``tr(H^2 A)/d`` as a double sum over overlapping translate pairs."""
    _require_traceless(a)
    ctx = _ctx_for(h, ctx)
    n = ctx.n_sites
    a_terms = a.ring_terms(n)
    a_supp = _support_mask(a_terms)
    translates = [h.ring_terms(n, l) for l in range(n)]
    supports = [_support_mask(t) for t in translates]
    total = 0j
    for l1 in range(n):
        s1 = supports[l1]
        for l2 in range(n):
            s2 = supports[l2]
            keep = (s1 & a_supp and s2 & (s1 | a_supp)) or (s2 & a_supp and s1 & (s2 | a_supp))
            if keep:
                total += sum_overlap(sum_product(translates[l1], translates[l2]), a_terms)
    return total


def ham_moment(h: LocalOperator, ctx: ChainContext | int, m: int) -> float:
    """``tr(H^m)/d`` for ``m <= 4`` by expanding the ring Hamiltonian symbolically."""
    if m > MAX_MOMENT:
        raise ValueError(f"moments above m={MAX_MOMENT} are not supported, got m={m}")
    if m < 0:
        raise ValueError("moment order must be non-negative")
    ctx = _ctx_for(h, ctx)
    n = ctx.n_sites
    if m == 0:
        return 1.0
    ham = hamiltonian_sum(h, n)
    if m == 1:
        return float(ham.get((0, 0), 0).real)
    if m == 2:
        return float(sum_overlap(ham, ham).real)
    # translation invariance: tr(H^m) = N tr(h H^{m-1})
    h0 = h.ring_terms(n)
    h0_ham = sum_product(h0, ham)
    if m == 3:
        return float((n * sum_overlap(h0_ham, ham)).real)
    ham2 = sum_product(ham, ham)
    return float((n * sum_overlap(h0_ham, ham2)).real)


def canonicalize(a: LocalOperator) -> LocalOperator:
    """Shift every string to start at site 1 and merge coinciding strings."""
    _require_traceless(a)
    merged: dict[PauliString, complex] = {}
    for c, p in a.terms:
        if p.is_identity:
            continue
        q = p.shifted(1 - p.letters[0][0])
        merged[q] = merged.get(q, 0) + c
    terms = tuple(
        (c, p) for p, c in sorted(merged.items(), key=lambda kv: kv[0].sort_key()) if c != 0
    )
    window = max((p.span for _, p in terms), default=1)
    return LocalOperator(terms, window)


def parameter_space_dim(d_loc: int, k_obs: int) -> int:
    """Number of real coordinates of canonical traceless ``k_obs``-local operators."""
    if d_loc < 2 or k_obs < 1:
        raise ValueError("need d_loc >= 2 and k' >= 1")
    return (d_loc**2 - 1) * d_loc ** (2 * k_obs - 2)


def _exact_window(h: LocalOperator) -> int:
    return max((p.letters[-1][0] for c, p in h.terms if c != 0 and p.letters), default=0)


def witness_operator(h: LocalOperator) -> tuple[LocalOperator, complex]:
    """Pauli string from the ``H_0 H_{2k-1}`` cross terms that certifies a 1/N obstruction.

    Returns the lexicographically smallest exactly ``(3k-1)``-local string whose
    support contains sites ``1, k, 2k, 3k-1``, and its overlap ``tr(C A)/d``
    with ``C = 2 sum_l H_l H_{l+2k-1}``.
    """
    h = h.simplified()
    _require_traceless(h, "h")
    if not h.is_canonical:
        raise ModelError("witness construction needs a canonical h")
    if not h.is_hermitian():
        raise ModelError("witness construction needs a Hermitian h")
    k = _exact_window(h)
    if k == 0:
        raise ModelError("h has no terms")
    span = 3 * k - 1
    required = {1, k, 2 * k, span}
    far = [(c, p.shifted(2 * k - 1)) for c, p in h.terms]
    cross: dict[PauliString, complex] = {}
    for c1, p1 in h.terms:
        for c2, p2 in far:
            phase, r = multiply_strings(p1, p2)
            cross[r] = cross.get(r, 0) + 2 * phase * c1 * c2
    candidates = [
        (p, c)
        for p, c in cross.items()
        if abs(c) > 0 and p.span == span and p.letters[0][0] == 1 and required <= set(p.support)
    ]
    if not candidates:
        raise ModelError("no exactly (3k-1)-local string with the required support among the cross terms of h with its shifted copy")
    p, c = min(candidates, key=lambda pc: pc[0].sort_key())
    witness = LocalOperator(((1.0, p),), span)
    n_check = trace_min_sites(k, span, 2)
    if abs(ham_op_trace(h, witness, n_check)) > 1e-12:
        raise AssertionError("witness has nonzero tr(HA); construction is inconsistent")
    if abs(obstruction_residual(h, witness, n_check)) == 0:
        raise AssertionError("witness does not violate the faster-than-1/N condition")
    return witness, c


def obstruction_residual(h: LocalOperator, a: LocalOperator, ctx: ChainContext | int | None = None) -> complex:
    """``tr(Hh) tr(H^2 A)/d^2 - tr(H^2 h) tr(HA)/d^2``; nonzero rules out o(1/N) convergence.

    With ``ctx=None`` the smallest chain on which every trace is N-independent is used.
    """
    if ctx is None:
        k = h.window
        ctx = max(trace_min_sites(k, a.window, 2), trace_min_sites(k, k, 2))
    ctx = _ctx_for(h, ctx)
    hh = ham_op_trace(h, h, ctx)
    h2h = ham2_op_trace(h, h, ctx)
    return hh * ham2_op_trace(h, a, ctx) - h2h * ham_op_trace(h, a, ctx)


# --- model files ------------------------------------------------------------


def load_model(path: str | Path, normalize: bool = False) -> LocalOperator:
    """Read a model definition (JSON) and return the local term ``h``."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return model_from_dict(data, normalize=normalize, source=str(path))


def model_from_dict(data: Mapping, normalize: bool = False, source: str = "model") -> LocalOperator:
    if not isinstance(data, Mapping):
        raise ModelError(f"{source}: top level must be an object")
    if data.get("d_loc", 2) != 2:
        raise ModelError(f"{source}: field 'd_loc' must be 2 (qubits only), got {data.get('d_loc')!r}")
    try:
        k = int(data["k"])
        raw_terms = data["terms"]
    except KeyError as exc:
        raise ModelError(f"{source}: missing field {exc.args[0]!r}") from exc
    if k < 1:
        raise ModelError(f"{source}: field 'k' must be >= 1, got {k}")
    terms = []
    for i, term in enumerate(raw_terms):
        where = f"{source}: terms[{i}]"
        coeff = term.get("coeff")
        if isinstance(coeff, (int, float)):
            c = complex(coeff)
        elif isinstance(coeff, (list, tuple)) and len(coeff) == 2:
            c = complex(float(coeff[0]), float(coeff[1]))
        else:
            raise ModelError(f"{where}.coeff must be a number or [re, im], got {coeff!r}")
        string = term.get("string")
        if not isinstance(string, Mapping):
            raise ModelError(f"{where}.string must be an object mapping sites to letters")
        letters = {}
        for key, letter in string.items():
            try:
                site = int(key)
            except ValueError as exc:
                raise ModelError(f"{where}.string[{key!r}]: site key must be an integer") from exc
            if letter not in LETTERS:
                raise ModelError(
                    f"{where}.string[{key!r}]: invalid Pauli letter {letter!r} (expected X, Y or Z)"
                )
            if not 1 <= site <= k:
                raise ModelError(f"{where}.string[{key!r}]: site outside window 1..{k}")
            letters[site] = letter
        terms.append((c, PauliString.from_dict(letters)))
    h = LocalOperator(tuple(terms), k).simplified()
    if not h.is_traceless:
        raise ModelError(f"{source}: h must be traceless (remove the identity term)")
    if not h.is_hermitian():
        raise ModelError(f"{source}: h must be Hermitian (Pauli coefficients must be real)")
    if normalize:
        h = h.normalized()
    return h


def model_to_dict(h: LocalOperator) -> dict:
    return {
        "d_loc": 2,
        "k": h.window,
        "terms": [
            {"coeff": [c.real, c.imag], "string": {str(s): a for s, a in p.letters}}
            for c, p in h.terms
        ],
    }


def mixed_field_ising(g: float = 1.05, hz: float = 0.5) -> LocalOperator:
    """``Z1 Z2 + g X1 + hz Z1``: a standard non-integrable chain."""
    return LocalOperator.from_pairs([(1.0, "Z1Z2"), (g, "X1"), (hz, "Z1")], window=2)


def random_local_operator(
    rng: np.random.Generator, window: int, canonical: bool = True, n_terms: int | None = None
) -> LocalOperator:
    """Traceless Hermitian operator with Gaussian coefficients on random Pauli strings."""
    strings = []
    for letters in itertools.product("IXYZ", repeat=window):
        if canonical and letters[0] == "I":
            continue
        if all(a == "I" for a in letters):
            continue
        strings.append(PauliString.from_dict({i + 1: a for i, a in enumerate(letters)}))
    if n_terms is not None and n_terms < len(strings):
        idx = rng.choice(len(strings), size=n_terms, replace=False)
        strings = [strings[i] for i in sorted(idx)]
    coeffs = rng.normal(size=len(strings))
    return LocalOperator(tuple(zip(coeffs, strings)), window)
