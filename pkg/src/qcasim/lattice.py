"""Finite configurations on Z^n and sparse superpositions of them.

Cells not stored in a configuration hold the quiescent letter, so a state of
the infinite lattice is represented exactly by its finite support.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

Site = tuple  # tuple[int, ...] of length n

TOL = 1e-10


class AlphabetError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    letters: tuple
    quiescent_index: int = 0

    def __post_init__(self):
        letters = tuple(str(x) for x in self.letters)
        object.__setattr__(self, "letters", letters)
        if not letters:
            raise AlphabetError("alphabet must contain at least one letter")
        if len(set(letters)) != len(letters):
            raise AlphabetError("letter names must be distinct")
        if not 0 <= self.quiescent_index < len(letters):
            raise AlphabetError(f"quiescent index {self.quiescent_index} out of range")

    @property
    def size(self) -> int:
        return len(self.letters)

    @property
    def quiescent(self) -> str:
        return self.letters[self.quiescent_index]

    def name(self, index: int) -> str:
        return self.letters[index]

    def index(self, name: str) -> int:
        try:
            return self.letters.index(name)
        except ValueError:
            raise AlphabetError(f"unknown letter {name!r}") from None


@dataclass(frozen=True)
class WordAlphabet:
    """Words of fixed length over a base alphabet (supercell letters).

    Word index is mixed radix with the first letter most significant.
    """

    base: Alphabet
    length: int

    @property
    def size(self) -> int:
        return self.base.size ** self.length

    @property
    def quiescent_index(self) -> int:
        return self.index_of([self.base.quiescent_index] * self.length)

    def word(self, index: int) -> tuple:
        out = []
        b = self.base.size
        for _ in range(self.length):
            index, r = divmod(index, b)
            out.append(r)
        return tuple(reversed(out))

    def index_of(self, word: Sequence[int]) -> int:
        idx = 0
        b = self.base.size
        for letter in word:
            idx = idx * b + letter
        return idx

    def name(self, index: int) -> str:
        return ".".join(self.base.name(x) for x in self.word(index))

    def index(self, name: str) -> int:
        return self.index_of([self.base.index(x) for x in name.split(".")])


@dataclass(frozen=True)
class PairAlphabet:
    """Cellwise pair of two alphabets; index = first * |second| + second."""

    first: object
    second: object

    @property
    def size(self) -> int:
        return self.first.size * self.second.size

    @property
    def quiescent_index(self) -> int:
        return self.first.quiescent_index * self.second.size + self.second.quiescent_index

    def pair(self, index: int) -> tuple:
        return divmod(index, self.second.size)

    def name(self, index: int) -> str:
        a, b = self.pair(index)
        return f"{self.first.name(a)}|{self.second.name(b)}"

    def index(self, name: str) -> int:
        a, b = name.split("|", 1)
        return self.first.index(a) * self.second.size + self.second.index(b)


class Configuration(tuple):
    """Sorted tuple of ``(site, letter)`` pairs; quiescent cells are omitted."""

    __slots__ = ()

    @property
    def support(self) -> tuple:
        return tuple(site for site, _ in self)

    def as_dict(self) -> dict:
        return dict(self)

    def letter_at(self, site: Site, quiescent: int) -> int:
        for s, a in self:
            if s == site:
                return a
        return quiescent


EMPTY = Configuration()


def _canonical(cells: Iterable) -> Configuration:
    return Configuration(sorted(cells))


def make_configuration(n: int, entries: Iterable, alphabet) -> Configuration:
    cells = {}
    q = alphabet.quiescent_index
    for site, letter in entries:
        site = tuple(int(x) for x in (site if isinstance(site, (tuple, list)) else (site,)))
        if len(site) != n:
            raise DimensionError(f"site {site} has dimension {len(site)}, expected {n}")
        letter = int(letter)
        if not 0 <= letter < alphabet.size:
            raise AlphabetError(f"letter index {letter} out of range")
        if site in cells and cells[site] != letter:
            raise ValueError(f"conflicting letters at site {site}")
        cells[site] = letter
    return _canonical((s, a) for s, a in cells.items() if a != q)


@dataclass(frozen=True, eq=False)
class Superposition:
    """Sparse complex combination of configurations.

    Treated as immutable; ``terms`` must not be mutated after construction.
    """

    n: int
    alphabet: object
    terms: dict = field(repr=False)

    @classmethod
    def basis(cls, n: int, alphabet, entries: Iterable = ()) -> "Superposition":
        return cls(n, alphabet, {make_configuration(n, entries, alphabet): 1.0 + 0j})

    @classmethod
    def quiescent(cls, n: int, alphabet) -> "Superposition":
        return cls(n, alphabet, {EMPTY: 1.0 + 0j})

    @classmethod
    def from_terms(cls, n: int, alphabet, terms: Mapping, *, normalize: bool = False,
                   tol_norm: float = TOL) -> "Superposition":
        acc: dict = {}
        for config, amp in terms.items():
            if not isinstance(config, Configuration):
                config = make_configuration(n, config, alphabet)
            acc[config] = acc.get(config, 0j) + complex(amp)
        acc = {c: a for c, a in acc.items() if a != 0}
        state = cls(n, alphabet, acc)
        nrm = state.norm()
        if normalize:
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            return state.scaled(1 / nrm)
        if abs(nrm - 1) > tol_norm:
            raise ValueError(f"state norm {nrm!r} differs from 1 by more than {tol_norm}")
        return state

    def __len__(self) -> int:
        return len(self.terms)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def scaled(self, factor: complex) -> "Superposition":
        return Superposition(self.n, self.alphabet, {c: a * factor for c, a in self.terms.items()})

    def amplitude(self, config: Configuration) -> complex:
        return self.terms.get(config, 0j)

    def sites(self) -> set:
        return {s for c in self.terms for s, _ in c}

    def distance(self, other: "Superposition") -> float:
        keys = self.terms.keys() | other.terms.keys()
        return math.sqrt(sum(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) ** 2 for k in keys))

    def pruned(self, floor: float) -> "Superposition":
        return Superposition(self.n, self.alphabet,
                             {c: a for c, a in self.terms.items() if abs(a) >= floor})

    def sorted_items(self) -> list:
        return sorted(self.terms.items(), key=lambda kv: kv[0])


def _check_compatible(a: Superposition, b: Superposition) -> None:
    if a.n != b.n:
        raise DimensionError(f"dimension mismatch: {a.n} vs {b.n}")
    if a.alphabet != b.alphabet:
        raise AlphabetError("alphabet mismatch")


def shift(state: Superposition, k: int, amount: int = 1) -> Superposition:
    """Move the content at coordinate ``i_k + amount`` to ``i_k`` (axis ``k`` is 1-based)."""
    if not 1 <= k <= state.n:
        raise DimensionError(f"axis {k} invalid for dimension {state.n}")
    ax = k - 1
    out = {}
    for config, amp in state.terms.items():
        moved = Configuration(
            (s[:ax] + (s[ax] - amount,) + s[ax + 1:], a) for s, a in config)
        out[moved] = amp
    return Superposition(state.n, state.alphabet, out)


def inner_product(a: Superposition, b: Superposition) -> complex:
    _check_compatible(a, b)
    small, large = (a.terms, b.terms) if len(a.terms) <= len(b.terms) else (b.terms, a.terms)
    total = 0j
    for c in small:
        if c in large:
            total += a.terms[c].conjugate() * b.terms[c]
    return total


def fidelity(a: Superposition, b: Superposition) -> float:
    """Overlap modulus, insensitive to global phase."""
    return abs(inner_product(a, b))


@dataclass(frozen=True, eq=False)
class ReducedState:
    region: tuple
    matrix: np.ndarray

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def trace_distance(self, other: "ReducedState") -> float:
        ev = np.linalg.eigvalsh(self.matrix - other.matrix)
        return 0.5 * float(np.abs(ev).sum())


MAX_REDUCED_DIM = 1 << 13


def region_index(letters: Sequence[int], size: int) -> int:
    idx = 0
    for a in letters:
        idx = idx * size + a
    return idx


def partial_trace(state: Superposition, region: Iterable) -> ReducedState:
    """Density matrix on ``region`` (sites sorted, first site most significant)."""
    region = sorted({tuple(s) for s in region})
    if not region:
        raise ValueError("region must be non-empty")
    for s in region:
        if len(s) != state.n:
            raise DimensionError(f"region site {s} has wrong dimension")
    size = state.alphabet.size
    dim = size ** len(region)
    if dim > MAX_REDUCED_DIM:
        raise ValueError(f"reduced state dimension {dim} too large")
    pos = {s: i for i, s in enumerate(region)}
    q = state.alphabet.quiescent_index
    keys: dict = {}
    rows, cols, vals = [], [], []
    for config, amp in state.terms.items():
        letters = [q] * len(region)
        rest = []
        for s, a in config:
            i = pos.get(s)
            if i is None:
                rest.append((s, a))
            else:
                letters[i] = a
        rows.append(region_index(letters, size))
        cols.append(keys.setdefault(tuple(rest), len(keys)))
        vals.append(amp)
    m = sparse.coo_matrix((np.asarray(vals, dtype=complex), (rows, cols)),
                          shape=(dim, max(len(keys), 1))).tocsr()
    rho = (m @ m.conj().T).toarray()
    return ReducedState(tuple(region), rho)


def box_sites(lo: Sequence[int], shape: Sequence[int]) -> list:
    return [tuple(lo[i] + c[i] for i in range(len(lo)))
            for c in itertools.product(*(range(w) for w in shape))]


def random_local_vector(size: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=size) + 1j * rng.normal(size=size)
    return v / np.linalg.norm(v)


def random_product_state(n: int, alphabet, sites: Sequence, rng: np.random.Generator,
                         letters: Sequence[int] | None = None) -> Superposition:
    """Independent random single-cell states on ``sites`` (optionally restricted letters)."""
    letters = list(range(alphabet.size)) if letters is None else list(letters)
    local = [random_local_vector(len(letters), rng) for _ in sites]
    terms = {}
    for choice in itertools.product(range(len(letters)), repeat=len(sites)):
        amp = 1 + 0j
        for vec, j in zip(local, choice):
            amp *= vec[j]
        cfg = make_configuration(n, [(s, letters[j]) for s, j in zip(sites, choice)], alphabet)
        terms[cfg] = terms.get(cfg, 0j) + amp
    return Superposition(n, alphabet, terms)


def random_superposition(n: int, alphabet, configs: Sequence[Configuration],
                         rng: np.random.Generator) -> Superposition:
    configs = list(dict.fromkeys(configs))
    v = random_local_vector(len(configs), rng)
    return Superposition(n, alphabet, dict(zip(configs, v)))


def random_sparse_configuration(n: int, alphabet, sites: Sequence, particles: int,
                                rng: np.random.Generator) -> Configuration:
    """Configuration with ``particles`` non-quiescent cells drawn from ``sites``."""
    q = alphabet.quiescent_index
    others = [a for a in range(alphabet.size) if a != q]
    chosen = rng.choice(len(sites), size=min(particles, len(sites)), replace=False)
    return make_configuration(
        n, [(sites[i], others[rng.integers(len(others))]) for i in chosen], alphabet)


def tensor(a: Superposition, b: Superposition) -> Superposition:
    """Product of two states with disjoint supports."""
    _check_compatible(a, b)
    out = {}
    for ca, xa in a.terms.items():
        sa = {s for s, _ in ca}
        for cb, xb in b.terms.items():
            if any(s in sa for s, _ in cb):
                raise ValueError("tensor factors overlap")
            out[_canonical(tuple(ca) + tuple(cb))] = xa * xb
    return Superposition(a.n, a.alphabet, out)
