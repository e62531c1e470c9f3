"""Isometric codings between alphabets and supercell grouping."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .automata import evolve
from .lattice import (AlphabetError, Configuration, DimensionError, PairAlphabet, Superposition,
                      WordAlphabet)

ISOMETRY_TOL = 1e-10
QUIESCENCE_TOL = 1e-12


class CodingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IsometricCoding:
    """Cellwise encoding E: H_h -> H_g and decoding D: H_g -> H_h (x) H_g.

    The maps are given column-wise: ``encode_letter(h)`` returns ``[(g, amp)]``
    and ``decode_letter(g)`` returns ``[((h, g'), amp)]``. Dense codings also
    keep their matrices in ``e`` and ``d`` (row index of ``d`` is h*|G| + g').
    """

    alphabet_h: object
    alphabet_g: object
    encode_letter: Callable = field(repr=False)
    decode_letter: Callable = field(repr=False)
    e: np.ndarray | None = field(default=None, repr=False)
    d: np.ndarray | None = field(default=None, repr=False)
    recipe: dict | None = None
    inject: Callable | None = field(default=None, repr=False)
    recover: Callable | None = field(default=None, repr=False)

    @classmethod
    def from_matrices(cls, alphabet_h, alphabet_g, e, d, validate: bool = True) -> "IsometricCoding":
        e = np.asarray(e, dtype=complex)
        d = np.asarray(d, dtype=complex)
        nh, ng = alphabet_h.size, alphabet_g.size
        if e.shape != (ng, nh):
            raise CodingError(f"E must be {ng}x{nh}, got {e.shape}")
        if d.shape != (nh * ng, ng):
            raise CodingError(f"D must be {nh * ng}x{ng}, got {d.shape}")
        if validate:
            if np.abs(e.conj().T @ e - np.eye(nh)).max() > ISOMETRY_TOL:
                raise CodingError("E is not an isometry")
            if np.abs(d.conj().T @ d - np.eye(ng)).max() > ISOMETRY_TOL:
                raise CodingError("D is not an isometry")
            qh, qg = alphabet_h.quiescent_index, alphabet_g.quiescent_index
            want = np.zeros(ng)
            want[qg] = 1
            if np.abs(e[:, qh] - want).max() > QUIESCENCE_TOL:
                raise CodingError("E does not preserve quiescence")
            want = np.zeros(nh * ng)
            want[qh * ng + qg] = 1
            if np.abs(d[:, qg] - want).max() > QUIESCENCE_TOL:
                raise CodingError("D does not preserve quiescence")

        def enc(h):
            col = e[:, h]
            return [(int(g), complex(col[g])) for g in np.flatnonzero(col)]

        def dec(g):
            col = d[:, g]
            return [(divmod(int(r), ng), complex(col[r])) for r in np.flatnonzero(col)]

        return cls(alphabet_h, alphabet_g, enc, dec, e, d)

    @classmethod
    def from_injection(cls, alphabet_h, alphabet_g, inject: Callable[[int], int],
                       recover: Callable[[int], int | None], recipe: dict | None = None
                       ) -> "IsometricCoding":
        """Coding that maps basis letters injectively; ``recover`` inverts on the image.

        Letters outside the image decode to ``|q_h> (x) |g>``, so D stays isometric.
        """
        qh, qg = alphabet_h.quiescent_index, alphabet_g.quiescent_index
        if inject(qh) != qg:
            raise CodingError("injection does not preserve quiescence")

        def enc(h):
            return [(inject(h), 1.0 + 0j)]

        def dec(g):
            h = recover(g)
            if h is not None and inject(h) == g:
                return [((h, qg), 1.0 + 0j)]
            return [((qh, g), 1.0 + 0j)]

        return cls(alphabet_h, alphabet_g, enc, dec, recipe=recipe, inject=inject, recover=recover)


def identity_coding(alphabet, n: int | None = None, s: int | None = None) -> IsometricCoding:
    recipe = {"construction": "identity"}
    if n is not None:
        recipe.update(n=n, s=1 if s is None else s)
    return IsometricCoding.from_injection(alphabet, alphabet, lambda h: h, lambda g: g,
                                          recipe=recipe)


def inverter_decoding(e: np.ndarray, qh: int, qg: int) -> np.ndarray:
    """Isometric D with D(E|h>) = |h>|q_g>; the complement of range(E) goes to |q_h>|g != q_g>."""
    e = np.asarray(e, dtype=complex)
    ng, nh = e.shape
    d = np.zeros((nh * ng, ng), dtype=complex)
    for h in range(nh):
        d[h * ng + qg, :] = e[:, h].conj()
    u, _, _ = np.linalg.svd(e, full_matrices=True)
    comp = u[:, nh:]
    targets = [g for g in range(ng) if g != qg]
    for j in range(comp.shape[1]):
        d[qh * ng + targets[j], :] = comp[:, j].conj()
    return d


def _expand(config: Configuration, column: Callable, out_q: int) -> list:
    parts = []
    for site, letter in config:
        parts.append([(site, a, v) for a, v in column(letter)])
    res = []
    for combo in itertools.product(*parts):
        amp = 1 + 0j
        cells = []
        for site, a, v in combo:
            amp *= v
            if a != out_q:
                cells.append((site, a))
        res.append((Configuration(sorted(cells)), amp))
    return res


def encode(coding: IsometricCoding, state: Superposition) -> Superposition:
    if state.alphabet != coding.alphabet_h:
        raise AlphabetError("state alphabet does not match the coding's source alphabet")
    qg = coding.alphabet_g.quiescent_index
    out: dict = {}
    for config, amp in state.terms.items():
        for c, v in _expand(config, coding.encode_letter, qg):
            out[c] = out.get(c, 0j) + amp * v
    return Superposition(state.n, coding.alphabet_g, {c: a for c, a in out.items() if a != 0})


def decode(coding: IsometricCoding, state: Superposition) -> Superposition:
    """Apply D cellwise; the result lives on the pair alphabet (h-track, g-track)."""
    if state.alphabet != coding.alphabet_g:
        raise AlphabetError("state alphabet does not match the coding's target alphabet")
    pair = PairAlphabet(coding.alphabet_h, coding.alphabet_g)
    ng = coding.alphabet_g.size

    def col(g):
        return [(h * ng + g2, v) for (h, g2), v in coding.decode_letter(g)]

    out: dict = {}
    for config, amp in state.terms.items():
        for c, v in _expand(config, col, pair.quiescent_index):
            out[c] = out.get(c, 0j) + amp * v
    return Superposition(state.n, pair, {c: a for c, a in out.items() if a != 0})


def split_tracks(state: Superposition) -> dict:
    """Pair-alphabet state as ``{(h_config, g_config): amplitude}``."""
    pair = state.alphabet
    if not isinstance(pair, PairAlphabet):
        raise AlphabetError("split_tracks needs a pair-alphabet state")
    qh, qg = pair.first.quiescent_index, pair.second.quiescent_index
    out = {}
    for config, amp in state.terms.items():
        hs, gs = [], []
        for s, x in config:
            h, g = pair.pair(x)
            if h != qh:
                hs.append((s, h))
            if g != qg:
                gs.append((s, g))
        key = (Configuration(hs), Configuration(gs))
        out[key] = out.get(key, 0j) + amp
    return out


def track_matrix(state: Superposition) -> tuple:
    """Coefficient matrix of the h-track x g-track bipartition, with row/column labels."""
    split = split_tracks(state)
    rows = sorted({h for h, _ in split})
    cols = sorted({g for _, g in split})
    ri = {c: i for i, c in enumerate(rows)}
    ci = {c: i for i, c in enumerate(cols)}
    m = np.zeros((len(rows), len(cols)), dtype=complex)
    for (h, g), a in split.items():
        m[ri[h], ci[g]] += a
    return rows, cols, m


def schmidt_coefficients(state: Superposition) -> np.ndarray:
    _, _, m = track_matrix(state)
    if m.size == 0:
        return np.zeros(0)
    return np.linalg.svd(m, compute_uv=False)


def project_h_track(state: Superposition, expected: Superposition) -> dict:
    """(<expected| (x) I) applied to a pair-alphabet state: the g-track vector left over."""
    out: dict = {}
    for (h, g), a in split_tracks(state).items():
        e = expected.terms.get(h)
        if e is not None:
            out[g] = out.get(g, 0j) + e.conjugate() * a
    return out


# Grouping ------------------------------------------------------------------

def _intra_offsets(n: int, s: int) -> list:
    return list(itertools.product(range(s), repeat=n))


def regroup_state(state: Superposition, s: int, direction: str, origin: Sequence[int] | None = None
                  ) -> Superposition:
    """Bijective reindexing between cells and s^n supercells.

    Cell x belongs to supercell floor((x - origin) / s); the supercell letter is
    the word of its cells in lexicographic order (axis 1 most significant).
    """
    n = state.n
    origin = (0,) * n if origin is None else tuple(origin)
    if len(origin) != n:
        raise DimensionError("origin must have the state's dimension")
    if s < 1:
        raise ValueError("supercell side must be >= 1")
    offs = _intra_offsets(n, s)
    if direction == "pack":
        walpha = WordAlphabet(state.alphabet, s ** n)
        q = state.alphabet.quiescent_index
        pos = {r: j for j, r in enumerate(offs)}
        out = {}
        for config, amp in state.terms.items():
            cells: dict = {}
            for site, a in config:
                sup, rem = zip(*(divmod(x - o, s) for x, o in zip(site, origin)))
                word = cells.setdefault(sup, [q] * len(offs))
                word[pos[rem]] = a
            out[Configuration(sorted((k, walpha.index_of(w)) for k, w in cells.items()))] = amp
        return Superposition(n, walpha, out)
    if direction == "unpack":
        walpha = state.alphabet
        if not isinstance(walpha, WordAlphabet) or walpha.length != s ** n:
            raise AlphabetError("unpack needs a word alphabet of length s^n")
        q = walpha.base.quiescent_index
        out = {}
        for config, amp in state.terms.items():
            cells = []
            for sup, w in config:
                for r, a in zip(offs, walpha.word(w)):
                    if a != q:
                        cells.append((tuple(o + s * k + ri for o, k, ri in zip(origin, sup, r)), a))
            out[Configuration(sorted(cells))] = amp
        return Superposition(n, walpha.base, out)
    raise ValueError(f"direction must be 'pack' or 'unpack', got {direction!r}")


@dataclass(frozen=True, eq=False)
class GroupedAutomaton:
    """t rounds of ``base`` seen on s^n supercells; the quiescent supercell is q^(s^n)."""

    base: object
    s: int
    t: int
    origin: tuple = None

    def __post_init__(self):
        if self.s < 1 or self.t < 1:
            raise ValueError("grouping needs s >= 1 and t >= 1")
        origin = (0,) * self.base.n if self.origin is None else tuple(self.origin)
        object.__setattr__(self, "origin", origin)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def alphabet(self) -> WordAlphabet:
        return WordAlphabet(self.base.alphabet, self.s ** self.n)

    @property
    def q_prime(self) -> int:
        return self.alphabet.quiescent_index

    def pack(self, state: Superposition) -> Superposition:
        return regroup_state(state, self.s, "pack", self.origin)

    def unpack(self, state: Superposition) -> Superposition:
        return regroup_state(state, self.s, "unpack", self.origin)

    def base_round(self, state: Superposition) -> Superposition:
        """One grouped step on an ungrouped (base-cell) state."""
        return evolve(self.base, state, self.t)

    def round(self, state: Superposition) -> Superposition:
        return self.pack(self.base_round(self.unpack(state)))


def group(a, s: int, t: int, origin: Sequence[int] | None = None) -> GroupedAutomaton:
    return GroupedAutomaton(a, s, t, None if origin is None else tuple(origin))
