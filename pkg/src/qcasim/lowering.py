"""Universality constructions: multilayer QCA -> BQCA -> PQCA.

Multilayer -> BQCA (n in {1, 2}). A simulated cell x occupies the 2^n target
cells 2x + 1 + w, w in {0,1}^n. Its two-track letter travels as a single data
record (letter, rotation mark, clock); the remaining cells are blank, and an
empty (quiescent) simulated cell is entirely blank. The offset-0 layer ``k``
straddles 2^n simulated cells and applies K to whatever data it gathers; the
offset-1 layer moves each record one step around its cell (clockwise or
anticlockwise per the mark), increments the clock, and at the last clock value
first swaps the record's two tracks. One multilayer step takes 2^n rounds.

BQCA -> PQCA. Each cell carries an n-bit mark equal to its coordinate parity
(quiescent cells carry 0). Relative to a block, marks equal v on the offset-0
layer and v xor 1...1 on the offset-1 layer, so a single scattering unitary
can apply U_0 or U_1 accordingly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .automata import (BlockUnitary, Bqca, MultilayerQca, PatchedIdentity, Pqca, block_offsets,
                       commutation_deviation, quiescent_block_index, track_alphabet)
from .coding import IsometricCoding, identity_coding
from .lattice import Alphabet, WordAlphabet

COMMUTATION_TOL = 1e-9
CW, CCW = 0, 1


class UnsupportedLowering(ValueError):
    pass


@dataclass(frozen=True)
class Grouping:
    s: int
    t: int
    origin: tuple

    def as_dict(self) -> dict:
        return {"s": self.s, "t": self.t, "origin": list(self.origin)}


@dataclass(frozen=True, eq=False)
class LoweringResult:
    target: object
    coding: IsometricCoding
    source_grouping: Grouping
    target_grouping: Grouping
    step_ratio: int


def _bits(j: int, n: int) -> tuple:
    return tuple((j >> (n - 1 - i)) & 1 for i in range(n))


def _from_bits(bits) -> int:
    out = 0
    for b in bits:
        out = out * 2 + b
    return out


def _triples(u: BlockUnitary) -> tuple:
    """(cols, rows, vals) of every column of ``u`` that may differ from the identity."""
    m = u.matrix
    if isinstance(m, PatchedIdentity):
        coo = m.sub.tocoo()
        return m.active[coo.col], coo.row.astype(np.int64), coo.data
    coo = sparse.coo_matrix(m)
    return coo.col.astype(np.int64), coo.row.astype(np.int64), coo.data.astype(complex)


def _assemble(n: int, alphabet, cols, rows, vals) -> BlockUnitary:
    """Block unitary with the given entries on their columns and identity elsewhere."""
    dim = alphabet.size ** (2 ** n)
    cols = np.asarray(cols, dtype=np.int64)
    active = np.unique(cols)
    sub = sparse.csc_matrix((np.asarray(vals, dtype=complex),
                             (np.asarray(rows, dtype=np.int64), np.searchsorted(active, cols))),
                            shape=(dim, len(active)))
    return BlockUnitary(n, alphabet, PatchedIdentity(dim, active, sub))


def _digits(idx: np.ndarray, size: int, cells: int) -> list:
    return [(idx // size ** (cells - 1 - j)) % size for j in range(cells)]


def _join(digits: list, size: int) -> np.ndarray:
    out = np.zeros_like(digits[0])
    for d in digits:
        out = out * size + d
    return out


# BQCA -> PQCA -------------------------------------------------------------

def marked_alphabet(sigma, n: int) -> Alphabet:
    """Letters (a, m), m an n-bit mark; index a * 2^n + m, quiescent (q, 0)."""
    marks = 2 ** n
    names = [f"{sigma.name(a)}@{''.join(map(str, _bits(m, n)))}"
             for a in range(sigma.size) for m in range(marks)]
    return Alphabet(tuple(names), sigma.quiescent_index * marks)


def lower_bqca_to_pqca(b: Bqca) -> LoweringResult:
    n, sigma = b.n, b.alphabet
    cells, marks = 2 ** n, 2 ** n
    q = sigma.quiescent_index
    target_alpha = marked_alphabet(sigma, n)
    tsize = target_alpha.size

    def relabel(idx: np.ndarray, layer: int) -> np.ndarray:
        digits = _digits(idx, sigma.size, cells)
        out = []
        for j, a in enumerate(digits):
            m = (j ^ (marks - 1)) if layer else j
            out.append(a * marks + np.where(a != q, m, 0))
        return _join(out, tsize)

    qi = quiescent_block_index(sigma, cells)
    parts = []
    for layer, u in ((0, b.u0), (1, b.u1)):
        cols, rows, vals = _triples(u)
        keep = cols != qi
        parts.append((relabel(cols[keep], layer), relabel(rows[keep], layer), vals[keep]))
    cols, rows, vals = (np.concatenate(x) for x in zip(*parts))
    target = Pqca(_assemble(n, target_alpha, cols, rows, vals))
    coding = mark_coding(sigma, n, 2, (0,) * n)
    g = Grouping(2, 1, (0,) * n)
    return LoweringResult(target, coding, g, g, 1)


def mark_coding(sigma, n: int, s: int, origin: tuple) -> IsometricCoding:
    """Supercell coding attaching parity marks; supercells of side s start at ``origin``."""
    if s % 2:
        raise ValueError("mark coding needs an even supercell side")
    marks = 2 ** n
    q = sigma.quiescent_index
    target_alpha = marked_alphabet(sigma, n)
    offs = list(itertools.product(range(s), repeat=n))
    parity = [_from_bits([(o + r) % 2 for o, r in zip(origin, off)]) for off in offs]
    h_alpha = WordAlphabet(sigma, s ** n)
    g_alpha = WordAlphabet(target_alpha, s ** n)

    def inject(h):
        word = h_alpha.word(h)
        return g_alpha.index_of([a * marks + (m if a != q else 0) for a, m in zip(word, parity)])

    def recover(g):
        out = []
        for x, m in zip(g_alpha.word(g), parity):
            a, mk = divmod(x, marks)
            if mk != (m if a != q else 0):
                return None
            out.append(a)
        return h_alpha.index_of(out)

    recipe = {"construction": "marks", "n": n, "s": s, "origin": list(origin)}
    c = IsometricCoding.from_injection(h_alpha, g_alpha, inject, recover, recipe=recipe)
    return c


def marks_consistent(state) -> bool:
    """True when every non-quiescent cell of a marked-alphabet state carries its coordinate parity."""
    alpha = state.alphabet
    n = state.n
    marks = 2 ** n
    q = alpha.quiescent_index // marks
    for config in state.terms:
        for site, x in config:
            a, m = divmod(x, marks)
            want = _from_bits([c % 2 for c in site]) if a != q else 0
            if m != want:
                return False
    return True


# Multilayer -> BQCA -------------------------------------------------------

_CYCLES = {1: [0, 1], 2: [0, 1, 3, 2]}


class SimCellAlphabet:
    """Blank (index 0, quiescent) or a data record (two-track letter != q, rotation, clock)."""

    def __init__(self, sigma: Alphabet, n: int):
        self.sigma = sigma
        self.n = n
        self.gamma = track_alphabet(sigma)
        self.clocks = 2 ** n
        self.data = [g for g in range(self.gamma.size) if g != self.gamma.quiescent_index]
        self._rank = {g: i for i, g in enumerate(self.data)}
        names = ["_"]
        for g in self.data:
            for rot in (CW, CCW):
                for clk in range(self.clocks):
                    names.append(f"{self.gamma.name(g)}:{'cw' if rot == CW else 'ccw'}:{clk}")
        self.alphabet = Alphabet(tuple(names), 0)

    def record(self, gamma: int, rot: int, clk: int) -> int:
        if gamma == self.gamma.quiescent_index:
            return 0
        return 1 + (self._rank[gamma] * 2 + rot) * self.clocks + clk

    def unpack(self, letter: int):
        if letter == 0:
            return None
        r, clk = divmod(letter - 1, self.clocks)
        g, rot = divmod(r, 2)
        return self.data[g], rot, clk


def _check_dim(n: int) -> None:
    if n not in _CYCLES:
        raise UnsupportedLowering(f"unsupported dimension {n}: multilayer lowering handles n in {{1, 2}}")


def block_op_k(m: MultilayerQca) -> BlockUnitary:
    """Apply K to the two-track letters gathered in a block whenever data is present."""
    n = m.n
    _check_dim(n)
    sc = SimCellAlphabet(m.sigma, n)
    cells = 2 ** n
    gsize = sc.gamma.size
    qk = quiescent_block_index(sc.gamma, cells)
    parities = [sum(v) % 2 for v in block_offsets(n)]
    rank = np.zeros(gsize, dtype=np.int64)
    rank[sc.data] = np.arange(len(sc.data))
    qg = sc.gamma.quiescent_index

    def relabel(idx, clk, phase):
        out = []
        for g, par in zip(_digits(idx, gsize, cells), parities):
            rec = 1 + (rank[g] * 2 + (phase ^ par)) * sc.clocks + clk
            out.append(np.where(g == qg, 0, rec))
        return _join(out, sc.alphabet.size)

    kc, kr, kv = _triples(m.k)
    keep = kc != qk
    kc, kr, kv = kc[keep], kr[keep], kv[keep]
    parts = [(relabel(kc, clk, ph), relabel(kr, clk, ph), kv)
             for clk in range(sc.clocks) for ph in (CW, CCW)]
    cols, rows, vals = (np.concatenate(x) for x in zip(*parts))
    return _assemble(n, sc.alphabet, cols, rows, vals)


def _lone_record_block(n: int, sigma: Alphabet, move) -> BlockUnitary:
    """Permutation acting on blocks holding a single record; ``move(pos, x) -> (pos', x')``."""
    sc = SimCellAlphabet(sigma, n)
    cells = 2 ** n
    L = sc.alphabet.size
    cols, rows = [], []
    for pos in range(cells):
        for x in range(1, L):
            new_pos, new_x = move(sc, pos, x)
            cols.append(x * L ** (cells - 1 - pos))
            rows.append(new_x * L ** (cells - 1 - new_pos))
    return _assemble(n, sc.alphabet, cols, rows, np.ones(len(cols)))


def _cswap(sc: SimCellAlphabet, pos: int, x: int) -> tuple:
    g, rot, clk = sc.unpack(x)
    if clk == sc.clocks - 1:
        s = sc.sigma.size
        x = sc.record((g % s) * s + g // s, rot, clk)
    return pos, x


def _rotate(sc: SimCellAlphabet, pos: int, x: int) -> tuple:
    cycle = _CYCLES[sc.n]
    g, rot, clk = sc.unpack(x)
    step = 1 if rot == CW else -1
    new_pos = cycle[(cycle.index(pos) + step) % len(cycle)]
    return new_pos, sc.record(g, rot, (clk + 1) % sc.clocks)


def block_op_rotate(n: int, sigma: Alphabet) -> BlockUnitary:
    """Move a lone data record one step along its rotation and advance its clock."""
    _check_dim(n)
    return _lone_record_block(n, sigma, _rotate)


def block_op_cswap(n: int, sigma: Alphabet) -> BlockUnitary:
    """Swap the two tracks of a lone record whose clock is at its last value."""
    _check_dim(n)
    return _lone_record_block(n, sigma, _cswap)


def block_op_move(n: int, sigma: Alphabet, track_swap: bool = True) -> BlockUnitary:
    """The offset-1 layer: optional track swap, then one rotation step."""
    _check_dim(n)
    if not track_swap:
        return block_op_rotate(n, sigma)
    return _lone_record_block(n, sigma, lambda sc, p, x: _rotate(sc, *_cswap(sc, p, x)))


def multilayer_coding(sigma: Alphabet, n: int) -> IsometricCoding:
    """2^n simulated cells -> 4^n target cells (target supercells start at 1...1)."""
    _check_dim(n)
    sc = SimCellAlphabet(sigma, n)
    h_alpha = WordAlphabet(sc.gamma, 2 ** n)
    g_alpha = WordAlphabet(sc.alphabet, 4 ** n)
    offs = list(itertools.product(range(4), repeat=n))
    slot = {off: j for j, off in enumerate(offs)}
    homes = [slot[tuple(x + 1 for x in u)] for u in block_offsets(n)]
    rots = [sum(u) % 2 for u in block_offsets(n)]
    qg = sc.gamma.quiescent_index

    def inject(h):
        word = [0] * len(offs)
        for g, home, rot in zip(h_alpha.word(h), homes, rots):
            word[home] = sc.record(g, rot, 0)
        return g_alpha.index_of(word)

    def recover(g):
        word = g_alpha.word(g)
        out = []
        for home, rot in zip(homes, rots):
            rec = sc.unpack(word[home])
            if rec is None:
                out.append(qg)
            elif rec[1] != rot or rec[2] != 0:
                return None
            else:
                out.append(rec[0])
        if any(word[j] for j in range(len(offs)) if j not in homes):
            return None
        return h_alpha.index_of(out)

    recipe = {"construction": "multilayer", "n": n}
    c = IsometricCoding.from_injection(h_alpha, g_alpha, inject, recover, recipe=recipe)
    return c


def lower_multilayer_to_bqca(m: MultilayerQca, check_commutation: bool = True) -> LoweringResult:
    n = m.n
    _check_dim(n)
    if check_commutation:
        dev, _ = commutation_deviation(m.k)
        if dev > COMMUTATION_TOL:
            raise ValueError(f"shifted copies of k do not commute (deviation {dev:.3e})")
    u0 = block_op_k(m)
    u1 = block_op_move(n, m.sigma, m.track_swap)
    target = Bqca(u0, u1)
    coding = multilayer_coding(m.sigma, n)
    return LoweringResult(target, coding, Grouping(2, 1, (0,) * n),
                          Grouping(4, 2 ** n, (1,) * n), 2 ** n)


def identity_lowering(a, s: int = 1) -> LoweringResult:
    """The trivial simulation of ``a`` by itself on supercells of side ``s``."""
    g = Grouping(s, 1, (0,) * a.n)
    coding = identity_coding(WordAlphabet(a.alphabet, s ** a.n), a.n, s)
    return LoweringResult(a, coding, g, g, 1)


def compose_codings(first: IsometricCoding, second: IsometricCoding) -> IsometricCoding:
    """E = E2 E1 for two injective codings; D inverts on the image of E."""
    if first.alphabet_g != second.alphabet_h:
        raise ValueError("codings do not chain: alphabets differ")
    i1, r1 = first.inject, first.recover
    i2, r2 = second.inject, second.recover

    def inject(h):
        return i2(i1(h))

    def recover(g):
        mid = r2(g)
        return None if mid is None else r1(mid)

    recipe = {"construction": "compose", "parts": [first.recipe, second.recipe]}
    c = IsometricCoding.from_injection(first.alphabet_h, second.alphabet_g, inject, recover,
                                       recipe=recipe)
    return c


def lower_multilayer_to_pqca(m: MultilayerQca) -> LoweringResult:
    first = lower_multilayer_to_bqca(m)
    second = lower_bqca_to_pqca(first.target)
    n = m.n
    sc = SimCellAlphabet(m.sigma, n)
    marks = mark_coding(sc.alphabet, n, 4, (1,) * n)
    coding = compose_codings(first.coding, marks)
    tg = first.target_grouping
    return LoweringResult(second.target, coding, first.source_grouping,
                          Grouping(tg.s, tg.t * second.step_ratio, tg.origin),
                          first.step_ratio * second.step_ratio)


def coding_from_recipe(recipe: dict, sigma: Alphabet) -> IsometricCoding:
    """Rebuild a construction coding.

    ``sigma`` is the source automaton's base alphabet (its full alphabet for identity codings).
    """
    kind = recipe["construction"]
    if kind == "identity":
        return identity_coding(WordAlphabet(sigma, recipe["s"] ** recipe["n"]), recipe["n"], recipe["s"])
    if kind == "marks":
        return mark_coding(sigma, recipe["n"], recipe["s"], tuple(recipe["origin"]))
    if kind == "multilayer":
        return multilayer_coding(sigma, recipe["n"])
    if kind == "compose":
        first, second = recipe["parts"]
        if first["construction"] != "multilayer" or second["construction"] != "marks":
            raise ValueError("unsupported composed coding")
        c1 = multilayer_coding(sigma, first["n"])
        sc = SimCellAlphabet(sigma, first["n"])
        c2 = mark_coding(sc.alphabet, second["n"], second["s"], tuple(second["origin"]))
        return compose_codings(c1, c2)
    raise ValueError(f"unknown coding construction {kind!r}")
