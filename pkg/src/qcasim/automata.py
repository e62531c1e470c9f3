"""Block unitaries, PQCA / BQCA / multilayer descriptors and their evaluators.

Block cells are ordered by their offset vector v in {0,1}^n, lexicographically
with axis 1 most significant; a block's joint letter index is cell-major with
cell 0 most significant.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .lattice import (Alphabet, AlphabetError, Configuration, DimensionError, Superposition,
                      box_sites, region_index)

UNITARITY_TOL = 1e-10
QUIESCENCE_TOL = 1e-12
DEFAULT_STATE_CAP = 4096
MAX_DENSE_ENTRIES = 1 << 24


class BlockUnitaryError(ValueError):
    pass


class StateCapError(ValueError):
    pass


class SupportEscape(RuntimeError):
    pass


def state_cap() -> int:
    return int(os.environ.get("QCA_STATE_CAP", DEFAULT_STATE_CAP))


def block_offsets(n: int) -> list:
    return list(itertools.product((0, 1), repeat=n))


def quiescent_block_index(alphabet, cells: int) -> int:
    return region_index([alphabet.quiescent_index] * cells, alphabet.size)


def block_letters(index: int, size: int, cells: int) -> tuple:
    out = []
    for _ in range(cells):
        index, r = divmod(index, size)
        out.append(r)
    return tuple(reversed(out))


class PatchedIdentity:
    """Identity on a huge space except on a few ``active`` columns.

    ``sub`` holds the active columns (shape dim x len(active)). The block is
    unitary iff those columns are orthonormal and only reach active rows.
    """

    def __init__(self, dim: int, active, sub):
        order = np.argsort(np.asarray(active, dtype=np.int64))
        self.dim = int(dim)
        self.active = np.asarray(active, dtype=np.int64)[order]
        self.sub = sparse.csc_matrix(sub, dtype=complex)[:, order]
        self.sub.sort_indices()
        self.shape = (self.dim, self.dim)

    @classmethod
    def from_columns(cls, dim: int, columns: dict) -> "PatchedIdentity":
        active = np.fromiter(columns.keys(), dtype=np.int64, count=len(columns))
        rows, cols, vals = [], [], []
        for j, c in enumerate(columns.values()):
            for r, v in c:
                rows.append(r)
                cols.append(j)
                vals.append(v)
        sub = sparse.csc_matrix((np.asarray(vals, dtype=complex),
                                 (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                                shape=(dim, len(active)))
        return cls(dim, active, sub)

    def slot(self, index: int) -> int:
        j = int(np.searchsorted(self.active, index))
        return j if j < len(self.active) and self.active[j] == index else -1

    def column(self, index: int) -> tuple:
        j = self.slot(index)
        if j < 0:
            return np.array([index]), np.array([1.0 + 0j])
        lo, hi = self.sub.indptr[j], self.sub.indptr[j + 1]
        return self.sub.indices[lo:hi].astype(np.int64), self.sub.data[lo:hi]

    def deviation(self) -> float:
        gram = self.sub.conj().T @ self.sub - sparse.identity(len(self.active), format="csc")
        dev = float(abs(gram).max()) if gram.nnz else 0.0
        rows = np.unique(self.sub.indices)
        if not np.isin(rows, self.active).all():
            dev = max(dev, 1.0)
        return dev

    def toarray(self) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        out[:, self.active] = self.sub.toarray()
        return out


@dataclass(frozen=True, eq=False)
class BlockUnitary:
    """Unitary on the joint letter space of a 2^n-cell hypercube.

    ``matrix`` is a dense ndarray, a scipy sparse matrix (kept as CSC) or a
    ``PatchedIdentity``. Pass ``validate=False`` only to build deliberately
    broken test fixtures.
    """

    n: int
    alphabet: Alphabet
    matrix: object
    validate: bool = True
    _columns: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        m = self.matrix
        if isinstance(m, PatchedIdentity):
            pass
        elif sparse.issparse(m):
            m = sparse.csc_matrix(m, dtype=complex)
            m.sort_indices()
        else:
            m = np.asarray(m, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.shape != (self.dim, self.dim):
            raise BlockUnitaryError(
                f"matrix shape {m.shape} does not match |alphabet|^(2^n) = {self.dim}")
        if self.validate:
            dev = self.unitarity_deviation()
            if dev > UNITARITY_TOL:
                raise BlockUnitaryError(f"matrix is not unitary (deviation {dev:.3e})")
            qdev = self.quiescence_deviation()
            if qdev > QUIESCENCE_TOL:
                raise BlockUnitaryError(
                    f"matrix does not fix the all-quiescent block (deviation {qdev:.3e})")

    @property
    def cells(self) -> int:
        return 2 ** self.n

    @property
    def dim(self) -> int:
        return self.alphabet.size ** self.cells

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.matrix) or isinstance(self.matrix, PatchedIdentity)

    def dense(self) -> np.ndarray:
        if self.dim > 1 << 14:
            raise StateCapError(f"block dimension {self.dim} is too large for a dense matrix")
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def unitarity_deviation(self) -> float:
        m = self.matrix
        if isinstance(m, PatchedIdentity):
            return m.deviation()
        if sparse.issparse(m):
            d = (m.conj().T @ m - sparse.identity(self.dim, dtype=complex, format="csc"))
            return float(abs(d).max()) if d.nnz else 0.0
        return float(np.abs(m.conj().T @ m - np.eye(self.dim)).max())

    def raw_column(self, index: int) -> tuple:
        """Row indices and values of the nonzero entries of column ``index``."""
        m = self.matrix
        if isinstance(m, PatchedIdentity):
            return m.column(index)
        if sparse.issparse(m):
            lo, hi = m.indptr[index], m.indptr[index + 1]
            return m.indices[lo:hi].astype(np.int64), m.data[lo:hi]
        col = m[:, index]
        rows = np.flatnonzero(col)
        return rows, col[rows]

    def nontrivial_columns(self):
        """Indices of columns that may differ from the identity column."""
        m = self.matrix
        if isinstance(m, PatchedIdentity):
            return m.active.tolist()
        return range(self.dim)

    def quiescence_deviation(self) -> float:
        qi = quiescent_block_index(self.alphabet, self.cells)
        rows, vals = self.raw_column(qi)
        dev = 0.0
        for r, v in zip(rows.tolist(), vals.tolist()):
            dev = max(dev, abs(v - 1) if r == qi else abs(v))
        if qi not in rows.tolist():
            dev = max(dev, 1.0)
        return dev

    def column(self, index: int) -> list:
        """Nonzero entries of a column as ``(((cell, letter), ...non-quiescent), amplitude)``."""
        cached = self._columns.get(index)
        if cached is not None:
            return cached
        rows, vals = self.raw_column(index)
        q = self.alphabet.quiescent_index
        out = []
        for r, v in zip(rows.tolist(), vals.tolist()):
            if v == 0:
                continue
            letters = block_letters(r, self.alphabet.size, self.cells)
            out.append((tuple((j, a) for j, a in enumerate(letters) if a != q), v))
        self._columns[index] = out
        return out

    def equals(self, other: "BlockUnitary") -> bool:
        if self.n != other.n or self.alphabet != other.alphabet:
            return False
        a, b = self.matrix, other.matrix
        if isinstance(a, PatchedIdentity) or isinstance(b, PatchedIdentity):
            idx = set(self.nontrivial_columns()) | set(other.nontrivial_columns())
            for c in idx:
                ra, va = self.raw_column(c)
                rb, vb = other.raw_column(c)
                if dict(zip(ra.tolist(), va.tolist())) != dict(zip(rb.tolist(), vb.tolist())):
                    return False
            return True
        if sparse.issparse(a) or sparse.issparse(b):
            d = sparse.csc_matrix(a) - sparse.csc_matrix(b)
            return d.nnz == 0 or abs(d).max() == 0
        return bool(np.array_equal(a, b))


def identity_block(n: int, alphabet) -> BlockUnitary:
    dim = alphabet.size ** (2 ** n)
    if dim > DEFAULT_STATE_CAP:
        return BlockUnitary(n, alphabet, sparse.identity(dim, dtype=complex, format="csc"))
    return BlockUnitary(n, alphabet, np.eye(dim, dtype=complex))


def permutation_block(n: int, alphabet, perm: Sequence[int]) -> BlockUnitary:
    """Block unitary sending basis column j to basis row perm[j]."""
    dim = len(perm)
    m = sparse.csc_matrix((np.ones(dim, dtype=complex), (np.asarray(perm), np.arange(dim))),
                          shape=(dim, dim))
    if dim <= DEFAULT_STATE_CAP:
        m = m.toarray()
    return BlockUnitary(n, alphabet, m)


def swap_block(alphabet) -> BlockUnitary:
    """1D two-cell swap."""
    s = alphabet.size
    perm = [b * s + a for a in range(s) for b in range(s)]
    return permutation_block(1, alphabet, perm)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def random_block_unitary(n: int, alphabet, rng: np.random.Generator,
                         conserving: bool = False) -> BlockUnitary:
    """Random block unitary fixing the quiescent block.

    With ``conserving`` the number of non-quiescent cells is preserved and the
    unitary is Haar random inside each particle-number sector.
    """
    cells = 2 ** n
    dim = alphabet.size ** cells
    q = alphabet.quiescent_index
    qi = quiescent_block_index(alphabet, cells)
    m = np.zeros((dim, dim), dtype=complex)
    if conserving:
        sectors: dict = {}
        for idx in range(dim):
            k = sum(a != q for a in block_letters(idx, alphabet.size, cells))
            sectors.setdefault(k, []).append(idx)
        groups = [v for k, v in sorted(sectors.items()) if k > 0]
    else:
        groups = [[i for i in range(dim) if i != qi]]
    m[qi, qi] = 1
    for g in groups:
        m[np.ix_(g, g)] = haar_unitary(len(g), rng)
    return BlockUnitary(n, alphabet, m)


def random_diagonal_block(n: int, alphabet, rng: np.random.Generator) -> BlockUnitary:
    dim = alphabet.size ** (2 ** n)
    phases = np.exp(2j * np.pi * rng.random(dim))
    phases[quiescent_block_index(alphabet, 2 ** n)] = 1
    return BlockUnitary(n, alphabet, np.diag(phases))


def controlled_phase_block(n: int, alphabet, rng: np.random.Generator) -> BlockUnitary:
    """Diagonal block with a random phase theta[a, b] for every pair of non-quiescent cells."""
    cells, size = 2 ** n, alphabet.size
    q = alphabet.quiescent_index
    theta = 2 * np.pi * rng.random((size, size))
    theta[q, :] = 0
    theta[:, q] = 0
    idx = np.arange(size ** cells)
    digits = [(idx // size ** (cells - 1 - i)) % size for i in range(cells)]
    total = np.zeros(idx.size)
    for i in range(cells):
        for j in range(i + 1, cells):
            total += theta[digits[i], digits[j]]
    return BlockUnitary(n, alphabet, np.diag(np.exp(1j * total)))


def block_base(site: Sequence[int], offset: Sequence[int]) -> tuple:
    return tuple(x - ((x - o) % 2) for x, o in zip(site, offset))


def _check_state(u: BlockUnitary, state: Superposition) -> None:
    if state.n != u.n:
        raise DimensionError(f"state dimension {state.n} does not match automaton dimension {u.n}")
    if state.alphabet != u.alphabet:
        raise AlphabetError("state alphabet does not match automaton alphabet")


def _apply_block(u: BlockUnitary, base: tuple, terms: dict, amp_floor: float) -> dict:
    offs = block_offsets(u.n)
    sites = [tuple(b + v for b, v in zip(base, off)) for off in offs]
    pos = {s: j for j, s in enumerate(sites)}
    size, cells = u.alphabet.size, u.cells
    q = u.alphabet.quiescent_index
    out: dict = {}
    for config, amp in terms.items():
        inside = None
        rest = []
        for s, a in config:
            j = pos.get(s)
            if j is None:
                rest.append((s, a))
            else:
                if inside is None:
                    inside = [q] * cells
                inside[j] = a
        if inside is None:
            out[config] = out.get(config, 0j) + amp
            continue
        idx = 0
        for a in inside:
            idx = idx * size + a
        for cell_letters, val in u.column(idx):
            new = Configuration(sorted(rest + [(sites[j], a) for j, a in cell_letters]))
            out[new] = out.get(new, 0j) + amp * val
    if amp_floor > 0:
        return {c: a for c, a in out.items() if abs(a) >= amp_floor}
    return {c: a for c, a in out.items() if a != 0}


def apply_block_layer(u: BlockUnitary, offset: Sequence[int], state: Superposition,
                      amp_floor: float = 0.0) -> Superposition:
    """Apply ``u`` on every block based in 2Z^n + offset.

    Blocks carrying only quiescent cells are skipped; they are fixed exactly.
    """
    _check_state(u, state)
    offset = tuple(offset)
    if len(offset) != u.n or any(o not in (0, 1) for o in offset):
        raise DimensionError(f"offset {offset} must be a 0/1 vector of length {u.n}")
    bases = {block_base(s, offset) for config in state.terms for s, _ in config}
    direct = _split_by_block(u, offset, state.terms)
    work = sum(_product_size(u, cols) for _, _, cols in direct)
    if work <= 8 * max(len(bases), 1) * max(len(state.terms), 1):
        terms = _apply_layer_direct(u, direct, amp_floor)
    else:
        terms = state.terms
        for base in sorted(bases):
            terms = _apply_block(u, base, terms, amp_floor)
    return Superposition(state.n, state.alphabet, terms)


def _split_by_block(u: BlockUnitary, offset: tuple, terms: dict) -> list:
    """Per configuration: its amplitude and the (base, column index) of each occupied block."""
    size, cells = u.alphabet.size, u.cells
    q = u.alphabet.quiescent_index
    locate: dict = {}
    out = []
    for config, amp in terms.items():
        blocks: dict = {}
        for s, a in config:
            loc = locate.get(s)
            if loc is None:
                base = tuple(x - ((x - o) % 2) for x, o in zip(s, offset))
                j = 0
                for x, b in zip(s, base):
                    j = j * 2 + (x - b)
                loc = locate[s] = (base, j)
            blocks.setdefault(loc[0], [q] * cells)[loc[1]] = a
        cols = []
        for base, letters in blocks.items():
            idx = 0
            for a in letters:
                idx = idx * size + a
            cols.append((base, idx))
        out.append((config, amp, cols))
    return out


def _product_size(u: BlockUnitary, cols: list) -> int:
    total = 1
    for _, idx in cols:
        total *= len(u.column(idx))
    return total


def _apply_layer_direct(u: BlockUnitary, split: list, amp_floor: float) -> dict:
    offs = block_offsets(u.n)
    cache: dict = {}
    out: dict = {}
    for _, amp, cols in split:
        choices = []
        for key in cols:
            ch = cache.get(key)
            if ch is None:
                base, idx = key
                sites = [tuple(b + v for b, v in zip(base, off)) for off in offs]
                ch = cache[key] = [(tuple((sites[j], a) for j, a in letters), val)
                                   for letters, val in u.column(idx)]
            choices.append(ch)
        if len(choices) == 1:
            for part, v in choices[0]:
                key = Configuration(sorted(part))
                out[key] = out.get(key, 0j) + amp * v
            continue
        for combo in itertools.product(*choices):
            cells = []
            val = amp
            for part, v in combo:
                cells.extend(part)
                val *= v
            key = Configuration(sorted(cells))
            out[key] = out.get(key, 0j) + val
    if amp_floor > 0:
        return {c: a for c, a in out.items() if abs(a) >= amp_floor}
    return {c: a for c, a in out.items() if a != 0}


def apply_cellwise(perm: Sequence[int], state: Superposition) -> Superposition:
    """Apply a letter permutation to every cell (the permutation must fix quiescence)."""
    out = {}
    for config, amp in state.terms.items():
        out[Configuration(sorted((s, perm[a]) for s, a in config))] = amp
    return Superposition(state.n, state.alphabet, out)


def _parity_offset(n: int, parity: int) -> tuple:
    if parity not in (0, 1):
        raise ValueError(f"substep parity must be 0 or 1, got {parity}")
    return (parity,) * n


@dataclass(frozen=True, eq=False)
class Pqca:
    u: BlockUnitary

    @property
    def n(self) -> int:
        return self.u.n

    @property
    def alphabet(self):
        return self.u.alphabet

    def ops(self) -> list:
        return [("block", self.u, _parity_offset(self.n, 0)),
                ("block", self.u, _parity_offset(self.n, 1))]

    def step(self, state: Superposition, parity: int) -> Superposition:
        return apply_block_layer(self.u, _parity_offset(self.n, parity), state)

    def round(self, state: Superposition) -> Superposition:
        return self.step(self.step(state, 0), 1)


@dataclass(frozen=True, eq=False)
class Bqca:
    u0: BlockUnitary
    u1: BlockUnitary

    def __post_init__(self):
        if self.u0.n != self.u1.n or self.u0.alphabet != self.u1.alphabet:
            raise BlockUnitaryError("u0 and u1 must share dimension and alphabet")

    @property
    def n(self) -> int:
        return self.u0.n

    @property
    def alphabet(self):
        return self.u0.alphabet

    def ops(self) -> list:
        return [("block", self.u0, _parity_offset(self.n, 0)),
                ("block", self.u1, _parity_offset(self.n, 1))]

    def step(self, state: Superposition, parity: int) -> Superposition:
        u = self.u0 if parity == 0 else self.u1
        return apply_block_layer(u, _parity_offset(self.n, parity), state)

    def round(self, state: Superposition) -> Superposition:
        return self.step(self.step(state, 0), 1)


def track_alphabet(sigma: Alphabet) -> Alphabet:
    """Two-track alphabet Sigma x Sigma; letter (a, b) has index a*|Sigma| + b."""
    s = sigma.size
    names = [f"{sigma.letters[a]}|{sigma.letters[b]}" for a in range(s) for b in range(s)]
    return Alphabet(tuple(names), sigma.quiescent_index * s + sigma.quiescent_index)


def track_swap_permutation(sigma: Alphabet) -> list:
    s = sigma.size
    return [(g % s) * s + g // s for g in range(s * s)]


@dataclass(frozen=True, eq=False)
class MultilayerQca:
    """2^n commuting layers of ``k`` on the two-track alphabet, then the track swap."""

    sigma: Alphabet
    k: BlockUnitary
    track_swap: bool = True

    def __post_init__(self):
        if self.k.alphabet != track_alphabet(self.sigma):
            raise AlphabetError("k must act on the two-track alphabet over sigma")

    @property
    def n(self) -> int:
        return self.k.n

    @property
    def alphabet(self):
        return self.k.alphabet

    def ops(self) -> list:
        out = [("block", self.k, off) for off in block_offsets(self.n)]
        if self.track_swap:
            out.append(("cellwise", track_swap_permutation(self.sigma)))
        return out

    def step(self, state: Superposition, offsets: Sequence | None = None) -> Superposition:
        for off in (block_offsets(self.n) if offsets is None else offsets):
            state = apply_block_layer(self.k, off, state)
        if self.track_swap:
            state = apply_cellwise(track_swap_permutation(self.sigma), state)
        return state

    def round(self, state: Superposition) -> Superposition:
        return self.step(state)


def step_pqca(a: Pqca, state: Superposition, substep_parity: int) -> Superposition:
    return a.step(state, substep_parity)


def round_pqca(a: Pqca, state: Superposition) -> Superposition:
    return a.round(state)


def step_bqca(a: Bqca, state: Superposition, substep_parity: int) -> Superposition:
    return a.step(state, substep_parity)


def round_bqca(a: Bqca, state: Superposition) -> Superposition:
    return a.round(state)


def step_multilayer(m: MultilayerQca, state: Superposition) -> Superposition:
    return m.step(state)


def evolve(a, state: Superposition, rounds: int) -> Superposition:
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    for _ in range(rounds):
        state = a.round(state)
    return state


# Dense window oracle -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WindowMatrix:
    """One round restricted to window-supported inputs.

    Rows index configurations on ``region`` (window plus margin), columns
    index configurations on ``window``; sites sorted, first most significant.
    """

    matrix: np.ndarray
    window: tuple
    region: tuple
    n: int
    alphabet: object

    def vector(self, state: Superposition, sites: Sequence | None = None) -> np.ndarray:
        sites = self.window if sites is None else sites
        return state_vector(state, sites)

    def apply(self, state: Superposition) -> Superposition:
        out = self.matrix @ state_vector(state, self.window)
        return vector_state(out, self.region, self.n, self.alphabet)


def state_vector(state: Superposition, sites: Sequence) -> np.ndarray:
    sites = list(sites)
    pos = {s: i for i, s in enumerate(sites)}
    size = state.alphabet.size
    q = state.alphabet.quiescent_index
    vec = np.zeros(size ** len(sites), dtype=complex)
    for config, amp in state.terms.items():
        letters = [q] * len(sites)
        for s, a in config:
            if s not in pos:
                raise SupportEscape(f"state has support at {s} outside the given sites")
            letters[pos[s]] = a
        vec[region_index(letters, size)] += amp
    return vec


def vector_state(vec: np.ndarray, sites: Sequence, n: int, alphabet) -> Superposition:
    size = alphabet.size
    q = alphabet.quiescent_index
    terms = {}
    for idx in np.flatnonzero(vec).tolist():
        letters = block_letters(idx, size, len(sites))
        terms[Configuration(sorted((s, a) for s, a in zip(sites, letters) if a != q))] = complex(vec[idx])
    return Superposition(n, alphabet, terms)


def _dense_apply_block(t: np.ndarray, ut: np.ndarray, axes: list) -> np.ndarray:
    m = len(axes)
    new = np.tensordot(ut, t, axes=(list(range(m, 2 * m)), axes))
    return np.moveaxis(new, list(range(m)), axes)


def dense_round(a, tensor: np.ndarray, region: Sequence, batch: int = 1) -> np.ndarray:
    """Apply one round of ``a`` to a dense tensor over ``region`` (leading batch axes).

    Blocks partly outside the region must carry only quiescent letters inside it,
    otherwise ``SupportEscape`` is raised.
    """
    region = list(region)
    pos = {s: i + batch for i, s in enumerate(region)}
    size = a.alphabet.size
    q = a.alphabet.quiescent_index
    n = a.n
    lo = [min(s[i] for s in region) for i in range(n)]
    hi = [max(s[i] for s in region) for i in range(n)]
    for op in a.ops():
        if op[0] == "cellwise":
            perm = np.asarray(op[1])
            inv = np.argsort(perm)
            for ax in pos.values():
                tensor = np.take(tensor, inv, axis=ax)
            continue
        _, u, offset = op
        if u.dim > MAX_DENSE_ENTRIES ** 0.5:
            raise StateCapError(f"block unitary of dimension {u.dim} too large for the dense oracle")
        ut = u.dense().reshape((size,) * (2 * u.cells))
        ranges = [range(lo[i] - 1 - ((lo[i] - 1 - offset[i]) % 2), hi[i] + 1, 2) for i in range(n)]
        for base in itertools.product(*ranges):
            cells = [tuple(b + v for b, v in zip(base, off)) for off in block_offsets(n)]
            inside = [c for c in cells if c in pos]
            if not inside:
                continue
            if len(inside) < len(cells):
                for c in inside:
                    sl = [slice(None)] * tensor.ndim
                    sl[pos[c]] = [x for x in range(size) if x != q]
                    if np.any(tensor[tuple(sl)] != 0):
                        raise SupportEscape(f"support reaches the region boundary at {c}")
                continue
            tensor = _dense_apply_block(tensor, ut, [pos[c] for c in cells])
    return tensor


def dense_global_matrix(a, window_lo: Sequence[int], window_shape: Sequence[int],
                        margin: int = 1, cap: int | None = None) -> WindowMatrix:
    """Brute-force matrix of one round of ``a`` on window-supported basis states."""
    cap = state_cap() if cap is None else cap
    n = a.n
    if len(window_lo) != n or len(window_shape) != n:
        raise DimensionError("window must have the automaton's dimension")
    size = a.alphabet.size
    window = box_sites(window_lo, window_shape)
    ncols = size ** len(window)
    if ncols > cap:
        raise StateCapError(f"window basis dimension {ncols} exceeds cap {cap}")
    region = box_sites([x - margin for x in window_lo], [w + 2 * margin for w in window_shape])
    nrows = size ** len(region)
    if nrows * ncols > MAX_DENSE_ENTRIES:
        raise StateCapError(f"dense oracle needs {nrows}x{ncols} entries, too many")
    q = a.alphabet.quiescent_index
    rpos = {s: i for i, s in enumerate(region)}
    t = np.zeros((ncols, nrows), dtype=complex)
    for j in range(ncols):
        letters = [q] * len(region)
        for s, x in zip(window, block_letters(j, size, len(window))):
            letters[rpos[s]] = x
        t[j, region_index(letters, size)] = 1
    t = t.reshape((ncols,) + (size,) * len(region))
    t = dense_round(a, t, region, batch=1)
    mat = t.reshape(ncols, nrows).T.copy()
    return WindowMatrix(mat, tuple(window), tuple(region), n, a.alphabet)


def _overlap_displacements(n: int) -> list:
    """Displacements d != 0 of overlapping blocks, one of each +-d pair."""
    out = []
    for d in itertools.product((-1, 0, 1), repeat=n):
        if any(d) and d > tuple(-x for x in d):
            out.append(d)
    return out


def commutation_deviation(k: BlockUnitary, probes: int = 2, seed: int = 0,
                          cap: int | None = None) -> tuple:
    """Largest entry of [K_a, K_b] over overlapping block pairs.

    The commutator is built exactly when the common window has dimension at most
    ``cap``; beyond that it is applied to ``probes`` random vectors.
    Returns ``(worst, [(displacement, deviation, exact), ...])``.
    """
    cap = state_cap() if cap is None else cap
    n, size = k.n, k.alphabet.size
    ut = k.dense().reshape((size,) * (2 * k.cells))
    rng = np.random.default_rng(seed)
    worst = 0.0
    rows = []
    for d in _overlap_displacements(n):
        lo = [min(0, x) for x in d]
        shape = [2 + abs(x) for x in d]
        sites = box_sites(lo, shape)
        pos = {s: i + 1 for i, s in enumerate(sites)}
        dim = size ** len(sites)
        exact = dim <= cap
        if exact:
            t = np.eye(dim, dtype=complex)
        else:
            t = rng.normal(size=(probes, dim)) + 1j * rng.normal(size=(probes, dim))
            t /= np.linalg.norm(t, axis=1, keepdims=True)
        t = t.reshape((t.shape[0],) + (size,) * len(sites))
        ax_a = [pos[tuple(v)] for v in block_offsets(n)]
        ax_b = [pos[tuple(x + y for x, y in zip(v, d))] for v in block_offsets(n)]
        ab = _dense_apply_block(_dense_apply_block(t, ut, ax_b), ut, ax_a)
        ba = _dense_apply_block(_dense_apply_block(t, ut, ax_a), ut, ax_b)
        dev = float(np.abs(ab - ba).max())
        rows.append((d, dev, exact))
        worst = max(worst, dev)
    return worst, rows
