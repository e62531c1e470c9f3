"""JSON file formats for automata, states and codings.

Complex numbers are ``[re, im]`` pairs. Block matrices are stored in one of
three layouts: ``dense`` (nested rows, row-major), ``sparse`` (``[row, col,
re, im]`` entries) or ``patched-identity`` (identity except for the listed
columns). Output is byte-stable: keys are sorted and terms are ordered by
configuration.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import sparse

from .automata import (BlockUnitary, BlockUnitaryError, Bqca, MultilayerQca, PatchedIdentity,
                       Pqca, track_alphabet)
from .lattice import Alphabet, AlphabetError, Configuration, Superposition
from .lowering import Grouping, LoweringResult, coding_from_recipe

FORMAT_VERSION = 1
NORM_TOL = 1e-6


class FormatError(ValueError):
    """Malformed input file; the message names the offending field."""


def _field(obj, key, where, kind=None):
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object")
    if key not in obj:
        raise FormatError(f"{where}.{key}: missing field")
    val = obj[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind is int:
        raise FormatError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return val


def _complex(pair, where) -> complex:
    if (not isinstance(pair, list) or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
        raise FormatError(f"{where}: expected a [re, im] pair")
    return complex(pair[0], pair[1])


def _pair(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def load_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _check_version(obj, where):
    v = _field(obj, "format_version", where, int)
    if v != FORMAT_VERSION:
        raise FormatError(f"{where}.format_version: unsupported version {v}")


# Alphabets and matrices ------------------------------------------------------

def alphabet_to_json(alpha: Alphabet) -> dict:
    return {"letters": list(alpha.letters), "quiescent": alpha.quiescent}


def alphabet_from_json(obj, where="alphabet") -> Alphabet:
    letters = _field(obj, "letters", where, list)
    if not all(isinstance(x, str) for x in letters):
        raise FormatError(f"{where}.letters: letter names must be strings")
    q = _field(obj, "quiescent", where, str)
    if q not in letters:
        raise FormatError(f"{where}.quiescent: {q!r} is not one of the letters")
    try:
        return Alphabet(tuple(letters), letters.index(q))
    except AlphabetError as exc:
        raise FormatError(f"{where}: {exc}") from None


def matrix_to_json(m) -> dict:
    if isinstance(m, PatchedIdentity):
        cols = []
        for j, c in enumerate(m.active.tolist()):
            lo, hi = m.sub.indptr[j], m.sub.indptr[j + 1]
            cols.append([c, [[int(r)] + _pair(v) for r, v in
                             zip(m.sub.indices[lo:hi].tolist(), m.sub.data[lo:hi].tolist())]])
        return {"layout": "patched-identity", "dim": m.dim, "columns": cols}
    if sparse.issparse(m):
        coo = sparse.coo_matrix(m)
        order = np.lexsort((coo.col, coo.row))
        entries = [[int(coo.row[i]), int(coo.col[i])] + _pair(coo.data[i]) for i in order]
        return {"layout": "sparse", "dim": m.shape[0], "entries": entries}
    return {"layout": "dense", "rows": [[_pair(z) for z in row] for row in np.asarray(m).tolist()]}


def matrix_from_json(obj, where="matrix"):
    layout = _field(obj, "layout", where, str)
    if layout == "dense":
        rows = _field(obj, "rows", where, list)
        dim = len(rows)
        out = np.zeros((dim, dim), dtype=complex)
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != dim:
                raise FormatError(f"{where}.rows[{i}]: expected {dim} entries")
            for j, z in enumerate(row):
                out[i, j] = _complex(z, f"{where}.rows[{i}][{j}]")
        return out
    dim = _field(obj, "dim", where, int)
    if layout == "sparse":
        entries = _field(obj, "entries", where, list)
        rows, cols, vals = [], [], []
        for i, e in enumerate(entries):
            if not isinstance(e, list) or len(e) != 4:
                raise FormatError(f"{where}.entries[{i}]: expected [row, col, re, im]")
            r, c = e[0], e[1]
            if not (isinstance(r, int) and isinstance(c, int) and 0 <= r < dim and 0 <= c < dim):
                raise FormatError(f"{where}.entries[{i}]: index out of range")
            rows.append(r)
            cols.append(c)
            vals.append(_complex(e[2:], f"{where}.entries[{i}]"))
        return sparse.csc_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(dim, dim))
    if layout == "patched-identity":
        columns = _field(obj, "columns", where, list)
        active, rows, slots, vals = [], [], [], []
        for j, item in enumerate(columns):
            if not isinstance(item, list) or len(item) != 2 or not isinstance(item[1], list):
                raise FormatError(f"{where}.columns[{j}]: expected [col, entries]")
            c = item[0]
            if not isinstance(c, int) or not 0 <= c < dim:
                raise FormatError(f"{where}.columns[{j}]: column index out of range")
            active.append(c)
            for i, e in enumerate(item[1]):
                if not isinstance(e, list) or len(e) != 3 or not isinstance(e[0], int) \
                        or not 0 <= e[0] < dim:
                    raise FormatError(f"{where}.columns[{j}][{i}]: expected [row, re, im]")
                rows.append(e[0])
                slots.append(j)
                vals.append(_complex(e[1:], f"{where}.columns[{j}][{i}]"))
        sub = sparse.csc_matrix((np.asarray(vals, dtype=complex), (rows, slots)),
                                shape=(dim, len(active)))
        return PatchedIdentity(dim, active, sub)
    raise FormatError(f"{where}.layout: unknown layout {layout!r}")


def _block(n, alpha, obj, where) -> BlockUnitary:
    m = matrix_from_json(obj, where)
    try:
        return BlockUnitary(n, alpha, m)
    except BlockUnitaryError as exc:
        raise FormatError(f"{where}: {exc}") from None


# Automata --------------------------------------------------------------------

def automaton_to_json(a) -> dict:
    if isinstance(a, Pqca):
        kind, alpha, mats, extra = "pqca", a.alphabet, {"u": a.u}, {}
    elif isinstance(a, Bqca):
        kind, alpha, mats, extra = "bqca", a.alphabet, {"u0": a.u0, "u1": a.u1}, {}
    elif isinstance(a, MultilayerQca):
        kind, alpha, mats, extra = "multilayer", a.sigma, {"k": a.k}, {"track_swap": a.track_swap}
    else:
        raise TypeError(f"cannot serialize {type(a).__name__}")
    return {"format_version": FORMAT_VERSION, "kind": kind, "n": a.n,
            "alphabet": alphabet_to_json(alpha),
            "matrices": {k: matrix_to_json(u.matrix) for k, u in mats.items()}, **extra}


def automaton_from_json(obj, where="automaton"):
    _check_version(obj, where)
    kind = _field(obj, "kind", where, str)
    n = _field(obj, "n", where, int)
    if n < 1:
        raise FormatError(f"{where}.n: dimension must be >= 1")
    alpha = alphabet_from_json(_field(obj, "alphabet", where, dict), f"{where}.alphabet")
    mats = _field(obj, "matrices", where, dict)
    wm = f"{where}.matrices"
    if kind == "pqca":
        return Pqca(_block(n, alpha, _field(mats, "u", wm), f"{wm}.u"))
    if kind == "bqca":
        return Bqca(_block(n, alpha, _field(mats, "u0", wm), f"{wm}.u0"),
                    _block(n, alpha, _field(mats, "u1", wm), f"{wm}.u1"))
    if kind == "multilayer":
        swap = obj.get("track_swap", True)
        if not isinstance(swap, bool):
            raise FormatError(f"{where}.track_swap: expected a boolean")
        k = _block(n, track_alphabet(alpha), _field(mats, "k", wm), f"{wm}.k")
        return MultilayerQca(alpha, k, swap)
    raise FormatError(f"{where}.kind: unknown kind {kind!r} (expected pqca, bqca or multilayer)")


def load_automaton(path):
    return automaton_from_json(load_json(path), str(path))


def save_automaton(a, path) -> str:
    return dump_json(automaton_to_json(a), path)


# States ------------------------------------------------------------------------

def _site_key(site) -> str:
    return ",".join(str(x) for x in site)


def state_to_json(state: Superposition) -> dict:
    alpha = state.alphabet
    terms = [{"amplitude": _pair(amp),
              "cells": {_site_key(s): alpha.name(a) for s, a in config}}
             for config, amp in state.sorted_items()]
    return {"format_version": FORMAT_VERSION, "n": state.n,
            "alphabet": alphabet_to_json(alpha), "terms": terms}


def state_from_json(obj, alphabet: Alphabet | None = None, renormalize: bool = False,
                    where="state") -> Superposition:
    _check_version(obj, where)
    n = _field(obj, "n", where, int)
    alpha = alphabet_from_json(_field(obj, "alphabet", where, dict), f"{where}.alphabet")
    if alphabet is not None and alpha != alphabet:
        raise FormatError(f"{where}.alphabet: does not match the automaton's alphabet")
    acc: dict = {}
    for i, term in enumerate(_field(obj, "terms", where, list)):
        w = f"{where}.terms[{i}]"
        amp = _complex(_field(term, "amplitude", w), f"{w}.amplitude")
        cells = []
        for key, name in _field(term, "cells", w, dict).items():
            try:
                site = tuple(int(x) for x in key.split(","))
            except ValueError:
                raise FormatError(f"{w}.cells: bad site key {key!r}") from None
            if len(site) != n:
                raise FormatError(f"{w}.cells: site {key!r} does not have {n} coordinates")
            if not isinstance(name, str) or name not in alpha.letters:
                raise FormatError(f"{w}.cells[{key!r}]: unknown letter {name!r}")
            a = alpha.index(name)
            if a != alpha.quiescent_index:
                cells.append((site, a))
        config = Configuration(sorted(cells))
        acc[config] = acc.get(config, 0j) + amp
    state = Superposition(n, alpha, {c: a for c, a in acc.items() if a != 0})
    nrm = state.norm()
    if renormalize:
        if nrm == 0:
            raise FormatError(f"{where}: cannot renormalize the zero state")
        return state.scaled(1 / nrm)
    if abs(nrm - 1) > NORM_TOL:
        raise FormatError(f"{where}: norm {nrm:.9g} differs from 1 by more than {NORM_TOL} "
                          "(pass --renormalize to rescale)")
    return state


def load_state(path, alphabet=None, renormalize=False) -> Superposition:
    return state_from_json(load_json(path), alphabet, renormalize, str(path))


def save_state(state: Superposition, path) -> str:
    return dump_json(state_to_json(state), path)


# Codings -----------------------------------------------------------------------

def coding_to_json(result: LoweringResult, source_kind: str) -> dict:
    return {"format_version": FORMAT_VERSION, "recipe": result.coding.recipe,
            "source_kind": source_kind, "source_grouping": result.source_grouping.as_dict(),
            "target_grouping": result.target_grouping.as_dict(), "step_ratio": result.step_ratio}


def _grouping(obj, where) -> Grouping:
    s = _field(obj, "s", where, int)
    t = _field(obj, "t", where, int)
    origin = _field(obj, "origin", where, list)
    if s < 1 or t < 1 or not all(isinstance(x, int) for x in origin):
        raise FormatError(f"{where}: s, t must be >= 1 and origin a list of integers")
    return Grouping(s, t, tuple(origin))


def coding_from_json(obj, source, target, where="coding") -> LoweringResult:
    """Rebuild the lowering metadata against the parsed source and target automata."""
    _check_version(obj, where)
    recipe = _field(obj, "recipe", where, dict)
    sg = _grouping(_field(obj, "source_grouping", where, dict), f"{where}.source_grouping")
    tg = _grouping(_field(obj, "target_grouping", where, dict), f"{where}.target_grouping")
    ratio = _field(obj, "step_ratio", where, int)
    sigma = source.alphabet
    if isinstance(source, MultilayerQca) and recipe.get("construction") != "identity":
        sigma = source.sigma
    try:
        coding = coding_from_recipe(recipe, sigma)
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{where}.recipe: {exc}") from None
    for g, a, name in ((sg, source, "source"), (tg, target, "target")):
        if len(g.origin) != a.n:
            raise FormatError(f"{where}.{name}_grouping.origin: expected {a.n} coordinates")
    return LoweringResult(target, coding, sg, tg, ratio)


def load_coding(path, source, target) -> LoweringResult:
    return coding_from_json(load_json(path), source, target, str(path))
