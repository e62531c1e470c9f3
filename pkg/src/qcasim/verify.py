"""Brute-force checkers: unitarity, shift-invariance, causality, commutation, simulation.

Every checker is deterministic given its parameters and seed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .automata import (BlockUnitary, commutation_deviation, dense_global_matrix,
                       dense_round, evolve, state_cap)
from .coding import (IsometricCoding, decode, encode, group, project_h_track,
                     schmidt_coefficients)
from .lattice import (Configuration, DimensionError, ReducedState, Superposition, box_sites,
                      make_configuration, partial_trace, random_local_vector, random_product_state,
                      region_index, shift)

UNITARITY_TOL = 1e-10
SHIFT_TOL = 1e-10
CAUSALITY_TOL = 1e-9
COMMUTATION_TOL = 1e-9
SIMULATION_TOL = 1e-9
GARBAGE_TOL = 1e-9
DENSE_REGION_LIMIT = 1 << 20
PRODUCT_LIMIT = 8192


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_deviation: float
    tolerance: float
    witnesses: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_deviation": self.worst_deviation,
            "tolerance": self.tolerance,
            "witnesses": [[w, v] for w, v in self.witnesses],
            "parameters": self.parameters,
        }

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {verdict} (worst deviation {self.worst_deviation:.3e}, tolerance {self.tolerance:.1e})"


def _report(name: str, witnesses: list, tol: float, parameters: dict) -> CheckReport:
    worst = max((v for _, v in witnesses), default=0.0)
    return CheckReport(name, bool(worst <= tol), float(worst), tol, witnesses, parameters)


def _default_window(n: int) -> tuple:
    return (0,) * n, ((4,) if n == 1 else (2,) * n)


def _describe(state: Superposition) -> str:
    cells = sorted(state.sites())
    return f"{len(state)} terms on {len(cells)} sites"


# Samplers ------------------------------------------------------------------

def random_sparse_state(n: int, alphabet, sites: Sequence, rng: np.random.Generator,
                        terms: int = 3, particles: int = 2) -> Superposition:
    """Random superposition of ``terms`` configurations, each with at most ``particles`` cells."""
    q = alphabet.quiescent_index
    others = [a for a in range(alphabet.size) if a != q]
    configs = []
    for _ in range(terms):
        k = int(rng.integers(1, min(particles, len(sites)) + 1))
        chosen = rng.choice(len(sites), size=k, replace=False)
        configs.append(make_configuration(
            n, [(sites[i], others[int(rng.integers(len(others)))]) for i in chosen], alphabet))
    configs = list(dict.fromkeys(configs))
    v = random_local_vector(len(configs), rng)
    return Superposition(n, alphabet, dict(zip(configs, v)))


def sample_states(n: int, alphabet, sites: Sequence, count: int, rng: np.random.Generator,
                  particles: int = 2) -> list:
    """Random product states when small enough, plus entangled two-term superpositions."""
    sites = list(sites)
    product_ok = alphabet.size ** len(sites) <= PRODUCT_LIMIT
    out = []
    for j in range(count):
        if product_ok and j % 4 != 3:
            out.append(random_product_state(n, alphabet, sites, rng))
        else:
            out.append(random_sparse_state(n, alphabet, sites, rng, terms=2 if j % 4 == 3 else 3,
                                           particles=particles))
    return out


# Axioms -----------------------------------------------------------------------

def check_unitarity(a, window_lo: Sequence[int] | None = None,
                    window_shape: Sequence[int] | None = None, margin: int = 1,
                    cap: int | None = None, tol: float = UNITARITY_TOL) -> CheckReport:
    """Max entry of M^dagger M - I for the dense round matrix on a window."""
    lo, shape = _default_window(a.n)
    lo = lo if window_lo is None else tuple(window_lo)
    shape = shape if window_shape is None else tuple(window_shape)
    w = dense_global_matrix(a, lo, shape, margin=margin, cap=cap)
    m = w.matrix
    dev = float(np.abs(m.conj().T @ m - np.eye(m.shape[1])).max())
    params = {"window_lo": list(lo), "window_shape": list(shape), "margin": margin,
              "tolerance": tol, "cap": state_cap() if cap is None else cap}
    return _report("unitarity", [(f"window {list(lo)} shape {list(shape)}", dev)], tol, params)


def check_shift_invariance(a, samples: int = 20, seed: int = 0, tol: float = SHIFT_TOL,
                           states: Sequence[Superposition] | None = None) -> CheckReport:
    """Compare round(shift_k^2 psi) with shift_k^2(round psi) for every axis k.

    Shifts are by two cells so the block partition is preserved.
    """
    rng = np.random.default_rng(seed)
    n = a.n
    if states is None:
        sites = box_sites((0,) * n, (4,) if n == 1 else (2,) * n)
        states = sample_states(n, a.alphabet, sites, samples, rng)
        states.append(Superposition.quiescent(n, a.alphabet))
    witnesses = []
    for j, psi in enumerate(states):
        out = a.round(psi)
        for k in range(1, n + 1):
            dev = a.round(shift(psi, k, 2)).distance(shift(out, k, 2))
            witnesses.append((f"sample {j} ({_describe(psi)}), axis {k}", dev))
    params = {"samples": len(states), "seed": seed, "shift": 2, "tolerance": tol}
    return _report("shift", witnesses, tol, params)


def _supercell_box(index: Sequence[int], s: int, offset: Sequence[int], count: int) -> list:
    return box_sites([s * i + o for i, o in zip(index, offset)], [s * count] * len(index))


def _reduce_output(a, psi: Superposition, rounds: int, out_sites: list) -> ReducedState:
    """Evolve ``psi`` and trace down to ``out_sites``, densely when the region is small."""
    n = a.n
    cells = sorted(psi.sites() | set(out_sites))
    lo = [min(c[i] for c in cells) - 2 * rounds for i in range(n)]
    hi = [max(c[i] for c in cells) + 2 * rounds for i in range(n)]
    shape = [h - l + 1 for h, l in zip(hi, lo)]
    region = box_sites(lo, shape)
    size = a.alphabet.size
    if hasattr(a, "ops") and size ** len(region) <= DENSE_REGION_LIMIT:
        vec = np.zeros(size ** len(region), dtype=complex)
        pos = {c: i for i, c in enumerate(region)}
        q = a.alphabet.quiescent_index
        for config, amp in psi.terms.items():
            letters = [q] * len(region)
            for c, x in config:
                letters[pos[c]] = x
            vec[region_index(letters, size)] += amp
        t = vec.reshape((1,) + (size,) * len(region))
        for _ in range(rounds):
            t = dense_round(a, t, region, batch=1)
        t = t.reshape((size,) * len(region))
        keep = [pos[c] for c in out_sites]
        rest = [i for i in range(len(region)) if i not in keep]
        mat = np.transpose(t, keep + rest).reshape(size ** len(keep), -1)
        return ReducedState(tuple(out_sites), mat @ mat.conj().T)
    return partial_trace(evolve(a, psi, rounds), out_sites)


def check_causality(a, target_site: Sequence[int] | None = None, trials: int = 20, seed: int = 0,
                    s: int = 2, t: int = 1, output_offset: Sequence[int] | None = None,
                    env_width: int | None = None, tol: float = CAUSALITY_TOL) -> CheckReport:
    """Output supercell vs. input neighborhood {I, I+1}^n of supercells.

    Cells are grouped into supercells of side ``s`` and ``t`` rounds make one
    step. Pairs of inputs share a fixed state on the neighborhood and carry
    independent random states on a surrounding ring of ``env_width`` cells.
    The output supercell is read with its grouping displaced by
    ``output_offset`` (default s // 2 per axis), the shift that makes a
    partitioned round causal on two supercells.
    """
    n = a.n
    target = (0,) * n if target_site is None else tuple(target_site)
    if len(target) != n:
        raise DimensionError("target site must have the automaton's dimension")
    offset = (s // 2,) * n if output_offset is None else tuple(output_offset)
    width = s if env_width is None else env_width
    rng = np.random.default_rng(seed)
    alpha = a.alphabet
    hood = _supercell_box(target, s, (0,) * n, 2)
    hood_set = set(hood)
    outer = box_sites([s * i - width for i in target], [2 * s + 2 * width] * n)
    ring = [c for c in outer if c not in hood_set]
    out_sites = _supercell_box(target, s, offset, 1)
    product = alpha.size ** len(outer) <= PRODUCT_LIMIT
    witnesses = []
    for j in range(trials):
        if product:
            fixed = random_product_state(n, alpha, hood, rng)
            envs = [random_product_state(n, alpha, ring, rng) for _ in range(2)]
        else:
            fixed = random_sparse_state(n, alpha, hood, rng)
            envs = [random_sparse_state(n, alpha, ring, rng, terms=2, particles=1) for _ in range(2)]
        if j == 0:
            envs[1] = envs[0]
        rho = [_reduce_output(a, _tensor(fixed, e), t, out_sites) for e in envs]
        witnesses.append((f"trial {j}" + (" (identical pair)" if j == 0 else ""),
                          rho[0].trace_distance(rho[1])))
    params = {"target_site": list(target), "trials": trials, "seed": seed, "s": s, "t": t,
              "output_offset": list(offset), "env_width": width, "tolerance": tol,
              "neighborhood": "input supercells {I, I+1}^n determine output supercell I "
                              "(grouping displaced by output_offset)"}
    return _report("causality", witnesses, tol, params)


def _tensor(a: Superposition, b: Superposition) -> Superposition:
    out = {}
    for ca, xa in a.terms.items():
        for cb, xb in b.terms.items():
            out[Configuration(sorted(tuple(ca) + tuple(cb)))] = xa * xb
    return Superposition(a.n, a.alphabet, out)


def check_commutation(k: BlockUnitary, n: int | None = None, cap: int | None = None,
                      tol: float = COMMUTATION_TOL, probes: int = 2, seed: int = 0) -> CheckReport:
    if n is not None and n != k.n:
        raise DimensionError(f"k acts on {k.n}-dimensional blocks, not {n}")
    worst, rows = commutation_deviation(k, probes=probes, seed=seed, cap=cap)
    witnesses = [(f"displacement {list(d)}" + ("" if exact else " (random probes)"), dev)
                 for d, dev, exact in rows]
    params = {"n": k.n, "tolerance": tol, "probes": probes, "seed": seed,
              "cap": state_cap() if cap is None else cap}
    return _report("commutation", witnesses, tol, params)


# Simulation -------------------------------------------------------------------

@dataclass
class SimulationReport:
    fidelities: list
    schmidt: list
    garbage_independent: bool
    step_ratio: int
    passed: bool
    tolerance: float
    table: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)

    @property
    def min_fidelity(self) -> float:
        return min(self.fidelities, default=1.0)

    @property
    def min_schmidt(self) -> float:
        return min(self.schmidt, default=1.0)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "fidelities": self.fidelities,
            "schmidt": self.schmidt,
            "garbage_independent": self.garbage_independent,
            "step_ratio": self.step_ratio,
            "tolerance": self.tolerance,
            "table": [list(r) for r in self.table],
            "parameters": self.parameters,
        }

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"simulation: {verdict} (min fidelity {self.min_fidelity:.12f}, "
                f"min Schmidt {self.min_schmidt:.12f}, step ratio {self.step_ratio})")


def _garbage_agree(vectors: list, tol: float) -> bool:
    for u, v in itertools.combinations(vectors, 2):
        keys = u.keys() | v.keys()
        overlap = abs(sum(u.get(c, 0).conjugate() * v.get(c, 0) for c in keys))
        if overlap < 1 - tol:
            return False
    return True


def check_direct_simulation(source, target, coding: IsometricCoding, steps: int = 4,
                            samples: int = 10, seed: int = 0,
                            inputs: Sequence[Superposition] | None = None, step_ratio: int = 1,
                            tol: float = SIMULATION_TOL) -> SimulationReport:
    """Dec(target^(i*step_ratio)(Enc psi)) against source^i psi for i = 1..steps.

    Fidelity is the norm of the decoded state projected onto source^i psi on the
    simulated track; the garbage left on the other track is compared across samples.
    """
    if coding.alphabet_h != source.alphabet or coding.alphabet_g != target.alphabet:
        raise ValueError("coding alphabets do not match the source and target automata")
    if inputs is None:
        rng = np.random.default_rng(seed)
        sites = box_sites((0,) * source.n, (2,) * source.n)
        inputs = [random_sparse_state(source.n, source.alphabet, sites, rng)
                  for _ in range(samples)]
    inputs = list(inputs)
    fids = [1.0] * steps
    schs = [1.0] * steps
    garbage = [[] for _ in range(steps)]
    table = []
    for j, psi in enumerate(inputs):
        want = psi.scaled(1 / psi.norm())
        got = encode(coding, want)
        for i in range(steps):
            want = source.round(want)
            got = evolve(target, got, step_ratio)
            dec = decode(coding, got)
            phi = project_h_track(dec, want)
            f = float(np.sqrt(sum(abs(x) ** 2 for x in phi.values())))
            sv = schmidt_coefficients(dec)
            top = float(sv[0]) if len(sv) else 0.0
            fids[i] = min(fids[i], f)
            schs[i] = min(schs[i], top)
            if f > 0:
                garbage[i].append({c: x / f for c, x in phi.items()})
            table.append((j, i + 1, f, top))
    independent = all(_garbage_agree(g, GARBAGE_TOL) for g in garbage)
    passed = all(f >= 1 - tol for f in fids) and all(x >= 1 - tol for x in schs)
    params = {"steps": steps, "samples": len(inputs), "seed": seed, "tolerance": tol,
              "garbage_tolerance": GARBAGE_TOL}
    return SimulationReport(fids, schs, independent, step_ratio, passed, tol, table, params)


def check_intrinsic_simulation(source, target, result, steps: int = 4, samples: int = 10,
                               seed: int = 0, inputs: Sequence[Superposition] | None = None,
                               target_rounds: int | None = None, particles: int = 2,
                               support: Sequence | None = None,
                               tol: float = SIMULATION_TOL) -> SimulationReport:
    """Group both sides as recorded in ``result`` and check direct simulation.

    ``inputs`` are source states on ungrouped cells. ``target_rounds`` overrides
    the number of target rounds per simulated step (negative controls only).
    """
    sg, tg = result.source_grouping, result.target_grouping
    rounds = tg.t if target_rounds is None else target_rounds
    g_src = group(source, sg.s, sg.t, sg.origin)
    g_tgt = group(target, tg.s, rounds, tg.origin)
    if inputs is None:
        rng = np.random.default_rng(seed)
        sites = box_sites(sg.origin, (2 * sg.s,) * source.n) if support is None else list(support)
        inputs = [random_sparse_state(source.n, source.alphabet, sites, rng, particles=particles)
                  for _ in range(samples)]
    packed = [g_src.pack(psi) for psi in inputs]
    rep = check_direct_simulation(g_src, g_tgt, result.coding, steps=steps, inputs=packed,
                                  seed=seed, tol=tol)
    rep.step_ratio = rounds
    rep.parameters.update({"source_grouping": sg.as_dict(),
                           "target_grouping": {**tg.as_dict(), "t": rounds}})
    return rep
