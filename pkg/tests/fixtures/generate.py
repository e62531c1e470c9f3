"""Regenerate the frozen CLI fixtures: python3 tests/fixtures/generate.py"""
from pathlib import Path

import numpy as np

from qcasim.automata import (BlockUnitary, Bqca, MultilayerQca, PatchedIdentity, Pqca,
                             random_block_unitary, random_diagonal_block, swap_block, track_alphabet)
from qcasim.io import save_automaton, save_state
from qcasim.lattice import Alphabet, Superposition

HERE = Path(__file__).parent
AB = Alphabet(("q", "a"), 0)


def main():
    rng = np.random.default_rng(2024)
    g = track_alphabet(AB)
    save_automaton(Pqca(swap_block(AB)), HERE / "swap_pqca.json")
    save_automaton(Bqca(random_block_unitary(1, AB, rng), random_block_unitary(1, AB, rng)),
                   HERE / "bqca_1d.json")
    save_automaton(Bqca(random_block_unitary(2, AB, rng, conserving=True),
                        random_block_unitary(2, AB, rng, conserving=True)), HERE / "bqca_2d.json")
    save_automaton(MultilayerQca(AB, random_diagonal_block(1, g, rng)), HERE / "multilayer_1d.json")
    save_automaton(MultilayerQca(AB, random_block_unitary(1, g, rng)),
                   HERE / "multilayer_noncommuting.json")
    identity_3d = BlockUnitary(3, g, PatchedIdentity.from_columns(g.size ** 8, {}))
    save_automaton(MultilayerQca(AB, identity_3d), HERE / "multilayer_3d.json")
    save_state(Superposition.basis(1, AB, [((0,), 1)]), HERE / "a_at_0.json")
    save_state(Superposition.quiescent(1, AB), HERE / "quiescent.json")
    v = np.array([0.6, 0.8j])
    save_state(Superposition(1, AB, {c: x for c, x in zip(
        [next(iter(Superposition.basis(1, AB, [((i,), 1)]).terms)) for i in (1, 2)], v)}),
        HERE / "two_terms.json")


if __name__ == "__main__":
    main()
