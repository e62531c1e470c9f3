"""Simulation, lowering and verification of n-dimensional quantum cellular automata."""
from .lattice import (Alphabet, Configuration, PairAlphabet, Superposition, WordAlphabet,
                      make_configuration, shift)
from .automata import (BlockUnitary, Bqca, MultilayerQca, Pqca, evolve)
from .coding import IsometricCoding, decode, encode, group
from .lowering import (LoweringResult, lower_bqca_to_pqca, lower_multilayer_to_bqca,
                       lower_multilayer_to_pqca)

__all__ = [
    "Alphabet", "Configuration", "PairAlphabet", "Superposition", "WordAlphabet",
    "make_configuration", "shift", "BlockUnitary", "Bqca", "MultilayerQca", "Pqca", "evolve",
    "IsometricCoding", "decode", "encode", "group", "LoweringResult", "lower_bqca_to_pqca",
    "lower_multilayer_to_bqca", "lower_multilayer_to_pqca",
]
