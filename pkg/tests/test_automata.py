import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcasim.automata import (BlockUnitary, BlockUnitaryError, Bqca, MultilayerQca, Pqca,
                             StateCapError, SupportEscape, apply_block_layer, block_letters,
                             commutation_deviation, controlled_phase_block,
                             dense_global_matrix, dense_round, evolve, haar_unitary,
                             identity_block,
                             quiescent_block_index, random_block_unitary, random_diagonal_block,
                             state_vector, swap_block, track_alphabet, track_swap_permutation,
                             vector_state)
from qcasim.lattice import (Alphabet, DimensionError, Superposition, box_sites,
                            make_configuration, random_product_state, shift)

AB = Alphabet(("q", "a"), 0)
ABC = Alphabet(("q", "a", "b"), 0)


def one(n, site, letter=1, alpha=AB):
    return Superposition.basis(n, alpha, [(site, letter)])


# Block unitaries


def test_block_indexing_convention():
    # 2D block: cells (0,0), (0,1), (1,0), (1,1); cell 0 is most significant.
    assert block_letters(1, 2, 4) == (0, 0, 0, 1)
    assert block_letters(8, 2, 4) == (1, 0, 0, 0)
    assert quiescent_block_index(ABC, 2) == 0
    assert quiescent_block_index(Alphabet(("a", "q"), 1), 2) == 3


def test_block_unitary_validation():
    with pytest.raises(BlockUnitaryError):
        BlockUnitary(1, AB, np.eye(3))
    bad = np.eye(4, dtype=complex)
    bad[1, 1] = 1.01
    with pytest.raises(BlockUnitaryError):
        BlockUnitary(1, AB, bad)
    moves_q = np.eye(4)[[1, 0, 2, 3]]
    with pytest.raises(BlockUnitaryError):
        BlockUnitary(1, AB, moves_q)
    assert BlockUnitary(1, AB, bad, validate=False).unitarity_deviation() > 1e-3


def test_random_blocks_are_valid():
    rng = np.random.default_rng(3)
    for n, alpha in ((1, ABC), (2, AB)):
        for conserving in (False, True):
            u = random_block_unitary(n, alpha, rng, conserving=conserving)
            assert u.unitarity_deviation() < 1e-10
            assert u.quiescence_deviation() < 1e-12


# Layers and rounds


def test_identity_layer():
    psi = random_product_state(1, ABC, box_sites((0,), (3,)), np.random.default_rng(0))
    out = apply_block_layer(identity_block(1, ABC), (1,), psi)
    assert out.distance(psi) == 0


def test_swap_layer_moves_letter():
    out = apply_block_layer(swap_block(AB), (0,), one(1, (0,)))
    assert out.terms == one(1, (1,)).terms


def test_swap_pqca_round_hops_two_sites():
    out = Pqca(swap_block(AB)).round(one(1, (0,)))
    assert out.terms == one(1, (2,)).terms


def test_quiescent_state_is_fixed_bit_exactly():
    rng = np.random.default_rng(1)
    q = Superposition.quiescent(2, AB)
    a = Bqca(random_block_unitary(2, AB, rng), random_block_unitary(2, AB, rng))
    assert a.round(q).terms == q.terms


def test_layer_rejects_dimension_mismatch():
    with pytest.raises(DimensionError):
        apply_block_layer(swap_block(AB), (0,), one(2, (0, 0)))
    with pytest.raises(DimensionError):
        apply_block_layer(swap_block(AB), (0, 1), one(1, (0,)))


def test_bqca_with_equal_blocks_is_a_pqca():
    rng = np.random.default_rng(2)
    u = random_block_unitary(1, ABC, rng)
    psi = random_product_state(1, ABC, box_sites((0,), (3,)), rng)
    assert Bqca(u, u).round(psi).distance(Pqca(u).round(psi)) == 0


def test_bqca_with_identity_first_layer():
    rng = np.random.default_rng(4)
    u1 = random_block_unitary(1, AB, rng)
    psi = random_product_state(1, AB, box_sites((0,), (3,)), rng)
    got = Bqca(identity_block(1, AB), u1).round(psi)
    assert got.distance(apply_block_layer(u1, (1,), psi)) < 1e-15


def _chain_oracle(u0, u1, length, psi, size):
    """Independent Kronecker-product oracle on an open chain of even length.

    Offset-0 blocks tile the chain; offset-1 blocks skip the two end cells,
    which is exact while the support stays away from the ends.
    """
    m0 = u0
    for _ in range(length // 2 - 1):
        m0 = np.kron(m0, u0)
    m1 = np.eye(size)
    for _ in range(length // 2 - 1):
        m1 = np.kron(m1, u1)
    m1 = np.kron(m1, np.eye(size))
    vec = state_vector(psi, box_sites((0,), (length,)))
    return m1 @ m0 @ vec


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 16), st.sampled_from([AB, ABC]))
def test_round_matches_kronecker_oracle(seed, alpha):
    rng = np.random.default_rng(seed)
    u0 = random_block_unitary(1, alpha, rng)
    u1 = random_block_unitary(1, alpha, rng)
    psi = random_product_state(1, alpha, [(2,), (3,)], rng)
    got = Bqca(u0, u1).round(psi)
    want = _chain_oracle(u0.dense(), u1.dense(), 6, psi, alpha.size)
    assert np.abs(state_vector(got, box_sites((0,), (6,))) - want).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 16))
def test_norm_preserved(seed):
    rng = np.random.default_rng(seed)
    a = Pqca(random_block_unitary(1, ABC, rng))
    psi = random_product_state(1, ABC, box_sites((-1,), (3,)), rng)
    assert abs(evolve(a, psi, 2).norm() - 1) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 16), st.integers(1, 2))
def test_substep_light_cone(seed, n):
    rng = np.random.default_rng(seed)
    a = Pqca(random_block_unitary(n, AB, rng))
    psi = random_product_state(n, AB, [(0,) * n, (1,) * n], rng)
    out = a.step(psi, 1)
    for site in out.sites():
        assert all(-1 <= x <= 2 for x in site)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 16))
def test_shift_by_two_commutes_with_round(seed):
    rng = np.random.default_rng(seed)
    a = Bqca(random_block_unitary(2, AB, rng, conserving=True),
             random_block_unitary(2, AB, rng, conserving=True))
    psi = random_product_state(2, AB, box_sites((0, 0), (2, 2)), rng)
    for k in (1, 2):
        assert a.round(shift(psi, k, 2)).distance(shift(a.round(psi), k, 2)) < 1e-10


# Multilayer


def test_track_alphabet_and_swap():
    g = track_alphabet(AB)
    assert g.letters == ("q|q", "q|a", "a|q", "a|a")
    assert g.quiescent_index == 0
    assert track_swap_permutation(AB) == [0, 2, 1, 3]


def test_multilayer_identity_k_is_track_swap():
    g = track_alphabet(AB)
    m = MultilayerQca(AB, identity_block(1, g))
    out = m.step(Superposition.basis(1, g, [((0,), 1), ((3,), 3)]))
    assert out.terms == Superposition.basis(1, g, [((0,), 2), ((3,), 3)]).terms
    q = Superposition.quiescent(1, g)
    assert m.step(q).terms == q.terms


def controlled_phase(n, sigma, rng):
    """Diagonal k with a phase on every pair of non-quiescent tracks: commutes with its shifts."""
    g = track_alphabet(sigma)
    cells = 2 ** n
    phases = np.ones(g.size ** cells, dtype=complex)
    theta = rng.uniform(0, 2 * np.pi, size=(g.size, g.size))
    theta[g.quiescent_index, :] = 0
    theta[:, g.quiescent_index] = 0
    for idx in range(g.size ** cells):
        letters = block_letters(idx, g.size, cells)
        phases[idx] = np.exp(1j * sum(theta[letters[i], letters[j]]
                                      for i in range(cells) for j in range(i + 1, cells)))
    return BlockUnitary(n, g, np.diag(phases))


@pytest.mark.parametrize("n", [1, 2])
def test_multilayer_layer_order_is_immaterial(n):
    rng = np.random.default_rng(n)
    g = track_alphabet(AB)
    m = MultilayerQca(AB, controlled_phase(n, AB, rng))
    psi = random_product_state(n, g, [(0,) * n, (1,) * n], rng)
    offsets = [tuple(int(b) for b in np.binary_repr(j, n)) for j in range(2 ** n)]
    a = m.step(psi, offsets)
    b = m.step(psi, offsets[::-1])
    assert a.distance(b) < 1e-10


def test_commutation_of_phases_and_generic_blocks():
    rng = np.random.default_rng(7)
    g = track_alphabet(AB)
    assert commutation_deviation(controlled_phase_block(1, g, rng))[0] < 1e-12
    assert commutation_deviation(controlled_phase_block(2, g, rng))[0] < 1e-12
    assert commutation_deviation(random_diagonal_block(1, g, rng))[0] < 1e-12
    assert commutation_deviation(identity_block(1, g))[0] == 0
    assert commutation_deviation(random_block_unitary(1, g, rng))[0] > 1e-3


# Dense oracle


def test_dense_matrix_of_identity():
    w = dense_global_matrix(Pqca(identity_block(1, ABC)), (0,), (2,), margin=1)
    assert w.matrix.shape == (81, 9)
    assert np.array_equal(w.matrix.T @ w.matrix, np.eye(9))
    assert np.array_equal(np.abs(w.matrix).sum(), 9.0)


def test_swap_pqca_dense_matrix_is_a_permutation():
    w = dense_global_matrix(Pqca(swap_block(AB)), (0,), (4,), margin=1)
    m = w.matrix
    assert m.shape == (2 ** 6, 2 ** 4)
    assert set(np.unique(m)) <= {0, 1}
    assert np.array_equal(m.sum(axis=0), np.ones(16))
    assert np.array_equal(m.T @ m, np.eye(16))


def test_dense_oracle_caps():
    a = Pqca(random_block_unitary(1, ABC, np.random.default_rng(0)))
    with pytest.raises(StateCapError):
        dense_global_matrix(a, (0,), (8,), cap=4096)


def test_support_escape_is_reported():
    a = Pqca(swap_block(AB))
    t = state_vector(one(1, (0,)), [(0,), (1,)]).reshape(1, 2, 2)
    with pytest.raises(SupportEscape):
        dense_round(a, t, [(0,), (1,)])


@pytest.mark.parametrize("n,alpha,shape", [(1, AB, (4,)), (1, ABC, (4,)), (2, AB, (2, 2))])
def test_sparse_matches_dense_on_window(n, alpha, shape):
    rng = np.random.default_rng(11)
    a = Bqca(random_block_unitary(n, alpha, rng), random_block_unitary(n, alpha, rng))
    w = dense_global_matrix(a, (0,) * n, shape, margin=1)
    for _ in range(3):
        psi = random_product_state(n, alpha, list(w.window), rng)
        got = state_vector(a.round(psi), w.region)
        assert np.abs(got - w.matrix @ w.vector(psi)).max() < 1e-10


def test_vector_state_round_trip():
    rng = np.random.default_rng(5)
    psi = random_product_state(1, ABC, box_sites((0,), (3,)), rng)
    sites = box_sites((0,), (3,))
    back = vector_state(state_vector(psi, sites), sites, 1, ABC)
    assert back.distance(psi) < 1e-15


def test_haar_unitary_is_unitary():
    u = haar_unitary(5, np.random.default_rng(0))
    assert np.abs(u.conj().T @ u - np.eye(5)).max() < 1e-12


def test_configuration_helper():
    assert make_configuration(1, [((0,), 1)], AB) == next(iter(one(1, (0,)).terms))
