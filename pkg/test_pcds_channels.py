#!/usr/bin/env python3
"""
Tests for block partitions, PCDS detection and the channel factories
"""

import os
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np
import pytest

from channel_core import (
    KrausChannel, apply, canonicalize, channels_equal_in_action, complementary,
    compose, convex_combination, identity_channel, unitary_channel, validate_cpt,
)
from errors import (
    DimensionMismatch, DomainError, IndexOutOfRange, NonUnique, NotPCDS,
    NotTracePreserving, RateOverflow,
)
from matrix_core import random_density_matrix, von_neumann_entropy
from pcds_channels import (
    BlockPartition, canonical_pcds, composition_gamma, decay_factorization,
    diagonal_block, fixed_point, from_blocks, from_channel, incoherent_part,
    is_diagonal_covariant, is_pcds, make_adc, make_combined, make_dephasing, make_mad,
    make_single_decay, random_pcds,
)


def direct_sum_state(p, tau_a, tau_b):
    d_a = tau_a.shape[0]
    rho = np.zeros((d_a + tau_b.shape[0],) * 2, dtype=complex)
    rho[:d_a, :d_a] = p * tau_a
    rho[d_a:, d_a:] = (1.0 - p) * tau_b
    return rho


def test_partition_geometry():
    partition = BlockPartition((2, 1, 3))
    assert partition.n == 3
    assert partition.total == 6
    assert partition.offsets == (0, 2, 3)
    assert partition.block_slice(2) == slice(3, 6)
    np.testing.assert_allclose(np.trace(partition.projector(0)), 2.0)
    assert partition.block_mask().sum() == 4 + 1 + 9
    with pytest.raises(IndexOutOfRange):
        partition.block_slice(3)


def test_partition_rejects_bad_dims():
    with pytest.raises(DomainError):
        BlockPartition((3,))
    with pytest.raises(DomainError):
        BlockPartition((2, 0))


def test_dephasing_is_pcds_and_scales_coherences():
    kappa = 0.4 * np.exp(0.3j)
    pc = make_dephasing(2, 3, kappa)
    assert is_pcds(pc.channel, pc.partition)[0]
    assert validate_cpt(pc.channel).is_tp

    rho = random_density_matrix(5, np.random.default_rng(0)).mat
    out = apply(pc.channel, rho)
    np.testing.assert_allclose(out[:2, :2], rho[:2, :2], atol=1e-12)
    np.testing.assert_allclose(out[2:, 2:], rho[2:, 2:], atol=1e-12)
    np.testing.assert_allclose(out[:2, 2:], kappa * rho[:2, 2:], atol=1e-12)


def test_dephasing_rejects_large_kappa():
    with pytest.raises(DomainError):
        make_dephasing(1, 1, 1.2)


def test_mad_kraus_set():
    ch = make_mad(3, {(1, 0): 0.3, (2, 0): 0.2, (2, 1): 0.5})
    assert ch.num_kraus == 4
    assert validate_cpt(ch).is_tp
    out = apply(ch, np.diag([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(np.diag(out).real, [0.2, 0.5, 0.3], atol=1e-12)


def test_mad_rate_errors():
    with pytest.raises(RateOverflow):
        make_mad(3, {(2, 0): 0.6, (2, 1): 0.6})
    with pytest.raises(DomainError):
        make_mad(3, {(0, 1): 0.1})
    with pytest.raises(DomainError):
        make_mad(3, {(1, 0): 1.5})


def test_combined_is_dephasing_after_decay():
    rng = np.random.default_rng(1)
    for d_c in (3, 4):
        for gamma in (0.0, 0.3, 0.8):
            kappa = float(rng.uniform()) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
            expected = compose(make_dephasing(2, d_c - 2, kappa).channel, make_single_decay(d_c, gamma).channel)
            assert channels_equal_in_action(make_combined(d_c, gamma, kappa).channel, expected)


def test_decay_factorization():
    for kappa in (1.0, 0.6):
        reference, post = decay_factorization(4, 0.8, kappa)
        assert channels_equal_in_action(compose(post, reference.channel), make_combined(4, 0.8, kappa).channel)
    with pytest.raises(DomainError):
        decay_factorization(3, 0.3)


def test_composition_gamma_matches_channels():
    direct = make_single_decay(3, composition_gamma(0.3, 0.5)).channel
    composed = compose(make_single_decay(3, 0.3).channel, make_single_decay(3, 0.5).channel)
    assert channels_equal_in_action(composed, direct)


def test_random_pcds_channels_are_pcds():
    rng = np.random.default_rng(42)
    layouts = [(2, 1), (2, 2), (1, 2, 2), (2, 3), (2, 2, 1)]
    for k in range(50):
        partition = BlockPartition(layouts[k % len(layouts)])
        pc = random_pcds(partition, rng)
        ok, largest = is_pcds(pc.channel, partition)
        assert ok and largest <= 1e-10
        assert validate_cpt(pc.channel).is_tp


def test_perturbed_channel_is_not_pcds():
    rng = np.random.default_rng(3)
    pc = random_pcds(BlockPartition((2, 2)), rng)
    ops = [K.copy() for K in pc.channel.kraus]
    ops[0][0, 3] += 1e-3
    perturbed = KrausChannel.from_operators(ops)
    ok, largest = is_pcds(perturbed, pc.partition)
    assert not ok
    assert largest == pytest.approx(1e-3, rel=1e-6)
    with pytest.raises(NotPCDS):
        from_channel(perturbed, pc.partition)


def test_from_channel_recovers_blocks():
    pc = make_combined(4, 0.3, 0.5)
    rebuilt = from_channel(pc.channel, pc.partition)
    for index in range(2):
        for K, L in zip(rebuilt.block_kraus[index], pc.block_kraus[index]):
            np.testing.assert_allclose(K, L, atol=1e-12)
    with pytest.raises(DimensionMismatch):
        is_pcds(pc.channel, BlockPartition((2, 1)))


def test_from_blocks_checks_normalization():
    with pytest.raises(NotTracePreserving):
        from_blocks(BlockPartition((1, 1)), [[0.5], [1.0]])
    with pytest.raises(DimensionMismatch):
        from_blocks(BlockPartition((2, 1)), [[np.eye(3)], [1.0]])


def test_diagonal_block_keeps_shared_index():
    pc = make_single_decay(4, 0.3)
    block_b = diagonal_block(pc, 1)
    assert block_b.num_kraus == 2
    np.testing.assert_allclose(block_b.kraus[1], np.zeros((2, 2)))
    with pytest.raises(IndexOutOfRange):
        diagonal_block(pc, 2)


def test_canonical_pcds_drops_dead_indices():
    pc = canonical_pcds(make_single_decay(3, 0.0))
    assert pc.num_kraus == 1
    assert channels_equal_in_action(pc.channel, identity_channel(3))


def test_fixed_point_of_amplitude_damping():
    state, pure = fixed_point(make_adc(0.3))
    assert pure
    np.testing.assert_allclose(state.mat, np.diag([1.0, 0.0]), atol=1e-9)


def test_fixed_point_not_unique_for_identity():
    with pytest.raises(NonUnique) as info:
        fixed_point(identity_channel(2))
    assert info.value.dimension == 4


def test_diagonal_covariance():
    assert is_diagonal_covariant(make_adc(0.3))
    assert is_diagonal_covariant(make_combined(3, 0.2, 0.7j).channel)
    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    assert not is_diagonal_covariant(unitary_channel(hadamard))


def test_combined_qutrit_kraus_entries():
    gamma, kappa = 0.4, 0.6 * np.exp(0.5j)
    ops = canonicalize(make_combined(3, gamma, kappa).channel).kraus
    expected = [
        np.diag([1.0, np.sqrt(1.0 - gamma), np.conj(kappa)]),
        np.array([[0.0, np.sqrt(gamma), 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        np.diag([0.0, 0.0, np.sqrt(1.0 - abs(kappa) ** 2)]),
    ]
    assert len(ops) == 3
    for K, E in zip(ops, expected):
        np.testing.assert_allclose(K, E, atol=1e-12)


def test_combined_qutrit_output_matrix():
    gamma, kappa = 0.4, 0.6 * np.exp(-1.1j)
    ch = make_combined(3, gamma, kappa).channel
    rng = np.random.default_rng(13)
    s = np.sqrt(1.0 - gamma)
    for _ in range(10):
        r = random_density_matrix(3, rng).mat
        expected = np.array([
            [r[0, 0] + gamma * r[1, 1], s * r[0, 1], kappa * r[0, 2]],
            [s * r[1, 0], (1.0 - gamma) * r[1, 1], kappa * s * r[1, 2]],
            [np.conj(kappa) * r[2, 0], np.conj(kappa) * s * r[2, 1], r[2, 2]],
        ])
        np.testing.assert_allclose(apply(ch, r), expected, atol=1e-10)


def test_combined_scales_block_coherence():
    rho = np.array([[0.5, 0.0, 0.1], [0.0, 0.2, 0.0], [0.1, 0.0, 0.3]])
    out = apply(make_combined(3, 0.4, 0.6).channel, rho)
    assert out[0, 2] == pytest.approx(0.06, abs=1e-12)
    assert out[2, 0] == pytest.approx(0.06, abs=1e-12)


def test_dephasing_commutes_with_decay():
    for d_c in (3, 4, 5):
        for gamma, kappa in ((0.3, 0.5), (0.8, 0.2 * np.exp(0.7j)), (1.0, 0.9j)):
            dephasing = make_dephasing(2, d_c - 2, kappa).channel
            decay = make_single_decay(d_c, gamma).channel
            assert channels_equal_in_action(compose(dephasing, decay), compose(decay, dephasing), tol=1e-10)


def test_mad_with_disjoint_decays_is_pcds():
    ch = make_mad(4, {(1, 0): 0.3, (3, 2): 0.6})
    partition = BlockPartition((2, 2))
    assert is_pcds(ch, partition)[0]
    pc = from_channel(ch, partition)
    assert channels_equal_in_action(diagonal_block(pc, 0), make_adc(0.3))
    assert channels_equal_in_action(diagonal_block(pc, 1), make_adc(0.6))
    # a decay across the two level pairs mixes the blocks
    assert not is_pcds(make_mad(4, {(2, 0): 0.3}), partition)[0]


def test_off_block_entry_leaks_population():
    partition = BlockPartition((2, 1))
    P_A, P_B = partition.projector(0), partition.projector(1)
    for eps in (1e-6, 1e-3, 0.2):
        ops = [K.copy() for K in make_combined(3, 0.4, 0.6).channel.kraus]
        ops[0][2, 0] += eps
        perturbed = KrausChannel.from_operators(ops)
        assert not is_pcds(perturbed, partition)[0]
        leak = np.linalg.norm(P_B @ apply(perturbed, P_A) @ P_B)
        assert leak >= eps ** 2 - 1e-10


def test_pcds_closed_under_mixing_and_composition():
    rng = np.random.default_rng(21)
    for dims in ((2, 2), (2, 1, 2), (1, 2)):
        partition = BlockPartition(dims)
        first = random_pcds(partition, rng).channel
        second = random_pcds(partition, rng).channel
        mixed = convex_combination(float(rng.uniform()), first, second)
        assert is_pcds(mixed, partition)[0]
        assert validate_cpt(mixed).is_tp
        assert is_pcds(compose(first, second), partition)[0]
        assert is_pcds(compose(second, first), partition)[0]


def test_rebuild_from_diagonal_blocks():
    rng = np.random.default_rng(8)
    channels = [make_combined(4, 0.3, 0.5j), make_dephasing(1, 3, 0.7)]
    channels += [random_pcds(BlockPartition(dims), rng) for dims in ((2, 2), (1, 2, 2), (2, 3))]
    for pc in channels:
        blocks = [list(diagonal_block(pc, index).kraus) for index in range(pc.n_blocks)]
        rebuilt = from_blocks(pc.partition, blocks)
        assert is_pcds(rebuilt.channel, pc.partition)[0]
        assert channels_equal_in_action(rebuilt.channel, pc.channel, tol=1e-10)


def test_environment_output_adds_over_blocks():
    rng = np.random.default_rng(12)
    for pc in (make_combined(4, 0.3, 0.6), make_dephasing(2, 1, 0.4j), random_pcds(BlockPartition((2, 2)), rng)):
        env = complementary(pc.channel)
        env_a = complementary(diagonal_block(pc, 0))
        env_b = complementary(diagonal_block(pc, 1))
        d_a, d_b = pc.partition.dims
        for _ in range(5):
            p = float(rng.uniform())
            tau_a = random_density_matrix(d_a, rng).mat
            tau_b = random_density_matrix(d_b, rng).mat
            mixture = p * apply(env_a, tau_a) + (1.0 - p) * apply(env_b, tau_b)
            out = apply(env, direct_sum_state(p, tau_a, tau_b))
            np.testing.assert_allclose(out, mixture, atol=1e-10)
            assert von_neumann_entropy(out) == pytest.approx(von_neumann_entropy(mixture), abs=1e-8)


def test_incoherent_part_keeps_blocks_and_drops_coherence():
    pc = make_combined(3, 0.3, 0.6)
    incoherent = incoherent_part(pc)
    assert is_pcds(incoherent.channel, pc.partition)[0]
    assert validate_cpt(incoherent.channel).is_tp
    for index in range(pc.n_blocks):
        assert channels_equal_in_action(diagonal_block(incoherent, index), diagonal_block(pc, index))
    # each global Kraus index lives in one block only
    for j in range(incoherent.num_kraus):
        live = [np.linalg.norm(ops[j]) > 0.0 for ops in incoherent.block_kraus]
        assert sum(live) == 1

    rho = np.array([[0.5, 0.0, 0.1], [0.0, 0.2, 0.05], [0.1, 0.05, 0.3]])
    out = apply(incoherent.channel, rho)
    assert out[0, 2] == pytest.approx(0.0, abs=1e-12)
    assert out[1, 2] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(out[:2, :2], apply(pc.channel, rho)[:2, :2], atol=1e-12)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
