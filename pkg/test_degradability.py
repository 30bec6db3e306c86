#!/usr/bin/env python3
"""
Tests for degrading-map reconstruction and the PCDS block criterion
"""

import os
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np
import pytest

from channel_core import (
    KrausChannel, apply, canonicalize, complementary, compose, identity_channel,
    pad_kraus, unitary_channel,
)
from degradability import (
    DegradabilityStatus, direct_sum_degrading, find_antidegrading_map,
    find_degrading_map, is_antidegradable, pcds_degradability,
)
from errors import DimensionMismatch, NotTracePreserving
from matrix_core import random_density_matrix, random_unitary
from pcds_channels import (
    BlockPartition, from_blocks, make_adc, make_combined, make_dephasing, make_single_decay,
    random_pcds,
)


def certificate_residual(ch, certificate, rng, states=20):
    ch = canonicalize(ch)
    env = complementary(ch)
    worst = 0.0
    for _ in range(states):
        rho = random_density_matrix(ch.dim_in, rng).mat
        worst = max(worst, float(np.linalg.norm(apply(certificate, apply(ch, rho)) - apply(env, rho))))
    return worst


@pytest.mark.parametrize('gamma', [0.1, 0.2, 0.3, 0.4, 0.5])
def test_weak_damping_is_degradable(gamma):
    ch = make_adc(gamma)
    verdict = find_degrading_map(ch)
    assert verdict.status == DegradabilityStatus.DEGRADABLE
    assert verdict.kernel_dim == 0
    assert certificate_residual(ch, verdict.certificate, np.random.default_rng(0)) <= 1e-7


@pytest.mark.parametrize('gamma', [0.6, 0.7, 0.8, 0.9])
def test_strong_damping_is_antidegradable(gamma):
    ch = make_adc(gamma)
    assert find_degrading_map(ch).status == DegradabilityStatus.NOT_DEGRADABLE
    assert is_antidegradable(ch)


def test_identity_is_degradable_not_antidegradable():
    verdict = find_degrading_map(identity_channel(2))
    assert verdict.is_degradable
    assert verdict.certificate.dim_out == 1
    assert not find_antidegrading_map(identity_channel(2)).is_degradable


def test_rotated_damping_keeps_verdict():
    U = random_unitary(2, np.random.default_rng(9))
    rotated = compose(unitary_channel(U), make_adc(0.25))
    verdict = find_degrading_map(rotated)
    assert verdict.is_degradable
    assert certificate_residual(rotated, verdict.certificate, np.random.default_rng(1)) <= 1e-7


def test_verdict_to_dict():
    data = find_degrading_map(make_adc(0.3)).to_dict()
    assert data['status'] == 'Degradable'
    assert data['direction'] == 'degrading'
    assert set(data) == {'status', 'residual', 'min_choi_eig', 'kernel_dim', 'direction'}


def test_direct_sum_degrading_checks_shapes():
    partition = BlockPartition((2, 1))
    first = find_degrading_map(make_adc(0.3)).certificate
    with pytest.raises(DimensionMismatch):
        direct_sum_degrading(partition, [first])
    with pytest.raises(DimensionMismatch):
        direct_sum_degrading(partition, [first, identity_channel(2)])


def test_direct_sum_degrading_checks_normalization():
    partition = BlockPartition((1, 1))
    trace = identity_channel(1)
    broken = KrausChannel(1, 1, (0.5 * np.eye(1),))
    assert direct_sum_degrading(partition, [trace, trace]).num_kraus == 2
    with pytest.raises(NotTracePreserving):
        direct_sum_degrading(partition, [trace, broken])


def test_pcds_factories():
    assert pcds_degradability(make_dephasing(2, 2, 0.5)).is_degradable
    assert pcds_degradability(make_combined(3, 0.3, 0.6)).is_degradable
    assert pcds_degradability(make_single_decay(4, 0.5)).is_degradable
    assert pcds_degradability(make_single_decay(3, 0.7)).status == DegradabilityStatus.NOT_DEGRADABLE


def test_pcds_certificate_degrades_global_channel():
    pc = make_combined(4, 0.2, 0.8 * np.exp(0.4j))
    verdict = pcds_degradability(pc)
    assert verdict.is_degradable
    assert certificate_residual(pc.channel, verdict.certificate, np.random.default_rng(2)) <= 1e-7


def test_block_criterion_agrees_with_direct_search():
    rng = np.random.default_rng(2024)
    layouts = [(2, 1), (2, 2), (1, 2, 2), (2, 3), (2, 2, 2)]
    for k in range(20):
        pc = random_pcds(BlockPartition(layouts[k % len(layouts)]), rng)
        block_verdict = pcds_degradability(pc, seed=k)
        direct_verdict = find_degrading_map(pc.channel)
        assert block_verdict.status == direct_verdict.status == DegradabilityStatus.DEGRADABLE
        assert certificate_residual(pc.channel, block_verdict.certificate, rng, states=100) <= 1e-7


def factory_channels():
    for d_c in (3, 4, 5, 6):
        for gamma in (0.2, 0.5, 0.7, 0.9):
            yield f"decay-{d_c}-{gamma}", make_single_decay(d_c, gamma)
            yield f"combined-{d_c}-{gamma}", make_combined(d_c, gamma, 0.6)
    for d_a, d_b in ((1, 1), (2, 2), (1, 4), (3, 3)):
        yield f"dephasing-{d_a}-{d_b}", make_dephasing(d_a, d_b, 0.5)


def test_block_criterion_agrees_on_factory_channels():
    for name, pc in factory_channels():
        block_verdict = pcds_degradability(pc, seed=3)
        direct_verdict = find_degrading_map(pc.channel)
        assert block_verdict.is_degradable == direct_verdict.is_degradable, name
        if block_verdict.is_degradable:
            assert certificate_residual(pc.channel, block_verdict.certificate, np.random.default_rng(4)) <= 1e-7


def test_unique_map_that_is_not_a_channel():
    # the inverse-composed map exists exactly but has a negative Choi eigenvalue
    verdict = find_degrading_map(make_adc(0.7))
    assert verdict.status == DegradabilityStatus.NOT_DEGRADABLE
    assert verdict.kernel_dim == 0
    assert verdict.residual <= 1e-8
    assert verdict.min_choi_eig < -1e-9


def test_verdict_ignores_zero_kraus_operators():
    for ch in (make_adc(0.3), make_adc(0.7), make_combined(3, 0.3, 0.6).channel, identity_channel(2)):
        padded = pad_kraus(ch, ch.num_kraus + 2)
        assert find_degrading_map(padded).status == find_degrading_map(ch).status
        assert find_antidegrading_map(padded).status == find_antidegrading_map(ch).status

    pc = make_single_decay(4, 0.3)
    rows = [list(ops) + [np.zeros((d, d))] * 2 for ops, d in zip(pc.block_kraus, pc.partition.dims)]
    padded_pc = from_blocks(pc.partition, rows)
    assert padded_pc.num_kraus == pc.num_kraus + 2
    assert pcds_degradability(padded_pc).status == pcds_degradability(pc).status == DegradabilityStatus.DEGRADABLE


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
