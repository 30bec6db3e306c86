#!/usr/bin/env python3
"""
Tests for Kraus channels and their Choi, transfer and complementary forms
"""

import os
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np
import pytest

from channel_core import (
    KrausChannel, apply, canonicalize, channels_equal_in_action, choi,
    choi_from_transfer, complementary, compose, convex_combination,
    identity_channel, kraus_from_choi, kraus_normalization, pad_kraus,
    transfer_matrix, unitary_channel, unvec, validate_cpt, vec,
)
from errors import DimensionMismatch, DomainError
from matrix_core import random_density_matrix, random_unitary, von_neumann_entropy
from pcds_channels import composition_gamma, make_adc


def random_channel(d_in, d_out, n_kraus, rng):
    """Channel from a random isometry split into Kraus operators"""
    U = random_unitary(d_out * n_kraus, rng)
    V = U[:, :d_in]
    return KrausChannel.from_operators(V[j * d_out:(j + 1) * d_out] for j in range(n_kraus))


def test_construction_checks_shapes():
    with pytest.raises(DimensionMismatch):
        KrausChannel(2, 2, (np.eye(3),))
    with pytest.raises(DimensionMismatch):
        KrausChannel(2, 2, ())
    ch = KrausChannel(2, 3, (np.ones((3, 2)),))
    assert ch.num_kraus == 1
    assert not ch.kraus[0].flags.writeable


def test_validate_cpt():
    assert validate_cpt(make_adc(0.3)).is_tp
    report = validate_cpt(KrausChannel(2, 2, (2.0 * np.eye(2),)))
    assert not report.is_tp
    assert report.residual == pytest.approx(3.0)
    assert report.to_dict()['is_cp'] is True


def test_random_channel_is_trace_preserving():
    rng = np.random.default_rng(1)
    ch = random_channel(3, 2, 4, rng)
    np.testing.assert_allclose(kraus_normalization(ch), np.eye(3), atol=1e-10)


def test_apply_amplitude_damping():
    gamma = 0.3
    out = apply(make_adc(gamma), np.diag([0.0, 1.0]))
    np.testing.assert_allclose(out, np.diag([gamma, 1.0 - gamma]), atol=1e-12)
    with pytest.raises(DimensionMismatch):
        apply(make_adc(gamma), np.eye(3) / 3)


def test_transfer_matrix_acts_like_channel():
    rng = np.random.default_rng(4)
    ch = random_channel(3, 2, 3, rng)
    rho = random_density_matrix(3, rng).mat
    np.testing.assert_allclose(unvec(transfer_matrix(ch) @ vec(rho), 2), apply(ch, rho), atol=1e-12)


def test_choi_from_transfer_matches_choi():
    rng = np.random.default_rng(5)
    ch = random_channel(2, 3, 2, rng)
    expected = choi(ch)
    reshuffled = choi_from_transfer(transfer_matrix(ch), 2, 3)
    np.testing.assert_allclose(reshuffled.mat, expected.mat, atol=1e-12)
    assert expected.tp_residual() <= 1e-10
    assert expected.min_eigenvalue() >= -1e-12


def test_kraus_from_choi_reproduces_action():
    rng = np.random.default_rng(6)
    ch = random_channel(3, 3, 2, rng)
    rebuilt = kraus_from_choi(choi(ch))
    assert rebuilt.num_kraus <= 2
    assert channels_equal_in_action(rebuilt, ch)


def test_complementary_of_identity_is_trace():
    rng = np.random.default_rng(7)
    rho = random_density_matrix(3, rng).mat
    env = apply(complementary(identity_channel(3)), rho)
    np.testing.assert_allclose(env, [[1.0]], atol=1e-12)


def test_complementary_spectrum_on_pure_inputs():
    rng = np.random.default_rng(8)
    ch = random_channel(2, 3, 2, rng)
    psi = random_density_matrix(2, rng, rank=1).mat
    out = np.linalg.eigvalsh(apply(ch, psi))
    env = np.linalg.eigvalsh(apply(complementary(ch), psi))
    np.testing.assert_allclose(np.sort(out)[-2:], np.sort(env), atol=1e-10)
    assert out[0] == pytest.approx(0.0, abs=1e-10)


def test_amplitude_damping_composition():
    combined = compose(make_adc(0.2), make_adc(0.4))
    assert combined.num_kraus == 4
    assert channels_equal_in_action(combined, make_adc(composition_gamma(0.2, 0.4)))
    with pytest.raises(DimensionMismatch):
        compose(make_adc(0.2), identity_channel(3))


def test_canonicalize_and_pad():
    ch = KrausChannel(2, 2, (np.eye(2), np.zeros((2, 2))))
    pruned = canonicalize(ch)
    assert pruned.num_kraus == 1
    assert pad_kraus(pruned, 3).num_kraus == 3
    assert channels_equal_in_action(pad_kraus(pruned, 3), ch)


def test_convex_combination():
    H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    mixed = convex_combination(0.25, identity_channel(2), unitary_channel(H))
    assert validate_cpt(mixed).is_tp
    rho = np.diag([1.0, 0.0])
    expected = 0.25 * rho + 0.75 * H @ rho @ H
    np.testing.assert_allclose(apply(mixed, rho), expected, atol=1e-12)
    with pytest.raises(DomainError):
        convex_combination(1.5, identity_channel(2), identity_channel(2))


def test_compose_is_associative():
    rng = np.random.default_rng(17)
    for _ in range(5):
        a = random_channel(3, 2, 2, rng)
        b = random_channel(2, 3, 3, rng)
        c = random_channel(2, 2, 2, rng)
        left = compose(compose(a, b), c)
        right = compose(a, compose(b, c))
        assert channels_equal_in_action(left, right, tol=1e-10)


def test_environment_entropy_ignores_zero_kraus():
    rng = np.random.default_rng(19)
    for ch in (make_adc(0.3), random_channel(3, 3, 2, rng)):
        padded = pad_kraus(ch, ch.num_kraus + 2)
        for _ in range(5):
            rho = random_density_matrix(ch.dim_in, rng).mat
            assert von_neumann_entropy(apply(complementary(padded), rho)) == pytest.approx(
                von_neumann_entropy(apply(complementary(ch), rho)), abs=1e-8)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
