#!/usr/bin/env python3
"""
Tests for environment-driven configuration
"""

import os
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pytest

from config import Config

ENV_KEYS = ['QCAP_SEED', 'QCAP_RESTARTS', 'QCAP_AUDIT_POINTS', 'QCAP_EIGENSOLVER',
            'QCAP_JOBS', 'QCAP_OUTPUT_FORMAT', 'LOG_LEVEL']


@pytest.fixture
def clean_env(monkeypatch):
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)
    return monkeypatch


def test_defaults(clean_env):
    config = Config()
    assert config.validate() == []
    assert config.to_dict() == {
        'seed': 42, 'restarts': 20, 'audit_points': 21, 'eigensolver': 'lapack',
        'jobs': 1, 'output_format': 'csv', 'log_level': 'INFO',
    }
    assert 'Eigensolver: lapack' in str(config)


def test_environment_overrides(clean_env):
    clean_env.setenv('QCAP_SEED', '7')
    clean_env.setenv('QCAP_EIGENSOLVER', 'JACOBI')
    clean_env.setenv('QCAP_OUTPUT_FORMAT', 'json')
    clean_env.setenv('LOG_LEVEL', 'debug')
    config = Config()
    assert config.validate() == []
    assert config.eigensolver == 'jacobi'
    assert config.log_level == 'DEBUG'
    settings = config.solver_settings()
    assert settings.seed == 7
    assert config.solver_settings(seed=11).seed == 11


def test_invalid_values(clean_env):
    clean_env.setenv('QCAP_SEED', 'abc')
    clean_env.setenv('QCAP_AUDIT_POINTS', '2')
    clean_env.setenv('QCAP_EIGENSOLVER', 'arpack')
    clean_env.setenv('QCAP_JOBS', '0')
    clean_env.setenv('QCAP_OUTPUT_FORMAT', 'xml')
    errors = Config().validate()
    assert len(errors) == 5
    assert "QCAP_SEED must be a non-negative integer" in errors


def test_cli_refuses_invalid_configuration(clean_env, tmp_path):
    from main import main
    clean_env.setenv('QCAP_EIGENSOLVER', 'arpack')
    out = tmp_path / 'x.csv'
    assert main(['dephasing-sweep', '--kappa-grid', '0:1:2', '--out', str(out)]) == 2
    assert not out.exists()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, '-v']))
