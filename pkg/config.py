import os
from typing import Any, Dict, List

from dotenv import load_dotenv

from matrix_core import EIGENSOLVERS
from optimizers import SolverSettings

# Load environment variables from .env file
load_dotenv()

OUTPUT_FORMATS = ('csv', 'json')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def _int_env(name: str, default: str) -> int:
    value = os.getenv(name, default)
    try:
        return int(value)
    except ValueError:
        return -1


class Config:
    """Configuration management for the capacity toolkit"""

    def __init__(self):
        # Optimizer configuration
        self.seed = _int_env('QCAP_SEED', '42')
        self.restarts = _int_env('QCAP_RESTARTS', '20')
        self.audit_points = _int_env('QCAP_AUDIT_POINTS', '21')
        self.eigensolver = os.getenv('QCAP_EIGENSOLVER', 'lapack').lower()

        # Sweep configuration
        self.jobs = _int_env('QCAP_JOBS', '1')
        self.output_format = os.getenv('QCAP_OUTPUT_FORMAT', 'csv').lower()

        # Application configuration
        self.log_level = os.getenv('LOG_LEVEL', 'INFO').upper()

    def validate(self) -> List[str]:
        """Validate configuration and return any errors"""
        errors = []

        if self.seed < 0:
            errors.append("QCAP_SEED must be a non-negative integer")

        if self.restarts < 0:
            errors.append("QCAP_RESTARTS must be a non-negative integer")

        if self.audit_points < 3:
            errors.append("QCAP_AUDIT_POINTS must be an integer of at least 3")

        if self.eigensolver not in EIGENSOLVERS:
            errors.append(f"QCAP_EIGENSOLVER must be one of {', '.join(EIGENSOLVERS)}")

        if self.jobs < 1:
            errors.append("QCAP_JOBS must be a positive integer")

        if self.output_format not in OUTPUT_FORMATS:
            errors.append(f"QCAP_OUTPUT_FORMAT must be one of {', '.join(OUTPUT_FORMATS)}")

        if self.log_level not in LOG_LEVELS:
            errors.append(f"LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")

        return errors

    def solver_settings(self, seed: int = None) -> SolverSettings:
        return SolverSettings(seed=self.seed if seed is None else seed,
                              restarts=self.restarts, audit_points=self.audit_points)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'restarts': self.restarts,
            'audit_points': self.audit_points,
            'eigensolver': self.eigensolver,
            'jobs': self.jobs,
            'output_format': self.output_format,
            'log_level': self.log_level,
        }

    def __str__(self):
        """String representation of configuration"""
        return f"""Configuration:
  Seed: {self.seed}
  Restarts: {self.restarts}
  Audit Points: {self.audit_points}
  Eigensolver: {self.eigensolver}
  Jobs: {self.jobs}
  Output Format: {self.output_format}
  Log Level: {self.log_level}
"""
