"""
Degradability certification.

The connecting map is reconstructed on transfer matrices with a
singular-value pseudo-inverse and then tested for complete positivity and
trace preservation through its Choi matrix. For PCDS channels the block
verdicts decide, and certified block maps are assembled into a global
degrading map acting block by block.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from channel_core import (
    KrausChannel, apply, canonicalize, choi_from_transfer, complementary,
    kraus_from_choi, transfer_matrix,
)
from errors import DimensionMismatch, NotTracePreserving
from matrix_core import random_density_matrix
from pcds_channels import BlockPartition, PCDSChannel, diagonal_block

logger = logging.getLogger(__name__)

SINGULAR_CUTOFF = 1e-10
ACCEPT_RESIDUAL = 1e-8
REJECT_RESIDUAL = 1e-6
CHOI_EIG_TOL = 1e-9
MAP_TP_TOL = 1e-8
CERTIFICATE_CHECK_TOL = 1e-8
CERTIFICATE_CHECK_STATES = 20


class DegradabilityStatus(Enum):
    DEGRADABLE = 'Degradable'
    NOT_DEGRADABLE = 'NotDegradable'
    UNDETERMINED = 'Undetermined'


@dataclass
class DegradabilityVerdict:
    """Outcome of a connecting-map reconstruction"""
    status: DegradabilityStatus
    residual: float
    min_choi_eig: float
    certificate: Optional[KrausChannel] = None
    kernel_dim: int = 0
    direction: str = 'degrading'

    @property
    def is_degradable(self) -> bool:
        return self.status == DegradabilityStatus.DEGRADABLE

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status.value,
            'residual': self.residual,
            'min_choi_eig': self.min_choi_eig,
            'kernel_dim': self.kernel_dim,
            'direction': self.direction,
        }


def _connecting_map(source: np.ndarray, target: np.ndarray, dim_mid: int, dim_target: int,
                    direction: str) -> DegradabilityVerdict:
    """
    Solve T_L source = target for a map L: C^dim_mid -> C^dim_target and classify it.

    NotDegradable covers residual > 1e-6 and also a unique (kernel_dim == 0)
    solution that is not CPTP, whose residual may be small.
    """
    singular = np.linalg.svd(source, compute_uv=False)
    largest = singular[0] if singular.size else 0.0
    rank = int(np.sum(singular > SINGULAR_CUTOFF * largest)) if largest > 0 else 0
    kernel_dim = dim_mid * dim_mid - rank

    T_map = target @ np.linalg.pinv(source, rcond=SINGULAR_CUTOFF)
    residual = float(np.linalg.norm(T_map @ source - target))
    candidate = choi_from_transfer(T_map, dim_mid, dim_target)
    min_eig = candidate.min_eigenvalue()
    tp_residual = candidate.tp_residual()
    valid_map = min_eig >= -CHOI_EIG_TOL and tp_residual <= MAP_TP_TOL

    if residual <= ACCEPT_RESIDUAL and valid_map:
        status = DegradabilityStatus.DEGRADABLE
        certificate = kraus_from_choi(candidate)
    elif residual > REJECT_RESIDUAL or (kernel_dim == 0 and residual <= ACCEPT_RESIDUAL):
        # a unique linear solution that is not a channel rules the channel out
        status = DegradabilityStatus.NOT_DEGRADABLE
        certificate = None
    else:
        status = DegradabilityStatus.UNDETERMINED
        certificate = None

    logger.debug(f"{direction} map: status={status.value} residual={residual:.3e} "
                 f"min_eig={min_eig:.3e} tp={tp_residual:.3e} kernel={kernel_dim}")
    return DegradabilityVerdict(status, residual, min_eig, certificate, kernel_dim, direction)


def find_degrading_map(ch: KrausChannel) -> DegradabilityVerdict:
    """Search Lambda with complementary(ch) = Lambda o ch"""
    ch = canonicalize(ch)
    env = complementary(ch)
    return _connecting_map(transfer_matrix(ch), transfer_matrix(env), ch.dim_out, env.dim_out, 'degrading')


def find_antidegrading_map(ch: KrausChannel) -> DegradabilityVerdict:
    """Search Lambda with ch = Lambda o complementary(ch)"""
    ch = canonicalize(ch)
    env = complementary(ch)
    return _connecting_map(transfer_matrix(env), transfer_matrix(ch), env.dim_out, ch.dim_out, 'antidegrading')


def is_antidegradable(ch: KrausChannel) -> bool:
    return find_antidegrading_map(ch).is_degradable


def direct_sum_degrading(partition: BlockPartition, block_maps: Sequence[KrausChannel]) -> KrausChannel:
    """
    Lambda[Theta] = sum_l Lambda_l[Theta_ll] as the union of block Kraus sets.

    Each block map takes block l to a common environment and must be trace
    preserving on its subspace.
    """
    if len(block_maps) != partition.n:
        raise DimensionMismatch(f"Expected {partition.n} block maps, got {len(block_maps)}")
    env_dim = block_maps[0].dim_out
    ops = []
    for index, block_map in enumerate(block_maps):
        if block_map.dim_in != partition.dims[index] or block_map.dim_out != env_dim:
            raise DimensionMismatch(
                f"Block map {index} acts {block_map.dim_in} -> {block_map.dim_out}, "
                f"expected {partition.dims[index]} -> {env_dim}")
        sl = partition.block_slice(index)
        for K in block_map.kraus:
            big = np.zeros((env_dim, partition.total), dtype=complex)
            big[:, sl] = K
            ops.append(big)
    assembled = KrausChannel(partition.total, env_dim, tuple(ops))

    gram = sum(K.conj().T @ K for K in assembled.kraus)
    residual = float(np.max(np.abs(gram - np.eye(partition.total))))
    if residual > MAP_TP_TOL:
        raise NotTracePreserving(f"Block normalizations miss the identity by {residual:.3e}")
    return assembled


def _lift_to_environment(block_map: KrausChannel, kept: List[int], env_dim: int) -> KrausChannel:
    """Re-index a block certificate from its pruned environment into the shared one"""
    ops = []
    for K in block_map.kraus:
        big = np.zeros((env_dim, block_map.dim_in), dtype=complex)
        big[kept, :] = K
        ops.append(big)
    return KrausChannel(block_map.dim_in, env_dim, tuple(ops))


def _certificate_residual(ch: KrausChannel, certificate: KrausChannel, rng: np.random.Generator,
                          states: int = CERTIFICATE_CHECK_STATES) -> float:
    env = complementary(ch)
    worst = 0.0
    for _ in range(states):
        rho = random_density_matrix(ch.dim_in, rng).mat
        deviation = np.linalg.norm(apply(certificate, apply(ch, rho)) - apply(env, rho))
        worst = max(worst, float(deviation))
    return worst


def pcds_degradability(pc: PCDSChannel,
                       oracle: Callable[[KrausChannel], DegradabilityVerdict] = find_degrading_map,
                       seed: int = 0) -> DegradabilityVerdict:
    """
    Degradable iff every diagonal block is; certified blocks are assembled
    into a global degrading map and checked on random inputs.
    """
    global_channel = canonicalize(pc.channel)
    keep_global = [j for j, K in enumerate(pc.channel.kraus) if np.linalg.norm(K) >= 1e-12]
    env_dim = len(keep_global)

    verdicts = []
    for index in range(pc.n_blocks):
        verdict = oracle(diagonal_block(pc, index))
        logger.debug(f"Block {index} verdict: {verdict.status.value}")
        verdicts.append(verdict)

    residual = max(v.residual for v in verdicts)
    min_eig = min(v.min_choi_eig for v in verdicts)
    kernel_dim = sum(v.kernel_dim for v in verdicts)

    if any(v.status == DegradabilityStatus.NOT_DEGRADABLE for v in verdicts):
        return DegradabilityVerdict(DegradabilityStatus.NOT_DEGRADABLE, residual, min_eig, None, kernel_dim)
    if any(v.status == DegradabilityStatus.UNDETERMINED for v in verdicts):
        return DegradabilityVerdict(DegradabilityStatus.UNDETERMINED, residual, min_eig, None, kernel_dim)

    lifted = []
    for index, verdict in enumerate(verdicts):
        block_ops = pc.block_kraus[index]
        kept = [keep_global.index(j) for j in keep_global if np.linalg.norm(block_ops[j]) >= 1e-12]
        lifted.append(_lift_to_environment(verdict.certificate, kept, env_dim))
    certificate = direct_sum_degrading(pc.partition, lifted)

    check = _certificate_residual(global_channel, certificate, np.random.default_rng(seed))
    if check > CERTIFICATE_CHECK_TOL:
        logger.warning(f"Assembled degrading map misses the complementary channel by {check:.3e}")
        return DegradabilityVerdict(DegradabilityStatus.UNDETERMINED, max(residual, check), min_eig, None, kernel_dim)
    return DegradabilityVerdict(DegradabilityStatus.DEGRADABLE, max(residual, check), min_eig,
                                certificate, kernel_dim)
