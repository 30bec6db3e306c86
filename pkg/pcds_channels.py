"""
Partially coherent direct-sum (PCDS) channels.

The input space is split into contiguous blocks; a channel is PCDS when every
Kraus operator is block diagonal. Block Kraus lists share the global Kraus
index j, so block l of the j-th global operator is block_kraus[l][j] (zero
matrices included). Factories for the dephasing, multi-level amplitude
damping and combined families live here as well.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from channel_core import (
    KrausChannel, TP_TOL, apply, kraus_normalization, transfer_matrix,
)
from errors import (
    DimensionMismatch, DomainError, IndexOutOfRange, NonUnique, NotPCDS,
    NotTracePreserving, NumericalFailure, RateOverflow,
)
from matrix_core import DensityMatrix

logger = logging.getLogger(__name__)

OFF_BLOCK_TOL = 1e-10
PARAM_TOL = 1e-12
FIXED_SPACE_TOL = 1e-9
FIXED_POINT_RESIDUAL_FAIL = 1e-6
PURITY_TOL = 1e-9


@dataclass(frozen=True)
class BlockPartition:
    """Ordered block dimensions (d_1, ..., d_n), block l on [offset_l, offset_l + d_l)"""
    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise DomainError(f"A partition needs at least two blocks, got {list(dims)}")
        if any(d <= 0 for d in dims):
            raise DomainError(f"Block dimensions must be positive, got {list(dims)}")
        object.__setattr__(self, 'dims', dims)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate(([0], np.cumsum(self.dims)[:-1])))

    def block_slice(self, index: int) -> slice:
        self._check_index(index)
        start = self.offsets[index]
        return slice(start, start + self.dims[index])

    def projector(self, index: int) -> np.ndarray:
        P = np.zeros((self.total, self.total), dtype=complex)
        sl = self.block_slice(index)
        P[sl, sl] = np.eye(self.dims[index])
        return P

    def block_mask(self) -> np.ndarray:
        """Boolean mask of the diagonal blocks"""
        mask = np.zeros((self.total, self.total), dtype=bool)
        for index in range(self.n):
            sl = self.block_slice(index)
            mask[sl, sl] = True
        return mask

    def _check_index(self, index: int):
        if not 0 <= index < self.n:
            raise IndexOutOfRange(f"Block index {index} outside partition with {self.n} blocks")

    def to_list(self) -> List[int]:
        return list(self.dims)


@dataclass(frozen=True, eq=False)
class PCDSChannel:
    """A block-diagonal Kraus channel together with its shared-index block lists"""
    partition: BlockPartition
    channel: KrausChannel
    block_kraus: Tuple[Tuple[np.ndarray, ...], ...]

    @property
    def n_blocks(self) -> int:
        return self.partition.n

    @property
    def num_kraus(self) -> int:
        return self.channel.num_kraus


def is_pcds(ch: KrausChannel, partition: BlockPartition) -> Tuple[bool, float]:
    """True when every off-block Kraus entry is at most 1e-10; also the largest such entry"""
    if ch.dim_in != partition.total or ch.dim_out != partition.total:
        raise DimensionMismatch(
            f"Partition {partition.to_list()} does not fit channel {ch.dim_in} -> {ch.dim_out}")
    off_block = ~partition.block_mask()
    largest = max((float(np.max(np.abs(K[off_block]), initial=0.0)) for K in ch.kraus), default=0.0)
    return largest <= OFF_BLOCK_TOL, largest


def _check_block_normalization(partition: BlockPartition, blocks: Sequence[Sequence[np.ndarray]]):
    for index, ops in enumerate(blocks):
        d = partition.dims[index]
        gram = sum(K.conj().T @ K for K in ops)
        residual = float(np.max(np.abs(gram - np.eye(d))))
        if residual > TP_TOL:
            raise NotTracePreserving(f"Block {index} normalization deviates from identity by {residual:.3e}")


def from_blocks(partition: BlockPartition, block_kraus: Sequence[Sequence]) -> PCDSChannel:
    """Global Kraus j is the direct sum over blocks of block_kraus[l][j]; short lists are zero padded"""
    if len(block_kraus) != partition.n:
        raise DimensionMismatch(f"Expected {partition.n} block Kraus lists, got {len(block_kraus)}")
    count = max(len(ops) for ops in block_kraus)
    if count == 0:
        raise DimensionMismatch("Every block Kraus list is empty")

    blocks = []
    for index, ops in enumerate(block_kraus):
        d = partition.dims[index]
        arrays = []
        for j, K in enumerate(ops):
            arr = np.array(K, dtype=complex)
            if arr.ndim == 0:
                arr = arr.reshape(1, 1)
            if arr.shape != (d, d):
                raise DimensionMismatch(f"Block {index} Kraus {j} has shape {arr.shape}, expected {(d, d)}")
            arrays.append(arr)
        arrays.extend(np.zeros((d, d), dtype=complex) for _ in range(count - len(arrays)))
        blocks.append(tuple(arrays))

    d_total = partition.total
    globals_ = []
    for j in range(count):
        M = np.zeros((d_total, d_total), dtype=complex)
        for index in range(partition.n):
            sl = partition.block_slice(index)
            M[sl, sl] = blocks[index][j]
        globals_.append(M)
    channel = KrausChannel(d_total, d_total, tuple(globals_))

    residual = float(np.max(np.abs(kraus_normalization(channel) - np.eye(d_total))))
    if residual > TP_TOL:
        raise NotTracePreserving(f"Assembled channel normalization deviates from identity by {residual:.3e}")
    return PCDSChannel(partition, channel, tuple(blocks))


def from_channel(ch: KrausChannel, partition: BlockPartition) -> PCDSChannel:
    """Extract shared-index block lists from a channel that passes is_pcds"""
    ok, largest = is_pcds(ch, partition)
    if not ok:
        raise NotPCDS(f"Largest off-block Kraus entry is {largest:.3e}")
    blocks = tuple(
        tuple(np.array(K[sl, sl]) for K in ch.kraus)
        for sl in (partition.block_slice(index) for index in range(partition.n))
    )
    _check_block_normalization(partition, blocks)
    return PCDSChannel(partition, ch, blocks)


def diagonal_block(pc: PCDSChannel, index: int) -> KrausChannel:
    """Block channel Phi_ll, keeping the shared Kraus index (zero operators included)"""
    pc.partition._check_index(index)
    d = pc.partition.dims[index]
    return KrausChannel(d, d, pc.block_kraus[index])


def canonical_pcds(pc: PCDSChannel) -> PCDSChannel:
    """Drop global Kraus indices whose operator vanishes in every block"""
    keep = [j for j, K in enumerate(pc.channel.kraus) if np.linalg.norm(K) >= 1e-12]
    if len(keep) == pc.num_kraus or not keep:
        return pc
    channel = KrausChannel(pc.channel.dim_in, pc.channel.dim_out, tuple(pc.channel.kraus[j] for j in keep))
    blocks = tuple(tuple(ops[j] for j in keep) for ops in pc.block_kraus)
    return PCDSChannel(pc.partition, channel, blocks)


def incoherent_part(pc: PCDSChannel) -> PCDSChannel:
    """
    Phi^(0): the same diagonal blocks, each on Kraus indices of its own, so no
    environment index is shared and every inter-block coherence is destroyed.
    """
    per_block = []
    for ops in pc.block_kraus:
        live = [K for K in ops if np.linalg.norm(K) >= 1e-12] or [ops[0]]
        per_block.append(live)

    count = sum(len(ops) for ops in per_block)
    rows = []
    offset = 0
    for index, ops in enumerate(per_block):
        d = pc.partition.dims[index]
        row = [np.zeros((d, d), dtype=complex) for _ in range(count)]
        row[offset:offset + len(ops)] = ops
        offset += len(ops)
        rows.append(row)
    return from_blocks(pc.partition, rows)


def _check_unit_interval(name: str, value: float) -> float:
    if value < -PARAM_TOL or value > 1.0 + PARAM_TOL:
        raise DomainError(f"{name}={value} outside [0, 1]")
    return min(max(float(value), 0.0), 1.0)


def _check_kappa(kappa: complex) -> complex:
    kappa = complex(kappa)
    magnitude = abs(kappa)
    if magnitude > 1.0 + PARAM_TOL:
        raise DomainError(f"|kappa|={magnitude} exceeds 1")
    return kappa / magnitude if magnitude > 1.0 else kappa


def make_dephasing(d_A: int, d_B: int, kappa: complex) -> PCDSChannel:
    """Delta^(kappa): blocks kept, coherences Theta_AB scaled by kappa"""
    kappa = _check_kappa(kappa)
    if d_A < 1 or d_B < 1:
        raise DomainError(f"Block dimensions must be positive, got ({d_A}, {d_B})")
    residual = np.sqrt(max(0.0, 1.0 - abs(kappa) ** 2))
    I_A = np.eye(d_A, dtype=complex)
    I_B = np.eye(d_B, dtype=complex)
    return from_blocks(BlockPartition((d_A, d_B)), [[kappa * I_A, residual * I_A], [I_B]])


def make_qubit_dephasing(kappa: complex) -> KrausChannel:
    return make_dephasing(1, 1, kappa).channel


def make_mad(d_C: int, rates: Dict[Tuple[int, int], float]) -> KrausChannel:
    """
    Multi-level amplitude damping; rates[(j, i)] is the decay j -> i with i < j.

    Kraus set: M0 = |0><0| + sum_j sqrt(1 - xi_j)|j><j| followed by
    sqrt(gamma_ji)|i><j| for every nonzero rate in (j, i) order.
    """
    if d_C < 2:
        raise DomainError(f"MAD channel needs d_C >= 2, got {d_C}")
    xi = np.zeros(d_C)
    jumps = []
    for (j, i), gamma in sorted(rates.items()):
        if not 0 <= i < j < d_C:
            raise DomainError(f"Decay ({j} -> {i}) is not a downward transition within d_C={d_C}")
        gamma = _check_unit_interval(f"gamma_{j}{i}", gamma)
        xi[j] += gamma
        if gamma > 0.0:
            jumps.append((j, i, gamma))
    for j in range(d_C):
        if xi[j] > 1.0 + PARAM_TOL:
            raise RateOverflow(f"Total decay rate out of level {j} is {xi[j]:.12g} > 1")

    ops = [np.diag(np.sqrt(np.clip(1.0 - xi, 0.0, 1.0))).astype(complex)]
    for j, i, gamma in jumps:
        M = np.zeros((d_C, d_C), dtype=complex)
        M[i, j] = np.sqrt(gamma)
        ops.append(M)
    return KrausChannel(d_C, d_C, tuple(ops))


def _adc_kraus(gamma: float) -> List[np.ndarray]:
    return [
        np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex),
        np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex),
    ]


def make_adc(gamma: float) -> KrausChannel:
    """Qubit amplitude damping with decay probability gamma"""
    gamma = _check_unit_interval('gamma', gamma)
    return KrausChannel(2, 2, tuple(_adc_kraus(gamma)))


def make_single_decay(d_C: int, gamma: float) -> PCDSChannel:
    """Omega^[gamma]: decay 1 -> 0 only, partition (2, d_C - 2)"""
    if d_C < 3:
        raise DomainError(f"Single-decay channel needs d_C >= 3, got {d_C}")
    gamma = _check_unit_interval('gamma', gamma)
    d_B = d_C - 2
    return from_blocks(BlockPartition((2, d_B)), [_adc_kraus(gamma), [np.eye(d_B, dtype=complex)]])


def make_combined(d_C: int, gamma: float, kappa: complex) -> PCDSChannel:
    """
    Omega^[gamma](kappa) = Delta^(kappa) o Omega^[gamma] on partition (2, d_C - 2).

    Kraus set: diag(1, sqrt(1-gamma), kappa* I_B), sqrt(gamma)|0><1| and
    sqrt(1-|kappa|^2) P_B.
    """
    if d_C < 3:
        raise DomainError(f"Combined channel needs d_C >= 3, got {d_C}")
    gamma = _check_unit_interval('gamma', gamma)
    kappa = _check_kappa(kappa)
    d_B = d_C - 2
    I_B = np.eye(d_B, dtype=complex)
    zero_A = np.zeros((2, 2), dtype=complex)
    M0_A, M1_A = _adc_kraus(gamma)
    residual = np.sqrt(max(0.0, 1.0 - abs(kappa) ** 2))
    return from_blocks(
        BlockPartition((2, d_B)),
        [[M0_A, M1_A, zero_A], [np.conj(kappa) * I_B, 0.0 * I_B, residual * I_B]],
    )


def decay_factorization(d_C: int, gamma: float, kappa: complex = 1.0) -> Tuple[PCDSChannel, KrausChannel]:
    """
    For gamma >= 1/2, Omega^[gamma](kappa) = Omega^[2 gamma - 1] o Omega^[1/2](kappa).

    Returns the gamma = 1/2 reference channel and the post-processing map.
    """
    gamma = _check_unit_interval('gamma', gamma)
    if gamma < 0.5 - PARAM_TOL:
        raise DomainError(f"Factorization through gamma=1/2 needs gamma >= 1/2, got {gamma}")
    reference = make_combined(d_C, 0.5, kappa)
    post = make_single_decay(d_C, max(0.0, 2.0 * gamma - 1.0)).channel
    return reference, post


def random_pcds(partition: BlockPartition, rng: np.random.Generator,
                families: Sequence[str] = ('adc', 'dephasing', 'identity')) -> PCDSChannel:
    """
    Random PCDS channel with blocks drawn from the given families.

    ADC and dephasing blocks need dimension 2, identity blocks take any
    dimension. The diagonal Kraus operator of each block shares global index 0;
    every other operator gets an index of its own, which keeps the result
    covariant under diagonal sign flips.
    """
    block_lists = []
    for index, d in enumerate(partition.dims):
        options = [f for f in families if f == 'identity' or d == 2]
        if not options:
            raise DomainError(f"No family in {list(families)} fits a block of dimension {d}")
        family = options[int(rng.integers(len(options)))]
        if family == 'adc':
            ops = _adc_kraus(float(rng.uniform(0.0, 0.5)))
        elif family == 'dephasing':
            magnitude = float(rng.uniform(0.0, 1.0))
            kappa = magnitude * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
            ops = [np.diag([kappa, 1.0]).astype(complex),
                   np.diag([np.sqrt(1.0 - magnitude ** 2), 0.0]).astype(complex)]
        elif family == 'identity':
            ops = [np.eye(d, dtype=complex)]
        else:
            raise DomainError(f"Unknown block family '{family}'")
        block_lists.append(ops)

    count = 1 + sum(len(ops) - 1 for ops in block_lists)
    aligned = []
    next_index = 1
    for index, ops in enumerate(block_lists):
        d = partition.dims[index]
        row = [np.zeros((d, d), dtype=complex) for _ in range(count)]
        row[0] = ops[0]
        for K in ops[1:]:
            row[next_index] = K
            next_index += 1
        aligned.append(row)
    return from_blocks(partition, aligned)


def is_diagonal_covariant(ch: KrausChannel, tol: float = OFF_BLOCK_TOL) -> bool:
    """Whether Phi commutes with conjugation by every single-index sign flip"""
    if ch.dim_in != ch.dim_out:
        return False
    T = transfer_matrix(ch)
    for i in range(ch.dim_in):
        flip = np.ones(ch.dim_in)
        flip[i] = -1.0
        S = np.kron(flip, flip)
        if np.max(np.abs(T * S[None, :] - S[:, None] * T)) > tol:
            return False
    return True


def fixed_point(ch: KrausChannel) -> Tuple[DensityMatrix, bool]:
    """
    Unique fixed state of a TP channel and whether it is pure.

    Raises NonUnique when the eigenvalue-1 space of the transfer matrix has
    dimension larger than one.
    """
    if ch.dim_in != ch.dim_out:
        raise DimensionMismatch(f"Fixed points need dim_in == dim_out, got {ch.dim_in} -> {ch.dim_out}")
    d = ch.dim_in
    T = transfer_matrix(ch)
    _, singular, vh = np.linalg.svd(T - np.eye(d * d))
    kernel = int(np.sum(singular <= FIXED_SPACE_TOL))
    if kernel > 1:
        raise NonUnique(f"Fixed space has dimension {kernel}", dimension=kernel)
    if kernel == 0:
        raise NumericalFailure(f"No fixed point found; smallest singular value {singular[-1]:.3e}")

    rho = vh[-1].conj().reshape(d, d, order='F')
    trace = np.trace(rho)
    if abs(trace) < 1e-12:
        raise NumericalFailure("Fixed-space generator has vanishing trace")
    rho = rho / trace
    rho = 0.5 * (rho + rho.conj().T)

    residual = float(np.linalg.norm(apply(ch, rho) - rho))
    if residual > FIXED_POINT_RESIDUAL_FAIL:
        raise NumericalFailure(f"Fixed-point residual {residual:.3e} exceeds {FIXED_POINT_RESIDUAL_FAIL}")

    eigenvalues, vectors = np.linalg.eigh(rho)
    rho = (vectors * np.clip(eigenvalues, 0.0, None)) @ vectors.conj().T
    rho = rho / np.trace(rho).real
    state = DensityMatrix(rho)
    return state, state.purity >= 1.0 - PURITY_TOL


def composition_gamma(gamma_1: float, gamma_2: float) -> float:
    """Decay parameter of Omega^[gamma_1] o Omega^[gamma_2]"""
    return gamma_1 + gamma_2 - gamma_1 * gamma_2

