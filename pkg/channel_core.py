"""
Quantum channels in Kraus form and their Choi, transfer-matrix and
complementary representations.

Conventions:
  - vec is column stacking, so the transfer matrix of {M} is sum conj(M) (x) M
  - Choi matrices are unnormalized (trace = dim_in) and ordered input (x) output
  - the environment of a channel has one basis vector per Kraus operator,
    in Kraus-list order
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Tuple

import numpy as np

from errors import DimensionMismatch, DomainError
from matrix_core import as_matrix, hermitian_eigh, partial_trace

logger = logging.getLogger(__name__)

TP_TOL = 1e-9
KRAUS_PRUNE_TOL = 1e-12
ACTION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Channel rho -> sum_j M_j rho M_j^dagger from C^dim_in to C^dim_out"""
    dim_in: int
    dim_out: int
    kraus: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.dim_in <= 0 or self.dim_out <= 0:
            raise DimensionMismatch(f"Channel dimensions must be positive, got {self.dim_in} -> {self.dim_out}")
        if len(self.kraus) == 0:
            raise DimensionMismatch("Kraus list is empty")
        operators = []
        for j, K in enumerate(self.kraus):
            op = np.array(K, dtype=complex)
            if op.shape != (self.dim_out, self.dim_in):
                raise DimensionMismatch(
                    f"Kraus operator {j} has shape {op.shape}, expected {(self.dim_out, self.dim_in)}")
            op.setflags(write=False)
            operators.append(op)
        object.__setattr__(self, 'kraus', tuple(operators))

    @classmethod
    def from_operators(cls, operators: Iterable) -> 'KrausChannel':
        ops = [as_matrix(K) for K in operators]
        if not ops:
            raise DimensionMismatch("Kraus list is empty")
        dim_out, dim_in = ops[0].shape
        return cls(dim_in, dim_out, tuple(ops))

    @property
    def num_kraus(self) -> int:
        return len(self.kraus)

    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus)

    def __repr__(self):
        return f"KrausChannel(dim_in={self.dim_in}, dim_out={self.dim_out}, num_kraus={self.num_kraus})"


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Unnormalized Choi matrix, ordered input (x) output"""
    mat: np.ndarray
    dim_in: int
    dim_out: int

    def __post_init__(self):
        n = self.dim_in * self.dim_out
        if self.mat.shape != (n, n):
            raise DimensionMismatch(f"Choi matrix shape {self.mat.shape} does not match {self.dim_in}x{self.dim_out}")

    def hermitian_part(self) -> np.ndarray:
        return 0.5 * (self.mat + self.mat.conj().T)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.hermitian_part())[0])

    def output_trace(self) -> np.ndarray:
        """Partial trace over the output factor; the identity for TP maps"""
        return partial_trace(self.mat, (self.dim_in, self.dim_out), trace_out='B')

    def tp_residual(self) -> float:
        return float(np.max(np.abs(self.output_trace() - np.eye(self.dim_in))))


@dataclass(frozen=True)
class CPTReport:
    is_tp: bool
    residual: float
    is_cp: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {'is_tp': self.is_tp, 'residual': self.residual, 'is_cp': self.is_cp}


def kraus_normalization(ch: KrausChannel) -> np.ndarray:
    K = ch.stacked()
    return np.einsum('kji,kjl->il', K.conj(), K)


def validate_cpt(ch: KrausChannel) -> CPTReport:
    """Trace-preservation check; complete positivity holds by construction"""
    residual = float(np.max(np.abs(kraus_normalization(ch) - np.eye(ch.dim_in))))
    return CPTReport(is_tp=residual <= TP_TOL, residual=residual)


def apply(ch: KrausChannel, rho) -> np.ndarray:
    """Phi[rho] = sum_j M_j rho M_j^dagger"""
    arr = as_matrix(rho)
    if arr.shape != (ch.dim_in, ch.dim_in):
        raise DimensionMismatch(f"Input of shape {arr.shape} does not fit channel with dim_in={ch.dim_in}")
    K = ch.stacked()
    return np.einsum('kij,jl,kml->im', K, arr, K.conj())


def compose(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """Kraus set of outer o inner, ordered (i, j) -> i * len(inner) + j"""
    if outer.dim_in != inner.dim_out:
        raise DimensionMismatch(f"Cannot compose: outer dim_in={outer.dim_in}, inner dim_out={inner.dim_out}")
    ops = tuple(A @ B for A in outer.kraus for B in inner.kraus)
    return KrausChannel(inner.dim_in, outer.dim_out, ops)


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order='F')


def unvec(v: np.ndarray, rows: int, cols: int = None) -> np.ndarray:
    return np.asarray(v).reshape(rows, rows if cols is None else cols, order='F')


def choi(ch: KrausChannel) -> ChoiMatrix:
    vectors = np.stack([vec(K) for K in ch.kraus], axis=1)
    return ChoiMatrix(vectors @ vectors.conj().T, ch.dim_in, ch.dim_out)


def transfer_matrix(ch: KrausChannel) -> np.ndarray:
    """T with T vec(rho) = vec(Phi[rho]), shape dim_out^2 x dim_in^2"""
    return sum(np.kron(K.conj(), K) for K in ch.kraus)


def choi_from_transfer(T: np.ndarray, dim_in: int, dim_out: int) -> ChoiMatrix:
    """Reshuffle a transfer matrix into the Choi matrix of the same map"""
    T = np.asarray(T, dtype=complex)
    if T.shape != (dim_out * dim_out, dim_in * dim_in):
        raise DimensionMismatch(f"Transfer matrix shape {T.shape} does not match {dim_in} -> {dim_out}")
    # T[(s, r), (v, u)] maps rho[u, v] to out[r, s]; Choi is indexed [(u, r), (v, s)]
    tensor = T.reshape(dim_out, dim_out, dim_in, dim_in)
    C = tensor.transpose(3, 1, 2, 0).reshape(dim_in * dim_out, dim_in * dim_out)
    return ChoiMatrix(C, dim_in, dim_out)


def kraus_from_choi(C: ChoiMatrix, tol: float = KRAUS_PRUNE_TOL) -> KrausChannel:
    """Spectral Kraus decomposition; eigenvalues at or below tol are dropped"""
    eigenvalues, vectors = hermitian_eigh(C.hermitian_part())
    ops = []
    for lam, v in zip(eigenvalues[::-1], vectors.T[::-1]):
        if lam <= tol:
            break
        ops.append(np.sqrt(lam) * v.reshape(C.dim_in, C.dim_out).T)
    if not ops:
        ops.append(np.zeros((C.dim_out, C.dim_in), dtype=complex))
    return KrausChannel(C.dim_in, C.dim_out, tuple(ops))


def complementary(ch: KrausChannel) -> KrausChannel:
    """
    Channel to the environment: output entry (j, j') = Tr[M_j'^dagger M_j rho].

    Kraus operator R_i collects row i of every M_j, i.e. R_i[j, :] = M_j[i, :].
    """
    R = ch.stacked().transpose(1, 0, 2)
    return KrausChannel(ch.dim_in, ch.num_kraus, tuple(R))


def canonicalize(ch: KrausChannel, tol: float = KRAUS_PRUNE_TOL) -> KrausChannel:
    """Drop Kraus operators with Frobenius norm below tol, keeping order"""
    kept = [K for K in ch.kraus if np.linalg.norm(K) >= tol]
    if len(kept) == ch.num_kraus:
        return ch
    if not kept:
        kept = [ch.kraus[0]]
    return KrausChannel(ch.dim_in, ch.dim_out, tuple(kept))


def pad_kraus(ch: KrausChannel, count: int) -> KrausChannel:
    """Append zero Kraus operators until the list holds count operators"""
    missing = count - ch.num_kraus
    if missing <= 0:
        return ch
    zero = np.zeros((ch.dim_out, ch.dim_in), dtype=complex)
    return KrausChannel(ch.dim_in, ch.dim_out, ch.kraus + (zero,) * missing)


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(d, d, (np.eye(d, dtype=complex),))


def unitary_channel(U) -> KrausChannel:
    return KrausChannel.from_operators([U])


def convex_combination(p: float, first: KrausChannel, second: KrausChannel) -> KrausChannel:
    """p * first + (1 - p) * second as a Kraus union"""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Mixing weight {p} outside [0, 1]")
    if (first.dim_in, first.dim_out) != (second.dim_in, second.dim_out):
        raise DimensionMismatch("Cannot mix channels with different dimensions")
    ops = tuple(np.sqrt(p) * K for K in first.kraus) + tuple(np.sqrt(1.0 - p) * K for K in second.kraus)
    return KrausChannel(first.dim_in, first.dim_out, ops)


def action_distance(first: KrausChannel, second: KrausChannel) -> float:
    if (first.dim_in, first.dim_out) != (second.dim_in, second.dim_out):
        raise DimensionMismatch("Channels act between different spaces")
    return float(np.max(np.abs(transfer_matrix(first) - transfer_matrix(second))))


def channels_equal_in_action(first: KrausChannel, second: KrausChannel, tol: float = ACTION_TOL) -> bool:
    return action_distance(first, second) <= tol
