"""
Dense complex linear algebra and entropic primitives.

Matrices are plain numpy complex128 arrays; the vectorization convention used
throughout the project is column stacking, vec(X) = X.reshape(-1, order='F').
All logarithms are base 2.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from errors import DimensionMismatch, DomainError, NonHermitian, NotAState

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
ENTROPY_CUTOFF = 1e-12
BINARY_CLAMP = 1e-12

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

EIGENSOLVERS = ('lapack', 'jacobi')
_eigensolver = 'lapack'


def set_eigensolver(name: str) -> None:
    """Select the Hermitian eigensolver used by every entropy evaluation"""
    global _eigensolver
    name = name.lower()
    if name not in EIGENSOLVERS:
        raise DomainError(f"Unknown eigensolver '{name}', expected one of {', '.join(EIGENSOLVERS)}")
    _eigensolver = name
    logger.debug(f"Eigensolver set to {name}")


def get_eigensolver() -> str:
    return _eigensolver


def as_matrix(M) -> np.ndarray:
    """Coerce input to a 2-D complex array"""
    if isinstance(M, DensityMatrix):
        return M.mat
    arr = np.asarray(M, dtype=complex)
    if arr.ndim != 2:
        raise DimensionMismatch(f"Expected a matrix, got an array with shape {arr.shape}")
    return arr


def hermiticity_deviation(M) -> float:
    arr = as_matrix(M)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"Matrix is not square: {arr.shape}")
    return float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0


def _require_hermitian(M) -> np.ndarray:
    arr = as_matrix(M)
    deviation = hermiticity_deviation(arr)
    if deviation > HERMITIAN_TOL:
        raise NonHermitian(f"Matrix deviates from Hermitian by {deviation:.3e}")
    return arr


def jacobi_eigh(M) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cyclic complex Jacobi eigensolver for Hermitian matrices.

    Each pivot (p, q) is first made real by the phase diag(1, e^{-i phi}) and
    then annihilated by a real rotation. Sweeps stop once the off-diagonal
    Frobenius norm drops below JACOBI_TOL * ||M||_F.

    Returns (eigenvalues ascending, eigenvectors as columns).
    """
    A = _require_hermitian(M).copy()
    d = A.shape[0]
    V = np.eye(d, dtype=complex)
    scale = np.linalg.norm(A)
    if d == 1 or scale == 0.0:
        return np.real(np.diag(A)).copy(), V

    A = 0.5 * (A + A.conj().T)
    threshold = JACOBI_TOL * scale

    for sweep in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(max(np.sum(np.abs(A) ** 2) - np.sum(np.abs(np.diag(A)) ** 2), 0.0))
        if off <= threshold:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                magnitude = abs(A[p, q])
                if magnitude == 0.0:
                    continue
                phase = A[p, q] / magnitude
                theta = (A[q, q].real - A[p, p].real) / (2.0 * magnitude)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                G = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
                pivot = [p, q]
                A[:, pivot] = A[:, pivot] @ G
                A[pivot, :] = G.conj().T @ A[pivot, :]
                A[p, q] = A[q, p] = 0.0
                V[:, pivot] = V[:, pivot] @ G
    else:
        logger.warning(f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps (d={d})")

    eigenvalues = np.real(np.diag(A))
    order = np.argsort(eigenvalues)
    return eigenvalues[order], V[:, order]


def hermitian_eigh(M, backend: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues ascending"""
    arr = _require_hermitian(M)
    if (backend or _eigensolver) == 'jacobi':
        return jacobi_eigh(arr)
    return np.linalg.eigh(0.5 * (arr + arr.conj().T))


def hermitian_eigenvalues(M, backend: Optional[str] = None) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix sorted ascending"""
    arr = _require_hermitian(M)
    if (backend or _eigensolver) == 'jacobi':
        return jacobi_eigh(arr)[0]
    return np.linalg.eigvalsh(0.5 * (arr + arr.conj().T))


def spectrum(M) -> np.ndarray:
    """Eigenvalues of the Hermitian part of M, no validation (optimizer inner loops)"""
    arr = 0.5 * (M + M.conj().T)
    if _eigensolver == 'jacobi':
        return jacobi_eigh(arr)[0]
    return np.linalg.eigvalsh(arr)


def spectrum_entropy(eigenvalues) -> float:
    lam = np.asarray(eigenvalues, dtype=float)
    lam = lam[lam >= ENTROPY_CUTOFF]
    return float(-np.sum(lam * np.log2(lam)))


def matrix_entropy(M) -> float:
    """Von Neumann entropy of an unvalidated positive matrix"""
    return spectrum_entropy(spectrum(np.asarray(M, dtype=complex)))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive semidefinite unit-trace matrix"""
    mat: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mat, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(f"Density matrix must be square, got shape {arr.shape}")
        _require_hermitian(arr)
        trace = np.trace(arr).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise NotAState(f"Trace is {trace:.12g}, expected 1")
        smallest = float(np.linalg.eigvalsh(0.5 * (arr + arr.conj().T))[0])
        if smallest < -PSD_TOL:
            raise NotAState(f"Smallest eigenvalue {smallest:.3e} is negative")
        arr.setflags(write=False)
        object.__setattr__(self, 'mat', arr)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))

    def to_list(self):
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.mat]


def as_state(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)


def maximally_mixed(d: int) -> DensityMatrix:
    return DensityMatrix(np.eye(d, dtype=complex) / d)


def pure_state(vector: Sequence[complex]) -> DensityMatrix:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise NotAState("Zero vector does not define a state")
    v = v / norm
    return DensityMatrix(np.outer(v, v.conj()))


def von_neumann_entropy(rho) -> float:
    """
    S(rho) = -sum lambda log2 lambda in bits.

    Eigenvalues below 1e-12 contribute zero, which also absorbs roundoff
    negatives down to -1e-10 tolerated by DensityMatrix validation.
    """
    state = as_state(rho)
    return spectrum_entropy(hermitian_eigenvalues(state.mat))


def _xlog2x(x: float) -> float:
    return 0.0 if x <= 0.0 else -x * np.log2(x)


def binary_entropy(p: float) -> float:
    """H2(p) in bits; inputs within 1e-12 outside [0, 1] are clamped"""
    if p < -BINARY_CLAMP or p > 1.0 + BINARY_CLAMP:
        raise DomainError(f"Binary entropy argument {p} outside [0, 1]")
    p = min(max(float(p), 0.0), 1.0)
    return float(_xlog2x(p) + _xlog2x(1.0 - p))


def shannon_entropy(probabilities: Sequence[float]) -> float:
    """H(P) in bits for a probability vector"""
    P = np.asarray(probabilities, dtype=float)
    if np.any(P < -BINARY_CLAMP) or abs(P.sum() - 1.0) > 1e-9:
        raise DomainError(f"Not a probability vector: {P.tolist()}")
    P = P[P >= ENTROPY_CUTOFF]
    return float(-np.sum(P * np.log2(P)))


def partial_trace(M, dims: Tuple[int, int], trace_out: str = 'B') -> np.ndarray:
    """
    Trace out one factor of a bipartite operator on C^dA (x) C^dB.

    trace_out='B' returns the operator on A, trace_out='A' the one on B.
    """
    dA, dB = dims
    arr = as_matrix(M)
    if dA <= 0 or dB <= 0 or arr.shape != (dA * dB, dA * dB):
        raise DimensionMismatch(f"Dimensions {dims} do not factor a matrix of shape {arr.shape}")
    tensor = arr.reshape(dA, dB, dA, dB)
    if trace_out == 'B':
        return np.einsum('ijkj->ik', tensor)
    if trace_out == 'A':
        return np.einsum('ijil->jl', tensor)
    raise DomainError(f"trace_out must be 'A' or 'B', got '{trace_out}'")


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix whose independent real and imaginary parts are uniform in [-1, 1]"""
    X = rng.uniform(-1.0, 1.0, (d, d)) + 1j * rng.uniform(-1.0, 1.0, (d, d))
    return 0.5 * (X + X.conj().T)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return expm(1j * np.pi * random_hermitian(d, rng))


def random_density_matrix(d: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return DensityMatrix(rho / np.trace(rho).real)
