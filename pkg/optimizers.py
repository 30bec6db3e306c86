"""
Maximization of block-structured single-letter objectives.

For a block-diagonal input rho = (+)_l p_l tau_l the objectives reduce to

    F(P, tau) = H(P) + w * [ sum_l p_l (a S(tau_l) + S(Phi_l[tau_l]))
                             - S(sum_l p_l ~Phi_l[tau_l]) ]

with (w, a) = (1, 0) for coherent information and (1/2, 1) for mutual
information. Block states are optimized per block: scalar blocks are fixed
at the maximally mixed state, sign-flip covariant channels are searched over
diagonal populations and everything else over Cholesky factors. The block
weights P are found by an audited bounded search (two blocks) or by
exponentiated-gradient ascent on the simplex.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from channel_core import KrausChannel, complementary, transfer_matrix, unvec, vec
from errors import DimensionMismatch, DomainError
from matrix_core import matrix_entropy, shannon_entropy

logger = logging.getLogger(__name__)

COHERENT = 'coherent'
MUTUAL = 'mutual'

STATE_TOL = 1e-9
SPLIT_XATOL = 1e-9
PAIR_XATOL = 1e-10
SIMPLEX_TOL = 1e-8
SIMPLEX_MAX_ITER = 2000
MAX_BLOCKS = 8
MAX_PASSES = 100
SCALAR_TOL = 1e-12
LOG_CUTOFF = 1e-15
LOG_FLOOR = 1e-300


@dataclass
class SolverSettings:
    """Knobs shared by every capacity optimization"""
    seed: int = 42
    restarts: int = 20
    audit_points: int = 21

    def to_dict(self) -> Dict[str, Any]:
        return {'seed': self.seed, 'restarts': self.restarts, 'audit_points': self.audit_points}


@dataclass
class BlockTerm:
    dim: int
    out_dim: int
    transfer: np.ndarray
    env_transfer: np.ndarray
    kind: str


@dataclass
class Optimum:
    """Best point found by one of the maximizers"""
    value: float
    probabilities: np.ndarray
    states: List[np.ndarray]
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def is_scalar_channel(ch: KrausChannel) -> bool:
    """All Kraus operators proportional to the identity"""
    if ch.dim_in != ch.dim_out:
        return False
    eye = np.eye(ch.dim_in)
    return all(np.max(np.abs(K - K[0, 0] * eye)) <= SCALAR_TOL for K in ch.kraus)


def _apply_transfer(T: np.ndarray, tau: np.ndarray, out_dim: int) -> np.ndarray:
    return unvec(T @ vec(tau), out_dim)


def state_from_params(x: np.ndarray, d: int) -> np.ndarray:
    """tau = L L^dagger / Tr, L lower triangular with d real diagonal and d(d-1) off-diagonal parameters"""
    L = np.zeros((d, d), dtype=complex)
    L[np.diag_indices(d)] = x[:d]
    rows, cols = np.tril_indices(d, -1)
    n_off = len(rows)
    L[rows, cols] = x[d:d + n_off] + 1j * x[d + n_off:d + 2 * n_off]
    M = L @ L.conj().T
    trace = np.trace(M).real
    if trace <= 1e-300:
        return np.eye(d, dtype=complex) / d
    return M / trace


def params_from_state(tau: np.ndarray) -> np.ndarray:
    d = tau.shape[0]
    L = np.linalg.cholesky(tau + 1e-10 * np.eye(d))
    rows, cols = np.tril_indices(d, -1)
    return np.concatenate([np.real(np.diag(L)), L[rows, cols].real, L[rows, cols].imag])


class BlockObjective:
    """Single-letter objective of a channel split into blocks sharing one environment"""

    def __init__(self, blocks: Sequence[KrausChannel], mode: str = COHERENT, covariant: bool = False,
                 settings: Optional[SolverSettings] = None):
        if mode not in (COHERENT, MUTUAL):
            raise DomainError(f"Unknown objective '{mode}'")
        if not blocks:
            raise DimensionMismatch("At least one block is required")
        env_dims = {b.num_kraus for b in blocks}
        if len(env_dims) != 1:
            raise DimensionMismatch(f"Blocks must share the Kraus index, got counts {sorted(env_dims)}")

        self.mode = mode
        self.settings = settings or SolverSettings()
        self.rng = np.random.default_rng(self.settings.seed)
        self.scale = 1.0 if mode == COHERENT else 0.5
        self.input_weight = 0.0 if mode == COHERENT else 1.0
        self.env_dim = env_dims.pop()
        self.evaluations = 0

        self.terms: List[BlockTerm] = []
        for block in blocks:
            if is_scalar_channel(block):
                kind = 'fixed'
            elif covariant:
                kind = 'diagonal'
            else:
                kind = 'general'
            self.terms.append(BlockTerm(
                dim=block.dim_in,
                out_dim=block.dim_out,
                transfer=transfer_matrix(block),
                env_transfer=transfer_matrix(complementary(block)),
                kind=kind,
            ))

    @property
    def n_blocks(self) -> int:
        return len(self.terms)

    @property
    def kinds(self) -> List[str]:
        return [t.kind for t in self.terms]

    def initial_states(self) -> List[np.ndarray]:
        return [np.eye(t.dim, dtype=complex) / t.dim for t in self.terms]

    def block_terms(self, index: int, tau: np.ndarray) -> Tuple[float, np.ndarray]:
        """Entropy contribution and environment output of one block state"""
        term = self.terms[index]
        self.evaluations += 1
        value = matrix_entropy(_apply_transfer(term.transfer, tau, term.out_dim))
        if self.input_weight:
            value += self.input_weight * matrix_entropy(tau)
        return value, _apply_transfer(term.env_transfer, tau, self.env_dim)

    def value(self, probabilities: Sequence[float], states: Sequence[np.ndarray]) -> float:
        total = 0.0
        env = np.zeros((self.env_dim, self.env_dim), dtype=complex)
        for index, (p, tau) in enumerate(zip(probabilities, states)):
            if p <= 0.0:
                continue
            term, omega = self.block_terms(index, tau)
            total += p * term
            env += p * omega
        return shannon_entropy(probabilities) + self.scale * (total - matrix_entropy(env))

    def probability_gradient(self, probabilities: Sequence[float], states: Sequence[np.ndarray]) -> np.ndarray:
        """Gradient of F in P up to a common constant"""
        terms, omegas = zip(*(self.block_terms(i, tau) for i, tau in enumerate(states)))
        sigma = sum(p * omega for p, omega in zip(probabilities, omegas))
        eigenvalues, vectors = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
        log_sigma = (vectors * np.log2(np.clip(eigenvalues, LOG_FLOOR, None))) @ vectors.conj().T
        grad = np.empty(len(terms))
        for i, (p, term, omega) in enumerate(zip(probabilities, terms, omegas)):
            cross = float(np.real(np.trace(omega @ log_sigma)))
            grad[i] = -np.log2(max(p, LOG_FLOOR)) + self.scale * (term + cross)
        return grad

    def _slice(self, index: int, probabilities: Sequence[float], cache: List[Tuple[float, np.ndarray]]
               ) -> Callable[[np.ndarray], Tuple[float, float, np.ndarray]]:
        """Objective as a function of one block state with the others held fixed"""
        p = probabilities[index]
        rest_value = sum(probabilities[m] * cache[m][0] for m in range(self.n_blocks) if m != index)
        rest_env = sum((probabilities[m] * cache[m][1] for m in range(self.n_blocks) if m != index),
                       np.zeros((self.env_dim, self.env_dim), dtype=complex))
        entropy_p = shannon_entropy(probabilities)

        def objective(tau: np.ndarray) -> Tuple[float, float, np.ndarray]:
            term, omega = self.block_terms(index, tau)
            f = entropy_p + self.scale * (rest_value + p * term - matrix_entropy(rest_env + p * omega))
            return f, term, omega

        return objective

    def _ascend_populations(self, objective, tau: np.ndarray, current: Tuple[float, float, np.ndarray]):
        """Pairwise mass transfer between diagonal entries, each move a bounded 1-D search"""
        q = np.clip(np.real(np.diag(tau)), 0.0, None)
        best_f, best_term, best_omega = current
        for a, b in combinations(range(len(q)), 2):
            mass = q[a] + q[b]
            if mass <= LOG_CUTOFF:
                continue

            def populations(u: float) -> np.ndarray:
                trial = q.copy()
                trial[a] = mass * u
                trial[b] = mass * (1.0 - u)
                return trial

            result = minimize_scalar(lambda u: -objective(np.diag(populations(u)).astype(complex))[0],
                                     bounds=(0.0, 1.0), method='bounded', options={'xatol': PAIR_XATOL})
            for u in (float(result.x), 0.0, 1.0):
                trial = populations(u)
                f, term, omega = objective(np.diag(trial).astype(complex))
                if f > best_f:
                    best_f, best_term, best_omega, q = f, term, omega, trial
        return np.diag(q).astype(complex), (best_f, best_term, best_omega)

    def _search_state(self, objective, tau: np.ndarray, current: Tuple[float, float, np.ndarray]):
        """Multistart Nelder-Mead over Cholesky factors, warm start first"""
        d = tau.shape[0]
        best_tau, best = tau, current
        starts = [params_from_state(tau)]
        starts.extend(self.rng.normal(size=d * d) for _ in range(self.settings.restarts))
        for x0 in starts:
            result = minimize(lambda x: -objective(state_from_params(x, d))[0], x0, method='Nelder-Mead',
                              options={'xatol': 1e-8, 'fatol': 1e-12, 'maxiter': 2000 * d * d})
            candidate = state_from_params(result.x, d)
            evaluated = objective(candidate)
            if evaluated[0] > best[0]:
                best_tau, best = candidate, evaluated
        return best_tau, best

    def optimize_states(self, probabilities: Sequence[float],
                        states: Optional[Sequence[np.ndarray]] = None) -> Tuple[float, List[np.ndarray]]:
        """Maximize over block states at fixed block weights; returns (value, states)"""
        probabilities = np.asarray(probabilities, dtype=float)
        states = [s.copy() for s in (states if states is not None else self.initial_states())]
        cache = [self.block_terms(i, tau) for i, tau in enumerate(states)]
        free = [i for i, t in enumerate(self.terms)
                if t.kind != 'fixed' and t.dim > 1 and probabilities[i] > 0.0]
        current = self.value(probabilities, states)
        if not free:
            return current, states

        single_move = len(free) == 1 and self.terms[free[0]].dim == 2 and self.terms[free[0]].kind == 'diagonal'
        for _ in range(MAX_PASSES):
            start = current
            for index in free:
                objective = self._slice(index, probabilities, cache)
                here = objective(states[index])
                if self.terms[index].kind == 'diagonal':
                    tau, best = self._ascend_populations(objective, states[index], here)
                else:
                    tau, best = self._search_state(objective, states[index], here)
                states[index] = tau
                cache[index] = (best[1], best[2])
                current = best[0]
            if single_move or current - start <= STATE_TOL:
                break
        return current, states


def audit_profile(values: Sequence[float], tol: float = STATE_TOL) -> bool:
    """True when a sampled profile rises and then falls (plateaus allowed)"""
    falling = False
    for step in np.diff(values):
        if step < -tol:
            falling = True
        elif step > tol and falling:
            return False
    return True


def maximize_split(profile: Callable[[float], float], audit_points: int = 21,
                   xatol: float = SPLIT_XATOL) -> Tuple[float, float, Dict[str, Any]]:
    """
    Maximize a function of p in [0, 1]: grid audit, then a bounded Brent
    search on the bracket around the best grid point. Returns (p, value, diagnostics).
    """
    grid = np.linspace(0.0, 1.0, audit_points)
    values = np.array([profile(p) for p in grid])
    unimodal = audit_profile(values)
    if not unimodal:
        logger.warning("p-profile is not unimodal on the audit grid; refining around the best grid point")

    m = int(np.argmax(values))
    lo, hi = grid[max(m - 1, 0)], grid[min(m + 1, len(grid) - 1)]
    result = minimize_scalar(lambda p: -profile(p), bounds=(lo, hi), method='bounded', options={'xatol': xatol})
    best_p, best_value = float(grid[m]), float(values[m])
    if -result.fun > best_value:
        best_p, best_value = float(result.x), float(-result.fun)
    return best_p, best_value, {'audit_unimodal': unimodal, 'audit_points': audit_points}


def maximize_two_blocks(objective: BlockObjective) -> Optimum:
    """Outer search over p = weight of block 0, inner search over block states"""
    warm = {'states': objective.initial_states()}
    found = {}

    def profile(p: float) -> float:
        value, states = objective.optimize_states([p, 1.0 - p], warm['states'])
        warm['states'] = states
        found[p] = (value, [s.copy() for s in states])
        return value

    p, value, diagnostics = maximize_split(profile, objective.settings.audit_points)
    value, states = found[p] if p in found else objective.optimize_states([p, 1.0 - p], warm['states'])
    diagnostics['evaluations'] = objective.evaluations
    return Optimum(value, np.array([p, 1.0 - p]), states, diagnostics)


def maximize_simplex(objective: BlockObjective, tol: float = SIMPLEX_TOL) -> Optimum:
    """Exponentiated-gradient ascent over block weights with step halving on decrease"""
    n = objective.n_blocks
    if n > MAX_BLOCKS:
        raise DomainError(f"At most {MAX_BLOCKS} blocks are supported, got {n}")
    P = np.full(n, 1.0 / n)
    value, states = objective.optimize_states(P)
    eta = 0.5
    iterations = 0
    for iterations in range(1, SIMPLEX_MAX_ITER + 1):
        grad = objective.probability_gradient(P, states)
        while True:
            trial = P * np.exp(eta * (grad - grad.max()))
            trial /= trial.sum()
            trial_value, trial_states = objective.optimize_states(trial, states)
            if trial_value >= value or eta < 1e-12:
                break
            eta /= 2.0
        if trial_value < value:
            break
        improvement = trial_value - value
        P, states, value = trial, trial_states, trial_value
        if improvement < tol:
            break
        eta = min(2.0 * eta, 4.0)
    logger.debug(f"Simplex ascent stopped after {iterations} iterations at {value:.10f}")
    return Optimum(value, P, states, {'iterations': iterations, 'evaluations': objective.evaluations})


def maximize_single(objective: BlockObjective) -> Optimum:
    value, states = objective.optimize_states([1.0])
    return Optimum(value, np.array([1.0]), states, {'evaluations': objective.evaluations})


def maximize(objective: BlockObjective, force_simplex: bool = False) -> Optimum:
    if objective.n_blocks == 1:
        return maximize_single(objective)
    if objective.n_blocks == 2 and not force_simplex:
        return maximize_two_blocks(objective)
    return maximize_simplex(objective)


def maximize_fixed_states(objective: BlockObjective, states: Sequence[np.ndarray],
                          audit_points: int = 21) -> Tuple[float, float]:
    """Best p for two given block states; returns (p, value)"""
    p, value, _ = maximize_split(lambda p: objective.value([p, 1.0 - p], states), audit_points)
    return p, value
