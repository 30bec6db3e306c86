"""
Entropic functionals and capacities of PCDS channels.

Capacities are reported in qubits per channel use. The quantum capacity is
only given an unconditional value when the channel is certified degradable,
antidegradable, covered by a closed form, or squeezed between a lower and an
upper bound that meet within 1e-4; otherwise the result carries the bounds
with tight=False.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from channel_core import (
    KrausChannel, apply, canonicalize, channels_equal_in_action, complementary,
    compose, identity_channel, pad_kraus,
)
from degradability import (
    DegradabilityVerdict, find_antidegrading_map,
    find_degrading_map, pcds_degradability,
)
from errors import (
    ConsistencyError, DimensionMismatch, DomainError, NonUnique, NumericalFailure,
    UndeterminedDegradability,
)
from matrix_core import (
    DensityMatrix, as_state, binary_entropy, matrix_entropy, von_neumann_entropy,
)
from optimizers import (
    COHERENT, MUTUAL, BlockObjective, Optimum, SolverSettings, is_scalar_channel,
    maximize, maximize_fixed_states, maximize_split,
)
from pcds_channels import (
    PCDSChannel, canonical_pcds, diagonal_block, fixed_point, incoherent_part, is_diagonal_covariant,
)

logger = logging.getLogger(__name__)

TIGHT_GAP = 1e-4
BOUND_SLACK = 1e-6
DOMINATION_TOL = 1e-9
ALIGNMENT_TOL = 1e-9
CLOSED_FORM_XATOL = 1e-10


class CapacityMethod(Enum):
    CLOSED_FORM = 'ClosedForm'
    SINGLE_LETTER = 'SingleLetterOptimized'
    BOUND_SANDWICH = 'BoundSandwich'
    ANTIDEGRADABLE_ZERO = 'AntidegradableZero'


@dataclass
class CapacityResult:
    value: float
    optimal_p: np.ndarray
    optimal_block_states: List[DensityMatrix]
    lower_bound: float
    upper_bound: float
    method: CapacityMethod
    degradability: Optional[DegradabilityVerdict] = None
    tight: bool = True
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': float(self.value),
            'lower': float(self.lower_bound),
            'upper': float(self.upper_bound),
            'method': self.method.value,
            'p': [float(p) for p in self.optimal_p],
            'degradable': self.degradability.status.value if self.degradability else 'unknown',
            'tight': bool(self.tight),
        }


def _as_density(tau: np.ndarray) -> DensityMatrix:
    """Project an optimizer iterate onto the state space"""
    tau = 0.5 * (tau + tau.conj().T)
    eigenvalues, vectors = np.linalg.eigh(tau)
    tau = (vectors * np.clip(eigenvalues, 0.0, None)) @ vectors.conj().T
    return DensityMatrix(tau / np.trace(tau).real)


def _probabilities(P: Sequence[float]) -> np.ndarray:
    P = np.clip(np.asarray(P, dtype=float), 0.0, None)
    return P / P.sum()


# Functionals

def coherent_information(ch: KrausChannel, rho) -> float:
    """I_coh = S(Phi[rho]) - S(~Phi[rho])"""
    state = as_state(rho)
    if state.dim != ch.dim_in:
        raise DimensionMismatch(f"State of dimension {state.dim} does not fit channel with dim_in={ch.dim_in}")
    return matrix_entropy(apply(ch, state.mat)) - matrix_entropy(apply(complementary(ch), state.mat))


def mutual_information(ch: KrausChannel, rho) -> float:
    state = as_state(rho)
    return von_neumann_entropy(state) + coherent_information(ch, state)


def delta_s_p(p: float, first, second) -> float:
    """Entropy excess S(p r1 + (1-p) r2) - p S(r1) - (1-p) S(r2), non-negative by concavity"""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    r1, r2 = as_state(first), as_state(second)
    if r1.dim != r2.dim:
        raise DimensionMismatch(f"States of dimensions {r1.dim} and {r2.dim} cannot be mixed")
    mixture = p * r1.mat + (1.0 - p) * r2.mat
    return matrix_entropy(mixture) - p * von_neumann_entropy(r1) - (1.0 - p) * von_neumann_entropy(r2)


def _shared_environment(phi_a: KrausChannel, phi_b: KrausChannel) -> Tuple[KrausChannel, KrausChannel]:
    count = max(phi_a.num_kraus, phi_b.num_kraus)
    return pad_kraus(phi_a, count), pad_kraus(phi_b, count)


def _block_functional(p: float, phi_a: KrausChannel, tau_a, phi_b: KrausChannel, tau_b, mutual: bool) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    phi_a, phi_b = _shared_environment(phi_a, phi_b)
    info = mutual_information if mutual else coherent_information
    env_a = _as_density(apply(complementary(phi_a), as_state(tau_a).mat))
    env_b = _as_density(apply(complementary(phi_b), as_state(tau_b).mat))
    return p * info(phi_a, tau_a) + (1.0 - p) * info(phi_b, tau_b) - delta_s_p(p, env_a, env_b)


def j_p_functional(p: float, phi_a: KrausChannel, tau_a, phi_b: KrausChannel, tau_b) -> float:
    """
    p I_coh(Phi_AA; tau_A) + (1-p) I_coh(Phi_BB; tau_B) minus the entropy
    excess of the two environment outputs, the block channels sharing the
    Kraus index (the shorter list is padded with zero operators).
    """
    return _block_functional(p, phi_a, tau_a, phi_b, tau_b, mutual=False)


def i_p_functional(p: float, phi_a: KrausChannel, tau_a, phi_b: KrausChannel, tau_b) -> float:
    """Mutual-information analogue of j_p_functional"""
    return _block_functional(p, phi_a, tau_a, phi_b, tau_b, mutual=True)


# Single channels

def _single_objective(ch: KrausChannel, mode: str, settings: SolverSettings) -> BlockObjective:
    return BlockObjective([ch], mode, covariant=is_diagonal_covariant(ch), settings=settings)


def _trivial_input(dims: Sequence[int]) -> Tuple[np.ndarray, List[DensityMatrix]]:
    P = np.full(len(dims), 1.0 / len(dims))
    return P, [DensityMatrix(np.eye(d, dtype=complex) / d) for d in dims]


def q_capacity_channel(ch: KrausChannel, settings: Optional[SolverSettings] = None) -> CapacityResult:
    """Quantum capacity of a single (unblocked) channel"""
    settings = settings or SolverSettings()
    ch = canonicalize(ch)
    verdict = find_degrading_map(ch)

    if find_antidegrading_map(ch).is_degradable:
        P, states = _trivial_input([ch.dim_in])
        return CapacityResult(0.0, P, states, 0.0, 0.0, CapacityMethod.ANTIDEGRADABLE_ZERO, verdict)

    optimum = maximize(_single_objective(ch, COHERENT, settings))
    value = max(optimum.value, 0.0)
    states = [_as_density(tau) for tau in optimum.states]
    if verdict.is_degradable:
        return CapacityResult(value, optimum.probabilities, states, value, value,
                              CapacityMethod.SINGLE_LETTER, verdict, diagnostics=optimum.diagnostics)

    upper = float(np.log2(min(ch.dim_in, ch.dim_out)))
    tight = upper - value <= TIGHT_GAP
    return CapacityResult(value, optimum.probabilities, states, value, upper,
                          CapacityMethod.BOUND_SANDWICH, verdict, tight=tight, diagnostics=optimum.diagnostics)


def qe_capacity_channel(ch: KrausChannel, settings: Optional[SolverSettings] = None) -> CapacityResult:
    """Entanglement-assisted quantum capacity: half the maximal mutual information"""
    settings = settings or SolverSettings()
    ch = canonicalize(ch)
    optimum = maximize(_single_objective(ch, MUTUAL, settings))
    states = [_as_density(tau) for tau in optimum.states]
    return CapacityResult(optimum.value, optimum.probabilities, states, optimum.value, optimum.value,
                          CapacityMethod.SINGLE_LETTER, find_degrading_map(ch),
                          diagnostics=optimum.diagnostics)


# PCDS channels

def _pcds_objective(pc: PCDSChannel, mode: str, settings: SolverSettings) -> BlockObjective:
    pc = canonical_pcds(pc)
    blocks = [diagonal_block(pc, index) for index in range(pc.n_blocks)]
    return BlockObjective(blocks, mode, covariant=is_diagonal_covariant(pc.channel), settings=settings)


def _fixed_candidates(block: KrausChannel) -> List[np.ndarray]:
    """Inputs left invariant by a block: its unique fixed point, otherwise invariant basis states"""
    d = block.dim_in
    if is_scalar_channel(block):
        return [np.eye(d, dtype=complex) / d]
    try:
        state, _ = fixed_point(block)
        return [state.mat]
    except (NonUnique, NumericalFailure):
        pass
    candidates = []
    for i in range(d):
        basis = np.zeros((d, d), dtype=complex)
        basis[i, i] = 1.0
        if np.max(np.abs(apply(block, basis) - basis)) <= ALIGNMENT_TOL:
            candidates.append(basis)
    return candidates


def fixed_point_bound(pc: PCDSChannel, settings: Optional[SolverSettings] = None) -> Optional[Optimum]:
    """
    Lower bound on Q from an invariant input on one block and the maximally
    mixed state on a scalar partner block, maximized over the block weight.

    Returns None when no orientation of a two-block channel qualifies.
    """
    if pc.n_blocks != 2:
        return None
    settings = settings or SolverSettings()
    objective = _pcds_objective(pc, COHERENT, settings)
    pc = canonical_pcds(pc)
    blocks = [diagonal_block(pc, index) for index in range(2)]

    best = None
    for a, b in ((0, 1), (1, 0)):
        if not is_scalar_channel(blocks[b]):
            continue
        d_b = blocks[b].dim_in
        for tau in _fixed_candidates(blocks[a]):
            states = [None, None]
            states[a] = tau
            states[b] = np.eye(d_b, dtype=complex) / d_b
            p, value = maximize_fixed_states(objective, states, settings.audit_points)
            if best is None or value > best.value:
                best = Optimum(value, np.array([p, 1.0 - p]), states, {'fixed_block': a})
    return best


def lemma1_capacity(pc: PCDSChannel) -> Optional[float]:
    """
    log2(d_B + 1) when block B acts as the identity and block A is a
    zero-capacity degradable channel with a pure fixed point whose environment
    output coincides with that of block B. None when any condition fails.
    """
    if pc.n_blocks != 2:
        return None
    pc = canonical_pcds(pc)
    block_a, block_b = diagonal_block(pc, 0), diagonal_block(pc, 1)
    d_b = block_b.dim_in
    if not channels_equal_in_action(block_b, identity_channel(d_b)):
        return None
    if not (find_degrading_map(block_a).is_degradable and find_antidegrading_map(block_a).is_degradable):
        return None
    try:
        state, pure = fixed_point(block_a)
    except (NonUnique, NumericalFailure):
        return None
    if not pure:
        return None

    env_a = apply(complementary(block_a), state.mat)
    env_b = apply(complementary(block_b), np.eye(d_b, dtype=complex) / d_b)
    if np.max(np.abs(env_a - env_b)) > ALIGNMENT_TOL:
        logger.debug("Fixed-point environment output differs from the identity block's")
        return None
    return float(np.log2(d_b + 1))


def _block_results(pc: PCDSChannel, settings: SolverSettings, mutual: bool = False) -> List[CapacityResult]:
    solver = qe_capacity_channel if mutual else q_capacity_channel
    return [solver(diagonal_block(pc, index), settings) for index in range(pc.n_blocks)]


def _bounds_from_blocks(results: Sequence[CapacityResult]) -> Tuple[float, float]:
    lower = max(r.lower_bound for r in results)
    upper = float(np.log2(sum(2.0 ** r.upper_bound for r in results)))
    return lower, upper


def capacity_bounds(pc: PCDSChannel, settings: Optional[SolverSettings] = None) -> Tuple[float, float]:
    """
    max over blocks of Q(Phi_ll) (improved by the fixed-point bound) and
    log2 sum_l 2^Q(Phi_ll).
    """
    settings = settings or SolverSettings()
    results = _block_results(pc, settings)
    for index, result in enumerate(results):
        if not result.tight:
            raise UndeterminedDegradability(
                f"Capacity of block {index} is only bracketed in [{result.lower_bound:.6f}, {result.upper_bound:.6f}]")
    lower, upper = _bounds_from_blocks(results)
    candidate = fixed_point_bound(pc, settings)
    if candidate is not None:
        lower = max(lower, candidate.value)
    return lower, max(upper, lower)


def _result_from_optimum(optimum: Optimum, method: CapacityMethod, verdict: DegradabilityVerdict,
                         lower: float, upper: float, value: Optional[float] = None,
                         tight: bool = True, diagnostics: Optional[Dict[str, Any]] = None) -> CapacityResult:
    info = dict(optimum.diagnostics)
    info.update(diagnostics or {})
    return CapacityResult(
        value=optimum.value if value is None else value,
        optimal_p=_probabilities(optimum.probabilities),
        optimal_block_states=[_as_density(tau) for tau in optimum.states],
        lower_bound=lower,
        upper_bound=upper,
        method=method,
        degradability=verdict,
        tight=tight,
        diagnostics=info,
    )


def _data_processing_bound(pc: PCDSChannel, dominating: Tuple[PCDSChannel, KrausChannel],
                           settings: SolverSettings) -> float:
    """Q(post o reference) <= Q(reference), after checking the factorization in action"""
    reference, post = dominating
    if not channels_equal_in_action(compose(post, reference.channel), pc.channel, DOMINATION_TOL):
        raise ConsistencyError("Channel does not factor as post-processing of the reference channel")
    result = q_capacity_pcds(reference, settings)
    logger.debug(f"Reference channel capacity {result.upper_bound:.9f} ({result.method.value})")
    return result.upper_bound


def q_capacity_pcds(pc: PCDSChannel, settings: Optional[SolverSettings] = None,
                    dominating: Optional[Tuple[PCDSChannel, KrausChannel]] = None,
                    require_tight: bool = False) -> CapacityResult:
    """
    Quantum capacity of a PCDS channel.

    Degradable channels are solved by the block optimizer; antidegradable
    ones have zero capacity. Anything else is bracketed: the lower bound is the
    best of the block capacities, the fixed-point bound and the single-letter
    optimum, the upper bound the best of log2 d_C, the block-sum bound and,
    when `dominating=(reference, post)` is given, the reference capacity.
    """
    settings = settings or SolverSettings()
    verdict = pcds_degradability(pc, seed=settings.seed)
    logger.debug(f"PCDS degradability: {verdict.status.value}")

    if verdict.is_degradable:
        optimum = maximize(_pcds_objective(pc, COHERENT, settings))
        value = optimum.value
        method = CapacityMethod.SINGLE_LETTER
        exact = lemma1_capacity(pc)
        extra = {'lemma1': exact}
        if exact is not None:
            deviation = exact - value
            extra['lemma1_deviation'] = deviation
            if deviation > BOUND_SLACK:
                logger.warning(f"Optimizer stopped {deviation:.3e} below the pure-fixed-point value; using the latter")
                value, method = exact, CapacityMethod.CLOSED_FORM
        return _result_from_optimum(optimum, method, verdict, value, value, value=value, diagnostics=extra)

    if find_antidegrading_map(pc.channel).is_degradable:
        P, states = _trivial_input(pc.partition.dims)
        return CapacityResult(0.0, P, states, 0.0, 0.0, CapacityMethod.ANTIDEGRADABLE_ZERO, verdict)

    single_letter = maximize(_pcds_objective(pc, COHERENT, settings))
    lowers = {'single_letter': single_letter.value}
    uppers = {'dimension': float(np.log2(pc.partition.total))}

    block_lower, block_upper = _bounds_from_blocks(_block_results(pc, settings))
    lowers['blocks'] = block_lower
    uppers['block_sum'] = block_upper

    witness = single_letter
    candidate = fixed_point_bound(pc, settings)
    if candidate is not None:
        lowers['fixed_point'] = candidate.value
        if candidate.value > witness.value:
            witness = candidate
    if dominating is not None:
        uppers['data_processing'] = _data_processing_bound(pc, dominating, settings)

    lower_source = max(lowers, key=lowers.get)
    upper_source = min(uppers, key=uppers.get)
    lower, upper = max(lowers[lower_source], 0.0), uppers[upper_source]
    if upper < lower - BOUND_SLACK:
        raise ConsistencyError(f"Upper bound {upper:.9f} ({upper_source}) below lower bound {lower:.9f} ({lower_source})")
    upper = max(upper, lower)
    tight = upper - lower <= TIGHT_GAP

    diagnostics = {'lower_sources': lowers, 'upper_sources': uppers,
                   'lower_source': lower_source, 'upper_source': upper_source}
    if not tight:
        message = f"Bounds do not close: [{lower:.6f}, {upper:.6f}] from {lower_source}/{upper_source}"
        if require_tight:
            raise UndeterminedDegradability(message)
        logger.warning(message)
    else:
        logger.info(f"Sandwich closed at {lower:.9f} ({lower_source} vs {upper_source})")
    return _result_from_optimum(witness, CapacityMethod.BOUND_SANDWICH, verdict, lower, upper,
                                value=lower, tight=tight, diagnostics=diagnostics)


def qe_capacity_pcds(pc: PCDSChannel, settings: Optional[SolverSettings] = None) -> CapacityResult:
    """
    Entanglement-assisted capacity; single-letter for every channel, so the
    block optimizer result is the answer. The fully dephased channel Phi^(0)
    gives the lower bound, log2 sum_l 2^Q_E(Phi_ll) the upper one.
    """
    settings = settings or SolverSettings()
    optimum = maximize(_pcds_objective(pc, MUTUAL, settings))
    lower = maximize(_pcds_objective(incoherent_part(pc), MUTUAL, settings)).value
    _, upper = _bounds_from_blocks(_block_results(pc, settings, mutual=True))
    value = optimum.value
    if value < lower - BOUND_SLACK or value > upper + BOUND_SLACK:
        raise ConsistencyError(f"Q_E={value:.9f} outside bounds [{lower:.9f}, {upper:.9f}]")
    verdict = pcds_degradability(pc, seed=settings.seed)
    return _result_from_optimum(optimum, CapacityMethod.SINGLE_LETTER, verdict,
                                min(lower, value), max(upper, value),
                                diagnostics={'lower_source': 'incoherent_part', 'upper_source': 'block_sum'})


def q_capacity_multiblock(pc: PCDSChannel, settings: Optional[SolverSettings] = None) -> CapacityResult:
    """Quantum capacity of a degradable n-block channel by ascent over the block weights"""
    settings = settings or SolverSettings()
    verdict = pcds_degradability(pc, seed=settings.seed)
    if not verdict.is_degradable:
        raise UndeterminedDegradability(f"Multi-block formula needs degradable blocks, got {verdict.status.value}")
    optimum = maximize(_pcds_objective(pc, COHERENT, settings), force_simplex=True)
    return _result_from_optimum(optimum, CapacityMethod.SINGLE_LETTER, verdict, optimum.value, optimum.value)


# Closed forms

def _maximize_unit(f, xatol: float = CLOSED_FORM_XATOL) -> Tuple[float, float]:
    """Bounded Brent over [0, 1] with both endpoints checked; returns (x, f(x))"""
    result = minimize_scalar(lambda x: -f(x), bounds=(0.0, 1.0), method='bounded', options={'xatol': xatol})
    best_x, best = float(result.x), float(-result.fun)
    for x in (0.0, 1.0):
        value = f(x)
        if value > best:
            best_x, best = x, value
    return best_x, best


def _dephasing_profile(d_A: int, d_B: int, kappa: complex, weight: float):
    if d_A < 1 or d_B < 1:
        raise DomainError(f"Block dimensions must be positive, got ({d_A}, {d_B})")
    magnitude = abs(complex(kappa))
    if magnitude > 1.0 + 1e-12:
        raise DomainError(f"|kappa|={magnitude} exceeds 1")
    loss = 1.0 - min(magnitude, 1.0) ** 2
    ratio = np.log2(d_A / d_B)

    def profile(p: float) -> float:
        root = np.sqrt(max(0.0, 1.0 - 4.0 * p * (1.0 - p) * loss))
        return binary_entropy(p) + p * ratio - weight * binary_entropy(0.5 * (1.0 + root))

    return profile


def closed_form_dephasing_q(d_A: int, d_B: int, kappa: complex) -> float:
    """Q of the block dephasing channel as a one-dimensional maximization over p"""
    _, value = _maximize_unit(_dephasing_profile(d_A, d_B, kappa, 1.0))
    return float(np.log2(d_B)) + value


def closed_form_dephasing_qe(d_A: int, d_B: int, kappa: complex) -> float:
    _, value = _maximize_unit(_dephasing_profile(d_A, d_B, kappa, 0.5))
    return float(np.log2(d_B)) + value


def _xlog2x(x: float) -> float:
    return float(x * np.log2(x)) if x > 0.0 else 0.0


def combined_channel_q_direct(gamma: float, kappa: complex) -> float:
    """
    Q of the qutrit combined decay/dephasing channel for gamma <= 1/2 over
    diagonal inputs diag(p(1-t), p t, 1-p):

        H2(p) + p H2((1-gamma) t) + l0 log2 l0 + l+ log2 l+ + l- log2 l-

    with l0 = p gamma t and l+- the eigenvalues of the remaining 2x2
    environment block.
    """
    if not -1e-12 <= gamma <= 0.5 + 1e-12:
        raise DomainError(f"Direct evaluation needs gamma in [0, 1/2], got {gamma}")
    gamma = min(max(float(gamma), 0.0), 0.5)
    magnitude = abs(complex(kappa))
    if magnitude > 1.0 + 1e-12:
        raise DomainError(f"|kappa|={magnitude} exceeds 1")
    coherence = min(magnitude, 1.0) ** 2

    def objective(p: float, t: float) -> float:
        x = p * gamma * t
        spread = 4.0 * p * (1.0 - p) * (coherence - 1.0) * (1.0 - gamma * t) + (1.0 - x) ** 2
        root = np.sqrt(max(spread, 0.0))
        l_plus = 0.5 * (1.0 - x + root)
        l_minus = max(0.5 * (1.0 - x - root), 0.0)
        return (binary_entropy(p) + p * binary_entropy((1.0 - gamma) * t)
                + _xlog2x(x) + _xlog2x(l_plus) + _xlog2x(l_minus))

    def profile(p: float) -> float:
        return _maximize_unit(lambda t: objective(p, t))[1]

    _, value, _ = maximize_split(profile)
    return value
