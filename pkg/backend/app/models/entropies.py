"""
Entropic functionals in bits: von Neumann and relative entropy, the min/max
and sandwiched Renyi divergences, and the conditional entropies H, H_min,
H_max and H_0 of bipartite, classical-quantum and classical-classical states.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import entr

from app.config import ENTROPY_SETTINGS, TOLERANCES
from app.exceptions import DimensionMismatchError, SupportViolationError, ValidationError
from app.models.linalg import (
    DensityMatrix,
    as_matrix,
    eig_hermitian,
    fidelity,
    partial_trace,
    purify,
    support_basis,
    support_power,
    trace_norm,
)
from app.models.sdp import AffineExpr, SdpBuilder, SdpSolution, SolverOptions, solve_certified

# Set up logging
logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class ClassicalQuantumState:
    """
    rho_{X E} = sum_i p_i |i><i| (x) rho_E^i
    """
    probs: np.ndarray
    conditional_states: Tuple[DensityMatrix, ...]

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).reshape(-1)
        states = tuple(self.conditional_states)
        if len(states) != probs.size:
            raise DimensionMismatchError(f"{probs.size} probabilities for {len(states)} conditional states")
        if np.any(probs < -TOLERANCES["trace"]) or abs(probs.sum() - 1.0) > TOLERANCES["trace"]:
            raise ValidationError(f"Outcome probabilities must be nonnegative and sum to 1, got {probs}")
        if len({s.dim for s in states}) > 1:
            raise DimensionMismatchError("Conditional states have different dimensions")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "conditional_states", states)

    @property
    def num_outcomes(self) -> int:
        return self.probs.size

    @property
    def dim_e(self) -> int:
        return self.conditional_states[0].dim

    @property
    def dims(self) -> Tuple[int, int]:
        return self.num_outcomes, self.dim_e

    def density_matrix(self) -> DensityMatrix:
        """Block-diagonal matrix with X_A as the first tensor factor"""
        n, d = self.dims
        m = np.zeros((n * d, n * d), dtype=complex)
        for i, (p, state) in enumerate(zip(self.probs, self.conditional_states)):
            m[i * d:(i + 1) * d, i * d:(i + 1) * d] = p * state.matrix
        return DensityMatrix(m)

    def measure_environment(self, povm: Sequence[np.ndarray]) -> "ClassicalClassicalState":
        """Joint distribution q_ij = p_i Tr[E_j rho_E^i] of X_A and a measurement on E"""
        joint = np.array([
            [p * np.real(np.trace(as_matrix(e) @ state.matrix)) for e in povm]
            for p, state in zip(self.probs, self.conditional_states)
        ])
        return ClassicalClassicalState(np.clip(joint, 0.0, None) / np.clip(joint, 0.0, None).sum())


@dataclass(frozen=True, eq=False)
class ClassicalClassicalState:
    """
    Joint distribution q_ij of X_A (rows) and X_E (columns)
    """
    joint: np.ndarray

    def __post_init__(self):
        joint = np.array(self.joint, dtype=float)
        if joint.ndim != 2:
            raise DimensionMismatchError(f"Joint distribution must be a matrix, got shape {joint.shape}")
        if np.any(joint < -TOLERANCES["trace"]) or abs(joint.sum() - 1.0) > TOLERANCES["trace"]:
            raise ValidationError("Joint distribution must be nonnegative with total mass 1")
        joint = np.clip(joint, 0.0, None)
        joint.setflags(write=False)
        object.__setattr__(self, "joint", joint)


@dataclass
class EntropyResult:
    """
    Value of an SDP-backed entropy together with the solver certificate
    """
    value: float
    solution: Optional[SdpSolution] = None
    method: str = ""


def _options(tol: Optional[float]) -> Optional[SolverOptions]:
    return None if tol is None else SolverOptions(tol=tol)


def shannon_entropy(probs) -> float:
    """
    H(p) = -sum p log2 p with 0 log 0 = 0
    """
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    return float(entr(p).sum() / LN2)


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """
    S(rho) = -Tr[rho log2 rho]

    Args:
        rho (DensityMatrix): State

    Returns:
        float: Entropy in bits, within [0, log2 d]
    """
    values = np.linalg.eigvalsh(rho.matrix)
    return min(shannon_entropy(values), float(np.log2(rho.dim)))


def _mass_outside_support(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    values, vectors = eig_hermitian(sigma.matrix)
    kernel = vectors[:, values <= TOLERANCES["rank"]]
    if kernel.shape[1] == 0:
        return 0.0
    return float(np.real(np.trace(kernel.conj().T @ rho.matrix @ kernel)))


def _check_dims(rho: DensityMatrix, sigma: DensityMatrix) -> None:
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"States have dimensions {rho.dim} and {sigma.dim}")


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """
    S(rho||sigma) = Tr[rho log2 rho] - Tr[rho log2 sigma]

    Returns +inf when rho has more than TOLERANCES["support"] weight outside
    the support of sigma.
    """
    _check_dims(rho, sigma)
    if _mass_outside_support(rho, sigma) > TOLERANCES["support"]:
        return np.inf
    values, vectors = eig_hermitian(sigma.matrix)
    mask = values > TOLERANCES["rank"]
    weights = np.real(np.einsum("ij,ik,kj->j", vectors[:, mask].conj(), rho.matrix, vectors[:, mask]))
    cross = float(np.sum(weights * np.log2(values[mask])))
    return max(0.0, -von_neumann_entropy(rho) - cross)


def d_max(rho: DensityMatrix, sigma: DensityMatrix, method: str = "closed_form", tol: Optional[float] = None) -> float:
    """
    Max-divergence D_max(rho||sigma) = log2 min{lambda : rho <= lambda sigma}

    Args:
        rho (DensityMatrix): First state
        sigma (DensityMatrix): Second state
        method (str): "closed_form" (largest generalised eigenvalue on supp(sigma)) or "sdp"
        tol (float, optional): SDP duality-gap tolerance

    Returns:
        float: Divergence in bits, +inf on support violation
    """
    _check_dims(rho, sigma)
    if _mass_outside_support(rho, sigma) > TOLERANCES["support"]:
        return np.inf
    values, basis = support_basis(sigma.matrix)
    rho_s = basis.conj().T @ rho.matrix @ basis

    if method == "closed_form":
        scale = 1.0 / np.sqrt(values)
        lam = float(np.linalg.eigvalsh(scale[:, None] * rho_s * scale[None, :])[-1])
    elif method == "sdp":
        builder = SdpBuilder("d_max")
        lam_var = builder.scalar("lam")
        builder.add_psd(lam_var.kron(np.diag(values)) - rho_s, "lam*sigma - rho")
        builder.minimize(lam_var)
        builder.set_initial("lam", float(np.linalg.eigvalsh(rho_s)[-1]) / values.min() + 1.0)
        lam = solve_certified(builder.build(), _options(tol), "d_max").optimal_value
    else:
        raise ValueError(f"Unknown D_max method {method!r}")
    return float(np.log2(lam))


def d_min(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """
    Min-divergence D_min(rho||sigma) = -log2 F(rho, sigma)
    """
    _check_dims(rho, sigma)
    f = fidelity(rho, sigma)
    if f <= 0.0:
        return np.inf
    return max(0.0, -float(np.log2(f)))


def renyi_divergence(rho: DensityMatrix, sigma: DensityMatrix, alpha: float) -> float:
    """
    Sandwiched Renyi divergence

        D_alpha = log2 Tr[(sigma^{(1-a)/2a} rho sigma^{(1-a)/2a})^a] / (a - 1)

    alpha = 1 gives the relative entropy, alpha = inf gives D_max and
    alpha = 1/2 reproduces D_min.

    Args:
        rho (DensityMatrix): First state
        sigma (DensityMatrix): Second state
        alpha (float): Order, alpha > 0

    Returns:
        float: Divergence in bits (+inf when the sandwiched trace vanishes)
    """
    _check_dims(rho, sigma)
    if not alpha > 0:
        raise ValidationError(f"Renyi order must be positive, got {alpha}")
    if alpha == 1:
        return relative_entropy(rho, sigma)
    if np.isinf(alpha):
        return d_max(rho, sigma)
    if alpha > 1 and _mass_outside_support(rho, sigma) > TOLERANCES["support"]:
        raise SupportViolationError(f"supp(rho) is not contained in supp(sigma); D_alpha undefined for alpha={alpha}")

    power = (1.0 - alpha) / (2.0 * alpha)
    sandwich = support_power(sigma.matrix, power) @ rho.matrix @ support_power(sigma.matrix, power)
    values = np.clip(np.linalg.eigvalsh((sandwich + sandwich.conj().T) / 2), 0.0, None)
    q = float(np.sum(values ** alpha))
    if q <= 0.0:
        return np.inf
    return float(np.log2(q) / (alpha - 1.0))


def conditional_entropy(rho_ab: DensityMatrix, dims: Sequence[int]) -> float:
    """
    H(A|B) = S(rho_AB) - S(rho_B)

    Args:
        rho_ab (DensityMatrix): Bipartite state
        dims (Sequence[int]): (d_A, d_B)

    Returns:
        float: Conditional entropy in bits (negative for entangled states)
    """
    return von_neumann_entropy(rho_ab) - von_neumann_entropy(partial_trace(rho_ab, 1, dims))


def classical_conditional_entropy(cc: ClassicalClassicalState) -> float:
    """
    H(X_A|X_E) of a classical-classical state
    """
    return shannon_entropy(cc.joint.ravel()) - shannon_entropy(cc.joint.sum(axis=0))


def h0_cond(cc: ClassicalClassicalState) -> float:
    """
    H_0(X_A|X_E) = max over outcomes j of X_E of log2 T_j

    T_j counts the outcomes i with amplitude sqrt(q_ij / q_j) above
    TOLERANCES["amplitude"]; columns without mass are ignored.
    """
    joint = cc.joint
    column_mass = joint.sum(axis=0)
    best = 0.0
    for j in np.nonzero(column_mass > 0)[0]:
        amplitudes = np.sqrt(joint[:, j] / column_mass[j])
        count = int(np.count_nonzero(amplitudes > TOLERANCES["amplitude"]))
        if count:
            best = max(best, float(np.log2(count)))
    return best


def _resolve_bipartite(state, dims) -> Tuple[DensityMatrix, Tuple[int, int]]:
    if isinstance(state, ClassicalQuantumState):
        return state.density_matrix(), state.dims
    if dims is None:
        raise DimensionMismatchError("Bipartite dims are required for a DensityMatrix")
    d_a, d_b = (int(d) for d in dims)
    if state.dim != d_a * d_b:
        raise DimensionMismatchError(f"State dimension {state.dim} does not match dims ({d_a}, {d_b})")
    return state, (d_a, d_b)


def h_min_cond_detailed(
    state: Union[ClassicalQuantumState, DensityMatrix],
    dims: Optional[Sequence[int]] = None,
    tol: Optional[float] = None,
) -> EntropyResult:
    """
    Conditional min-entropy as -log2 of min Tr[sigma_B] s.t. I_A (x) sigma_B >= rho_AB

    For a ClassicalQuantumState the constraint splits into sigma_E >= p_i rho_E^i.

    Args:
        state (ClassicalQuantumState or DensityMatrix): State rho_AB
        dims (Sequence[int], optional): (d_A, d_B), required for a DensityMatrix
        tol (float, optional): SDP duality-gap tolerance

    Returns:
        EntropyResult: H_min(A|B) and the solver certificate
    """
    builder = SdpBuilder("h_min")
    if isinstance(state, ClassicalQuantumState):
        sigma = builder.hermitian("sigma", state.dim_e)
        top = 0.0
        for i, (p, rho_i) in enumerate(zip(state.probs, state.conditional_states)):
            if p <= 0:
                continue
            weighted = p * rho_i.matrix
            builder.add_psd(sigma - weighted, f"sigma >= p_{i} rho_{i}")
            top = max(top, float(np.linalg.eigvalsh(weighted)[-1]))
        dim_b, method = state.dim_e, "cq"
    else:
        rho_ab, (d_a, d_b) = _resolve_bipartite(state, dims)
        sigma = builder.hermitian("sigma", d_b)
        builder.add_psd(sigma.kron_left(np.eye(d_a)) - rho_ab.matrix, "I (x) sigma >= rho")
        top = float(np.linalg.eigvalsh(rho_ab.matrix)[-1])
        dim_b, method = d_b, "bipartite"

    builder.minimize(sigma.trace())
    builder.set_initial("sigma", (top + 1.0) * np.eye(dim_b))
    solution = solve_certified(builder.build(), _options(tol), "h_min_cond")
    value = -float(np.log2(solution.optimal_value))
    logger.debug(f"H_min ({method}) = {value:.10g}")
    return EntropyResult(value=value, solution=solution, method=method)


def h_min_cond(
    state: Union[ClassicalQuantumState, DensityMatrix],
    dims: Optional[Sequence[int]] = None,
    tol: Optional[float] = None,
) -> float:
    """
    Conditional min-entropy H_min(A|B) in bits
    """
    return h_min_cond_detailed(state, dims, tol).value


def _h_max_purification(rho_ab: DensityMatrix, d_a: int, d_b: int, tol: Optional[float]) -> EntropyResult:
    # log2 min mu s.t. mu I_B >= Tr_A sigma_AB, sigma_AB (x) I_C >= rho_ABC, sigma_AB >= 0
    psi = purify(rho_ab, trim=True)
    d_c = psi.dim_e
    rho_abc = np.outer(psi.amplitudes, psi.amplitudes.conj())

    builder = SdpBuilder("h_max_purification")
    sigma = builder.hermitian("sigma", d_a * d_b)
    mu = builder.scalar("mu")
    builder.add_psd(mu.kron(np.eye(d_b)) - sigma.partial_trace(1, (d_a, d_b)), "mu I_B >= Tr_A sigma")
    builder.add_psd(sigma.kron(np.eye(d_c)) - rho_abc, "sigma (x) I_C >= rho_ABC")
    builder.add_psd(sigma, "sigma >= 0")
    builder.minimize(mu)
    builder.set_initial("sigma", 2.0 * np.eye(d_a * d_b))
    builder.set_initial("mu", 2.0 * d_a + 1.0)
    solution = solve_certified(builder.build(), _options(tol), "h_max_cond")
    return EntropyResult(value=float(np.log2(solution.optimal_value)), solution=solution, method="purification")


def _fidelity_block(builder: SdpBuilder, name: str, weighted: np.ndarray, sigma_term: AffineExpr) -> AffineExpr:
    """
    Adds [[P', X], [X^dagger, U^dagger Q U]] >= 0 with P' the compression of
    weighted onto its support U; returns Tr X
    """
    values, basis = support_basis(weighted)
    rank = values.size
    x = builder.complex_matrix(name, rank, rank)
    compressed = sigma_term.left_multiply(basis.conj().T).right_multiply(basis)
    builder.add_psd(AffineExpr.block([[np.diag(values), x], [x.H, compressed]]), f"fidelity {name}")
    return x.trace()


def _h_max_fidelity(state, rho_ab: DensityMatrix, d_a: int, d_b: int, tol: Optional[float]) -> EntropyResult:
    # 2 log2 max sum Re Tr X s.t. fidelity blocks, sigma_B >= 0, Tr sigma_B = 1
    builder = SdpBuilder("h_max_fidelity")
    sigma = builder.hermitian("sigma", d_b)
    if isinstance(state, ClassicalQuantumState):
        objective = 0.0
        for i, (p, rho_i) in enumerate(zip(state.probs, state.conditional_states)):
            if p < 1e-14:
                continue
            objective = _fidelity_block(builder, f"x{i}", p * rho_i.matrix, sigma) + objective
    else:
        objective = _fidelity_block(builder, "x", rho_ab.matrix, sigma.kron_left(np.eye(d_a)))
    builder.add_psd(sigma, "sigma >= 0")
    builder.add_equality(sigma.trace(), 1.0)
    builder.maximize(objective)
    builder.set_initial("sigma", np.eye(d_b) / d_b)
    solution = solve_certified(builder.build(), _options(tol), "h_max_cond")
    return EntropyResult(value=2.0 * float(np.log2(solution.optimal_value)), solution=solution, method="fidelity")


def h_max_cond_detailed(
    state: Union[ClassicalQuantumState, DensityMatrix],
    dims: Optional[Sequence[int]] = None,
    method: str = "auto",
    tol: Optional[float] = None,
) -> EntropyResult:
    """
    Conditional max-entropy H_max(A|B) = max_sigma log2 F(rho_AB, I_A (x) sigma_B)

    Args:
        state (ClassicalQuantumState or DensityMatrix): State rho_AB
        dims (Sequence[int], optional): (d_A, d_B), required for a DensityMatrix
        method (str): "purification", "fidelity" or "auto" (purification while
            d_A * d_B * rank(rho_AB) is within ENTROPY_SETTINGS["purification_sdp_max_dim"])
        tol (float, optional): SDP duality-gap tolerance

    Returns:
        EntropyResult: H_max(A|B) and the solver certificate
    """
    rho_ab, (d_a, d_b) = _resolve_bipartite(state, dims)
    if method == "auto":
        rank = int(np.count_nonzero(np.linalg.eigvalsh(rho_ab.matrix) > TOLERANCES["rank"]))
        size = d_a * d_b * rank
        method = "purification" if size <= ENTROPY_SETTINGS["purification_sdp_max_dim"] else "fidelity"
        logger.debug(f"H_max method auto -> {method} (d_A*d_B*rank = {size})")
    if method == "purification":
        return _h_max_purification(rho_ab, d_a, d_b, tol)
    if method == "fidelity":
        return _h_max_fidelity(state, rho_ab, d_a, d_b, tol)
    raise ValueError(f"Unknown H_max method {method!r}")


def h_max_cond(
    state: Union[ClassicalQuantumState, DensityMatrix],
    dims: Optional[Sequence[int]] = None,
    method: str = "auto",
    tol: Optional[float] = None,
) -> float:
    """
    Conditional max-entropy H_max(A|B) in bits
    """
    return h_max_cond_detailed(state, dims, method, tol).value


def guessing_probability_binary(cq: ClassicalQuantumState) -> float:
    """
    Optimal probability of guessing a binary X_A from E: (1 + ||p0 rho0 - p1 rho1||_1) / 2
    """
    if cq.num_outcomes != 2:
        raise DimensionMismatchError(f"Trace-norm guessing formula needs 2 outcomes, got {cq.num_outcomes}")
    (p0, p1), (rho0, rho1) = cq.probs, cq.conditional_states
    return 0.5 * (1.0 + trace_norm(p0 * rho0.matrix - p1 * rho1.matrix))
