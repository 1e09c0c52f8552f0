"""
Coherence measures with respect to the computational basis.

C_r, C_g, C_min and C_max are computed exactly (closed form or certified SDP);
C_min and C_max are computed along two routes, a direct SDP over incoherent
states and the conditional min/max-entropy of the classical-quantum state
obtained by dephasing a purification, and the routes are compared. C_f and
C_0 are exact for qubits and upper bounds from the convex-roof search
otherwise.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from app.config import TOLERANCES
from app.exceptions import DimensionMismatchError, ValidationError
from app.models.convex_roof import ConvexRoofResult, ConvexRoofSearch
from app.models.entropies import (
    ClassicalClassicalState,
    ClassicalQuantumState,
    EntropyResult,
    binary_entropy,
    classical_conditional_entropy,
    conditional_entropy,
    guessing_probability_binary,
    h0_cond,
    h_max_cond_detailed,
    h_min_cond_detailed,
    von_neumann_entropy,
)
from app.models.linalg import DensityMatrix, partial_trace_operator, purify, support_basis
from app.models.sdp import AffineExpr, SdpBuilder, SdpSolution, SolverOptions, solve_certified

# Set up logging
logger = logging.getLogger(__name__)

MEASURES = ("cr", "cg", "cmin", "cmax", "cf", "c0")


@dataclass(frozen=True)
class DephasingBasisSpec:
    """
    Computational basis {|i>} of dimension d
    """
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValidationError(f"Dephasing basis needs d >= 2, got {self.dim}")


def dephase(rho: DensityMatrix) -> DensityMatrix:
    """
    Delta(rho) = sum_i |i><i| rho |i><i|
    """
    return DensityMatrix(np.diag(np.diag(rho.matrix)))


def dephasing_isometry(dim: int) -> np.ndarray:
    """
    V = sum_i |i>_{X_A} (x) |i><i|_A, a (d^2 x d) isometry mapping A to X_A A

    Args:
        dim (int): Dimension d of A

    Returns:
        np.ndarray: V with V[i*d + i, i] = 1
    """
    spec = DephasingBasisSpec(dim)
    v = np.zeros((spec.dim * spec.dim, spec.dim), dtype=complex)
    idx = np.arange(spec.dim)
    v[idx * spec.dim + idx, idx] = 1.0
    return v


def _cq_from_rows(rows: np.ndarray) -> ClassicalQuantumState:
    probs = np.sum(np.abs(rows) ** 2, axis=1)
    dim_e = rows.shape[1]
    states = []
    for p, row in zip(probs, rows):
        if p > 0:
            states.append(DensityMatrix(np.outer(row, row.conj()) / p))
        else:
            states.append(DensityMatrix.maximally_mixed(dim_e))
    return ClassicalQuantumState(probs / probs.sum(), tuple(states))


def build_cq_state(rho: DensityMatrix, environment_isometry: Optional[np.ndarray] = None) -> ClassicalQuantumState:
    """
    rho_{X_A E} = Delta_A(|psi><psi|_AE) for the canonical purification of rho

    Args:
        rho (DensityMatrix): State rho_A
        environment_isometry (np.ndarray, optional): Isometry W applied on E
            before dephasing

    Returns:
        ClassicalQuantumState: p_i = rho_ii and rho_E^i proportional to
            (<i| (x) I)|psi><psi|(|i> (x) I); outcomes with p_i = 0 carry I/d_E
    """
    psi = purify(rho)
    if environment_isometry is not None:
        psi = psi.apply_environment_isometry(environment_isometry)
    return _cq_from_rows(psi.coefficients())


def cq_state_via_isometry(rho: DensityMatrix) -> ClassicalQuantumState:
    """
    rho_{X_A E} = Tr_A[(V (x) I_E)|psi><psi|(V (x) I_E)^dagger] computed literally
    """
    d = rho.dim
    psi = purify(rho)
    lifted = np.kron(dephasing_isometry(d), np.eye(psi.dim_e)) @ psi.amplitudes
    rho_xe = partial_trace_operator(np.outer(lifted, lifted.conj()), (0, 2), (d, d, psi.dim_e))
    blocks = [rho_xe[i * psi.dim_e:(i + 1) * psi.dim_e, i * psi.dim_e:(i + 1) * psi.dim_e] for i in range(d)]
    probs = np.array([np.real(np.trace(b)) for b in blocks])
    states = tuple(
        DensityMatrix(b / p) if p > 0 else DensityMatrix.maximally_mixed(psi.dim_e) for b, p in zip(blocks, probs)
    )
    return ClassicalQuantumState(probs / probs.sum(), states)


def c_r(rho: DensityMatrix) -> float:
    """
    Relative entropy of coherence S(Delta(rho)) - S(rho)
    """
    if rho.is_incoherent():
        return 0.0
    return max(0.0, von_neumann_entropy(dephase(rho)) - von_neumann_entropy(rho))


def c_r_conditional(rho: DensityMatrix) -> float:
    """
    C_r as the conditional entropy H(X_A|E) of the dephased purification
    """
    cq = build_cq_state(rho)
    return max(0.0, conditional_entropy(cq.density_matrix(), cq.dims))


@dataclass
class RouteComparison:
    """
    Values of one measure along the direct and the conditional-entropy routes
    """
    measure: str
    direct: float
    conditional: float
    direct_solution: Optional[SdpSolution] = None
    conditional_solution: Optional[SdpSolution] = None

    @property
    def disagreement(self) -> float:
        return abs(self.direct - self.conditional)

    def diagnostics(self) -> Dict[str, Any]:
        return {
            "direct": self.direct_solution.summary() if self.direct_solution else None,
            "conditional": self.conditional_solution.summary() if self.conditional_solution else None,
        }


def _options(tol: Optional[float]) -> Optional[SolverOptions]:
    return None if tol is None else SolverOptions(tol=tol)


def _c_min_direct(rho: DensityMatrix, tol: Optional[float]) -> EntropyResult:
    # -2 log2 max Re Tr X s.t. [[rho', X], [X^dagger, U^dagger delta U]] >= 0, delta diagonal >= 0, Tr delta = 1
    d = rho.dim
    values, basis = support_basis(rho.matrix)
    rank = values.size

    builder = SdpBuilder("c_min_direct")
    delta = builder.diagonal("delta", d)
    x = builder.complex_matrix("x", rank, rank)
    compressed = delta.left_multiply(basis.conj().T).right_multiply(basis)
    builder.add_psd(AffineExpr.block([[np.diag(values), x], [x.H, compressed]]), "fidelity")
    builder.add_psd(delta, "delta >= 0")
    builder.add_equality(delta.trace(), 1.0)
    builder.maximize(x.trace())
    builder.set_initial("delta", np.eye(d) / d)
    solution = solve_certified(builder.build(), _options(tol), "c_min direct")
    return EntropyResult(value=max(0.0, -2.0 * float(np.log2(solution.optimal_value))), solution=solution, method="direct")


def _c_max_direct(rho: DensityMatrix, tol: Optional[float]) -> EntropyResult:
    # log2 min Tr D s.t. D - rho >= 0 with D diagonal
    d = rho.dim
    builder = SdpBuilder("c_max_direct")
    diag = builder.diagonal("d", d)
    builder.add_psd(diag - rho.matrix, "D >= rho")
    builder.minimize(diag.trace())
    builder.set_initial("d", (float(np.linalg.eigvalsh(rho.matrix)[-1]) + 1.0) * np.eye(d))
    solution = solve_certified(builder.build(), _options(tol), "c_max direct")
    return EntropyResult(value=max(0.0, float(np.log2(solution.optimal_value))), solution=solution, method="direct")


def c_min_routes(rho: DensityMatrix, tol: Optional[float] = None) -> RouteComparison:
    """
    C_min by the direct fidelity SDP and as H_min(X_A|E) of build_cq_state(rho)
    """
    if rho.is_incoherent():
        return RouteComparison("c_min", 0.0, 0.0)
    direct = _c_min_direct(rho, tol)
    conditional = h_min_cond_detailed(build_cq_state(rho), tol=tol)
    comparison = RouteComparison(
        "c_min", direct.value, max(0.0, conditional.value), direct.solution, conditional.solution
    )
    logger.debug(f"C_min routes: direct={comparison.direct:.10g}, conditional={comparison.conditional:.10g}")
    return comparison


def c_max_routes(rho: DensityMatrix, tol: Optional[float] = None, method: str = "auto") -> RouteComparison:
    """
    C_max by the direct diagonal-majorant SDP and as H_max(X_A|E) of build_cq_state(rho)
    """
    if rho.is_incoherent():
        return RouteComparison("c_max", 0.0, 0.0)
    direct = _c_max_direct(rho, tol)
    conditional = h_max_cond_detailed(build_cq_state(rho), method=method, tol=tol)
    comparison = RouteComparison(
        "c_max", direct.value, max(0.0, conditional.value), direct.solution, conditional.solution
    )
    logger.debug(f"C_max routes: direct={comparison.direct:.10g}, conditional={comparison.conditional:.10g}")
    return comparison


def c_min(rho: DensityMatrix, route: str = "direct", tol: Optional[float] = None) -> float:
    """
    C_min(rho) = min over incoherent delta of D_min(rho||delta)

    Args:
        rho (DensityMatrix): State
        route (str): "direct" (fidelity SDP) or "conditional" (H_min of the cq-state)
        tol (float, optional): SDP duality-gap tolerance

    Returns:
        float: C_min in bits
    """
    if rho.is_incoherent():
        return 0.0
    if route == "direct":
        return _c_min_direct(rho, tol).value
    if route == "conditional":
        return max(0.0, h_min_cond_detailed(build_cq_state(rho), tol=tol).value)
    raise ValueError(f"Unknown route {route!r}")


def c_g(rho: DensityMatrix, tol: Optional[float] = None) -> float:
    """
    Geometric coherence 1 - max_delta F(rho, delta) = 1 - 2^(-C_min)
    """
    return 1.0 - 2.0 ** (-c_min(rho, tol=tol))


def c_max(rho: DensityMatrix, route: str = "direct", tol: Optional[float] = None) -> float:
    """
    C_max(rho) = min over incoherent delta of D_max(rho||delta)

    Args:
        rho (DensityMatrix): State
        route (str): "direct" (diagonal majorant SDP) or "conditional" (H_max of the cq-state)
        tol (float, optional): SDP duality-gap tolerance

    Returns:
        float: C_max in bits
    """
    if rho.is_incoherent():
        return 0.0
    if route == "direct":
        return _c_max_direct(rho, tol).value
    if route == "conditional":
        return max(0.0, h_max_cond_detailed(build_cq_state(rho), tol=tol).value)
    raise ValueError(f"Unknown route {route!r}")


def coherence_rank(psi, tol: Optional[float] = None) -> int:
    """
    Number of basis amplitudes of a normalised pure state above the threshold
    """
    tol = TOLERANCES["amplitude"] if tol is None else tol
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return int(np.count_nonzero(np.abs(psi / np.linalg.norm(psi)) > tol))


def _require_qubit(rho: DensityMatrix) -> None:
    if rho.dim != 2:
        raise DimensionMismatchError(f"Qubit formula needs d = 2, got {rho.dim}")


def qubit_coherence_of_formation(rho: DensityMatrix) -> float:
    """
    C_f of a qubit: h((1 + sqrt(1 - 4 |rho_01|^2)) / 2)
    """
    _require_qubit(rho)
    off = min(0.25, float(abs(rho.matrix[0, 1])) ** 2)
    return binary_entropy((1.0 + np.sqrt(1.0 - 4.0 * off)) / 2.0)


def qubit_c0(rho: DensityMatrix) -> float:
    """
    C_0 of a qubit: 0 for diagonal states, 1 otherwise
    """
    _require_qubit(rho)
    return 0.0 if abs(rho.matrix[0, 1]) <= TOLERANCES["off_diagonal"] else 1.0


@dataclass
class ConvexRoofValue:
    """
    Convex-roof measure value; exact is False for heuristic upper bounds
    """
    value: float
    exact: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "exact": self.exact}


def _convex_roof(rho: DensityMatrix, search: Optional[ConvexRoofSearch]) -> ConvexRoofResult:
    return (search or ConvexRoofSearch()).run(rho)


def c_f(rho: DensityMatrix, search: Optional[ConvexRoofSearch] = None) -> ConvexRoofValue:
    """
    Coherence of formation min sum_j p_j S(Delta(|psi_j><psi_j|))

    Args:
        rho (DensityMatrix): State
        search (ConvexRoofSearch, optional): Search settings for d > 2

    Returns:
        ConvexRoofValue: Exact for qubits, pure and incoherent states; an upper bound otherwise
    """
    if rho.is_incoherent():
        return ConvexRoofValue(0.0, True)
    if rho.dim == 2:
        return ConvexRoofValue(qubit_coherence_of_formation(rho), True)
    result = _convex_roof(rho, search)
    return ConvexRoofValue(result.formation, result.exact)


def c_0(rho: DensityMatrix, search: Optional[ConvexRoofSearch] = None) -> ConvexRoofValue:
    """
    C_0 = min over decompositions of max_j log2 T_j

    T_j counts amplitudes of psi_j with magnitude above TOLERANCES["amplitude"],
    so the value jumps when an amplitude crosses that threshold.
    """
    if rho.is_incoherent():
        return ConvexRoofValue(0.0, True)
    if rho.dim == 2:
        return ConvexRoofValue(qubit_c0(rho), True)
    result = _convex_roof(rho, search)
    return ConvexRoofValue(result.zero, result.exact)


def classical_adversary_entropy(
    rho: DensityMatrix,
    alpha_tag: str = "vn",
    strategy_budget: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    """
    Minimum over sampled rank-one measurements M_E on the purifying system of
    H(X_A|X_E) ("vn") or H_0(X_A|X_E) ("zero")

    Args:
        rho (DensityMatrix): State
        alpha_tag (str): "vn" or "zero"
        strategy_budget (int, optional): Number of search restarts
        seed (int, optional): Search seed

    Returns:
        float: Entropy of the best classical-classical state found
    """
    if alpha_tag not in ("vn", "zero"):
        raise ValueError(f"Unknown entropy tag {alpha_tag!r}")
    search = ConvexRoofSearch()
    if strategy_budget is not None:
        search = replace(search, restarts=strategy_budget)
    if seed is not None:
        search = replace(search, seed=seed)
    result = search.run(rho)
    if alpha_tag == "vn":
        return classical_conditional_entropy(ClassicalClassicalState(result.formation_decomposition.joint_distribution()))
    return h0_cond(ClassicalClassicalState(result.zero_decomposition.joint_distribution()))


def p_guess(cq: ClassicalQuantumState, tol: Optional[float] = None) -> float:
    """
    Guessing probability 2^(-H_min(X_A|E)); binary registers are checked
    against the trace-norm formula
    """
    value = 2.0 ** (-h_min_cond_detailed(cq, tol=tol).value)
    if cq.num_outcomes == 2:
        oracle = guessing_probability_binary(cq)
        if abs(oracle - value) > 1e-6:
            logger.warning(f"p_guess SDP value {value:.10g} differs from trace-norm value {oracle:.10g}")
    return value


def p_secr(cq: ClassicalQuantumState, tol: Optional[float] = None) -> float:
    """
    Secrecy p_secr = |X_A| max_sigma F(rho_XE, I/|X_A| (x) sigma) = 2^H_max(X_A|E)
    """
    return 2.0 ** h_max_cond_detailed(cq, tol=tol).value


@dataclass
class CoherenceReport:
    """
    Measures of one state, the routes used and solver diagnostics
    """
    dim: int
    measures: List[str]
    c_r: Optional[float] = None
    c_g: Optional[float] = None
    c_min: Optional[float] = None
    c_max: Optional[float] = None
    c_f: Optional[ConvexRoofValue] = None
    c_0: Optional[ConvexRoofValue] = None
    route_disagreement: float = 0.0
    routes: Dict[str, Dict[str, float]] = field(default_factory=dict)
    solver_diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return self.route_disagreement > TOLERANCES["route_flag"]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "measures": list(self.measures),
            "c_r": self.c_r,
            "c_g": self.c_g,
            "c_min": self.c_min,
            "c_max": self.c_max,
            "c_f": self.c_f.to_dict() if self.c_f else None,
            "c_0": self.c_0.to_dict() if self.c_0 else None,
            "route_disagreement": self.route_disagreement,
            "flagged": self.flagged,
            "routes": self.routes,
            "solver_diagnostics": self.solver_diagnostics,
        }


def parse_measures(measures: Optional[Iterable[str]]) -> List[str]:
    """
    Normalise a measure selection to the canonical order, rejecting unknown names
    """
    if measures is None:
        return list(MEASURES)
    requested = {m.strip().lower() for m in measures if m.strip()}
    unknown = requested - set(MEASURES)
    if unknown:
        raise ValidationError(f"Unknown measures {sorted(unknown)}; choose from {', '.join(MEASURES)}")
    return [m for m in MEASURES if m in requested]


def compute_report(
    rho: DensityMatrix,
    measures: Optional[Iterable[str]] = None,
    allow_heuristic: bool = False,
    seed: Optional[int] = None,
    tol: Optional[float] = None,
    search: Optional[ConvexRoofSearch] = None,
) -> CoherenceReport:
    """
    Compute the requested measures of one state

    Args:
        rho (DensityMatrix): State
        measures (Iterable[str], optional): Subset of MEASURES, all by default
        allow_heuristic (bool): Permit convex-roof upper bounds for d > 2
        seed (int, optional): Seed of the convex-roof search
        tol (float, optional): SDP duality-gap tolerance
        search (ConvexRoofSearch, optional): Search settings

    Returns:
        CoherenceReport: Report with route comparison and solver diagnostics
    """
    selected = parse_measures(measures)
    report = CoherenceReport(dim=rho.dim, measures=selected)
    disagreements = [0.0]

    if "cr" in selected:
        report.c_r = c_r(rho)
        conditional = c_r_conditional(rho)
        report.routes["c_r"] = {"closed_form": report.c_r, "conditional": conditional}
        disagreements.append(abs(report.c_r - conditional))

    if "cmin" in selected or "cg" in selected:
        comparison = c_min_routes(rho, tol)
        report.c_min = comparison.direct
        report.c_g = 1.0 - 2.0 ** (-comparison.direct)
        report.routes["c_min"] = {"direct": comparison.direct, "conditional": comparison.conditional}
        report.solver_diagnostics["c_min"] = comparison.diagnostics()
        disagreements.append(comparison.disagreement)
        if "cmin" not in selected:
            report.c_min = None
        if "cg" not in selected:
            report.c_g = None

    if "cmax" in selected:
        comparison = c_max_routes(rho, tol)
        report.c_max = comparison.direct
        report.routes["c_max"] = {"direct": comparison.direct, "conditional": comparison.conditional}
        report.solver_diagnostics["c_max"] = comparison.diagnostics()
        disagreements.append(comparison.disagreement)

    roof = [m for m in ("cf", "c0") if m in selected]
    if roof:
        needs_search = rho.dim > 2 and not rho.is_incoherent()
        if needs_search and not allow_heuristic:
            raise ValidationError(
                f"{', '.join(roof)} for d = {rho.dim} are heuristic upper bounds; pass allow_heuristic to compute them"
            )
        if needs_search:
            search = search or ConvexRoofSearch()
            if seed is not None:
                search = replace(search, seed=seed)
            result = search.run(rho)
            report.solver_diagnostics["convex_roof"] = {
                "restarts": result.restarts,
                "evaluations": result.evaluations,
                "exact": result.exact,
            }
            if "cf" in selected:
                report.c_f = ConvexRoofValue(result.formation, result.exact)
            if "c0" in selected:
                report.c_0 = ConvexRoofValue(result.zero, result.exact)
        else:
            if "cf" in selected:
                report.c_f = c_f(rho)
            if "c0" in selected:
                report.c_0 = c_0(rho)

    report.route_disagreement = float(max(disagreements))
    if report.flagged:
        logger.warning(f"Route disagreement {report.route_disagreement:.3e} exceeds {TOLERANCES['route_flag']:.0e}")
    return report
