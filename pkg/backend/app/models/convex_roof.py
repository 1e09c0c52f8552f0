"""
Heuristic search over pure-state decompositions for the convex-roof measures.

Every decomposition {p_j, |psi_j>} of rho arises from an isometry G (k x r)
acting on the purifying system: psi~_j = sum_l G[j, l] m_l, where m_l are the
columns of M = U sqrt(Lambda) (trimmed to the support). The search draws G as
the polar factor of a free complex matrix and runs Powell descent on the
von Neumann objective sum_j p_j S(Delta(psi_j)). Each restart then runs a
depth-first rank reduction that peels off vectors of the range supported on as
few basis states as possible, which reaches the exactly sparse decompositions
that a continuous descent only approaches. The zero-entropy objective
max_j log2 T_j is evaluated on every candidate of both stages, so both minima are
upper bounds on their convex roofs and the formation bound never exceeds the
zero-entropy bound.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import entr

from app.config import CONVEX_ROOF_SETTINGS, TOLERANCES
from app.exceptions import ValidationError
from app.models.linalg import DensityMatrix, purify

# Set up logging
logger = logging.getLogger(__name__)

# weights below this are dropped from a decomposition
_WEIGHT_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class ConvexRoofDecomposition:
    """
    Pure-state decomposition rho = sum_j p_j |psi_j><psi_j|
    """
    weights: np.ndarray
    states: np.ndarray  # (k, d), rows normalised

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > TOLERANCES["trace"]:
            raise ValidationError("Decomposition weights must be nonnegative and sum to 1")

    @classmethod
    def from_vectors(cls, vectors: np.ndarray) -> "ConvexRoofDecomposition":
        """Build from unnormalised vectors psi~_j (rows)"""
        weights = np.sum(np.abs(vectors) ** 2, axis=1)
        keep = weights > _WEIGHT_FLOOR
        states = vectors[keep] / np.sqrt(weights[keep])[:, None]
        return cls(weights[keep] / weights[keep].sum(), states)

    def density_matrix(self) -> np.ndarray:
        return np.einsum("j,ji,jk->ik", self.weights, self.states, self.states.conj())

    def coherence_ranks(self) -> np.ndarray:
        return np.count_nonzero(np.abs(self.states) > TOLERANCES["amplitude"], axis=1)

    def joint_distribution(self) -> np.ndarray:
        """q_ij = p_j |a_ji|^2, rows X_A (basis index) and columns X_E (element)"""
        return (self.weights[:, None] * np.abs(self.states) ** 2).T


def decomposition_objectives(vectors: np.ndarray) -> Tuple[float, float]:
    """
    Objectives of the decomposition given by unnormalised vectors (rows)

    Returns:
        Tuple[float, float]: (sum_j p_j S(Delta(psi_j)), max_j log2 T_j) in bits
    """
    power = np.abs(vectors) ** 2
    weights = power.sum(axis=1)
    mask = weights > _WEIGHT_FLOOR
    q = power[mask] / weights[mask, None]
    formation = float(np.sum(weights[mask] * entr(q).sum(axis=1)) / np.log(2.0))
    counts = np.count_nonzero(np.sqrt(q) > TOLERANCES["amplitude"], axis=1)
    zero = float(np.log2(max(int(counts.max(initial=1)), 1)))
    return formation, zero


def _null_space(a: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of a, absolute singular-value cutoff"""
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.count_nonzero(s > tol))
    return vh[rank:].conj().T


def polar_isometry(theta: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """
    Isometry (rows x cols) from the polar factor of the complex matrix
    theta[:rows*cols] + i theta[rows*cols:]
    """
    size = rows * cols
    a = (theta[:size] + 1j * theta[size:]).reshape(rows, cols)
    u, _, vh = np.linalg.svd(a, full_matrices=False)
    return u @ vh


@dataclass
class ConvexRoofResult:
    """
    Best decompositions found for both objectives
    """
    formation: float
    zero: float
    formation_decomposition: ConvexRoofDecomposition
    zero_decomposition: ConvexRoofDecomposition
    formation_isometry: Optional[np.ndarray] = None
    exact: bool = False
    evaluations: int = 0
    restarts: int = 0

    def povm(self) -> List[np.ndarray]:
        """
        Rank-one measurement on the trimmed purifying system that induces the
        formation decomposition: E_j = |f_j><f_j| with f_j = conj(G[j, :])
        """
        if self.formation_isometry is None:
            raise ValueError("No isometry recorded for this result")
        return [np.outer(row.conj(), row) for row in self.formation_isometry]


@dataclass
class _Tracker:
    formation: float = np.inf
    zero: float = np.inf
    formation_vectors: Optional[np.ndarray] = None
    zero_vectors: Optional[np.ndarray] = None
    formation_isometry: Optional[np.ndarray] = None
    evaluations: int = 0

    def record(self, vectors: np.ndarray, isometry: np.ndarray) -> float:
        formation, zero = decomposition_objectives(vectors)
        self.evaluations += 1
        if formation < self.formation:
            self.formation, self.formation_vectors, self.formation_isometry = formation, vectors, isometry
        if zero < self.zero:
            self.zero, self.zero_vectors = zero, vectors
        return formation


@dataclass
class ConvexRoofSearch:
    """
    Random-restart Powell search over decompositions of size r..max_size
    """
    restarts: int = field(default_factory=lambda: CONVEX_ROOF_SETTINGS["restarts"])
    tol: float = field(default_factory=lambda: CONVEX_ROOF_SETTINGS["tol"])
    max_evaluations: int = field(default_factory=lambda: CONVEX_ROOF_SETTINGS["max_evaluations"])
    max_workers: int = field(default_factory=lambda: CONVEX_ROOF_SETTINGS["max_workers"])
    seed: int = field(default_factory=lambda: CONVEX_ROOF_SETTINGS["seed"])
    max_size: Optional[int] = field(default_factory=lambda: CONVEX_ROOF_SETTINGS["max_size"])
    sparse_nodes: int = field(default_factory=lambda: CONVEX_ROOF_SETTINGS["sparse_nodes"])

    def _restart(self, coefficients: np.ndarray, size: int, seed: np.random.SeedSequence) -> _Tracker:
        rank = coefficients.shape[1]
        rng = np.random.default_rng(seed)
        tracker = _Tracker()

        def objective(theta: np.ndarray) -> float:
            g = polar_isometry(theta, size, rank)
            return tracker.record(g @ coefficients.T, g)

        theta0 = rng.standard_normal(2 * size * rank)
        objective(theta0)
        result = minimize(
            objective,
            theta0,
            method="Powell",
            options={"xtol": self.tol, "ftol": self.tol, "maxfev": self.max_evaluations},
        )
        objective(result.x)
        if self.sparse_nodes > 0:
            self._reduce_rank(coefficients, rng, tracker)
        return tracker

    def _reduce_rank(self, coefficients: np.ndarray, rng: np.random.Generator, tracker: _Tracker) -> None:
        """
        Depth-first rank reduction towards sparse decompositions

        With rho = B B^dagger, a unit c whose image B c vanishes outside a basis
        subset S gives a vector supported on S, and rho - (B c)(B c)^dagger =
        B Q Q^dagger B^dagger with Q an orthonormal basis of c-perp. The peeled
        vectors therefore always sum back to rho. Each level peels a vector of
        the smallest feasible support and backtracks while the widest vector so
        far can still beat the best complete decomposition.

        Args:
            coefficients (np.ndarray): Purification coefficients M (d x r)
            rng (np.random.Generator): Order of subsets and mixing inside kernels
            tracker (_Tracker): Receives every complete decomposition
        """
        dim, rank = coefficients.shape
        budget = {"nodes": self.sparse_nodes, "best": dim}

        def visit(frame: np.ndarray, rows: List[np.ndarray], widest: int) -> None:
            if frame.shape[1] == 0:
                isometry = np.array(rows)
                tracker.record(isometry @ coefficients.T, isometry)
                budget["best"] = min(budget["best"], widest)
                return
            if budget["nodes"] <= 0:
                return
            budget["nodes"] -= 1
            current = coefficients @ frame
            for size in range(1, budget["best"]):
                subsets = list(combinations(range(dim), size))
                feasible = False
                for index in rng.permutation(len(subsets)):
                    outside = [i for i in range(dim) if i not in subsets[index]]
                    kernel = _null_space(current[outside], TOLERANCES["support"])
                    if kernel.shape[1] == 0:
                        continue
                    feasible = True
                    mix = rng.standard_normal(kernel.shape[1]) + 1j * rng.standard_normal(kernel.shape[1])
                    c = kernel @ (mix / np.linalg.norm(mix))
                    vector = current @ c
                    width = int(np.count_nonzero(np.abs(vector) > TOLERANCES["amplitude"] * np.linalg.norm(vector)))
                    if max(widest, width) >= budget["best"]:
                        continue
                    remainder = _null_space(c.conj()[None, :], TOLERANCES["support"])
                    visit(frame @ remainder, rows + [frame @ c], max(widest, width))
                if feasible:
                    return

        visit(np.eye(rank, dtype=complex), [], 0)

    def run(self, rho: DensityMatrix) -> ConvexRoofResult:
        """
        Search for decompositions of rho minimising both convex-roof objectives

        Args:
            rho (DensityMatrix): State

        Returns:
            ConvexRoofResult: Upper bounds and their decompositions; exact is set
                when the state is pure or incoherent
        """
        psi = purify(rho, trim=True)
        coefficients = psi.coefficients()  # (d, r)
        dim, rank = coefficients.shape

        # eigendecomposition (G = I) is always a candidate
        base = _Tracker()
        base.record(coefficients.T.copy(), np.eye(rank, dtype=complex))

        if rank == 1 or rho.is_incoherent():
            if rank > 1:
                # incoherent states decompose into basis states
                vectors = np.diag(np.sqrt(np.clip(np.real(np.diag(rho.matrix)), 0.0, None))).astype(complex)
                base.record(vectors, None)
            return self._result([base], exact=True)

        max_size = self.max_size or dim * dim
        sizes = list(range(rank, max(rank, max_size) + 1))
        seeds = np.random.SeedSequence(self.seed).spawn(self.restarts)
        jobs = [(sizes[i % len(sizes)], seeds[i]) for i in range(self.restarts)]
        logger.info(f"Convex-roof search: d={dim}, rank={rank}, {self.restarts} restarts, sizes {sizes[0]}..{sizes[-1]}")

        if self.max_workers > 1:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                trackers = list(executor.map(lambda job: self._restart(coefficients, *job), jobs))
        else:
            trackers = [self._restart(coefficients, size, seed) for size, seed in jobs]
        return self._result([base] + trackers, exact=False)

    def _result(self, trackers: List[_Tracker], exact: bool) -> ConvexRoofResult:
        best_f = min(trackers, key=lambda t: t.formation)
        best_z = min(trackers, key=lambda t: t.zero)
        result = ConvexRoofResult(
            formation=best_f.formation,
            zero=best_z.zero,
            formation_decomposition=ConvexRoofDecomposition.from_vectors(best_f.formation_vectors),
            zero_decomposition=ConvexRoofDecomposition.from_vectors(best_z.zero_vectors),
            formation_isometry=best_f.formation_isometry,
            exact=exact,
            evaluations=sum(t.evaluations for t in trackers),
            restarts=len(trackers) - 1,
        )
        logger.debug(
            f"Convex-roof bounds: formation={result.formation:.10g}, zero={result.zero:.10g}, "
            f"{result.evaluations} evaluations"
        )
        return result
