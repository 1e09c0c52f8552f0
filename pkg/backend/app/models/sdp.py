"""
Small dense semidefinite-program solver.

Problems are stated in inequality form over a real decision vector x:

    minimize    c^T x
    subject to  F0_k + sum_i x_i F_ki  >= 0   for every PSD block k
                A x = b

with dual

    maximize    -sum_k Tr(F0_k Z_k) + b^T y
    subject to  sum_k Tr(F_ki Z_k) + (A^T y)_i = c_i,   Z_k >= 0.

The solver is an infeasible-start primal-dual path-following method using
the HKM search direction with a Mehrotra predictor-corrector. Complex
Hermitian LMIs are compiled to real symmetric ones with hermitian_embed,
so the entropy layer can state its programs over complex matrices through
SdpBuilder / AffineExpr.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from app.config import SOLVER_SETTINGS, TOLERANCES
from app.exceptions import (
    DimensionMismatchError,
    NonHermitianError,
    SolverFailureError,
    ValidationError,
)
from app.models.linalg import check_hermitian, partial_trace_operator

# Set up logging
logger = logging.getLogger(__name__)


class SolverStatus(str, Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


def _sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def _embed_stack(stack: np.ndarray) -> np.ndarray:
    re, im = stack.real, stack.imag
    top = np.concatenate([re, -im], axis=2)
    bottom = np.concatenate([im, re], axis=2)
    return np.concatenate([top, bottom], axis=1)


def hermitian_embed(h) -> np.ndarray:
    """
    Real symmetric embedding [[Re h, -Im h], [Im h, Re h]] of a Hermitian matrix

    h >= 0 iff the embedding is >= 0; the spectrum of the embedding is that of h
    with every multiplicity doubled.

    Args:
        h: Hermitian matrix of dimension d

    Returns:
        np.ndarray: Real symmetric matrix of dimension 2d
    """
    return _embed_stack(check_hermitian(h)[None])[0]


def _basis_scalar() -> np.ndarray:
    return np.ones((1, 1, 1), dtype=complex)


def _basis_diagonal(dim: int) -> np.ndarray:
    basis = np.zeros((dim, dim, dim), dtype=complex)
    basis[np.arange(dim), np.arange(dim), np.arange(dim)] = 1.0
    return basis


def _basis_hermitian(dim: int) -> np.ndarray:
    upper = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    basis = np.zeros((dim + 2 * len(upper), dim, dim), dtype=complex)
    basis[np.arange(dim), np.arange(dim), np.arange(dim)] = 1.0
    for k, (i, j) in enumerate(upper):
        re, im = dim + k, dim + len(upper) + k
        basis[re, i, j] = basis[re, j, i] = 1.0
        basis[im, i, j] = 1j
        basis[im, j, i] = -1j
    return basis


def _basis_complex(rows: int, cols: int) -> np.ndarray:
    size = rows * cols
    basis = np.zeros((2 * size, rows, cols), dtype=complex)
    r, c = np.divmod(np.arange(size), cols)
    basis[np.arange(size), r, c] = 1.0
    basis[size + np.arange(size), r, c] = 1j
    return basis


@dataclass(frozen=True, eq=False)
class Variable:
    """
    Matrix variable V = sum_k x[offset + k] * basis[k]
    """
    name: str
    kind: str
    offset: int
    basis: np.ndarray

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.basis.shape[1], self.basis.shape[2]

    def coordinates(self, value) -> np.ndarray:
        """Decision coordinates of a matrix value (the basis is orthogonal)"""
        value = np.broadcast_to(np.asarray(value, dtype=complex), self.shape)
        norms = np.einsum("kij,kij->k", self.basis.conj(), self.basis).real
        return np.einsum("kij,ij->k", self.basis.conj(), value).real / norms

    def assemble(self, x: np.ndarray) -> Union[float, np.ndarray]:
        value = np.einsum("k,kij->ij", x[self.offset:self.offset + self.size], self.basis)
        if self.kind == "scalar":
            return float(value[0, 0].real)
        if self.kind == "diagonal":
            return value.real
        return value


class AffineExpr:
    """
    Complex matrix expression affine in the decision variables

    Stored as a constant matrix plus, for every variable it depends on, a
    stack of coefficient matrices (one per decision coordinate of that
    variable). Operations act identically on the constant and each stack.
    """
    # let numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, constant, terms: Optional[Dict[str, np.ndarray]] = None):
        self.constant = np.atleast_2d(np.asarray(constant, dtype=complex))
        self.terms: Dict[str, np.ndarray] = dict(terms or {})

    @classmethod
    def wrap(cls, value) -> "AffineExpr":
        return value if isinstance(value, AffineExpr) else cls(value)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.constant.shape

    def _map(self, func: Callable[[np.ndarray], np.ndarray]) -> "AffineExpr":
        return AffineExpr(func(self.constant[None])[0], {name: func(arr) for name, arr in self.terms.items()})

    def __add__(self, other) -> "AffineExpr":
        other = AffineExpr.wrap(other)
        if other.shape != self.shape:
            raise DimensionMismatchError(f"Cannot add expressions of shapes {self.shape} and {other.shape}")
        terms = dict(self.terms)
        for name, arr in other.terms.items():
            terms[name] = terms[name] + arr if name in terms else arr
        return AffineExpr(self.constant + other.constant, terms)

    __radd__ = __add__

    def __neg__(self) -> "AffineExpr":
        return self._map(lambda s: -s)

    def __sub__(self, other) -> "AffineExpr":
        return self + (-AffineExpr.wrap(other))

    def __rsub__(self, other) -> "AffineExpr":
        return AffineExpr.wrap(other) + (-self)

    def __mul__(self, scalar) -> "AffineExpr":
        if not np.isscalar(scalar):
            return NotImplemented
        return self._map(lambda s: scalar * s)

    __rmul__ = __mul__

    def __matmul__(self, other) -> "AffineExpr":
        return self.right_multiply(other)

    def __rmatmul__(self, other) -> "AffineExpr":
        return self.left_multiply(other)

    def left_multiply(self, a) -> "AffineExpr":
        a = np.asarray(a, dtype=complex)
        if a.shape[1] != self.shape[0]:
            raise DimensionMismatchError(f"Cannot multiply {a.shape} by expression of shape {self.shape}")
        return self._map(lambda s: a @ s)

    def right_multiply(self, b) -> "AffineExpr":
        b = np.asarray(b, dtype=complex)
        if self.shape[1] != b.shape[0]:
            raise DimensionMismatchError(f"Cannot multiply expression of shape {self.shape} by {b.shape}")
        return self._map(lambda s: s @ b)

    @property
    def H(self) -> "AffineExpr":
        return self._map(lambda s: s.conj().transpose(0, 2, 1))

    def kron(self, k) -> "AffineExpr":
        """self (x) K for a constant K"""
        k = np.atleast_2d(np.asarray(k, dtype=complex))
        rows, cols = self.shape[0] * k.shape[0], self.shape[1] * k.shape[1]
        return self._map(lambda s: np.einsum("nij,ab->niajb", s, k).reshape(s.shape[0], rows, cols))

    def kron_left(self, k) -> "AffineExpr":
        """K (x) self for a constant K"""
        k = np.atleast_2d(np.asarray(k, dtype=complex))
        rows, cols = k.shape[0] * self.shape[0], k.shape[1] * self.shape[1]
        return self._map(lambda s: np.einsum("ab,nij->naibj", k, s).reshape(s.shape[0], rows, cols))

    def partial_trace(self, keep, dims: Sequence[int]) -> "AffineExpr":
        return self._map(lambda s: np.stack([partial_trace_operator(m, keep, dims) for m in s]))

    def trace(self) -> "AffineExpr":
        return self._map(lambda s: np.trace(s, axis1=1, axis2=2).reshape(-1, 1, 1))

    @staticmethod
    def block(rows: Sequence[Sequence[Any]]) -> "AffineExpr":
        """Assemble a block matrix from expressions and constants"""
        rows = [[AffineExpr.wrap(e) for e in row] for row in rows]
        sizes: Dict[str, int] = {}
        for row in rows:
            for e in row:
                for name, arr in e.terms.items():
                    sizes[name] = arr.shape[0]

        def stack(e: AffineExpr, name: Optional[str]) -> np.ndarray:
            if name is None:
                return e.constant[None]
            if name in e.terms:
                return e.terms[name]
            return np.zeros((sizes[name],) + e.shape, dtype=complex)

        def assemble(name: Optional[str]) -> np.ndarray:
            try:
                return np.concatenate(
                    [np.concatenate([stack(e, name) for e in row], axis=2) for row in rows], axis=1
                )
            except ValueError as e:
                raise DimensionMismatchError(f"Inconsistent block shapes: {e}") from e

        return AffineExpr(assemble(None)[0], {name: assemble(name) for name in sizes})


@dataclass(eq=False)
class LmiBlock:
    """
    Real symmetric LMI F0 + sum_i x_i F_i >= 0, coefficients stored as the
    (m*m, n) sparse matrix whose column i is vec(F_i)
    """
    constant: np.ndarray
    coefficients: sparse.csc_matrix
    label: str = ""

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    def linear(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.coefficients @ x).reshape(self.dim, self.dim)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.constant + self.linear(x)


@dataclass(eq=False)
class SdpProblem:
    """
    Conic program in inequality form plus the bookkeeping needed to report
    values in the caller's sense and per-variable results
    """
    c: np.ndarray
    blocks: List[LmiBlock]
    a_eq: np.ndarray
    b_eq: np.ndarray
    x0: np.ndarray
    objective_offset: float = 0.0
    maximize: bool = False
    variables: List[Variable] = field(default_factory=list)
    name: str = "sdp"

    @property
    def decision_dim(self) -> int:
        return self.c.shape[0]

    def user_objective(self, internal: float) -> float:
        return (-internal if self.maximize else internal) + self.objective_offset

    def values(self, x: np.ndarray) -> Dict[str, Any]:
        return {var.name: var.assemble(x) for var in self.variables}


@dataclass(eq=False)
class SdpSolution:
    """
    Solver result. Objectives are reported in the sense the problem was
    stated in (maximisation problems report the maximum).
    """
    status: SolverStatus
    optimal_value: float
    primal_objective: float
    dual_objective: float
    duality_gap: float
    iterations: int
    decision: np.ndarray
    primal_infeasibility: float
    dual_infeasibility: float
    values: Dict[str, Any] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "optimal_value": self.optimal_value,
            "duality_gap": self.duality_gap,
            "iterations": self.iterations,
        }


@dataclass
class SolverOptions:
    tol: float = field(default_factory=lambda: SOLVER_SETTINGS["tol"])
    max_iter: int = field(default_factory=lambda: SOLVER_SETTINGS["max_iter"])
    step_fraction: float = field(default_factory=lambda: SOLVER_SETTINGS["step_fraction"])


class SdpBuilder:
    """
    Declares matrix variables and collects affine LMIs, equalities and an
    objective, then compiles them to an SdpProblem
    """
    def __init__(self, name: str = "sdp"):
        """
        Initialize an empty problem

        Args:
            name (str): Name used in log messages
        """
        self.name = name
        self._variables: Dict[str, Variable] = {}
        self._size = 0
        self._psd: List[Tuple[AffineExpr, str]] = []
        self._equalities: List[Tuple[AffineExpr, Any]] = []
        self._objective: Optional[AffineExpr] = None
        self._maximize = False
        self._initial: Dict[str, Any] = {}

    def _declare(self, name: str, kind: str, basis: np.ndarray) -> AffineExpr:
        if name in self._variables:
            raise ValueError(f"Variable {name!r} already declared")
        self._variables[name] = Variable(name, kind, self._size, basis)
        self._size += basis.shape[0]
        return AffineExpr(np.zeros(basis.shape[1:]), {name: basis})

    def scalar(self, name: str) -> AffineExpr:
        return self._declare(name, "scalar", _basis_scalar())

    def diagonal(self, name: str, dim: int) -> AffineExpr:
        return self._declare(name, "diagonal", _basis_diagonal(dim))

    def hermitian(self, name: str, dim: int) -> AffineExpr:
        return self._declare(name, "hermitian", _basis_hermitian(dim))

    def complex_matrix(self, name: str, rows: int, cols: int) -> AffineExpr:
        return self._declare(name, "complex", _basis_complex(rows, cols))

    def add_psd(self, expr: AffineExpr, label: str = "") -> None:
        if expr.shape[0] != expr.shape[1]:
            raise DimensionMismatchError(f"PSD constraint must be square, got shape {expr.shape}")
        self._psd.append((expr, label or f"lmi{len(self._psd)}"))

    def add_equality(self, expr: AffineExpr, rhs=0.0) -> None:
        self._equalities.append((AffineExpr.wrap(expr), rhs))

    def minimize(self, expr: AffineExpr) -> None:
        self._objective, self._maximize = AffineExpr.wrap(expr), False

    def maximize(self, expr: AffineExpr) -> None:
        self._objective, self._maximize = AffineExpr.wrap(expr), True

    def set_initial(self, name: str, value) -> None:
        if name not in self._variables:
            raise KeyError(f"Unknown variable {name!r}")
        self._initial[name] = value

    def _compile_lmi(self, expr: AffineExpr, label: str) -> LmiBlock:
        stacks = [expr.constant[None]] + list(expr.terms.values())
        scale = max(1.0, max(float(np.abs(s).max(initial=0.0)) for s in stacks))
        for s in stacks:
            deviation = float(np.abs(s - s.conj().transpose(0, 2, 1)).max(initial=0.0))
            if deviation > TOLERANCES["hermitian"] * scale:
                raise NonHermitianError(f"LMI {label!r} is not Hermitian (deviation {deviation:.3e})", deviation=deviation)
        is_complex = any(np.abs(s.imag).max(initial=0.0) > 0 for s in stacks)
        convert = _embed_stack if is_complex else (lambda s: s.real)

        constant = _sym(convert(expr.constant[None])[0])
        m = constant.shape[0]
        rows, cols, vals = [], [], []
        for name, arr in expr.terms.items():
            var = self._variables[name]
            flat = convert(arr).reshape(arr.shape[0], -1)
            k_idx, pos = np.nonzero(flat)
            rows.append(pos)
            cols.append(var.offset + k_idx)
            vals.append(flat[k_idx, pos])
        coefficients = sparse.csc_matrix(
            (np.concatenate(vals) if vals else np.zeros(0),
             (np.concatenate(rows) if rows else np.zeros(0, int), np.concatenate(cols) if cols else np.zeros(0, int))),
            shape=(m * m, self._size),
        )
        return LmiBlock(constant=constant, coefficients=coefficients, label=label)

    def _compile_equalities(self) -> Tuple[np.ndarray, np.ndarray]:
        rows, rhs = [], []
        for expr, target in self._equalities:
            target = np.broadcast_to(np.asarray(target, dtype=complex), expr.shape)
            residual = (target - expr.constant).ravel()
            dense = np.zeros((residual.size, self._size), dtype=complex)
            for name, arr in expr.terms.items():
                var = self._variables[name]
                dense[:, var.offset:var.offset + var.size] = arr.reshape(arr.shape[0], -1).T
            for part in (np.real, np.imag):
                for row, value in zip(part(dense), part(residual)):
                    if not np.any(row):
                        if abs(value) > TOLERANCES["trace"]:
                            raise ValidationError(f"Inconsistent equality constraint in {self.name}")
                        continue
                    rows.append(row)
                    rhs.append(value)
        a_eq = np.array(rows, dtype=float).reshape(len(rows), self._size)
        return a_eq, np.array(rhs, dtype=float)

    def build(self) -> SdpProblem:
        """
        Compile to a real SdpProblem

        Returns:
            SdpProblem: Compiled problem
        """
        if self._objective is None:
            raise ValidationError(f"SDP {self.name} has no objective")
        if self._objective.shape != (1, 1):
            raise DimensionMismatchError(f"Objective must be scalar, got shape {self._objective.shape}")
        c = np.zeros(self._size)
        for name, arr in self._objective.terms.items():
            var = self._variables[name]
            c[var.offset:var.offset + var.size] = arr[:, 0, 0].real
        if self._maximize:
            c = -c

        blocks = [self._compile_lmi(expr, label) for expr, label in self._psd]
        a_eq, b_eq = self._compile_equalities()

        x0 = np.zeros(self._size)
        for name, value in self._initial.items():
            var = self._variables[name]
            x0[var.offset:var.offset + var.size] = var.coordinates(value)

        logger.debug(
            f"Built SDP {self.name}: {self._size} variables, block sizes {[b.dim for b in blocks]}, "
            f"{a_eq.shape[0]} equalities"
        )
        return SdpProblem(
            c=c,
            blocks=blocks,
            a_eq=a_eq,
            b_eq=b_eq,
            x0=x0,
            objective_offset=float(self._objective.constant[0, 0].real),
            maximize=self._maximize,
            variables=list(self._variables.values()),
            name=self.name,
        )


class InteriorPointSolver:
    """
    Single-use primal-dual interior-point solver for one SdpProblem
    """
    def __init__(self, problem: SdpProblem, options: Optional[SolverOptions] = None):
        """
        Initialize the solver

        Args:
            problem (SdpProblem): Problem to solve
            options (SolverOptions, optional): Tolerance, iteration limit and step fraction
        """
        if not problem.blocks:
            raise ValidationError(f"SDP {problem.name} has no PSD constraint")
        self.problem = problem
        self.options = options or SolverOptions()
        self._used = False
        self._adjoints = [block.coefficients.T.tocsr() for block in problem.blocks]
        self._patterns = [self._column_patterns(block) for block in problem.blocks]

    @staticmethod
    def _column_patterns(block: LmiBlock) -> List[Tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
        coef = block.coefficients.tocsc()
        patterns = []
        for j in range(coef.shape[1]):
            start, end = coef.indptr[j], coef.indptr[j + 1]
            if start == end:
                continue
            rows, cols = np.divmod(coef.indices[start:end], block.dim)
            patterns.append((j, rows, cols, coef.data[start:end]))
        return patterns

    def _adjoint(self, mats: List[np.ndarray]) -> np.ndarray:
        return sum(adj @ m.ravel() for adj, m in zip(self._adjoints, mats))

    def _schur(self, Z: List[np.ndarray], W: List[np.ndarray]) -> np.ndarray:
        # M_ij = sum_k Tr(F_ki Z_k F_kj W_k)
        n = self.problem.decision_dim
        M = np.zeros((n, n))
        for patterns, adjoint, z, w in zip(self._patterns, self._adjoints, Z, W):
            for j, rows, cols, vals in patterns:
                t = (z[:, rows] * vals) @ w[cols, :]
                M[:, j] += adjoint @ t.T.ravel()
        return _sym(M)

    def _kkt_solver(self, M: np.ndarray) -> Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
        a = self.problem.a_eq
        n, p = M.shape[0], a.shape[0]
        try:
            chol = sla.cho_factor(M, lower=True)
        except np.linalg.LinAlgError:
            logger.debug(f"Schur matrix of {self.problem.name} not positive definite, using least squares")
            kkt = np.block([[M, -a.T], [a, np.zeros((p, p))]])

            def solve_lstsq(h, r_eq):
                sol = np.linalg.lstsq(kkt, np.concatenate([h, r_eq]), rcond=None)[0]
                return sol[:n], sol[n:]
            return solve_lstsq

        if p == 0:
            return lambda h, r_eq: (sla.cho_solve(chol, h), np.zeros(0))

        m_inv_at = sla.cho_solve(chol, a.T)
        reduced = _sym(a @ m_inv_at)

        def solve_schur(h, r_eq):
            m_inv_h = sla.cho_solve(chol, h)
            dy = np.linalg.lstsq(reduced, r_eq - a @ m_inv_h, rcond=None)[0]
            return m_inv_h + m_inv_at @ dy, dy
        return solve_schur

    def _direction(self, kkt, W, Z, R_p, r_d, r_eq, target: float, corrector=None):
        G = []
        for k, (w, z, rp) in enumerate(zip(W, Z, R_p)):
            g = target * w - z - z @ rp @ w
            if corrector is not None:
                g = g - corrector[k]
            G.append(_sym(g))
        h = self._adjoint(G) - r_d
        dx, dy = kkt(h, r_eq)
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
            raise np.linalg.LinAlgError("non-finite search direction")
        dS, dZ = [], []
        for block, g, z, w, rp in zip(self.problem.blocks, G, Z, W, R_p):
            lin = block.linear(dx)
            dS.append(_sym(rp + lin))
            dZ.append(g - _sym(z @ lin @ w))
        return dx, dy, dS, dZ

    @staticmethod
    def _max_step(X: List[np.ndarray], dX: List[np.ndarray]) -> float:
        """Largest alpha with X + alpha dX >= 0 in every block"""
        alpha = np.inf
        for x, dx in zip(X, dX):
            try:
                chol = np.linalg.cholesky(x)
            except np.linalg.LinAlgError:
                return 0.0
            tmp = sla.solve_triangular(chol, dx, lower=True)
            tmp = sla.solve_triangular(chol, tmp.T, lower=True)
            lam = float(np.linalg.eigvalsh(_sym(tmp))[0])
            if lam < 0:
                alpha = min(alpha, -1.0 / lam)
        return alpha

    def _initial_slack(self, block: LmiBlock, x: np.ndarray) -> np.ndarray:
        s = _sym(block.evaluate(x))
        lam = float(np.linalg.eigvalsh(s)[0])
        if lam < 1e-6 * max(1.0, float(np.abs(s).max())):
            s = s + (1.0 - lam) * np.eye(block.dim)
        return s

    def run(self) -> SdpSolution:
        """
        Run the interior-point iteration

        Returns:
            SdpSolution: Final iterate with its status and certificates
        """
        if self._used:
            raise RuntimeError("InteriorPointSolver instances are single-use")
        self._used = True

        p, opts = self.problem, self.options
        blocks = p.blocks
        nu = sum(block.dim for block in blocks)

        x = p.x0.astype(float).copy()
        S = [self._initial_slack(block, x) for block in blocks]
        column_norms = np.sqrt(sum(np.asarray(abs(block.coefficients).power(2).sum(axis=0)).ravel() for block in blocks))
        zeta = max(1.0, float(np.max((1.0 + np.abs(p.c)) / (1.0 + column_norms), initial=1.0)))
        Z = [zeta * np.eye(block.dim) for block in blocks]
        y = np.zeros(p.b_eq.shape[0])

        scale_p = 1.0 + max([np.linalg.norm(p.b_eq)] + [np.linalg.norm(b.constant) for b in blocks])
        scale_d = 1.0 + np.linalg.norm(p.c)

        status = SolverStatus.MAX_ITERATIONS
        iteration = 0
        while True:
            R_p = [block.evaluate(x) - s for block, s in zip(blocks, S)]
            r_d = p.c - self._adjoint(Z) - p.a_eq.T @ y
            r_eq = p.b_eq - p.a_eq @ x

            pobj = float(p.c @ x)
            dobj = float(-sum(np.sum(b.constant * z) for b, z in zip(blocks, Z)) + p.b_eq @ y)
            gap = abs(pobj - dobj)
            complementarity = float(sum(np.sum(s * z) for s, z in zip(S, Z)))
            p_inf = float(np.sqrt(sum(np.sum(r ** 2) for r in R_p) + r_eq @ r_eq)) / scale_p
            d_inf = float(np.linalg.norm(r_d)) / scale_d

            logger.debug(
                f"{p.name} iter {iteration}: pobj={pobj:.10g} dobj={dobj:.10g} gap={gap:.2e} "
                f"pinf={p_inf:.2e} dinf={d_inf:.2e}"
            )
            if gap <= opts.tol and complementarity <= opts.tol and p_inf <= opts.tol and d_inf <= opts.tol:
                status = SolverStatus.OPTIMAL
                break
            if iteration >= opts.max_iter:
                break

            try:
                W = [_sym(sla.cho_solve(sla.cho_factor(s, lower=True), np.eye(s.shape[0]))) for s in S]
                kkt = self._kkt_solver(self._schur(Z, W))
                mu = complementarity / nu

                # predictor
                dx, dy, dS, dZ = self._direction(kkt, W, Z, R_p, r_d, r_eq, target=0.0)
                alpha_p = min(1.0, opts.step_fraction * self._max_step(S, dS))
                alpha_d = min(1.0, opts.step_fraction * self._max_step(Z, dZ))
                mu_aff = sum(
                    np.sum((s + alpha_p * ds) * (z + alpha_d * dz)) for s, ds, z, dz in zip(S, dS, Z, dZ)
                ) / nu
                sigma = min(1.0, max(0.0, mu_aff / mu) ** 3) if mu > 0 else 0.0

                # corrector
                corrector = [dz @ ds @ w for dz, ds, w in zip(dZ, dS, W)]
                dx, dy, dS, dZ = self._direction(kkt, W, Z, R_p, r_d, r_eq, target=sigma * mu, corrector=corrector)
            except (np.linalg.LinAlgError, ValueError) as e:
                logger.warning(f"{p.name}: numerical failure at iteration {iteration}: {e}")
                status = SolverStatus.NUMERICAL_FAILURE
                break

            alpha_p = min(1.0, opts.step_fraction * self._max_step(S, dS))
            alpha_d = min(1.0, opts.step_fraction * self._max_step(Z, dZ))
            if alpha_p < 1e-12 and alpha_d < 1e-12:
                logger.warning(f"{p.name}: step length collapsed at iteration {iteration}")
                status = SolverStatus.NUMERICAL_FAILURE
                break

            x = x + alpha_p * dx
            S = [_sym(s + alpha_p * ds) for s, ds in zip(S, dS)]
            Z = [_sym(z + alpha_d * dz) for z, dz in zip(Z, dZ)]
            y = y + alpha_d * dy
            iteration += 1

        if status is SolverStatus.OPTIMAL and pobj < dobj - opts.tol:
            logger.warning(f"{p.name}: weak duality violated at termination ({pobj:.12g} < {dobj:.12g})")

        primal = p.user_objective(pobj)
        solution = SdpSolution(
            status=status,
            optimal_value=primal,
            primal_objective=primal,
            dual_objective=p.user_objective(dobj),
            duality_gap=gap,
            iterations=iteration,
            decision=x,
            primal_infeasibility=p_inf,
            dual_infeasibility=d_inf,
            values=p.values(x),
        )
        logger.info(
            f"SDP {p.name} finished: status={status.value}, value={primal:.10g}, "
            f"gap={gap:.2e}, iterations={iteration}"
        )
        return solution


def solve(problem: SdpProblem, options: Optional[SolverOptions] = None) -> SdpSolution:
    """
    Solve an SDP with a fresh interior-point solver

    Args:
        problem (SdpProblem): Compiled problem
        options (SolverOptions, optional): Solver options, defaults from SOLVER_SETTINGS

    Returns:
        SdpSolution: Result with status Optimal, MaxIterations or NumericalFailure
    """
    return InteriorPointSolver(problem, options).run()


def require_optimal(solution: SdpSolution, label: str, acceptable_gap: Optional[float] = None) -> SdpSolution:
    """
    Accept an Optimal solution, or a non-Optimal one whose certificates are
    within acceptable_gap (logged as a warning); raise otherwise
    """
    if solution.status is SolverStatus.OPTIMAL:
        return solution
    acceptable = SOLVER_SETTINGS["acceptable_gap"] if acceptable_gap is None else acceptable_gap
    if max(solution.duality_gap, solution.primal_infeasibility, solution.dual_infeasibility) <= acceptable:
        logger.warning(
            f"{label}: accepting {solution.status.value} result with duality gap {solution.duality_gap:.2e}"
        )
        return solution
    logger.error(f"{label}: solver stopped with status {solution.status.value}, gap {solution.duality_gap:.2e}")
    raise SolverFailureError(
        f"{label}: solver stopped with status {solution.status.value} (duality gap {solution.duality_gap:.3e})",
        status=solution.status.value,
        duality_gap=solution.duality_gap,
    )


def solve_certified(problem: SdpProblem, options: Optional[SolverOptions] = None, label: str = "") -> SdpSolution:
    return require_optimal(solve(problem, options), label or problem.name)
