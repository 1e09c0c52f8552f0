"""
Dense complex linear algebra for Hermitian matrices and quantum states.

Density matrices, purifications, partial traces, fidelities and the random
state generators used throughout the toolkit live here. All types are
immutable after construction; all functions are pure.
"""
import logging
import string
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import unitary_group

from app.config import TOLERANCES
from app.exceptions import (
    DimensionMismatchError,
    NonHermitianError,
    NotPSDError,
    TraceError,
    ValidationError,
)

# Set up logging
logger = logging.getLogger(__name__)

# Row-major complex matrix; kept as a plain ndarray alias
ComplexMatrix = np.ndarray

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(entries, name: str = "matrix") -> ComplexMatrix:
    """
    Convert input to a finite 2-D complex array

    Args:
        entries: Array-like matrix entries
        name (str): Name used in error messages

    Returns:
        ComplexMatrix: Complex copy of the input
    """
    m = np.array(entries, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return m


def check_hermitian(m, tol: Optional[float] = None) -> ComplexMatrix:
    """
    Validate Hermitian symmetry and return the exactly Hermitian part

    The tolerance is applied to max |m_ij - conj(m_ji)| relative to
    max(1, max |m_ij|).

    Args:
        m: Square matrix
        tol (float, optional): Symmetry tolerance, defaults to TOLERANCES["hermitian"]

    Returns:
        ComplexMatrix: (m + m^dagger) / 2
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"Hermitian matrix must be square, got shape {m.shape}")
    tol = TOLERANCES["hermitian"] if tol is None else tol
    diff = np.abs(m - m.conj().T)
    row, col = np.unravel_index(np.argmax(diff), diff.shape)
    deviation = float(diff[row, col])
    scale = max(1.0, float(np.abs(m).max()))
    if deviation > tol * scale:
        raise NonHermitianError(
            f"Matrix is not Hermitian at entry ({row}, {col}): "
            f"|m[{row},{col}] - conj(m[{col},{row}])| = {deviation:.3e}",
            indices=(int(row), int(col)),
            deviation=deviation,
        )
    return (m + m.conj().T) / 2


def eig_hermitian(m) -> Tuple[np.ndarray, ComplexMatrix]:
    """
    Eigendecomposition of a Hermitian matrix

    Args:
        m: Hermitian matrix

    Returns:
        Tuple[np.ndarray, ComplexMatrix]: Eigenvalues in descending order and the
            unitary whose columns are the matching eigenvectors
    """
    h = check_hermitian(m)
    values, vectors = np.linalg.eigh(h)
    return values[::-1].copy(), vectors[:, ::-1].copy()


def _psd_eigh(m) -> Tuple[np.ndarray, ComplexMatrix]:
    values, vectors = eig_hermitian(m)
    if values[-1] < -TOLERANCES["psd_error"]:
        raise NotPSDError(
            f"Matrix is not positive semidefinite: minimum eigenvalue {values[-1]:.3e}",
            min_eigenvalue=float(values[-1]),
        )
    return np.clip(values, 0.0, None), vectors


def apply_psd_function(m, func: Callable[[np.ndarray], np.ndarray]) -> ComplexMatrix:
    """
    Apply a scalar function to the clipped spectrum of a PSD matrix

    Args:
        m: PSD Hermitian matrix
        func (Callable): Vectorised function of the eigenvalues

    Returns:
        ComplexMatrix: U f(Lambda) U^dagger
    """
    values, vectors = _psd_eigh(m)
    return (vectors * func(values)) @ vectors.conj().T


def matrix_sqrt(m) -> ComplexMatrix:
    """
    Principal square root of a PSD Hermitian matrix
    """
    return apply_psd_function(m, np.sqrt)


def support_power(m, power: float, tol: Optional[float] = None) -> ComplexMatrix:
    """
    Power of a PSD matrix restricted to its support (generalised inverse for power < 0)
    """
    tol = TOLERANCES["rank"] if tol is None else tol
    values, vectors = _psd_eigh(m)
    mask = values > tol
    powered = np.zeros_like(values)
    powered[mask] = values[mask] ** power
    return (vectors * powered) @ vectors.conj().T


def support_basis(m, tol: Optional[float] = None) -> Tuple[np.ndarray, ComplexMatrix]:
    """
    Nonzero eigenvalues of a PSD matrix and the isometry onto its support

    Args:
        m: PSD Hermitian matrix
        tol (float, optional): Eigenvalues at or below this are dropped

    Returns:
        Tuple[np.ndarray, ComplexMatrix]: (eigenvalues, d x rank isometry)
    """
    tol = TOLERANCES["rank"] if tol is None else tol
    values, vectors = _psd_eigh(m)
    mask = values > tol
    if not np.any(mask):
        mask[0] = True
    return values[mask], vectors[:, mask]


def kron(a, b) -> ComplexMatrix:
    """
    Tensor product of two matrices (dimensions multiply)
    """
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Hermitian, positive semidefinite, unit-trace complex matrix
    """
    matrix: ComplexMatrix

    def __post_init__(self):
        m = check_hermitian(self.matrix)
        trace = complex(np.trace(m))
        if abs(trace - 1.0) > TOLERANCES["trace"]:
            raise TraceError(f"Density matrix trace is {trace.real:.12g}, expected 1", trace=trace)
        min_eigenvalue = float(np.linalg.eigvalsh(m)[0])
        if min_eigenvalue < -TOLERANCES["psd_error"]:
            raise NotPSDError(
                f"Density matrix has negative eigenvalue {min_eigenvalue:.3e}",
                min_eigenvalue=min_eigenvalue,
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def from_diagonal(cls, probabilities) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probabilities, dtype=complex)))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def off_diagonal_mass(self) -> float:
        """Sum of |rho_ij| over i != j"""
        return float(np.abs(self.matrix).sum() - np.abs(np.diag(self.matrix)).sum())

    def is_incoherent(self, tol: Optional[float] = None) -> bool:
        tol = TOLERANCES["off_diagonal"] if tol is None else tol
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.abs(off).max(initial=0.0) <= tol)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.matrix, other.matrix))

    def conjugate_by(self, operator) -> "DensityMatrix":
        """V rho V^dagger for an isometry or unitary V"""
        v = as_matrix(operator, "operator")
        if v.shape[1] != self.dim:
            raise DimensionMismatchError(f"Operator with {v.shape[1]} columns cannot act on dimension {self.dim}")
        return DensityMatrix(v @ self.matrix @ v.conj().T)


@dataclass(frozen=True, eq=False)
class PurifiedState:
    """
    Bipartite pure state |psi>_AE, amplitudes indexed as a * dim_e + e
    """
    dim_a: int
    dim_e: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != self.dim_a * self.dim_e:
            raise DimensionMismatchError(
                f"Purified state needs {self.dim_a * self.dim_e} amplitudes, got {amplitudes.size}"
            )
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > TOLERANCES["trace"]:
            raise ValidationError(f"Purified state has squared norm {norm:.12g}, expected 1")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    def coefficients(self) -> ComplexMatrix:
        """Coefficient matrix M with |psi> = sum_ae M[a, e] |a>|e>"""
        return self.amplitudes.reshape(self.dim_a, self.dim_e)

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def reduced_state(self, keep: int = 0) -> DensityMatrix:
        m = self.coefficients()
        if keep == 0:
            return DensityMatrix(m @ m.conj().T)
        return DensityMatrix(m.T @ m.conj())

    def apply_environment_isometry(self, isometry) -> "PurifiedState":
        """(I_A (x) W)|psi> for an isometry W: E -> E'"""
        w = as_matrix(isometry, "isometry")
        if w.shape[1] != self.dim_e:
            raise DimensionMismatchError(f"Isometry acts on dimension {w.shape[1]}, environment is {self.dim_e}")
        return PurifiedState(self.dim_a, w.shape[0], (self.coefficients() @ w.T).reshape(-1))


StateLike = Union[DensityMatrix, np.ndarray]


def _matrix_of(state: StateLike) -> ComplexMatrix:
    return state.matrix if isinstance(state, DensityMatrix) else as_matrix(state)


def fidelity(rho: StateLike, sigma: StateLike) -> float:
    """
    Fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, evaluated as
    the squared nuclear norm ||sqrt(rho) sqrt(sigma)||_1^2 with both roots taken
    on the support (eigenvalues above TOLERANCES["rank"])

    Args:
        rho (DensityMatrix): First state
        sigma (DensityMatrix): Second state

    Returns:
        float: Fidelity in [0, 1] for normalised states
    """
    a, b = _matrix_of(rho), _matrix_of(sigma)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Fidelity of states with shapes {a.shape} and {b.shape}")
    root = float(np.linalg.svd(support_power(a, 0.5) @ support_power(b, 0.5), compute_uv=False).sum())
    value = root ** 2
    if isinstance(rho, DensityMatrix) and isinstance(sigma, DensityMatrix):
        value = min(value, 1.0)
    return value


def trace_norm(m) -> float:
    """
    Schatten 1-norm of a Hermitian matrix (sum of absolute eigenvalues)
    """
    h = check_hermitian(m)
    return float(np.abs(np.linalg.eigvalsh(h)).sum())


def partial_trace_operator(m, keep: Union[int, Sequence[int]], dims: Sequence[int]) -> ComplexMatrix:
    """
    Partial trace of an operator on a multipartite space

    Args:
        m: Operator on the tensor product of spaces with dimensions dims
        keep (int or Sequence[int]): Subsystem index or indices to keep
        dims (Sequence[int]): Subsystem dimensions

    Returns:
        ComplexMatrix: Reduced operator on the kept subsystems (in index order)
    """
    m = as_matrix(m)
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionMismatchError(f"Operator shape {m.shape} does not match subsystem dims {dims}")
    kept = sorted({keep} if isinstance(keep, (int, np.integer)) else set(keep))
    if any(k < 0 or k >= len(dims) for k in kept):
        raise DimensionMismatchError(f"Cannot keep subsystems {kept} of {len(dims)}")

    n = len(dims)
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for k in range(n):
        if k not in kept:
            cols[k] = rows[k]
    out = "".join(rows[k] for k in kept) + "".join(cols[k] for k in kept)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, m.reshape(dims + dims))
    d_kept = int(np.prod([dims[k] for k in kept])) if kept else 1
    return reduced.reshape(d_kept, d_kept)


def partial_trace(state: DensityMatrix, keep: Union[int, Sequence[int]], dims: Sequence[int]) -> DensityMatrix:
    """
    Reduced density matrix on the kept subsystems

    Args:
        state (DensityMatrix): State on the tensor product with dimensions dims
        keep (int or Sequence[int]): Subsystem index or indices to keep (0 = A, 1 = B, ...)
        dims (Sequence[int]): Subsystem dimensions, e.g. (d_A, d_B)

    Returns:
        DensityMatrix: Reduced state
    """
    if state.dim != int(np.prod(dims)):
        raise DimensionMismatchError(f"State dimension {state.dim} does not match dims {tuple(dims)}")
    return DensityMatrix(partial_trace_operator(state.matrix, keep, dims))


def purify(rho: DensityMatrix, trim: bool = False) -> PurifiedState:
    """
    Canonical purification |psi> = sum_i sqrt(lambda_i) |u_i>_A |i>_E

    Args:
        rho (DensityMatrix): State to purify
        trim (bool): Drop zero Schmidt components so that d_E = rank(rho)

    Returns:
        PurifiedState: Purification with d_E = d_A (or rank when trimmed)
    """
    values, vectors = _psd_eigh(rho.matrix)
    if trim:
        mask = values > TOLERANCES["rank"]
        if not np.any(mask):
            mask[0] = True
        values, vectors = values[mask], vectors[:, mask]
    coefficients = vectors * np.sqrt(values)
    amplitudes = coefficients.reshape(-1)
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return PurifiedState(rho.dim, coefficients.shape[1], amplitudes)


def mixture(weights: Sequence[float], states: Sequence[DensityMatrix]) -> DensityMatrix:
    """
    Convex combination sum_n p_n rho_n
    """
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(states):
        raise DimensionMismatchError(f"{len(weights)} weights for {len(states)} states")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > TOLERANCES["trace"]:
        raise ValidationError("Mixture weights must be nonnegative and sum to 1")
    return DensityMatrix(sum(w * s.matrix for w, s in zip(weights, states)))


def maximally_coherent_state(dim: int) -> DensityMatrix:
    """
    |psi_d> = sum_i |i> / sqrt(d) as a density matrix
    """
    return DensityMatrix(np.full((dim, dim), 1.0 / dim, dtype=complex))


def plus_state() -> DensityMatrix:
    return maximally_coherent_state(2)


def qubit_from_bloch(vector: Sequence[float]) -> DensityMatrix:
    """
    Qubit state (I + n . sigma) / 2 for a Bloch vector with |n| <= 1
    """
    nx, ny, nz = (float(v) for v in vector)
    return DensityMatrix((np.eye(2) + nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z) / 2)


def random_unitary(dim: int, rng=None) -> ComplexMatrix:
    """
    Haar-random unitary
    """
    rng = np.random.default_rng(rng)
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(dim, random_state=rng)


def random_isometry(rows: int, cols: int, rng=None) -> ComplexMatrix:
    """
    Haar-random isometry (rows >= cols), V^dagger V = I
    """
    if rows < cols:
        raise DimensionMismatchError(f"Isometry needs rows >= cols, got {rows} x {cols}")
    return random_unitary(rows, rng)[:, :cols]


def random_pure_state(dim: int, rng=None) -> np.ndarray:
    """
    Haar-random normalised state vector
    """
    rng = np.random.default_rng(rng)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_density_matrix(dim: int, rng=None, rank: Optional[int] = None) -> DensityMatrix:
    """
    Random state from the Ginibre ensemble (Hilbert-Schmidt measure for full rank)

    Args:
        dim (int): Dimension
        rng: Seed or numpy Generator
        rank (int, optional): Rank of the state, defaults to dim

    Returns:
        DensityMatrix: Random state
    """
    rng = np.random.default_rng(rng)
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real)
