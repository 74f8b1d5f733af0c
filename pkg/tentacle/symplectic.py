"""
Linear symplectic substrate.

Phase space is R^{2n} with coordinates (q1, ..., qn, p1, ..., pn), J0 = [[0, I], [-I, 0]]
and ω0(u, v) = <J0 u, v>. A quadratic Hamiltonian H(x) = ½<x, Ax> - c has the linear
vector field X_H(x) = J0 A x.
"""
import logging
import typing
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm, schur

from .errors import DegenerateHamiltonianError, NotLiouvilleError, ValidationError

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

SYMMETRY_TOL = 1e-12
LIOUVILLE_TOL = 1e-10
SYMPLECTIC_TOL = 1e-9
DEGENERACY_RTOL = 1e-9


def _frozen(array: Array) -> Array:
    array.setflags(write=False)
    return array


def _as_square(value: ArrayLike, name: str) -> Array:
    matrix = np.array(value, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] < 2 or matrix.shape[0] % 2:
        raise ValidationError(f"{name} must have even size >= 2, got {matrix.shape[0]}")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{name} has non-finite entries")
    return matrix


def standard_j0(n: int) -> Array:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def symmetric_part(matrix: Array) -> Array:
    return 0.5 * (matrix + matrix.T)


@dataclass(frozen=True, eq=False)
class PhasePoint:
    coordinates: Array

    def __post_init__(self) -> None:
        coordinates = np.array(self.coordinates, dtype=float).reshape(-1)
        if coordinates.size < 2 or coordinates.size % 2:
            raise ValidationError(
                f"phase point needs an even number >= 2 of coordinates, got {coordinates.size}"
            )
        object.__setattr__(self, "coordinates", _frozen(coordinates))

    @property
    def n(self) -> int:
        return self.coordinates.size // 2

    @property
    def q(self) -> Array:
        return self.coordinates[: self.n]

    @property
    def p(self) -> Array:
        return self.coordinates[self.n :]


@dataclass(frozen=True, eq=False)
class QuadraticHamiltonian:
    """
    H(x) = ½<x, Ax> - c.

    A is checked against its transpose (relative tolerance 1e-12) and symmetrized.
    """

    A: Array
    c: float = 0.0

    def __post_init__(self) -> None:
        A = _as_square(self.A, "A")
        scale = max(1.0, float(np.abs(A).max()))
        asymmetry = np.abs(A - A.T)
        if asymmetry.max() > SYMMETRY_TOL * scale:
            rows, cols = np.nonzero(np.triu(asymmetry > SYMMETRY_TOL * scale))
            offending = ", ".join(f"A[{i}][{j}]/A[{j}][{i}]" for i, j in zip(rows, cols))
            raise ValidationError(f"A is not symmetric: {offending}")
        if not np.isfinite(self.c):
            raise ValidationError("c must be finite")
        object.__setattr__(self, "A", _frozen(symmetric_part(A)))
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def radial(cls, n: int) -> "QuadraticHamiltonian":
        """½|x|²"""
        return cls(np.eye(2 * n), 0.0)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[0] // 2

    @property
    def form_matrix(self) -> Array:
        """Matrix of the quadratic part as a form, H(x) + c = <x, form_matrix x>."""
        return 0.5 * self.A

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.A, 2))

    def __call__(self, x: ArrayLike) -> typing.Any:
        points = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", points, self.A, points) - self.c

    def gradient(self, x: ArrayLike) -> Array:
        return np.asarray(x, dtype=float) @ self.A

    def vector_field(self, x: ArrayLike) -> Array:
        return np.asarray(x, dtype=float) @ hamiltonian_matrix(self).T

    def is_degenerate(self) -> bool:
        singular_values = np.linalg.svd(self.A, compute_uv=False)
        return bool(singular_values[-1] <= DEGENERACY_RTOL * singular_values[0])

    def require_nondegenerate(self) -> None:
        if self.is_degenerate():
            raise DegenerateHamiltonianError(
                "A is degenerate: smallest singular value below 1e-9 * ||A||"
            )

    def conjugate(self, S: "SymplecticMatrix") -> "QuadraticHamiltonian":
        """H ∘ S."""
        if S.dim != self.dim:
            raise ValidationError(f"dimension mismatch: {S.dim} != {self.dim}")
        return QuadraticHamiltonian(S.S.T @ self.A @ S.S, self.c)


def hamiltonian_matrix(H: QuadraticHamiltonian) -> Array:
    """M = J0 A, so that X_H(x) = M x."""
    return standard_j0(H.n) @ H.A


def poisson_bracket(F: QuadraticHamiltonian, G: QuadraticHamiltonian) -> QuadraticHamiltonian:
    """
    Derivative of F along the flow of G, x ↦ dF(X_G)(x) = <x, sym(A_F J0 A_G) x>.

    Returned with matrix 2 sym(A_F J0 A_G) and constant 0, so that ``form_matrix``
    is the bracket matrix. With F = ½|x|² this is sym(J0 A_G).
    """
    if F.dim != G.dim:
        raise ValidationError(f"dimension mismatch: {F.dim} != {G.dim}")
    product = F.A @ standard_j0(F.n) @ G.A
    return QuadraticHamiltonian(product + product.T, 0.0)


@dataclass(frozen=True, eq=False)
class LinearField:
    """X(x) = L x."""

    L: Array

    def __post_init__(self) -> None:
        object.__setattr__(self, "L", _frozen(_as_square(self.L, "L")))

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def __call__(self, x: ArrayLike) -> Array:
        return np.asarray(x, dtype=float) @ self.L.T

    @property
    def regularity_bound(self) -> float:
        """sup ||DX||, finite for every linear field."""
        return float(np.linalg.norm(self.L, 2))


def liouville_residual(X: LinearField) -> float:
    J0 = standard_j0(X.dim // 2)
    return float(np.abs(J0 @ X.L + X.L.T @ J0 - J0).max())


def is_liouville(X: LinearField) -> bool:
    return liouville_residual(X) <= LIOUVILLE_TOL


def is_asymptotically_regular(X: LinearField) -> bool:
    return bool(np.isfinite(X.regularity_bound))


def blend_liouville(X1: LinearField, X2: LinearField, epsilon: float) -> LinearField:
    if X1.dim != X2.dim:
        raise ValidationError(f"dimension mismatch: {X1.dim} != {X2.dim}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1], got {epsilon}")
    for name, X in (("X1", X1), ("X2", X2)):
        if not is_liouville(X):
            raise NotLiouvilleError(f"{name} is not Liouville (residual {liouville_residual(X):.3e})")
    return LinearField((1.0 - epsilon) * X1.L + epsilon * X2.L)


def x_alpha_field(m: int, alpha: float) -> LinearField:
    """
    X^α(q, p) = Σ (½ q_i + α p_i) ∂q_i + (α q_i + ½ p_i) ∂p_i on R^{2m}.
    """
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    eye = np.eye(m)
    return LinearField(np.block([[0.5 * eye, alpha * eye], [alpha * eye, 0.5 * eye]]))


def project_liouville(L: ArrayLike) -> LinearField:
    """
    Nearest Liouville matrix in the Frobenius norm: ½I plus the orthogonal
    projection of L - ½I onto sp(2n).
    """
    matrix = _as_square(L, "L")
    J0 = standard_j0(matrix.shape[0] // 2)
    half = 0.5 * np.eye(matrix.shape[0])
    return LinearField(half - J0 @ symmetric_part(J0 @ (matrix - half)))


def is_symplectic(S: ArrayLike, tol: float = SYMPLECTIC_TOL) -> bool:
    matrix = np.asarray(S, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
        return False
    J0 = standard_j0(matrix.shape[0] // 2)
    scale = max(1.0, float(np.linalg.norm(matrix, 2)) ** 2)
    return bool(np.abs(matrix.T @ J0 @ matrix - J0).max() <= tol * scale)


@dataclass(frozen=True, eq=False)
class SymplecticMatrix:
    S: Array

    def __post_init__(self) -> None:
        S = _as_square(self.S, "S")
        if not is_symplectic(S):
            raise ValidationError("S violates S^T J0 S = J0")
        object.__setattr__(self, "S", _frozen(S))

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    def inverse(self) -> Array:
        J0 = standard_j0(self.dim // 2)
        return -J0 @ self.S.T @ J0


def random_symplectic(n: int, seed: int, scale: float = 1.0) -> SymplecticMatrix:
    """exp(scale K) for a seeded random K in sp(2n)."""
    if scale < 0:
        raise ValidationError(f"scale must be >= 0, got {scale}")
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((2 * n, 2 * n))
    K = standard_j0(n) @ symmetric_part(B)
    return SymplecticMatrix(expm(scale * K))


def is_affine_tentacular_symplectic(L: ArrayLike, b: typing.Optional[ArrayLike] = None) -> bool:
    """
    x ↦ Lx + b. The second derivative vanishes, so the growth conditions
    sup ||D^k φ(x)|| |x|^(k-1) < ∞ reduce to L being symplectic.
    """
    matrix = np.asarray(L, dtype=float)
    if b is not None and np.asarray(b).shape != (matrix.shape[0],):
        raise ValidationError("translation has the wrong dimension")
    return is_symplectic(matrix)


def darboux_basis(C: ArrayLike, tol: float = 1e-10) -> Array:
    """
    Symplectic basis T = C G of the subspace spanned by the columns of C,
    with T^T J0 T = J0 of the subspace dimension.
    """
    basis = np.asarray(C, dtype=float)
    dim, width = basis.shape
    if dim % 2 or width % 2 or width == 0:
        raise ValidationError(f"need an even-dimensional subspace of R^2n, got {basis.shape}")
    omega = basis.T @ standard_j0(dim // 2) @ basis
    omega = 0.5 * (omega - omega.T)
    T_schur, Z = schur(omega, output="real")
    d = width // 2
    G = np.zeros((width, width))
    scale = max(1.0, float(np.abs(omega).max()))
    for i in range(d):
        b = T_schur[2 * i, 2 * i + 1]
        if abs(b) <= tol * scale:
            raise ValidationError("subspace is not symplectic")
        G[:, i] = Z[:, 2 * i] / np.sqrt(abs(b))
        G[:, d + i] = np.sign(b) * Z[:, 2 * i + 1] / np.sqrt(abs(b))
    return basis @ G


def symplectic_left_inverse(T: ArrayLike) -> Array:
    """T⁺ = -J0' T^T J0, the left inverse of a Darboux basis T."""
    basis = np.asarray(T, dtype=float)
    dim, width = basis.shape
    return -standard_j0(width // 2) @ basis.T @ standard_j0(dim // 2)
