"""
Symplectic classification of non-degenerate quadratic forms.

The spectrum of M = J0 A splits into families {±λ} (kind A), {±λ1 ± iλ2} (kind B) and
{±iμ} (kind C). Each family carries Jordan boxes of sizes m; every box is one block
with a normal-form representative. Blocks are reported in canonical order.
"""
import enum
import logging
import typing
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fclusterdata

from .errors import SpectralSymmetryError, ValidationError
from .symplectic import (
    Array,
    QuadraticHamiltonian,
    SymplecticMatrix,
    hamiltonian_matrix,
    is_symplectic,
    standard_j0,
)

logger = logging.getLogger(__name__)

CLUSTER_RTOL = 1e-5
EQUAL_RTOL = 1e-7
AXIS_RTOL = 1e-8
RANK_RTOL = 1e-7
RESIDUAL_TOL = 1e-7


class BlockKind(str, enum.Enum):
    A = "a"
    B = "b"
    C = "c"


_KIND_ORDER = {BlockKind.A: 0, BlockKind.B: 1, BlockKind.C: 2}


@dataclass(frozen=True)
class HormanderBlock:
    """
    One normal-form block.

    ``primary`` is λ for kind A, λ1 for kind B and μ for kind C. ``secondary`` is λ2
    (kind B only). ``gamma`` is the sign of a kind C block, None when unresolved.
    """

    kind: BlockKind
    m: int
    primary: float
    secondary: typing.Optional[float] = None
    gamma: typing.Optional[int] = None

    def __post_init__(self) -> None:
        kind = BlockKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.m < 1:
            raise ValidationError(f"m must be >= 1, got {self.m}")
        if not self.primary > 0:
            raise ValidationError(f"block parameter must be positive, got {self.primary}")
        if kind is BlockKind.B:
            if self.secondary is None or not self.secondary > 0:
                raise ValidationError("kind B needs lambda2 > 0")
        elif self.secondary is not None:
            raise ValidationError(f"kind {kind.value} takes no second parameter")
        if kind is BlockKind.C:
            if self.gamma not in (1, -1, None):
                raise ValidationError(f"gamma must be +1 or -1, got {self.gamma}")
        elif self.gamma is not None:
            raise ValidationError(f"kind {kind.value} takes no gamma")

    @classmethod
    def hyperbolic(cls, m: int, lam: float) -> "HormanderBlock":
        return cls(BlockKind.A, m, lam)

    @classmethod
    def loxodromic(cls, m: int, lam1: float, lam2: float) -> "HormanderBlock":
        return cls(BlockKind.B, m, lam1, lam2)

    @classmethod
    def elliptic(cls, m: int, mu: float, gamma: typing.Optional[int] = 1) -> "HormanderBlock":
        return cls(BlockKind.C, m, mu, gamma=gamma)

    @property
    def dimension(self) -> int:
        return 4 * self.m if self.kind is BlockKind.B else 2 * self.m

    @property
    def half_dimension(self) -> int:
        return self.dimension // 2

    @property
    def params(self) -> typing.Dict[str, typing.Any]:
        if self.kind is BlockKind.A:
            return {"lambda": self.primary}
        if self.kind is BlockKind.B:
            return {"lambda1": self.primary, "lambda2": self.secondary}
        return {"mu": self.primary, "gamma": self.gamma}

    @property
    def expected_signature(self) -> typing.Optional[typing.Tuple[int, int]]:
        if self.kind is BlockKind.A:
            return (self.m, self.m)
        if self.kind is BlockKind.B:
            return (2 * self.m, 2 * self.m)
        if self.m % 2 == 0:
            return (self.m, self.m)
        if self.gamma is None:
            return None
        return (self.m + self.gamma, self.m - self.gamma)

    def sort_key(self) -> typing.Tuple[typing.Any, ...]:
        gamma_rank = {1: 0, -1: 1, None: 2}[self.gamma]
        return (_KIND_ORDER[self.kind], self.primary, self.m, self.secondary or 0.0, gamma_rank)


def _normal_form_matrix(block: HormanderBlock) -> Array:
    d = block.half_dimension
    A = np.zeros((2 * d, 2 * d))
    if block.kind is BlockKind.C:
        if block.gamma is None:
            raise ValidationError("normal form of a kind C block needs a resolved gamma")
        m, mu, gamma = block.m, block.primary, block.gamma
        for j in range(m):
            A[j, m - 1 - j] += gamma * mu
            A[m + j, m + m - 1 - j] += gamma * mu
        for j in range(1, m):
            A[j, m - j] -= gamma
        for j in range(m - 1):
            A[m + j, m + m - 2 - j] -= gamma
        return A
    if block.kind is BlockKind.A:
        P = block.primary * np.eye(d) + np.eye(d, k=-1)
    else:
        rotation = np.zeros((d, d))
        for i in range(block.m):
            rotation[2 * i + 1, 2 * i] = 1.0
            rotation[2 * i, 2 * i + 1] = -1.0
        P = block.primary * np.eye(d) + np.eye(d, k=2) + typing.cast(float, block.secondary) * rotation
    A[:d, d:] = P
    A[d:, :d] = P.T
    return A


def normal_form(block: HormanderBlock) -> QuadraticHamiltonian:
    """
    Representative with <x, Ax> equal to the block's normal-form quadratic form Q.
    The eigenvalues of J0 A are then exactly the block's family.
    """
    return QuadraticHamiltonian(_normal_form_matrix(block), 0.0)


@dataclass(frozen=True, eq=False)
class Decomposition:
    blocks: typing.Tuple[HormanderBlock, ...]
    signature: typing.Tuple[int, int]
    semisimple: bool
    # maps block-adapted coordinates to input coordinates, x = S y
    transform: typing.Optional[SymplecticMatrix] = None
    residual: typing.Optional[float] = None
    warnings: typing.Tuple[str, ...] = ()

    @property
    def dimension(self) -> int:
        return sum(block.dimension for block in self.blocks)

    def block_indices(self) -> typing.List[Array]:
        """Adapted coordinates of each block, its q-slots followed by its p-slots."""
        n = self.dimension // 2
        indices = []
        offset = 0
        for block in self.blocks:
            d = block.half_dimension
            q_slots = np.arange(offset, offset + d)
            indices.append(np.concatenate([q_slots, q_slots + n]))
            offset += d
        return indices

    def embed(self, matrices: typing.Sequence[Array]) -> Array:
        result = np.zeros((self.dimension, self.dimension))
        for index, matrix in zip(self.block_indices(), matrices):
            result[np.ix_(index, index)] = matrix
        return result

    def normal_form_matrix(self) -> Array:
        return self.embed([_normal_form_matrix(block) for block in self.blocks])


def signature(H: QuadraticHamiltonian) -> typing.Tuple[int, int]:
    H.require_nondegenerate()
    eigenvalues = np.linalg.eigvalsh(H.A)
    return int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))


def hyperboloid_topology(H: QuadraticHamiltonian) -> typing.Tuple[int, int, str]:
    """Signature (k, l) and the diffeomorphism type S^{k-1} × R^l of the level set H = 0."""
    if H.c <= 0:
        raise ValidationError("level-set topology is reported for c > 0 only")
    k, l = signature(H)
    if k == 0:
        return k, l, "empty"
    return k, l, f"S^{k - 1} × R^{l}"


def is_symplectically_diagonalizable(A: typing.Any, tol: float = 1e-9) -> bool:
    """A J0 A^T J0 = J0 A^T J0 A, the criterion for a diagonalizable A."""
    matrix = np.asarray(A, dtype=float)
    J0 = standard_j0(matrix.shape[0] // 2)
    lhs = matrix @ J0 @ matrix.T @ J0
    rhs = J0 @ matrix.T @ J0 @ matrix
    scale = max(1.0, float(np.linalg.norm(matrix, 2)) ** 2)
    return bool(np.abs(lhs - rhs).max() <= tol * scale)


@dataclass(frozen=True)
class _Family:
    kind: BlockKind
    value: complex
    multiplicity: int
    spread: float


def _cluster(points: Array, tol: float) -> typing.List[typing.List[int]]:
    """Single-linkage groups of complex points within tol, ordered by first member."""
    if len(points) < 2:
        return [list(range(len(points)))]
    labels = fclusterdata(
        np.column_stack([points.real, points.imag]), tol, criterion="distance", method="single"
    )
    groups: typing.Dict[int, typing.List[int]] = {}
    for i, label in enumerate(labels):
        groups.setdefault(int(label), []).append(i)
    return list(groups.values())


def _is_defective(M: Array, z: complex, multiplicity: int, scale: float) -> bool:
    """Whether the eigenvalues near z come from a Jordan chain, not from distinct eigenvectors."""
    singular_values = np.linalg.svd(M - z * np.eye(M.shape[0]), compute_uv=False)
    nullity = int(np.sum(singular_values <= RANK_RTOL * scale))
    return 1 <= nullity < multiplicity


def _families(M: Array, norm: float) -> typing.List[_Family]:
    scale = 1.0 + norm
    values = np.linalg.eigvals(M)
    groups = _cluster(values, EQUAL_RTOL * scale)
    # roundoff splits a Jordan box of size m by about eps^(1/m)
    means = np.array([np.mean(values[members]) for members in groups])
    clusters = []
    for near in _cluster(means, CLUSTER_RTOL * scale):
        members = [i for j in near for i in groups[j]]
        if len(near) > 1 and _is_defective(M, complex(np.mean(values[members])), len(members), scale):
            clusters.append(members)
        else:
            clusters.extend(groups[j] for j in near)

    centers = []
    for members in clusters:
        z = complex(np.mean(values[members]))
        spread = float(np.max(np.abs(values[members] - z)))
        if abs(z.imag) < AXIS_RTOL * norm:
            z = complex(z.real, 0.0)
        if abs(z.real) < AXIS_RTOL * norm:
            z = complex(0.0, z.imag)
        centers.append((z, len(members), spread))
    logger.debug("eigenvalue clusters of J0 A: %s", [(c[0], c[1]) for c in centers])

    unused = set(range(len(centers)))

    def take(target: complex, multiplicity: int) -> None:
        candidates = [j for j in unused if centers[j][1] == multiplicity]
        nearest = min(candidates, key=lambda j: abs(centers[j][0] - target), default=None)
        if nearest is None or abs(centers[nearest][0] - target) > CLUSTER_RTOL * scale:
            raise SpectralSymmetryError(
                f"eigenvalue {target:.6g} (multiplicity {multiplicity}) has no symmetric partner"
            )
        unused.remove(nearest)

    families = []
    for i, (z, count, spread) in enumerate(centers):
        if i not in unused:
            continue
        if z.real > 0 and z.imag == 0:
            kind, partners = BlockKind.A, [-z]
        elif z.real == 0 and z.imag > 0:
            kind, partners = BlockKind.C, [-z]
        elif z.real > 0 and z.imag > 0:
            kind, partners = BlockKind.B, [z.conjugate(), -z, -z.conjugate()]
        else:
            continue
        unused.remove(i)
        for partner in partners:
            take(partner, count)
        families.append(_Family(kind, z, count, spread))
    if unused:
        leftover = [centers[j][0] for j in sorted(unused)]
        raise SpectralSymmetryError(f"eigenvalues {leftover} do not form symmetric families")
    return families


def _jordan_boxes(M: Array, z: complex, multiplicity: int, scale: float) -> typing.List[int]:
    """Jordan box sizes at z from the nullities of (M - zI)^j."""
    if multiplicity == 1:
        return [1]
    dim = M.shape[0]
    shifted = M - z * np.eye(dim) if z.imag else M - z.real * np.eye(dim)
    power = np.eye(dim, dtype=shifted.dtype)
    nullities = [0]
    for j in range(1, multiplicity + 1):
        power = power @ shifted
        singular_values = np.linalg.svd(power, compute_uv=False)
        nullity = min(multiplicity, int(np.sum(singular_values <= RANK_RTOL * scale**j)))
        nullities.append(max(nullity, nullities[-1]))
        if nullities[-1] == multiplicity:
            break
    if nullities[1] == 0 or nullities[-1] < multiplicity:
        # nearby distinct eigenvalues merged into one cluster
        return [1] * multiplicity
    at_least = [nullities[j] - nullities[j - 1] for j in range(1, len(nullities))] + [0]
    sizes = []
    for size in range(1, len(at_least)):
        sizes.extend([size] * max(0, at_least[size - 1] - at_least[size]))
    if sum(sizes) != multiplicity:
        return [1] * multiplicity
    return sorted(sizes)


def _elliptic_gammas(
    M: Array, A: Array, mu: float, sizes: typing.List[int]
) -> typing.List[typing.Optional[int]]:
    """
    Signs of the kind C boxes of one ±iμ family from the signature (k, l) of Q on the
    real generalized eigenspace. Odd boxes contribute ±2 to k - l, even boxes nothing.
    """
    dim = M.shape[0]
    multiplicity = sum(sizes)
    power = np.linalg.matrix_power(M @ M + mu**2 * np.eye(dim), max(sizes))
    _, _, vh = np.linalg.svd(power)
    basis = vh[-2 * multiplicity :].T
    restricted = np.linalg.eigvalsh(basis.T @ A @ basis)
    k, l = int(np.sum(restricted > 0)), int(np.sum(restricted < 0))
    odd = [size for size in sizes if size % 2]
    gammas: typing.List[typing.Optional[int]] = [None] * len(sizes)
    if not odd or (k - l) % 2:
        return gammas
    n_plus2 = len(odd) + (k - l) // 2
    if n_plus2 % 2 or not 0 <= n_plus2 // 2 <= len(odd):
        return gammas
    n_plus = n_plus2 // 2
    if len(set(odd)) > 1 and 0 < n_plus < len(odd):
        return gammas
    remaining = n_plus
    for i, size in enumerate(sizes):
        if size % 2:
            gammas[i] = 1 if remaining > 0 else -1
            remaining -= 1
    return gammas


def _eigenbasis(M: Array, z: complex, count: int) -> Array:
    """Right singular vectors of M - zI for its `count` smallest singular values."""
    dim = M.shape[0]
    shifted = M - z * np.eye(dim) if z.imag else M - z.real * np.eye(dim)
    _, _, vh = np.linalg.svd(shifted)
    return vh[-count:].conj().T


def _real_pairs(W: Array) -> Array:
    columns = []
    for i in range(W.shape[1]):
        columns.extend([W[:, i].real, W[:, i].imag])
    return np.column_stack(columns)


def _adapted_columns(
    M: Array, A: Array, family: _Family
) -> typing.List[typing.Tuple[HormanderBlock, Array, Array]]:
    J0 = standard_j0(M.shape[0] // 2)
    z, count = family.value, family.multiplicity
    if family.kind is BlockKind.C:
        W = _eigenbasis(M, z, count)
        _, rotation = np.linalg.eigh(W.conj().T @ A @ W)
        W = W @ rotation
        columns = []
        for i in range(count):
            a, b = W[:, i].real, W[:, i].imag
            s = float(a @ J0 @ b)
            gamma = 1 if s > 0 else -1
            e = a / np.sqrt(abs(s))
            f = gamma * b / np.sqrt(abs(s))
            block = HormanderBlock.elliptic(1, z.imag, gamma)
            columns.append((block, e[:, None], f[:, None]))
        return columns

    if family.kind is BlockKind.A:
        U = _eigenbasis(M, z, count).real
        V = _eigenbasis(M, -z, count).real
        width = 1
    else:
        U = _real_pairs(_eigenbasis(M, z, count))
        V = _real_pairs(_eigenbasis(M, -z, count))
        width = 2
    F = V @ np.linalg.inv(U.T @ J0 @ V)
    columns = []
    for i in range(count):
        if family.kind is BlockKind.A:
            block = HormanderBlock.hyperbolic(1, z.real)
        else:
            block = HormanderBlock.loxodromic(1, z.real, z.imag)
        cols = slice(width * i, width * (i + 1))
        columns.append((block, U[:, cols], F[:, cols]))
    return columns


def classify(H: QuadraticHamiltonian) -> Decomposition:
    H.require_nondegenerate()
    A = H.A
    norm = H.norm
    scale = 1.0 + norm
    M = hamiltonian_matrix(H)
    k_l = signature(H)
    warnings = []

    families = _families(M, norm)
    for i, family in enumerate(families):
        for other in families[i + 1 :]:
            if abs(family.value - other.value) <= CLUSTER_RTOL * scale:
                message = (
                    f"near-degenerate eigenvalue families at {family.value:.9g} and "
                    f"{other.value:.9g}: classification not certified"
                )
                logger.warning(message)
                warnings.append(message)
    box_sizes = {}
    for family in families:
        if family.multiplicity > 1 and family.spread > EQUAL_RTOL * scale:
            message = (
                f"near-degenerate eigenvalue family at {family.value:.6g}: "
                "classification not certified"
            )
            logger.warning(message)
            warnings.append(message)
        box_sizes[family] = _jordan_boxes(M, family.value, family.multiplicity, scale)
        logger.debug("family %s at %s: boxes %s", family.kind.value, family.value, box_sizes[family])

    semisimple = all(size == 1 for sizes in box_sizes.values() for size in sizes)
    if not semisimple:
        blocks = []
        for family in families:
            sizes = box_sizes[family]
            if family.kind is BlockKind.A:
                blocks += [HormanderBlock.hyperbolic(m, family.value.real) for m in sizes]
            elif family.kind is BlockKind.B:
                blocks += [
                    HormanderBlock.loxodromic(m, family.value.real, family.value.imag)
                    for m in sizes
                ]
            else:
                gammas = _elliptic_gammas(M, A, family.value.imag, sizes)
                if None in gammas:
                    message = f"gamma unresolved for the ±i{family.value.imag:.6g} family"
                    logger.warning(message)
                    warnings.append(message)
                blocks += [
                    HormanderBlock.elliptic(m, family.value.imag, gamma)
                    for m, gamma in zip(sizes, gammas)
                ]
        blocks.sort(key=HormanderBlock.sort_key)
        return Decomposition(tuple(blocks), k_l, False, warnings=tuple(warnings))

    entries = []
    for family in families:
        entries.extend(_adapted_columns(M, A, family))
    entries.sort(key=lambda entry: entry[0].sort_key())
    n = H.n
    S = np.zeros((2 * n, 2 * n))
    offset = 0
    for block, e_cols, f_cols in entries:
        d = block.half_dimension
        S[:, offset : offset + d] = e_cols
        S[:, n + offset : n + offset + d] = f_cols
        offset += d

    decomposition = Decomposition(
        tuple(entry[0] for entry in entries), k_l, True, warnings=tuple(warnings)
    )
    if not is_symplectic(S):
        message = "adapted basis failed the symplectic check; transform dropped"
        logger.warning(message)
        return Decomposition(decomposition.blocks, k_l, True, warnings=tuple(warnings + [message]))
    residual = float(np.abs(S.T @ A @ S - decomposition.normal_form_matrix()).max())
    if residual > RESIDUAL_TOL * max(1.0, norm):
        message = f"normal-form residual {residual:.3e} exceeds tolerance"
        logger.warning(message)
        warnings.append(message)
    return Decomposition(
        decomposition.blocks,
        k_l,
        True,
        transform=SymplecticMatrix(S),
        residual=residual,
        warnings=tuple(warnings),
    )
