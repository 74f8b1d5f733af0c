"""
Linear Hamiltonian flows, closed characteristics on the level set H = 0, their
actions and Robbin-Salamon indices, and the grading arithmetic built on them.
"""
import logging
import math
import typing
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import expm, logm, null_space, svd, svdvals
from scipy.optimize import minimize_scalar

from .errors import ResonanceError, UnresolvedError, ValidationError
from .hormander import BlockKind, classify
from .symplectic import (
    Array,
    QuadraticHamiltonian,
    darboux_basis,
    hamiltonian_matrix,
    is_symplectic,
    standard_j0,
    symmetric_part,
    symplectic_left_inverse,
)

logger = logging.getLogger(__name__)

RESONANCE_RTOL = 1e-7
CROSSING_NODES = 2048
CROSSING_RTOL = 1e-8
CROSSING_XATOL = 1e-12
INVARIANCE_RTOL = 1e-8


def flow(H: QuadraticHamiltonian, t: float) -> Array:
    """e^{t J0 A}."""
    return expm(t * hamiltonian_matrix(H))


def _canonical_sign(vector: Array) -> Array:
    significant = np.flatnonzero(np.abs(vector) > 1e-12 * np.abs(vector).max())
    if significant.size and vector[significant[0]] < 0:
        return -vector
    return vector


def _frozen(array: Array) -> Array:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ClosedCharacteristic:
    """
    The loop t ↦ e^{η t M} x0 on [0, 1], M = J0 A, traversing a periodic orbit of
    frequency μ k times. Negative k runs it backwards.
    """

    plane: Array
    mu: float
    k: int
    eta: float
    x0: Array
    action: float
    generator: Array
    cz_transverse: typing.Optional[float] = None

    def __post_init__(self) -> None:
        if self.k == 0:
            raise ValidationError("iterate k must be nonzero")
        if not self.mu > 0:
            raise ValidationError(f"frequency must be positive, got {self.mu}")
        object.__setattr__(self, "plane", _frozen(self.plane))
        object.__setattr__(self, "x0", _frozen(self.x0))
        object.__setattr__(self, "generator", _frozen(self.generator))

    @property
    def dim(self) -> int:
        return self.x0.size

    def loop(self, t: ArrayLike) -> Array:
        times = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([expm(self.eta * s * self.generator) @ self.x0 for s in times])


def _elliptic_plane(M: Array, A: Array, mu: float) -> typing.Optional[typing.Tuple[Array, Array, float]]:
    """Orthonormal basis of the ±iμ eigenplane with x0 direction first, and ρ = max of Q on it."""
    dim = M.shape[0]
    _, _, vh = svd(M @ M + mu**2 * np.eye(dim))
    plane = vh[-2:].T
    values, vectors = np.linalg.eigh(plane.T @ A @ plane)
    rho = float(values[-1])
    if rho <= 1e-12 * max(1.0, float(np.abs(values).max())):
        return None
    if values[1] - values[0] <= 1e-9 * rho:
        # round plane: start on the first coordinate axis that meets it
        axis = int(np.argmax(np.linalg.norm(plane, axis=1) > 1e-8))
        direction = plane @ plane[axis]
        first = direction / np.linalg.norm(direction)
    else:
        first = plane @ vectors[:, 1]
    first = _canonical_sign(first)
    second = plane @ (plane.T @ (standard_j0(dim // 2) @ first))
    second = _canonical_sign(second / np.linalg.norm(second))
    return np.column_stack([first, second]), first, rho


def enumerate_closed_characteristics(
    H: QuadraticHamiltonian, k_max: int
) -> typing.List[ClosedCharacteristic]:
    if k_max < 1:
        raise ValidationError(f"k_max must be >= 1, got {k_max}")
    if H.c <= 0:
        raise ValidationError("closed characteristics are enumerated for c > 0 only")
    decomposition = classify(H)
    mus = sorted(block.primary for block in decomposition.blocks if block.kind is BlockKind.C)
    for low, high in zip(mus, mus[1:]):
        if high - low <= RESONANCE_RTOL * (1.0 + H.norm):
            raise ResonanceError(
                f"elliptic frequencies {low:.9g} and {high:.9g} coincide: orbits form tori"
            )

    M = hamiltonian_matrix(H)
    orbits = []
    for mu in mus:
        found = _elliptic_plane(M, H.A, mu)
        if found is None:
            logger.debug("no closed characteristics in the ±i%.6g plane", mu)
            continue
        plane, direction, rho = found
        x0 = direction * math.sqrt(2.0 * H.c / rho)
        for magnitude in range(1, k_max + 1):
            for k in (magnitude, -magnitude):
                eta = 2.0 * math.pi * k / mu
                orbits.append(ClosedCharacteristic(plane, mu, k, eta, x0, eta * H.c, M))
    return orbits


def loop_action(
    samples: ArrayLike,
    eta: float,
    H: QuadraticHamiltonian,
    velocity: typing.Optional[ArrayLike] = None,
) -> float:
    """
    Action of a loop sampled at t_j = j / N with the primitive λ0 = ι_{x/2} ω0.

    Without ``velocity`` the primitive is summed over secants, Σ ½<J0 v_j, v_{j+1}>.
    """
    v = np.asarray(samples, dtype=float)
    J0 = standard_j0(v.shape[1] // 2)
    if velocity is None:
        primitive = 0.5 * float(np.einsum("ij,ij->", v @ J0.T, np.roll(v, -1, axis=0)))
    else:
        primitive = 0.5 * float(np.mean(np.einsum("ij,ij->i", v @ J0.T, np.asarray(velocity))))
    return primitive - eta * float(np.mean(H(v)))


def orbit_action(
    orbit: ClosedCharacteristic,
    H: QuadraticHamiltonian,
    n_quad: int = 512,
    *,
    exact_derivative: bool = False,
) -> float:
    if n_quad < 3:
        raise ValidationError(f"n_quad must be >= 3, got {n_quad}")
    v = orbit.loop(np.arange(n_quad) / n_quad)
    velocity = orbit.eta * v @ hamiltonian_matrix(H).T if exact_derivative else None
    return loop_action(v, orbit.eta, H, velocity)


def length_action_check(
    orbit: ClosedCharacteristic, H: QuadraticHamiltonian, n_quad: int = 512
) -> typing.Tuple[float, float]:
    if orbit.action == 0:
        raise ValidationError("length/action ratio of a zero-action loop")
    v = orbit.loop(np.arange(n_quad) / n_quad)
    speed = np.linalg.norm(orbit.eta * v @ hamiltonian_matrix(H).T, axis=1)
    length = float(np.mean(speed))
    return length, length / abs(orbit.action)


@dataclass(frozen=True, eq=False)
class SymplecticPath:
    """
    Ψ(t_j) on a uniform grid of [0, 1] with Ψ(0) = I. Between nodes the path is
    interpolated by the one-parameter subgroup through consecutive samples, unless a
    constant generator K with Ψ(t) = e^{tK} is given.
    """

    samples: Array
    generator: typing.Optional[Array] = None

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 3 or samples.shape[1] != samples.shape[2] or samples.shape[1] % 2:
            raise ValidationError(f"samples must be a stack of 2d×2d matrices, got {samples.shape}")
        if samples.shape[0] < 2:
            raise ValidationError("a path needs at least two samples")
        if np.abs(samples[0] - np.eye(samples.shape[1])).max() > 1e-9:
            raise ValidationError("path must start at the identity")
        if not all(is_symplectic(sample) for sample in samples):
            raise ValidationError("path leaves the symplectic group")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.generator is not None:
            object.__setattr__(self, "generator", _frozen(self.generator))

    @classmethod
    def from_generator(cls, K: ArrayLike, nodes: int = CROSSING_NODES) -> "SymplecticPath":
        generator = np.asarray(K, dtype=float)
        times = np.linspace(0.0, 1.0, nodes)
        return cls(np.stack([expm(t * generator) for t in times]), generator)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> Array:
        return np.linspace(0.0, 1.0, self.samples.shape[0])

    def _segment(self, t: float) -> int:
        return min(int(t * (self.samples.shape[0] - 1)), self.samples.shape[0] - 2)

    def local_generator(self, t: float) -> Array:
        """Ψ'(t) Ψ(t)⁻¹."""
        if self.generator is not None:
            return self.generator
        j = self._segment(t)
        step = self.samples[j + 1] @ np.linalg.inv(self.samples[j])
        return np.real(logm(step)) * (self.samples.shape[0] - 1)

    def at(self, t: float) -> Array:
        if self.generator is not None:
            return expm(t * self.generator)
        j = self._segment(t)
        return expm((t - self.times[j]) * self.local_generator(t)) @ self.samples[j]


def _crossing_signature(path: SymplecticPath, t: float, kernel: Array) -> int:
    J0 = standard_j0(path.dim // 2)
    K = path.local_generator(t)
    form = kernel.T @ symmetric_part(-J0 @ K) @ kernel
    values = np.linalg.eigvalsh(symmetric_part(form))
    if np.any(np.abs(values) <= CROSSING_RTOL * max(1.0, float(np.linalg.norm(K, 2)))):
        raise UnresolvedError(f"degenerate crossing form at t = {t:.12g}")
    return int(np.sum(values > 0) - np.sum(values < 0))


def _kernel(matrix: Array, tol: float) -> Array:
    _, singular_values, vh = svd(matrix)
    count = max(1, int(np.sum(singular_values <= tol)))
    return vh[-count:].T


def rs_index(path: SymplecticPath) -> float:
    """
    Robbin-Salamon index: signatures of the crossing forms <ξ, -J0 Ψ' Ψ⁻¹ ξ> on
    ker(Ψ(t) - I), with half weight at t = 0 and t = 1.
    """
    eye = np.eye(path.dim)
    scale = max(1.0, max(float(np.linalg.norm(sample, 2)) for sample in path.samples))
    accept = CROSSING_RTOL * math.sqrt(scale)

    def distance(t: float) -> float:
        return float(svdvals(path.at(t) - eye)[-1])

    total = 0.5 * _crossing_signature(path, 0.0, eye)
    times = path.times
    sigma = np.array([svdvals(sample - eye)[-1] for sample in path.samples])
    found: typing.List[float] = []
    end_crossing = sigma[-1] <= accept
    for j in range(1, len(times) - 1):
        if not (sigma[j] <= sigma[j - 1] and sigma[j] <= sigma[j + 1]):
            continue
        # offset from the node keeps the relative x-tolerance of the minimiser small
        step = times[j] - times[j - 1]
        result = minimize_scalar(
            lambda offset: distance(times[j] + offset),
            bounds=(-step, step),
            method="bounded",
            options={"xatol": CROSSING_XATOL},
        )
        t_star = float(times[j] + result.x)
        if result.fun > accept or t_star <= 1e-9:
            continue
        if t_star >= 1.0 - 1e-9:
            end_crossing = True
            continue
        if any(abs(t_star - other) < 1e-9 for other in found):
            continue
        found.append(t_star)
        kernel = _kernel(path.at(t_star) - eye, accept)
        total += _crossing_signature(path, t_star, kernel)
        logger.debug("crossing at t = %.12g, kernel dimension %d", t_star, kernel.shape[1])
    if end_crossing:
        total += 0.5 * _crossing_signature(path, 1.0, _kernel(path.samples[-1] - eye, accept))
    return total


def transverse_cz(orbit: ClosedCharacteristic, H: QuadraticHamiltonian) -> typing.Optional[float]:
    """
    Index of the linearized flow on the ω-complement of the orbit plane, or None when
    it cannot be certified. The additive constant relating it to an index in a contact
    trivialisation is not fixed.
    """
    if H.dim < 4:
        raise ValidationError("a two-dimensional phase space has no transverse directions")
    if orbit.dim != H.dim:
        raise ValidationError(f"dimension mismatch: {orbit.dim} != {H.dim}")
    M = hamiltonian_matrix(H)
    J0 = standard_j0(H.n)
    complement = null_space(orbit.plane.T @ J0.T)
    defect = np.abs(M @ complement - complement @ (complement.T @ M @ complement)).max()
    if defect > INVARIANCE_RTOL * (1.0 + float(np.linalg.norm(M, 2))):
        logger.warning("symplectic complement of the orbit plane is not invariant (%.3e)", defect)
        return None
    try:
        T = darboux_basis(complement)
    except ValidationError:
        logger.warning("symplectic complement of the orbit plane is degenerate")
        return None
    K = orbit.eta * symplectic_left_inverse(T) @ M @ T
    try:
        return rs_index(SymplecticPath.from_generator(K))
    except UnresolvedError as error:
        logger.warning("transverse index unresolved for k = %d: %s", orbit.k, error)
        return None


def with_transverse_index(orbit: ClosedCharacteristic, H: QuadraticHamiltonian) -> ClosedCharacteristic:
    return replace(orbit, cz_transverse=transverse_cz(orbit, H))


def grading(mu_sigma: float, mu_cz: float) -> float:
    return mu_sigma + mu_cz + 0.5


def signature_index(dim: int, morse_index: int) -> float:
    """½(dim W^s - dim W^u) = dim/2 - morse_index."""
    if not 0 <= morse_index <= dim:
        raise ValidationError(f"Morse index {morse_index} outside [0, {dim}]")
    return dim / 2 - morse_index


def moduli_dimension(cz_minus: float, cz_plus: float, dim_minus: int, dim_plus: int) -> float:
    """Dimension of the space of Floer trajectories between critical components."""
    return cz_plus - cz_minus + 0.5 * (dim_minus + dim_plus)


def cascade_dimension(mu_minus: float, mu_plus: float) -> float:
    """Dimension of the space of flow lines with cascades, modulo the R-action."""
    return mu_plus - mu_minus - 1
