"""
Discretized action functional on loops with period, its gradient and Hessian in the
metric (1/N) Σ <ξ_j, ξ'_j> + σσ', the positive gradient flow and Newton refinement
of critical points.

Loops are sampled at t_j = j / N. The derivative operator is either ``central``,
(v_{j+1} - v_{j-1}) N / 2, or ``spectral`` (Fourier, Nyquist mode dropped).
"""
import logging
import math
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import eigvalsh, lstsq

from .dynamics import ClosedCharacteristic
from .errors import (
    FlowEscapeError,
    NewtonConvergenceError,
    NewtonPreconditionError,
    ValidationError,
)
from .symplectic import Array, QuadraticHamiltonian, hamiltonian_matrix, standard_j0

logger = logging.getLogger(__name__)

Scheme = typing.Literal["central", "spectral"]
SCHEMES = ("central", "spectral")

HESSIAN_LIMIT = 8192
ESCAPE_NORM = 1e6
CFL_CONSTANT = 0.5
BAND_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class LoopState:
    v: Array
    eta: float

    def __post_init__(self) -> None:
        v = np.array(self.v, dtype=float)
        if v.ndim != 2 or v.shape[1] < 2 or v.shape[1] % 2:
            raise ValidationError(f"v must be N samples of an even-dimensional point, got {v.shape}")
        N = v.shape[0]
        if N < 16 or N & (N - 1):
            raise ValidationError(f"N must be a power of two >= 16, got {N}")
        if not np.all(np.isfinite(v)) or not math.isfinite(self.eta):
            raise ValidationError("loop state has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def N(self) -> int:
        return self.v.shape[0]

    @property
    def dim(self) -> int:
        return self.v.shape[1]

    def flat(self) -> Array:
        return np.concatenate([self.v.ravel(), [self.eta]])

    @classmethod
    def from_flat(cls, vector: ArrayLike, N: int, dim: int) -> "LoopState":
        values = np.asarray(vector, dtype=float)
        return cls(values[:-1].reshape(N, dim), float(values[-1]))


class LoopGradient(typing.NamedTuple):
    v: Array
    eta: float

    def flat(self) -> Array:
        return np.concatenate([self.v.ravel(), [self.eta]])


def metric_inner(v1: Array, eta1: float, v2: Array, eta2: float) -> float:
    return float(np.einsum("ij,ij->", v1, v2) / v1.shape[0] + eta1 * eta2)


def metric_norm(v: Array, eta: float) -> float:
    return math.sqrt(metric_inner(v, eta, v, eta))


def _check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown derivative scheme {scheme!r}, expected one of {SCHEMES}")


def derivative(v: Array, scheme: Scheme = "central") -> Array:
    """Periodic t-derivative of samples along axis 0."""
    N = v.shape[0]
    if scheme == "central":
        return (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) * (N / 2)
    _check_scheme(scheme)
    wavenumbers = 2j * np.pi * np.fft.rfftfreq(N, d=1.0 / N)
    wavenumbers[-1] = 0.0
    shape = (-1,) + (1,) * (v.ndim - 1)
    return np.fft.irfft(np.fft.rfft(v, axis=0) * wavenumbers.reshape(shape), n=N, axis=0)


def band_limit(v: Array, bandwidth: typing.Optional[int]) -> Array:
    """Metric-orthogonal projection onto Fourier modes |k| <= bandwidth."""
    if bandwidth is None:
        return v
    coefficients = np.fft.rfft(v, axis=0)
    coefficients[bandwidth + 1 :] = 0.0
    return np.fft.irfft(coefficients, n=v.shape[0], axis=0)


def loop_bandwidth(v: Array, rtol: float = BAND_RTOL) -> int:
    """Smallest bandwidth whose projection moves v by at most rtol relative."""
    magnitudes = np.linalg.norm(np.fft.rfft(v, axis=0), axis=1)
    # tail[k] is the norm of the modes >= k
    tail = np.sqrt(np.cumsum(magnitudes[::-1] ** 2))[::-1]
    if tail[0] == 0.0:
        return 0
    return int(np.nonzero(tail > rtol * tail[0])[0][-1])


def _check_dims(u: LoopState, H: QuadraticHamiltonian) -> None:
    if u.dim != H.dim:
        raise ValidationError(f"dimension mismatch: loop lives in R^{u.dim}, H in R^{H.dim}")


def _action(v: Array, eta: float, H: QuadraticHamiltonian, scheme: Scheme) -> float:
    J0 = standard_j0(v.shape[1] // 2)
    primitive = 0.5 * float(np.einsum("ij,ij->", v @ J0.T, derivative(v, scheme))) / v.shape[0]
    return primitive - eta * float(np.mean(H(v)))


def _gradient(v: Array, eta: float, H: QuadraticHamiltonian, scheme: Scheme) -> LoopGradient:
    J0 = standard_j0(v.shape[1] // 2)
    dv = -derivative(v, scheme) @ J0.T - eta * v @ H.A
    return LoopGradient(dv, -float(np.mean(H(v))))


def discrete_action(u: LoopState, H: QuadraticHamiltonian, scheme: Scheme = "central") -> float:
    _check_dims(u, H)
    _check_scheme(scheme)
    return _action(u.v, u.eta, H, scheme)


def discrete_gradient(u: LoopState, H: QuadraticHamiltonian, scheme: Scheme = "central") -> LoopGradient:
    """(-J0 [∂_t v - η X_H(v)], -(1/N) Σ H(v_j))."""
    _check_dims(u, H)
    _check_scheme(scheme)
    return _gradient(u.v, u.eta, H, scheme)


def _differentiation_matrix(N: int, scheme: Scheme) -> Array:
    return derivative(np.eye(N), scheme)


def discrete_hessian(
    u: LoopState,
    H: QuadraticHamiltonian,
    scheme: Scheme = "central",
    *,
    symmetric: bool = True,
) -> Array:
    """
    Hessian on flattened (v, η). With ``symmetric`` it is G^{-½} E G^{-½}, E the
    Euclidean second derivative, otherwise the metric Hessian G⁻¹ E.
    """
    _check_dims(u, H)
    _check_scheme(scheme)
    N, dim = u.v.shape
    if N * dim > HESSIAN_LIMIT:
        raise ValidationError(f"Hessian too large: N * 2n = {N * dim} > {HESSIAN_LIMIT}")
    D = _differentiation_matrix(N, scheme)
    J0 = standard_j0(dim // 2)
    coupling = -(u.v @ H.A).ravel()
    size = N * dim + 1
    hessian = np.zeros((size, size))
    hessian[:-1, :-1] = -np.kron(D, J0) - u.eta * np.kron(np.eye(N), H.A)
    if symmetric:
        hessian[:-1, -1] = coupling / math.sqrt(N)
        hessian[-1, :-1] = coupling / math.sqrt(N)
        return 0.5 * (hessian + hessian.T)
    hessian[:-1, -1] = coupling
    hessian[-1, :-1] = coupling / N
    return hessian


def discrete_hessian_spectrum(
    u: LoopState, H: QuadraticHamiltonian, n_low: int, scheme: Scheme = "central"
) -> typing.List[float]:
    """The n_low eigenvalues of smallest magnitude."""
    if n_low < 1:
        raise ValidationError(f"n_low must be >= 1, got {n_low}")
    values = eigvalsh(discrete_hessian(u, H, scheme))
    return [float(value) for value in sorted(values, key=abs)[:n_low]]


class MorseBottReport(typing.NamedTuple):
    kernel_dimension: int
    expected_dimension: int
    kernel_tol: float
    ok: bool
    low_spectrum: typing.List[float]


def morse_bott_check(
    u: LoopState,
    H: QuadraticHamiltonian,
    expected_dimension: int,
    *,
    scheme: Scheme = "central",
    kernel_tol: typing.Optional[float] = None,
) -> MorseBottReport:
    """Compare the Hessian near-kernel with the dimension of the critical component."""
    tol = 10.0 / u.N**2 if kernel_tol is None else kernel_tol
    spectrum = discrete_hessian_spectrum(u, H, expected_dimension + 4, scheme)
    kernel = sum(1 for value in spectrum if abs(value) < tol)
    return MorseBottReport(kernel, expected_dimension, tol, kernel == expected_dimension, spectrum)


def critical_loop(
    orbit: ClosedCharacteristic, N: int, scheme: typing.Optional[Scheme] = None
) -> LoopState:
    """
    Samples of a closed characteristic. With a scheme, η is replaced by the period at
    which the sampled circle is an exact critical point of that discretization.
    """
    v = orbit.loop(np.arange(N) / N)
    if scheme is None or scheme == "spectral":
        return LoopState(v, orbit.eta)
    _check_scheme(scheme)
    frequency = N * math.sin(2 * math.pi * orbit.k / N)
    return LoopState(v, frequency / orbit.mu)


def _residual(
    v: Array, eta: float, H: QuadraticHamiltonian, M: Array, scheme: Scheme
) -> typing.Tuple[Array, float]:
    return derivative(v, scheme) - eta * v @ M.T, float(np.mean(H(v)))


def newton_refine(
    u0: LoopState,
    H: QuadraticHamiltonian,
    scheme: Scheme = "central",
    *,
    tol: float = 1e-10,
    max_iter: int = 50,
    basin_tol: float = 0.1,
) -> LoopState:
    """
    Gauss-Newton on R(v, η) = (∂_t v - η X_H(v), (1/N) Σ H(v_j)). Steps are the
    minimum-norm least-squares solutions in the loop metric, which handles the
    reparametrization degeneracy of critical circles.
    """
    _check_dims(u0, H)
    _check_scheme(scheme)
    start = _gradient(u0.v, u0.eta, H, scheme)
    if metric_norm(start.v, start.eta) >= basin_tol:
        raise NewtonPreconditionError(
            f"start point outside the basin: gradient norm {metric_norm(start.v, start.eta):.3e}"
        )
    N, dim = u0.v.shape
    M = hamiltonian_matrix(H)
    D = _differentiation_matrix(N, scheme)
    weight = 1.0 / math.sqrt(N)
    v, eta = u0.v.copy(), u0.eta
    rv, r_eta = _residual(v, eta, H, M, scheme)
    norm = metric_norm(rv, r_eta)
    for iteration in range(max_iter):
        if norm < tol:
            break
        jacobian = np.zeros((N * dim + 1, N * dim + 1))
        jacobian[:-1, :-1] = np.kron(D, np.eye(dim)) - eta * np.kron(np.eye(N), M)
        jacobian[:-1, -1] = -(v @ M.T).ravel()
        jacobian[-1, :-1] = (v @ H.A).ravel() / N
        # rows and unknowns scaled to the loop metric
        scaling = np.full(N * dim + 1, weight)
        scaling[-1] = 1.0
        system = (jacobian * scaling[:, None]) / scaling[None, :]
        rhs = -np.concatenate([rv.ravel(), [r_eta]]) * scaling
        solution = lstsq(system, rhs, cond=1e-10)[0]
        step = solution / scaling
        v = v + step[:-1].reshape(N, dim)
        eta = eta + float(step[-1])
        rv, r_eta = _residual(v, eta, H, M, scheme)
        norm = metric_norm(rv, r_eta)
        logger.debug("newton iteration %d: residual %.3e", iteration + 1, norm)
    state = LoopState(v, eta)
    if norm >= tol:
        logger.warning("newton refinement stopped at residual %.3e", norm)
        raise NewtonConvergenceError(f"no convergence after {max_iter} iterations", norm, state)
    return state


@dataclass(frozen=True, eq=False)
class FlowDiagnostics:
    s_grid: typing.Tuple[float, ...]
    action_series: typing.Tuple[float, ...]
    grad_norm_series: typing.Tuple[float, ...]
    energy: float
    converged: bool
    final: LoopState
    limit: typing.Optional[LoopState] = None
    escaped: bool = False
    snapshots: typing.Tuple[typing.Tuple[float, LoopState], ...] = field(default=())


def stability_bound(H: QuadraticHamiltonian, N: int) -> float:
    """Largest admissible step, c_cfl / N with c_cfl = 0.5 / (1 + ||A||)."""
    return CFL_CONSTANT / ((1.0 + H.norm) * N)


def integrate_flow(
    u0: LoopState,
    H: QuadraticHamiltonian,
    s_max: float,
    ds: typing.Optional[float] = None,
    scheme: Scheme = "central",
    *,
    bandwidth: typing.Optional[int] = 2,
    snap_every: int = 10,
    grad_tol: float = 1e-8,
    keep_snapshots: bool = False,
) -> FlowDiagnostics:
    """
    RK4 for ∂_s u = +∇A(u) on the Fourier modes |k| <= bandwidth.

    The band is widened to hold every mode of ``u0`` (see ``loop_bandwidth``), so the
    initial loop is never truncated. ``bandwidth=None`` keeps all modes.

    Energy accumulates the RK4 quadrature of ||∂_s u||², so it matches the action
    increase up to the integrator's error.
    """
    _check_dims(u0, H)
    _check_scheme(scheme)
    bound = stability_bound(H, u0.N)
    if ds is None:
        ds = bound
    if not 0 < ds <= bound * (1 + 1e-12):
        raise ValidationError(f"step {ds:.3e} violates the stability bound {bound:.3e}")
    if not s_max > 0:
        raise ValidationError(f"s_max must be positive, got {s_max}")
    if bandwidth is not None and bandwidth < 0:
        raise ValidationError(f"bandwidth must be >= 0, got {bandwidth}")
    if bandwidth is not None:
        needed = loop_bandwidth(u0.v)
        if needed > bandwidth:
            logger.info("bandwidth widened from %d to %d to hold the initial loop", bandwidth, needed)
            bandwidth = needed
    steps = max(1, math.ceil(s_max / ds - 1e-9))
    ds = s_max / steps

    def rhs(v: Array, eta: float) -> LoopGradient:
        gradient = _gradient(v, eta, H, scheme)
        return LoopGradient(band_limit(gradient.v, bandwidth), gradient.eta)

    v, eta = band_limit(u0.v, bandwidth), u0.eta
    s_grid, actions, grad_norms, snapshots = [], [], [], []
    energy = 0.0
    converged = False

    def record(s: float, k1: LoopGradient) -> None:
        s_grid.append(s)
        actions.append(_action(v, eta, H, scheme))
        grad_norms.append(metric_norm(k1.v, k1.eta))
        if keep_snapshots:
            snapshots.append((s, LoopState(v, eta)))

    def diagnostics(escaped: bool = False) -> FlowDiagnostics:
        final = LoopState(v, eta) if np.all(np.isfinite(v)) and math.isfinite(eta) else LoopState(u0.v, u0.eta)
        return FlowDiagnostics(
            tuple(s_grid),
            tuple(actions),
            tuple(grad_norms),
            energy,
            converged,
            final,
            final if converged else None,
            escaped,
            tuple(snapshots),
        )

    logger.info("flow: N = %d, s_max = %g, ds = %.3e, %d steps", u0.N, s_max, ds, steps)
    for step in range(steps + 1):
        k1 = rhs(v, eta)
        if step % snap_every == 0 or step == steps:
            record(step * ds, k1)
        if metric_norm(k1.v, k1.eta) < grad_tol:
            converged = True
            if s_grid[-1] != step * ds:
                record(step * ds, k1)
            logger.info("flow converged at s = %g", step * ds)
            break
        if step == steps:
            break
        k2 = rhs(v + 0.5 * ds * k1.v, eta + 0.5 * ds * k1.eta)
        k3 = rhs(v + 0.5 * ds * k2.v, eta + 0.5 * ds * k2.eta)
        k4 = rhs(v + ds * k3.v, eta + ds * k3.eta)
        v = v + ds / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v)
        eta = eta + ds / 6 * (k1.eta + 2 * k2.eta + 2 * k3.eta + k4.eta)
        energy += ds / 6 * sum(
            weight * metric_inner(k.v, k.eta, k.v, k.eta)
            for weight, k in ((1, k1), (2, k2), (2, k3), (1, k4))
        )
        if not (np.all(np.isfinite(v)) and math.isfinite(eta)) or max(
            float(np.abs(v).max()), abs(eta)
        ) > ESCAPE_NORM:
            logger.warning("flow escaped at s = %g", (step + 1) * ds)
            raise FlowEscapeError(f"loop norm exceeded {ESCAPE_NORM:g}", diagnostics(escaped=True))
    return diagnostics()


def integrate_batch(
    states: typing.Sequence[LoopState],
    H: QuadraticHamiltonian,
    s_max: float,
    ds: typing.Optional[float] = None,
    scheme: Scheme = "central",
    *,
    jobs: typing.Optional[int] = None,
    **options: typing.Any,
) -> typing.List[FlowDiagnostics]:
    """Independent flows, results in input order. Escapes come back as diagnostics."""

    def run(state: LoopState) -> FlowDiagnostics:
        try:
            return integrate_flow(state, H, s_max, ds, scheme, **options)
        except FlowEscapeError as error:
            return error.diagnostics

    with ThreadPoolExecutor(thread_name_prefix="tentacle-flow", max_workers=jobs) as executor:
        return list(executor.map(run, states))
