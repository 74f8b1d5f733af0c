"""
Sufficient criteria for strong tentacularity of a quadratic Hamiltonian.

Each axiom gets a verdict. A verified verdict carries a certificate that can be
re-checked without repeating the search (see ``replay_certificate``). A failed
criterion is reported as ``criteria_not_met``, which is not a proof of the opposite.
"""
import enum
import logging
import math
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigvalsh

from .errors import CriteriaNotMetError, UnresolvedError, ValidationError
from .hormander import BlockKind, Decomposition, HormanderBlock, classify
from .symplectic import (
    Array,
    LinearField,
    QuadraticHamiltonian,
    hamiltonian_matrix,
    is_liouville,
    project_liouville,
    symmetric_part,
    x_alpha_field,
)

logger = logging.getLogger(__name__)

PD_RTOL = 1e-10
SAMPLE_FACTOR = 0.99
REPLAY_RTOL = 1e-9


class Axiom(str, enum.Enum):
    H1 = "h1"
    H2 = "h2"
    H3 = "h3"
    H4 = "h4"


class AxiomStatus(str, enum.Enum):
    VERIFIED = "verified"
    CRITERIA_NOT_MET = "criteria_not_met"
    UNRESOLVED = "unresolved"


class Overall(str, enum.Enum):
    STRONGLY_TENTACULAR = "strongly_tentacular"
    CRITERIA_NOT_MET = "criteria_not_met"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True, eq=False)
class WitnessCertificate:
    """dH(X)(x) >= c_lower |x|² for the Liouville field X(x) = field.L x."""

    field: LinearField
    alphas: typing.Tuple[float, ...]
    block_constants: typing.Tuple[float, ...]
    c_block_min: float
    c_lower: float
    transform_norm: float
    min_sampled_margin: float


@dataclass(frozen=True)
class H2Certificate:
    third_derivative_sup: float = 0.0
    note: str = "third derivative identically zero"


@dataclass(frozen=True)
class H4Certificate:
    """min-eig(B̄ + εA) > 0, so K0 lies in the ball of radius ``radius_bound``."""

    epsilon: float
    min_eigenvalue: float
    feasible_interval: typing.Tuple[float, float]
    radius_bound: float


Certificate = typing.Union[WitnessCertificate, H2Certificate, H4Certificate]


@dataclass(frozen=True, eq=False)
class AxiomVerdict:
    axiom: Axiom
    status: AxiomStatus
    certificate: typing.Optional[Certificate] = None
    reason: str = ""


class BlockCriterion(typing.NamedTuple):
    block: HormanderBlock
    ok: bool
    case: str


@dataclass(frozen=True, eq=False)
class TentacularReport:
    decomposition: Decomposition
    criteria: typing.Tuple[BlockCriterion, ...]
    verdicts: typing.Tuple[AxiomVerdict, ...]
    overall: Overall

    def verdict(self, axiom: typing.Union[Axiom, str]) -> AxiomVerdict:
        wanted = Axiom(axiom)
        for verdict in self.verdicts:
            if verdict.axiom is wanted:
                return verdict
        raise KeyError(wanted)


def check_block_criteria(block: HormanderBlock) -> typing.Tuple[bool, str]:
    if block.kind is BlockKind.C:
        if block.m == 1 and block.gamma == 1:
            return True, "kind c with m = 1 and gamma = +1"
        return False, f"kind c needs m = 1 and gamma = +1 (m = {block.m}, gamma = {block.gamma})"
    name = f"kind {block.kind.value}"
    lam = block.primary
    if block.m == 1:
        return True, f"{name} with m = 1"
    if block.m == 2:
        ok = lam > 1 / math.sqrt(2)
        relation = ">" if ok else "<="
        return ok, f"{name} with m = 2 needs lambda > 1/sqrt(2) ({lam:.6g} {relation} 0.7071)"
    ok = lam > 2.0
    relation = ">" if ok else "<="
    return ok, f"{name} with m = {block.m} needs lambda > 2 ({lam:.6g} {relation} 2)"


def witness_alpha(block: HormanderBlock) -> float:
    """Strictly above the block's threshold: threshold + 1, and 0 for kind C."""
    if block.kind is BlockKind.C:
        return 0.0
    lam = block.primary
    shift = typing.cast(float, block.secondary) if block.kind is BlockKind.B else 0.0
    if block.m == 1:
        threshold = 0.5 if block.kind is BlockKind.A else (lam + shift) / (2 * lam)
    elif block.m == 2:
        threshold = (lam + shift + 1) / (2 * lam - 1)
    else:
        threshold = (lam + shift + 1) / (2 * (lam - 1))
    return threshold + 1.0


def block_constant(block: HormanderBlock, alpha: float) -> float:
    """c_i with dH_i(X^α)(x_i) >= c_i |x_i|² in block coordinates."""
    if block.kind is BlockKind.C:
        return 0.5 * block.primary
    lam = block.primary
    shift = typing.cast(float, block.secondary) if block.kind is BlockKind.B else 0.0
    if block.m == 1:
        if block.kind is BlockKind.A:
            return lam * (alpha - 0.5)
        return alpha * lam - 0.5 * (lam + shift)
    if block.m == 2:
        return alpha * (lam - 0.5) - 0.5 * (lam + shift + 1)
    return alpha * (lam - 1) - 0.5 * (lam + shift + 1)


def block_witness(block: HormanderBlock) -> typing.Tuple[LinearField, float, float]:
    """(X^α on the block, α, c_i)."""
    ok, case = check_block_criteria(block)
    if not ok:
        raise CriteriaNotMetError(case)
    alpha = witness_alpha(block)
    return x_alpha_field(block.half_dimension, alpha), alpha, block_constant(block, alpha)


def _sampled_margin(A: Array, L: Array, c_lower: float, samples: int, radius: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((samples, A.shape[0]))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = directions * rng.uniform(0.0, radius, size=(samples, 1))
    values = np.einsum("ij,ij->i", points @ A, points @ L.T)
    squared = np.einsum("ij,ij->i", points, points)
    mask = squared > 0
    return float(np.min((values[mask] - SAMPLE_FACTOR * c_lower * squared[mask]) / squared[mask]))


def witness_certificate(
    H: QuadraticHamiltonian,
    decomposition: Decomposition,
    *,
    seed: int = 0,
    samples: int = 1000,
    radius: float = 1e3,
) -> WitnessCertificate:
    for block in decomposition.blocks:
        ok, case = check_block_criteria(block)
        if not ok:
            raise CriteriaNotMetError(case)
    if not decomposition.semisimple or decomposition.transform is None:
        raise UnresolvedError("the witness field needs the symplectic transform of a semisimple decomposition")

    fields, alphas, constants = zip(*(block_witness(block) for block in decomposition.blocks))
    S = decomposition.transform.S
    L = S @ decomposition.embed([field.L for field in fields]) @ decomposition.transform.inverse()
    field = project_liouville(L)
    transform_norm = float(np.linalg.norm(S, 2))
    c_block_min = float(min(constants))
    c_lower = c_block_min / transform_norm**2
    margin = _sampled_margin(H.A, field.L, c_lower, samples, radius, seed)
    if margin < 0:
        raise UnresolvedError(f"sampled witness check failed (margin {margin:.3e})")
    logger.debug("witness field: alphas %s, c_lower %.6g, margin %.3e", alphas, c_lower, margin)
    return WitnessCertificate(
        field=field,
        alphas=tuple(float(alpha) for alpha in alphas),
        block_constants=tuple(float(c) for c in constants),
        c_block_min=c_block_min,
        c_lower=c_lower,
        transform_norm=transform_norm,
        min_sampled_margin=margin,
    )


def witness_h1_h3(
    H: QuadraticHamiltonian, decomposition: Decomposition, *, seed: int = 0
) -> typing.Tuple[LinearField, float]:
    certificate = witness_certificate(H, decomposition, seed=seed)
    return certificate.field, certificate.c_lower


def check_h2(H: QuadraticHamiltonian) -> AxiomVerdict:
    return AxiomVerdict(Axiom.H2, AxiomStatus.VERIFIED, H2Certificate())


def bbar(H: QuadraticHamiltonian) -> Array:
    """B̄ = A² + sym((J0 A)²), the matrix of {H, {H, ½|x|²}}."""
    M = hamiltonian_matrix(H)
    M2 = M @ M
    return symmetric_part(H.A @ H.A + symmetric_part(M2))


def b_matrix(m: int, lam: float) -> Array:
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    B = np.diag(np.full(m, 1.0 + 2.0 * lam**2))
    B[0, 0] = 2.0 * lam**2
    B += 2.0 * lam * (np.eye(m, k=1) + np.eye(m, k=-1))
    B += 0.5 * (np.eye(m, k=2) + np.eye(m, k=-2))
    return B


def bbar_block_spectrum(block: HormanderBlock) -> typing.List[float]:
    if block.kind is BlockKind.C:
        raise ValidationError("kind c blocks contribute B̄ = 0")
    return [float(value) for value in eigvalsh(b_matrix(block.m, block.primary))]


def positive_definite_threshold(m: int, lo: float = 0.05, hi: float = 4.0, tol: float = 1e-12) -> float:
    """λ where the smallest eigenvalue of B(m, λ) changes sign, by bisection."""

    def smallest(lam: float) -> float:
        return float(eigvalsh(b_matrix(m, lam))[0])

    if smallest(lo) > 0 or smallest(hi) <= 0:
        raise ValidationError(f"no sign change of min-eig(B) on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if smallest(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _min_eigenvalue_if_pd(matrix: Array, tol: float) -> typing.Optional[float]:
    try:
        cholesky(matrix, lower=True)
    except LinAlgError:
        return None
    smallest = float(eigvalsh(matrix, subset_by_index=[0, 0])[0])
    return smallest if smallest > tol else None


def check_h4(
    H: QuadraticHamiltonian, *, grid_size: int = 41, bisection_steps: int = 30
) -> AxiomVerdict:
    """
    With F = ½|x|², {H, {H, F}} + 2εH = <x, (B̄ + εA) x> - 2εc. A positive definite
    B̄ + εA with smallest eigenvalue κ confines K0 to the ball of radius sqrt(2εc / κ).
    """
    A = H.A
    B = bbar(H)
    tol = PD_RTOL * (1.0 + float(np.linalg.norm(B, 2)))
    grid = (2.0 * H.norm + 1.0) * 2.0 ** -np.arange(grid_size)

    def minimum(epsilon: float) -> typing.Optional[float]:
        return _min_eigenvalue_if_pd(B + epsilon * A, tol)

    scan = [minimum(epsilon) for epsilon in grid]
    logger.debug("h4 grid scan: %s", list(zip(grid.tolist(), scan)))
    feasible = [i for i, value in enumerate(scan) if value is not None]
    if not feasible:
        return AxiomVerdict(
            Axiom.H4,
            AxiomStatus.CRITERIA_NOT_MET,
            reason="B̄ + εA is not positive definite for any ε on the grid",
        )
    best = max(feasible, key=lambda i: typing.cast(float, scan[i]))

    def boundary(inside: float, outside: float) -> float:
        for _ in range(bisection_steps):
            middle = 0.5 * (inside + outside)
            if minimum(middle) is None:
                outside = middle
            else:
                inside = middle
        return inside

    upper = best
    while upper > 0 and scan[upper - 1] is not None:
        upper -= 1
    lower = best
    while lower < grid_size - 1 and scan[lower + 1] is not None:
        lower += 1
    hi = float(grid[0]) if upper == 0 else boundary(float(grid[upper]), float(grid[upper - 1]))
    lo = float(grid[-1]) if lower == grid_size - 1 else boundary(float(grid[lower]), float(grid[lower + 1]))

    epsilon = float(grid[best])
    kappa = typing.cast(float, scan[best])
    radius = math.sqrt(max(0.0, 2.0 * epsilon * H.c / kappa))
    return AxiomVerdict(
        Axiom.H4,
        AxiomStatus.VERIFIED,
        H4Certificate(epsilon, kappa, (lo, hi), radius),
    )


def _witness_verdicts(
    H: QuadraticHamiltonian, decomposition: Decomposition, seed: int
) -> typing.Tuple[AxiomVerdict, AxiomVerdict]:
    try:
        certificate = witness_certificate(H, decomposition, seed=seed)
    except CriteriaNotMetError as error:
        return (
            AxiomVerdict(Axiom.H1, AxiomStatus.CRITERIA_NOT_MET, reason=str(error)),
            AxiomVerdict(Axiom.H3, AxiomStatus.CRITERIA_NOT_MET, reason=str(error)),
        )
    except UnresolvedError as error:
        return (
            AxiomVerdict(Axiom.H1, AxiomStatus.UNRESOLVED, reason=str(error)),
            AxiomVerdict(Axiom.H3, AxiomStatus.UNRESOLVED, reason=str(error)),
        )
    h1 = AxiomVerdict(Axiom.H1, AxiomStatus.VERIFIED, certificate)
    if H.c == 0:
        h3 = AxiomVerdict(
            Axiom.H3,
            AxiomStatus.CRITERIA_NOT_MET,
            certificate,
            reason="c = 0: the origin lies on the level set, which is not regular there",
        )
    else:
        h3 = AxiomVerdict(Axiom.H3, AxiomStatus.VERIFIED, certificate)
    return h1, h3


def overall_status(verdicts: typing.Sequence[AxiomVerdict]) -> Overall:
    statuses = [verdict.status for verdict in verdicts]
    if all(status is AxiomStatus.VERIFIED for status in statuses):
        return Overall.STRONGLY_TENTACULAR
    if any(status is AxiomStatus.UNRESOLVED for status in statuses):
        return Overall.UNRESOLVED
    return Overall.CRITERIA_NOT_MET


def full_report(
    H: QuadraticHamiltonian, *, seed: int = 0, jobs: typing.Optional[int] = None
) -> TentacularReport:
    decomposition = classify(H)
    with ThreadPoolExecutor(thread_name_prefix="tentacle-criteria", max_workers=jobs) as executor:
        results = list(executor.map(check_block_criteria, decomposition.blocks))
    criteria = tuple(
        BlockCriterion(block, ok, case) for block, (ok, case) in zip(decomposition.blocks, results)
    )
    h1, h3 = _witness_verdicts(H, decomposition, seed)
    verdicts = (h1, check_h2(H), h3, check_h4(H))
    for verdict in verdicts:
        logger.info("%s: %s %s", verdict.axiom.value, verdict.status.value, verdict.reason)
    return TentacularReport(decomposition, criteria, verdicts, overall_status(verdicts))


def replay_certificate(verdict: AxiomVerdict, H: QuadraticHamiltonian) -> bool:
    """Recheck a verified verdict from its certificate alone."""
    if verdict.status is not AxiomStatus.VERIFIED:
        return False
    certificate = verdict.certificate
    if verdict.axiom is Axiom.H2:
        return isinstance(certificate, H2Certificate) and certificate.third_derivative_sup == 0.0
    if verdict.axiom in (Axiom.H1, Axiom.H3):
        if not isinstance(certificate, WitnessCertificate):
            return False
        if verdict.axiom is Axiom.H3 and H.c == 0:
            return False
        L = certificate.field.L
        if L.shape != H.A.shape or not is_liouville(certificate.field):
            return False
        smallest = float(eigvalsh(symmetric_part(H.A @ L))[0])
        slack = REPLAY_RTOL * max(1.0, float(np.linalg.norm(H.A, 2) * np.linalg.norm(L, 2)))
        return certificate.c_lower > 0 and smallest >= certificate.c_lower - slack
    if not isinstance(certificate, H4Certificate):
        return False
    matrix = bbar(H) + certificate.epsilon * H.A
    smallest = float(eigvalsh(matrix)[0])
    slack = REPLAY_RTOL * (1.0 + float(np.linalg.norm(matrix, 2)))
    return smallest > 0 and abs(smallest - certificate.min_eigenvalue) <= slack
