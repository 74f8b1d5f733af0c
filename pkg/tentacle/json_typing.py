"""
Shapes of every JSON document read or written by tentacle.

Matrices are row-major lists of rows. Floats are emitted with their shortest
round-trip representation, so re-parsing a document gives back equal values.
"""
import sys
from typing import Dict, List, Literal, Optional, TypedDict, Union

if sys.version_info >= (3, 11):
    from typing import NotRequired
else:
    from typing_extensions import NotRequired

Matrix = List[List[float]]
Vector = List[float]


class HamiltonianDocument(TypedDict):
    dim: int
    A: Matrix
    c: float


# "lambda" is a keyword, so the block parameter shapes use the functional syntax.
HyperbolicParams = TypedDict("HyperbolicParams", {"lambda": float})

LoxodromicParams = TypedDict("LoxodromicParams", {"lambda1": float, "lambda2": float})


class EllipticParams(TypedDict):
    mu: float
    # null when the sign could not be resolved from the signature
    gamma: Optional[int]


class BlockDocument(TypedDict):
    kind: Literal["a", "b", "c"]
    m: int
    params: Union[HyperbolicParams, LoxodromicParams, EllipticParams]


class DecompositionDocument(TypedDict):
    blocks: List[BlockDocument]
    semisimple: bool
    signature: List[int]
    residual: Optional[float]
    transform: NotRequired[Optional[Matrix]]
    warnings: NotRequired[List[str]]


class WitnessCertificateDocument(TypedDict):
    field: Matrix
    alphas: Vector
    block_constants: Vector
    c_block_min: float
    c_lower: float
    transform_norm: float
    min_sampled_margin: float


class H2CertificateDocument(TypedDict):
    third_derivative_sup: float
    note: str


class H4CertificateDocument(TypedDict):
    epsilon: float
    min_eigenvalue: float
    feasible_interval: Vector
    radius_bound: float


CertificateDocument = Union[
    WitnessCertificateDocument, H2CertificateDocument, H4CertificateDocument
]


class VerdictDocument(TypedDict):
    axiom: Literal["h1", "h2", "h3", "h4"]
    status: Literal["verified", "criteria_not_met", "unresolved"]
    certificate: Optional[CertificateDocument]
    reason: str


class CriterionDocument(TypedDict):
    block: BlockDocument
    ok: bool
    case: str


class ReportDocument(TypedDict):
    decomposition: DecompositionDocument
    criteria: List[CriterionDocument]
    verdicts: List[VerdictDocument]
    overall: Literal["strongly_tentacular", "criteria_not_met", "unresolved"]


class OrbitDocument(TypedDict):
    plane: Matrix
    mu: float
    k: int
    eta: float
    x0: Vector
    action: float
    cz_transverse: Optional[float]
    length: NotRequired[float]
    ratio: NotRequired[float]
    action_quadrature: NotRequired[float]
    grading: NotRequired[Optional[float]]


class OrbitListDocument(TypedDict):
    orbits: List[OrbitDocument]
    # the additive normalisation of cz_transverse against a contact trivialisation is not fixed
    index_normalization: str


class LoopStateDocument(TypedDict):
    N: int
    eta: float
    v: Matrix


class FlowDiagnosticsDocument(TypedDict):
    s_grid: Vector
    action_series: Vector
    grad_norm_series: Vector
    energy: float
    converged: bool
    escaped: bool
    limit: Optional[LoopStateDocument]
    final: LoopStateDocument


class FlowDocument(TypedDict):
    runs: List[FlowDiagnosticsDocument]


class FullDocument(TypedDict):
    hamiltonian: HamiltonianDocument
    decomposition: DecompositionDocument
    tentacular: NotRequired[ReportDocument]
    orbits: NotRequired[OrbitListDocument]
    flow: NotRequired[FlowDocument]
    errors: NotRequired[Dict[str, str]]
