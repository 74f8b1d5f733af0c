"""
JSON documents and binary loop snapshots.

Binary snapshot layout: magic b"RFLO", version, N and dim as little-endian u32,
then little-endian float64 values, η first and v row-major.
"""
import json
import math
import struct
import typing

import numpy as np

from .dynamics import ClosedCharacteristic
from .errors import ValidationError
from .floer import FlowDiagnostics, LoopState
from .hormander import Decomposition, HormanderBlock
from .json_typing import (
    BlockDocument,
    CertificateDocument,
    DecompositionDocument,
    FlowDiagnosticsDocument,
    HamiltonianDocument,
    LoopStateDocument,
    OrbitDocument,
    ReportDocument,
    VerdictDocument,
)
from .symplectic import Array, QuadraticHamiltonian
from .tentacular import (
    AxiomVerdict,
    H2Certificate,
    H4Certificate,
    TentacularReport,
    WitnessCertificate,
)

SNAPSHOT_MAGIC = b"RFLO"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def _matrix(array: Array) -> typing.List[typing.List[float]]:
    return [[float(value) for value in row] for row in np.asarray(array)]


def _vector(array: typing.Any) -> typing.List[float]:
    return [float(value) for value in np.asarray(array).ravel()]


def hamiltonian_from_json(document: typing.Any) -> QuadraticHamiltonian:
    if not isinstance(document, dict):
        raise ValidationError("Hamiltonian document must be a JSON object")
    missing = [key for key in ("dim", "A", "c") if key not in document]
    if missing:
        raise ValidationError(f"Hamiltonian document lacks {missing}")
    dim = document["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise ValidationError("dim must be an integer")
    rows = document["A"]
    if not isinstance(rows, list) or len(rows) != dim or any(
        not isinstance(row, list) or len(row) != dim for row in rows
    ):
        raise ValidationError(f"A must be a {dim}×{dim} list of rows")
    try:
        A = np.array(rows, dtype=float)
        c = float(document["c"])
    except (TypeError, ValueError) as error:
        raise ValidationError(f"non-numeric entry: {error}") from error
    return QuadraticHamiltonian(A, c)


def hamiltonian_to_json(H: QuadraticHamiltonian) -> HamiltonianDocument:
    return {"dim": H.dim, "A": _matrix(H.A), "c": H.c}


def block_to_json(block: HormanderBlock) -> BlockDocument:
    params = {key: (float(value) if isinstance(value, float) else value) for key, value in block.params.items()}
    return typing.cast(BlockDocument, {"kind": block.kind.value, "m": block.m, "params": params})


def decomposition_to_json(decomposition: Decomposition) -> DecompositionDocument:
    document: DecompositionDocument = {
        "blocks": [block_to_json(block) for block in decomposition.blocks],
        "semisimple": decomposition.semisimple,
        "signature": list(decomposition.signature),
        "residual": decomposition.residual,
    }
    document["transform"] = None if decomposition.transform is None else _matrix(decomposition.transform.S)
    document["warnings"] = list(decomposition.warnings)
    return document


def _certificate_to_json(certificate: typing.Any) -> typing.Optional[CertificateDocument]:
    if isinstance(certificate, WitnessCertificate):
        return {
            "field": _matrix(certificate.field.L),
            "alphas": list(certificate.alphas),
            "block_constants": list(certificate.block_constants),
            "c_block_min": certificate.c_block_min,
            "c_lower": certificate.c_lower,
            "transform_norm": certificate.transform_norm,
            "min_sampled_margin": certificate.min_sampled_margin,
        }
    if isinstance(certificate, H2Certificate):
        return {"third_derivative_sup": certificate.third_derivative_sup, "note": certificate.note}
    if isinstance(certificate, H4Certificate):
        return {
            "epsilon": certificate.epsilon,
            "min_eigenvalue": certificate.min_eigenvalue,
            "feasible_interval": list(certificate.feasible_interval),
            "radius_bound": certificate.radius_bound,
        }
    return None


def verdict_to_json(verdict: AxiomVerdict) -> VerdictDocument:
    return typing.cast(
        VerdictDocument,
        {
            "axiom": verdict.axiom.value,
            "status": verdict.status.value,
            "certificate": _certificate_to_json(verdict.certificate),
            "reason": verdict.reason,
        },
    )


def report_to_json(report: TentacularReport) -> ReportDocument:
    return typing.cast(
        ReportDocument,
        {
            "decomposition": decomposition_to_json(report.decomposition),
            "criteria": [
                {"block": block_to_json(item.block), "ok": item.ok, "case": item.case}
                for item in report.criteria
            ],
            "verdicts": [verdict_to_json(verdict) for verdict in report.verdicts],
            "overall": report.overall.value,
        },
    )


def orbit_to_json(orbit: ClosedCharacteristic, **extra: typing.Any) -> OrbitDocument:
    document: OrbitDocument = {
        "plane": _matrix(orbit.plane),
        "mu": orbit.mu,
        "k": orbit.k,
        "eta": orbit.eta,
        "x0": _vector(orbit.x0),
        "action": orbit.action,
        "cz_transverse": orbit.cz_transverse,
    }
    document.update(extra)  # type: ignore[typeddict-item]
    return document


def loop_state_to_json(state: LoopState) -> LoopStateDocument:
    return {"N": state.N, "eta": state.eta, "v": _matrix(state.v)}


def loop_state_from_json(document: typing.Any) -> LoopState:
    if not isinstance(document, dict) or not {"N", "eta", "v"} <= set(document):
        raise ValidationError("loop state document needs N, eta and v")
    try:
        v = np.array(document["v"], dtype=float)
        eta = float(document["eta"])
    except (TypeError, ValueError) as error:
        raise ValidationError(f"malformed loop state: {error}") from error
    if v.ndim != 2 or v.shape[0] != document["N"]:
        raise ValidationError(f"v must hold N = {document['N']} rows")
    return LoopState(v, eta)


def diagnostics_to_json(diagnostics: FlowDiagnostics) -> FlowDiagnosticsDocument:
    return {
        "s_grid": list(diagnostics.s_grid),
        "action_series": list(diagnostics.action_series),
        "grad_norm_series": list(diagnostics.grad_norm_series),
        "energy": diagnostics.energy,
        "converged": diagnostics.converged,
        "escaped": diagnostics.escaped,
        "limit": None if diagnostics.limit is None else loop_state_to_json(diagnostics.limit),
        "final": loop_state_to_json(diagnostics.final),
    }


def _encode(value: typing.Any, depth: int) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"out of range float value {value!r} is not JSON compliant")
        return format(value, ".17g")
    if value is None or isinstance(value, (bool, int, str)):
        return json.dumps(value, ensure_ascii=False)
    inner, outer = "  " * (depth + 1), "  " * depth
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(key), ensure_ascii=False)}: {_encode(item, depth + 1)}"
            for key, item in value.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{outer}}}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [inner + _encode(item, depth + 1) for item in value]
        return "[\n" + ",\n".join(items) + f"\n{outer}]"
    raise TypeError(f"object of type {type(value).__name__} is not JSON serializable")


def dumps(document: typing.Any) -> str:
    """
    Deterministic JSON in the layout of ``json.dumps(indent=2)``: insertion-ordered
    keys, floats with 17 significant digits, non-finite floats rejected.
    """
    return _encode(document, 0) + "\n"


def write_snapshot(state: LoopState) -> bytes:
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, state.N, state.dim)
    body = np.concatenate([[state.eta], state.v.ravel()]).astype("<f8").tobytes()
    return header + body


def read_snapshot(data: bytes) -> LoopState:
    if len(data) < _HEADER.size:
        raise ValidationError("snapshot shorter than its header")
    magic, version, N, dim = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValidationError(f"bad snapshot magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValidationError(f"unsupported snapshot version {version}")
    expected = _HEADER.size + 8 * (1 + N * dim)
    if len(data) != expected:
        raise ValidationError(f"snapshot has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return LoopState(values[1:].reshape(N, dim).astype(float), float(values[0]))
