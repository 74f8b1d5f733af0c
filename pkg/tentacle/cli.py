"""
Command line entry point.

Exit status: 0 on success, 2 when the input or options are invalid, 3 when the
analysis ran but could not certify its answer (the partial document is still written).
"""
import argparse
import json
import logging
import math
import os
import sys
import typing
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import codec
from .dynamics import (
    ClosedCharacteristic,
    enumerate_closed_characteristics,
    grading,
    length_action_check,
    orbit_action,
    signature_index,
    with_transverse_index,
)
from .errors import ResonanceError, TentacleError, UnresolvedError, ValidationError
from .floer import SCHEMES, FlowDiagnostics, LoopState, critical_loop, integrate_batch
from .hormander import Decomposition, classify
from .symplectic import QuadraticHamiltonian
from .tentacular import Overall, TentacularReport, full_report

logger = logging.getLogger(__name__)

COMMANDS = ("classify", "check", "orbits", "flow", "report")
FORMATS = ("json", "text")
LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNRESOLVED = 3

INDEX_NORMALIZATION = "linearized flow on the symplectic complement of the orbit plane, additive constant unfixed"


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Path
    output: typing.Optional[Path] = None
    format: str = "json"
    k_max: int = 3
    N: int = 64
    s_max: float = 1.0
    ds: typing.Optional[float] = None
    n_quad: int = 512
    seed: int = 0
    jobs: typing.Optional[int] = None
    loops: typing.Optional[Path] = None
    snapshots: typing.Optional[Path] = None
    bandwidth: int = 2
    scheme: str = "central"
    perturbation: float = 0.05

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}, expected one of {COMMANDS}")
        if self.format not in FORMATS:
            raise ValidationError(f"unknown format {self.format!r}, expected one of {FORMATS}")
        if not 16 <= self.N <= 1024 or self.N & (self.N - 1):
            raise ValidationError(f"--N must be a power of two in [16, 1024], got {self.N}")
        if not 1 <= self.k_max <= 64:
            raise ValidationError(f"--k-max must lie in [1, 64], got {self.k_max}")
        if not (math.isfinite(self.s_max) and self.s_max > 0):
            raise ValidationError(f"--s-max must be positive, got {self.s_max}")
        if self.ds is not None and not (math.isfinite(self.ds) and self.ds > 0):
            raise ValidationError(f"--ds must be positive, got {self.ds}")
        if self.n_quad < 3:
            raise ValidationError(f"--n-quad must be >= 3, got {self.n_quad}")
        if self.jobs is not None and self.jobs < 1:
            raise ValidationError(f"--jobs must be >= 1, got {self.jobs}")
        if self.bandwidth < 0:
            raise ValidationError(f"--bandwidth must be >= 0, got {self.bandwidth}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if not (math.isfinite(self.perturbation) and self.perturbation >= 0):
            raise ValidationError(f"--perturbation must be >= 0, got {self.perturbation}")


class Outcome(typing.NamedTuple):
    document: typing.Dict[str, typing.Any]
    text: str
    unresolved: bool


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tentacle",
        description="Analyze a quadratic Hamiltonian H(x) = ½<x, Ax> - c on R^2n.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", type=Path, required=True, help="Hamiltonian JSON {dim, A, c}")
    parser.add_argument("--output", type=Path, default=None, help="Write here instead of stdout")
    parser.add_argument("--format", choices=FORMATS, default="json")
    parser.add_argument("--k-max", dest="k_max", type=int, default=3, help="Largest |k| for orbits (default: 3)")
    parser.add_argument("--N", dest="N", type=int, default=64, help="Samples per loop (default: 64)")
    parser.add_argument("--s-max", dest="s_max", type=float, default=1.0, help="Flow time (default: 1)")
    parser.add_argument("--ds", type=float, default=None, help="Flow step (default: stability bound)")
    parser.add_argument("--n-quad", dest="n_quad", type=int, default=512, help="Quadrature nodes (default: 512)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=None, help="Worker threads for flow batches")
    parser.add_argument("--loops", type=Path, default=None, help="JSON list of initial loop states for flow")
    parser.add_argument("--snapshots", type=Path, default=None, help="Directory for binary loop snapshots")
    parser.add_argument(
        "--bandwidth",
        type=int,
        default=2,
        help="Fourier modes kept by the flow, widened to hold the initial loops (default: 2)",
    )
    parser.add_argument("--scheme", choices=SCHEMES, default="central")
    parser.add_argument(
        "--perturbation",
        type=float,
        default=0.05,
        help="Amplitude of the smooth perturbation of default initial loops (default: 0.05)",
    )
    return parser


def configure_logging() -> None:
    name = os.environ.get("TENTACLE_LOG", "warn").lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(format="[%(module)-12s] %(message)s", level=level or logging.WARNING)
    if level is None:
        logger.warning("unknown TENTACLE_LOG value %r, using warn", name)


def read_json(path: Path) -> typing.Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as error:
        raise ValidationError(f"cannot read {path}: {error.strerror}") from error
    except json.JSONDecodeError as error:
        raise ValidationError(f"{path}: malformed JSON at line {error.lineno}: {error.msg}") from error


def load_hamiltonian(path: Path) -> QuadraticHamiltonian:
    return codec.hamiltonian_from_json(read_json(path))


def load_loops(path: Path) -> typing.List[LoopState]:
    document = read_json(path)
    if not isinstance(document, list) or not document:
        raise ValidationError(f"{path}: expected a non-empty list of loop states")
    return [codec.loop_state_from_json(item) for item in document]


def _decomposition_unresolved(decomposition: Decomposition) -> bool:
    return decomposition.transform is None or any(
        block.params.get("gamma", 1) is None for block in decomposition.blocks
    )


def _classify_text(decomposition: Decomposition) -> str:
    lines = [f"signature {decomposition.signature}, semisimple: {decomposition.semisimple}"]
    for block in decomposition.blocks:
        params = ", ".join(f"{key} = {value}" for key, value in block.params.items())
        lines.append(f"  kind {block.kind.value}, m = {block.m}: {params}")
    lines.extend(f"  warning: {warning}" for warning in decomposition.warnings)
    return "\n".join(lines)


def _report_text(report: TentacularReport) -> str:
    lines = [f"overall: {report.overall.value}"]
    for verdict in report.verdicts:
        reason = f" ({verdict.reason})" if verdict.reason else ""
        lines.append(f"  {verdict.axiom.value}: {verdict.status.value}{reason}")
    return "\n".join(lines)


def _orbit_documents(
    H: QuadraticHamiltonian, orbits: typing.Sequence[ClosedCharacteristic], config: RunConfig
) -> typing.Tuple[typing.List[typing.Any], bool]:
    """Orbit rows plus whether any transverse index stayed unresolved."""
    decomposition = classify(H)
    mu_sigma = signature_index(H.dim, decomposition.signature[1])
    documents, unresolved = [], False
    for orbit in orbits:
        if H.dim >= 4:
            orbit = with_transverse_index(orbit, H)
            unresolved = unresolved or orbit.cz_transverse is None
        length, ratio = length_action_check(orbit, H, config.n_quad)
        documents.append(
            codec.orbit_to_json(
                orbit,
                length=length,
                ratio=ratio,
                action_quadrature=orbit_action(orbit, H, config.n_quad, exact_derivative=True),
                grading=None if orbit.cz_transverse is None else grading(mu_sigma, orbit.cz_transverse),
            )
        )
    return documents, unresolved


def _orbits_text(documents: typing.Sequence[typing.Any]) -> str:
    lines = [f"{len(documents)} closed characteristics"]
    for orbit in documents:
        lines.append(
            f"  k = {orbit['k']:+d}, mu = {orbit['mu']:.6g}: period {orbit['eta']:.9g}, "
            f"action {orbit['action']:.9g}, cz {orbit['cz_transverse']}"
        )
    return "\n".join(lines)


def default_loops(H: QuadraticHamiltonian, config: RunConfig) -> typing.List[LoopState]:
    """Sampled closed characteristics, each moved by a seeded first-harmonic perturbation."""
    rng = np.random.default_rng(config.seed)
    t = np.arange(config.N) / config.N
    states = []
    for orbit in enumerate_closed_characteristics(H, config.k_max):
        base = critical_loop(orbit, config.N, typing.cast(typing.Any, config.scheme))
        a, b = rng.standard_normal((2, H.dim))
        shift = np.outer(np.cos(2 * np.pi * t), a) + np.outer(np.sin(2 * np.pi * t), b)
        states.append(LoopState(base.v + config.perturbation * shift, base.eta))
    return states


def write_snapshots(directory: Path, runs: typing.Sequence[FlowDiagnostics]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i, diagnostics in enumerate(runs):
        for j, (_, state) in enumerate(diagnostics.snapshots):
            (directory / f"run{i}_step{j}.rflo").write_bytes(codec.write_snapshot(state))


def _flow_runs(H: QuadraticHamiltonian, config: RunConfig) -> typing.List[FlowDiagnostics]:
    states = load_loops(config.loops) if config.loops is not None else default_loops(H, config)
    return integrate_batch(
        states,
        H,
        config.s_max,
        config.ds,
        typing.cast(typing.Any, config.scheme),
        jobs=config.jobs,
        bandwidth=config.bandwidth,
        keep_snapshots=config.snapshots is not None,
    )


def _flow_text(runs: typing.Sequence[FlowDiagnostics]) -> str:
    lines = [f"{len(runs)} flow runs"]
    for i, run in enumerate(runs):
        state = "escaped" if run.escaped else ("converged" if run.converged else "running")
        lines.append(
            f"  run {i}: action {run.action_series[0]:.9g} -> {run.action_series[-1]:.9g}, "
            f"energy {run.energy:.6g}, {state}"
        )
    return "\n".join(lines)


def execute(H: QuadraticHamiltonian, config: RunConfig) -> Outcome:
    if config.command == "classify":
        decomposition = classify(H)
        return Outcome(
            dict(codec.decomposition_to_json(decomposition)),
            _classify_text(decomposition),
            _decomposition_unresolved(decomposition),
        )
    if config.command == "check":
        report = full_report(H, seed=config.seed, jobs=config.jobs)
        return Outcome(
            dict(codec.report_to_json(report)),
            _report_text(report),
            report.overall is Overall.UNRESOLVED,
        )
    if config.command == "orbits":
        try:
            orbits = enumerate_closed_characteristics(H, config.k_max)
        except ResonanceError as error:
            return Outcome({"orbits": [], "error": str(error)}, f"unresolved: {error}", True)
        documents, unresolved = _orbit_documents(H, orbits, config)
        return Outcome(
            {"orbits": documents, "index_normalization": INDEX_NORMALIZATION},
            _orbits_text(documents),
            unresolved,
        )
    if config.command == "flow":
        runs = _flow_runs(H, config)
        if config.snapshots is not None:
            write_snapshots(config.snapshots, runs)
        return Outcome(
            {"runs": [codec.diagnostics_to_json(run) for run in runs]},
            _flow_text(runs),
            any(run.escaped for run in runs),
        )
    return _full(H, config)


def _full(H: QuadraticHamiltonian, config: RunConfig) -> Outcome:
    """Every analysis in one document. Parts that cannot run are listed under errors."""
    decomposition = classify(H)
    document: typing.Dict[str, typing.Any] = {
        "hamiltonian": codec.hamiltonian_to_json(H),
        "decomposition": codec.decomposition_to_json(decomposition),
    }
    errors: typing.Dict[str, str] = {}
    texts = [_classify_text(decomposition)]
    unresolved = _decomposition_unresolved(decomposition)
    for command in ("check", "orbits", "flow"):
        try:
            part = execute(H, replace(config, command=command))
        except UnresolvedError as error:
            errors[command] = str(error)
            unresolved = True
            continue
        except ValidationError as error:
            # orbits and flow need c > 0; the rest of the report stands
            errors[command] = str(error)
            continue
        document["tentacular" if command == "check" else command] = part.document
        texts.append(part.text)
        unresolved = unresolved or part.unresolved
    if errors:
        document["errors"] = errors
    return Outcome(document, "\n".join(texts), unresolved)


def emit(outcome: Outcome, config: RunConfig) -> None:
    payload = codec.dumps(outcome.document) if config.format == "json" else outcome.text + "\n"
    if config.output is None:
        sys.stdout.write(payload)
    else:
        config.output.write_text(payload, encoding="utf-8")


def run(config: RunConfig) -> int:
    logger.info("%s on %s", config.command, config.input)
    try:
        H = load_hamiltonian(config.input)
        outcome = execute(H, config)
    except ValidationError as error:
        print(f"[error] {error}", file=sys.stderr)
        status = EXIT_INVALID
    except TentacleError as error:
        print(f"[unresolved] {error}", file=sys.stderr)
        emit(Outcome({"error": str(error)}, f"unresolved: {error}", True), config)
        status = EXIT_UNRESOLVED
    else:
        emit(outcome, config)
        status = EXIT_UNRESOLVED if outcome.unresolved else EXIT_OK
    logger.info("exit status %d", status)
    return status


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(**vars(args))
    except ValidationError as error:
        print(f"[error] {error}", file=sys.stderr)
        return EXIT_INVALID
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
