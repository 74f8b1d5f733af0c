import typing

if typing.TYPE_CHECKING:
    from .floer import FlowDiagnostics, LoopState


class TentacleError(Exception):
    pass


class ValidationError(TentacleError, ValueError):
    """
    Malformed input, dimension mismatch or an option outside its documented range.
    """


class DegenerateHamiltonianError(ValidationError):
    pass


class NotLiouvilleError(ValidationError):
    pass


class SpectralSymmetryError(TentacleError, ArithmeticError):
    """
    The spectrum of J0 A could not be reassembled into the symmetric families
    {±λ}, {±λ1 ± iλ2}, {±iμ}. This signals numerical breakdown, never a valid input.
    """


class ResonanceError(TentacleError):
    pass


class CriteriaNotMetError(TentacleError):
    pass


class UnresolvedError(TentacleError):
    """
    A computation that cannot certify its own answer at the configured tolerances.
    """


class NewtonConvergenceError(TentacleError):
    def __init__(self, message: str, residual: float, state: "LoopState") -> None:
        super().__init__(message)
        self.residual = residual
        self.state = state


class NewtonPreconditionError(ValidationError):
    pass


class FlowEscapeError(TentacleError):
    def __init__(self, message: str, diagnostics: "FlowDiagnostics") -> None:
        super().__init__(message)
        self.diagnostics = diagnostics
