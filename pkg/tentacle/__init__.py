from .dynamics import ClosedCharacteristic, enumerate_closed_characteristics, rs_index
from .floer import LoopState, integrate_flow, newton_refine
from .hormander import Decomposition, HormanderBlock, classify
from .symplectic import QuadraticHamiltonian, SymplecticMatrix
from .tentacular import TentacularReport, full_report

VERSION = (0, 1, 0)

__version__: str = ".".join(map(str, VERSION))

__all__ = (
    "QuadraticHamiltonian",
    "SymplecticMatrix",
    "HormanderBlock",
    "Decomposition",
    "classify",
    "TentacularReport",
    "full_report",
    "ClosedCharacteristic",
    "enumerate_closed_characteristics",
    "rs_index",
    "LoopState",
    "integrate_flow",
    "newton_refine",
)
