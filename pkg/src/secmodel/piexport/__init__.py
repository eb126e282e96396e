from .abstract import AbstractDesign, AbstractionError, abstract_design
from .emit import EmitError, PiSpec, emit_proverif
from .external import ExternalResult, run_proverif
from .pvcheck import check_pv

__all__ = [
    "AbstractDesign",
    "AbstractionError",
    "EmitError",
    "ExternalResult",
    "PiSpec",
    "abstract_design",
    "check_pv",
    "emit_proverif",
    "run_proverif",
]
