from .fd import fd_derivative, fd_gradient
from .jet import MAX_ORDER, Jet, jet_arith, jet_const, jet_linear, jet_seed, jet_unary
from .params import ParamStore
from .tape import Tape, Var

__all__ = [
    "MAX_ORDER",
    "Jet",
    "ParamStore",
    "Tape",
    "Var",
    "fd_derivative",
    "fd_gradient",
    "jet_arith",
    "jet_const",
    "jet_linear",
    "jet_seed",
    "jet_unary",
]
