"""Steady entangled states of dissipative bosonic networks.

Normal-mode Lindblad generators with engineered selective channels,
their time evolution and steady states, and the atomic-beam construction
that produces the engineered rates.
"""

__version__ = "0.1.0"

from .dynamics import Trajectory, evolve, fidelity, purity, steady_state  # noqa: E402
from .liouvillian import ChannelSpec, GeneratorSpec, Liouvillian, assemble  # noqa: E402
from .network import NetworkSpec, NormalModeBasis, diagonalize, symmetric_basis  # noqa: E402
from .states import DensityOperator, StateVector, TruncatedSpace, target_state  # noqa: E402

__all__ = [
    "ChannelSpec",
    "DensityOperator",
    "GeneratorSpec",
    "Liouvillian",
    "NetworkSpec",
    "NormalModeBasis",
    "StateVector",
    "Trajectory",
    "TruncatedSpace",
    "assemble",
    "diagonalize",
    "evolve",
    "fidelity",
    "purity",
    "steady_state",
    "symmetric_basis",
    "target_state",
]
