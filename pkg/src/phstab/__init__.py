"""phstab: exponential stability analysis of 1-D linear port-Hamiltonian systems.

The system is du/dt = -(P1 d/dx (H u) + P0 H u) on (a, b) with boundary
condition W [(Hu)(b); (Hu)(a)] = 0.  Stability is decided in the frequency
domain through the test matrices T_t = W1 Phi_t(b) + W2, and cross-checked by
a finite-volume simulation.
"""

__version__ = "0.1.0"

from .errors import PHStabError, ValidationError  # noqa: E402
from .hamiltonian import HamiltonianDensity  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .problem import ProblemSpec, SimParams, load_spec, loads_spec  # noqa: E402
from .stability import StabilityReport, SweepParams, sweep_and_verdict  # noqa: E402

__all__ = [
    "BACKEND",
    "HamiltonianDensity",
    "PHStabError",
    "ProblemSpec",
    "SimParams",
    "StabilityReport",
    "SweepParams",
    "ValidationError",
    "load_spec",
    "loads_spec",
    "sweep_and_verdict",
]
