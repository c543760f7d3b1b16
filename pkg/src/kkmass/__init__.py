"""Mass of asymptotically flat and asymptotically product (Kaluza-Klein) metrics.

Clifford convention throughout: ``v . v = -|v|^2`` with skew-hermitian generators.
"""
from .clifford import CliffordRep, build_clifford, clifford_mul, commutator_action
from .config import RunConfig, load_config, parse_config
from .geometry import Chart, MetricField, curvature, decay_order, orthonormal_frames
from .mass import ShellQuadrature, boundary_mass_check, mass, witten_form
from .models import ModelSpec, build_model, rn_mass_closed_form
from .run import run
from .spin import SpinorField, covariant_derivative, dirac, spin_connection

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "CliffordRep",
    "MetricField",
    "ModelSpec",
    "RunConfig",
    "ShellQuadrature",
    "SpinorField",
    "boundary_mass_check",
    "build_clifford",
    "build_model",
    "clifford_mul",
    "commutator_action",
    "covariant_derivative",
    "curvature",
    "decay_order",
    "dirac",
    "load_config",
    "mass",
    "orthonormal_frames",
    "parse_config",
    "rn_mass_closed_form",
    "run",
    "spin_connection",
    "witten_form",
]
