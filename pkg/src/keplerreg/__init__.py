"""
Regularized Kepler problem through the Kustaanheimo-Stiefel map.

Submodules
----------
phasespace : exact polynomials on C^4, Poisson brackets, structure tables
ks_map     : Hopf and KS maps, momentum map, physical coordinates
dynamics   : linearized flows in three energy regimes, physical propagation
quantum    : graded Fock-type representations, spectra, Casimir checks
cli        : batch command-line front end
"""

from . import dynamics, ks_map, phasespace, quantum
from .dynamics import (
    Trajectory,
    direct_kepler_oracle,
    kepler_closed_form,
    propagate_physical,
)
from .errors import (
    ClosureError,
    CollisionError,
    ConstraintError,
    DomainError,
    KeplerRegError,
    SingularChartError,
    StructuralError,
    UnsupportedError,
)
from .ks_map import (
    CotangentPoint,
    KeplerState,
    MomentumMapValue,
    calibrate_k,
    collision_extraction,
    collision_injection,
    hopf,
    ks_pi,
    lift,
    momentum_map,
    to_physical,
)
from .phasespace import (
    AlgebraTable,
    PhasePolynomial,
    SpinorPoint,
    poisson_bracket,
    structure_table,
)
from .quantum import (
    GradedBasis,
    casimir_check,
    commutator_table,
    constraint_kernel,
    hydrogen_spectrum_neg,
    positive_spectrum,
    su22_generators,
)

__version__ = "0.1.0"
