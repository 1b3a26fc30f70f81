"""wflab: Wheeler-Feynman electrodynamics of rigid extended charges.

Field propagation by spherical means, Lienard-Wiechert fields with
retarded/advanced light-cone solves, Maxwell-Lorentz dynamics without
self-interaction, the Synge forward solver, and the boundary-field
fixed-point machinery for conditional Wheeler-Feynman solutions.
"""

from .core import (
    AsymptoteSpec,
    ChargeDensity,
    ChargeTrajectory,
    NormGrid,
    PhasePoint,
    discrete_norm,
    make_bump_density,
    traj_eval,
    v_of_p,
    weight_w,
)
from .errors import (
    ConstraintError,
    DomainError,
    LightconeError,
    ScenarioError,
    SpeedGuardError,
    WfLabError,
)
from .quadrature import DEFAULT_QUAD, QuadSpec, SphereQuadRule, sphere_rule

__version__ = "0.1.0"
