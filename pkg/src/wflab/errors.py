"""Exception types used across the package."""


class WfLabError(Exception):
    """Base class for solver errors."""


class ScenarioError(WfLabError):
    """Invalid scenario file or physically inadmissible parameters."""


class LightconeError(WfLabError):
    """Light-cone root finding failed or hit the source point."""


class SpeedGuardError(WfLabError):
    """A computed trajectory approached the speed of light beyond the guard."""


class ConstraintError(WfLabError):
    """Initial fields violate the Maxwell constraints beyond tolerance."""


class DomainError(WfLabError):
    """Query outside the domain of a trajectory, field, or probe region."""
