"""Frank-Wolfe recursions over probability measures on compact boxes."""
from .errors import (
    CapabilityError,
    DegenerateMeasureError,
    DomainError,
    InnerSolverError,
    OracleError,
    SingularDesignError,
    SolverError,
)
from .measure import (
    AtomicMeasure,
    BoxDomain,
    ball_mass,
    consolidate,
    dirac,
    expect,
    mix,
    tv_distance,
)

__version__ = "0.1.0"
