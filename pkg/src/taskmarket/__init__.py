"""Task-based labor market model with digital capital, plus the measurement
and estimation tools used to take it to firm-level hiring data."""

from .assignment import (
    AllDigitalError,
    InfeasibleTaskError,
    LaborDemand,
    Region,
    RegionMap,
    cheapest_executor,
    compute_region_map,
    demand_over_thetas,
    hiring_shares,
    labor_demand,
)
from .cutoff import (
    CutoffResult,
    MultipleCrossings,
    NoCrossing,
    Prop1Report,
    RegularityViolated,
    cutoff_derivative,
    is_regular,
    solve_cutoff,
    sweep_theta,
    verify_proposition1,
)
from .kernels import BACKEND_NAME
from .model import (
    DIGITAL,
    ConfigError,
    DigitalCapitalSpec,
    DomainError,
    EconomyConfig,
    Mode,
    Occupation,
    OccupationSpec,
    SkillComposition,
    cost_matrix,
    digital_unit_cost,
    effective_productivity,
    labor_unit_cost,
    skill_composition,
)

__version__ = "0.1.0"
