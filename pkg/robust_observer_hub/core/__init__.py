from .exceptions import (  # noqa: F401
    ConfigError,
    DampingSearchError,
    InfeasibleError,
    SimulationError,
    SolverError,
    UserError,
)
from .models import RunConfig  # noqa: F401
from .usecases import (  # noqa: F401
    cmd_damping,
    cmd_montecarlo,
    cmd_synthesize,
    cmd_table,
    cmd_validate,
)
