"""gcltlab: numerical laboratory for weighted central limit theorems under
sublinear expectation."""

from .errors import (
    CapacityError,
    ConfigError,
    GcltError,
    InvalidSpecError,
    NumericsError,
)
from .gcore import GParams, check_g_properties, g_corner_control, g_value
from .model import (
    SequenceKind,
    SequenceSpec,
    TestFunction,
    VariableKind,
    VariableSpec,
    default_catalog,
    distributions_equal,
    eval_phi,
    make_two_point_pair,
    params_at,
    phi_by_name,
)
from .engine import (
    DPMethod,
    DPResult,
    WeightKind,
    WeightSpec,
    axiom_suite,
    expect_nested,
    expect_pair,
    expect_single,
    expect_weighted_sum_grid,
    expect_weighted_sum_tree,
    reachable_bound,
    step_coefficients,
    weights_array,
)
from .gpde import (
    GridSpec,
    ValueGrid,
    eval_at,
    limit_expectation,
    semigroup_residual,
    solve_gheat,
)
from .cltlab import (
    ConvergenceRow,
    EvaluatorKind,
    PartialRunError,
    Scenario,
    cesaro_deviation,
    get_scenario,
    run_convergence,
    scenario_catalog,
    weight_ratio,
)

__version__ = "0.1.0"
