"""maestro-forge: joint structure + configuration search for typed
stochastic computation graphs under explicit rollout, cost, and structure
budgets."""

from .errors import (
    AdapterFailure,
    BudgetExceeded,
    CycleInDagMode,
    DanglingEdge,
    GraphValidationError,
    InapplicableEdit,
    InvalidDocument,
    InvalidRunSpec,
    MaestroError,
    MissingParam,
    NodeFailure,
    NotADag,
    OutOfDomain,
    ProtocolViolation,
    ScheduleMismatch,
    SchemaMismatch,
    SpaceTooLarge,
    UnknownFunction,
    UnresolvedParam,
)
from .evaluation import (
    BudgetLedger,
    Metric,
    RolloutRecord,
    TaskInstance,
    UtilityEstimate,
    charge,
    estimate_utility,
    run_rollout,
    structure_complexity,
)
from .execution import (
    ExecutionTrace,
    NodeFunctionRegistry,
    execute,
    execute_unrolled,
    resolve_inputs,
)
from .feedback import EditProposal, FeedbackItem, collect, distill
from .graph import (
    AdapterSpec,
    EdgeSpec,
    GatePredicate,
    GraphSpec,
    MergeSpec,
    NodeSpec,
    ValidatedGraph,
    graph_spec,
    topological_order,
    validate_graph,
)
from .optimizer import AcceptanceRule, OptimizerState, RunSpec, accept, run
from .params import (
    ConfigSpace,
    ParamRef,
    ParamSpec,
    choice_param,
    default_assignment,
    float_param,
    inherit_assignment,
    int_param,
    mutate_assignment,
    sample_assignment,
    text_param,
    validate_assignment,
)
from .schema import ABSENT, NUMBER, TEXT, ValueSchema, optional, record, vector

__version__ = "0.1.0"
