"""Causal-order elicitation from imperfect experts, with downstream
graph-discovery and effect-estimation integrations."""

from .bn import (
    BUNDLED_GRAPHS,
    BayesNet,
    LinearScm,
    SampleTable,
    bundled_bn,
    bundled_graph,
    forward_sample,
    load_bn,
    load_scm,
    sample_linear_scm,
)
from .discovery import CiTestConfig, LevelPrior, export_level_prior, orient_with_order, pc_cpdag
from .effect import (
    AceEstimate,
    AdjustmentSet,
    ace_adjusted,
    d_separated,
    epsilon_ace,
    is_valid_backdoor,
    minimal_backdoor,
    order_adjustment_set,
    scm_true_ace,
)
from .elicitation import (
    EdgeBelief,
    ElicitationReport,
    entropy_prune,
    enumerate_tuples,
    merge_order,
    pairwise_pipeline,
    triplet_pipeline,
)
from .experts import (
    Choice,
    EpsilonExpert,
    EpsilonExpertConfig,
    Expert,
    ExpertQuery,
    PairVerdict,
    PerfectExpert,
    ScriptedExpert,
    TupleVerdict,
    perfect_pairwise,
)
from .graph import (
    AdjacencyMatrix,
    LevelOrder,
    MixedGraph,
    TopologicalOrder,
    VariableSet,
    dtop,
    find_cycles,
    isolated_nodes,
    level_order_of,
    shd,
    topological_order_of,
    transitive_closure,
)
from .llm import EndpointConfig, LlmExpert, ReplayTransport, llm_answer

__version__ = "0.1.0"
