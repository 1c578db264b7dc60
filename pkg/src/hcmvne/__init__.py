"""Virtual network embedding with heavy-clique coarsening.

The package is organised as one module per concern:

* :mod:`hcmvne.model` - substrate/virtual graphs, embedding maps, revenue and cost
* :mod:`hcmvne.workload` - Waxman generators, VNR workloads, BRITE and manifest files
* :mod:`hcmvne.coarsening` - heavy clique matching
* :mod:`hcmvne.refinement` - boundary-node move/swap refinement
* :mod:`hcmvne.embedding` - the backtracking embedder and two baselines
* :mod:`hcmvne.simulation` - discrete-event replay and metrics
* :mod:`hcmvne.cli` - command line front end
"""

from hcmvne.model import (
    CapacityError,
    EmbeddingMap,
    EmbedParams,
    NetworkError,
    ReleaseError,
    StructuralError,
    SubstrateLink,
    SubstrateNetwork,
    SubstrateNode,
    VirtualLink,
    VirtualNetwork,
    VnRequest,
    allocate,
    amount,
    cost,
    release,
    revenue,
    validate_embedding,
)
from hcmvne.coarsening import CoarsenedGraph, coarsen, link_density, uncoarsen_map
from hcmvne.refinement import boundary_nodes, crossing_bandwidth, optimize
from hcmvne.embedding import (
    EmbedOutcome,
    baseline_greedy,
    baseline_no_coarsen,
    build_candidates,
    hcm_embed,
    route_virtual_link,
)
from hcmvne.simulation import (
    SimReport,
    acceptance_ratio,
    average_revenue,
    revenue_cost_ratio,
    run_simulation,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CoarsenedGraph",
    "EmbedOutcome",
    "EmbedParams",
    "EmbeddingMap",
    "NetworkError",
    "ReleaseError",
    "SimReport",
    "StructuralError",
    "SubstrateLink",
    "SubstrateNetwork",
    "SubstrateNode",
    "VirtualLink",
    "VirtualNetwork",
    "VnRequest",
    "acceptance_ratio",
    "allocate",
    "amount",
    "average_revenue",
    "baseline_greedy",
    "baseline_no_coarsen",
    "boundary_nodes",
    "build_candidates",
    "coarsen",
    "cost",
    "crossing_bandwidth",
    "hcm_embed",
    "link_density",
    "optimize",
    "release",
    "revenue",
    "revenue_cost_ratio",
    "route_virtual_link",
    "run_simulation",
    "uncoarsen_map",
    "validate_embedding",
]
