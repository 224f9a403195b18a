"""Balance-aware signed graph partitioning with sharded training and exact
edge unlearning."""

from .clustering import (
    Cluster,
    ClusteringParams,
    Partition,
    agglomerate,
    balance_ratio_merged,
    partition_diagnostics,
    random_balanced_partition,
    ratio_cut,
    similarity,
)
from .ensemble import (
    EnsembleModel,
    UnlearnRequest,
    aggregate_predict,
    load_checkpoint,
    save_checkpoint,
    scratch_retrain,
    train_all,
    unlearn,
)
from .evaluation import (
    EvalReport,
    SplitSpec,
    evaluate_ensemble,
    macro_f1,
    mia_auc,
    run_unlearn_benchmark,
    split_edges,
)
from .extraction import (
    ExtractionParams,
    OppositiveGroup,
    extract_groups,
    extract_one_group,
    signed_power_iteration,
)
from .graph import (
    SignedGraph,
    SsbmParams,
    TriadCensus,
    balance_ratio,
    canonicalize,
    generate_polarized_ssbm,
    induced_subgraph,
    load_edge_list,
    triad_census,
)
from .model import (
    ModelHyperparams,
    ShardModel,
    edge_features,
    predict,
    spectral_embed,
    train_shard,
)

__version__ = "0.1.0"
