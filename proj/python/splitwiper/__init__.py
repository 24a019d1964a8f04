"""SISA-based split learning with machine unlearning.

The heavy lifting lives in the C++ core; this package re-exports the bound
operations: dataset generation and partitioning, the split training
pipeline, the three unlearning strategies, the retrain oracle, and the
evaluation and cost-accounting helpers.
"""

from ._core import (  # noqa: F401
    Dataset,
    ExperimentConfig,
    LabelMode,
    MlpModel,
    PartitionMode,
    ServerInitMode,
    Shard,
    Strategy2Replay,
    UnlearnRequest,
    WorldState,
    apply_unlearn_request,
    build_dataset,
    evaluate_client,
    gen_blobs,
    init_mlp,
    load_checkpoint,
    load_csv,
    loss_softmax_xent,
    models_bit_equal,
    parameter_distance,
    partition_dataset,
    partition_equal,
    partition_noniid,
    retrain_oracle,
    run_gradcheck,
    run_strategy0,
    run_strategy1,
    run_strategy2,
    run_training,
    save_checkpoint,
    save_csv,
    selected_dataset,
    shards_after_unlearn,
    train_on_shards,
)

__all__ = [
    "Dataset",
    "ExperimentConfig",
    "LabelMode",
    "MlpModel",
    "PartitionMode",
    "ServerInitMode",
    "Shard",
    "Strategy2Replay",
    "UnlearnRequest",
    "WorldState",
    "apply_unlearn_request",
    "build_dataset",
    "evaluate_client",
    "gen_blobs",
    "init_mlp",
    "load_checkpoint",
    "load_csv",
    "loss_softmax_xent",
    "models_bit_equal",
    "parameter_distance",
    "partition_dataset",
    "partition_equal",
    "partition_noniid",
    "retrain_oracle",
    "run_gradcheck",
    "run_strategy0",
    "run_strategy1",
    "run_strategy2",
    "run_training",
    "save_checkpoint",
    "save_csv",
    "selected_dataset",
    "shards_after_unlearn",
    "train_on_shards",
]
