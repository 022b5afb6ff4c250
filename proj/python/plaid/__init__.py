"""Progressive learn-then-distill continual RL on a reduced-biped terrain benchmark."""

from ._plaid import (
    ACTION_DIM,
    STATE_DIM,
    BipedEnv,
    ConfigError,
    FormatError,
    MissingEvalError,
    Network,
    NetworkSpec,
    PlaidError,
    ShapeError,
    SimulationFault,
    TerrainBranchSpec,
    TruncationError,
    UsageError,
    VersionError,
    attach_terrain_branch,
    evaluate_checkpoint,
    forgetting_average,
    generate_terrain,
    init_network,
    inject_inputs,
    mixing_probability,
    ptd_advantage,
    read_checkpoint,
    read_lineage,
    relative_change,
    row_average,
    run_curriculum,
    td_error,
    write_checkpoint,
)

__all__ = [name for name in dir() if not name.startswith("_")]
