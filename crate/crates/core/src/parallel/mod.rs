//! Virtual-rank parallel simulator: distributed operators, the hybrid
//! smoother, parallel aggregation with agglomeration, and the parallel solve.

mod agglomerate;
mod aggregation;
mod comm;
mod hierarchy;
mod index;
mod ops;

pub use comm::{CommRecord, CommStats, ExchangeKind, ExchangeTally, Payload, RankBlock, VirtualComm};
pub use index::{
    balanced_split, build_overlap, build_rank_states, check_patterns, localize_matrix, partition_fine,
    partition_linear, rank_grid, CommLink, Distribution, Marker, ParallelIndexSet, RankState,
};
pub use ops::{
    add_reduce, check_consistent, gather, hybrid_smoother_step, make_consistent, owner_residual, parallel_dot,
    parallel_spmv, scatter, DistVector,
};
pub use aggregation::{
    fill_coarse_operators, local_galerkin, owner_block, owner_profile, parallel_aggregation, AggregationOutcome,
    LocalAggregation,
};
pub use agglomerate::{
    agglomerate, agglomeration_target, bisect_ranks, gather_owned, scatter_local, trigger_agglomeration,
    Agglomeration, AgglomerationParams, ForcedAgglomeration, DEFAULT_AGGLOMERATION_THRESHOLD, DEFAULT_GROUP_SIZE,
};
pub use hierarchy::{
    assemble_aggregates, assemble_global, build_parallel_hierarchy, parallel_bicgstab, parallel_vcycle, ParallelBackend,
    ParallelHierarchy, ParallelHierarchyParams, ParallelHierarchyStats, ParallelLevel, ParallelLevelStats,
    ParallelWorkspace,
};
