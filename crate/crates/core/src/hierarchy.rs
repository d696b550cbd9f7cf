//! Multilevel hierarchy: piecewise-constant transfer operators and
//! ω-scaled Galerkin coarse matrices.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, AggregatesMap, AggregationParams};
use crate::error::{AmgError, Result};
use crate::sparse::check_len;
use crate::sparse::{CsrMatrix, DenseLu};
use crate::strength::{classify, VertexClass};

pub const DEFAULT_OMEGA: f64 = 1.6;
pub const DEFAULT_COARSE_TARGET: usize = 1000;
pub const DEFAULT_MAX_LEVELS: usize = 25;
/// A level whose coarsening ratio exceeds this is not coarsened further.
pub const STAGNATION_RATIO: f64 = 0.9;
/// Largest coarsest level accepted for the dense direct solve.
pub const MAX_DENSE_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyParams {
    pub aggregation: AggregationParams,
    pub omega: f64,
    pub coarse_target: usize,
    pub max_levels: usize,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        HierarchyParams {
            aggregation: AggregationParams::default(),
            omega: DEFAULT_OMEGA,
            coarse_target: DEFAULT_COARSE_TARGET,
            max_levels: DEFAULT_MAX_LEVELS,
        }
    }
}

impl HierarchyParams {
    pub fn validate(&self) -> Result<()> {
        self.aggregation.validate()?;
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(AmgError::InvalidConfig(format!(
                "omega must be positive (got {})",
                self.omega
            )));
        }
        if self.max_levels < 1 {
            return Err(AmgError::InvalidConfig("max_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why coarsening stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CoarseEnough,
    LevelCap,
    Stagnation,
}

/// One level of the hierarchy with the aggregates that map it to the next
/// coarser level (`None` on the coarsest level).
#[derive(Debug, Clone)]
pub struct Level {
    pub a: CsrMatrix,
    pub agg: Option<AggregatesMap>,
}

impl Level {
    pub fn n_fine(&self) -> usize {
        self.a.n()
    }

    pub fn n_coarse(&self) -> Option<usize> {
        self.agg.as_ref().map(AggregatesMap::n_coarse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub n: usize,
    pub nnz: usize,
    pub isolated: usize,
    pub dirichlet: usize,
    /// Time spent producing the next coarser level from this one.
    pub build_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub operator_complexity: f64,
    pub grid_complexity: f64,
    pub levels: usize,
}

impl ComplexityReport {
    pub fn from_sizes(sizes: &[(usize, usize)]) -> Self {
        let (n0, nnz0) = sizes[0];
        ComplexityReport {
            operator_complexity: sizes.iter().map(|s| s.1).sum::<usize>() as f64 / nnz0.max(1) as f64,
            grid_complexity: sizes.iter().map(|s| s.0).sum::<usize>() as f64 / n0.max(1) as f64,
            levels: sizes.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyStats {
    pub levels: Vec<LevelStats>,
    pub stop_reason: StopReason,
    pub complexity: ComplexityReport,
    pub omega: f64,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    pub coarse_lu: DenseLu,
    pub omega: f64,
    pub params: AggregationParams,
    pub stats: HierarchyStats,
}

impl Hierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn complexity(&self) -> ComplexityReport {
        self.stats.complexity
    }

    pub fn write_stats_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.stats).map_err(|e| AmgError::Io(e.to_string()))
    }
}

/// `fine = P coarse`; unaggregated vertices receive 0.
pub fn prolongate(agg: &AggregatesMap, coarse: &[f64]) -> Result<Vec<f64>> {
    let mut fine = vec![0.0; agg.n_fine()];
    prolongate_add(agg, coarse, &mut fine)?;
    Ok(fine)
}

/// `fine += P coarse`.
pub fn prolongate_add(agg: &AggregatesMap, coarse: &[f64], fine: &mut [f64]) -> Result<()> {
    check_len(agg.n_coarse(), coarse.len())?;
    check_len(agg.n_fine(), fine.len())?;
    for (f, a) in fine.iter_mut().zip(&agg.agg_of) {
        if let Some(a) = a {
            *f += coarse[*a];
        }
    }
    Ok(())
}

/// `Pᵀ fine`.
pub fn restrict(agg: &AggregatesMap, fine: &[f64]) -> Result<Vec<f64>> {
    let mut coarse = vec![0.0; agg.n_coarse()];
    restrict_into(agg, fine, &mut coarse)?;
    Ok(coarse)
}

/// `coarse = Pᵀ fine`, accumulated in ascending fine index order.
pub fn restrict_into(agg: &AggregatesMap, fine: &[f64], coarse: &mut [f64]) -> Result<()> {
    check_len(agg.n_fine(), fine.len())?;
    check_len(agg.n_coarse(), coarse.len())?;
    coarse.iter_mut().for_each(|c| *c = 0.0);
    for (f, a) in fine.iter().zip(&agg.agg_of) {
        if let Some(a) = a {
            coarse[*a] += f;
        }
    }
    Ok(())
}

/// `(1/ω) Pᵀ A P` for the piecewise-constant `P` of `agg`.
pub fn galerkin_product(a: &CsrMatrix, agg: &AggregatesMap, omega: f64) -> CsrMatrix {
    let nc = agg.n_coarse();
    let (row_offsets, col_indices, values) = galerkin_rows(a, agg, omega, nc);
    CsrMatrix::from_raw_unchecked(nc, row_offsets, col_indices, values)
}

/// Rows `0..rows` of `(1/ω) Pᵀ A P` as raw CSR arrays with sorted columns.
pub(crate) fn galerkin_rows(
    a: &CsrMatrix,
    agg: &AggregatesMap,
    omega: f64,
    rows: usize,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let nc = agg.n_coarse();
    let mut row_offsets = Vec::with_capacity(rows + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    let mut slot = vec![usize::MAX; nc];
    let mut row: Vec<(usize, f64)> = Vec::new();
    for members in &agg.aggregates[..rows] {
        row.clear();
        for &k in members {
            for (l, v) in a.row(k) {
                if let Some(j) = agg.agg_of[l] {
                    if slot[j] == usize::MAX {
                        slot[j] = row.len();
                        row.push((j, v));
                    } else {
                        row[slot[j]].1 += v;
                    }
                }
            }
        }
        for &(j, _) in &row {
            slot[j] = usize::MAX;
        }
        row.sort_unstable_by_key(|e| e.0);
        for &(j, v) in &row {
            col_indices.push(j);
            values.push(v / omega);
        }
        row_offsets.push(col_indices.len());
    }
    (row_offsets, col_indices, values)
}

/// Coarsens `a` until it is small enough, coarsening stagnates or the
/// level cap is reached, then factors the coarsest matrix.
pub fn build_hierarchy(a: &CsrMatrix, params: &HierarchyParams) -> Result<Hierarchy> {
    params.validate()?;
    let mut levels = vec![Level { a: a.clone(), agg: None }];
    let mut stats = Vec::new();
    let stop_reason = loop {
        let lvl = levels.len() - 1;
        let cur = &levels[lvl].a;
        let n = cur.n();
        let start = Instant::now();
        let mut stat = LevelStats {
            level: lvl,
            n,
            nnz: cur.nnz(),
            isolated: 0,
            dirichlet: 0,
            build_seconds: 0.0,
        };
        if n <= params.coarse_target {
            stats.push(stat);
            break StopReason::CoarseEnough;
        }
        if levels.len() >= params.max_levels {
            stats.push(stat);
            break StopReason::LevelCap;
        }
        let p = &params.aggregation;
        let profile = classify(cur, p.delta, p.beta)?;
        stat.isolated = profile.vertex_class.iter().filter(|c| **c == VertexClass::Isolated).count();
        stat.dirichlet = profile.vertex_class.iter().filter(|c| **c == VertexClass::Dirichlet).count();
        let agg = aggregate(cur, &profile, p);
        agg.check_partition(&profile)?;
        let nc = agg.n_coarse();
        if nc == 0 || nc as f64 > STAGNATION_RATIO * n as f64 {
            stat.build_seconds = start.elapsed().as_secs_f64();
            stats.push(stat);
            log::warn!("coarsening stagnated on level {lvl}: {n} -> {nc}");
            break StopReason::Stagnation;
        }
        let coarse = galerkin_product(cur, &agg, params.omega);
        log::debug!("level {lvl}: {n} -> {nc} unknowns, coarse nnz {}", coarse.nnz());
        levels[lvl].agg = Some(agg);
        stat.build_seconds = start.elapsed().as_secs_f64();
        stats.push(stat);
        levels.push(Level { a: coarse, agg: None });
    };
    let coarse_lu = factor_coarsest(&levels.last().unwrap().a, levels.len() - 1)?;
    let sizes: Vec<(usize, usize)> = stats.iter().map(|s| (s.n, s.nnz)).collect();
    Ok(Hierarchy {
        levels,
        coarse_lu,
        omega: params.omega,
        params: params.aggregation,
        stats: HierarchyStats {
            levels: stats,
            stop_reason,
            complexity: ComplexityReport::from_sizes(&sizes),
            omega: params.omega,
        },
    })
}

/// Dense LU of the coarsest matrix, with errors tagged by level.
pub fn factor_coarsest(a: &CsrMatrix, level: usize) -> Result<DenseLu> {
    if a.n() > MAX_DENSE_SIZE {
        return Err(AmgError::InvalidConfig(format!(
            "coarsest level {level} has {} unknowns, more than the dense solver limit {MAX_DENSE_SIZE}",
            a.n()
        )));
    }
    DenseLu::factor_csr(a).map_err(|e| match e {
        AmgError::SingularMatrix { column } => AmgError::SingularCoarseMatrix { level, column },
        other => other,
    })
}
