//! Parallel hierarchy, V-cycle and BiCGSTAB over virtual ranks.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregatesMap;
use crate::error::{AmgError, Result};
use crate::hierarchy::{factor_coarsest, ComplexityReport, HierarchyParams, StopReason, STAGNATION_RATIO};
use crate::parallel::agglomerate::{
    agglomerate, agglomeration_target, gather_owned, scatter_local, trigger_agglomeration, Agglomeration,
    AgglomerationParams,
};
use crate::parallel::aggregation::{
    fill_coarse_operators, parallel_aggregation, prolongate_local, restrict_owned, LocalAggregation,
};
use crate::parallel::comm::VirtualComm;
use crate::parallel::index::{build_rank_states, Distribution, RankState};
use crate::parallel::ops::{
    check_consistent, hybrid_smoother_step, owner_residual, parallel_dot, parallel_spmv, DistVector,
};
use crate::solvers::{bicgstab_with, check_diagonal, KrylovBackend, SmootherSpec, SolveReport};
use crate::sparse::{CsrMatrix, DenseLu, TripletBuilder};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParallelHierarchyParams {
    pub hierarchy: HierarchyParams,
    pub agglomeration: AgglomerationParams,
}

impl ParallelHierarchyParams {
    pub fn validate(&self) -> Result<()> {
        self.hierarchy.validate()?;
        self.agglomeration.validate()
    }
}

/// One level: smoothing runs on `states`; the transfers and the next coarser
/// level use the agglomerated states when present.
#[derive(Debug, Clone)]
pub struct ParallelLevel {
    pub states: Vec<RankState>,
    pub agglomeration: Option<Agglomeration>,
    /// Per-rank transfer maps on the coarsening states; `None` on the coarsest level.
    pub maps: Option<Vec<LocalAggregation>>,
}

impl ParallelLevel {
    /// States on which this level is coarsened (or solved, on the coarsest level).
    pub fn coarsening_states(&self) -> &[RankState] {
        match &self.agglomeration {
            Some(ag) => &ag.gathered,
            None => &self.states,
        }
    }

    pub fn active_ranks(&self) -> usize {
        self.states.iter().filter(|s| s.is_active()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelLevelStats {
    pub level: usize,
    pub n: usize,
    pub nnz: usize,
    pub active_ranks: usize,
    pub min_owned: usize,
    pub max_owned: usize,
    /// Rank count after agglomeration on this level.
    pub agglomerated_to: Option<usize>,
    pub isolated: usize,
    pub dirichlet: usize,
    pub build_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelHierarchyStats {
    pub levels: Vec<ParallelLevelStats>,
    pub stop_reason: StopReason,
    pub complexity: ComplexityReport,
    pub omega: f64,
}

#[derive(Debug, Clone)]
pub struct ParallelHierarchy {
    pub levels: Vec<ParallelLevel>,
    pub rank_count: usize,
    /// Rank holding the coarsest level.
    pub coarse_rank: usize,
    pub coarse_lu: DenseLu,
    pub omega: f64,
    pub stats: ParallelHierarchyStats,
}

impl ParallelHierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn complexity(&self) -> ComplexityReport {
        self.stats.complexity
    }

    pub fn fine_states(&self) -> &[RankState] {
        &self.levels[0].states
    }

    pub fn write_stats_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.stats).map_err(|e| AmgError::Io(e.to_string()))
    }
}

fn owner_counts(states: &[RankState]) -> Vec<(usize, usize)> {
    states.iter().filter(|s| s.is_active()).map(|s| (s.rank, s.n_owned())).collect()
}

fn active_count(states: &[RankState]) -> usize {
    states.iter().filter(|s| s.is_active()).count()
}

/// A rank stagnates when its aggregates keep more than the stagnation
/// ratio of its owner rows.
fn locally_stagnated(states: &[RankState], maps: &[LocalAggregation]) -> bool {
    states
        .iter()
        .zip(maps)
        .any(|(s, m)| s.is_active() && m.n_owned_coarse as f64 > STAGNATION_RATIO * s.n_owned() as f64)
}

/// Builds the hierarchy of `a` distributed by `dist`.
///
/// Each level agglomerates before coarsening when forced, when some rank
/// owns fewer unknowns than the threshold, or when aggregation stagnates on
/// some rank. The coarsest level is always gathered onto one rank and
/// solved directly.
pub fn build_parallel_hierarchy(
    comm: &mut VirtualComm,
    a: &CsrMatrix,
    dist: &Distribution,
    params: &ParallelHierarchyParams,
) -> Result<ParallelHierarchy> {
    params.validate()?;
    if dist.rank_count != comm.rank_count() {
        return Err(AmgError::DimensionMismatch {
            expected: comm.rank_count(),
            actual: dist.rank_count,
        });
    }
    let hp = &params.hierarchy;
    let ap = &params.agglomeration;
    let mut levels = vec![ParallelLevel {
        states: build_rank_states(a, dist)?,
        agglomeration: None,
        maps: None,
    }];
    let mut stats = Vec::new();
    let stop_reason = loop {
        let lvl = levels.len() - 1;
        let start = Instant::now();
        let cur = &levels[lvl].states;
        let counts = owner_counts(cur);
        let n = comm.allreduce_count(lvl, &counts);
        let nnz_parts: Vec<(usize, usize)> =
            cur.iter().filter(|s| s.is_active()).map(|s| (s.rank, s.owner_nnz())).collect();
        let nnz = comm.allreduce_count(lvl, &nnz_parts);
        let active = counts.len();
        let mut stat = ParallelLevelStats {
            level: lvl,
            n,
            nnz,
            active_ranks: active,
            min_owned: counts.iter().map(|c| c.1).min().unwrap_or(0),
            max_owned: counts.iter().map(|c| c.1).max().unwrap_or(0),
            agglomerated_to: None,
            isolated: 0,
            dirichlet: 0,
            build_seconds: 0.0,
        };
        if n <= hp.coarse_target {
            stats.push(stat);
            break StopReason::CoarseEnough;
        }
        if levels.len() >= hp.max_levels {
            stats.push(stat);
            break StopReason::LevelCap;
        }

        let forced = ap.forced.filter(|f| f.level == lvl);
        let mut ag: Option<Agglomeration> = match forced {
            Some(f) if f.ranks < active => Some(agglomerate(comm, lvl, cur, f.ranks)?),
            Some(_) => None,
            None if active > 1 && trigger_agglomeration(cur, ap.threshold, false) => {
                Some(agglomerate(comm, lvl, cur, agglomeration_target(active, ap.group_size))?)
            }
            None => None,
        };
        let (mut outcome, nc) = loop {
            let cstates = ag.as_ref().map_or(cur.as_slice(), |g| g.gathered.as_slice());
            let outcome = parallel_aggregation(comm, lvl, cstates, &hp.aggregation)?;
            let parts: Vec<(usize, usize)> = cstates
                .iter()
                .zip(&outcome.maps)
                .filter(|(s, _)| s.is_active())
                .map(|(s, m)| (s.rank, m.n_owned_coarse))
                .collect();
            let nc = comm.allreduce_count(lvl, &parts);
            let global = nc == 0 || nc as f64 > STAGNATION_RATIO * n as f64;
            let c_active = active_count(cstates);
            if c_active > 1 && (global || locally_stagnated(cstates, &outcome.maps)) {
                let target = if global { 1 } else { agglomeration_target(c_active, ap.group_size) };
                log::debug!("level {lvl}: coarsening stagnated on {c_active} ranks, agglomerating onto {target}");
                ag = Some(agglomerate(comm, lvl, cur, target)?);
                continue;
            }
            break (outcome, nc);
        };
        stat.agglomerated_to = ag.as_ref().map(Agglomeration::active_ranks);
        stat.isolated = outcome.maps.iter().map(|m| m.isolated).sum();
        stat.dirichlet = outcome.maps.iter().map(|m| m.dirichlet).sum();
        if nc == 0 || nc as f64 > STAGNATION_RATIO * n as f64 {
            log::warn!("coarsening stagnated on level {lvl}: {n} -> {nc}");
            levels[lvl].agglomeration = ag;
            stat.build_seconds = start.elapsed().as_secs_f64();
            stats.push(stat);
            break StopReason::Stagnation;
        }
        let cstates = ag.as_ref().map_or(cur.as_slice(), |g| g.gathered.as_slice());
        fill_coarse_operators(cstates, &mut outcome, hp.omega);
        log::debug!("level {lvl}: {n} -> {nc} unknowns on {active} ranks");
        let coarse = std::mem::take(&mut outcome.coarse);
        levels[lvl].agglomeration = ag;
        levels[lvl].maps = Some(outcome.maps);
        stat.build_seconds = start.elapsed().as_secs_f64();
        stats.push(stat);
        levels.push(ParallelLevel {
            states: coarse,
            agglomeration: None,
            maps: None,
        });
    };

    let last = levels.len() - 1;
    let start = Instant::now();
    let level = &mut levels[last];
    if active_count(level.coarsening_states()) > 1 {
        level.agglomeration = Some(agglomerate(comm, last, &level.states, 1)?);
        stats[last].agglomerated_to = Some(1);
    }
    let solve_state = level
        .coarsening_states()
        .iter()
        .find(|s| s.is_active())
        .ok_or_else(|| AmgError::InvalidStructure("coarsest level has no unknowns".into()))?;
    let coarse_rank = solve_state.rank;
    let coarse_lu = factor_coarsest(&solve_state.a_loc, last)?;
    stats[last].build_seconds += start.elapsed().as_secs_f64();
    for l in &levels[..last] {
        for s in &l.states {
            check_diagonal(&s.a_loc)?;
        }
    }
    let sizes: Vec<(usize, usize)> = stats.iter().map(|s| (s.n, s.nnz)).collect();
    Ok(ParallelHierarchy {
        levels,
        rank_count: comm.rank_count(),
        coarse_rank,
        coarse_lu,
        omega: hp.omega,
        stats: ParallelHierarchyStats {
            levels: stats,
            stop_reason,
            complexity: ComplexityReport::from_sizes(&sizes),
            omega: hp.omega,
        },
    })
}

#[derive(Debug, Clone)]
struct LevelWork {
    x: DistVector,
    b: DistVector,
    r: DistVector,
    scratch: DistVector,
    /// Residual and correction on the agglomerated states.
    gathered: Option<(DistVector, DistVector)>,
}

/// Per-level distributed vectors reused across V-cycle applications.
#[derive(Debug, Clone)]
pub struct ParallelWorkspace {
    levels: Vec<LevelWork>,
}

impl ParallelWorkspace {
    pub fn new(h: &ParallelHierarchy) -> Self {
        ParallelWorkspace {
            levels: h
                .levels
                .iter()
                .map(|l| LevelWork {
                    x: DistVector::zeros(&l.states),
                    b: DistVector::zeros(&l.states),
                    r: DistVector::zeros(&l.states),
                    scratch: DistVector::zeros(&l.states),
                    gathered: l
                        .agglomeration
                        .as_ref()
                        .map(|ag| (DistVector::zeros(&ag.gathered), DistVector::zeros(&ag.gathered))),
                })
                .collect(),
        }
    }
}

/// Applies one V-cycle with hybrid smoothing. `b` needs correct owner
/// entries; the result `z` is consistent.
pub fn parallel_vcycle(
    h: &ParallelHierarchy,
    comm: &mut VirtualComm,
    b: &DistVector,
    z: &mut DistVector,
    spec: &SmootherSpec,
    ws: &mut ParallelWorkspace,
) -> Result<()> {
    let last = h.levels.len() - 1;
    ws.levels[0].b.0.clone_from(&b.0);
    for l in 0..last {
        let level = &h.levels[l];
        let maps = level.maps.as_ref().expect("non-coarsest level has transfer maps");
        let (head, tail) = ws.levels.split_at_mut(l + 1);
        let w = &mut head[l];
        w.x.fill(0.0);
        hybrid_smoother_step(comm, l, &level.states, &mut w.x, &w.b, spec, &mut w.scratch)?;
        owner_residual(&level.states, &w.x, &w.b, &mut w.r)?;
        let (cstates, rc) = match (&level.agglomeration, &mut w.gathered) {
            (Some(ag), Some((rg, _))) => {
                gather_owned(ag, comm, &level.states, &w.r, rg)?;
                (ag.gathered.as_slice(), &*rg)
            }
            _ => (level.states.as_slice(), &w.r),
        };
        let nb = &mut tail[0].b;
        for (s, m) in cstates.iter().zip(maps) {
            if s.is_active() {
                restrict_owned(m, s.n_owned(), &rc.0[s.rank], &mut nb.0[s.rank]);
            }
        }
    }
    {
        let level = &h.levels[last];
        let w = &mut ws.levels[last];
        let r = h.coarse_rank;
        match (&level.agglomeration, &mut w.gathered) {
            (Some(ag), Some((bg, xg))) => {
                gather_owned(ag, comm, &level.states, &w.b, bg)?;
                h.coarse_lu.solve_into(&bg.0[r], &mut xg.0[r])?;
                scatter_local(ag, comm, xg, &mut w.x)?;
            }
            _ => h.coarse_lu.solve_into(&w.b.0[r], &mut w.x.0[r])?,
        }
    }
    for l in (0..last).rev() {
        let level = &h.levels[l];
        let maps = level.maps.as_ref().expect("non-coarsest level has transfer maps");
        let (head, tail) = ws.levels.split_at_mut(l + 1);
        let w = &mut head[l];
        let xc = &tail[0].x;
        match (&level.agglomeration, &mut w.gathered) {
            (Some(ag), Some((_, eg))) => {
                eg.fill(0.0);
                for (s, m) in ag.gathered.iter().zip(maps) {
                    if s.is_active() {
                        prolongate_local(m, &xc.0[s.rank], &mut eg.0[s.rank]);
                    }
                }
                scatter_local(ag, comm, eg, &mut w.r)?;
                w.x.axpy(1.0, &w.r);
            }
            _ => {
                for (s, m) in level.states.iter().zip(maps) {
                    if s.is_active() {
                        prolongate_local(m, &xc.0[s.rank], &mut w.x.0[s.rank]);
                    }
                }
            }
        }
        hybrid_smoother_step(comm, l, &level.states, &mut w.x, &w.b, spec, &mut w.scratch)?;
    }
    if cfg!(debug_assertions) {
        check_consistent(&h.levels[0].states, &ws.levels[0].x)?;
    }
    z.0.clone_from(&ws.levels[0].x.0);
    Ok(())
}

/// Krylov backend over distributed vectors in consistent storage.
pub struct ParallelBackend<'a> {
    pub h: &'a ParallelHierarchy,
    pub comm: &'a mut VirtualComm,
    pub spec: SmootherSpec,
    ws: ParallelWorkspace,
}

impl<'a> ParallelBackend<'a> {
    pub fn new(h: &'a ParallelHierarchy, comm: &'a mut VirtualComm, spec: SmootherSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ParallelBackend {
            h,
            comm,
            spec,
            ws: ParallelWorkspace::new(h),
        })
    }
}

impl KrylovBackend for ParallelBackend<'_> {
    type Vector = DistVector;

    fn zeros(&self) -> DistVector {
        DistVector::zeros(self.h.fine_states())
    }

    fn apply(&mut self, x: &DistVector, y: &mut DistVector) -> Result<()> {
        parallel_spmv(self.comm, 0, self.h.fine_states(), x, y)
    }

    fn precondition(&mut self, r: &DistVector, z: &mut DistVector) -> Result<()> {
        parallel_vcycle(self.h, self.comm, r, z, &self.spec, &mut self.ws)
    }

    fn dot(&mut self, x: &DistVector, y: &DistVector) -> f64 {
        parallel_dot(self.comm, 0, self.h.fine_states(), x, y)
    }

    fn axpy(&self, alpha: f64, x: &DistVector, y: &mut DistVector) {
        y.axpy(alpha, x);
    }

    fn scale(&self, alpha: f64, x: &mut DistVector) {
        x.scale(alpha);
    }
}

/// V-cycle preconditioned BiCGSTAB for a consistent right-hand side.
pub fn parallel_bicgstab(
    h: &ParallelHierarchy,
    comm: &mut VirtualComm,
    b: &DistVector,
    spec: SmootherSpec,
    tol: f64,
    max_iter: usize,
) -> Result<(DistVector, SolveReport)> {
    let mut backend = ParallelBackend::new(h, comm, spec)?;
    bicgstab_with(&mut backend, b, tol, max_iter)
}

/// Owner rows of `states` assembled into one matrix, indexed by position in
/// the returned ascending label list.
pub fn assemble_global(states: &[RankState]) -> Result<(Vec<usize>, CsrMatrix)> {
    let mut labels: Vec<usize> = states.iter().flat_map(|s| s.idx.owners().iter().copied()).collect();
    labels.sort_unstable();
    let pos = |g: usize| labels.binary_search(&g).ok();
    let mut t = TripletBuilder::new(labels.len());
    for s in states {
        let g = s.idx.global_ids();
        for i in 0..s.n_owned() {
            let row = pos(g[i]).unwrap();
            for (j, v) in s.a_loc.row(i) {
                let col = pos(g[j]).ok_or_else(|| {
                    AmgError::InvalidStructure(format!("label {} has no owner on this level", g[j]))
                })?;
                t.push(row, col, v);
            }
        }
    }
    let a = t.build()?;
    Ok((labels, a))
}

/// Aggregates of level `level` as one map from the fine to the coarse
/// global ordering of [`assemble_global`].
pub fn assemble_aggregates(h: &ParallelHierarchy, level: usize) -> Result<AggregatesMap> {
    let lvl = &h.levels[level];
    let maps = lvl
        .maps
        .as_ref()
        .ok_or_else(|| AmgError::InvalidConfig(format!("level {level} is the coarsest level")))?;
    let fine = lvl.coarsening_states();
    let coarse = &h.levels[level + 1].states;
    let mut fl: Vec<usize> = fine.iter().flat_map(|s| s.idx.owners().iter().copied()).collect();
    let mut cl: Vec<usize> = coarse.iter().flat_map(|s| s.idx.owners().iter().copied()).collect();
    fl.sort_unstable();
    cl.sort_unstable();
    let mut agg_of = vec![None; fl.len()];
    for (s, m) in fine.iter().zip(maps) {
        let cs = &coarse[s.rank];
        for i in 0..s.n_owned() {
            if let Some(c) = m.map.agg_of[i] {
                let f = fl.binary_search(&s.idx.global_ids()[i]).unwrap();
                agg_of[f] = Some(cl.binary_search(&cs.idx.global_ids()[c]).unwrap());
            }
        }
    }
    AggregatesMap::from_assignment(agg_of)
}
