//! Coarse-level agglomeration: gathering the unknowns of groups of ranks
//! onto one designated rank per group.
//!
//! Groups come from recursive bisection of the rank communication graph,
//! weighted by owner counts. The owner counts and neighbour lists this
//! needs are small and are taken as replicated on every rank.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::parallel::comm::{ExchangeKind, Payload, RankBlock, VirtualComm};
use crate::parallel::index::{localize_rows, CommLink, ParallelIndexSet, RankState};
use crate::parallel::ops::DistVector;

/// Owner count below which a rank triggers agglomeration.
pub const DEFAULT_AGGLOMERATION_THRESHOLD: usize = 64;
/// Ranks merged per group; at most this many active ranks gather onto one.
pub const DEFAULT_GROUP_SIZE: usize = 8;

/// Agglomeration onto `ranks` ranks before coarsening `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcedAgglomeration {
    pub level: usize,
    pub ranks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgglomerationParams {
    pub threshold: usize,
    pub group_size: usize,
    pub forced: Option<ForcedAgglomeration>,
}

impl Default for AgglomerationParams {
    fn default() -> Self {
        AgglomerationParams {
            threshold: DEFAULT_AGGLOMERATION_THRESHOLD,
            group_size: DEFAULT_GROUP_SIZE,
            forced: None,
        }
    }
}

impl AgglomerationParams {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(AmgError::InvalidConfig("agglomeration group size must be at least 2".into()));
        }
        if let Some(f) = self.forced {
            if f.ranks == 0 {
                return Err(AmgError::InvalidConfig("forced agglomeration needs at least 1 rank".into()));
            }
        }
        Ok(())
    }
}

/// True when some active rank owns fewer than `threshold` unknowns or
/// coarsening stagnated on some rank.
pub fn trigger_agglomeration(states: &[RankState], threshold: usize, stagnated: bool) -> bool {
    stagnated
        || states
            .iter()
            .filter(|s| s.is_active())
            .any(|s| s.n_owned() < threshold)
}

/// Number of ranks to agglomerate `active` ranks onto.
pub fn agglomeration_target(active: usize, group_size: usize) -> usize {
    if active <= group_size {
        1
    } else {
        active.div_ceil(group_size)
    }
}

/// Per-rank data moved to the designated rank.
pub(crate) fn rank_block(s: &RankState) -> RankBlock {
    let g = s.idx.global_ids();
    RankBlock {
        labels: g.to_vec(),
        n_owned: s.n_owned(),
        rows: (0..s.n_owned())
            .map(|i| s.a_loc.row(i).map(|(j, v)| (g[j], v)).collect())
            .collect(),
        copy_owner: s.copy_owner.clone(),
        sends: s
            .links
            .iter()
            .filter(|l| !l.send.is_empty())
            .map(|l| (l.rank, l.send.iter().map(|&i| g[i]).collect()))
            .collect(),
    }
}

struct RankGraph {
    weight: Vec<usize>,
    adj: Vec<Vec<usize>>,
}

impl RankGraph {
    fn new(states: &[RankState]) -> Self {
        RankGraph {
            weight: states.iter().map(RankState::n_owned).collect(),
            adj: states.iter().map(RankState::neighbor_ranks).collect(),
        }
    }

    /// Breadth-first order of `set` from `start`, restarting from the
    /// smallest unvisited rank when a component is exhausted.
    fn bfs(&self, set: &BTreeSet<usize>, start: usize) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::with_capacity(set.len());
        let mut queue = VecDeque::new();
        let mut next = Some(start);
        while let Some(s) = next {
            seen.insert(s);
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for &u in &self.adj[v] {
                    if set.contains(&u) && seen.insert(u) {
                        queue.push_back(u);
                    }
                }
            }
            next = set.iter().copied().find(|v| !seen.contains(v));
        }
        order
    }

    fn pseudo_peripheral(&self, set: &BTreeSet<usize>) -> usize {
        let mut v = *set.iter().next().unwrap();
        for _ in 0..4 {
            let far = *self.bfs(set, v).last().unwrap();
            if far == v {
                break;
            }
            v = far;
        }
        v
    }

    fn bisect(&self, set: BTreeSet<usize>, parts: usize, out: &mut Vec<Vec<usize>>) {
        if parts <= 1 || set.len() <= 1 {
            out.push(set.into_iter().collect());
            return;
        }
        let parts = parts.min(set.len());
        let left_parts = parts / 2;
        let right_parts = parts - left_parts;
        let order = self.bfs(&set, self.pseudo_peripheral(&set));
        let total: usize = order.iter().map(|&r| self.weight[r]).sum();
        let goal = total as f64 * left_parts as f64 / parts as f64;
        let (lo, hi) = (left_parts, order.len() - right_parts);
        let mut best = (f64::INFINITY, lo);
        let mut acc = 0usize;
        for (k, &r) in order.iter().enumerate() {
            acc += self.weight[r];
            let len = k + 1;
            if len >= lo && len <= hi {
                let gap = (acc as f64 - goal).abs();
                if gap < best.0 {
                    best = (gap, len);
                }
            }
        }
        let left: BTreeSet<usize> = order[..best.1].iter().copied().collect();
        let right: BTreeSet<usize> = order[best.1..].iter().copied().collect();
        self.bisect(left, left_parts, out);
        self.bisect(right, right_parts, out);
    }
}

/// Splits the active ranks into `parts` groups, each sorted, ordered by
/// smallest member.
pub fn bisect_ranks(states: &[RankState], parts: usize) -> Vec<Vec<usize>> {
    let active: BTreeSet<usize> = states.iter().filter(|s| s.is_active()).map(|s| s.rank).collect();
    if active.is_empty() {
        return Vec::new();
    }
    let mut groups = Vec::new();
    RankGraph::new(states).bisect(active, parts.max(1), &mut groups);
    groups.sort_by_key(|g| g[0]);
    groups
}

/// Agglomerated layout of one level.
#[derive(Debug, Clone)]
pub struct Agglomeration {
    pub level: usize,
    /// Member ranks per group; the first member is the designated rank.
    pub groups: Vec<Vec<usize>>,
    /// Designated rank of every active rank.
    pub designated_of: Vec<Option<usize>>,
    /// Per rank, the designated rank's local index of each of its local entries.
    pub scatter: Vec<Vec<usize>>,
    /// States after gathering; non-designated ranks are idle.
    pub gathered: Vec<RankState>,
}

impl Agglomeration {
    pub fn active_ranks(&self) -> usize {
        self.groups.len()
    }
}

fn build_group_state(
    d: usize,
    blocks: &[(usize, RankBlock)],
    designated_of: &[Option<usize>],
) -> Result<(RankState, Vec<Vec<usize>>)> {
    let in_group = |r: usize| designated_of[r] == Some(d);
    let owners: Vec<usize> = blocks.iter().flat_map(|(_, b)| b.labels[..b.n_owned].iter().copied()).collect();
    let mut copies: BTreeMap<usize, usize> = BTreeMap::new();
    for (_, b) in blocks {
        for (&g, &q) in b.labels[b.n_owned..].iter().zip(&b.copy_owner) {
            if !in_group(q) {
                let nq = designated_of[q]
                    .ok_or_else(|| AmgError::Communication(format!("label {g} is owned by idle rank {q}")))?;
                copies.insert(g, nq);
            }
        }
    }
    let idx = ParallelIndexSet::new(owners, copies.keys().copied().collect())?;
    let a_loc = localize_rows(blocks.iter().flat_map(|(_, b)| b.rows.iter().cloned()), &idx)?;

    let mut recv: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&g, &q) in &copies {
        recv.entry(q).or_default().push(idx.local_of(g).unwrap());
    }
    let mut send: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (_, b) in blocks {
        for (r, labels) in &b.sends {
            if !in_group(*r) {
                let nr = designated_of[*r]
                    .ok_or_else(|| AmgError::Communication(format!("rank {r} is idle but receives copies")))?;
                send.entry(nr).or_default().extend(labels.iter().copied());
            }
        }
    }
    let ranks: BTreeSet<usize> = recv.keys().chain(send.keys()).copied().collect();
    let links = ranks
        .into_iter()
        .map(|r| CommLink {
            rank: r,
            send: send
                .get(&r)
                .map(|s| s.iter().map(|g| idx.local_of(*g).unwrap()).collect())
                .unwrap_or_default(),
            recv: recv.remove(&r).unwrap_or_default(),
        })
        .collect();
    let scatter = blocks
        .iter()
        .map(|(m, b)| {
            b.labels
                .iter()
                .map(|g| {
                    idx.local_of(*g).ok_or_else(|| {
                        AmgError::Communication(format!("label {g} of rank {m} is missing after agglomeration"))
                    })
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<_>>()?;
    let state = RankState {
        rank: d,
        idx,
        a_loc,
        links,
        copy_owner: copies.into_values().collect(),
    };
    Ok((state, scatter))
}

/// Gathers the active ranks of `states` onto `target` designated ranks.
/// Performs one exchange; `target` at or above the active count leaves the
/// layout unchanged.
pub fn agglomerate(comm: &mut VirtualComm, level: usize, states: &[RankState], target: usize) -> Result<Agglomeration> {
    let p = states.len();
    let active: Vec<usize> = states.iter().filter(|s| s.is_active()).map(|s| s.rank).collect();
    let groups = if target >= active.len() {
        active.iter().map(|&r| vec![r]).collect()
    } else if target <= 1 {
        vec![active.clone()]
    } else {
        bisect_ranks(states, target)
    };
    let mut designated_of = vec![None; p];
    for g in &groups {
        for &m in g {
            designated_of[m] = Some(g[0]);
        }
    }
    let mut gathered: Vec<RankState> = (0..p).map(RankState::empty).collect();
    let mut scatter = vec![Vec::new(); p];
    if groups.iter().all(|g| g.len() == 1) {
        for &r in &active {
            gathered[r] = states[r].clone();
            scatter[r] = (0..states[r].n_local()).collect();
        }
    } else {
        comm.begin(level, ExchangeKind::Agglomerate)?;
        for g in &groups {
            for &m in &g[1..] {
                comm.send(m, g[0], Payload::Block(Box::new(rank_block(&states[m]))))?;
            }
        }
        for g in &groups {
            let d = g[0];
            let mut blocks = Vec::with_capacity(g.len());
            for &m in g {
                let b = if m == d {
                    rank_block(&states[d])
                } else {
                    comm.recv(m, d)?.into_block()?
                };
                blocks.push((m, b));
            }
            let (state, sc) = build_group_state(d, &blocks, &designated_of)?;
            gathered[d] = state;
            for (&m, s) in g.iter().zip(sc) {
                scatter[m] = s;
            }
        }
        comm.end()?;
    }
    let out = Agglomeration {
        level,
        groups,
        designated_of,
        scatter,
        gathered,
    };
    if cfg!(debug_assertions) {
        crate::parallel::index::check_patterns(&out.gathered)?;
    }
    Ok(out)
}

/// Moves owner entries of `x` (laid out on the unagglomerated states) to
/// the designated ranks; copies of `out` are zeroed. One exchange.
pub fn gather_owned(
    ag: &Agglomeration,
    comm: &mut VirtualComm,
    states: &[RankState],
    x: &DistVector,
    out: &mut DistVector,
) -> Result<()> {
    out.0.iter_mut().flatten().for_each(|v| *v = 0.0);
    comm.begin(ag.level, ExchangeKind::Gather)?;
    for g in &ag.groups {
        for &m in &g[1..] {
            let n = states[m].n_owned();
            comm.send(m, g[0], Payload::Reals(x.0[m][..n].to_vec()))?;
        }
    }
    for g in &ag.groups {
        let d = g[0];
        for &m in g {
            let n = states[m].n_owned();
            let vals = if m == d {
                x.0[d][..n].to_vec()
            } else {
                comm.recv(m, d)?.into_reals()?
            };
            for (&l, v) in ag.scatter[m][..n].iter().zip(vals) {
                out.0[d][l] = v;
            }
        }
    }
    comm.end()
}

/// Sends every rank its full local part of `x` (laid out on the gathered
/// states). One exchange.
pub fn scatter_local(ag: &Agglomeration, comm: &mut VirtualComm, x: &DistVector, out: &mut DistVector) -> Result<()> {
    comm.begin(ag.level, ExchangeKind::Scatter)?;
    for g in &ag.groups {
        let d = g[0];
        for &m in &g[1..] {
            comm.send(d, m, Payload::Reals(ag.scatter[m].iter().map(|&l| x.0[d][l]).collect()))?;
        }
    }
    for g in &ag.groups {
        let d = g[0];
        for &m in g {
            let vals = if m == d {
                ag.scatter[d].iter().map(|&l| x.0[d][l]).collect()
            } else {
                comm.recv(d, m)?.into_reals()?
            };
            if vals.len() != out.0[m].len() {
                return Err(AmgError::DimensionMismatch {
                    expected: out.0[m].len(),
                    actual: vals.len(),
                });
            }
            out.0[m].copy_from_slice(&vals);
        }
    }
    comm.end()
}
