//! Decoupled parallel aggregation and the per-rank Galerkin product.
//!
//! Each rank aggregates the subgraph of its owner rows, so no aggregate
//! crosses a rank boundary. A coarse unknown is labelled by the global label
//! of its seed and owned by the seed's owner. One exchange publishes the
//! fine-to-coarse labels of owner entries to the ranks holding them as copies.

use std::collections::BTreeMap;

use crate::aggregation::{aggregate, AggregatesMap, AggregationParams};
use crate::error::{AmgError, Result};
use crate::hierarchy::galerkin_rows;
use crate::parallel::comm::{ExchangeKind, Payload, VirtualComm};
use crate::parallel::index::{CommLink, ParallelIndexSet, RankState};
use crate::sparse::CsrMatrix;
use crate::strength::{classify, StrengthProfile, VertexClass};

/// Label sent for owner entries that belong to no aggregate.
const NO_AGGREGATE: usize = usize::MAX;

/// Transfer data of one rank between a level and the next coarser one.
#[derive(Debug, Clone, Default)]
pub struct LocalAggregation {
    /// Local fine index to local coarse index over all local entries.
    /// Aggregates `0..n_owned_coarse` are the owner aggregates in creation order.
    pub map: AggregatesMap,
    pub n_owned_coarse: usize,
    pub isolated: usize,
    pub dirichlet: usize,
}

/// Output of [`parallel_aggregation`].
#[derive(Debug, Clone, Default)]
pub struct AggregationOutcome {
    pub maps: Vec<LocalAggregation>,
    /// Coarse index sets with their links; operators are filled by
    /// [`fill_coarse_operators`].
    pub coarse: Vec<RankState>,
}

/// Owner block `A_(p)`: owner rows restricted to owner columns.
pub fn owner_block(state: &RankState) -> CsrMatrix {
    let n = state.n_owned();
    let a = &state.a_loc;
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for i in 0..n {
        for (j, v) in a.row(i) {
            if j < n {
                col_indices.push(j);
                values.push(v);
            }
        }
        row_offsets.push(col_indices.len());
    }
    CsrMatrix::from_raw_unchecked(n, row_offsets, col_indices, values)
}

/// Strength profile of the owner block. A vertex that looks Dirichlet in the
/// block but couples to copies is reclassified as isolated, so it is still
/// aggregated.
pub fn owner_profile(state: &RankState, block: &CsrMatrix, params: &AggregationParams) -> Result<StrengthProfile> {
    let mut profile = classify(block, params.delta, params.beta)?;
    let n = state.n_owned();
    for (i, class) in profile.vertex_class.iter_mut().enumerate() {
        if *class == VertexClass::Dirichlet && state.a_loc.row(i).any(|(j, v)| j >= n && v != 0.0) {
            *class = VertexClass::Isolated;
        }
    }
    Ok(profile)
}

/// Aggregates every active rank's owner subgraph and derives the coarse
/// index sets and communication links. Performs one exchange.
pub fn parallel_aggregation(
    comm: &mut VirtualComm,
    level: usize,
    states: &[RankState],
    params: &AggregationParams,
) -> Result<AggregationOutcome> {
    let mut owner_maps = Vec::with_capacity(states.len());
    let mut counts = Vec::with_capacity(states.len());
    for s in states {
        if !s.is_active() {
            owner_maps.push(None);
            counts.push((0, 0));
            continue;
        }
        let block = owner_block(s);
        let profile = owner_profile(s, &block, params)?;
        let map = aggregate(&block, &profile, params);
        map.check_partition(&profile)?;
        let iso = profile.vertex_class.iter().filter(|c| **c == VertexClass::Isolated).count();
        let dir = profile.vertex_class.iter().filter(|c| **c == VertexClass::Dirichlet).count();
        counts.push((iso, dir));
        owner_maps.push(Some(map));
    }

    let label_of = |s: &RankState, m: &AggregatesMap, i: usize| match m.agg_of[i] {
        Some(k) => s.idx.global_ids()[m.seed_of[k]],
        None => NO_AGGREGATE,
    };

    comm.begin(level, ExchangeKind::AggregateMap)?;
    for (s, m) in states.iter().zip(&owner_maps) {
        let Some(m) = m else { continue };
        for link in &s.links {
            let labels = link.send.iter().map(|&l| label_of(s, m, l)).collect();
            comm.send(s.rank, link.rank, Payload::Labels(labels))?;
        }
    }
    let mut received: Vec<Vec<Vec<usize>>> = Vec::with_capacity(states.len());
    for s in states {
        let mut per_link = Vec::with_capacity(s.links.len());
        for link in &s.links {
            let labels = comm.recv(link.rank, s.rank)?.into_labels()?;
            if labels.len() != link.recv.len() {
                return Err(AmgError::Communication(format!(
                    "rank {} expected {} aggregate labels from rank {}, got {}",
                    s.rank,
                    link.recv.len(),
                    link.rank,
                    labels.len()
                )));
            }
            per_link.push(labels);
        }
        received.push(per_link);
    }
    comm.end()?;

    let mut out = AggregationOutcome::default();
    for (((s, m), recv), (isolated, dirichlet)) in states.iter().zip(owner_maps).zip(received).zip(counts) {
        match m {
            None => {
                out.maps.push(LocalAggregation::default());
                out.coarse.push(RankState::empty(s.rank));
            }
            Some(m) => {
                let (mut la, coarse) = extend_to_copies(s, &m, &recv)?;
                la.isolated = isolated;
                la.dirichlet = dirichlet;
                out.maps.push(la);
                out.coarse.push(coarse);
            }
        }
    }
    Ok(out)
}

/// Extends an owner-block map with the copy aggregates named in `recv` and
/// builds the coarse index set and links.
fn extend_to_copies(
    s: &RankState,
    m: &AggregatesMap,
    recv: &[Vec<usize>],
) -> Result<(LocalAggregation, RankState)> {
    let n_owned = s.n_owned();
    let n_local = s.n_local();
    let nco = m.n_coarse();
    let owner_labels: Vec<usize> = m.seed_of.iter().map(|&v| s.idx.global_ids()[v]).collect();

    // copy label per local copy entry
    let mut received = vec![None; n_local - n_owned];
    for (link, labels) in s.links.iter().zip(recv) {
        for (&l, &lab) in link.recv.iter().zip(labels) {
            received[l - n_owned] = Some(lab);
        }
    }
    let copy_label: Vec<usize> = received
        .into_iter()
        .enumerate()
        .map(|(k, lab)| {
            lab.ok_or_else(|| {
                AmgError::Communication(format!(
                    "rank {} received no aggregate for copy label {}",
                    s.rank,
                    s.idx.copies()[k]
                ))
            })
        })
        .collect::<Result<_>>()?;
    // coarse copies: unique labels, sorted, with their owners
    let mut copy_owner_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, &lab) in copy_label.iter().enumerate() {
        if lab != NO_AGGREGATE {
            let q = s.copy_owner[k];
            if let Some(prev) = copy_owner_of.insert(lab, q) {
                if prev != q {
                    return Err(AmgError::Communication(format!(
                        "aggregate {lab} reported by ranks {prev} and {q}"
                    )));
                }
            }
        }
    }
    let copies: Vec<usize> = copy_owner_of.keys().copied().collect();
    let coarse_copy_owner: Vec<usize> = copy_owner_of.values().copied().collect();
    let idx = ParallelIndexSet::new(owner_labels, copies)?;

    let mut agg_of = m.agg_of.clone();
    agg_of.reserve(n_local - n_owned);
    let mut aggregates = m.aggregates.clone();
    aggregates.resize(idx.len(), Vec::new());
    for (k, &lab) in copy_label.iter().enumerate() {
        if lab == NO_AGGREGATE {
            agg_of.push(None);
        } else {
            let c = idx.local_of(lab).expect("copy label is in the coarse index set");
            aggregates[c].push(n_owned + k);
            agg_of.push(Some(c));
        }
    }
    let mut seed_of = m.seed_of.clone();
    seed_of.extend(aggregates[nco..].iter().map(|a| a[0]));
    let mut isolated = m.isolated.clone();
    isolated.resize(idx.len(), false);
    let map = AggregatesMap {
        agg_of,
        aggregates,
        seed_of,
        isolated,
    };

    // Coarse links follow the fine links: what was sent or received as a
    // fine entry is sent or received as its aggregate.
    let to_coarse = |list: &[usize]| -> Vec<usize> {
        let mut c: Vec<usize> = list.iter().filter_map(|&l| map.agg_of[l]).collect();
        c.sort_unstable_by_key(|&c| idx.global_ids()[c]);
        c.dedup();
        c
    };
    let links: Vec<CommLink> = s
        .links
        .iter()
        .filter_map(|link| {
            let send = to_coarse(&link.send);
            let recv = to_coarse(&link.recv);
            (!send.is_empty() || !recv.is_empty()).then_some(CommLink {
                rank: link.rank,
                send,
                recv,
            })
        })
        .collect();

    let coarse = RankState {
        rank: s.rank,
        idx,
        a_loc: CsrMatrix::default(),
        links,
        copy_owner: coarse_copy_owner,
    };
    let la = LocalAggregation {
        map,
        n_owned_coarse: nco,
        isolated: 0,
        dirichlet: 0,
    };
    Ok((la, coarse))
}

/// Coarse local operator over `n` coarse entries: Galerkin rows for the
/// owner aggregates, identity rows for the copies.
pub fn local_galerkin(fine: &RankState, la: &LocalAggregation, n: usize, omega: f64) -> CsrMatrix {
    let (mut row_offsets, mut col_indices, mut values) = galerkin_rows(&fine.a_loc, &la.map, omega, la.n_owned_coarse);
    for c in la.n_owned_coarse..n {
        col_indices.push(c);
        values.push(1.0);
        row_offsets.push(col_indices.len());
    }
    CsrMatrix::from_raw_unchecked(n, row_offsets, col_indices, values)
}

/// Computes the local coarse operators of `outcome.coarse`.
pub fn fill_coarse_operators(fine: &[RankState], outcome: &mut AggregationOutcome, omega: f64) {
    for ((s, la), c) in fine.iter().zip(&outcome.maps).zip(outcome.coarse.iter_mut()) {
        if s.is_active() {
            c.a_loc = local_galerkin(s, la, c.n_local(), omega);
        }
    }
}

/// `coarse = Pᵀ fine` over owner entries; coarse copies are zero.
pub(crate) fn restrict_owned(la: &LocalAggregation, n_owned: usize, fine: &[f64], coarse: &mut [f64]) {
    coarse.iter_mut().for_each(|c| *c = 0.0);
    for (f, a) in fine[..n_owned].iter().zip(&la.map.agg_of) {
        if let Some(a) = a {
            coarse[*a] += f;
        }
    }
}

/// `fine += P coarse` over all local entries.
pub(crate) fn prolongate_local(la: &LocalAggregation, coarse: &[f64], fine: &mut [f64]) {
    for (f, a) in fine.iter_mut().zip(&la.map.agg_of) {
        if let Some(a) = a {
            *f += coarse[*a];
        }
    }
}
