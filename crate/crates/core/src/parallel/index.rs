//! Index sets and per-rank local operators.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Marker {
    Owner,
    Copy,
}

/// Local index set of one rank: owner entries first, then copies ascending
/// by global label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelIndexSet {
    global_ids: Vec<usize>,
    n_owned: usize,
    local_of: HashMap<usize, usize>,
}

impl ParallelIndexSet {
    /// `copies` must be sorted ascending and disjoint from `owners`.
    pub fn new(owners: Vec<usize>, copies: Vec<usize>) -> Result<Self> {
        debug_assert!(copies.windows(2).all(|w| w[0] < w[1]));
        let n_owned = owners.len();
        let mut global_ids = owners;
        global_ids.extend(copies);
        let mut local_of = HashMap::with_capacity(global_ids.len());
        for (l, &g) in global_ids.iter().enumerate() {
            if local_of.insert(g, l).is_some() {
                return Err(AmgError::InvalidStructure(format!(
                    "global label {g} appears twice in an index set"
                )));
            }
        }
        Ok(ParallelIndexSet {
            global_ids,
            n_owned,
            local_of,
        })
    }

    pub fn len(&self) -> usize {
        self.global_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global_ids.is_empty()
    }

    pub fn n_owned(&self) -> usize {
        self.n_owned
    }

    pub fn global_ids(&self) -> &[usize] {
        &self.global_ids
    }

    pub fn owners(&self) -> &[usize] {
        &self.global_ids[..self.n_owned]
    }

    pub fn copies(&self) -> &[usize] {
        &self.global_ids[self.n_owned..]
    }

    pub fn marker(&self, local: usize) -> Marker {
        if local < self.n_owned {
            Marker::Owner
        } else {
            Marker::Copy
        }
    }

    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.local_of.get(&global).copied()
    }
}

/// Owner rank per global label on one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub level: usize,
    pub rank_count: usize,
    pub active_ranks: Vec<usize>,
    /// Indexed by global label; `None` for labels not present on this level.
    pub assignment: Vec<Option<usize>>,
}

impl Distribution {
    pub fn owner_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.rank_count];
        for r in self.assignment.iter().flatten() {
            c[*r] += 1;
        }
        c
    }

    pub fn n_active_labels(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }
}

/// Factors `p` into three near-equal factors, largest first.
pub fn rank_grid(p: usize) -> [usize; 3] {
    let mut best = [p, 1, 1];
    for a in 1..=p {
        if p % a != 0 {
            continue;
        }
        for b in 1..=a {
            if (p / a) % b != 0 {
                continue;
            }
            let c = p / a / b;
            if c > b {
                continue;
            }
            let cand = [a, b, c];
            if a - c < best[0] - best[2] {
                best = cand;
            }
        }
    }
    best
}

/// Sizes of `parts` near-equal contiguous ranges of `n`, earlier parts larger.
pub fn balanced_split(n: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|r| n / parts + usize::from(r < n % parts)).collect()
}

/// Brick partition of an `n³` lexicographic cell grid over a rank grid; rank
/// `rx + gx·(ry + gy·rz)` owns brick `(rx, ry, rz)`.
pub fn partition_fine(n: usize, grid: [usize; 3]) -> Result<Distribution> {
    if grid.iter().any(|&g| g == 0 || g > n) {
        return Err(AmgError::InvalidConfig(format!(
            "rank grid {grid:?} does not fit {n} cells per axis"
        )));
    }
    let bounds: Vec<Vec<usize>> = grid
        .iter()
        .map(|&g| {
            let mut owner = Vec::with_capacity(n);
            for (r, s) in balanced_split(n, g).into_iter().enumerate() {
                owner.extend(std::iter::repeat(r).take(s));
            }
            owner
        })
        .collect();
    let mut assignment = Vec::with_capacity(n * n * n);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let r = bounds[0][x] + grid[0] * (bounds[1][y] + grid[1] * bounds[2][z]);
                assignment.push(Some(r));
            }
        }
    }
    let rank_count = grid.iter().product();
    Ok(Distribution {
        level: 0,
        rank_count,
        active_ranks: (0..rank_count).collect(),
        assignment,
    })
}

/// Contiguous partition of `0..n` over `ranks` ranks.
pub fn partition_linear(n: usize, ranks: usize) -> Result<Distribution> {
    if ranks == 0 || ranks > n {
        return Err(AmgError::InvalidConfig(format!("{ranks} ranks for {n} unknowns")));
    }
    let mut assignment = Vec::with_capacity(n);
    for (r, s) in balanced_split(n, ranks).into_iter().enumerate() {
        assignment.extend(std::iter::repeat(Some(r)).take(s));
    }
    Ok(Distribution {
        level: 0,
        rank_count: ranks,
        active_ranks: (0..ranks).collect(),
        assignment,
    })
}

/// Communication with one neighbour rank. `send` lists local owner indices
/// the neighbour holds as copies; `recv` lists local copy indices owned by
/// the neighbour. Both are ordered by global label.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLink {
    pub rank: usize,
    pub send: Vec<usize>,
    pub recv: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct RankState {
    pub rank: usize,
    pub idx: ParallelIndexSet,
    /// Local operator: owner rows of the global matrix, identity copy rows.
    pub a_loc: CsrMatrix,
    /// Ascending by neighbour rank.
    pub links: Vec<CommLink>,
    /// Owner rank of each copy entry, aligned with `idx.copies()`.
    pub copy_owner: Vec<usize>,
}

impl RankState {
    pub fn empty(rank: usize) -> Self {
        RankState {
            rank,
            a_loc: CsrMatrix::identity(0),
            ..Default::default()
        }
    }

    pub fn n_owned(&self) -> usize {
        self.idx.n_owned()
    }

    pub fn n_local(&self) -> usize {
        self.idx.len()
    }

    pub fn is_active(&self) -> bool {
        self.idx.n_owned() > 0
    }

    pub fn neighbor_ranks(&self) -> Vec<usize> {
        self.links.iter().map(|l| l.rank).collect()
    }

    /// Nonzeros of the owner rows.
    pub fn owner_nnz(&self) -> usize {
        self.a_loc.row_offsets()[self.n_owned()]
    }
}

/// Halo of each rank: global ids coupled to an owned row but owned elsewhere.
pub fn build_overlap(a: &CsrMatrix, dist: &Distribution) -> Result<Vec<ParallelIndexSet>> {
    if dist.assignment.len() != a.n() {
        return Err(AmgError::DimensionMismatch {
            expected: a.n(),
            actual: dist.assignment.len(),
        });
    }
    let mut owners = vec![Vec::new(); dist.rank_count];
    for (g, r) in dist.assignment.iter().enumerate() {
        match r {
            Some(r) => owners[*r].push(g),
            None => {
                return Err(AmgError::InvalidStructure(format!(
                    "fine unknown {g} has no owner"
                )))
            }
        }
    }
    owners
        .into_iter()
        .enumerate()
        .map(|(p, own)| {
            let mut copies: Vec<usize> = own
                .iter()
                .flat_map(|&i| a.row_cols(i).iter().copied())
                .filter(|&j| dist.assignment[j] != Some(p))
                .collect();
            copies.sort_unstable();
            copies.dedup();
            ParallelIndexSet::new(own, copies)
        })
        .collect()
}

/// Local operator over `idx`: owner rows with columns renumbered, identity
/// rows for copies.
pub fn localize_matrix(a: &CsrMatrix, idx: &ParallelIndexSet) -> Result<CsrMatrix> {
    let rows = idx.owners().iter().map(|&g| a.row(g).collect::<Vec<_>>());
    localize_rows(rows, idx)
}

/// Builds a local operator from owner rows given with global column labels.
pub(crate) fn localize_rows<I>(rows: I, idx: &ParallelIndexSet) -> Result<CsrMatrix>
where
    I: IntoIterator<Item = Vec<(usize, f64)>>,
{
    let n = idx.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    let mut buf: Vec<(usize, f64)> = Vec::new();
    for row in rows {
        buf.clear();
        for (g, v) in row {
            let l = idx.local_of(g).ok_or_else(|| {
                AmgError::InvalidStructure(format!("column {g} is outside the local index set"))
            })?;
            buf.push((l, v));
        }
        buf.sort_unstable_by_key(|e| e.0);
        for &(l, v) in &buf {
            col_indices.push(l);
            values.push(v);
        }
        row_offsets.push(col_indices.len());
    }
    if row_offsets.len() != idx.n_owned() + 1 {
        return Err(AmgError::InvalidStructure("row count differs from owner count".into()));
    }
    for l in idx.n_owned()..n {
        col_indices.push(l);
        values.push(1.0);
        row_offsets.push(col_indices.len());
    }
    CsrMatrix::from_raw(n, row_offsets, col_indices, values)
}

/// Derives the send lists from every rank's copies and their owners.
pub(crate) fn build_links(idx: &[ParallelIndexSet], copy_owner: &[Vec<usize>]) -> Result<Vec<Vec<CommLink>>> {
    let p = idx.len();
    let mut links: Vec<Vec<CommLink>> = vec![Vec::new(); p];
    let mut sends: Vec<std::collections::BTreeMap<usize, Vec<usize>>> = vec![Default::default(); p];
    for (r, (set, owners)) in idx.iter().zip(copy_owner).enumerate() {
        let mut recv: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (k, (&g, &q)) in set.copies().iter().zip(owners).enumerate() {
            let l = set.n_owned() + k;
            recv.entry(q).or_default().push(l);
            let ql = idx[q]
                .local_of(g)
                .filter(|&ql| ql < idx[q].n_owned())
                .ok_or_else(|| {
                    AmgError::Communication(format!("rank {q} does not own label {g} copied by rank {r}"))
                })?;
            sends[q].entry(r).or_default().push(ql);
        }
        for (q, list) in recv {
            links[r].push(CommLink {
                rank: q,
                send: Vec::new(),
                recv: list,
            });
        }
    }
    for (q, per) in sends.into_iter().enumerate() {
        for (r, list) in per {
            match links[q].binary_search_by_key(&r, |l| l.rank) {
                Ok(pos) => links[q][pos].send = list,
                Err(pos) => links[q].insert(
                    pos,
                    CommLink {
                        rank: r,
                        send: list,
                        recv: Vec::new(),
                    },
                ),
            }
        }
    }
    Ok(links)
}

/// Per-rank states of the global matrix `a` under `dist`.
pub fn build_rank_states(a: &CsrMatrix, dist: &Distribution) -> Result<Vec<RankState>> {
    let idx = build_overlap(a, dist)?;
    let copy_owner: Vec<Vec<usize>> = idx
        .iter()
        .map(|s| s.copies().iter().map(|&g| dist.assignment[g].unwrap()).collect())
        .collect();
    let links = build_links(&idx, &copy_owner)?;
    idx.into_iter()
        .zip(copy_owner)
        .zip(links)
        .enumerate()
        .map(|(rank, ((idx, copy_owner), links))| {
            Ok(RankState {
                rank,
                a_loc: localize_matrix(a, &idx)?,
                idx,
                links,
                copy_owner,
            })
        })
        .collect()
}

/// Checks that every send list matches the receiving rank's receive list.
pub fn check_patterns(states: &[RankState]) -> Result<()> {
    for s in states {
        for link in &s.links {
            let other = &states[link.rank];
            let back = other
                .links
                .iter()
                .find(|l| l.rank == s.rank)
                .ok_or_else(|| AmgError::Communication(format!("rank {} has no link to {}", link.rank, s.rank)))?;
            let sent: Vec<usize> = link.send.iter().map(|&l| s.idx.global_ids()[l]).collect();
            let received: Vec<usize> = back.recv.iter().map(|&l| other.idx.global_ids()[l]).collect();
            if sent != received || link.send.iter().any(|&l| l >= s.n_owned()) {
                return Err(AmgError::Communication(format!(
                    "pattern mismatch between rank {} and rank {}",
                    s.rank, link.rank
                )));
            }
        }
        let mut covered = vec![false; s.n_local() - s.n_owned()];
        for link in &s.links {
            for &l in &link.recv {
                covered[l - s.n_owned()] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(AmgError::Communication(format!("rank {} has a copy nobody sends", s.rank)));
        }
    }
    Ok(())
}
