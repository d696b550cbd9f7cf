//! Greedy aggregation of the matrix graph.
//!
//! Non-isolated vertices are aggregated first. Each aggregate starts from a
//! seed, grows towards `s_min` by repeatedly picking the admissible frontier
//! vertex with the most strong connections, is then "rounded" with vertices
//! that are more tightly bound to it than to the unaggregated rest, and a
//! remaining singleton is merged into a strongly connected neighbouring
//! aggregate. The next seed is taken from the unaggregated neighbours of the
//! last aggregate, falling back to the vertex with the fewest unaggregated
//! neighbours. Isolated vertices are aggregated afterwards among themselves.
//!
//! Every choice is resolved by smallest vertex (or aggregate) id, so the
//! result is a deterministic function of the matrix and the parameters.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;
use crate::strength::{StrengthProfile, DEFAULT_BETA, DEFAULT_DELTA};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    pub s_min: usize,
    pub s_max: usize,
    pub d_max: usize,
    pub delta: f64,
    pub beta: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        AggregationParams {
            s_min: 4,
            s_max: 6,
            d_max: 2,
            delta: DEFAULT_DELTA,
            beta: DEFAULT_BETA,
        }
    }
}

impl AggregationParams {
    pub fn validate(&self) -> Result<()> {
        if self.s_min < 1 || self.s_min > self.s_max {
            return Err(AmgError::InvalidConfig(format!(
                "aggregate sizes must satisfy 1 <= s_min <= s_max (got {} and {})",
                self.s_min, self.s_max
            )));
        }
        if self.d_max < 1 {
            return Err(AmgError::InvalidConfig("d_max must be at least 1".into()));
        }
        crate::strength::check_thresholds(self.delta, self.beta)
    }
}

/// Surjective map from fine vertices onto aggregates. Vertices that are not
/// aggregated (Dirichlet vertices) map to `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregatesMap {
    pub agg_of: Vec<Option<usize>>,
    pub aggregates: Vec<Vec<usize>>,
    pub seed_of: Vec<usize>,
    /// Whether the aggregate was built from isolated vertices.
    pub isolated: Vec<bool>,
}

impl AggregatesMap {
    /// Builds a map from an explicit assignment. Aggregate ids must be
    /// `0..k` with every id used; the seed of each aggregate is its smallest
    /// member.
    pub fn from_assignment(agg_of: Vec<Option<usize>>) -> Result<Self> {
        let k = agg_of.iter().flatten().map(|&a| a + 1).max().unwrap_or(0);
        let mut aggregates = vec![Vec::new(); k];
        for (v, a) in agg_of.iter().enumerate() {
            if let Some(a) = a {
                aggregates[*a].push(v);
            }
        }
        if let Some(empty) = aggregates.iter().position(|a| a.is_empty()) {
            return Err(AmgError::InvalidStructure(format!(
                "aggregate {empty} has no members"
            )));
        }
        let seed_of = aggregates.iter().map(|a| a[0]).collect();
        Ok(AggregatesMap {
            agg_of,
            isolated: vec![false; k],
            aggregates,
            seed_of,
        })
    }

    pub fn n_fine(&self) -> usize {
        self.agg_of.len()
    }

    pub fn n_coarse(&self) -> usize {
        self.aggregates.len()
    }

    /// Checks that the aggregates are disjoint, consistent with `agg_of`, and
    /// cover every non-Dirichlet vertex.
    pub fn check_partition(&self, profile: &StrengthProfile) -> Result<()> {
        let mut seen = vec![false; self.n_fine()];
        for (id, members) in self.aggregates.iter().enumerate() {
            for &v in members {
                if seen[v] {
                    return Err(AmgError::InvalidStructure(format!(
                        "vertex {v} appears in two aggregates"
                    )));
                }
                seen[v] = true;
                if self.agg_of[v] != Some(id) {
                    return Err(AmgError::InvalidStructure(format!(
                        "vertex {v} listed in aggregate {id} but mapped to {:?}",
                        self.agg_of[v]
                    )));
                }
            }
        }
        for (v, s) in seen.iter().enumerate() {
            if !s && !profile.is_dirichlet(v) {
                return Err(AmgError::Unaggregated { vertex: v });
            }
            if *s && profile.is_dirichlet(v) {
                return Err(AmgError::InvalidStructure(format!(
                    "Dirichlet vertex {v} was aggregated"
                )));
            }
        }
        Ok(())
    }

    /// Writes a `vertex,aggregate` CSV; unaggregated vertices get `-1`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "vertex,aggregate")?;
        for (v, a) in self.agg_of.iter().enumerate() {
            match a {
                Some(a) => writeln!(out, "{v},{a}")?,
                None => writeln!(out, "{v},-1")?,
            }
        }
        Ok(())
    }
}

/// Builds the aggregates of the graph of `a`.
pub fn aggregate(
    a: &CsrMatrix,
    profile: &StrengthProfile,
    params: &AggregationParams,
) -> AggregatesMap {
    Aggregator::new(a, profile, params).run()
}

/// Graph diameter of the subgraph induced by `verts`, `None` if it is not
/// connected. Intended for small vertex sets.
pub fn induced_diameter(a: &CsrMatrix, verts: &[usize]) -> Option<usize> {
    let k = verts.len();
    let adj: Vec<Vec<usize>> = verts
        .iter()
        .map(|&x| {
            a.row_cols(x)
                .iter()
                .filter(|&&y| y != x)
                .filter_map(|y| verts.iter().position(|v| v == y))
                .collect()
        })
        .collect();
    let mut diam = 0;
    let mut dist = vec![usize::MAX; k];
    let mut queue = Vec::with_capacity(k);
    for s in 0..k {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.clear();
        queue.push(s);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if queue.len() < k {
            return None;
        }
        diam = diam.max(dist[queue[k - 1]]);
    }
    Some(diam)
}

/// Mutable aggregation state over one matrix graph.
///
/// The "current" aggregate is always the most recently started one; the
/// step and helper methods act on it.
pub struct Aggregator<'a> {
    a: &'a CsrMatrix,
    profile: &'a StrengthProfile,
    params: &'a AggregationParams,
    agg_of: Vec<usize>,
    in_u: Vec<bool>,
    aggregates: Vec<Vec<usize>>,
    seeds: Vec<usize>,
    agg_isolated: Vec<bool>,
    stamp: Vec<u32>,
    epoch: u32,
    // (unaggregated-neighbour count, vertex) for candidates in U, phase one only
    queue: Option<BTreeSet<(usize, usize)>>,
    n_na: Vec<usize>,
}

impl<'a> Aggregator<'a> {
    /// Starts with `U` = all non-isolated, non-Dirichlet vertices.
    pub fn new(a: &'a CsrMatrix, profile: &'a StrengthProfile, params: &'a AggregationParams) -> Self {
        let n = a.n();
        let in_u: Vec<bool> = (0..n)
            .map(|v| !profile.is_isolated(v) && !profile.is_dirichlet(v))
            .collect();
        let n_na: Vec<usize> = (0..n)
            .map(|v| a.row_cols(v).iter().filter(|&&w| w != v && in_u[w]).count())
            .collect();
        let queue = (0..n).filter(|&v| in_u[v]).map(|v| (n_na[v], v)).collect();
        Aggregator {
            a,
            profile,
            params,
            agg_of: vec![NONE; n],
            in_u,
            aggregates: Vec::new(),
            seeds: Vec::new(),
            agg_isolated: Vec::new(),
            stamp: vec![0; n],
            epoch: 0,
            queue: Some(queue),
            n_na,
        }
    }

    pub fn run(mut self) -> AggregatesMap {
        let mut next = self.global_seed();
        while let Some(v) = next {
            self.start_aggregate(v, false);
            self.grow_aggregate();
            self.round_aggregate();
            let mut last: Vec<usize> = self.current().to_vec();
            if last.len() == 1 {
                self.merge_singleton();
                last = vec![v];
            }
            next = self.neighbour_seed(&last).or_else(|| self.global_seed());
        }

        self.queue = None;
        let n = self.a.n();
        for v in 0..n {
            if self.profile.is_isolated(v) && !self.profile.is_dirichlet(v) {
                self.in_u[v] = true;
            }
        }
        for v in 0..n {
            if self.in_u[v] {
                self.start_aggregate(v, true);
                self.grow_iso_aggregate();
            }
        }
        self.finish()
    }

    fn finish(self) -> AggregatesMap {
        AggregatesMap {
            agg_of: self
                .agg_of
                .iter()
                .map(|&a| if a == NONE { None } else { Some(a) })
                .collect(),
            aggregates: self.aggregates,
            seed_of: self.seeds,
            isolated: self.agg_isolated,
        }
    }

    /// Unaggregated candidate with the fewest unaggregated neighbours.
    fn global_seed(&self) -> Option<usize> {
        self.queue.as_ref()?.first().map(|&(_, v)| v)
    }

    /// Unaggregated neighbour of `set` with the fewest unaggregated
    /// neighbours, smallest id first.
    fn neighbour_seed(&self, set: &[usize]) -> Option<usize> {
        set.iter()
            .flat_map(|&x| self.a.row_cols(x).iter().copied())
            .filter(|&w| self.in_u[w])
            .min_by_key(|&w| (self.n_na[w], w))
    }

    pub fn current(&self) -> &[usize] {
        self.aggregates.last().map_or(&[], |a| a.as_slice())
    }

    fn current_id(&self) -> usize {
        self.aggregates.len() - 1
    }

    pub fn is_unaggregated(&self, v: usize) -> bool {
        self.in_u[v]
    }

    /// Removes `v` from `U`, updating the seed queue.
    fn take(&mut self, v: usize) {
        debug_assert!(self.in_u[v]);
        self.in_u[v] = false;
        if let Some(q) = self.queue.as_mut() {
            q.remove(&(self.n_na[v], v));
            for &w in self.a.row_cols(v) {
                if w != v && self.in_u[w] {
                    q.remove(&(self.n_na[w], w));
                    self.n_na[w] -= 1;
                    q.insert((self.n_na[w], w));
                }
            }
        }
    }

    /// Opens a new aggregate with seed `v`.
    pub fn start_aggregate(&mut self, v: usize, isolated: bool) {
        let id = self.aggregates.len();
        self.aggregates.push(vec![v]);
        self.seeds.push(v);
        self.agg_isolated.push(isolated);
        self.agg_of[v] = id;
        self.take(v);
    }

    /// Adds `v` (which must be in `U`) to the current aggregate.
    pub fn add_to_current(&mut self, v: usize) {
        let id = self.current_id();
        self.aggregates[id].push(v);
        self.agg_of[v] = id;
        self.take(v);
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Vertices of `U` adjacent to the current aggregate, ascending. Also
    /// stamps every neighbour of the aggregate with the returned epoch.
    fn frontier(&mut self) -> (Vec<usize>, u32) {
        let e = self.next_epoch();
        let cur = self.current_id();
        let mut out = Vec::new();
        for &x in &self.aggregates[cur] {
            for &w in self.a.row_cols(x) {
                if self.agg_of[w] != cur && self.stamp[w] != e {
                    self.stamp[w] = e;
                    if self.in_u[w] {
                        out.push(w);
                    }
                }
            }
        }
        out.sort_unstable();
        (out, e)
    }

    /// Ids of other aggregates touching the current one, ascending.
    fn adjacent_aggregates(&self) -> Vec<usize> {
        let cur = self.current_id();
        let mut ids: Vec<usize> = self.aggregates[cur]
            .iter()
            .flat_map(|&x| self.a.row_cols(x).iter())
            .map(|&w| self.agg_of[w])
            .filter(|&g| g != NONE && g != cur)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn strong_pair(&self, v: usize, p: usize, j: usize) -> (bool, bool) {
        let forward = self.profile.strong[p];
        let backward = self.a.position(j, v).is_some_and(|q| self.profile.strong[q]);
        (forward, backward)
    }

    /// Number of two-way strong connections between `v` and the current aggregate.
    pub fn cons2(&self, v: usize) -> usize {
        let cur = self.current_id();
        self.a
            .row_range(v)
            .filter(|&p| {
                let j = self.a.col_indices()[p];
                j != v && self.agg_of[j] == cur && {
                    let (f, b) = self.strong_pair(v, p, j);
                    f && b
                }
            })
            .count()
    }

    /// Number of one-way strong connections between `v` and the current aggregate.
    pub fn cons1(&self, v: usize) -> usize {
        let cur = self.current_id();
        self.a
            .row_range(v)
            .filter(|&p| {
                let j = self.a.col_indices()[p];
                j != v && self.agg_of[j] == cur && {
                    let (f, b) = self.strong_pair(v, p, j);
                    f != b
                }
            })
            .count()
    }

    /// Weighted count of the neighbours of `v` outside the current aggregate:
    /// neighbours in aggregates already touching it count twice, all others once.
    pub fn connect(&self, v: usize) -> usize {
        self.connect_with(v, &self.adjacent_aggregates())
    }

    fn connect_with(&self, v: usize, adjacent: &[usize]) -> usize {
        let cur = self.current_id();
        self.a
            .row_cols(v)
            .iter()
            .filter(|&&u| u != v && self.agg_of[u] != cur)
            .map(|&u| {
                let g = self.agg_of[u];
                if g != NONE && adjacent.binary_search(&g).is_ok() {
                    2
                } else {
                    1
                }
            })
            .sum()
    }

    /// Unaggregated neighbours of `v` that are not yet adjacent to the current aggregate.
    pub fn neighbors(&mut self, v: usize) -> usize {
        let (_, e) = self.frontier();
        self.neighbors_with(v, e)
    }

    fn neighbors_with(&self, v: usize, e: u32) -> usize {
        self.a
            .row_cols(v)
            .iter()
            .filter(|&&u| u != v && self.in_u[u] && self.stamp[u] != e)
            .count()
    }

    fn degree(&self, v: usize) -> usize {
        self.a.row_cols(v).iter().filter(|&&u| u != v).count()
    }

    /// Diameter of the current aggregate extended by `v`.
    pub fn diameter_with(&self, v: usize) -> Option<usize> {
        let mut verts = self.current().to_vec();
        verts.push(v);
        induced_diameter(self.a, &verts)
    }

    fn admissible(&self, v: usize) -> bool {
        self.diameter_with(v).is_some_and(|d| d <= self.params.d_max)
    }

    /// Grows the current aggregate towards `s_min`.
    pub fn grow_aggregate(&mut self) {
        let limit = self.params.s_min.min(self.params.s_max);
        while self.current().len() < limit {
            let (frontier, e) = self.frontier();
            let adjacent = self.adjacent_aggregates();
            let c0: Vec<usize> = frontier.into_iter().filter(|&v| self.admissible(v)).collect();

            let mut c1 = self.argmax_positive(&c0, |s, v| s.cons2(v));
            if c1.is_empty() {
                c1 = self.argmax_positive(&c0, |s, v| s.cons1(v));
            }
            if c1.len() > 1 {
                // maximise connect(v)/|N(v)| by exact cross-multiplication
                let ratios: Vec<(usize, usize)> = c1
                    .iter()
                    .map(|&v| (self.connect_with(v, &adjacent), self.degree(v).max(1)))
                    .collect();
                let best = ratios
                    .iter()
                    .copied()
                    .reduce(|b, r| if r.0 * b.1 > b.0 * r.1 { r } else { b })
                    .unwrap();
                c1 = c1
                    .into_iter()
                    .zip(ratios)
                    .filter(|(_, r)| r.0 * best.1 == best.0 * r.1)
                    .map(|(v, _)| v)
                    .collect();
            }
            if c1.len() > 1 {
                let counts: Vec<usize> = c1.iter().map(|&v| self.neighbors_with(v, e)).collect();
                let best = *counts.iter().max().unwrap();
                c1 = c1
                    .into_iter()
                    .zip(counts)
                    .filter(|&(_, c)| c == best)
                    .map(|(v, _)| v)
                    .collect();
            }
            match c1.first() {
                Some(&c) => self.add_to_current(c),
                None => break,
            }
        }
    }

    fn argmax_positive(&self, cands: &[usize], f: impl Fn(&Self, usize) -> usize) -> Vec<usize> {
        let scores: Vec<usize> = cands.iter().map(|&v| f(self, v)).collect();
        let best = scores.iter().copied().max().unwrap_or(0);
        if best == 0 {
            return Vec::new();
        }
        cands
            .iter()
            .zip(scores)
            .filter(|&(_, s)| s == best)
            .map(|(&v, _)| v)
            .collect()
    }

    /// Adds strongly connected frontier vertices with more neighbours inside
    /// the aggregate than in `U`, until none is left or `s_max` is reached.
    pub fn round_aggregate(&mut self) {
        let cur = self.current_id();
        while self.current().len() < self.params.s_max {
            let (frontier, _) = self.frontier();
            let pick = frontier.into_iter().find(|&v| {
                if self.cons2(v) == 0 && self.cons1(v) == 0 {
                    return false;
                }
                let (inside, free) = self.a.row_cols(v).iter().filter(|&&u| u != v).fold(
                    (0usize, 0usize),
                    |(i, f), &u| {
                        (
                            i + usize::from(self.agg_of[u] == cur),
                            f + usize::from(self.in_u[u]),
                        )
                    },
                );
                inside > free && self.admissible(v)
            });
            match pick {
                Some(v) => self.add_to_current(v),
                None => break,
            }
        }
    }

    /// Moves the singleton current aggregate into the smallest-id aggregate
    /// that its seed is strongly connected to, if one can take it without
    /// exceeding `s_max` or `d_max`.
    fn merge_singleton(&mut self) -> bool {
        let cur = self.current_id();
        let v = self.aggregates[cur][0];
        let mut targets: Vec<usize> = self
            .a
            .row_range(v)
            .filter(|&p| self.profile.strong[p])
            .map(|p| self.agg_of[self.a.col_indices()[p]])
            .filter(|&g| g != NONE && g != cur && !self.agg_isolated[g])
            .collect();
        targets.sort_unstable();
        targets.dedup();
        let target = targets.into_iter().find(|&g| {
            let members = &self.aggregates[g];
            if members.len() >= self.params.s_max {
                return false;
            }
            let mut verts = members.clone();
            verts.push(v);
            induced_diameter(self.a, &verts).is_some_and(|d| d <= self.params.d_max)
        });
        match target {
            Some(g) => {
                self.aggregates.pop();
                self.seeds.pop();
                self.agg_isolated.pop();
                self.aggregates[g].push(v);
                self.agg_of[v] = g;
                true
            }
            None => false,
        }
    }

    /// Non-isolated aggregates adjacent to `v`, ascending.
    fn regular_aggregates_around(&self, v: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .a
            .row_cols(v)
            .iter()
            .map(|&w| self.agg_of[w])
            .filter(|&g| g != NONE && !self.agg_isolated[g])
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Grows an aggregate of isolated vertices breadth-first, preferring
    /// candidates that share a neighbouring non-isolated aggregate with it.
    pub fn grow_iso_aggregate(&mut self) {
        while self.current().len() < self.params.s_min {
            let (frontier, _) = self.frontier();
            if frontier.is_empty() {
                break;
            }
            let mut around: Vec<usize> = self
                .current()
                .iter()
                .flat_map(|&x| self.regular_aggregates_around(x))
                .collect();
            around.sort_unstable();
            around.dedup();
            let preferred = frontier.iter().copied().find(|&c| {
                self.regular_aggregates_around(c)
                    .iter()
                    .any(|g| around.binary_search(g).is_ok())
            });
            self.add_to_current(preferred.unwrap_or(frontier[0]));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;
    use crate::strength::classify;

    fn graph(n: usize, edges: &[(usize, usize)], w: f64) -> CsrMatrix {
        let mut b = TripletBuilder::new(n);
        let mut deg = vec![0.0; n];
        for &(i, j) in edges {
            b.push(i, j, -w);
            b.push(j, i, -w);
            deg[i] += w;
            deg[j] += w;
        }
        for (i, d) in deg.iter().enumerate() {
            b.push(i, i, d + 1.0);
        }
        b.build().unwrap()
    }

    fn path(n: usize) -> CsrMatrix {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        graph(n, &edges, 1.0)
    }

    fn grid2d(nx: usize, ny: usize) -> CsrMatrix {
        let mut edges = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * y;
                if x + 1 < nx {
                    edges.push((i, i + 1));
                }
                if y + 1 < ny {
                    edges.push((i, i + nx));
                }
            }
        }
        graph(nx * ny, &edges, 1.0)
    }

    fn params(s_min: usize, s_max: usize, d_max: usize) -> AggregationParams {
        AggregationParams {
            s_min,
            s_max,
            d_max,
            ..Default::default()
        }
    }

    #[test]
    fn single_vertex_without_couplings_is_dirichlet() {
        let a = CsrMatrix::identity(1);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let m = aggregate(&a, &p, &AggregationParams::default());
        assert_eq!(m.n_coarse(), 0);
        assert_eq!(m.agg_of, vec![None]);
    }

    #[test]
    fn single_isolated_vertex_gives_singleton() {
        // two vertices coupled only by a positive entry: both isolated, not Dirichlet
        let a = CsrMatrix::from_dense(&[vec![2.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let m = aggregate(&a, &p, &params(1, 1, 1));
        assert_eq!(m.aggregates, vec![vec![0], vec![1]]);
        assert_eq!(m.isolated, vec![true, true]);
    }

    #[test]
    fn path_of_nine_in_triples() {
        let a = path(9);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let m = aggregate(&a, &p, &params(3, 3, 2));
        assert_eq!(m.aggregates, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]]);
        assert_eq!(m.seed_of, vec![0, 3, 6]);
    }

    #[test]
    fn grow_from_path_end_stops_at_diameter() {
        let a = path(6);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = params(3, 6, 2);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(0, false);
        ag.grow_aggregate();
        assert_eq!(ag.current(), &[0, 1, 2]);
        let prm = params(5, 6, 2);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(0, false);
        ag.grow_aggregate();
        assert_eq!(ag.current(), &[0, 1, 2]);
    }

    #[test]
    fn grow_without_strong_neighbours() {
        // vertex 0 only couples through a positive entry
        let a = CsrMatrix::from_dense(&[
            vec![2.0, 0.5, 0.0],
            vec![0.5, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let mut p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        p.vertex_class[0] = crate::strength::VertexClass::Regular;
        let prm = params(4, 6, 2);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(0, false);
        ag.grow_aggregate();
        assert_eq!(ag.current(), &[0]);
    }

    #[test]
    fn grow_on_grid_respects_diameter() {
        let a = grid2d(7, 7);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = params(4, 6, 2);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(24, false);
        ag.grow_aggregate();
        assert_eq!(ag.current().len(), 4);
        assert!(induced_diameter(&a, ag.current()).unwrap() <= 2);
    }

    #[test]
    fn round_predicate() {
        // a = {0,1,2}; 3 touches 0,1,2 and 4; 4 touches 3,5,6,7
        let edges = [(0, 1), (1, 2), (0, 3), (1, 3), (2, 3), (3, 4), (4, 5), (4, 6), (4, 7)];
        let a = graph(8, &edges, 1.0);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = params(1, 8, 3);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(1, false);
        ag.add_to_current(0);
        ag.add_to_current(2);
        ag.round_aggregate();
        assert_eq!(ag.current(), &[1, 0, 2, 3]);
        assert!(ag.is_unaggregated(4));
    }

    #[test]
    fn round_is_noop_at_s_max() {
        let a = grid2d(4, 4);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = params(2, 2, 2);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(5, false);
        ag.add_to_current(6);
        ag.round_aggregate();
        assert_eq!(ag.current(), &[5, 6]);
    }

    #[test]
    fn helper_counts() {
        let a = grid2d(3, 3);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = AggregationParams::default();
        let mut ag = Aggregator::new(&a, &p, &prm);
        // a = {1, 3}; vertex 4 is the centre, adjacent to both
        ag.start_aggregate(1, false);
        ag.add_to_current(3);
        assert_eq!(ag.cons2(4), 2);
        assert_eq!(ag.cons1(4), 0);
        assert_eq!(ag.cons2(0), 2);
        // neighbours of 4 outside a: 5, 7 (both unaggregated)
        assert_eq!(ag.connect(4), 2);
        // 5 and 7 are not adjacent to a
        assert_eq!(ag.neighbors(4), 2);
        assert_eq!(ag.neighbors(0), 0);
        assert_eq!(ag.diameter_with(4), Some(2));
        assert_eq!(ag.diameter_with(0), Some(2));
    }

    #[test]
    fn connect_doubles_adjacent_aggregates() {
        let a = path(5);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = AggregationParams::default();
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(4, false); // aggregate 0 = {4}
        ag.start_aggregate(1, false); // current = {1}
        ag.add_to_current(2);
        // 3 neighbours: 2 (in a, ignored) and 4 (in aggregate 0, adjacent to a? no)
        assert_eq!(ag.connect(3), 1);
        ag.add_to_current(3);
        ag.start_aggregate(0, false); // current = {0}, touches aggregate 1
        // vertex 1 is aggregated already; connect counts from the viewpoint of any vertex
        assert_eq!(ag.connect_with(1, &ag.adjacent_aggregates()), 2 + 0);
    }

    #[test]
    fn path_diameter() {
        let a = path(4);
        assert_eq!(induced_diameter(&a, &[0, 1, 2]), Some(2));
        assert_eq!(induced_diameter(&a, &[0, 2]), None);
        assert_eq!(induced_diameter(&a, &[3]), Some(0));
    }

    #[test]
    fn symmetric_matrix_has_no_one_way_connections() {
        let a = grid2d(5, 4);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = AggregationParams::default();
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(7, false);
        ag.grow_aggregate();
        assert!((0..20).all(|v| ag.cons1(v) == 0));
    }

    fn isolated_profile(a: &CsrMatrix, iso: &[usize]) -> StrengthProfile {
        let mut p = classify(a, 1.0 / 3.0, 1e-5).unwrap();
        for &v in iso {
            p.vertex_class[v] = crate::strength::VertexClass::Isolated;
        }
        p
    }

    #[test]
    fn chain_of_isolated_vertices() {
        let a = path(4);
        let p = isolated_profile(&a, &[0, 1, 2, 3]);
        let m = aggregate(&a, &p, &params(4, 6, 2));
        assert_eq!(m.aggregates, vec![vec![0, 1, 2, 3]]);
        assert_eq!(m.isolated, vec![true]);
    }

    #[test]
    fn separated_isolated_clusters() {
        let a = path(10);
        let p = isolated_profile(&a, &[0, 1, 8, 9]);
        let m = aggregate(&a, &p, &params(2, 3, 2));
        m.check_partition(&p).unwrap();
        let iso: Vec<&Vec<usize>> = m
            .aggregates
            .iter()
            .zip(&m.isolated)
            .filter(|(_, i)| **i)
            .map(|(a, _)| a)
            .collect();
        assert_eq!(iso, vec![&vec![0, 1], &vec![8, 9]]);
        for (members, iso) in m.aggregates.iter().zip(&m.isolated) {
            assert!(members.iter().all(|&v| p.is_isolated(v) == *iso));
        }
    }

    #[test]
    fn isolated_growth_prefers_shared_neighbour_aggregate() {
        // regular vertices 0..3 form one aggregate; isolated seed 4 touches 0
        // and isolated 5 (touching 1) and 6 (touching nothing regular)
        let edges = [(0, 1), (1, 2), (0, 4), (4, 6), (4, 5), (5, 1)];
        let a = graph(7, &edges, 1.0);
        let p = isolated_profile(&a, &[4, 5, 6]);
        let m = aggregate(&a, &p, &params(2, 4, 2));
        assert_eq!(m.aggregates[0], vec![0, 1, 2]);
        assert_eq!(m.aggregates[1], vec![4, 5]);
        assert_eq!(m.aggregates[2], vec![6]);
    }

    #[test]
    fn grid_8x8_defaults() {
        let a = grid2d(8, 8);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = AggregationParams::default();
        let m = aggregate(&a, &p, &prm);
        m.check_partition(&p).unwrap();
        for agg in &m.aggregates {
            assert!(!agg.is_empty() && agg.len() <= 6, "{agg:?}");
            assert!(induced_diameter(&a, agg).unwrap() <= 2);
            if agg.len() == 1 {
                // a remaining singleton has no neighbour aggregate that could take it
                let v = agg[0];
                for &w in a.row_cols(v).iter().filter(|&&w| w != v) {
                    let g = m.aggregates[m.agg_of[w].unwrap()].clone();
                    let mut ext = g.clone();
                    ext.push(v);
                    assert!(g.len() >= 6 || induced_diameter(&a, &ext).unwrap() > 2);
                }
            }
        }
        let ratio = m.n_coarse() as f64 / 64.0;
        assert!((1.0 / 6.0..=1.0 / 3.0).contains(&ratio), "ratio {ratio}");
        assert_eq!(m, aggregate(&a, &p, &prm));
    }

    #[test]
    fn merge_singleton_into_strong_neighbour() {
        let a = path(4);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = params(2, 3, 2);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(0, false);
        ag.add_to_current(1);
        ag.start_aggregate(2, false);
        assert!(ag.merge_singleton());
        let m = ag.finish();
        assert_eq!(m.aggregates, vec![vec![0, 1, 2]]);
        assert_eq!(m.seed_of, vec![0]);
    }

    #[test]
    fn singleton_kept_when_neighbour_is_full() {
        let a = path(4);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let prm = params(2, 2, 2);
        let mut ag = Aggregator::new(&a, &p, &prm);
        ag.start_aggregate(0, false);
        ag.add_to_current(1);
        ag.start_aggregate(2, false);
        assert!(!ag.merge_singleton());
        assert_eq!(ag.current(), &[2]);
    }

    #[test]
    fn csv_dump() {
        let m = AggregatesMap::from_assignment(vec![Some(0), None, Some(0), Some(1)]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "vertex,aggregate\n0,0\n1,-1\n2,0\n3,1\n");
        assert!(AggregatesMap::from_assignment(vec![Some(1)]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AggregationParams::default().validate().is_ok());
        assert!(params(0, 3, 2).validate().is_err());
        assert!(params(4, 3, 2).validate().is_err());
        assert!(params(2, 3, 0).validate().is_err());
    }
}
