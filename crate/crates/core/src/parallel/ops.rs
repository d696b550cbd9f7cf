//! Distributed vectors and the operations that touch more than one rank.

use crate::error::{AmgError, Result};
use crate::parallel::comm::{ExchangeKind, Payload, VirtualComm};
use crate::parallel::index::RankState;
use crate::solvers::SmootherSpec;
use crate::sparse::CsrMatrix;

/// One local vector per rank, laid out like that rank's index set.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector(pub Vec<Vec<f64>>);

impl DistVector {
    pub fn zeros(states: &[RankState]) -> Self {
        DistVector(states.iter().map(|s| vec![0.0; s.n_local()]).collect())
    }

    pub fn rank(&self, r: usize) -> &[f64] {
        &self.0[r]
    }

    pub fn rank_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.0[r]
    }

    pub fn fill(&mut self, v: f64) {
        self.0.iter_mut().flatten().for_each(|x| *x = v);
    }

    pub fn axpy(&mut self, alpha: f64, x: &DistVector) {
        for (y, x) in self.0.iter_mut().zip(&x.0) {
            crate::sparse::axpy(alpha, x, y);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.iter_mut().flatten().for_each(|x| *x *= alpha);
    }

    /// Zeroes copy entries, turning consistent storage into unique storage.
    pub fn zero_copies(&mut self, states: &[RankState]) {
        for (v, s) in self.0.iter_mut().zip(states) {
            v[s.n_owned()..].iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

fn check_shape(states: &[RankState], x: &DistVector) -> Result<()> {
    if x.0.len() != states.len() {
        return Err(AmgError::DimensionMismatch {
            expected: states.len(),
            actual: x.0.len(),
        });
    }
    for (s, v) in states.iter().zip(&x.0) {
        if v.len() != s.n_local() {
            return Err(AmgError::DimensionMismatch {
                expected: s.n_local(),
                actual: v.len(),
            });
        }
    }
    Ok(())
}

/// Consistent distribution of a global vector indexed by label.
pub fn scatter(states: &[RankState], global: &[f64]) -> DistVector {
    DistVector(
        states
            .iter()
            .map(|s| s.idx.global_ids().iter().map(|&g| global[g]).collect())
            .collect(),
    )
}

/// Assembles owner entries into a global vector of length `n`, indexed by label.
pub fn gather(states: &[RankState], x: &DistVector, n: usize) -> Result<Vec<f64>> {
    check_shape(states, x)?;
    let mut out = vec![0.0; n];
    for (s, v) in states.iter().zip(&x.0) {
        for (&g, &val) in s.idx.owners().iter().zip(v) {
            out[g] = val;
        }
    }
    Ok(out)
}

/// Copies each owner value into every copy of it.
pub fn make_consistent(comm: &mut VirtualComm, level: usize, states: &[RankState], x: &mut DistVector) -> Result<()> {
    check_shape(states, x)?;
    comm.begin(level, ExchangeKind::MakeConsistent)?;
    for s in states {
        let v = &x.0[s.rank];
        for link in &s.links {
            if !link.recv.is_empty() || !link.send.is_empty() {
                comm.send(s.rank, link.rank, Payload::Reals(link.send.iter().map(|&l| v[l]).collect()))?;
            }
        }
    }
    for s in states {
        for link in &s.links {
            if !link.recv.is_empty() || !link.send.is_empty() {
                let vals = comm.recv(link.rank, s.rank)?.into_reals()?;
                if vals.len() != link.recv.len() {
                    return Err(AmgError::Communication(format!(
                        "rank {} expected {} values from rank {}, got {}",
                        s.rank,
                        link.recv.len(),
                        link.rank,
                        vals.len()
                    )));
                }
                let v = &mut x.0[s.rank];
                for (&l, val) in link.recv.iter().zip(vals) {
                    v[l] = val;
                }
            }
        }
    }
    comm.end()
}

/// Sums every rank's contribution for a label into its owner (ascending
/// source rank), then refreshes the copies. Takes two exchanges.
pub fn add_reduce(comm: &mut VirtualComm, level: usize, states: &[RankState], x: &mut DistVector) -> Result<()> {
    check_shape(states, x)?;
    comm.begin(level, ExchangeKind::AddReduce)?;
    for s in states {
        let v = &x.0[s.rank];
        for link in &s.links {
            if !link.recv.is_empty() || !link.send.is_empty() {
                comm.send(s.rank, link.rank, Payload::Reals(link.recv.iter().map(|&l| v[l]).collect()))?;
            }
        }
    }
    for s in states {
        for link in &s.links {
            if !link.recv.is_empty() || !link.send.is_empty() {
                let vals = comm.recv(link.rank, s.rank)?.into_reals()?;
                if vals.len() != link.send.len() {
                    return Err(AmgError::Communication(format!(
                        "rank {} expected {} contributions from rank {}, got {}",
                        s.rank,
                        link.send.len(),
                        link.rank,
                        vals.len()
                    )));
                }
                let v = &mut x.0[s.rank];
                for (&l, val) in link.send.iter().zip(vals) {
                    v[l] += val;
                }
            }
        }
    }
    comm.end()?;
    make_consistent(comm, level, states, x)
}

/// `y = A x` for consistent `x`; the result is consistent.
pub fn parallel_spmv(
    comm: &mut VirtualComm,
    level: usize,
    states: &[RankState],
    x: &DistVector,
    y: &mut DistVector,
) -> Result<()> {
    check_shape(states, x)?;
    check_shape(states, y)?;
    for s in states {
        s.a_loc.spmv_into(&x.0[s.rank], &mut y.0[s.rank])?;
    }
    make_consistent(comm, level, states, y)
}

/// `b − A x` on owner rows, copies set to zero (unique storage).
pub fn owner_residual(states: &[RankState], x: &DistVector, b: &DistVector, r: &mut DistVector) -> Result<()> {
    for s in states {
        let (a, xs, bs, rs) = (&s.a_loc, &x.0[s.rank], &b.0[s.rank], &mut r.0[s.rank]);
        let n = s.n_owned();
        for i in 0..n {
            let mut acc = 0.0;
            for (j, v) in a.row(i) {
                acc += v * xs[j];
            }
            rs[i] = bs[i] - acc;
        }
        rs[n..].iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(())
}

/// Sum over ranks of owner-entry partial dot products.
pub fn parallel_dot(comm: &mut VirtualComm, level: usize, states: &[RankState], x: &DistVector, y: &DistVector) -> f64 {
    let partials: Vec<(usize, f64)> = states
        .iter()
        .filter(|s| s.is_active())
        .map(|s| {
            let n = s.n_owned();
            (s.rank, crate::sparse::dot(&x.0[s.rank][..n], &y.0[s.rank][..n]))
        })
        .collect();
    comm.allreduce_sum(level, &partials)
}

/// Checks that every copy entry equals its owner's value.
pub fn check_consistent(states: &[RankState], x: &DistVector) -> Result<()> {
    for s in states {
        for link in &s.links {
            let other = &states[link.rank];
            let back = other.links.iter().find(|l| l.rank == s.rank).unwrap();
            for (&mine, &theirs) in link.send.iter().zip(&back.recv) {
                if x.0[s.rank][mine].to_bits() != x.0[link.rank][theirs].to_bits() {
                    return Err(AmgError::Communication(format!(
                        "copy of label {} on rank {} differs from its owner",
                        s.idx.global_ids()[mine],
                        link.rank
                    )));
                }
            }
        }
    }
    Ok(())
}

/// One application of the hybrid smoother: every rank relaxes its owner
/// rows `spec.steps` times with copy values frozen, then the copies are
/// refreshed in a single exchange. `x` must be consistent on entry.
pub fn hybrid_smoother_step(
    comm: &mut VirtualComm,
    level: usize,
    states: &[RankState],
    x: &mut DistVector,
    b: &DistVector,
    spec: &SmootherSpec,
    scratch: &mut DistVector,
) -> Result<()> {
    check_shape(states, x)?;
    for s in states {
        let n = s.n_owned();
        let a: &CsrMatrix = &s.a_loc;
        let xs = &mut x.0[s.rank];
        let bs = &b.0[s.rank];
        let ws = &mut scratch.0[s.rank];
        crate::solvers::smooth_rows(a, xs, bs, spec, ws, n).map_err(|e| match e {
            AmgError::ZeroDiagonal { row } => AmgError::ZeroDiagonal {
                row: s.idx.global_ids()[row],
            },
            other => other,
        })?;
    }
    make_consistent(comm, level, states, x)
}
