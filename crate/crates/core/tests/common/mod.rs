//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use aggamg::aggregation::induced_diameter;
use aggamg::{AggregatesMap, AggregationParams, CsrMatrix, StrengthProfile, TripletBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random symmetric M-matrix: negative off-diagonals on a random graph,
/// diagonal equal to the off-diagonal row sum plus a positive shift.
pub fn random_m_matrix(n: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut r = rng(seed);
    let mut t = TripletBuilder::new(n);
    let mut diag = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(density) {
                let w: f64 = r.gen_range(0.01..10.0);
                t.push(i, j, -w);
                t.push(j, i, -w);
                diag[i] += w;
                diag[j] += w;
            }
        }
    }
    for (i, d) in diag.iter().enumerate() {
        t.push(i, i, d + r.gen_range(0.0..1.0));
    }
    t.build().unwrap()
}

/// Random nonsymmetric matrix with a nonzero diagonal and mixed-sign entries.
pub fn random_general(n: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut r = rng(seed);
    let mut t = TripletBuilder::new(n);
    for i in 0..n {
        t.push(i, i, r.gen_range(1.0..5.0));
        for j in 0..n {
            if i != j && r.gen_bool(density) {
                t.push(i, j, r.gen_range(-3.0..3.0));
            }
        }
    }
    t.build().unwrap()
}

/// Random aggregate map over `n` vertices with about `n / 3` aggregates and
/// some vertices left unaggregated.
pub fn random_aggregates(n: usize, seed: u64) -> AggregatesMap {
    let mut r = rng(seed);
    let k = (n / 3).max(1);
    let mut agg_of: Vec<Option<usize>> = (0..n)
        .map(|_| if r.gen_bool(0.1) { None } else { Some(r.gen_range(0..k)) })
        .collect();
    // every id must be used: compress ids
    let mut used: Vec<usize> = agg_of.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    for a in agg_of.iter_mut().flatten() {
        *a = used.binary_search(a).unwrap();
    }
    AggregatesMap::from_assignment(agg_of).unwrap()
}

/// Dense `Pᵀ A P / ω`.
pub fn dense_galerkin(a: &CsrMatrix, agg: &AggregatesMap, omega: f64) -> Vec<Vec<f64>> {
    let d = a.to_dense();
    let nc = agg.n_coarse();
    let n = a.n();
    let mut p = vec![vec![0.0; nc]; n];
    for (i, g) in agg.agg_of.iter().enumerate() {
        if let Some(g) = g {
            p[i][*g] = 1.0;
        }
    }
    let mut ap = vec![vec![0.0; nc]; n];
    for i in 0..n {
        for k in 0..n {
            if d[i][k] != 0.0 {
                for j in 0..nc {
                    ap[i][j] += d[i][k] * p[k][j];
                }
            }
        }
    }
    let mut c = vec![vec![0.0; nc]; nc];
    for i in 0..nc {
        for k in 0..n {
            if p[k][i] != 0.0 {
                for j in 0..nc {
                    c[i][j] += p[k][i] * ap[k][j];
                }
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= omega;
        }
    }
    c
}

/// 2D five-point stencil with horizontal coupling `-eps`, vertical `-1`
/// and diagonal `2 + 2 eps`.
pub fn anisotropic_2d(m: usize, eps: f64) -> CsrMatrix {
    let mut t = TripletBuilder::new(m * m);
    for y in 0..m {
        for x in 0..m {
            let i = x + m * y;
            t.push(i, i, 2.0 + 2.0 * eps);
            if x + 1 < m {
                t.push(i, i + 1, -eps);
                t.push(i + 1, i, -eps);
            }
            if y + 1 < m {
                t.push(i, i + m, -1.0);
                t.push(i + m, i, -1.0);
            }
        }
    }
    t.build().unwrap()
}

pub fn laplace_1d(n: usize) -> CsrMatrix {
    let mut t = TripletBuilder::new(n);
    for i in 0..n {
        t.push(i, i, 2.0);
        if i + 1 < n {
            t.push(i, i + 1, -1.0);
            t.push(i + 1, i, -1.0);
        }
    }
    t.build().unwrap()
}

/// Largest entrywise difference relative to the largest entry of `want`.
pub fn dense_rel_diff(got: &[Vec<f64>], want: &[Vec<f64>]) -> f64 {
    let scale = want.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter()
        .flatten()
        .zip(want.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Largest entrywise difference between two matrices with equal patterns,
/// relative to the largest entry of `want`.
pub fn csr_rel_diff(got: &CsrMatrix, want: &CsrMatrix) -> f64 {
    assert_eq!(got.n(), want.n(), "dimension");
    assert_eq!(got.row_offsets(), want.row_offsets(), "row pattern");
    assert_eq!(got.col_indices(), want.col_indices(), "column pattern");
    let scale = want.max_abs().max(f64::MIN_POSITIVE);
    got.values()
        .iter()
        .zip(want.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale
}

/// Violations of the aggregate invariants: partition, size bound, diameter
/// bound for regular aggregates, and no mixing of isolated and regular
/// vertices.
pub fn aggregate_violations(
    a: &CsrMatrix,
    profile: &StrengthProfile,
    params: &AggregationParams,
    agg: &AggregatesMap,
) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = agg.check_partition(profile) {
        out.push(format!("partition: {e}"));
    }
    for (k, members) in agg.aggregates.iter().enumerate() {
        if members.len() > params.s_max {
            out.push(format!("aggregate {k} has {} > s_max members", members.len()));
        }
        let iso = members.iter().filter(|&&v| profile.is_isolated(v)).count();
        if iso != 0 && iso != members.len() {
            out.push(format!("aggregate {k} mixes isolated and regular vertices"));
        }
        if iso == 0 {
            match induced_diameter(a, members) {
                Some(d) if d <= params.d_max => {}
                d => out.push(format!("aggregate {k} has diameter {d:?}")),
            }
        }
    }
    out
}
