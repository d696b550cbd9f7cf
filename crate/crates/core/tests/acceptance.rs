//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

#[path = "common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use aggamg::experiment::{run_experiment, SolverConfig};
use aggamg::hierarchy::{build_hierarchy, galerkin_product, HierarchyParams};
use aggamg::parallel::{
    assemble_aggregates, assemble_global, build_parallel_hierarchy, build_rank_states, gather, hybrid_smoother_step,
    parallel_bicgstab, parallel_spmv, partition_fine, rank_grid, scatter, DistVector, ForcedAgglomeration,
    ParallelHierarchyParams, VirtualComm,
};
use aggamg::problems::{generate, ProblemKind, ProblemSpec};
use aggamg::solvers::{bicgstab, smooth, SmootherKind, SmootherSpec, VcyclePreconditioner};
use aggamg::{aggregate, classify, CsrMatrix};
use rand::Rng;

use common::{
    aggregate_violations, anisotropic_2d, csr_rel_diff, dense_galerkin, dense_rel_diff, random_aggregates,
    random_general, random_m_matrix, rel_diff, rng,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn matrix(kind: ProblemKind, cells: usize) -> CsrMatrix {
    generate(&ProblemSpec::new(kind, cells).unwrap()).unwrap().matrix
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

fn sequential_solve(kind: ProblemKind, cells: usize) -> (usize, usize, bool) {
    let out = run_experiment(&ProblemSpec::new(kind, cells).unwrap(), &SolverConfig::default(), 1).unwrap();
    (out.report.iterations, out.report.levels, out.report.converged)
}

fn laplace_80() -> Outcome {
    let (it, lev, conv) = sequential_solve(ProblemKind::Laplace3D, 80);
    ensure(
        conv && (4..=12).contains(&it) && (3..=7).contains(&lev),
        format!("iterations {it} in [4,12], levels {lev} in [3,7], converged {conv}"),
    )
}

fn hetero_80() -> Outcome {
    let (it, _, conv) = sequential_solve(ProblemKind::HeteroCube3D, 80);
    ensure(conv && (5..=14).contains(&it), format!("iterations {it} in [5,14], converged {conv}"))
}

fn weak_scaling() -> Outcome {
    let c = SolverConfig::default();
    let one = run_experiment(&ProblemSpec::new(ProblemKind::Laplace3D, 32).unwrap(), &c, 1).unwrap().report;
    let eight = run_experiment(&ProblemSpec::new(ProblemKind::Laplace3D, 64).unwrap(), &c, 8).unwrap().report;
    ensure(
        one.converged && eight.converged && eight.iterations <= 2 * one.iterations,
        format!("1 rank 32^3: {} iterations, 8 ranks 64^3: {} iterations", one.iterations, eight.iterations),
    )
}

fn spmv_oracle() -> Outcome {
    let a = matrix(ProblemKind::Laplace3D, 16);
    let x = random_vec(a.n(), 4);
    let want = a.spmv(&x).unwrap();
    let mut worst = 0.0f64;
    let mut exchanges = Vec::new();
    for p in [1, 2, 4, 8] {
        let states = build_rank_states(&a, &partition_fine(16, rank_grid(p)).unwrap()).unwrap();
        let mut comm = VirtualComm::new(p);
        let mut y = DistVector::zeros(&states);
        parallel_spmv(&mut comm, 0, &states, &scatter(&states, &x), &mut y).unwrap();
        worst = worst.max(rel_diff(&gather(&states, &y, a.n()).unwrap(), &want));
        exchanges.push(comm.stats().total_exchanges());
    }
    ensure(
        worst <= 1e-13 && exchanges.iter().all(|&e| e == 1),
        format!("max relative difference {worst:.2e}, exchanges per rank count {exchanges:?}"),
    )
}

fn galerkin_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..200u64 {
        let mut r = rng(k);
        let n = r.gen_range(1..=50);
        let omega = r.gen_range(0.5..2.0);
        let a = if k % 2 == 0 { random_m_matrix(n, 0.2, k) } else { random_general(n, 0.2, k) };
        let agg = random_aggregates(n, k ^ 0x5eed);
        let c = galerkin_product(&a, &agg, omega);
        worst = worst.max(dense_rel_diff(&c.to_dense(), &dense_galerkin(&a, &agg, omega)));
    }
    ensure(worst <= 1e-12, format!("200 instances, max relative difference {worst:.2e}"))
}

fn aggregation_suite() -> Outcome {
    let params = HierarchyParams::default();
    let p = &params.aggregation;
    let cases = [
        ("laplace 16^3", matrix(ProblemKind::Laplace3D, 16)),
        ("anisotropic 64^2", anisotropic_2d(64, 0.01)),
        ("hetero 40^3", matrix(ProblemKind::HeteroCube3D, 40)),
    ];
    let mut summary = Vec::new();
    for (name, a) in &cases {
        let h = build_hierarchy(a, &params).unwrap();
        for (l, level) in h.levels.iter().enumerate() {
            let profile = classify(&level.a, p.delta, p.beta).unwrap();
            let first = aggregate(&level.a, &profile, p);
            if first != aggregate(&level.a, &profile, p) {
                return Err(format!("{name} level {l}: aggregation not deterministic"));
            }
            let v = aggregate_violations(&level.a, &profile, p, &first);
            if !v.is_empty() {
                return Err(format!("{name} level {l}: {v:?}"));
            }
        }
        summary.push(format!("{name} {} levels", h.n_levels()));
    }
    Ok(summary.join(", "))
}

fn strength_properties() -> Outcome {
    for k in 0..100u64 {
        let n = 2 + (k as usize % 38);
        let a = random_m_matrix(n, 0.3, k);
        let p = classify(&a, 1.0 / 3.0, 1e-5).unwrap();
        let q = classify(&a.scaled(5.0), 1.0 / 3.0, 1e-5).unwrap();
        if p.strong != q.strong || p.vertex_class != q.vertex_class {
            return Err(format!("instance {k}: not invariant under A -> 5A"));
        }
        let hi = classify(&a, 0.6, 1e-5).unwrap();
        for i in 0..n {
            for &j in a.row_cols(i) {
                if p.is_strong(&a, i, j) != p.is_strong(&a, j, i) {
                    return Err(format!("instance {k}: edge ({i},{j}) not symmetric"));
                }
                if hi.is_strong(&a, i, j) && !p.is_strong(&a, i, j) {
                    return Err(format!("instance {k}: edge ({i},{j}) strong at 0.6 but not at 1/3"));
                }
            }
        }
    }
    Ok("100 instances: symmetric, scale invariant, monotone in delta".into())
}

fn mms_convergence() -> Outcome {
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&c| {
            let out =
                run_experiment(&ProblemSpec::new(ProblemKind::PoissonMms3D, c).unwrap(), &SolverConfig::default(), 1)
                    .unwrap();
            out.report.max_error.unwrap()
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    ensure(
        ratios.iter().all(|&r| r >= 3.0),
        format!(
            "max errors {:.3e} {:.3e} {:.3e}, ratios {:.2} {:.2}",
            errors[0], errors[1], errors[2], ratios[0], ratios[1]
        ),
    )
}

fn agglomeration_oracle() -> Outcome {
    let problem = generate(&ProblemSpec::new(ProblemKind::Laplace3D, 24).unwrap()).unwrap();
    let a = &problem.matrix;
    let mut params = ParallelHierarchyParams::default();
    params.agglomeration.forced = Some(ForcedAgglomeration { level: 2, ranks: 1 });
    let mut comm = VirtualComm::new(8);
    let h = build_parallel_hierarchy(&mut comm, a, &partition_fine(24, rank_grid(8)).unwrap(), &params).unwrap();
    if h.n_levels() < 3 || h.stats.levels[2].agglomerated_to != Some(1) {
        return Err(format!("level 2 not agglomerated onto one rank ({} levels)", h.n_levels()));
    }
    let mut oracle = a.clone();
    for l in 0..2 {
        oracle = galerkin_product(&oracle, &assemble_aggregates(&h, l).unwrap(), h.omega);
    }
    let gathered = &h.levels[2].agglomeration.as_ref().unwrap().gathered;
    let (_, got) = assemble_global(gathered).unwrap();
    let matrix_diff = csr_rel_diff(&got, &oracle);

    let b = scatter(h.fine_states(), &problem.rhs);
    let (x, rep) = parallel_bicgstab(&h, &mut comm, &b, SmootherSpec::default(), 1e-8, 200).unwrap();
    let x = gather(h.fine_states(), &x, a.n()).unwrap();
    let seq = build_hierarchy(a, &params.hierarchy).unwrap();
    let mut pre = VcyclePreconditioner::new(&seq, SmootherSpec::default()).unwrap();
    let (xs, srep) = bicgstab(a, &mut pre, &problem.rhs, 1e-8, 200).unwrap();
    let solution_diff = rel_diff(&x, &xs);
    ensure(
        rep.converged && srep.converged && matrix_diff <= 1e-13 && solution_diff <= 1e-6,
        format!("level 2 matrix difference {matrix_diff:.2e}, solution difference {solution_diff:.2e}"),
    )
}

fn hybrid_degeneracies() -> Outcome {
    let a = matrix(ProblemKind::Laplace3D, 16);
    let b = random_vec(a.n(), 10);
    let x0 = random_vec(a.n(), 11);
    let run = |kind, p: usize| {
        let spec = SmootherSpec { kind, steps: 1 };
        let mut want = x0.clone();
        smooth(&a, &mut want, &b, &spec, &mut vec![0.0; a.n()]).unwrap();
        let states = build_rank_states(&a, &partition_fine(16, rank_grid(p)).unwrap()).unwrap();
        let mut comm = VirtualComm::new(p);
        let mut x = scatter(&states, &x0);
        let mut scratch = DistVector::zeros(&states);
        hybrid_smoother_step(&mut comm, 0, &states, &mut x, &scatter(&states, &b), &spec, &mut scratch).unwrap();
        (gather(&states, &x, a.n()).unwrap(), want)
    };
    let (sgs, sgs_want) = run(SmootherKind::SymmetricGaussSeidel, 1);
    let bitwise = sgs.iter().zip(&sgs_want).all(|(u, v)| u.to_bits() == v.to_bits());
    let (jac, jac_want) = run(SmootherKind::Jacobi, 8);
    let jacobi_diff = rel_diff(&jac, &jac_want);
    ensure(
        bitwise && jacobi_diff <= 1e-14,
        format!("P=1 SGS bitwise {bitwise}, P=8 Jacobi difference {jacobi_diff:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("laplace 80^3 iterations and levels", laplace_80),
        ("hetero 80^3 iterations", hetero_80),
        ("weak scaling 1 -> 8 ranks", weak_scaling),
        ("parallel spmv oracle", spmv_oracle),
        ("galerkin oracle", galerkin_oracle),
        ("aggregation invariants", aggregation_suite),
        ("strength properties", strength_properties),
        ("mms convergence order", mms_convergence),
        ("agglomeration oracle", agglomeration_oracle),
        ("hybrid smoother degeneracies", hybrid_degeneracies),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2}: {name}: {detail} ({secs:.1}s)", k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
