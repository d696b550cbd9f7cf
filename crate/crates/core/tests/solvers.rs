mod common;

use aggamg::hierarchy::{build_hierarchy, HierarchyParams};
use aggamg::problems::{generate, ProblemKind, ProblemSpec};
use aggamg::solvers::{bicgstab, gauss_seidel_step, smooth, vcycle, Direction, SmootherKind, SmootherSpec, VcyclePreconditioner};
use aggamg::sparse::{dot, norm2};
use aggamg::CsrMatrix;
use proptest::prelude::*;
use rand::Rng;

use common::{random_m_matrix, rel_diff, rng};

fn energy(a: &CsrMatrix, e: &[f64]) -> f64 {
    dot(e, &a.spmv(e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn gauss_seidel_energy_is_non_increasing(seed in any::<u64>(), n in 2usize..40, backward in any::<bool>()) {
        let a = random_m_matrix(n, 0.3, seed);
        let mut r = rng(seed ^ 3);
        let x_star: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b = a.spmv(&x_star).unwrap();
        let mut x = vec![0.0; n];
        let dir = if backward { Direction::Backward } else { Direction::Forward };
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            gauss_seidel_step(&a, &mut x, &b, dir).unwrap();
            let e: Vec<f64> = x.iter().zip(&x_star).map(|(u, v)| u - v).collect();
            let en = energy(&a, &e);
            prop_assert!(en <= last * (1.0 + 1e-12) + 1e-300);
            last = en;
        }
    }

    #[test]
    fn symmetric_gauss_seidel_energy_is_non_increasing(seed in any::<u64>(), n in 2usize..40) {
        let a = random_m_matrix(n, 0.3, seed);
        let mut r = rng(seed ^ 5);
        let x_star: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b = a.spmv(&x_star).unwrap();
        let mut x = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let spec = SmootherSpec { kind: SmootherKind::SymmetricGaussSeidel, steps: 1 };
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            smooth(&a, &mut x, &b, &spec, &mut scratch).unwrap();
            let e: Vec<f64> = x.iter().zip(&x_star).map(|(u, v)| u - v).collect();
            let en = energy(&a, &e);
            prop_assert!(en <= last * (1.0 + 1e-12) + 1e-300);
            last = en;
        }
    }
}

#[test]
fn vcycle_is_linear() {
    let a = generate(&ProblemSpec::new(ProblemKind::Laplace3D, 16).unwrap()).unwrap().matrix;
    let h = build_hierarchy(&a, &HierarchyParams { coarse_target: 100, ..Default::default() }).unwrap();
    assert!(h.n_levels() >= 2);
    let spec = SmootherSpec::default();
    let mut r = rng(11);
    let b1: Vec<f64> = (0..a.n()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let b2: Vec<f64> = (0..a.n()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let (al, be) = (0.7, -2.3);
    let combo: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| al * x + be * y).collect();
    let z1 = vcycle(&h, &b1, &spec).unwrap();
    let z2 = vcycle(&h, &b2, &spec).unwrap();
    let zc = vcycle(&h, &combo, &spec).unwrap();
    let want: Vec<f64> = z1.iter().zip(&z2).map(|(x, y)| al * x + be * y).collect();
    assert!(rel_diff(&zc, &want) <= 1e-11);
    assert!(vcycle(&h, &vec![0.0; a.n()], &spec).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn hetero_40_converges() {
    let p = generate(&ProblemSpec::new(ProblemKind::HeteroCube3D, 40).unwrap()).unwrap();
    let h = build_hierarchy(&p.matrix, &HierarchyParams::default()).unwrap();
    let mut pre = VcyclePreconditioner::new(&h, SmootherSpec::default()).unwrap();
    let (x, rep) = bicgstab(&p.matrix, &mut pre, &p.rhs, 1e-8, 200).unwrap();
    assert!(rep.converged);
    let r = p.matrix.residual(&x, &p.rhs).unwrap();
    assert!(norm2(&r) <= 10.0 * 1e-8 * norm2(&p.rhs));
}

#[test]
fn all_smoothers_precondition() {
    let p = generate(&ProblemSpec::new(ProblemKind::Laplace3D, 20).unwrap()).unwrap();
    let h = build_hierarchy(&p.matrix, &HierarchyParams::default()).unwrap();
    for kind in [SmootherKind::GaussSeidelForward, SmootherKind::GaussSeidelBackward, SmootherKind::SymmetricGaussSeidel, SmootherKind::Jacobi] {
        for steps in [1, 2] {
            let mut pre = VcyclePreconditioner::new(&h, SmootherSpec { kind, steps }).unwrap();
            let (_, rep) = bicgstab(&p.matrix, &mut pre, &p.rhs, 1e-8, 200).unwrap();
            assert!(rep.converged, "{kind} x{steps}");
        }
    }
}
