//! One V-cycle of the hierarchy as a fixed linear preconditioner.

use crate::error::Result;
use crate::hierarchy::{prolongate_add, restrict_into, Hierarchy};
use crate::solvers::smoother::{check_diagonal, smooth, SmootherSpec};
use crate::solvers::Preconditioner;
use crate::sparse::check_len;

#[derive(Debug, Clone)]
struct LevelWork {
    x: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
}

/// Per-level vectors reused across V-cycle applications.
#[derive(Debug, Clone)]
pub struct VcycleWorkspace {
    levels: Vec<LevelWork>,
}

impl VcycleWorkspace {
    pub fn new(h: &Hierarchy) -> Self {
        VcycleWorkspace {
            levels: h
                .levels
                .iter()
                .map(|l| {
                    let n = l.a.n();
                    LevelWork {
                        x: vec![0.0; n],
                        b: vec![0.0; n],
                        r: vec![0.0; n],
                    }
                })
                .collect(),
        }
    }
}

/// Applies one V-cycle to `b`, writing the result to `z`.
pub fn vcycle_into(
    h: &Hierarchy,
    b: &[f64],
    z: &mut [f64],
    spec: &SmootherSpec,
    ws: &mut VcycleWorkspace,
) -> Result<()> {
    let n0 = h.levels[0].a.n();
    check_len(n0, b.len())?;
    check_len(n0, z.len())?;
    let last = h.levels.len() - 1;
    ws.levels[0].b.copy_from_slice(b);
    for l in 0..last {
        let level = &h.levels[l];
        let agg = level.agg.as_ref().expect("non-coarsest level has aggregates");
        let (head, tail) = ws.levels.split_at_mut(l + 1);
        let w = &mut head[l];
        w.x.iter_mut().for_each(|v| *v = 0.0);
        smooth(&level.a, &mut w.x, &w.b, spec, &mut w.r)?;
        level.a.residual_into(&w.x, &w.b, &mut w.r)?;
        restrict_into(agg, &w.r, &mut tail[0].b)?;
    }
    {
        let w = &mut ws.levels[last];
        h.coarse_lu.solve_into(&w.b, &mut w.x)?;
    }
    for l in (0..last).rev() {
        let level = &h.levels[l];
        let agg = level.agg.as_ref().expect("non-coarsest level has aggregates");
        let (head, tail) = ws.levels.split_at_mut(l + 1);
        let w = &mut head[l];
        prolongate_add(agg, &tail[0].x, &mut w.x)?;
        smooth(&level.a, &mut w.x, &w.b, spec, &mut w.r)?;
    }
    z.copy_from_slice(&ws.levels[0].x);
    Ok(())
}

/// Allocating convenience wrapper around [`vcycle_into`].
pub fn vcycle(h: &Hierarchy, b: &[f64], spec: &SmootherSpec) -> Result<Vec<f64>> {
    let mut ws = VcycleWorkspace::new(h);
    let mut z = vec![0.0; b.len()];
    vcycle_into(h, b, &mut z, spec, &mut ws)?;
    Ok(z)
}

/// V-cycle preconditioner over a shared hierarchy.
pub struct VcyclePreconditioner<'h> {
    h: &'h Hierarchy,
    spec: SmootherSpec,
    ws: VcycleWorkspace,
}

impl<'h> VcyclePreconditioner<'h> {
    pub fn new(h: &'h Hierarchy, spec: SmootherSpec) -> Result<Self> {
        spec.validate()?;
        for l in &h.levels[..h.levels.len() - 1] {
            check_diagonal(&l.a)?;
        }
        Ok(VcyclePreconditioner {
            h,
            spec,
            ws: VcycleWorkspace::new(h),
        })
    }
}

impl Preconditioner for VcyclePreconditioner<'_> {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        vcycle_into(self.h, r, z, &self.spec, &mut self.ws)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_hierarchy, HierarchyParams};
    use crate::sparse::{CsrMatrix, TripletBuilder};

    fn laplace2d(m: usize) -> CsrMatrix {
        let n = m * m;
        let mut t = TripletBuilder::new(n);
        for y in 0..m {
            for x in 0..m {
                let i = x + m * y;
                t.push(i, i, 4.0);
                if x + 1 < m {
                    t.push(i, i + 1, -1.0);
                    t.push(i + 1, i, -1.0);
                }
                if y + 1 < m {
                    t.push(i, i + m, -1.0);
                    t.push(i + m, i, -1.0);
                }
            }
        }
        t.build().unwrap()
    }

    fn hierarchy(m: usize) -> Hierarchy {
        let params = HierarchyParams {
            coarse_target: 20,
            ..Default::default()
        };
        build_hierarchy(&laplace2d(m), &params).unwrap()
    }

    #[test]
    fn single_level_is_direct_solve() {
        let a = laplace2d(4);
        let h = build_hierarchy(&a, &HierarchyParams::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let b: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let z = vcycle(&h, &b, &SmootherSpec::default()).unwrap();
        assert_eq!(z, h.coarse_lu.solve(&b).unwrap());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let h = hierarchy(20);
        assert!(h.n_levels() > 1);
        let z = vcycle(&h, &[0.0; 400], &SmootherSpec::default()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_application_is_bitwise_identical() {
        let h = hierarchy(20);
        let b: Vec<f64> = (0..400).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut p = VcyclePreconditioner::new(&h, SmootherSpec::default()).unwrap();
        let mut z1 = vec![0.0; 400];
        let mut z2 = vec![0.0; 400];
        p.apply(&b, &mut z1).unwrap();
        p.apply(&b, &mut z2).unwrap();
        assert_eq!(z1, z2);
    }

    #[test]
    fn vcycle_reduces_error() {
        let h = hierarchy(20);
        let a = &h.levels[0].a;
        let xs: Vec<f64> = (0..400).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.spmv(&xs).unwrap();
        let z = vcycle(&h, &b, &SmootherSpec::default()).unwrap();
        let err: f64 = z.iter().zip(&xs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err < 0.5 * norm, "{err} vs {norm}");
    }

    #[test]
    fn dimension_checked() {
        let h = hierarchy(10);
        assert!(vcycle(&h, &[1.0; 3], &SmootherSpec::default()).is_err());
    }
}
