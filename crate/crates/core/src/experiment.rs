//! Experiment runner and report formatting.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::hierarchy::build_hierarchy;
use crate::parallel::{
    build_parallel_hierarchy, gather, parallel_bicgstab, partition_fine, rank_grid, scatter, CommStats,
    ParallelHierarchyParams, VirtualComm,
};
use crate::problems::{generate, Problem, ProblemSpec};
use crate::solvers::{bicgstab, SmootherSpec, SolveReport, VcyclePreconditioner};
use crate::sparse::norm2;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub hierarchy: ParallelHierarchyParams,
    /// Pre- and post-smoother.
    pub smoother: SmootherSpec,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            hierarchy: ParallelHierarchyParams::default(),
            smoother: SmootherSpec::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.hierarchy.validate()?;
        self.smoother.validate()?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(AmgError::InvalidConfig(format!("tolerance must lie in (0, 1) (got {})", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(AmgError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Metrics of one solve, in the column order procs, 1/h, levels, build
/// time, solve time, iterations, time per iteration, total time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: ProblemSpec,
    pub ranks: usize,
    pub h_inv: usize,
    pub levels: usize,
    pub iterations: usize,
    pub converged: bool,
    pub operator_complexity: f64,
    pub grid_complexity: f64,
    pub build_seconds: f64,
    pub solve_seconds: f64,
    pub seconds_per_iteration: f64,
    pub total_seconds: f64,
    /// `‖b − A x‖ / ‖b‖` of the returned solution.
    pub relative_residual: f64,
    /// Maximum cell-centre error, for problems with a known solution.
    pub max_error: Option<f64>,
    pub config: SolverConfig,
}

/// Report and solution of [`run_experiment`], with solver diagnostics.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub solution: Vec<f64>,
    pub solve: SolveReport,
    /// Communication of the parallel run; empty for one rank.
    pub comm: CommStats,
}

/// Generates the problem, builds the hierarchy and solves with V-cycle
/// preconditioned BiCGSTAB, timing build and solve separately. One rank
/// uses the sequential hierarchy; more ranks use the virtual-rank simulator.
pub fn run_experiment(spec: &ProblemSpec, config: &SolverConfig, ranks: usize) -> Result<RunOutcome> {
    config.validate()?;
    if ranks == 0 {
        return Err(AmgError::InvalidConfig("rank count must be at least 1".into()));
    }
    let problem = generate(spec)?;
    run_on(&problem, config, ranks)
}

/// [`run_experiment`] on an already generated problem.
pub fn run_on(problem: &Problem, config: &SolverConfig, ranks: usize) -> Result<RunOutcome> {
    config.validate()?;
    let a = &problem.matrix;
    let b = &problem.rhs;
    let (levels, complexity, build, solve_time, solution, solve, comm) = if ranks == 1 {
        let t = Instant::now();
        let h = build_hierarchy(a, &config.hierarchy.hierarchy)?;
        let build = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let mut pre = VcyclePreconditioner::new(&h, config.smoother)?;
        let (x, rep) = bicgstab(a, &mut pre, b, config.tol, config.max_iter)?;
        let solve_time = t.elapsed().as_secs_f64();
        (h.n_levels(), h.complexity(), build, solve_time, x, rep, CommStats::default())
    } else {
        let t = Instant::now();
        let dist = partition_fine(problem.spec.cells_per_axis, rank_grid(ranks))?;
        let mut comm = VirtualComm::new(ranks);
        let h = build_parallel_hierarchy(&mut comm, a, &dist, &config.hierarchy)?;
        let build = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let bd = scatter(h.fine_states(), b);
        let (x, rep) = parallel_bicgstab(&h, &mut comm, &bd, config.smoother, config.tol, config.max_iter)?;
        let x = gather(h.fine_states(), &x, a.n())?;
        let solve_time = t.elapsed().as_secs_f64();
        (h.n_levels(), h.complexity(), build, solve_time, x, rep, comm.stats().clone())
    };
    let r = a.residual(&solution, b)?;
    let bn = norm2(b);
    let max_error = problem.exact.as_ref().map(|u| {
        solution
            .iter()
            .zip(u)
            .map(|(x, u)| (x - u).abs())
            .fold(0.0, f64::max)
    });
    let report = RunReport {
        problem: problem.spec,
        ranks,
        h_inv: problem.spec.cells_per_axis,
        levels,
        iterations: solve.iterations,
        converged: solve.converged,
        operator_complexity: complexity.operator_complexity,
        grid_complexity: complexity.grid_complexity,
        build_seconds: build,
        solve_seconds: solve_time,
        seconds_per_iteration: if solve.iterations > 0 {
            solve_time / solve.iterations as f64
        } else {
            0.0
        },
        total_seconds: build + solve_time,
        relative_residual: if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) },
        max_error,
        config: *config,
    };
    Ok(RunOutcome {
        report,
        solution,
        solve,
        comm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Table,
}

impl FromStr for ReportFormat {
    type Err = AmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            other => Err(AmgError::InvalidConfig(format!(
                "unknown format '{other}' (expected csv, json or table)"
            ))),
        }
    }
}

pub const CSV_HEADER: &str = "procs,h_inv,levels,build_s,solve_s,iterations,s_per_it,total_s";
const TABLE_HEADER: [&str; 8] = ["procs", "1/h", "lev", "TB", "TS", "It", "TIt", "TT"];

/// Formats seconds with 4 significant digits.
pub fn format_seconds(t: f64) -> String {
    if t == 0.0 || !t.is_finite() {
        return format!("{t:.3}");
    }
    let magnitude = t.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{t:.decimals$}")
}

fn columns(r: &RunReport) -> [String; 8] {
    [
        r.ranks.to_string(),
        r.h_inv.to_string(),
        r.levels.to_string(),
        format_seconds(r.build_seconds),
        format_seconds(r.solve_seconds),
        r.iterations.to_string(),
        format_seconds(r.seconds_per_iteration),
        format_seconds(r.total_seconds),
    ]
}

/// Renders a report; csv and table print one header line and one data line.
pub fn report_emit(report: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).map_err(|e| AmgError::Io(e.to_string())),
        ReportFormat::Csv => Ok(format!("{CSV_HEADER}\n{}\n", columns(report).join(","))),
        ReportFormat::Table => {
            let row = columns(report);
            let mut out = String::new();
            let widths: Vec<usize> = TABLE_HEADER.iter().zip(&row).map(|(h, c)| h.len().max(c.len())).collect();
            for (k, (h, w)) in TABLE_HEADER.iter().zip(&widths).enumerate() {
                let sep = if k == 0 { "" } else { " " };
                write!(out, "{sep}{h:>w$}").unwrap();
            }
            out.push('\n');
            for (k, (c, w)) in row.iter().zip(&widths).enumerate() {
                let sep = if k == 0 { "" } else { " " };
                write!(out, "{sep}{c:>w$}").unwrap();
            }
            out.push('\n');
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemKind;

    fn sample() -> RunReport {
        run_experiment(&ProblemSpec::new(ProblemKind::Laplace3D, 8).unwrap(), &SolverConfig::default(), 1)
            .unwrap()
            .report
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let text = report_emit(&r, ReportFormat::Json).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_and_table_shape() {
        let r = sample();
        let csv = report_emit(&r, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "procs,h_inv,levels,build_s,solve_s,iterations,s_per_it,total_s");
        assert_eq!(lines[1].split(',').count(), 8);
        let table = report_emit(&r, ReportFormat::Table).unwrap();
        for line in table.lines() {
            assert_eq!(line.split_whitespace().count(), 8);
        }
    }

    #[test]
    fn seconds_have_four_significant_digits() {
        assert_eq!(format_seconds(1.23456), "1.235");
        assert_eq!(format_seconds(0.000123456), "0.0001235");
        assert_eq!(format_seconds(12.3456), "12.35");
        assert_eq!(format_seconds(1234.56), "1235");
        assert_eq!(format_seconds(0.0), "0.000");
    }

    #[test]
    fn totals_add_up() {
        let r = sample();
        assert!(r.converged);
        assert_eq!(r.total_seconds, r.build_seconds + r.solve_seconds);
        assert!(r.relative_residual <= 10.0 * r.config.tol);
    }

    #[test]
    fn ranks_agree() {
        let spec = ProblemSpec::new(ProblemKind::Laplace3D, 16).unwrap();
        let c = SolverConfig::default();
        let one = run_experiment(&spec, &c, 1).unwrap();
        let eight = run_experiment(&spec, &c, 8).unwrap();
        assert!(one.report.converged && eight.report.converged);
        let diff: f64 = one.solution.iter().zip(&eight.solution).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-6 * norm2(&one.solution));
        assert!(eight.comm.total_exchanges() > 0);
    }

    #[test]
    fn invalid_config() {
        let spec = ProblemSpec::new(ProblemKind::Laplace3D, 4).unwrap();
        let c = SolverConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(run_experiment(&spec, &c, 1).is_err());
        assert!(run_experiment(&spec, &SolverConfig::default(), 0).is_err());
    }
}
