//! Benchmark driver: solves one model problem and prints a report.
//!
//! Exit status is 0 when the solver converged, 2 when it did not and 1 on
//! any error.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use aggamg::experiment::{report_emit, run_on, ReportFormat, SolverConfig};
use aggamg::parallel::ForcedAgglomeration;
use aggamg::problems::{generate, ProblemKind, ProblemSpec};
use aggamg::solvers::{SmootherKind, SmootherSpec};
use aggamg::sparse::mm::write_matrix_market;
use aggamg::{AggregationParams, Result};

#[derive(Debug, Parser)]
#[command(name = "aggamg", version, about = "Aggregation AMG preconditioned BiCGSTAB on model problems")]
struct Args {
    /// laplace, mms or hetero.
    #[arg(long, default_value = "laplace")]
    problem: ProblemKind,
    /// Cells per axis of the unit cube.
    #[arg(long, default_value_t = 40)]
    cells: usize,
    /// Number of virtual ranks.
    #[arg(long, default_value_t = 1)]
    ranks: usize,
    /// Strength threshold.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    delta: f64,
    /// Isolation threshold.
    #[arg(long, default_value_t = 1e-5)]
    beta: f64,
    #[arg(long, default_value_t = 4)]
    smin: usize,
    #[arg(long, default_value_t = 6)]
    smax: usize,
    /// Maximum aggregate diameter.
    #[arg(long, default_value_t = 2)]
    dmax: usize,
    /// Coarse matrix scaling (Galerkin product divided by omega).
    #[arg(long, default_value_t = 1.6)]
    omega: f64,
    /// gs-forward, gs-backward, sgs or jacobi.
    #[arg(long, default_value = "sgs")]
    smoother: SmootherKind,
    /// Smoother sweeps per pre- and post-smoothing.
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Stop coarsening at or below this many unknowns.
    #[arg(long, default_value_t = 1000)]
    coarse_target: usize,
    #[arg(long, default_value_t = 25)]
    max_levels: usize,
    /// Owner count below which ranks are agglomerated.
    #[arg(long, default_value_t = 64)]
    agglomeration_threshold: usize,
    /// Force agglomeration as LEVEL:RANKS.
    #[arg(long, value_parser = parse_forced)]
    force_agglomeration: Option<ForcedAgglomeration>,
    /// csv, json or table.
    #[arg(long, default_value = "table")]
    format: ReportFormat,
    /// Accepted for compatibility; every code path is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the assembled matrix in Matrix Market format.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// Write per-level communication statistics as JSON.
    #[arg(long)]
    comm_stats: Option<PathBuf>,
    /// Write the residual history as CSV.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

fn parse_forced(s: &str) -> std::result::Result<ForcedAgglomeration, String> {
    let (level, ranks) = s.split_once(':').ok_or("expected LEVEL:RANKS")?;
    Ok(ForcedAgglomeration {
        level: level.parse().map_err(|e| format!("level: {e}"))?,
        ranks: ranks.parse().map_err(|e| format!("ranks: {e}"))?,
    })
}

impl Args {
    fn config(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        c.hierarchy.hierarchy.aggregation = AggregationParams {
            s_min: self.smin,
            s_max: self.smax,
            d_max: self.dmax,
            delta: self.delta,
            beta: self.beta,
        };
        c.hierarchy.hierarchy.omega = self.omega;
        c.hierarchy.hierarchy.coarse_target = self.coarse_target;
        c.hierarchy.hierarchy.max_levels = self.max_levels;
        c.hierarchy.agglomeration.threshold = self.agglomeration_threshold;
        c.hierarchy.agglomeration.forced = self.force_agglomeration;
        c.smoother = SmootherSpec {
            kind: self.smoother,
            steps: self.steps,
        };
        c.tol = self.tol;
        c.max_iter = self.max_iter;
        c
    }
}

fn run(args: &Args) -> Result<bool> {
    let spec = ProblemSpec::new(args.problem, args.cells)?;
    let config = args.config();
    config.validate()?;
    let problem = generate(&spec)?;
    if let Some(path) = &args.dump_matrix {
        write_matrix_market(&problem.matrix, BufWriter::new(File::create(path)?))?;
        log::info!("matrix written to {}", path.display());
    }
    let out = run_on(&problem, &config, args.ranks)?;
    if let Some(path) = &args.comm_stats {
        out.comm.write_json(BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &args.residuals {
        out.solve.write_residual_csv(BufWriter::new(File::create(path)?))?;
    }
    print!("{}", report_emit(&out.report, args.format)?);
    if args.format == ReportFormat::Json {
        println!();
    }
    if !out.report.converged {
        log::warn!(
            "not converged after {} iterations (relative residual {:e})",
            out.report.iterations,
            out.report.relative_residual
        );
    }
    Ok(out.report.converged)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
