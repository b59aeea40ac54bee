use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use feproxy::comm::Collectives;
use feproxy::harness::{self, Format, RunConfig};
use feproxy::solver::CgConfig;
use feproxy::verify::SeriesParams;

/// Finite-element proxy: assemble the steady heat problem on a hex mesh of
/// the unit cube and solve it with CG over simulated ranks.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    #[arg(long, default_value_t = 100)]
    nx: usize,
    #[arg(long, default_value_t = 100)]
    ny: usize,
    #[arg(long, default_value_t = 100)]
    nz: usize,
    #[arg(long, default_value_t = 1)]
    ranks: usize,
    /// crs, bcrs, bcrs-unrolled or compare-all
    #[arg(long, default_value = "crs")]
    format: Format,
    /// all-collectives or rooted-where-legal
    #[arg(long, default_value = "all-collectives")]
    collectives: Collectives,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Run exactly --max-iters iterations without residual replacement
    #[arg(long)]
    benchmark: bool,
    /// Recompute the true residual every this many iterations (0 disables)
    #[arg(long, default_value_t = 50)]
    recompute_every: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// JSON report path; a .txt table is written next to it
    #[arg(long)]
    report: Option<PathBuf>,
    /// MatrixMarket dump of the assembled system
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Odd terms per index kept in the analytical series
    #[arg(long, default_value_t = 300)]
    series_terms: usize,
}

impl Args {
    fn into_config(self) -> RunConfig {
        let kernel = self.format.kernels()[0];
        let cg = if self.benchmark {
            CgConfig::benchmark(kernel, self.max_iters)
        } else {
            CgConfig {
                max_iterations: self.max_iters,
                tolerance: self.tol,
                kernel,
                recompute_every: (self.recompute_every > 0).then_some(self.recompute_every),
            }
        };
        RunConfig {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            ranks: self.ranks,
            format: self.format,
            collectives: self.collectives,
            cg,
            reps: self.reps,
            report: self.report,
            dump_matrix: self.dump_matrix,
            seed: self.seed,
            series: SeriesParams { terms: self.series_terms },
        }
    }
}

fn main() -> ExitCode {
    let config = Args::parse().into_config();
    match harness::run(&config) {
        Ok(report) => {
            print!("{}", harness::render_table(&report));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
