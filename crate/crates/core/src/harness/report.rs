use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comm::CommLog;
use crate::domain::RankSummary;
use crate::error::{Error, Result};
use crate::solver::PrimitiveCost;
use crate::sparse::{Kernel, OpCounters};
use crate::verify::ErrorNorms;

use super::config::RunConfig;

/// Pipeline phases in execution order.
pub const PHASES: [&str; 6] =
    ["partition", "mesh_processing", "matrix_generation", "fe_assembly", "cg_solve", "verification"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgSummary {
    pub kernel: Kernel,
    pub iterations: usize,
    pub converged: bool,
    pub final_relative_residual: f64,
    pub residual_history: Vec<f64>,
    pub convert_seconds: f64,
    /// Seconds of the last repetition on the slowest rank; the primitive
    /// times below come from the same rank.
    pub total_seconds: f64,
    pub matvec: f64,
    pub dot: f64,
    pub waxpby: f64,
    pub other: f64,
    pub percent: BTreeMap<String, f64>,
    /// Per primitive: seconds and calls on the slowest rank, counters summed over ranks.
    pub primitives: BTreeMap<String, PrimitiveCost>,
    pub rep_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub rows: usize,
    pub nnz: usize,
    pub nns: usize,
    pub nnz_per_segment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub config: RunConfig,
    /// Seconds per phase, maximum over ranks.
    pub phases: BTreeMap<String, f64>,
    pub phase_percent: BTreeMap<String, f64>,
    /// CG summary of the first (or only) kernel.
    pub cg: CgSummary,
    pub kernels: BTreeMap<String, CgSummary>,
    /// Operation counts of one SpMV per kernel, summed over ranks.
    pub counters: BTreeMap<String, OpCounters>,
    /// Segment length to count, summed over ranks.
    pub segments: BTreeMap<usize, usize>,
    pub matrix: MatrixSummary,
    /// Storage bytes per format, summed over ranks.
    pub footprint: BTreeMap<String, u64>,
    /// Index and value byte widths behind `footprint`.
    pub footprint_widths: [usize; 2],
    pub comm: CommLog,
    pub error: ErrorNorms,
    /// `‖b - A x‖ / ‖b‖` recomputed during verification.
    pub verified_relative_residual: f64,
    /// Whether all kernels gave bit-identical SpMV results on a random vector.
    pub kernels_bit_identical: Option<bool>,
    /// Whether all kernels gave bit-identical CG solutions.
    pub solutions_bit_identical: Option<bool>,
    pub partition: Vec<RankSummary>,
}

/// Shares of a total in percent; they sum to 100 unless every value is 0.
pub(crate) fn percentages(parts: &[(&str, f64)]) -> BTreeMap<String, f64> {
    let total: f64 = parts.iter().map(|(_, v)| v).sum();
    parts
        .iter()
        .map(|(k, v)| (k.to_string(), if total > 0.0 { 100.0 * v / total } else { 0.0 }))
        .collect()
}

/// Human-readable summary table.
pub fn render_table(r: &PhaseReport) -> String {
    let mut s = String::new();
    let c = &r.config;
    let _ = writeln!(
        s,
        "mesh {}x{}x{}  ranks {}  format {}  collectives {}",
        c.nx, c.ny, c.nz, c.ranks, c.format, c.collectives
    );
    let _ = writeln!(s, "\n{:<20}{:>12}{:>9}", "phase", "seconds", "%");
    for p in PHASES {
        let _ = writeln!(s, "{:<20}{:>12.4}{:>9.2}", p, r.phases[p], r.phase_percent[p]);
    }
    for (name, k) in &r.kernels {
        let _ = writeln!(
            s,
            "\ncg [{name}]  iterations {}  converged {}  rel. residual {:.3e}  convert {:.4}s",
            k.iterations, k.converged, k.final_relative_residual, k.convert_seconds
        );
        let _ = writeln!(s, "{:<20}{:>12}{:>9}{:>10}{:>16}{:>16}", "primitive", "seconds", "%", "calls", "flops", "loads");
        for (label, cost) in &k.primitives {
            let _ = writeln!(
                s,
                "{:<20}{:>12.4}{:>9.2}{:>10}{:>16}{:>16}",
                label, cost.seconds, k.percent[label.as_str()], cost.calls, cost.counters.flops, cost.counters.loads
            );
        }
        let _ = writeln!(s, "{:<20}{:>12.4}{:>9.2}", "other", k.other, k.percent["other"]);
    }
    let _ = writeln!(s, "\nspmv counters (one call, all ranks)");
    for (name, ctr) in &r.counters {
        let _ = writeln!(s, "  {:<16} flops {:>14}  loads {:>14}", name, ctr.flops, ctr.loads);
    }
    let m = &r.matrix;
    let _ = writeln!(
        s,
        "\nmatrix rows {}  nnz {}  segments {}  nnz/segment {:.3}",
        m.rows, m.nnz, m.nns, m.nnz_per_segment
    );
    let hist: Vec<String> = r.segments.iter().map(|(l, n)| format!("{l}:{n}")).collect();
    let _ = writeln!(s, "segment lengths {}", hist.join(" "));
    let [iw, vw] = r.footprint_widths;
    let bytes: Vec<String> = r.footprint.iter().map(|(k, b)| format!("{k} {b} B")).collect();
    let _ = writeln!(s, "footprint (index {iw}B, value {vw}B): {}", bytes.join("  "));
    let _ = writeln!(s, "\ncommunication");
    for (key, st) in &r.comm {
        let _ = writeln!(s, "  {:<24} calls {:>8}  messages {:>8}  bytes {:>12}", key, st.calls, st.messages, st.bytes);
    }
    let _ = writeln!(
        s,
        "\nerror max {:.6e}  rms {:.6e}  verified rel. residual {:.3e}",
        r.error.max, r.error.rms, r.verified_relative_residual
    );
    if let Some(ok) = r.kernels_bit_identical {
        let _ = writeln!(s, "kernels bit-identical {ok}");
    }
    if let Some(ok) = r.solutions_bit_identical {
        let _ = writeln!(s, "solutions bit-identical {ok}");
    }
    s
}

/// Writes `path` as JSON and a text table next to it with extension `.txt`
/// (`.table.txt` if `path` already ends in `.txt`).
pub fn emit_report(report: &PhaseReport, path: &Path) -> Result<()> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    let json = serde_json::to_string_pretty(report)?;
    fs::write(path, json).map_err(io(path))?;
    let mut table = path.with_extension("txt");
    if table == path {
        table = path.with_extension("table.txt");
    }
    fs::write(&table, render_table(report)).map_err(io(&table))?;
    Ok(())
}
