//! End-to-end driver: partition, mesh processing, structure generation,
//! assembly, CG and verification over a group of simulated ranks, timed
//! per phase and summarised in a [`PhaseReport`].

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble, impose_dirichlet};
use crate::comm::{halo_exchange, merge_logs, Collectives, Comm, CommLog, HaloPlan, RankGroup};
use crate::domain::{dirichlet_rows, rcb_partition, BoxPartition};
use crate::error::{Error, Result};
use crate::solver::{cg_solve, residual_sq_local, CgConfig, CgResult, PrimitiveCost};
use crate::sparse::{
    generate_structure, memory_footprint, write_matrix_market, BcrsMatrix, CrsMatrix, Kernel,
    MatvecOperator, OpCounters,
};
use crate::verify::{solution_error, ErrorNorms};

pub use config::{Format, RunConfig};
pub use report::{emit_report, render_table, CgSummary, MatrixSummary, PhaseReport, PHASES};

/// Index and value widths used for the reported storage footprints.
pub const FOOTPRINT_WIDTHS: (usize, usize) = (4, 8);

/// A report plus the gathered solution of every kernel, in global node order.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: PhaseReport,
    pub solutions: BTreeMap<Kernel, Vec<f64>>,
}

struct KernelRun {
    kernel: Kernel,
    convert_seconds: f64,
    spmv: OpCounters,
    rep_seconds: Vec<f64>,
    last: CgResult,
}

struct RankRun {
    /// Seconds per phase after partitioning, in [`PHASES`] order.
    phase_seconds: [f64; 5],
    kernels: Vec<KernelRun>,
    histogram: BTreeMap<usize, usize>,
    nnz: usize,
    nns: usize,
    footprint: (u64, u64),
    cross_check: Option<bool>,
    /// Rank 0 only: gathered solution per kernel, in global node order.
    gathered: Vec<Option<Vec<f64>>>,
    verified_residual: Option<f64>,
    error: Option<ErrorNorms>,
    log: CommLog,
    dump: Option<CrsMatrix>,
}

/// Runs the full pipeline and writes the report and matrix dump if
/// configured.
pub fn run(config: &RunConfig) -> Result<PhaseReport> {
    run_detailed(config).map(|o| o.report)
}

pub fn run_detailed(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let dims = config.dims()?;

    let t = Instant::now();
    let partition = rcb_partition(dims, config.ranks).map_err(|e| e.in_phase("partition"))?;
    let partition_seconds = t.elapsed().as_secs_f64();

    let group = RankGroup::new(config.ranks)?;
    let results = group.run(|comm| {
        let out = rank_pipeline(comm, config, &partition);
        if out.is_err() {
            comm.abort_group();
        }
        out
    });
    let runs = collect_ranks(results)?;

    let kernels = config.format.kernels();
    let root = &runs[0];
    let mut solutions = BTreeMap::new();
    for (k, gathered) in kernels.iter().zip(&root.gathered) {
        solutions.insert(*k, gathered.clone().expect("root holds gathered solutions"));
    }
    let error = root.error.expect("root computes error norms");

    let report = build_report(config, &partition, partition_seconds, &runs, &solutions, error);

    if let Some(path) = &config.dump_matrix {
        let locals: Vec<&CrsMatrix> = runs.iter().map(|r| r.dump.as_ref().expect("dump requested")).collect();
        dump_matrix(path, &partition, &locals)?;
    }
    if let Some(path) = &config.report {
        emit_report(&report, path)?;
    }
    Ok(RunOutcome { report, solutions })
}

fn is_abort(e: &Error) -> bool {
    match e {
        Error::Phase { source, .. } => is_abort(source),
        Error::Protocol { .. } => true,
        _ => false,
    }
}

/// Picks the root cause when ranks fail: a local error wins over the
/// protocol errors it triggers on the other ranks.
fn collect_ranks(results: Vec<Result<RankRun>>) -> Result<Vec<RankRun>> {
    if results.iter().all(|r| r.is_ok()) {
        return Ok(results.into_iter().map(|r| r.ok().expect("checked")).collect());
    }
    let mut errors: Vec<Error> = results.into_iter().filter_map(|r| r.err()).collect();
    let pos = errors.iter().position(|e| !is_abort(e)).unwrap_or(0);
    Err(errors.swap_remove(pos))
}

fn to_global_order(partition: &BoxPartition, concat: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; partition.dims.num_nodes()];
    let mut k = 0;
    for dom in partition.ranks() {
        for &g in dom.owned() {
            out[g] = concat[k];
            k += 1;
        }
    }
    out
}

fn timed<T>(seconds: &mut f64, phase: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f().map_err(|e| e.in_phase(phase));
    *seconds += t.elapsed().as_secs_f64();
    out
}

fn rank_pipeline(comm: &mut Comm, config: &RunConfig, partition: &BoxPartition) -> Result<RankRun> {
    let rank = comm.rank();
    let dims = partition.dims;
    let dom = partition.rank(rank);
    let mut secs = [0.0; 5];

    let (bc, plan) = timed(&mut secs[0], "mesh_processing", || {
        let bc = dirichlet_rows(dims);
        Ok((bc, HaloPlan::build(partition, rank)))
    })?;

    let mut a = timed(&mut secs[1], "matrix_generation", || Ok(generate_structure(partition, rank)))?;

    let b = timed(&mut secs[2], "fe_assembly", || {
        let mut b = assemble(partition, rank, &mut a)?;
        impose_dirichlet(&mut a, &mut b, &bc, dom)?;
        Ok(b)
    })?;
    drop(bc);

    // structure statistics, outside the timed phases
    let (histogram, nnz, nns, footprint) = {
        let blocked = BcrsMatrix::from_crs(&a);
        let (iw, vw) = FOOTPRINT_WIDTHS;
        (
            blocked.segment_histogram(),
            a.nnz(),
            blocked.nns(),
            (memory_footprint(&a, iw, vw)?, memory_footprint(&blocked, iw, vw)?),
        )
    };

    let kernels = config.format.kernels();
    let mut runs = Vec::with_capacity(kernels.len());
    let mut cross_check = None;
    comm.set_scope("cg");
    for &kernel in &kernels {
        let cg = CgConfig { kernel, ..config.cg.clone() };
        let t = Instant::now();
        let op = MatvecOperator::new(&a, kernel);
        let convert_seconds = t.elapsed().as_secs_f64();
        secs[3] += convert_seconds;

        let spmv = {
            let x = vec![0.0; plan.num_local];
            let mut y = vec![0.0; a.nrows()];
            op.apply_counted(&x, &mut y)?
        };

        let mut rep_seconds = Vec::with_capacity(config.reps);
        let mut last = None;
        for _ in 0..config.reps {
            let result = timed(&mut secs[3], "cg_solve", || cg_solve(comm, &plan, &op, &b, &cg))?;
            rep_seconds.push(result.total_seconds);
            last = Some(result);
        }
        runs.push(KernelRun { kernel, convert_seconds, spmv, rep_seconds, last: last.expect("reps >= 1") });
    }
    if kernels.len() > 1 {
        comm.set_scope("compare");
        cross_check = Some(cross_check_kernels(comm, config.seed, partition, &plan, &a)?);
    }

    comm.set_scope("verify");
    let (gathered, verified_residual, error) = timed(&mut secs[4], "verification", || {
        let op = MatvecOperator::new(&a, Kernel::Crs);
        let x = &runs[0].last.x;
        let local = residual_sq_local(comm, &plan, &op, &b, x)?;
        let (total, concat) = match config.collectives {
            Collectives::AllCollectives => {
                (Some(comm.allreduce_exact(local)?), Some(comm.allgather(x)?))
            }
            Collectives::RootedWhereLegal => (comm.reduce_exact(local)?, comm.gather(x)?),
        };
        let norm_b = runs[0].last.norm_b;
        let residual = total.filter(|_| comm.is_root()).map(|s| {
            let r = s.value().sqrt();
            if norm_b > 0.0 {
                r / norm_b
            } else {
                r
            }
        });
        let global = concat.filter(|_| comm.is_root()).map(|c| to_global_order(partition, &c));
        let error = match &global {
            Some(g) => Some(solution_error(g, &dims, &config.series)?),
            None => None,
        };
        Ok((global, residual, error))
    })?;

    // solutions of the other kernels travel outside the verification scope
    comm.set_scope("compare");
    let mut all_gathered = vec![gathered];
    for run in &runs[1..] {
        all_gathered.push(comm.gather(&run.last.x)?.map(|c| to_global_order(partition, &c)));
    }

    let log = comm.take_log();
    let dump = config.dump_matrix.as_ref().map(|_| a.clone());
    for run in &mut runs {
        run.last.x = Vec::new();
    }
    Ok(RankRun {
        phase_seconds: secs,
        kernels: runs,
        histogram,
        nnz,
        nns,
        footprint,
        cross_check,
        gathered: all_gathered,
        verified_residual,
        error,
        log,
        dump,
    })
}

/// Applies every kernel to the same seeded random vector and checks the
/// results agree bit for bit on every rank.
fn cross_check_kernels(
    comm: &mut Comm,
    seed: u64,
    partition: &BoxPartition,
    plan: &HaloPlan,
    a: &CrsMatrix,
) -> Result<bool> {
    let dom = partition.rank(comm.rank());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let global: Vec<f64> = (0..partition.dims.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut x = vec![0.0; plan.num_local];
    for (l, &g) in dom.owned().iter().enumerate() {
        x[l] = global[g];
    }
    halo_exchange(comm, plan, &mut x)?;
    let mut outputs = Vec::new();
    for kernel in Kernel::ALL {
        let mut y = vec![0.0; a.nrows()];
        MatvecOperator::new(a, kernel).apply(&x, &mut y)?;
        outputs.push(y);
    }
    let local_ok = outputs.windows(2).all(|w| {
        w[0].iter().zip(&w[1]).all(|(p, q)| p.to_bits() == q.to_bits())
    });
    let agreed = comm.allreduce_sum(if local_ok { 0.0 } else { 1.0 })?;
    Ok(agreed == 0.0)
}

fn max_over(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// Times come from the rank with the longest CG run, so the primitive split
/// always fits inside the reported total; counters are summed over ranks.
fn summarize_kernel(runs: &[RankRun], idx: usize) -> CgSummary {
    let k0 = &runs[0].kernels[idx];
    let slowest = &runs
        .iter()
        .map(|r| &r.kernels[idx].last)
        .max_by(|a, b| a.total_seconds.total_cmp(&b.total_seconds))
        .expect("at least one rank");
    let mut primitives = BTreeMap::new();
    for (name, cost) in [("matvec", &slowest.matvec), ("dot", &slowest.dot), ("waxpby", &slowest.waxpby)] {
        let counters = runs
            .iter()
            .map(|r| {
                let last = &r.kernels[idx].last;
                match name {
                    "matvec" => last.matvec.counters,
                    "dot" => last.dot.counters,
                    _ => last.waxpby.counters,
                }
            })
            .sum();
        primitives.insert(name.to_string(), PrimitiveCost { seconds: cost.seconds, calls: cost.calls, counters });
    }
    let other = slowest.other_seconds();
    let percent = report::percentages(&[
        ("matvec", slowest.matvec.seconds),
        ("dot", slowest.dot.seconds),
        ("waxpby", slowest.waxpby.seconds),
        ("other", other),
    ]);
    CgSummary {
        kernel: k0.kernel,
        iterations: k0.last.iterations,
        converged: k0.last.converged,
        final_relative_residual: k0.last.final_relative_residual(),
        residual_history: k0.last.residual_history.clone(),
        convert_seconds: max_over(runs.iter().map(|r| r.kernels[idx].convert_seconds)),
        total_seconds: slowest.total_seconds,
        matvec: slowest.matvec.seconds,
        dot: slowest.dot.seconds,
        waxpby: slowest.waxpby.seconds,
        other,
        percent,
        primitives,
        rep_seconds: (0..k0.rep_seconds.len())
            .map(|rep| max_over(runs.iter().map(|r| r.kernels[idx].rep_seconds[rep])))
            .collect(),
    }
}

fn build_report(
    config: &RunConfig,
    partition: &BoxPartition,
    partition_seconds: f64,
    runs: &[RankRun],
    solutions: &BTreeMap<Kernel, Vec<f64>>,
    error: ErrorNorms,
) -> PhaseReport {
    let mut phase_values = vec![("partition", partition_seconds)];
    for (i, name) in PHASES[1..].iter().enumerate() {
        phase_values.push((name, max_over(runs.iter().map(|r| r.phase_seconds[i]))));
    }
    let phases: BTreeMap<String, f64> = phase_values.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let phase_percent = report::percentages(&phase_values);

    let kernels: Vec<CgSummary> = (0..runs[0].kernels.len()).map(|i| summarize_kernel(runs, i)).collect();
    let mut counters = BTreeMap::new();
    for (i, k) in kernels.iter().enumerate() {
        let total: OpCounters = runs.iter().map(|r| r.kernels[i].spmv).sum();
        counters.insert(k.kernel.name().to_string(), total);
    }

    let mut segments = BTreeMap::new();
    for r in runs {
        for (len, count) in &r.histogram {
            *segments.entry(*len).or_insert(0) += count;
        }
    }
    let nnz: usize = runs.iter().map(|r| r.nnz).sum();
    let nns: usize = runs.iter().map(|r| r.nns).sum();
    let (iw, vw) = FOOTPRINT_WIDTHS;

    let solutions_bit_identical = (solutions.len() > 1).then(|| {
        let mut it = solutions.values();
        let first = it.next().expect("non-empty");
        it.all(|s| s.iter().zip(first).all(|(p, q)| p.to_bits() == q.to_bits()))
    });

    PhaseReport {
        config: config.clone(),
        phases,
        phase_percent,
        cg: kernels[0].clone(),
        kernels: kernels.iter().map(|k| (k.kernel.name().to_string(), k.clone())).collect(),
        counters,
        segments,
        matrix: MatrixSummary {
            rows: partition.dims.num_nodes(),
            nnz,
            nns,
            nnz_per_segment: if nns > 0 { nnz as f64 / nns as f64 } else { 0.0 },
        },
        footprint: BTreeMap::from([
            ("crs".to_string(), runs.iter().map(|r| r.footprint.0).sum()),
            ("bcrs".to_string(), runs.iter().map(|r| r.footprint.1).sum()),
        ]),
        footprint_widths: [iw, vw],
        comm: merge_logs(runs.iter().map(|r| &r.log)),
        error,
        verified_relative_residual: runs[0].verified_residual.unwrap_or(0.0),
        kernels_bit_identical: runs[0].cross_check,
        solutions_bit_identical,
        partition: partition.summary(),
    }
}

/// Writes the assembled global system (after boundary conditions) as a
/// MatrixMarket file with rows in global order.
fn dump_matrix(path: &Path, partition: &BoxPartition, locals: &[&CrsMatrix]) -> Result<()> {
    let n = partition.dims.num_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, a) in locals.iter().enumerate() {
        let dom = partition.rank(r);
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            rows[a.rows[i]] = cols.iter().zip(vals).map(|(&c, &v)| (dom.local_to_global(c as usize), v)).collect();
        }
    }
    let global = CrsMatrix::from_rows(n, &rows)?;
    let identity: Vec<usize> = (0..n).collect();
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    write_matrix_market(BufWriter::new(file), &global, &identity, n).map_err(io)
}
