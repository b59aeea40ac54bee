//! Unpreconditioned conjugate gradient over the distributed system.
//!
//! Built from three primitives: MATVEC (halo exchange plus local SpMV), DOT
//! (local exact accumulation plus an all-reduce) and WAXPBY (purely local).
//! Dot products are summed exactly, so iterates do not depend on how rows
//! are spread over ranks.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::comm::{halo_exchange, Comm, ExactSum, HaloPlan};
use crate::error::{Error, Result};
use crate::sparse::{Kernel, MatvecOperator, OpCounters};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    pub max_iterations: usize,
    /// Stop once `‖r‖ / ‖b‖` falls to this value.
    pub tolerance: f64,
    pub kernel: Kernel,
    /// Replace the recurrence residual by `b - A x` every this many
    /// iterations. `None` keeps the pure recurrence.
    pub recompute_every: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            max_iterations: 200,
            tolerance: 1e-8,
            kernel: Kernel::Crs,
            recompute_every: Some(50),
        }
    }
}

impl CgConfig {
    /// Fixed-length run with the pure recurrence, for timing.
    pub fn benchmark(kernel: Kernel, iterations: usize) -> Self {
        CgConfig {
            max_iterations: iterations,
            tolerance: f64::MIN_POSITIVE,
            kernel,
            recompute_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.recompute_every == Some(0) {
            return Err(Error::Config("recompute interval must be positive".into()));
        }
        Ok(())
    }
}

/// Time, call count and operation counts of one CG primitive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveCost {
    pub seconds: f64,
    pub calls: u64,
    pub counters: OpCounters,
}

impl PrimitiveCost {
    fn record(&mut self, start: Instant, counters: OpCounters) {
        self.seconds += start.elapsed().as_secs_f64();
        self.calls += 1;
        self.counters += counters;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgResult {
    /// Solution on the owned rows.
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Recurrence residual norm after each iteration.
    pub residual_history: Vec<f64>,
    pub norm_b: f64,
    pub matvec: PrimitiveCost,
    pub dot: PrimitiveCost,
    pub waxpby: PrimitiveCost,
    pub total_seconds: f64,
}

impl CgResult {
    pub fn final_relative_residual(&self) -> f64 {
        match self.residual_history.last() {
            Some(r) if self.norm_b > 0.0 => r / self.norm_b,
            _ => 0.0,
        }
    }

    /// Time not spent inside the three primitives.
    pub fn other_seconds(&self) -> f64 {
        (self.total_seconds - self.matvec.seconds - self.dot.seconds - self.waxpby.seconds).max(0.0)
    }
}

fn check_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

/// Global inner product of the owned entries of `u` and `v`.
pub fn dot(comm: &mut Comm, u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(dot_exact(comm, u, v)?.value())
}

fn dot_exact(comm: &mut Comm, u: &[f64], v: &[f64]) -> Result<ExactSum> {
    check_len("dot", u.len(), v.len())?;
    let mut local = ExactSum::new();
    local.add_products(u, v);
    comm.allreduce_exact(local)
}

/// `alpha * x + beta * y`, elementwise.
pub fn waxpby(alpha: f64, x: &[f64], beta: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_len("waxpby", x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(a, b)| alpha * a + beta * b).collect())
}

/// `y <- alpha * x + beta * y`, the same arithmetic as [`waxpby`].
fn waxpby_into(alpha: f64, x: &[f64], beta: f64, y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = alpha * xi + beta * *yi;
    }
}

/// `y <- alpha * y + beta * x`.
fn wbxpay_into(alpha: f64, y: &mut [f64], beta: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = alpha * *yi + beta * xi;
    }
}

fn primitive_counters(n: usize, flops_per: u64, loads_per: u64) -> OpCounters {
    OpCounters { flops: flops_per * n as u64, loads: loads_per * n as u64 }
}

/// Halo exchange into `work`, then `y = A work`. The first call through
/// `counted` reports operation counts; later calls reuse them.
fn matvec(
    comm: &mut Comm,
    plan: &HaloPlan,
    op: &MatvecOperator,
    work: &mut [f64],
    y: &mut [f64],
    counted: &mut Option<OpCounters>,
) -> Result<OpCounters> {
    halo_exchange(comm, plan, work)?;
    match counted {
        Some(c) => {
            op.apply(work, y)?;
            Ok(*c)
        }
        None => {
            let c = op.apply_counted(work, y)?;
            *counted = Some(c);
            Ok(c)
        }
    }
}

/// Local squared residual `‖b - A x‖²` on owned rows, as an exact partial sum.
pub fn residual_sq_local(
    comm: &mut Comm,
    plan: &HaloPlan,
    op: &MatvecOperator,
    b: &[f64],
    x: &[f64],
) -> Result<ExactSum> {
    let m = op.nrows();
    check_len("residual", b.len(), m)?;
    check_len("residual", x.len(), m)?;
    let mut work = vec![0.0; plan.num_local];
    work[..m].copy_from_slice(x);
    halo_exchange(comm, plan, &mut work)?;
    let mut ax = vec![0.0; m];
    op.apply(&work, &mut ax)?;
    let mut s = ExactSum::new();
    for (bi, ai) in b.iter().zip(&ax) {
        let r = bi - ai;
        s.add(r * r);
    }
    Ok(s)
}

/// Solves `A x = b` from `x = 0`.
pub fn cg_solve(
    comm: &mut Comm,
    plan: &HaloPlan,
    op: &MatvecOperator,
    b: &[f64],
    config: &CgConfig,
) -> Result<CgResult> {
    config.validate()?;
    let m = op.nrows();
    check_len("cg right-hand side", b.len(), m)?;
    check_len("cg halo plan", plan.num_local, op.ncols())?;
    let started = Instant::now();

    let mut matvec_cost = PrimitiveCost::default();
    let mut dot_cost = PrimitiveCost::default();
    let mut waxpby_cost = PrimitiveCost::default();
    let dot_counters = primitive_counters(m, 2, 2);
    let waxpby_counters = primitive_counters(m, 3, 2);
    let mut spmv_counters = None;

    let t = Instant::now();
    let norm_b = dot(comm, b, b)?.sqrt();
    dot_cost.record(t, dot_counters);

    let mut x = vec![0.0; m];
    let mut history = Vec::new();
    let mut converged = norm_b == 0.0;
    let mut iterations = 0;

    if !converged {
        let mut r = b.to_vec();
        // search direction with room for external entries
        let mut p = vec![0.0; plan.num_local];
        p[..m].copy_from_slice(&r);
        let mut ap = vec![0.0; m];

        let t = Instant::now();
        let mut rr = dot(comm, &r, &r)?;
        dot_cost.record(t, dot_counters);

        for k in 1..=config.max_iterations {
            iterations = k;
            let t = Instant::now();
            let c = matvec(comm, plan, op, &mut p, &mut ap, &mut spmv_counters)?;
            matvec_cost.record(t, c);

            let t = Instant::now();
            let pap = dot(comm, &p[..m], &ap)?;
            dot_cost.record(t, dot_counters);
            if !pap.is_finite() {
                return Err(Error::Divergence(k));
            }
            if pap <= 0.0 {
                return Err(Error::NotSpd(pap, k));
            }
            let alpha = rr / pap;

            let t = Instant::now();
            waxpby_into(alpha, &p[..m], 1.0, &mut x);
            waxpby_into(-alpha, &ap, 1.0, &mut r);
            waxpby_cost.record(t, waxpby_counters + waxpby_counters);

            if config.recompute_every.is_some_and(|every| k % every == 0) {
                let mut work = vec![0.0; plan.num_local];
                work[..m].copy_from_slice(&x);
                let t = Instant::now();
                let c = matvec(comm, plan, op, &mut work, &mut ap, &mut spmv_counters)?;
                matvec_cost.record(t, c);
                let t = Instant::now();
                for ((ri, bi), ai) in r.iter_mut().zip(b).zip(&ap) {
                    *ri = bi - ai;
                }
                waxpby_cost.record(t, waxpby_counters);
            }

            let t = Instant::now();
            let rr_new = dot(comm, &r, &r)?;
            dot_cost.record(t, dot_counters);
            let norm_r = rr_new.sqrt();
            if !norm_r.is_finite() {
                return Err(Error::Divergence(k));
            }
            history.push(norm_r);
            if norm_r / norm_b <= config.tolerance {
                converged = true;
                break;
            }

            let beta = rr_new / rr;
            let t = Instant::now();
            wbxpay_into(beta, &mut p[..m], 1.0, &r);
            waxpby_cost.record(t, waxpby_counters);
            rr = rr_new;
        }
    }

    Ok(CgResult {
        x,
        iterations,
        converged,
        residual_history: history,
        norm_b,
        matvec: matvec_cost,
        dot: dot_cost,
        waxpby: waxpby_cost,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}
