#![allow(dead_code)]

use feproxy::assembly::{assemble, impose_dirichlet};
use feproxy::domain::{dirichlet_rows, rcb_partition, BoxDims, BoxPartition};
use feproxy::sparse::{generate_structure, CrsMatrix};
use nalgebra::{DMatrix, DVector};

/// Per-rank assembled matrix and right-hand side.
pub struct RankSystem {
    pub a: CrsMatrix,
    pub b: Vec<f64>,
}

pub fn dims(n: [usize; 3]) -> BoxDims {
    BoxDims::new(n[0], n[1], n[2]).unwrap()
}

/// Structure plus assembly on every rank, without boundary conditions.
pub fn assemble_raw(d: BoxDims, p: usize) -> (BoxPartition, Vec<RankSystem>) {
    let part = rcb_partition(d, p).unwrap();
    let systems = (0..p)
        .map(|r| {
            let mut a = generate_structure(&part, r);
            let b = assemble(&part, r, &mut a).unwrap();
            RankSystem { a, b }
        })
        .collect();
    (part, systems)
}

/// Fully assembled system with boundary conditions imposed.
pub fn assemble_system(d: BoxDims, p: usize) -> (BoxPartition, Vec<RankSystem>) {
    let (part, mut systems) = assemble_raw(d, p);
    let bc = dirichlet_rows(d);
    for (r, s) in systems.iter_mut().enumerate() {
        impose_dirichlet(&mut s.a, &mut s.b, &bc, part.rank(r)).unwrap();
    }
    (part, systems)
}

/// Global rows keyed by global column ids, in global row order.
pub fn global_rows(part: &BoxPartition, systems: &[RankSystem]) -> Vec<Vec<(usize, f64)>> {
    let n = part.dims.num_nodes();
    let mut rows = vec![Vec::new(); n];
    for (r, s) in systems.iter().enumerate() {
        let dom = part.rank(r);
        for i in 0..s.a.nrows() {
            let (cols, vals) = s.a.row(i);
            rows[s.a.rows[i]] =
                cols.iter().zip(vals).map(|(&c, &v)| (dom.local_to_global(c as usize), v)).collect();
        }
    }
    rows
}

pub fn global_rhs(part: &BoxPartition, systems: &[RankSystem]) -> Vec<f64> {
    let mut b = vec![0.0; part.dims.num_nodes()];
    for s in systems {
        for (i, &g) in s.a.rows.iter().enumerate() {
            b[g] = s.b[i];
        }
    }
    b
}

pub fn dense(part: &BoxPartition, systems: &[RankSystem]) -> (DMatrix<f64>, DVector<f64>) {
    let n = part.dims.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for (i, row) in global_rows(part, systems).iter().enumerate() {
        for &(j, v) in row {
            a[(i, j)] = v;
        }
    }
    (a, DVector::from_vec(global_rhs(part, systems)))
}

/// Dense LU solve of the assembled global system.
pub fn dense_solution(d: BoxDims) -> Vec<f64> {
    let (part, systems) = assemble_system(d, 1);
    let (a, b) = dense(&part, &systems);
    a.lu().solve(&b).expect("nonsingular").as_slice().to_vec()
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub fn inf_norm_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Small deterministic generator for test data.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }
}

/// Banded matrix with random gaps inside the band, so segment lengths vary.
pub fn random_banded(m: usize, half_band: usize, density: f64, seed: u64) -> CrsMatrix {
    let mut rng = SplitMix(seed);
    let rows: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| {
            let lo = i.saturating_sub(half_band);
            let hi = (i + half_band + 1).min(m);
            let mut row = Vec::new();
            for j in lo..hi {
                if (rng.next_f64() + 1.0) / 2.0 < density {
                    row.push((j, rng.next_f64()));
                }
            }
            row
        })
        .collect();
    CrsMatrix::from_rows(m, &rows).unwrap()
}

/// The named matrices every SpMV kernel must agree on, each with an input
/// vector covering its columns.
pub fn kernel_corpus() -> Vec<(String, CrsMatrix, Vec<f64>)> {
    let mut out = Vec::new();
    let mut rng = SplitMix(7);
    let mut vector = |n: usize| (0..n).map(|_| rng.next_f64()).collect::<Vec<f64>>();
    for n in [[1, 1, 1], [2, 2, 2], [3, 3, 3], [4, 4, 4], [2, 3, 5], [6, 6, 6]] {
        let d = dims(n);
        for p in [1, 2, 4, 8] {
            if p > d.num_elements() {
                continue;
            }
            let (_, systems) = assemble_system(d, p);
            for (r, s) in systems.into_iter().enumerate() {
                let x = vector(s.a.ncols);
                out.push((format!("fe {n:?} p={p} rank {r}"), s.a, x));
            }
        }
    }
    out.push(("identity 17".into(), CrsMatrix::identity(17), vector(17)));
    for (k, seed) in [11u64, 12, 13].iter().enumerate() {
        let a = random_banded(40 + 10 * k, 6, 0.6, *seed);
        let x = vector(a.ncols);
        out.push((format!("banded seed {seed}"), a, x));
    }
    let empty = CrsMatrix::from_rows(4, &[vec![(0, 1.0), (1, 2.0)], vec![], vec![(3, -1.0)], vec![]]).unwrap();
    out.push(("empty rows".into(), empty, vector(4)));
    let long = CrsMatrix::from_rows(
        9,
        &[
            (0..5).map(|j| (j, 0.5 + j as f64)).collect(),
            vec![(1, 1.0), (3, 2.0), (4, 3.0), (5, 4.0), (6, 5.0), (7, 6.0)],
            (2..9).map(|j| (j, -(j as f64))).collect(),
        ],
    )
    .unwrap();
    out.push(("length-5 and longer segments".into(), long, vector(9)));
    out
}
