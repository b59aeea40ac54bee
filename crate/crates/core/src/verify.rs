//! Analytical solution of the model problem and nodal error norms.
//!
//! Laplace's equation on the unit cube with `u = 1` on `x = 1` and `u = 0`
//! on the other faces has the separated solution
//!
//! ```text
//! u = Σ_{m,n odd} 16 / (m n π²) · sinh(λ x) / sinh(λ) · sin(mπy) · sin(nπz),
//! λ = π √(m² + n²)
//! ```
//!
//! The sinh ratio is evaluated as `e^{λ(x-1)} (1 - e^{-2λx}) / (1 - e^{-2λ})`
//! so large `λ` never overflows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDims;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesParams {
    /// Number of odd terms kept in each of `m` and `n`.
    pub terms: usize,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams { terms: 300 }
    }
}

impl SeriesParams {
    pub fn validate(&self) -> Result<()> {
        if self.terms == 0 {
            return Err(Error::Config("series term cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn sinh_ratio(lambda: f64, x: f64) -> f64 {
    (lambda * (x - 1.0)).exp() * (-(-2.0 * lambda * x).exp_m1()) / (-(-2.0 * lambda).exp_m1())
}

fn boundary_value(x: f64, y: f64, z: f64) -> Option<f64> {
    if x == 1.0 {
        Some(1.0)
    } else if x == 0.0 || y == 0.0 || y == 1.0 || z == 0.0 || z == 1.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Temperature at `(x, y, z)`. Boundary points return the prescribed
/// data exactly (1 on the whole `x = 1` plane, 0 elsewhere).
pub fn analytical_solution(x: f64, y: f64, z: f64, params: &SeriesParams) -> Result<f64> {
    params.validate()?;
    let inside = |c: f64| (0.0..=1.0).contains(&c);
    if !(inside(x) && inside(y) && inside(z)) {
        return Err(Error::OutsideDomain(x, y, z));
    }
    if let Some(v) = boundary_value(x, y, z) {
        return Ok(v);
    }
    let mut u = 0.0;
    for i in 0..params.terms {
        let m = (2 * i + 1) as f64;
        let sy = (m * PI * y).sin();
        for j in 0..params.terms {
            let n = (2 * j + 1) as f64;
            let lambda = PI * (m * m + n * n).sqrt();
            u += 16.0 / (m * n * PI * PI) * sinh_ratio(lambda, x) * sy * (n * PI * z).sin();
        }
    }
    Ok(u)
}

/// Analytical values at every mesh node, in global node order.
///
/// Evaluated slice by slice in `x` using the separable structure; terms
/// whose coefficient drops below `1e-20` are cut off (they decrease
/// monotonically in both indices for fixed `x`).
pub fn analytical_nodal_values(dims: &BoxDims, params: &SeriesParams) -> Result<Vec<f64>> {
    params.validate()?;
    let [nx, ny, nz] = dims.elem_counts();
    let terms = params.terms;
    let mut values = vec![0.0; dims.num_nodes()];

    let sines = |count: usize| -> Vec<Vec<f64>> {
        (0..=count)
            .map(|k| {
                let t = k as f64 / count as f64;
                (0..terms).map(|i| ((2 * i + 1) as f64 * PI * t).sin()).collect()
            })
            .collect()
    };
    let sy = sines(ny);
    let sz = sines(nz);

    let mut coef = vec![0.0; terms * terms];
    let mut partial = vec![0.0; terms * (nz + 1)];
    for ix in 0..=nx {
        let x = ix as f64 / nx as f64;
        if ix == 0 {
            continue;
        }
        if ix == nx {
            for iz in 0..=nz {
                for iy in 0..=ny {
                    values[dims.node_id(ix, iy, iz)] = 1.0;
                }
            }
            continue;
        }
        // live[i]: number of n-terms kept for m = 2i+1
        let mut live = vec![0usize; terms];
        for (i, kept) in live.iter_mut().enumerate() {
            let m = (2 * i + 1) as f64;
            for j in 0..terms {
                let n = (2 * j + 1) as f64;
                let c = 16.0 / (m * n * PI * PI) * sinh_ratio(PI * (m * m + n * n).sqrt(), x);
                if c < 1e-20 {
                    break;
                }
                coef[i * terms + j] = c;
                *kept = j + 1;
            }
            if *kept == 0 {
                break;
            }
        }
        for iz in 0..=nz {
            for (i, &kept) in live.iter().enumerate() {
                let row = &coef[i * terms..i * terms + kept];
                partial[i * (nz + 1) + iz] = row.iter().zip(&sz[iz]).map(|(c, s)| c * s).sum();
            }
        }
        for iz in 1..nz {
            for iy in 1..ny {
                let mut u = 0.0;
                for (i, &kept) in live.iter().enumerate() {
                    if kept == 0 {
                        break;
                    }
                    u += sy[iy][i] * partial[i * (nz + 1) + iz];
                }
                values[dims.node_id(ix, iy, iz)] = u;
            }
        }
    }
    Ok(values)
}

/// Whether a node enters the error norms: nodes on the edges of the
/// `x = 1` face, where the exact solution jumps, are left out.
pub fn is_evaluated(dims: &BoxDims, global: usize) -> bool {
    let [ix, iy, iz] = dims.node_index(global);
    !(ix == dims.nx && (iy == 0 || iy == dims.ny || iz == 0 || iz == dims.nz))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub max: f64,
    pub rms: f64,
}

/// Max-abs and RMS nodal error of a gathered global solution.
pub fn solution_error(x_num: &[f64], dims: &BoxDims, params: &SeriesParams) -> Result<ErrorNorms> {
    if x_num.len() != dims.num_nodes() {
        return Err(Error::Dimension(format!(
            "solution has {} entries, mesh has {} nodes",
            x_num.len(),
            dims.num_nodes()
        )));
    }
    let exact = analytical_nodal_values(dims, params)?;
    let mut max: f64 = 0.0;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (g, (u, e)) in x_num.iter().zip(&exact).enumerate() {
        if !is_evaluated(dims, g) {
            continue;
        }
        let d = (u - e).abs();
        max = max.max(d);
        sq += d * d;
        count += 1;
    }
    let rms = if count > 0 { (sq / count as f64).sqrt() } else { 0.0 };
    Ok(ErrorNorms { max, rms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_faces_vanish() {
        let p = SeriesParams::default();
        for (x, y, z) in [(0.0, 0.3, 0.4), (0.5, 0.0, 0.5), (0.5, 1.0, 0.2), (0.7, 0.2, 0.0), (0.7, 0.2, 1.0)] {
            assert_eq!(analytical_solution(x, y, z, &p).unwrap(), 0.0);
        }
        assert_eq!(analytical_solution(1.0, 0.5, 0.5, &p).unwrap(), 1.0);
    }

    #[test]
    fn centre_is_one_sixth() {
        // six rotated copies of the problem sum to u = 1, so the centre is 1/6
        let u = analytical_solution(0.5, 0.5, 0.5, &SeriesParams::default()).unwrap();
        assert!((u - 1.0 / 6.0).abs() < 1e-12, "{u}");
    }

    #[test]
    fn face_superposition_sums_to_one() {
        let p = SeriesParams::default();
        let (x, y, z) = (0.3, 0.6, 0.45);
        let u = |a: f64, b: f64, c: f64| analytical_solution(a, b, c, &p).unwrap();
        let total = u(x, y, z) + u(1.0 - x, y, z) + u(y, x, z) + u(1.0 - y, x, z) + u(z, y, x) + u(1.0 - z, y, x);
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn doubling_terms_changes_little() {
        let p300 = SeriesParams { terms: 300 };
        let p600 = SeriesParams { terms: 600 };
        for (x, y, z) in [(0.5, 0.5, 0.5), (0.9, 0.3, 0.7), (0.25, 0.1, 0.8)] {
            let a = analytical_solution(x, y, z, &p300).unwrap();
            let b = analytical_solution(x, y, z, &p600).unwrap();
            assert!((a - b).abs() <= 1e-10, "({x},{y},{z}): {a} vs {b}");
        }
    }

    #[test]
    fn rejects_outside_points_and_zero_terms() {
        assert!(analytical_solution(1.1, 0.5, 0.5, &SeriesParams::default()).is_err());
        assert!(analytical_solution(0.5, -0.1, 0.5, &SeriesParams::default()).is_err());
        assert!(analytical_solution(f64::NAN, 0.5, 0.5, &SeriesParams::default()).is_err());
        assert!(analytical_solution(0.5, 0.5, 0.5, &SeriesParams { terms: 0 }).is_err());
    }

    #[test]
    fn grid_matches_pointwise() {
        let dims = BoxDims::new(4, 5, 3).unwrap();
        let p = SeriesParams { terms: 80 };
        let grid = analytical_nodal_values(&dims, &p).unwrap();
        for g in 0..dims.num_nodes() {
            let [x, y, z] = dims.node_coords(g);
            let point = analytical_solution(x, y, z, &p).unwrap();
            assert!((grid[g] - point).abs() < 1e-13, "node {g}: {} vs {point}", grid[g]);
        }
    }

    #[test]
    fn self_comparison_has_zero_error() {
        let dims = BoxDims::cube(4).unwrap();
        let p = SeriesParams::default();
        let exact = analytical_nodal_values(&dims, &p).unwrap();
        let e = solution_error(&exact, &dims, &p).unwrap();
        assert_eq!(e, ErrorNorms { max: 0.0, rms: 0.0 });
    }

    #[test]
    fn zero_solution_error_is_max_value() {
        let dims = BoxDims::cube(3).unwrap();
        let p = SeriesParams::default();
        let exact = analytical_nodal_values(&dims, &p).unwrap();
        let e = solution_error(&vec![0.0; dims.num_nodes()], &dims, &p).unwrap();
        let max_exact = (0..dims.num_nodes())
            .filter(|&g| is_evaluated(&dims, g))
            .map(|g| exact[g].abs())
            .fold(0.0, f64::max);
        assert_eq!(e.max, max_exact);
        assert_eq!(e.max, 1.0);
    }

    #[test]
    fn length_mismatch() {
        let dims = BoxDims::cube(2).unwrap();
        assert!(solution_error(&[0.0; 5], &dims, &SeriesParams::default()).is_err());
    }

    #[test]
    fn excludes_only_x1_face_edges() {
        let dims = BoxDims::cube(2).unwrap();
        let skipped: Vec<_> = (0..27).filter(|&g| !is_evaluated(&dims, g)).collect();
        assert_eq!(skipped.len(), 8);
        assert!(skipped.iter().all(|&g| dims.node_index(g)[0] == 2));
    }
}
