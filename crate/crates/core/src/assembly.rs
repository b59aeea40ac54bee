//! Element diffusion operator, scatter-add into the rank-local CRS system,
//! and symmetric Dirichlet elimination.

use crate::domain::{BoundaryCondition, BoxDims, BoxPartition, RankDomain};
use crate::error::{Error, Result};
use crate::sparse::CrsMatrix;

/// One hexahedral element: node ids and coordinates in standard hex order
/// (x-fastest), with its 8x8 diffusion matrix and source vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ElemData {
    pub node_ids: [usize; 8],
    pub coords: [[f64; 3]; 8],
    pub diffusion_matrix: [[f64; 8]; 8],
    pub source_vector: [f64; 8],
}

impl ElemData {
    pub fn new(node_ids: [usize; 8], coords: [[f64; 3]; 8]) -> Self {
        ElemData {
            node_ids,
            coords,
            diffusion_matrix: [[0.0; 8]; 8],
            source_vector: [0.0; 8],
        }
    }

    /// Ids and coordinates of mesh element `(ex, ey, ez)`.
    pub fn from_mesh(dims: &BoxDims, ex: usize, ey: usize, ez: usize) -> Self {
        let node_ids = dims.element_nodes(ex, ey, ez);
        Self::new(node_ids, node_ids.map(|id| dims.node_coords(id)))
    }

    /// Edge lengths of the axis-aligned box spanned by the nodes.
    fn edges(&self) -> Result<[f64; 3]> {
        let lo = self.coords[0];
        let hi = self.coords[7];
        for (a, c) in self.coords.iter().enumerate() {
            for axis in 0..3 {
                let want = if (a >> axis) & 1 == 1 { hi[axis] } else { lo[axis] };
                if c[axis] != want {
                    return Err(Error::DegenerateElement(format!(
                        "node {a} at {c:?} is not a corner of the box {lo:?}..{hi:?}"
                    )));
                }
            }
        }
        let h = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        if h.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::DegenerateElement(format!("edge lengths {h:?}")));
        }
        Ok(h)
    }
}

/// Fills the diffusion matrix with `∫ ∇φi·∇φj` over the element (2x2x2
/// Gauss rule, exact for trilinear bases on boxes) and zeroes the source.
pub fn compute_element_matrix_and_vector(elem: &mut ElemData) -> Result<()> {
    let h = elem.edges()?;
    let g = 1.0 / 3f64.sqrt();
    let gauss = [-g, g];
    let det_j = h[0] * h[1] * h[2] / 8.0;
    let scale = [2.0 / h[0], 2.0 / h[1], 2.0 / h[2]];

    let mut k = [[0.0; 8]; 8];
    for &zeta in &gauss {
        for &eta in &gauss {
            for &xi in &gauss {
                let q = [xi, eta, zeta];
                let mut grad = [[0.0; 3]; 8];
                for (a, ga) in grad.iter_mut().enumerate() {
                    // reference node coordinate in {-1, 1} per axis
                    let s = [0, 1, 2].map(|axis| if (a >> axis) & 1 == 1 { 1.0 } else { -1.0 });
                    let f = [0, 1, 2].map(|axis| 1.0 + s[axis] * q[axis]);
                    ga[0] = 0.125 * s[0] * f[1] * f[2] * scale[0];
                    ga[1] = 0.125 * f[0] * s[1] * f[2] * scale[1];
                    ga[2] = 0.125 * f[0] * f[1] * s[2] * scale[2];
                }
                for i in 0..8 {
                    for j in i..8 {
                        let d = grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1] + grad[i][2] * grad[j][2];
                        k[i][j] += d * det_j;
                    }
                }
            }
        }
    }
    for i in 0..8 {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    elem.diffusion_matrix = k;
    elem.source_vector = [0.0; 8];
    Ok(())
}

/// Position of global column `gid` in local row `i`, whose entries are
/// ordered by global id.
fn locate(a: &CrsMatrix, dom: &RankDomain, i: usize, gid: usize) -> Option<usize> {
    let cols = a.row(i).0;
    cols.binary_search_by_key(&gid, |&c| dom.local_to_global(c as usize))
        .ok()
        .map(|k| a.ptr[i] + k)
}

/// Adds the element's matrix and vector into the rows this rank owns.
pub fn sum_into_global(
    elem: &ElemData,
    a: &mut CrsMatrix,
    b: &mut [f64],
    dom: &RankDomain,
) -> Result<()> {
    let owned = dom.num_owned();
    for (i, &row_gid) in elem.node_ids.iter().enumerate() {
        let row = match dom.global_to_local(row_gid) {
            Some(l) if l < owned => l,
            _ => continue,
        };
        for (j, &col_gid) in elem.node_ids.iter().enumerate() {
            let k = locate(a, dom, row, col_gid)
                .ok_or(Error::StructuralMiss { row: row_gid, col: col_gid })?;
            a.val[k] += elem.diffusion_matrix[i][j];
        }
        b[row] += elem.source_vector[i];
    }
    Ok(())
}

/// Assembles every element touching `rank`'s owned nodes into `a` (which
/// must carry the stencil pattern) and returns the right-hand side.
///
/// Elements are visited in global element order, so every matrix entry
/// accumulates its contributions in the same order on any rank count.
pub fn assemble(partition: &BoxPartition, rank: usize, a: &mut CrsMatrix) -> Result<Vec<f64>> {
    let dims = partition.dims;
    let dom = partition.rank(rank);
    let mut b = vec![0.0; a.nrows()];
    let region = dom.touching_elements();
    for ez in region.lo[2]..region.hi[2] {
        for ey in region.lo[1]..region.hi[1] {
            for ex in region.lo[0]..region.hi[0] {
                let mut elem = ElemData::from_mesh(&dims, ex, ey, ez);
                compute_element_matrix_and_vector(&mut elem)?;
                sum_into_global(&elem, a, &mut b, dom)?;
            }
        }
    }
    Ok(b)
}

/// Symmetric Dirichlet elimination on the owned rows of `a`.
///
/// Constrained rows become unit rows with `b = value`; in every other row,
/// couplings to constrained columns move to the right-hand side and are
/// zeroed. Entries stay in the pattern as explicit zeros.
pub fn impose_dirichlet(
    a: &mut CrsMatrix,
    b: &mut [f64],
    bc: &BoundaryCondition,
    dom: &RankDomain,
) -> Result<()> {
    if b.len() != a.nrows() {
        return Err(Error::Dimension(format!("b has {} entries for {} rows", b.len(), a.nrows())));
    }
    let col_value: Vec<Option<f64>> =
        (0..a.ncols).map(|l| bc.value(dom.local_to_global(l))).collect();

    for i in 0..a.nrows() {
        let row_gid = a.rows[i];
        let (cols, vals) = a.row_mut(i);
        if let Some(v) = bc.value(row_gid) {
            for (&c, val) in cols.iter().zip(vals.iter_mut()) {
                *val = if dom.local_to_global(c as usize) == row_gid { 1.0 } else { 0.0 };
            }
            b[i] = v;
        } else {
            for (&c, val) in cols.iter().zip(vals.iter_mut()) {
                if let Some(v) = col_value[c as usize] {
                    b[i] -= *val * v;
                    *val = 0.0;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{dirichlet_rows, rcb_partition};
    use crate::sparse::generate_structure;

    /// Closed form: Kronecker sum of 1D stiffness and mass matrices.
    fn closed_form(h: [f64; 3]) -> [[f64; 8]; 8] {
        let stiff = |h: f64, a: usize, b: usize| if a == b { 1.0 / h } else { -1.0 / h };
        let mass = |h: f64, a: usize, b: usize| if a == b { h / 3.0 } else { h / 6.0 };
        let mut k = [[0.0; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                let bi = [i & 1, (i >> 1) & 1, (i >> 2) & 1];
                let bj = [j & 1, (j >> 1) & 1, (j >> 2) & 1];
                k[i][j] = stiff(h[0], bi[0], bj[0]) * mass(h[1], bi[1], bj[1]) * mass(h[2], bi[2], bj[2])
                    + mass(h[0], bi[0], bj[0]) * stiff(h[1], bi[1], bj[1]) * mass(h[2], bi[2], bj[2])
                    + mass(h[0], bi[0], bj[0]) * mass(h[1], bi[1], bj[1]) * stiff(h[2], bi[2], bj[2]);
            }
        }
        k
    }

    /// Brute-force midpoint rule on an n^3 sub-grid of the element.
    fn midpoint_oracle(h: [f64; 3], n: usize) -> [[f64; 8]; 8] {
        let mut k = [[0.0; 8]; 8];
        let cell = [h[0] / n as f64, h[1] / n as f64, h[2] / n as f64];
        for cz in 0..n {
            for cy in 0..n {
                for cx in 0..n {
                    let p = [
                        (cx as f64 + 0.5) / n as f64,
                        (cy as f64 + 0.5) / n as f64,
                        (cz as f64 + 0.5) / n as f64,
                    ];
                    let grad = |a: usize| {
                        let b = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
                        let f = |ax: usize| if b[ax] == 1 { p[ax] } else { 1.0 - p[ax] };
                        let d = |ax: usize| if b[ax] == 1 { 1.0 / h[ax] } else { -1.0 / h[ax] };
                        [d(0) * f(1) * f(2), f(0) * d(1) * f(2), f(0) * f(1) * d(2)]
                    };
                    let vol = cell[0] * cell[1] * cell[2];
                    for i in 0..8 {
                        let gi = grad(i);
                        for j in 0..8 {
                            let gj = grad(j);
                            k[i][j] += (gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2]) * vol;
                        }
                    }
                }
            }
        }
        k
    }

    fn box_elem(h: [f64; 3]) -> ElemData {
        let coords = std::array::from_fn(|a| {
            [0, 1, 2].map(|ax| if (a >> ax) & 1 == 1 { 0.25 + h[ax] } else { 0.25 })
        });
        ElemData::new([0, 1, 2, 3, 4, 5, 6, 7], coords)
    }

    #[test]
    fn cube_entries() {
        let h = 0.5;
        let mut e = box_elem([h; 3]);
        compute_element_matrix_and_vector(&mut e).unwrap();
        let k = e.diffusion_matrix;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-15;
        assert!(close(k[0][0], h / 3.0));
        assert!(close(k[0][1], 0.0)); // edge neighbour
        assert!(close(k[0][3], -h / 12.0)); // face diagonal
        assert!(close(k[0][7], -h / 12.0)); // body diagonal
        assert_eq!(e.source_vector, [0.0; 8]);
    }

    #[test]
    fn matches_closed_form_and_quadrature_oracle() {
        for h in [[0.5, 0.5, 0.5], [0.1, 0.25, 1.0 / 3.0], [2.0, 0.01, 0.7]] {
            let mut e = box_elem(h);
            compute_element_matrix_and_vector(&mut e).unwrap();
            let exact = closed_form(h);
            let brute = midpoint_oracle(h, 24);
            let scale = exact.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..8 {
                for j in 0..8 {
                    let got = e.diffusion_matrix[i][j];
                    assert!((got - exact[i][j]).abs() <= 1e-14 * scale, "{i},{j}: {got} vs {}", exact[i][j]);
                    // midpoint error is O(cell^2)
                    assert!((got - brute[i][j]).abs() <= 1e-3 * scale);
                }
            }
        }
    }

    #[test]
    fn rows_sum_to_zero_and_symmetric() {
        let mut e = box_elem([0.3, 0.7, 0.11]);
        compute_element_matrix_and_vector(&mut e).unwrap();
        let k = e.diffusion_matrix;
        for i in 0..8 {
            assert!(k[i].iter().sum::<f64>().abs() < 1e-14);
            for j in 0..8 {
                assert_eq!(k[i][j], k[j][i]);
            }
        }
    }

    #[test]
    fn rejects_degenerate() {
        let mut e = box_elem([0.0, 1.0, 1.0]);
        assert!(compute_element_matrix_and_vector(&mut e).is_err());
        let mut e = box_elem([1.0, 1.0, 1.0]);
        e.coords[5][1] += 0.1;
        assert!(compute_element_matrix_and_vector(&mut e).is_err());
    }

    #[test]
    fn single_scatter_reproduces_element() {
        let part = rcb_partition(BoxDims::cube(1).unwrap(), 1).unwrap();
        let mut a = generate_structure(&part, 0);
        let b = assemble(&part, 0, &mut a).unwrap();
        let mut e = ElemData::from_mesh(&part.dims, 0, 0, 0);
        compute_element_matrix_and_vector(&mut e).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(a.get(i, j).unwrap(), e.diffusion_matrix[i][j]);
            }
        }
        assert_eq!(b, vec![0.0; 8]);
    }

    #[test]
    fn shared_face_doubles_diagonal() {
        let dims = BoxDims::new(2, 1, 1).unwrap();
        let part = rcb_partition(dims, 1).unwrap();
        let mut a = generate_structure(&part, 0);
        assemble(&part, 0, &mut a).unwrap();
        let h = [0.5, 1.0, 1.0];
        let single = closed_form(h)[0][0];
        // node (1,0,0) is shared by both elements
        let shared = dims.node_id(1, 0, 0);
        assert!((a.get(shared, shared).unwrap() - 2.0 * single).abs() < 1e-15);
    }

    #[test]
    fn missing_pattern_entry_is_fatal() {
        let part = rcb_partition(BoxDims::cube(1).unwrap(), 1).unwrap();
        let mut a = CrsMatrix::identity(8);
        let mut b = vec![0.0; 8];
        let mut e = ElemData::from_mesh(&part.dims, 0, 0, 0);
        compute_element_matrix_and_vector(&mut e).unwrap();
        let err = sum_into_global(&e, &mut a, &mut b, part.rank(0)).unwrap_err();
        assert!(matches!(err, Error::StructuralMiss { .. }));
    }

    #[test]
    fn fully_constrained_becomes_identity() {
        let dims = BoxDims::cube(1).unwrap();
        let part = rcb_partition(dims, 1).unwrap();
        let mut a = generate_structure(&part, 0);
        let mut b = assemble(&part, 0, &mut a).unwrap();
        let bc = dirichlet_rows(dims);
        impose_dirichlet(&mut a, &mut b, &bc, part.rank(0)).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(a.get(i, j).unwrap(), if i == j { 1.0 } else { 0.0 });
            }
        }
        let expect: Vec<f64> = (0..8).map(|g| bc.value(g).unwrap()).collect();
        assert_eq!(b, expect);
    }
}
