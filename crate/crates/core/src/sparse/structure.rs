use crate::domain::BoxPartition;

use super::crs::{CrsMatrix, Index};

/// Zero-valued CRS pattern of `rank`'s owned rows from the 27-point stencil.
///
/// Rows follow the owned-node order. Within a row, entries are the in-box
/// stencil neighbours in ascending global id, stored as local indices.
pub fn generate_structure(partition: &BoxPartition, rank: usize) -> CrsMatrix {
    let dims = partition.dims;
    let dom = partition.rank(rank);
    let counts = dims.node_counts();
    let m = dom.num_owned();

    let mut ptr = Vec::with_capacity(m + 1);
    let mut col: Vec<Index> = Vec::with_capacity(27 * m);
    ptr.push(0);
    for &gid in dom.owned() {
        let [ix, iy, iz] = dims.node_index(gid);
        for z in iz.saturating_sub(1)..(iz + 2).min(counts[2]) {
            for y in iy.saturating_sub(1)..(iy + 2).min(counts[1]) {
                for x in ix.saturating_sub(1)..(ix + 2).min(counts[0]) {
                    let neighbour = dims.node_id(x, y, z);
                    let local = dom
                        .global_to_local(neighbour)
                        .expect("stencil neighbours of owned nodes are local");
                    col.push(local as Index);
                }
            }
        }
        ptr.push(col.len());
    }
    let nnz = col.len();
    CrsMatrix {
        rows: dom.owned().to_vec(),
        ncols: dom.num_local(),
        ptr,
        col,
        val: vec![0.0; nnz],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{rcb_partition, BoxDims};

    #[test]
    fn two_cube_pattern() {
        let part = rcb_partition(BoxDims::cube(2).unwrap(), 1).unwrap();
        let a = generate_structure(&part, 0);
        assert_eq!(a.nrows(), 27);
        assert_eq!(a.nnz(), 343);
        assert_eq!(a.row(13).0.len(), 27);
        assert!(a.has_sorted_rows());
        a.validate().unwrap();
    }

    #[test]
    fn single_element_pattern() {
        let part = rcb_partition(BoxDims::cube(1).unwrap(), 1).unwrap();
        let a = generate_structure(&part, 0);
        assert_eq!(a.nrows(), 8);
        assert_eq!(a.nnz(), 64);
        assert!((0..8).all(|i| a.row(i).0.len() == 8));
    }

    #[test]
    fn nnz_matches_stencil_count() {
        // per axis: two end nodes with 2 neighbours, k-1 interior nodes with 3
        for n in [[2, 3, 4], [5, 1, 2]] {
            let dims = BoxDims::new(n[0], n[1], n[2]).unwrap();
            let per_axis = |k: usize| 3 * k + 1;
            let expect = per_axis(n[0]) * per_axis(n[1]) * per_axis(n[2]);
            let part = rcb_partition(dims, 1).unwrap();
            assert_eq!(generate_structure(&part, 0).nnz(), expect);
        }
    }

    #[test]
    fn multi_rank_rows_cover_global_pattern() {
        let dims = BoxDims::new(4, 3, 3).unwrap();
        let global = generate_structure(&rcb_partition(dims, 1).unwrap(), 0);
        let part = rcb_partition(dims, 4).unwrap();
        let mut total = 0;
        for r in 0..4 {
            let a = generate_structure(&part, r);
            let dom = part.rank(r);
            for i in 0..a.nrows() {
                let g = a.rows[i];
                let cols: Vec<usize> = a.row(i).0.iter().map(|&c| dom.local_to_global(c as usize)).collect();
                let expect: Vec<usize> = global.row(g).0.iter().map(|&c| c as usize).collect();
                assert_eq!(cols, expect);
            }
            total += a.nrows();
        }
        assert_eq!(total, dims.num_nodes());
    }
}
