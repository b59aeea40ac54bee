//! Structured hexahedral mesh of the unit cube and its decomposition into
//! per-rank sub-boxes.
//!
//! Nodes are numbered x-fastest: `id = ix + nodes_x * (iy + nodes_y * iz)`.
//! Elements use the same ordering over element indices. Boxes are half-open
//! ranges of element indices; the node range of a box is the closed range
//! `[lo, hi]` on every axis.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element counts per axis. Each axis spans `[0, 1]` with spacing `1 / n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl BoxDims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Config(format!(
                "element counts must be positive, got ({nx}, {ny}, {nz})"
            )));
        }
        Ok(BoxDims { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn elem_counts(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn node_counts(&self) -> [usize; 3] {
        [self.nx + 1, self.ny + 1, self.nz + 1]
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Mesh spacing `(hx, hy, hz)`.
    pub fn spacing(&self) -> [f64; 3] {
        [1.0 / self.nx as f64, 1.0 / self.ny as f64, 1.0 / self.nz as f64]
    }

    /// Node id of an in-range index triple.
    #[inline]
    pub fn node_id(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + (self.nx + 1) * (iy + (self.ny + 1) * iz)
    }

    #[inline]
    pub fn node_index(&self, id: usize) -> [usize; 3] {
        let nx1 = self.nx + 1;
        let ny1 = self.ny + 1;
        [id % nx1, (id / nx1) % ny1, id / (nx1 * ny1)]
    }

    pub fn node_coords(&self, id: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.node_index(id);
        [
            ix as f64 / self.nx as f64,
            iy as f64 / self.ny as f64,
            iz as f64 / self.nz as f64,
        ]
    }

    #[inline]
    pub fn element_id(&self, ex: usize, ey: usize, ez: usize) -> usize {
        ex + self.nx * (ey + self.ny * ez)
    }

    /// The eight node ids of element `(ex, ey, ez)` in standard hex order
    /// (x-fastest within the element).
    pub fn element_nodes(&self, ex: usize, ey: usize, ez: usize) -> [usize; 8] {
        let mut ids = [0; 8];
        for (a, id) in ids.iter_mut().enumerate() {
            *id = self.node_id(ex + (a & 1), ey + ((a >> 1) & 1), ez + ((a >> 2) & 1));
        }
        ids
    }
}

/// Global node id of `(ix, iy, iz)`, or `None` when the index lies outside
/// the node grid.
#[inline]
pub fn get_node_id(node_counts: [usize; 3], ix: i64, iy: i64, iz: i64) -> Option<usize> {
    let [nx, ny, nz] = node_counts.map(|n| n as i64);
    if ix < 0 || iy < 0 || iz < 0 || ix >= nx || iy >= ny || iz >= nz {
        return None;
    }
    Some((ix + nx * (iy + ny * iz)) as usize)
}

/// Half-open element ranges `[lo, hi)` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElemBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl ElemBox {
    pub fn global(dims: &BoxDims) -> Self {
        ElemBox { lo: [0; 3], hi: dims.elem_counts() }
    }

    pub fn len(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis]
    }

    pub fn num_elements(&self) -> usize {
        (0..3).map(|a| self.len(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.lo[a] == self.hi[a])
    }

    pub fn contains_element(&self, e: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= e[a] && e[a] < self.hi[a])
    }

    /// Closed node range test: `lo <= i <= hi` on every axis.
    pub fn contains_node(&self, n: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= n[a] && n[a] <= self.hi[a])
    }
}

/// Dense global-to-local lookup over a rank's node neighbourhood.
#[derive(Clone, Debug)]
struct LocalLookup {
    origin: [usize; 3],
    extent: [usize; 3],
    table: Vec<u32>,
}

impl LocalLookup {
    const NONE: u32 = u32::MAX;

    fn slot(&self, n: [usize; 3]) -> Option<usize> {
        let mut off = [0usize; 3];
        for a in 0..3 {
            if n[a] < self.origin[a] || n[a] >= self.origin[a] + self.extent[a] {
                return None;
            }
            off[a] = n[a] - self.origin[a];
        }
        Some(off[0] + self.extent[0] * (off[1] + self.extent[1] * off[2]))
    }
}

/// One rank's view of the mesh: owned nodes, external (ghost) nodes and the
/// local index map. Local indices list owned nodes first in global-id order,
/// then external nodes ordered by owning rank, then global id.
#[derive(Clone, Debug)]
pub struct RankDomain {
    pub rank: usize,
    pub bounds: ElemBox,
    owned: Vec<usize>,
    external: Vec<usize>,
    external_owner: Vec<usize>,
    lookup: LocalLookup,
    dims: BoxDims,
}

impl RankDomain {
    pub fn owned(&self) -> &[usize] {
        &self.owned
    }

    pub fn external(&self) -> &[usize] {
        &self.external
    }

    /// Owning rank of each entry of [`RankDomain::external`].
    pub fn external_owner(&self) -> &[usize] {
        &self.external_owner
    }

    pub fn num_owned(&self) -> usize {
        self.owned.len()
    }

    pub fn num_external(&self) -> usize {
        self.external.len()
    }

    pub fn num_local(&self) -> usize {
        self.owned.len() + self.external.len()
    }

    pub fn local_to_global(&self, local: usize) -> usize {
        if local < self.owned.len() {
            self.owned[local]
        } else {
            self.external[local - self.owned.len()]
        }
    }

    /// Global ids of all local indices, owned then external.
    pub fn local_to_global_map(&self) -> Vec<usize> {
        self.owned.iter().chain(self.external.iter()).copied().collect()
    }

    pub fn global_to_local(&self, global: usize) -> Option<usize> {
        let slot = self.lookup.slot(self.dims.node_index(global))?;
        match self.lookup.table[slot] {
            LocalLookup::NONE => None,
            l => Some(l as usize),
        }
    }

    pub fn is_owned(&self, global: usize) -> bool {
        self.global_to_local(global).is_some_and(|l| l < self.owned.len())
    }

    /// Element ranges whose elements touch at least one owned node's closed
    /// range, clamped to the mesh.
    pub fn touching_elements(&self) -> ElemBox {
        let counts = self.dims.elem_counts();
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.bounds.lo[a].saturating_sub(1);
            hi[a] = (self.bounds.hi[a] + 1).min(counts[a]);
        }
        ElemBox { lo, hi }
    }
}

/// Per-rank summary used in reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSummary {
    pub rank: usize,
    pub elem_lo: [usize; 3],
    pub elem_hi: [usize; 3],
    pub owned_nodes: usize,
    pub external_nodes: usize,
}

/// Result of recursive coordinate bisection: sub-boxes plus nodal ownership.
#[derive(Clone, Debug)]
pub struct BoxPartition {
    pub dims: BoxDims,
    pub boxes: Vec<ElemBox>,
    ranks: Vec<RankDomain>,
}

impl BoxPartition {
    pub fn num_ranks(&self) -> usize {
        self.boxes.len()
    }

    pub fn rank(&self, r: usize) -> &RankDomain {
        &self.ranks[r]
    }

    pub fn ranks(&self) -> &[RankDomain] {
        &self.ranks
    }

    /// Lowest rank whose closed node range contains the node.
    pub fn owner_of(&self, global: usize) -> usize {
        owner_in(&self.boxes, self.dims.node_index(global))
    }

    pub fn summary(&self) -> Vec<RankSummary> {
        self.ranks
            .iter()
            .map(|d| RankSummary {
                rank: d.rank,
                elem_lo: d.bounds.lo,
                elem_hi: d.bounds.hi,
                owned_nodes: d.num_owned(),
                external_nodes: d.num_external(),
            })
            .collect()
    }
}

fn owner_in(boxes: &[ElemBox], n: [usize; 3]) -> usize {
    boxes
        .iter()
        .position(|b| b.contains_node(n))
        .expect("every node lies in some sub-box")
}

/// Axes by decreasing length, ties broken x before y before z.
fn axes_by_length(len: [usize; 3]) -> [usize; 3] {
    let mut axes = [0, 1, 2];
    axes.sort_by_key(|&a| std::cmp::Reverse(len[a]));
    axes
}

/// Candidate cuts for `p` ranks on a box of shape `len`: the longest axis at
/// the proportional point first, then positions by distance from it, then the
/// remaining axes in the same manner.
fn candidate_cuts(len: [usize; 3], p: usize) -> impl Iterator<Item = (usize, usize)> {
    let left = p.div_ceil(2);
    axes_by_length(len).into_iter().flat_map(move |axis| {
        let n = len[axis];
        let target = ((2 * n * left + p) / (2 * p)).clamp(1, n.max(2) - 1);
        let mut cuts: Vec<usize> = (1..n).collect();
        cuts.sort_by_key(|&c| (c.abs_diff(target), c));
        cuts.into_iter().map(move |c| (axis, c))
    })
}

fn split_shape(len: [usize; 3], axis: usize, cut: usize) -> ([usize; 3], [usize; 3]) {
    let (mut l, mut r) = (len, len);
    l[axis] = cut;
    r[axis] = len[axis] - cut;
    (l, r)
}

/// Whether a box of shape `len` can be bisected down to `p` single-rank boxes.
fn feasible(len: [usize; 3], p: usize, memo: &mut HashMap<([usize; 3], usize), bool>) -> bool {
    if p == 1 {
        return true;
    }
    if len.iter().product::<usize>() < p {
        return false;
    }
    if let Some(&known) = memo.get(&(len, p)) {
        return known;
    }
    let ok = candidate_cuts(len, p).any(|(axis, cut)| {
        let (l, r) = split_shape(len, axis, cut);
        feasible(l, p.div_ceil(2), memo) && feasible(r, p / 2, memo)
    });
    memo.insert((len, p), ok);
    ok
}

fn bisect(
    b: ElemBox,
    p: usize,
    out: &mut Vec<ElemBox>,
    memo: &mut HashMap<([usize; 3], usize), bool>,
) -> Result<()> {
    if p == 1 {
        out.push(b);
        return Ok(());
    }
    let len = [b.len(0), b.len(1), b.len(2)];
    let (left_ranks, right_ranks) = (p.div_ceil(2), p / 2);
    let cut = candidate_cuts(len, p).find(|&(axis, cut)| {
        let (l, r) = split_shape(len, axis, cut);
        feasible(l, left_ranks, memo) && feasible(r, right_ranks, memo)
    });
    let Some((axis, cut)) = cut else {
        return Err(Error::Partition(format!("no bisection of box {b:?} into {p} non-empty boxes")));
    };
    let mut left = b;
    let mut right = b;
    left.hi[axis] = b.lo[axis] + cut;
    right.lo[axis] = b.lo[axis] + cut;
    bisect(left, left_ranks, out, memo)?;
    bisect(right, right_ranks, out, memo)
}

/// Recursive coordinate bisection of the element box among `p` ranks.
///
/// Each level gives `ceil(p/2)` ranks to the lower half and cuts the longest
/// axis at the proportional point. When that cut cannot be completed to a
/// partition with one non-empty box per rank, the nearest workable cut is
/// used instead; if none exists the call fails with `Error::Partition`.
pub fn rcb_partition(dims: BoxDims, p: usize) -> Result<BoxPartition> {
    if p == 0 {
        return Err(Error::Config("rank count must be positive".into()));
    }
    if p > dims.num_elements() {
        return Err(Error::Config(format!(
            "{p} ranks exceed the {} available elements",
            dims.num_elements()
        )));
    }
    let mut boxes = Vec::with_capacity(p);
    bisect(ElemBox::global(&dims), p, &mut boxes, &mut HashMap::new())?;
    let ranks = (0..p).map(|r| build_rank(&dims, &boxes, r)).collect();
    Ok(BoxPartition { dims, boxes, ranks })
}

fn build_rank(dims: &BoxDims, boxes: &[ElemBox], r: usize) -> RankDomain {
    let b = boxes[r];
    let nodes = dims.node_counts();

    // neighbourhood: closed node range grown by one layer
    let mut origin = [0; 3];
    let mut extent = [0; 3];
    for a in 0..3 {
        origin[a] = b.lo[a].saturating_sub(1);
        extent[a] = (b.hi[a] + 2).min(nodes[a]) - origin[a];
    }
    let cells = extent.iter().product();
    let mut owner = vec![usize::MAX; cells];
    let at = |i: usize, j: usize, k: usize| i + extent[0] * (j + extent[1] * k);

    for k in 0..extent[2] {
        for j in 0..extent[1] {
            for i in 0..extent[0] {
                owner[at(i, j, k)] =
                    owner_in(boxes, [origin[0] + i, origin[1] + j, origin[2] + k]);
            }
        }
    }

    let mut owned = Vec::new();
    let mut external: Vec<(usize, usize)> = Vec::new();
    for k in 0..extent[2] {
        for j in 0..extent[1] {
            for i in 0..extent[0] {
                let gid = dims.node_id(origin[0] + i, origin[1] + j, origin[2] + k);
                let o = owner[at(i, j, k)];
                if o == r {
                    owned.push(gid);
                    continue;
                }
                let touches_owned = stencil(i, j, k, extent).any(|(a, b2, c)| owner[at(a, b2, c)] == r);
                if touches_owned {
                    external.push((o, gid));
                }
            }
        }
    }
    external.sort_unstable();

    let mut table = vec![LocalLookup::NONE; cells];
    let lookup_slot = |gid: usize| {
        let n = dims.node_index(gid);
        at(n[0] - origin[0], n[1] - origin[1], n[2] - origin[2])
    };
    for (l, &gid) in owned.iter().enumerate() {
        table[lookup_slot(gid)] = l as u32;
    }
    for (l, &(_, gid)) in external.iter().enumerate() {
        table[lookup_slot(gid)] = (owned.len() + l) as u32;
    }

    RankDomain {
        rank: r,
        bounds: b,
        external_owner: external.iter().map(|e| e.0).collect(),
        external: external.iter().map(|e| e.1).collect(),
        owned,
        lookup: LocalLookup { origin, extent, table },
        dims: *dims,
    }
}

/// In-range 27-point neighbourhood (including the centre) of a grid point.
fn stencil(
    i: usize,
    j: usize,
    k: usize,
    extent: [usize; 3],
) -> impl Iterator<Item = (usize, usize, usize)> {
    let range = |c: usize, n: usize| c.saturating_sub(1)..(c + 2).min(n);
    range(k, extent[2]).flat_map(move |c| {
        range(j, extent[1]).flat_map(move |b| range(i, extent[0]).map(move |a| (a, b, c)))
    })
}

/// External node list of `rank`, ordered by owning rank then global id.
pub fn external_nodes(partition: &BoxPartition, rank: usize) -> &[usize] {
    partition.rank(rank).external()
}

/// Prescribed nodal values on the cube surface.
#[derive(Clone, Debug, Default)]
pub struct BoundaryCondition {
    entries: Vec<(usize, f64)>,
    index: HashMap<usize, f64>,
}

impl BoundaryCondition {
    pub fn from_entries(entries: Vec<(usize, f64)>) -> Self {
        let index = entries.iter().copied().collect();
        BoundaryCondition { entries, index }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, global: usize) -> Option<f64> {
        self.index.get(&global).copied()
    }
}

/// Every surface node once, in global-id order. Nodes on the `x = 1` plane
/// (edges and corners included) carry 1.0, all other surface nodes 0.0.
pub fn dirichlet_rows(dims: BoxDims) -> BoundaryCondition {
    let [nx, ny, nz] = dims.elem_counts();
    let mut entries = Vec::with_capacity(2 * ((nx + 1) * (ny + 1) + (ny + 1) * (nz + 1) + (nx + 1) * (nz + 1)));
    for iz in 0..=nz {
        for iy in 0..=ny {
            for ix in 0..=nx {
                let on_surface =
                    ix == 0 || ix == nx || iy == 0 || iy == ny || iz == 0 || iz == nz;
                if on_surface {
                    let value = if ix == nx { 1.0 } else { 0.0 };
                    entries.push((dims.node_id(ix, iy, iz), value));
                }
            }
        }
    }
    BoundaryCondition::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(n: [usize; 3]) -> BoxDims {
        BoxDims::new(n[0], n[1], n[2]).unwrap()
    }

    #[test]
    fn node_id_examples() {
        assert_eq!(get_node_id([3, 3, 3], 0, 0, 0), Some(0));
        assert_eq!(get_node_id([3, 3, 3], -1, 0, 0), None);
        assert_eq!(get_node_id([3, 3, 3], 0, 3, 0), None);
        // enumerate x-fastest and find position of (1,1,1)
        let mut pos = 0;
        'outer: for iz in 0..3 {
            for iy in 0..3 {
                for ix in 0..3 {
                    if (ix, iy, iz) == (1, 1, 1) {
                        break 'outer;
                    }
                    pos += 1;
                }
            }
        }
        assert_eq!(pos, 13);
        assert_eq!(get_node_id([3, 3, 3], 1, 1, 1), Some(pos));
    }

    #[test]
    fn node_id_is_bijection() {
        let d = dims([3, 2, 4]);
        let mut seen = vec![false; d.num_nodes()];
        for iz in 0..5 {
            for iy in 0..3 {
                for ix in 0..4 {
                    let id = get_node_id(d.node_counts(), ix, iy, iz).unwrap();
                    assert!(!seen[id]);
                    seen[id] = true;
                    assert_eq!(d.node_index(id), [ix as usize, iy as usize, iz as usize]);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(BoxDims::new(0, 1, 1).is_err());
    }

    #[test]
    fn rcb_examples() {
        let d = dims([4, 4, 4]);
        let p1 = rcb_partition(d, 1).unwrap();
        assert_eq!(p1.boxes, vec![ElemBox::global(&d)]);

        let p2 = rcb_partition(d, 2).unwrap();
        assert_eq!(p2.boxes[0], ElemBox { lo: [0, 0, 0], hi: [2, 4, 4] });
        assert_eq!(p2.boxes[1], ElemBox { lo: [2, 0, 0], hi: [4, 4, 4] });

        let p4 = rcb_partition(d, 4).unwrap();
        let expect = [
            ElemBox { lo: [0, 0, 0], hi: [2, 2, 4] },
            ElemBox { lo: [0, 2, 0], hi: [2, 4, 4] },
            ElemBox { lo: [2, 0, 0], hi: [4, 2, 4] },
            ElemBox { lo: [2, 2, 0], hi: [4, 4, 4] },
        ];
        assert_eq!(p4.boxes, expect);
    }

    #[test]
    fn rcb_rejects_too_many_ranks() {
        assert!(rcb_partition(dims([1, 1, 2]), 3).is_err());
        assert!(rcb_partition(dims([1, 1, 2]), 0).is_err());
        assert!(rcb_partition(dims([1, 1, 3]), 3).is_ok());
    }

    #[test]
    fn falls_back_when_the_longest_axis_cannot_be_cut() {
        // z has two-element slabs, so three ranks per half needs a y cut
        let part = rcb_partition(dims([1, 2, 3]), 6).unwrap();
        assert!(part.boxes[..3].iter().all(|b| b.lo[1] == 0 && b.hi[1] == 1));
        assert!(part.boxes.iter().all(|b| b.num_elements() == 1));
        // every cut of 1x3x3 leaves 3 or 6 elements, never 5 and 4
        assert!(matches!(rcb_partition(dims([1, 3, 3]), 9), Err(Error::Partition(_))));
    }

    #[test]
    fn odd_rank_counts_split_proportionally() {
        let part = rcb_partition(dims([6, 2, 2]), 3).unwrap();
        let sizes: Vec<_> = part.boxes.iter().map(|b| b.num_elements()).collect();
        assert_eq!(sizes, vec![8, 8, 8]);
    }

    #[test]
    fn dirichlet_single_element() {
        let bc = dirichlet_rows(dims([1, 1, 1]));
        assert_eq!(bc.len(), 8);
        let ones: Vec<_> = bc.entries().iter().filter(|e| e.1 == 1.0).map(|e| e.0).collect();
        assert_eq!(ones, vec![1, 3, 5, 7]);
    }

    #[test]
    fn dirichlet_two_cube() {
        let bc = dirichlet_rows(dims([2, 2, 2]));
        assert_eq!(bc.len(), 26);
        assert_eq!(bc.entries().iter().filter(|e| e.1 == 1.0).count(), 9);
        assert_eq!(bc.entries().iter().filter(|e| e.1 == 0.0).count(), 17);
        assert!(bc.value(13).is_none());
    }

    #[test]
    fn dirichlet_face_count() {
        for n in [[1, 2, 3], [4, 1, 2], [3, 3, 5]] {
            let bc = dirichlet_rows(dims(n));
            let ones = bc.entries().iter().filter(|e| e.1 == 1.0).count();
            assert_eq!(ones, (n[1] + 1) * (n[2] + 1));
        }
    }

    #[test]
    fn single_rank_has_no_externals() {
        let part = rcb_partition(dims([3, 3, 3]), 1).unwrap();
        assert!(external_nodes(&part, 0).is_empty());
        assert_eq!(part.rank(0).num_owned(), 64);
    }

    #[test]
    fn two_rank_externals_on_small_cube() {
        // split at element x = 1: rank 0 owns ix in {0,1}, rank 1 owns ix = 2
        let part = rcb_partition(dims([2, 2, 2]), 2).unwrap();
        let d = part.dims;
        let ext0: Vec<_> = external_nodes(&part, 0).to_vec();
        let expect0: Vec<_> =
            (0..27).filter(|&g| d.node_index(g)[0] == 2).collect();
        assert_eq!(ext0, expect0);
        let ext1: Vec<_> = external_nodes(&part, 1).to_vec();
        let expect1: Vec<_> =
            (0..27).filter(|&g| d.node_index(g)[0] == 1).collect();
        assert_eq!(ext1, expect1);
    }

    #[test]
    fn local_map_round_trips() {
        let part = rcb_partition(dims([4, 3, 5]), 4).unwrap();
        for dom in part.ranks() {
            for l in 0..dom.num_local() {
                let g = dom.local_to_global(l);
                assert_eq!(dom.global_to_local(g), Some(l));
            }
            assert_eq!(
                dom.external_owner().to_vec(),
                dom.external().iter().map(|&g| part.owner_of(g)).collect::<Vec<_>>()
            );
        }
    }
}
