use crate::domain::BoxPartition;
use crate::error::Result;

use super::Comm;

/// What one rank exchanges with a single neighbour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub rank: usize,
    /// Owned local indices whose values go to the neighbour, in the order
    /// the neighbour lists them as externals.
    pub send: Vec<usize>,
    /// External local indices filled from the neighbour.
    pub recv: Vec<usize>,
}

/// Point-to-point exchange pattern of one rank, built once from the partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HaloPlan {
    pub rank: usize,
    pub num_local: usize,
    /// Neighbours in ascending rank order.
    pub neighbors: Vec<Neighbor>,
}

impl HaloPlan {
    pub fn build(partition: &BoxPartition, rank: usize) -> Self {
        let me = partition.rank(rank);
        let owned = me.num_owned();
        let mut neighbors: Vec<Neighbor> = Vec::new();

        for other in 0..partition.num_ranks() {
            if other == rank {
                continue;
            }
            let recv: Vec<usize> = me
                .external_owner()
                .iter()
                .enumerate()
                .filter(|(_, &o)| o == other)
                .map(|(k, _)| owned + k)
                .collect();
            let them = partition.rank(other);
            let send: Vec<usize> = them
                .external()
                .iter()
                .zip(them.external_owner())
                .filter(|(_, &o)| o == rank)
                .map(|(&g, _)| me.global_to_local(g).expect("owned node has a local index"))
                .collect();
            if !recv.is_empty() || !send.is_empty() {
                neighbors.push(Neighbor { rank: other, send, recv });
            }
        }
        HaloPlan { rank, num_local: me.num_local(), neighbors }
    }
}

/// Fills the external entries of `x` with the owners' current values.
pub fn halo_exchange(comm: &mut Comm, plan: &HaloPlan, x: &mut [f64]) -> Result<()> {
    if x.len() != plan.num_local {
        return Err(comm.fail(format!(
            "halo vector has {} entries, plan expects {}",
            x.len(),
            plan.num_local
        )));
    }
    comm.count_halo_call();
    for n in &plan.neighbors {
        if !n.send.is_empty() {
            let values = n.send.iter().map(|&i| x[i]).collect();
            comm.send_halo(n.rank, values)?;
        }
    }
    for n in &plan.neighbors {
        if n.recv.is_empty() {
            continue;
        }
        let values = comm.recv_halo(n.rank)?;
        if values.len() != n.recv.len() {
            return Err(comm.fail(format!(
                "rank {} sent {} halo values, expected {}",
                n.rank,
                values.len(),
                n.recv.len()
            )));
        }
        for (&i, v) in n.recv.iter().zip(values) {
            x[i] = v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::RankGroup;
    use crate::domain::{rcb_partition, BoxDims};

    #[test]
    fn plans_are_pairwise_consistent() {
        let part = rcb_partition(BoxDims::new(5, 4, 3).unwrap(), 6).unwrap();
        let plans: Vec<_> = (0..6).map(|r| HaloPlan::build(&part, r)).collect();
        for plan in &plans {
            for n in &plan.neighbors {
                let back = plans[n.rank].neighbors.iter().find(|m| m.rank == plan.rank).unwrap();
                let sent: Vec<usize> =
                    n.send.iter().map(|&l| part.rank(plan.rank).local_to_global(l)).collect();
                let expected: Vec<usize> =
                    back.recv.iter().map(|&l| part.rank(n.rank).local_to_global(l)).collect();
                assert_eq!(sent, expected);
            }
        }
    }

    #[test]
    fn single_rank_is_noop() {
        let part = rcb_partition(BoxDims::cube(2).unwrap(), 1).unwrap();
        let plan = HaloPlan::build(&part, 0);
        assert!(plan.neighbors.is_empty());
        let out = RankGroup::new(1).unwrap().run(|c| {
            let mut x = vec![1.0; 27];
            halo_exchange(c, &plan, &mut x).unwrap();
            x
        });
        assert_eq!(out[0], vec![1.0; 27]);
    }

    #[test]
    fn exchange_matches_global_vector() {
        let dims = BoxDims::cube(2).unwrap();
        let part = rcb_partition(dims, 2).unwrap();
        let global: Vec<f64> = (0..dims.num_nodes()).map(|g| (g as f64).sqrt()).collect();
        let out = RankGroup::new(2).unwrap().run(|c| {
            let dom = part.rank(c.rank());
            let plan = HaloPlan::build(&part, c.rank());
            let mut x = vec![f64::NAN; dom.num_local()];
            for (l, &g) in dom.owned().iter().enumerate() {
                x[l] = global[g];
            }
            halo_exchange(c, &plan, &mut x).unwrap();
            let once = x.clone();
            halo_exchange(c, &plan, &mut x).unwrap();
            assert_eq!(once, x);
            x
        });
        for (r, x) in out.iter().enumerate() {
            let dom = part.rank(r);
            for (l, v) in x.iter().enumerate() {
                assert_eq!(*v, global[dom.local_to_global(l)]);
            }
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        let part = rcb_partition(BoxDims::cube(2).unwrap(), 1).unwrap();
        let plan = HaloPlan::build(&part, 0);
        let out = RankGroup::new(1).unwrap().run(|c| halo_exchange(c, &plan, &mut [0.0; 3]).is_err());
        assert!(out[0]);
    }
}
