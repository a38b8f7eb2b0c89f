//! Undirected simple graph with a directed-edge index for message passing.
//!
//! Edge messages live on *directed* edges. We store the graph in CSR form
//! and give the directed edge `i -> neighbors(i)[k]` the id of its CSR slot,
//! so the `2|E|` directed messages pack into one flat vector. `reciprocal`
//! maps each slot `(i -> j)` to the slot of `(j -> i)`, which is all the
//! nonbacktracking updates need.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    /// Sorted unordered edges `(i, j)` with `i < j`.
    edges: Vec<(u32, u32)>,
    /// CSR offsets, length `n + 1`.
    offsets: Vec<usize>,
    /// Neighbor lists, ascending within each node.
    neighbors: Vec<u32>,
    /// For CSR slot `t` holding `(i -> j)`, the slot holding `(j -> i)`.
    reciprocal: Vec<u32>,
}

impl Graph {
    /// Builds the CSR index from a deduplicated sorted edge list.
    pub fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]), "edges must be sorted and unique");
        debug_assert!(edges.iter().all(|&(a, b)| a < b && (b as usize) < n));

        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for d in &degree {
            acc += d;
            offsets.push(acc);
        }
        let mut neighbors = vec![0u32; acc];
        let mut cursor = offsets[..n].to_vec();
        // Edges are sorted, so each neighbor list comes out ascending.
        for &(a, b) in &edges {
            neighbors[cursor[a as usize]] = b;
            cursor[a as usize] += 1;
        }
        for &(a, b) in &edges {
            neighbors[cursor[b as usize]] = a;
            cursor[b as usize] += 1;
        }
        // The second pass appends reverse neighbors after forward ones, so
        // neighbor lists are not globally sorted; sort each list to make the
        // layout canonical before wiring reciprocal slots.
        let mut g = Graph { n, edges, offsets, neighbors, reciprocal: Vec::new() };
        for i in 0..n {
            let (lo, hi) = (g.offsets[i], g.offsets[i + 1]);
            g.neighbors[lo..hi].sort_unstable();
        }
        g.reciprocal = vec![0u32; g.neighbors.len()];
        for i in 0..n {
            for t in g.offsets[i]..g.offsets[i + 1] {
                let j = g.neighbors[t] as usize;
                let back = g.slot(j, i as u32).expect("reciprocal edge must exist");
                g.reciprocal[t] = back as u32;
            }
        }
        g
    }

    /// CSR slot of directed edge `i -> j`, if present.
    pub fn slot(&self, i: usize, j: u32) -> Option<usize> {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        self.neighbors[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of directed edges, i.e. the length of an edge-message vector.
    pub fn num_directed(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Neighbors of `i` together with the slots of `(i -> j)` and `(j -> i)`.
    pub fn incident(&self, i: usize) -> impl Iterator<Item = Incidence> + '_ {
        (self.offsets[i]..self.offsets[i + 1]).map(move |t| Incidence {
            neighbor: self.neighbors[t] as usize,
            out_slot: t,
            in_slot: self.reciprocal[t] as usize,
        })
    }

    /// CSR slot range of node `i` (its outgoing directed edges).
    pub fn out_slots(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Head node of each directed slot, i.e. `slot_owner[t] = i` for `t` in
    /// `out_slots(i)`.
    pub fn slot_owner(&self) -> Vec<u32> {
        let mut owner = vec![0u32; self.neighbors.len()];
        for i in 0..self.n {
            for t in self.out_slots(i) {
                owner[t] = i as u32;
            }
        }
        owner
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.slot(i, j as u32).is_some()
    }
}

/// One incident edge of a node, with both directed slots.
#[derive(Debug, Clone, Copy)]
pub struct Incidence {
    pub neighbor: usize,
    /// Slot of `i -> neighbor`.
    pub out_slot: usize,
    /// Slot of `neighbor -> i`.
    pub in_slot: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_slots_invert() {
        // Path 0-1-2 plus edge 0-2: a triangle.
        let g = Graph::from_edges(3, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g.num_directed(), 6);
        for i in 0..3 {
            for inc in g.incident(i) {
                let j = inc.neighbor;
                assert_eq!(g.slot(i, j as u32).unwrap(), inc.out_slot);
                assert_eq!(g.slot(j, i as u32).unwrap(), inc.in_slot);
                assert_eq!(g.reciprocal[inc.in_slot] as usize, inc.out_slot);
            }
        }
    }

    #[test]
    fn degrees_and_edges() {
        let g = Graph::from_edges(4, vec![(0, 1), (1, 2)]);
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.degree(3), 0);
        assert!(g.has_edge(1, 2));
        assert!(!g.has_edge(0, 3));
    }
}
