//! Compatibility graph: one vertex per measurement, an edge wherever two
//! measurements appear together in a subset that passed its compatibility test.

mod bits;
mod build;
mod io;
mod subsets;

pub use build::build_graph;
pub use io::{parse_edge_list, write_edge_list};
pub use subsets::{binomial, enumerate_subsets, SubsetBudget, SubsetPlan, DEFAULT_MAX_SUBSETS};

pub(crate) use bits::BitMatrix;

use crate::error::GraphError;

/// Undirected simple graph in compressed sparse row form with sorted
/// neighbor lists. Vertex `i` is measurement `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    sampled: bool,
}

impl CompatGraph {
    /// Builds a graph from an arbitrary edge iterator. Duplicate edges and
    /// either orientation are accepted; self-loops and out-of-range
    /// endpoints are rejected.
    pub fn from_edges<I>(n_vertices: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n_vertices];
        for (i, j) in edges {
            if i == j || i >= n_vertices || j >= n_vertices {
                return Err(GraphError::InvalidEdge(i, j));
            }
            adj[i].push(j as u32);
            adj[j].push(i as u32);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::from_sorted_adjacency(adj, false))
    }

    pub(crate) fn from_sorted_adjacency(adj: Vec<Vec<u32>>, sampled: bool) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        offsets.push(0);
        let total: usize = adj.iter().map(Vec::len).sum();
        let mut neighbors = Vec::with_capacity(total);
        for list in adj {
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len());
        }
        CompatGraph {
            offsets,
            neighbors,
            sampled,
        }
    }

    pub(crate) fn from_bits(bits: &BitMatrix, sampled: bool) -> Self {
        let n = bits.size();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for i in 0..n {
            neighbors.extend(bits.row_iter(i).map(|j| j as u32));
            offsets.push(neighbors.len());
        }
        CompatGraph {
            offsets,
            neighbors,
            sampled,
        }
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n)
            .map(|i| (0..n as u32).filter(|&j| j as usize != i).collect())
            .collect();
        Self::from_sorted_adjacency(adj, false)
    }

    pub fn n_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_vertices())
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n_vertices() && self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Edges as (i, j) with i < j, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_vertices()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// True when the graph was built from a random sample of subsets rather
    /// than all of them.
    pub fn sampled(&self) -> bool {
        self.sampled
    }

    /// Whether every pair in `vertices` is adjacent.
    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        vertices.iter().enumerate().all(|(k, &i)| {
            vertices[k + 1..]
                .iter()
                .all(|&j| i != j && self.has_edge(i, j))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_edges_symmetrizes_and_dedups() {
        let g = CompatGraph::from_edges(4, [(0, 1), (1, 0), (2, 1), (3, 2)]).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(g.has_edge(2, 3) && g.has_edge(3, 2));
        assert!(!g.has_edge(0, 3));
        let degree_sum: usize = (0..4).map(|v| g.degree(v)).sum();
        assert_eq!(degree_sum, 2 * g.edge_count());
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn from_edges_rejects_loops_and_range() {
        assert!(CompatGraph::from_edges(3, [(1, 1)]).is_err());
        assert!(CompatGraph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn complete_graph() {
        let g = CompatGraph::complete(5);
        assert_eq!(g.edge_count(), 10);
        assert!(g.is_clique(&[0, 1, 2, 3, 4]));
    }
}
