use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Conditional independence graph over `vertex_count` coordinates.
///
/// Edges are unordered pairs stored as `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CIGraph {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl CIGraph {
    pub fn empty(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(vertex_count: usize) -> Self {
        let edges = (0..vertex_count)
            .flat_map(|i| (i + 1..vertex_count).map(move |j| (i, j)))
            .collect();
        Self { vertex_count, edges }
    }

    pub fn from_edges<I>(vertex_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(vertex_count);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Adds an edge; re-adding an existing edge is a no-op.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidData(format!("self-loop at vertex {i}")));
        }
        if i.max(j) >= self.vertex_count {
            return Err(Error::InvalidData(format!(
                "edge ({i}, {j}) out of range for {} vertices",
                self.vertex_count
            )));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn max_edges(&self) -> usize {
        self.vertex_count * self.vertex_count.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.max_edges()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(i, j)| i == v || j == v).count()
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.vertex_count {
            return Err(Error::mismatch(self.vertex_count, perm.len()));
        }
        Self::from_edges(self.vertex_count, self.edges().map(|(i, j)| (perm[i], perm[j])))
    }
}

/// Edge `(i, j)` whenever `|omega_ij| > threshold`, `i != j`.
pub fn graph_from_precision(omega: &DMatrix<f64>, threshold: f64) -> CIGraph {
    let d = omega.nrows();
    let edges = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .filter(|&(i, j)| omega[(i, j)].abs() > threshold || omega[(j, i)].abs() > threshold)
        .collect();
    CIGraph {
        vertex_count: d,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_precision_has_no_edges() {
        let g = graph_from_precision(&DMatrix::identity(4, 4), 1e-8);
        assert!(g.is_empty());
        assert_eq!(g.vertex_count(), 4);
    }

    #[test]
    fn dense_precision_is_complete() {
        let g = graph_from_precision(&DMatrix::from_element(5, 5, 1.0), 1e-8);
        assert_eq!(g.edge_count(), 10);
        assert!(g.is_complete());
    }

    #[test]
    fn single_zero_gives_path() {
        let omega = DMatrix::from_row_slice(3, 3, &[2.0, -0.5, 0.0, -0.5, 2.0, -0.7, 0.0, -0.7, 2.0]);
        let g = graph_from_precision(&omega, 1e-8);
        assert_eq!(g, CIGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap());
    }

    #[test]
    fn threshold_is_strict() {
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, 1e-8, 1e-8, 1.0]);
        assert!(graph_from_precision(&omega, 1e-8).is_empty());
    }

    #[test]
    fn rejects_self_loops_and_dedups() {
        assert!(CIGraph::from_edges(3, [(1, 1)]).is_err());
        assert!(CIGraph::from_edges(3, [(0, 3)]).is_err());
        let g = CIGraph::from_edges(3, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }
}
