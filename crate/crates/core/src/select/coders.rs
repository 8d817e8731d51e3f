//! Graph description-length coders, selectable by name.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use statrs::function::factorial::ln_binomial;

use super::graph::CIGraph;
use crate::error::{Error, Result};

/// Codelength in bits of a conditional independence graph.
pub trait GraphCoder: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn codelength(&self, graph: &CIGraph) -> f64;
}

/// Two-part code: the edge count uniformly over `0..=E_max`, then the edge
/// set uniformly among the `C(E_max, |E|)` sets of that size.
#[derive(Clone, Copy, Debug, Default)]
pub struct EdgeCountCoder;

impl GraphCoder for EdgeCountCoder {
    fn name(&self) -> &'static str {
        "edge-count"
    }

    fn codelength(&self, graph: &CIGraph) -> f64 {
        let e_max = graph.max_edges() as u64;
        let e = graph.edge_count() as u64;
        let count_bits = ((e_max + 1) as f64).log2();
        count_bits + ln_binomial(e_max, e) / std::f64::consts::LN_2
    }
}

/// One bit per vertex pair.
#[derive(Clone, Copy, Debug, Default)]
pub struct AdjacencyCoder;

impl GraphCoder for AdjacencyCoder {
    fn name(&self) -> &'static str {
        "adjacency"
    }

    fn codelength(&self, graph: &CIGraph) -> f64 {
        graph.max_edges() as f64
    }
}

/// `L(G) = log2(E_max + 1) + log2 C(E_max, |E|)`.
pub fn graph_codelength(graph: &CIGraph) -> f64 {
    EdgeCountCoder.codelength(graph)
}

#[derive(Clone, Debug)]
pub struct GraphCoderRegistry {
    coders: BTreeMap<&'static str, Arc<dyn GraphCoder>>,
}

impl GraphCoderRegistry {
    pub const DEFAULT: &'static str = "edge-count";

    pub fn empty() -> Self {
        Self {
            coders: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(EdgeCountCoder));
        r.register(Arc::new(AdjacencyCoder));
        r
    }

    /// Registers `coder` under its name, replacing any previous entry.
    pub fn register(&mut self, coder: Arc<dyn GraphCoder>) {
        self.coders.insert(coder.name(), coder);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn GraphCoder>> {
        self.coders.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: "graph coder",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.coders.keys().copied()
    }
}

impl Default for GraphCoderRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_and_complete_three_vertex_graphs_cost_two_bits() {
        assert_relative_eq!(graph_codelength(&CIGraph::empty(3)), 2.0, epsilon = 1e-12);
        assert_relative_eq!(graph_codelength(&CIGraph::complete(3)), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn four_vertices_two_edges() {
        let g = CIGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        // C(6, 2) = 15
        let oracle = 7f64.log2() + 15f64.log2();
        assert_relative_eq!(graph_codelength(&g), oracle, epsilon = 1e-10);
        assert!((graph_codelength(&g) - 6.714).abs() < 1e-3);
    }

    #[test]
    fn large_graphs_do_not_overflow() {
        let g = CIGraph::from_edges(200, (0..150).map(|i| (i, i + 1))).unwrap();
        let bits = graph_codelength(&g);
        assert!(bits.is_finite() && bits > 0.0);
    }

    #[test]
    fn registry_lookup() {
        let r = GraphCoderRegistry::with_builtins();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["adjacency", "edge-count"]);
        assert_eq!(r.get("edge-count").unwrap().name(), "edge-count");
        assert_eq!(r.get("adjacency").unwrap().codelength(&CIGraph::empty(5)), 10.0);
        assert!(matches!(r.get("motif"), Err(Error::UnknownStrategy { .. })));
    }

    #[derive(Debug)]
    struct Flat;
    impl GraphCoder for Flat {
        fn name(&self) -> &'static str {
            "flat"
        }
        fn codelength(&self, _: &CIGraph) -> f64 {
            1.0
        }
    }

    #[test]
    fn custom_coders_can_be_registered() {
        let mut r = GraphCoderRegistry::with_builtins();
        r.register(Arc::new(Flat));
        assert_eq!(r.get("flat").unwrap().codelength(&CIGraph::complete(9)), 1.0);
    }
}
