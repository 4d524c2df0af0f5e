//! Synthetic motif datasets.
//!
//! All generators are pure functions of their seed.

use rand::Rng as _;

use super::{Dataset, Graph, Label, Task};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motif {
    /// 6-node ring.
    Cycle6,
    /// 3x3 lattice, 9 nodes and 12 edges.
    Grid3x3,
    /// Square a-b-c-d plus apex e joined to a and b: 5 nodes, 6 edges.
    House5,
}

impl Motif {
    pub fn num_nodes(self) -> usize {
        match self {
            Motif::Cycle6 => 6,
            Motif::Grid3x3 => 9,
            Motif::House5 => 5,
        }
    }

    pub fn edges(self) -> Vec<(usize, usize)> {
        match self {
            Motif::Cycle6 => (0..6).map(|i| (i, (i + 1) % 6)).collect(),
            Motif::Grid3x3 => {
                let mut e = Vec::new();
                for r in 0..3 {
                    for c in 0..3 {
                        let v = r * 3 + c;
                        if c + 1 < 3 {
                            e.push((v, v + 1));
                        }
                        if r + 1 < 3 {
                            e.push((v, v + 3));
                        }
                    }
                }
                e
            }
            Motif::House5 => vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)],
        }
    }

    pub fn graph(self) -> Graph {
        Graph::from_edges(self.num_nodes(), &self.edges()).expect("motif templates are valid")
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cycle" | "cycle6" => Some(Motif::Cycle6),
            "grid" | "grid3x3" => Some(Motif::Grid3x3),
            "house" | "house5" => Some(Motif::House5),
            _ => None,
        }
    }
}

/// Barabási–Albert graph: an (m+1)-clique grown by preferential attachment,
/// each new node linking to `m` distinct existing nodes chosen with
/// probability proportional to degree.
pub fn ba_graph(n: usize, m: usize, seed: u64) -> Result<Graph> {
    let mut rng = rng::stream(seed, "ba", n as u64);
    ba_graph_with(n, m, &mut rng)
}

fn ba_graph_with(n: usize, m: usize, rng: &mut Rng) -> Result<Graph> {
    if m == 0 || n <= m {
        return Err(Error::Param(format!("BA graph needs n > m >= 1, got n={n}, m={m}")));
    }
    let core = m + 1;
    let mut g = Graph::empty(n);
    // every edge endpoint, so uniform draws are degree-proportional
    let mut pool = Vec::with_capacity(2 * (core * m + (n - core) * m));
    for i in 0..core {
        for j in i + 1..core {
            g.set_edge(i, j, true);
            pool.push(i);
            pool.push(j);
        }
    }
    for v in core..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = pool[rng.gen_range(0..pool.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            g.set_edge(v, t, true);
            pool.push(v);
            pool.push(t);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeMotifConfig {
    /// Levels of the balanced binary tree (`2^depth - 1` nodes; 7 gives 127).
    pub depth: usize,
    pub motif: Motif,
    pub num_motifs: usize,
    pub seed: u64,
}

impl Default for TreeMotifConfig {
    fn default() -> Self {
        Self {
            depth: 7,
            motif: Motif::Cycle6,
            num_motifs: 30,
            seed: 0,
        }
    }
}

/// Balanced binary tree with motifs hung off uniformly chosen tree nodes by a
/// single edge. Node labels: 0 for tree nodes, 1 for motif members.
pub fn tree_motif(cfg: &TreeMotifConfig) -> Result<Dataset> {
    if cfg.depth < 2 {
        return Err(Error::Param(format!("tree depth must be >= 2, got {}", cfg.depth)));
    }
    let mut rng = rng::stream(cfg.seed, "tree-motif", cfg.depth as u64);
    let base = (1usize << cfg.depth) - 1;
    let tree_edges: Vec<(usize, usize)> = (1..base).map(|k| ((k - 1) / 2, k)).collect();
    let mut g = Graph::from_edges(base, &tree_edges)?;
    let motif_edges = cfg.motif.edges();
    for _ in 0..cfg.num_motifs {
        let anchor = rng.gen_range(0..base);
        let offset = g.append_disjoint(cfg.motif.num_nodes(), &motif_edges);
        g.set_edge(anchor, offset, true);
    }
    let labels = (0..g.n()).map(|i| usize::from(i >= base)).collect();
    let g = g.with_label(Label::Node(labels));
    Dataset::new(vec![g], Task::NodeClassification, 2, 1, cfg.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaMotifConfig {
    pub num_graphs: usize,
    /// Inclusive range of BA base sizes.
    pub base_nodes: (usize, usize),
    /// Edges per new node in the BA base.
    pub ba_edges: usize,
    pub seed: u64,
}

impl Default for BaMotifConfig {
    fn default() -> Self {
        Self {
            num_graphs: 300,
            base_nodes: (13, 25),
            ba_edges: 1,
            seed: 0,
        }
    }
}

/// Three-class graph classification: a BA base with one attached cycle (class
/// 0), grid (class 1) or house (class 2). Graph `k` has class `k % 3`.
pub fn ba3motif(cfg: &BaMotifConfig) -> Result<Dataset> {
    if cfg.num_graphs < 3 {
        return Err(Error::Param("need at least 3 graphs".into()));
    }
    let (lo, hi) = cfg.base_nodes;
    if lo > hi || lo <= cfg.ba_edges {
        return Err(Error::Param(format!("bad base size range {lo}..={hi}")));
    }
    let motifs = [Motif::Cycle6, Motif::Grid3x3, Motif::House5];
    let graphs = (0..cfg.num_graphs)
        .map(|k| {
            let mut rng = rng::stream(cfg.seed, "ba3motif", k as u64);
            let base_n = rng.gen_range(lo..=hi);
            let mut g = ba_graph_with(base_n, cfg.ba_edges, &mut rng)?;
            let motif = motifs[k % 3];
            let offset = g.append_disjoint(motif.num_nodes(), &motif.edges());
            let anchor = rng.gen_range(0..base_n);
            g.set_edge(anchor, offset, true);
            Ok(g.with_label(Label::Graph(k % 3)))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(graphs, Task::GraphClassification, 3, 1, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ba_with_one_edge_is_a_tree() {
        let g = ba_graph(10, 1, 4).unwrap();
        assert_eq!(g.num_edges(), 9);
        assert!(connected(&g));
    }

    #[test]
    fn ba_edge_count_from_growth_steps() {
        // 3-clique (3 edges) then two nodes adding 2 edges each
        let g = ba_graph(5, 2, 11).unwrap();
        assert_eq!(g.num_edges(), 3 + 2 * (5 - 3));
        assert!(connected(&g));
    }

    #[test]
    fn ba_parameter_errors() {
        assert!(ba_graph(2, 2, 0).is_err());
        assert!(ba_graph(5, 0, 0).is_err());
    }

    #[test]
    fn ba_is_deterministic() {
        assert_eq!(ba_graph(30, 2, 9).unwrap(), ba_graph(30, 2, 9).unwrap());
    }

    #[test]
    fn motif_templates() {
        assert_eq!(Motif::House5.graph().num_edges(), 6);
        assert_eq!(Motif::Grid3x3.graph().num_edges(), 12);
        assert_eq!(Motif::Cycle6.graph().num_edges(), 6);
        assert!(Motif::Cycle6.graph().degree(3) == 2);
    }

    #[test]
    fn bare_tree() {
        let ds = tree_motif(&TreeMotifConfig { depth: 4, num_motifs: 0, ..Default::default() }).unwrap();
        let g = &ds.graphs[0];
        assert_eq!((g.n(), g.num_edges()), (15, 14));
        assert_eq!(g.label, Label::Node(vec![0; 15]));
    }

    #[test]
    fn tree_with_one_cycle() {
        let ds = tree_motif(&TreeMotifConfig { depth: 4, num_motifs: 1, ..Default::default() }).unwrap();
        let g = &ds.graphs[0];
        assert_eq!((g.n(), g.num_edges()), (21, 14 + 6 + 1));
        assert!(connected(g));
    }

    #[test]
    fn full_scale_tree_cycle_node_count() {
        let ds = tree_motif(&TreeMotifConfig { depth: 9, num_motifs: 60, ..Default::default() }).unwrap();
        assert_eq!(ds.graphs[0].n(), 871);
    }

    #[test]
    fn ba3motif_is_balanced() {
        let ds = ba3motif(&BaMotifConfig { num_graphs: 300, ..Default::default() }).unwrap();
        assert_eq!(ds.summary().class_counts, vec![100, 100, 100]);
        for g in &ds.graphs {
            g.validate().unwrap();
            assert!(connected(g));
        }
    }

    fn connected(g: &Graph) -> bool {
        let mut seen = vec![false; g.n()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
