//! Undirected graph model and datasets.

mod generators;
mod io;
mod subgraph;

pub use generators::{ba3motif, ba_graph, tree_motif, BaMotifConfig, Motif, TreeMotifConfig};
pub use io::{load_dataset, parse_dataset, save_dataset, write_dataset};
pub use subgraph::{extract_computational_subgraph, Subgraph};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    None,
    Graph(usize),
    Node(Vec<usize>),
}

/// Simple undirected graph with a dense adjacency matrix and node features.
///
/// Invariants: the adjacency is symmetric with an empty diagonal and there is
/// one feature row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
    features: Vec<f64>,
    feature_dim: usize,
    pub label: Label,
    pub center: Option<usize>,
}

impl Graph {
    /// Edgeless graph with constant-one scalar features.
    pub fn empty(n: usize) -> Self {
        Self::with_features(n, 1, vec![1.0; n])
    }

    fn with_features(n: usize, feature_dim: usize, features: Vec<f64>) -> Self {
        Self {
            n,
            adj: vec![false; n * n],
            features,
            feature_dim,
            label: Label::None,
            center: None,
        }
    }

    /// Builds a graph from an unordered edge list, rejecting self-loops and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Validation(format!(
                    "edge ({i},{j}) references node {} but n = {n}",
                    i.max(j)
                )));
            }
            if i == j {
                return Err(Error::Validation(format!("self-loop at node {i}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    /// Builds a graph from a dense 0/1 matrix, checking symmetry and the diagonal.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::empty(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0 {
                return Err(Error::Validation(format!("self-loop at node {i}")));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != rows[j][i] {
                    return Err(Error::Validation(format!("asymmetric adjacency at ({i},{j})")));
                }
                g.adj[i * n + j] = v != 0;
            }
        }
        Ok(g)
    }

    pub fn set_features(&mut self, feature_dim: usize, features: Vec<f64>) -> Result<()> {
        if features.len() != self.n * feature_dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} nodes of dim {feature_dim}",
                features.len(),
                self.n
            )));
        }
        self.feature_dim = feature_dim;
        self.features = features;
        Ok(())
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    /// Sets both directions of an unordered pair; the diagonal is ignored.
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        if i == j {
            return;
        }
        self.adj[i * self.n + j] = present;
        self.adj[j * self.n + i] = present;
    }

    pub fn flip(&mut self, i: usize, j: usize) {
        let v = self.has_edge(i, j);
        self.set_edge(i, j, !v);
    }

    /// Unordered edges `(i, j)` with `i < j`, lexicographic.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.n).filter(|&(i, j)| self.has_edge(i, j)).collect()
    }

    pub fn num_edges(&self) -> usize {
        pairs(self.n).filter(|&(i, j)| self.has_edge(i, j)).count()
    }

    /// Number of unordered node pairs, `n (n - 1) / 2`.
    pub fn num_pairs(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i * self.n..(i + 1) * self.n].iter().filter(|&&b| b).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i * self.n..(i + 1) * self.n]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
    }

    pub fn adjacency_tensor(&self) -> Tensor {
        Tensor::from_parts(
            vec![self.n, self.n],
            self.adj.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn features_tensor(&self) -> Tensor {
        Tensor::from_parts(vec![self.n, self.feature_dim], self.features.clone())
    }

    /// Same nodes and features, edges replaced by `present(i, j)` on `i < j`.
    pub fn with_edges_from(&self, present: impl Fn(usize, usize) -> bool) -> Graph {
        let mut g = self.clone();
        for (i, j) in pairs(self.n) {
            g.set_edge(i, j, present(i, j));
        }
        g
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let n = self.n;
        let d = self.feature_dim;
        let mut g = Self::with_features(n, d, vec![0.0; n * d]);
        for i in 0..n {
            for j in 0..n {
                g.adj[perm[i] * n + perm[j]] = self.adj[i * n + j];
            }
            g.features[perm[i] * d..(perm[i] + 1) * d].copy_from_slice(&self.features[i * d..(i + 1) * d]);
        }
        g.label = match &self.label {
            Label::Node(ys) => {
                let mut out = vec![0; n];
                for (i, &y) in ys.iter().enumerate() {
                    out[perm[i]] = y;
                }
                Label::Node(out)
            }
            other => other.clone(),
        };
        g.center = self.center.map(|c| perm[c]);
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.n * self.feature_dim {
            return Err(Error::Validation("feature rows do not match node count".into()));
        }
        for i in 0..self.n {
            if self.adj[i * self.n + i] {
                return Err(Error::Validation(format!("self-loop at node {i}")));
            }
            for j in 0..i {
                if self.adj[i * self.n + j] != self.adj[j * self.n + i] {
                    return Err(Error::Validation(format!("asymmetric adjacency at ({i},{j})")));
                }
            }
        }
        if let Label::Node(ys) = &self.label {
            if ys.len() != self.n {
                return Err(Error::Validation(format!("{} node labels for {} nodes", ys.len(), self.n)));
            }
        }
        if let Some(c) = self.center {
            if c >= self.n {
                return Err(Error::Validation(format!("center {c} out of range")));
            }
        }
        Ok(())
    }

    /// Adds a disjoint copy of `other`'s edges with node offset; returns the offset.
    pub(crate) fn append_disjoint(&mut self, other_n: usize, edges: &[(usize, usize)]) -> usize {
        let offset = self.n;
        let n = self.n + other_n;
        let mut adj = vec![false; n * n];
        for i in 0..self.n {
            for j in 0..self.n {
                adj[i * n + j] = self.adj[i * self.n + j];
            }
        }
        self.adj = adj;
        self.n = n;
        self.features.extend(std::iter::repeat_n(1.0, other_n * self.feature_dim));
        for &(i, j) in edges {
            self.set_edge(i + offset, j + offset, true);
        }
        offset
    }
}

/// Unordered pairs `(i, j)` with `i < j`, lexicographic.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    GraphClassification,
    NodeClassification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::GraphClassification => "graph",
            Task::NodeClassification => "node",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "graph" => Some(Task::GraphClassification),
            "node" => Some(Task::NodeClassification),
            _ => None,
        }
    }
}

/// Disjoint index sets covering every item of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// 80/10/10 split of `0..count` by seeded shuffle. Each part is sorted.
    pub fn random(count: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..count).collect();
        idx.shuffle(&mut rng::stream(seed, "splits", count as u64));
        let n_train = (count * 8) / 10;
        let n_val = count / 10;
        let mut train = idx[..n_train].to_vec();
        let mut val = idx[n_train..n_train + n_val].to_vec();
        let mut test = idx[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Self { train, val, test }
    }
}

/// A collection of graphs for one task. Node-classification datasets hold
/// exactly one graph whose nodes are the items.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub task: Task,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub split_seed: u64,
    pub splits: Splits,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, task: Task, num_classes: usize, feature_dim: usize, split_seed: u64) -> Result<Self> {
        if task == Task::NodeClassification && graphs.len() != 1 {
            return Err(Error::Validation(format!(
                "node-classification datasets hold one graph, got {}",
                graphs.len()
            )));
        }
        for (k, g) in graphs.iter().enumerate() {
            g.validate()?;
            if g.feature_dim() != feature_dim {
                return Err(Error::Validation(format!(
                    "graph {k} has feature dim {}, dataset declares {feature_dim}",
                    g.feature_dim()
                )));
            }
            let labels: Vec<usize> = match (&g.label, task) {
                (Label::Graph(y), Task::GraphClassification) => vec![*y],
                (Label::Node(ys), Task::NodeClassification) => ys.clone(),
                _ => return Err(Error::Validation(format!("graph {k} label does not match task"))),
            };
            if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
                return Err(Error::Validation(format!("graph {k} has label {bad} >= {num_classes} classes")));
            }
        }
        let count = match task {
            Task::GraphClassification => graphs.len(),
            Task::NodeClassification => graphs[0].n(),
        };
        Ok(Self {
            graphs,
            task,
            num_classes,
            feature_dim,
            split_seed,
            splits: Splits::random(count, split_seed),
        })
    }

    pub fn num_items(&self) -> usize {
        match self.task {
            Task::GraphClassification => self.graphs.len(),
            Task::NodeClassification => self.graphs[0].n(),
        }
    }

    /// Class of item `i` (graph index or node index).
    pub fn label_of(&self, i: usize) -> usize {
        match (&self.task, &self.graphs[0].label) {
            (Task::NodeClassification, Label::Node(ys)) => ys[i],
            _ => match self.graphs[i].label {
                Label::Graph(y) => y,
                _ => unreachable!("validated at construction"),
            },
        }
    }

    /// Average node and edge counts per graph.
    pub fn summary(&self) -> DatasetSummary {
        let k = self.graphs.len().max(1) as f64;
        DatasetSummary {
            graphs: self.graphs.len(),
            avg_nodes: self.graphs.iter().map(|g| g.n() as f64).sum::<f64>() / k,
            avg_edges: self.graphs.iter().map(|g| g.num_edges() as f64).sum::<f64>() / k,
            num_classes: self.num_classes,
            class_counts: (0..self.num_classes)
                .map(|c| (0..self.num_items()).filter(|&i| self.label_of(i) == c).count())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DatasetSummary {
    pub graphs: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub num_classes: usize,
    pub class_counts: Vec<usize>,
}
