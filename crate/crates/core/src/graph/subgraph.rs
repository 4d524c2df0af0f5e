use std::collections::VecDeque;

use super::{Graph, Label};
use crate::error::{Error, Result};

/// Hop-limited neighborhood of a node, relabeled to `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub graph: Graph,
    /// `mapping[new] = old`, ascending in `old`.
    pub mapping: Vec<usize>,
    /// Position of the center in the subgraph.
    pub center: usize,
}

/// Induced subgraph on the nodes within `hops` of `center`. Node features and
/// per-node labels are carried over; the new graph records its center.
pub fn extract_computational_subgraph(g: &Graph, center: usize, hops: usize) -> Result<Subgraph> {
    if center >= g.n() {
        return Err(Error::Param(format!("center {center} out of range for {} nodes", g.n())));
    }
    let mut dist = vec![usize::MAX; g.n()];
    dist[center] = 0;
    let mut queue = VecDeque::from([center]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == hops {
            continue;
        }
        for v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mapping: Vec<usize> = (0..g.n()).filter(|&i| dist[i] != usize::MAX).collect();
    let mut inverse = vec![usize::MAX; g.n()];
    for (new, &old) in mapping.iter().enumerate() {
        inverse[old] = new;
    }
    let d = g.feature_dim();
    let mut sub = Graph::empty(mapping.len());
    let features = mapping
        .iter()
        .flat_map(|&old| g.features()[old * d..(old + 1) * d].iter().copied())
        .collect();
    sub.set_features(d, features)?;
    for (a, &i) in mapping.iter().enumerate() {
        for &j in &mapping[a + 1..] {
            if g.has_edge(i, j) {
                sub.set_edge(a, inverse[j], true);
            }
        }
    }
    sub.label = match &g.label {
        Label::Node(ys) => Label::Node(mapping.iter().map(|&i| ys[i]).collect()),
        other => other.clone(),
    };
    let c = inverse[center];
    sub.center = Some(c);
    Ok(Subgraph { graph: sub, mapping, center: c })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Graph {
        let e: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &e).unwrap()
    }

    #[test]
    fn two_hops_on_a_ring() {
        let s = extract_computational_subgraph(&ring(6), 0, 2).unwrap();
        assert_eq!(s.mapping, vec![0, 1, 2, 4, 5]);
        assert_eq!(s.graph.num_edges(), 4);
        assert_eq!(s.center, 0);
    }

    #[test]
    fn isolated_center() {
        let g = Graph::from_edges(3, &[(1, 2)]).unwrap();
        let s = extract_computational_subgraph(&g, 0, 3).unwrap();
        assert_eq!(s.graph.n(), 1);
        assert_eq!(s.graph.num_edges(), 0);
    }

    #[test]
    fn large_radius_keeps_component() {
        let mut g = ring(5);
        g.append_disjoint(2, &[(0, 1)]);
        let s = extract_computational_subgraph(&g, 2, 100).unwrap();
        assert_eq!(s.mapping, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.graph, ring(5).with_center(2));
    }

    #[test]
    fn zero_hops_is_the_center_alone() {
        let s = extract_computational_subgraph(&ring(6), 3, 0).unwrap();
        assert_eq!((s.graph.n(), s.mapping[0]), (1, 3));
    }

    #[test]
    fn bad_center() {
        assert!(matches!(extract_computational_subgraph(&ring(4), 4, 1), Err(Error::Param(_))));
    }

    trait WithCenter {
        fn with_center(self, c: usize) -> Self;
    }

    impl WithCenter for Graph {
        fn with_center(mut self, c: usize) -> Self {
            self.center = Some(c);
            self
        }
    }
}
