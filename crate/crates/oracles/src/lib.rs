//! Brute-force reference oracles.
//!
//! Nothing in this crate depends on `d4x-core`. Every routine here is a
//! deliberately naive re-derivation (enumeration, central differences, explicit
//! matrix products, greedy transport) used only to check the fast paths.

use std::fmt;

/// Outcome of comparing an oracle value against an implementation value.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub oracle: String,
    pub inputs_digest: String,
    pub oracle_value: f64,
    pub impl_value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn compare(
        oracle: impl Into<String>,
        inputs_digest: impl Into<String>,
        oracle_value: f64,
        impl_value: f64,
        tolerance: f64,
    ) -> Self {
        let pass = (oracle_value - impl_value).abs() <= tolerance;
        Self {
            oracle: oracle.into(),
            inputs_digest: inputs_digest.into(),
            oracle_value,
            impl_value,
            tolerance,
            pass,
        }
    }

    /// Relative comparison: |o - i| <= tol * max(|o|, |i|, floor).
    pub fn compare_relative(
        oracle: impl Into<String>,
        inputs_digest: impl Into<String>,
        oracle_value: f64,
        impl_value: f64,
        rel_tol: f64,
        floor: f64,
    ) -> Self {
        let scale = oracle_value.abs().max(impl_value.abs()).max(floor);
        let mut r = Self::compare(oracle, inputs_digest, oracle_value, impl_value, rel_tol * scale);
        r.tolerance = rel_tol;
        r
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[oracle {}] {} inputs={} oracle={:.12e} impl={:.12e} tol={:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.oracle,
            self.inputs_digest,
            self.oracle_value,
            self.impl_value,
            self.tolerance
        )
    }
}

/// Central finite differences of a scalar function, one coordinate at a time.
pub fn finite_diff<F>(f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between two gradient vectors, with an absolute floor
/// so that near-zero components do not blow up the ratio.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

type Mat2 = [[f64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Explicit product of the 2x2 flip matrices [[1-b, b], [b, 1-b]]; returns the full matrix.
pub fn transition_matrix_product(betas: &[f64]) -> [[f64; 2]; 2] {
    betas.iter().fold([[1.0, 0.0], [0.0, 1.0]], |acc, &b| {
        mat2_mul(&acc, &[[1.0 - b, b], [b, 1.0 - b]])
    })
}

/// Exact distribution of a corrupted tiny graph.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    /// Unordered pairs (i < j) in lexicographic order.
    pub pairs: Vec<(usize, usize)>,
    /// One probability per outcome; outcome bit k is the presence of `pairs[k]`.
    pub probs: Vec<f64>,
}

impl TransitionTable {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Outcome index for a given presence vector over `pairs`.
    pub fn index_of(&self, present: &[bool]) -> usize {
        present
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(k, _)| 1usize << k)
            .sum()
    }
}

pub const MAX_ENUMERATED_PAIRS: usize = 10;

/// Enumerates every corrupted version of a tiny graph given as an n x n 0/1 matrix.
/// Returns `None` when the pair count exceeds [`MAX_ENUMERATED_PAIRS`].
pub fn transition_enumeration(adjacency: &[Vec<u8>], beta_bar: f64) -> Option<TransitionTable> {
    let n = adjacency.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    if pairs.len() > MAX_ENUMERATED_PAIRS {
        return None;
    }
    let original: Vec<bool> = pairs.iter().map(|&(i, j)| adjacency[i][j] != 0).collect();
    let probs = (0..1usize << pairs.len())
        .map(|outcome| {
            original
                .iter()
                .enumerate()
                .map(|(k, &was)| {
                    let now = outcome & (1 << k) != 0;
                    if now == was {
                        1.0 - beta_bar
                    } else {
                        beta_bar
                    }
                })
                .product()
        })
        .collect();
    Some(TransitionTable { pairs, probs })
}

/// Total-variation distance between an exact table and empirical outcome counts.
pub fn total_variation(exact: &[f64], counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    0.5 * exact
        .iter()
        .zip(counts)
        .map(|(&p, &c)| (p - c as f64 / total as f64).abs())
        .sum::<f64>()
}

/// 1-D earth mover's distance by greedy left-to-right transport of mass between
/// bins (north-west corner rule, optimal in one dimension). Inputs are
/// normalized internally.
pub fn emd_transport(a: &[f64], b: &[f64], bin_width: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "histograms must share binning");
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let mut supply: Vec<f64> = a.iter().map(|x| x / sa).collect();
    let mut demand: Vec<f64> = b.iter().map(|x| x / sb).collect();
    let (mut i, mut j) = (0usize, 0usize);
    let mut cost = 0.0;
    while i < supply.len() && j < demand.len() {
        if supply[i] <= 0.0 {
            i += 1;
            continue;
        }
        if demand[j] <= 0.0 {
            j += 1;
            continue;
        }
        let moved = supply[i].min(demand[j]);
        cost += moved * (i as f64 - j as f64).abs() * bin_width;
        supply[i] -= moved;
        demand[j] -= moved;
        if supply[i] <= 1e-300 {
            i += 1;
        }
        if demand[j] <= 1e-300 {
            j += 1;
        }
    }
    cost
}

/// Normalized-Laplacian eigenvalues of the n-cycle, 1 - cos(2 pi k / n), sorted.
pub fn ring_laplacian_spectrum(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|k| 1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// One Adam update for a single scalar parameter, written out term by term.
pub fn adam_scalar_step(param: f64, grad: f64, lr: f64, b1: f64, b2: f64, eps: f64, step: i32) -> f64 {
    // fresh moments: m = (1-b1) g, v = (1-b2) g^2
    let m = (1.0 - b1) * grad;
    let v = (1.0 - b2) * grad * grad;
    let m_hat = m / (1.0 - b1.powi(step));
    let v_hat = v / (1.0 - b2.powi(step));
    param - lr * m_hat / (v_hat.sqrt() + eps)
}

/// Breadth-first distances from `source` in an adjacency-list graph (usize::MAX = unreachable).
pub fn bfs_distances(neighbors: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; neighbors.len()];
    let mut frontier = vec![source];
    dist[source] = 0;
    let mut level = 0;
    while !frontier.is_empty() {
        level += 1;
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = level;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    dist
}
