//! Graph statistics and normalized histograms for distribution comparisons.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Clustering histogram bins on `[0, 1]`.
pub const CLUSTERING_BINS: usize = 100;
/// Spectrum histogram bins on `[0, 2]`.
pub const SPECTRUM_BINS: usize = 100;

/// Normalized histogram over uniform bins starting at `lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub mass: Vec<f64>,
}

impl Histogram {
    /// Bins `values` into `bins` equal bins on `[lo, hi]`; the top edge falls
    /// into the last bin and out-of-range values are clamped. An empty input
    /// puts all mass in the first bin.
    pub fn from_values(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins > 0 && hi > lo, "histogram needs bins > 0 and hi > lo");
        let width = (hi - lo) / bins as f64;
        let mut mass = vec![0.0; bins];
        if values.is_empty() {
            mass[0] = 1.0;
            return Self { lo, width, mass };
        }
        for &v in values {
            let k = ((v - lo) / width).floor();
            let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
            mass[k] += 1.0;
        }
        let total = values.len() as f64;
        mass.iter_mut().for_each(|m| *m /= total);
        Self { lo, width, mass }
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn same_binning(&self, other: &Histogram) -> bool {
        self.bins() == other.bins() && self.lo == other.lo && self.width == other.width
    }
}

/// Earth mover's distance between two 1-D histograms on the same bins:
/// `Σ |CDF_a - CDF_b| · width`.
pub fn emd(a: &Histogram, b: &Histogram) -> Result<f64> {
    if !a.same_binning(b) {
        return Err(Error::Contract(format!(
            "histogram binning differs: {} bins of {} from {} vs {} bins of {} from {}",
            a.bins(),
            a.width,
            a.lo,
            b.bins(),
            b.width,
            b.lo
        )));
    }
    let (mut ca, mut cb, mut total) = (0.0, 0.0, 0.0);
    for (x, y) in a.mass.iter().zip(&b.mass) {
        ca += x;
        cb += y;
        total += (ca - cb).abs();
    }
    Ok(total * a.width)
}

/// Per-node degree, local clustering and normalized-Laplacian spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStatistics {
    pub degrees: Vec<usize>,
    pub clustering: Vec<f64>,
    /// Ascending eigenvalues.
    pub spectrum: Vec<f64>,
}

impl GraphStatistics {
    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Integer bins `0..=max_degree`.
    pub fn degree_histogram(&self, max_degree: usize) -> Histogram {
        let v: Vec<f64> = self.degrees.iter().map(|&d| d as f64).collect();
        Histogram::from_values(&v, 0.0, (max_degree + 1) as f64, max_degree + 1)
    }

    pub fn clustering_histogram(&self) -> Histogram {
        Histogram::from_values(&self.clustering, 0.0, 1.0, CLUSTERING_BINS)
    }

    pub fn spectrum_histogram(&self) -> Histogram {
        Histogram::from_values(&self.spectrum, 0.0, 2.0, SPECTRUM_BINS)
    }
}

/// `c_i = 2 T_i / (d_i (d_i - 1))`, 0 for degree below 2.
pub fn local_clustering(g: &Graph) -> Vec<f64> {
    (0..g.n())
        .map(|i| {
            let nb: Vec<usize> = g.neighbors(i).collect();
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nb.iter().enumerate() {
                for &v in &nb[a + 1..] {
                    if g.has_edge(u, v) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// `I - D^{-1/2} A D^{-1/2}`, with zero rows for isolated nodes.
pub fn normalized_laplacian(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let inv: Vec<f64> = (0..n)
        .map(|i| match g.degree(i) {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        if g.degree(i) > 0 {
            l[i * n + i] = 1.0;
        }
        for j in g.neighbors(i) {
            l[i * n + j] = -inv[i] * inv[j];
        }
    }
    l
}

/// Eigenvalues (ascending) and column eigenvectors of a symmetric `n x n`
/// matrix by cyclic Jacobi rotations, stopping once the off-diagonal
/// Frobenius norm drops below `1e-10`.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if matrix.len() != n * n {
        return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", matrix.len())));
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) >= 1e-10 {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::Numeric("Jacobi iteration did not converge".into()));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + i];
        }
    }
    Ok((values, vectors))
}

pub fn laplacian_spectrum(g: &Graph) -> Result<Vec<f64>> {
    let (values, _) = symmetric_eigen(&normalized_laplacian(g), g.n())?;
    if let Some(v) = values.iter().find(|v| !(-1e-8..=2.0 + 1e-8).contains(*v)) {
        return Err(Error::Numeric(format!("normalized Laplacian eigenvalue {v} outside [0, 2]")));
    }
    Ok(values.into_iter().map(|v| v.clamp(0.0, 2.0)).collect())
}

pub fn graph_statistics(g: &Graph) -> Result<GraphStatistics> {
    Ok(GraphStatistics {
        degrees: (0..g.n()).map(|i| g.degree(i)).collect(),
        clustering: local_clustering(g),
        spectrum: laplacian_spectrum(g)?,
    })
}
