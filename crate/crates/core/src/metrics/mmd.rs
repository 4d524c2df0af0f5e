//! Maximum mean discrepancy between sets of graphs with a Gaussian kernel on
//! the earth mover's distance between statistic histograms.

use serde::{Deserialize, Serialize};

use super::stats::{emd, graph_statistics, GraphStatistics, Histogram};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Kernel bandwidth.
pub const DEFAULT_SIGMA: f64 = 1.0;

/// `exp(-EMD(a, b)² / (2σ²))`.
pub fn gaussian_emd_kernel(a: &Histogram, b: &Histogram, sigma: f64) -> Result<f64> {
    let d = emd(a, b)?;
    Ok((-d * d / (2.0 * sigma * sigma)).exp())
}

fn mean_kernel(a: &[Histogram], b: &[Histogram], sigma: f64) -> Result<f64> {
    let mut total = 0.0;
    for x in a {
        for y in b {
            total += gaussian_emd_kernel(x, y, sigma)?;
        }
    }
    Ok(total / (a.len() * b.len()) as f64)
}

/// `√max(E k(x,x') + E k(y,y') - 2 E k(x,y), 0)` over all pairs, including
/// each element with itself.
pub fn mmd_gaussian_emd(a: &[Histogram], b: &[Histogram], sigma: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("MMD needs two nonempty sets".into()));
    }
    let sq = mean_kernel(a, a, sigma)? + mean_kernel(b, b, sigma)? - 2.0 * mean_kernel(a, b, sigma)?;
    Ok(sq.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdTriple {
    pub degree: f64,
    pub clustering: f64,
    pub spectrum: f64,
}

impl MmdTriple {
    pub fn sum(&self) -> f64 {
        self.degree + self.clustering + self.spectrum
    }
}

/// Degree, clustering and spectrum MMD between two graph sets. Degree bins run
/// up to the largest degree seen in either set.
pub fn mmd_graphs(a: &[Graph], b: &[Graph], sigma: f64) -> Result<MmdTriple> {
    let sa: Vec<GraphStatistics> = a.iter().map(graph_statistics).collect::<Result<_>>()?;
    let sb: Vec<GraphStatistics> = b.iter().map(graph_statistics).collect::<Result<_>>()?;
    let max_deg = sa.iter().chain(&sb).map(GraphStatistics::max_degree).max().unwrap_or(0);
    let hist = |s: &[GraphStatistics], f: &dyn Fn(&GraphStatistics) -> Histogram| -> Vec<Histogram> { s.iter().map(f).collect() };
    let deg = |s: &GraphStatistics| s.degree_histogram(max_deg);
    Ok(MmdTriple {
        degree: mmd_gaussian_emd(&hist(&sa, &deg), &hist(&sb, &deg), sigma)?,
        clustering: mmd_gaussian_emd(
            &hist(&sa, &GraphStatistics::clustering_histogram),
            &hist(&sb, &GraphStatistics::clustering_histogram),
            sigma,
        )?,
        spectrum: mmd_gaussian_emd(
            &hist(&sa, &GraphStatistics::spectrum_histogram),
            &hist(&sb, &GraphStatistics::spectrum_histogram),
            sigma,
        )?,
    })
}
