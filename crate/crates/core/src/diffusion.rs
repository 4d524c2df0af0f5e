//! Discrete forward diffusion on adjacency matrices.
//!
//! Each unordered node pair carries one bit (edge absent / present). A step
//! with flip probability `β` applies the symmetric transition matrix
//! `Q = [[1-β, β], [β, 1-β]]`, and `t` steps compose to the same form with the
//! cumulative probability `β̄ = ½ - ½ ∏ (1 - 2β_i)`. Corruption jumps straight
//! to `β̄` in a single shot; `β̄ = ½` yields an Erdős–Rényi(½) graph.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{pairs, Graph};
use crate::rng::Rng;

/// Default number of diffusion steps.
pub const DEFAULT_STEPS: usize = 100;

/// A cumulative flip probability and the step index it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub t: usize,
    pub beta_bar: f64,
}

impl NoiseLevel {
    /// Level at `beta_bar`, with `t = round(2 β̄ T)`.
    pub fn new(beta_bar: f64, steps: usize) -> Result<Self> {
        if !(0.0..=0.5).contains(&beta_bar) {
            return Err(Error::Param(format!("beta_bar {beta_bar} outside [0, 0.5]")));
        }
        Ok(Self {
            t: (2.0 * beta_bar * steps as f64).round() as usize,
            beta_bar,
        })
    }

    pub fn clean() -> Self {
        Self { t: 0, beta_bar: 0.0 }
    }
}

/// Per-step flip probabilities with their running composition.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Composes per-step probabilities `betas[0..T]` into `β̄_1..β̄_T`.
    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        let mut keep = 1.0;
        let mut beta_bar = Vec::with_capacity(betas.len());
        for &b in betas {
            check_beta(b)?;
            keep *= 1.0 - 2.0 * b;
            beta_bar.push(0.5 - 0.5 * keep);
        }
        Ok(Self { beta_bar })
    }

    /// `β̄_t = t / (2T)`: straight from clean (t = 0) to pure noise (t = T).
    pub fn linear(steps: usize) -> Self {
        Self {
            beta_bar: (1..=steps).map(|t| 0.5 * t as f64 / steps as f64).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.beta_bar.len()
    }

    pub fn beta_bars(&self) -> &[f64] {
        &self.beta_bar
    }

    /// Level after `t` steps; `t = 0` is the clean graph.
    pub fn level(&self, t: usize) -> NoiseLevel {
        let beta_bar = if t == 0 { 0.0 } else { self.beta_bar[t.min(self.steps()) - 1] };
        NoiseLevel { t, beta_bar }
    }
}

fn check_beta(b: f64) -> Result<()> {
    if (0.0..=0.5).contains(&b) {
        Ok(())
    } else {
        Err(Error::Param(format!("flip probability {b} outside [0, 0.5]")))
    }
}

/// `½ - ½ ∏ (1 - 2β_i)`, the off-diagonal entry of `Q_1 ⋯ Q_t`.
pub fn compose_beta_bar(betas: &[f64]) -> Result<f64> {
    let mut keep = 1.0;
    for &b in betas {
        check_beta(b)?;
        keep *= 1.0 - 2.0 * b;
    }
    Ok(0.5 - 0.5 * keep)
}

pub fn transition_matrix(beta: f64) -> [[f64; 2]; 2] {
    [[1.0 - beta, beta], [beta, 1.0 - beta]]
}

/// `q(a_t | a_0)` for one pair.
pub fn transition_probability(a0: bool, at: bool, beta_bar: f64) -> f64 {
    if a0 == at {
        1.0 - beta_bar
    } else {
        beta_bar
    }
}

/// Uniform `β̄ ~ U[0, ½]`.
pub fn sample_noise_level(rng: &mut Rng, steps: usize) -> NoiseLevel {
    level_from_unit(rng.gen::<f64>(), steps)
}

fn level_from_unit(u: f64, steps: usize) -> NoiseLevel {
    NoiseLevel::new(0.5 * u.clamp(0.0, 1.0), steps).expect("in range by construction")
}

/// Flips every unordered pair independently with probability `β̄`. Pairs are
/// visited in lexicographic order, one uniform draw each.
pub fn corrupt(g: &Graph, level: NoiseLevel, rng: &mut Rng) -> Graph {
    let mut out = g.clone();
    for (i, j) in pairs(g.n()) {
        if rng.gen::<f64>() < level.beta_bar {
            out.flip(i, j);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn composition_examples() {
        assert_eq!(compose_beta_bar(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((compose_beta_bar(&[0.3]).unwrap() - 0.3).abs() < 1e-15);
        assert!((compose_beta_bar(&[0.1, 0.1]).unwrap() - 0.18).abs() < 1e-15);
        assert!(compose_beta_bar(&[0.6]).is_err());
        assert!(compose_beta_bar(&[-0.1]).is_err());
    }

    #[test]
    fn schedule_matches_composition() {
        let betas = [0.05, 0.1, 0.2, 0.0, 0.5];
        let s = NoiseSchedule::from_betas(&betas).unwrap();
        for t in 1..=betas.len() {
            assert_eq!(s.level(t).beta_bar, compose_beta_bar(&betas[..t]).unwrap());
        }
        assert_eq!(s.level(5).beta_bar, 0.5);
        assert!(s.beta_bars().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn linear_schedule_endpoints() {
        let s = NoiseSchedule::linear(50);
        assert_eq!(s.level(0).beta_bar, 0.0);
        assert_eq!(s.level(50).beta_bar, 0.5);
        assert_eq!(s.level(25).beta_bar, 0.25);
    }

    #[test]
    fn transition_rows_sum_to_one() {
        assert!((transition_probability(false, true, 0.2) - 0.2).abs() < 1e-15);
        assert!((transition_probability(true, true, 0.2) - 0.8).abs() < 1e-15);
        for &b in &[0.0, 0.13, 0.5] {
            for a0 in [false, true] {
                let s = transition_probability(a0, false, b) + transition_probability(a0, true, b);
                assert!((s - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn noise_level_endpoints() {
        assert_eq!(level_from_unit(0.0, 100), NoiseLevel { t: 0, beta_bar: 0.0 });
        assert_eq!(level_from_unit(1.0, 100), NoiseLevel { t: 100, beta_bar: 0.5 });
        assert_eq!(NoiseLevel::new(0.25, 100).unwrap().t, 50);
        assert!(NoiseLevel::new(0.51, 100).is_err());
    }

    #[test]
    fn noise_level_mean() {
        let mut r = rng::seeded(1);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_noise_level(&mut r, 100).beta_bar).sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() < 0.005, "{mean}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let out = corrupt(&g, NoiseLevel::clean(), &mut rng::seeded(3));
        assert_eq!(out, g);
    }

    #[test]
    fn corruption_keeps_invariants() {
        let g = Graph::from_edges(8, &[(0, 1), (2, 7)]).unwrap();
        let out = corrupt(&g, NoiseLevel::new(0.5, 100).unwrap(), &mut rng::seeded(9));
        out.validate().unwrap();
        assert_eq!(out.features(), g.features());
    }

    #[test]
    fn empty_graph_expected_edges() {
        // Binomial(45, 0.2): mean 9, sd of the trial mean sqrt(45*0.2*0.8/1e4)
        let g = Graph::empty(10);
        let level = NoiseLevel::new(0.2, 100).unwrap();
        let mut r = rng::seeded(42);
        let trials = 10_000;
        let total: usize = (0..trials).map(|_| corrupt(&g, level, &mut r).num_edges()).sum();
        let mean = total as f64 / trials as f64;
        let sd = (45.0 * 0.2 * 0.8 / trials as f64).sqrt();
        assert!((mean - 9.0).abs() < 3.0 * sd, "{mean}");
    }
}
