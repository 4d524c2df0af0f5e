//! Noise-conditioned denoiser over `N x N x C` pair tensors.
//!
//! Pair tensors are stored as `(n*n) x C` matrices whose row `i*n + j` is the
//! channel vector at `(i, j)`, so per-position MLPs are plain matmuls.
//!
//! Input channels (`2d + 3`): one-hot of the noisy adjacency (absent,
//! present), `concat(x_i, x_j)`, and a time channel holding `MLP(β̄ I)`.
//! Each block computes
//!
//! ```text
//! B(M) = relu(mix(concat(m1(M) ⊛ m2(M) / n, skip(M))))
//! ```
//!
//! where `m1`, `m2` are ReLU layers, `skip` is linear and `⊛` is the
//! per-channel `n x n` matrix product. The outputs of all blocks are
//! concatenated, mapped to one channel by a two-layer MLP, symmetrized as
//! `(o + oᵀ) / 2`, squashed with a sigmoid and the diagonal zeroed.

use crate::diffusion::NoiseLevel;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn;
use crate::rng;
use crate::tensor::{Checkpoint, ParamSet, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct PpgnConfig {
    pub blocks: usize,
    pub hidden: usize,
    pub time_hidden: usize,
    /// Raw node feature width `d` of the dataset.
    pub feature_dim: usize,
    /// Append a one-hot "is the explained node" feature (node tasks).
    pub center_channel: bool,
}

impl Default for PpgnConfig {
    fn default() -> Self {
        Self {
            blocks: 6,
            hidden: 64,
            time_hidden: 16,
            feature_dim: 1,
            center_channel: false,
        }
    }
}

impl PpgnConfig {
    /// Feature width seen by the network, including the center indicator.
    pub fn node_dim(&self) -> usize {
        self.feature_dim + usize::from(self.center_channel)
    }

    pub fn input_channels(&self) -> usize {
        2 * self.node_dim() + 3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ppgn {
    params: ParamSet,
    cfg: PpgnConfig,
}

const TIME0: usize = 0;
const TIME1: usize = 2;
const BLOCK_BASE: usize = 4;
const PER_BLOCK: usize = 8;

impl Ppgn {
    pub fn new(cfg: PpgnConfig, seed: u64) -> Result<Self> {
        if cfg.blocks == 0 || cfg.hidden == 0 || cfg.time_hidden == 0 || cfg.feature_dim == 0 {
            return Err(Error::Param(format!("denoiser sizes must be positive: {cfg:?}")));
        }
        let mut r = rng::stream(seed, "ppgn-init", 0);
        let mut p = ParamSet::new();
        let h = cfg.hidden;
        nn::push_linear(&mut p, "ppgn.time_mlp.0", 1, cfg.time_hidden, &mut r);
        nn::push_linear(&mut p, "ppgn.time_mlp.1", cfg.time_hidden, 1, &mut r);
        for b in 0..cfg.blocks {
            let c_in = if b == 0 { cfg.input_channels() } else { h };
            nn::push_linear(&mut p, &format!("ppgn.block{b}.m1"), c_in, h, &mut r);
            nn::push_linear(&mut p, &format!("ppgn.block{b}.m2"), c_in, h, &mut r);
            nn::push_linear(&mut p, &format!("ppgn.block{b}.skip"), c_in, h, &mut r);
            nn::push_linear(&mut p, &format!("ppgn.block{b}.mix"), 2 * h, h, &mut r);
        }
        nn::push_linear(&mut p, "ppgn.out.0", cfg.blocks * h, h, &mut r);
        nn::push_linear(&mut p, "ppgn.out.1", h, 1, &mut r);
        Ok(Self { params: p, cfg })
    }

    pub fn config(&self) -> &PpgnConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn out_index(&self) -> usize {
        BLOCK_BASE + PER_BLOCK * self.cfg.blocks
    }

    /// Node features as the network sees them: the raw rows, plus the center
    /// indicator column when configured.
    pub fn node_features(&self, g: &Graph) -> Result<Tensor> {
        let (n, d) = (g.n(), g.feature_dim());
        if d != self.cfg.feature_dim {
            return Err(Error::Shape(format!("graph has feature dim {d}, denoiser expects {}", self.cfg.feature_dim)));
        }
        if !self.cfg.center_channel {
            return Ok(g.features_tensor());
        }
        let c = g
            .center
            .ok_or_else(|| Error::Contract("denoiser with a center channel needs a centered graph".into()))?;
        let mut data = Vec::with_capacity(n * (d + 1));
        for i in 0..n {
            data.extend_from_slice(&g.features()[i * d..(i + 1) * d]);
            data.push(if i == c { 1.0 } else { 0.0 });
        }
        Ok(Tensor::from_parts(vec![n, d + 1], data))
    }

    /// The `(n*n) x (2d+3)` input tensor. `x` must already include any
    /// center column (see [`Ppgn::node_features`]).
    pub fn build_input<'t>(&self, bound: &[Var<'t>], adj: &Tensor, x: &Tensor, level: NoiseLevel) -> Result<Var<'t>> {
        let tape = bound[0].tape();
        let n = adj.shape()[0];
        let d = self.cfg.node_dim();
        if adj.shape() != [n, n] || x.shape() != [n, d] {
            return Err(Error::Shape(format!(
                "denoiser input: adjacency {:?}, features {:?}, expected feature dim {d}",
                adj.shape(),
                x.shape()
            )));
        }
        let width = 2 + 2 * d;
        let mut fixed = Vec::with_capacity(n * n * width);
        for i in 0..n {
            for j in 0..n {
                let present = adj.at2(i, j) > 0.5;
                fixed.push(if present { 0.0 } else { 1.0 });
                fixed.push(if present { 1.0 } else { 0.0 });
                fixed.extend_from_slice(&x.data()[i * d..(i + 1) * d]);
                fixed.extend_from_slice(&x.data()[j * d..(j + 1) * d]);
            }
        }
        let fixed = tape.constant(Tensor::from_parts(vec![n * n, width], fixed));
        // the time MLP acts entrywise on β̄ I, which only holds two values
        let levels = tape.constant(Tensor::from_parts(vec![2, 1], vec![0.0, level.beta_bar]));
        let t = nn::linear(nn::linear(levels, bound, TIME0)?.relu(), bound, TIME1)?;
        let pick: Vec<usize> = (0..n * n).map(|k| usize::from(k / n == k % n)).collect();
        let time = t.select(&pick)?.reshape(&[n * n, 1])?;
        Var::concat_cols(&[fixed, time])
    }

    /// Dense edge probabilities `n x n` from an input tensor.
    pub fn forward<'t>(&self, bound: &[Var<'t>], m_in: Var<'t>, n: usize) -> Result<Var<'t>> {
        let tape = m_in.tape();
        if m_in.shape() != [n * n, self.cfg.input_channels()] {
            return Err(Error::Shape(format!(
                "denoiser input {:?}, expected [{}, {}]",
                m_in.shape(),
                n * n,
                self.cfg.input_channels()
            )));
        }
        let inv_n = 1.0 / n.max(1) as f64;
        let mut m = m_in;
        let mut outs = Vec::with_capacity(self.cfg.blocks);
        for b in 0..self.cfg.blocks {
            let base = BLOCK_BASE + PER_BLOCK * b;
            let m1 = nn::linear(m, bound, base)?.relu();
            let m2 = nn::linear(m, bound, base + 2)?.relu();
            let prod = m1.channel_matmul(m2, n)?.scale(inv_n);
            let skip = nn::linear(m, bound, base + 4)?;
            m = nn::linear(Var::concat_cols(&[prod, skip])?, bound, base + 6)?.relu();
            outs.push(m);
        }
        let o = self.out_index();
        let hidden = nn::linear(Var::concat_cols(&outs)?, bound, o)?.relu();
        let logits = nn::linear(hidden, bound, o + 2)?.reshape(&[n, n])?;
        let sym = logits.add(logits.transpose()?)?.scale(0.5);
        let off_diag = Tensor::from_parts(
            vec![n, n],
            (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect(),
        );
        sym.sigmoid().mul(tape.constant(off_diag))
    }

    /// `p(edge in G0 | G_t)` for every pair, as a recorded tape value.
    pub fn denoise_var<'t>(&self, bound: &[Var<'t>], g_t: &Graph, x: &Tensor, level: NoiseLevel) -> Result<Var<'t>> {
        let m_in = self.build_input(bound, &g_t.adjacency_tensor(), x, level)?;
        self.forward(bound, m_in, g_t.n())
    }

    /// `p(edge in G0 | G_t)` for every pair. Features come from `g0` (the
    /// clean graph; corruption leaves them unchanged).
    pub fn denoise(&self, g_t: &Graph, g0: &Graph, level: NoiseLevel) -> Result<Tensor> {
        let x = self.node_features(g0)?;
        let tape = Tape::new();
        let bound = self.params.bind_frozen(&tape);
        let p = self.denoise_var(&bound, g_t, &x, level)?;
        let v = (*p.value()).clone();
        Ok(v)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors = self.params.clone();
        tensors.push(
            "ppgn.meta",
            Tensor::vector(vec![
                self.cfg.blocks as f64,
                self.cfg.hidden as f64,
                self.cfg.time_hidden as f64,
                self.cfg.feature_dim as f64,
                f64::from(u8::from(self.cfg.center_channel)),
            ]),
        );
        Checkpoint::new(tensors)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let m = nn::meta_values(&ck.tensors, "ppgn.meta", 5)?;
        if m[4] > 1 {
            return Err(Error::Checkpoint("center flag must be 0 or 1".into()));
        }
        let cfg = PpgnConfig {
            blocks: m[0],
            hidden: m[1],
            time_hidden: m[2],
            feature_dim: m[3],
            center_channel: m[4] == 1,
        };
        let mut ppgn = Self::new(cfg, 0).map_err(|e| Error::Checkpoint(e.to_string()))?;
        nn::check_layout(&ppgn.params, &ck.tensors, "ppgn.")?;
        let mut params = ParamSet::new();
        for name in ppgn.params.names() {
            params.push(name.clone(), ck.tensors.get(name).expect("layout checked").clone());
        }
        ppgn.params = params;
        Ok(ppgn)
    }
}
