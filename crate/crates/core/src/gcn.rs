//! The target classifier: a graph convolutional network that accepts hard or
//! relaxed adjacency matrices.
//!
//! Each layer computes `Â H W + b` with `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` and
//! `D̃` the row sums of `A + I`, so real-valued adjacency entries are fine.
//! ReLU sits between layers.
//! Graph tasks mean-pool the last layer; node tasks read each row. A final
//! linear map and softmax give class probabilities.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{Dataset, Graph, Task};
use crate::nn;
use crate::rng;
use crate::tensor::{argmax, Adam, Checkpoint, GradBuffer, ParamSet, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct Gcn {
    params: ParamSet,
    layers: usize,
    hidden: usize,
    task: Task,
    num_classes: usize,
    feature_dim: usize,
}

/// Predicted class (ties toward the lowest index) and class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        Self { label: argmax(&probs), probs }
    }
}

impl Gcn {
    pub fn new(feature_dim: usize, num_classes: usize, task: Task, layers: usize, hidden: usize, seed: u64) -> Result<Self> {
        if layers < 2 || hidden == 0 || num_classes == 0 || feature_dim == 0 {
            return Err(Error::Param(format!(
                "GCN needs layers >= 2 and positive sizes, got L={layers} h={hidden} C={num_classes} d={feature_dim}"
            )));
        }
        let mut r = rng::stream(seed, "gcn-init", 0);
        let mut params = ParamSet::new();
        for i in 0..layers {
            let fan_in = if i == 0 { feature_dim } else { hidden };
            nn::push_linear(&mut params, &format!("gcn.layer{i}"), fan_in, hidden, &mut r);
        }
        nn::push_linear(&mut params, "gcn.readout", hidden, num_classes, &mut r);
        Ok(Self {
            params,
            layers,
            hidden,
            task,
            num_classes,
            feature_dim,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Pre-softmax scores: a length-C vector for graph tasks, `n x C` for node tasks.
    pub fn logits<'t>(&self, bound: &[Var<'t>], adj: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let tape = adj.tape();
        let a = adj.value();
        let n = check_inputs(&a, &x.value(), self.feature_dim)?;
        let with_loops = adj.add(tape.constant(Tensor::eye(n)))?;
        let dinv = with_loops.sum(Some(1))?.powf(-0.5);
        let norm = with_loops.mul(dinv.outer(dinv)?)?;
        let mut h = x;
        for i in 0..self.layers {
            h = nn::linear(norm.matmul(h)?, bound, 2 * i)?;
            if i + 1 < self.layers {
                h = h.relu();
            }
        }
        let readout = 2 * self.layers;
        match self.task {
            Task::GraphClassification => {
                let pooled = h.mean(Some(0))?.reshape(&[1, self.hidden])?;
                nn::linear(pooled, bound, readout)?.reshape(&[self.num_classes])
            }
            Task::NodeClassification => nn::linear(h, bound, readout),
        }
    }

    /// Class probabilities, shaped like [`Gcn::logits`].
    pub fn forward<'t>(&self, bound: &[Var<'t>], adj: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
        self.logits(bound, adj, x)?.softmax()
    }

    /// Probability vector for one explanation instance: the graph output, or
    /// the `center` row for node tasks.
    pub fn instance_probs<'t>(&self, bound: &[Var<'t>], adj: Var<'t>, x: Var<'t>, center: Option<usize>) -> Result<Var<'t>> {
        let p = self.forward(bound, adj, x)?;
        match self.task {
            Task::GraphClassification => Ok(p),
            Task::NodeClassification => {
                let c = center.ok_or_else(|| Error::Contract("node-task instance without a center".into()))?;
                let n = p.shape()[0];
                if c >= n {
                    return Err(Error::Contract(format!("center {c} out of range for {n} nodes")));
                }
                let row: Vec<usize> = (0..self.num_classes).map(|k| c * self.num_classes + k).collect();
                p.select(&row)
            }
        }
    }

    /// Probabilities for a dense (possibly relaxed) adjacency, without gradients.
    pub fn probabilities(&self, adj: &Tensor, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let bound = self.params.bind_frozen(&tape);
        let p = self.forward(&bound, tape.constant(adj.clone()), tape.constant(x.clone()))?;
        let v = (*p.value()).clone();
        Ok(v)
    }

    /// Prediction for one instance; node-task graphs must carry a center.
    pub fn predict(&self, g: &Graph) -> Result<Prediction> {
        self.predict_dense(&g.adjacency_tensor(), &g.features_tensor(), g.center)
    }

    pub fn predict_dense(&self, adj: &Tensor, x: &Tensor, center: Option<usize>) -> Result<Prediction> {
        let tape = Tape::new();
        let bound = self.params.bind_frozen(&tape);
        let p = self.instance_probs(&bound, tape.constant(adj.clone()), tape.constant(x.clone()), center)?;
        let probs = p.value().data().to_vec();
        Ok(Prediction::from_probs(probs))
    }

    /// Per-node predictions on a node-task graph.
    pub fn predict_nodes(&self, g: &Graph) -> Result<Vec<Prediction>> {
        if self.task != Task::NodeClassification {
            return Err(Error::Contract("predict_nodes on a graph classifier".into()));
        }
        let p = self.probabilities(&g.adjacency_tensor(), &g.features_tensor())?;
        Ok(p.data()
            .chunks(self.num_classes)
            .map(|r| Prediction::from_probs(r.to_vec()))
            .collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors = self.params.clone();
        let task = match self.task {
            Task::GraphClassification => 0.0,
            Task::NodeClassification => 1.0,
        };
        tensors.push(
            "gcn.meta",
            Tensor::vector(vec![
                self.layers as f64,
                self.hidden as f64,
                task,
                self.num_classes as f64,
                self.feature_dim as f64,
            ]),
        );
        Checkpoint::new(tensors)
    }

    /// Rebuilds a classifier, validating metadata and every tensor shape.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let m = nn::meta_values(&ck.tensors, "gcn.meta", 5)?;
        let task = match m[2] {
            0 => Task::GraphClassification,
            1 => Task::NodeClassification,
            other => return Err(Error::Checkpoint(format!("unknown task code {other}"))),
        };
        let mut gcn = Self::new(m[4], m[3], task, m[0], m[1], 0).map_err(|e| Error::Checkpoint(e.to_string()))?;
        nn::check_layout(&gcn.params, &ck.tensors, "gcn.")?;
        let mut params = ParamSet::new();
        for name in gcn.params.names() {
            params.push(name.clone(), ck.tensors.get(name).expect("layout checked").clone());
        }
        gcn.params = params;
        Ok(gcn)
    }
}

fn check_inputs(adj: &Tensor, x: &Tensor, feature_dim: usize) -> Result<usize> {
    let n = adj.shape().first().copied().unwrap_or(0);
    if adj.shape() != [n, n] {
        return Err(Error::Shape(format!("adjacency must be square, got {:?}", adj.shape())));
    }
    if x.shape() != [n, feature_dim] {
        return Err(Error::Shape(format!("features {:?} for {n} nodes of dim {feature_dim}", x.shape())));
    }
    let a = adj.data();
    for i in 0..n {
        for j in 0..i {
            if (a[i * n + j] - a[j * n + i]).abs() > 1e-9 {
                return Err(Error::Contract(format!("asymmetric adjacency at ({i},{j})")));
            }
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub layers: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Graphs per optimizer step (graph tasks only; node tasks are full-batch).
    pub batch: usize,
    /// Independent initializations; the one with the best validation
    /// accuracy is kept. Ties go to the lower validation loss.
    pub restarts: usize,
    pub seed: u64,
}

impl ClassifierConfig {
    /// Defaults tuned per task: full-batch node training tolerates a larger step.
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::GraphClassification => Self::default(),
            Task::NodeClassification => Self { lr: 0.01, ..Self::default() },
        }
    }
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden: 32,
            epochs: 2000,
            lr: 0.003,
            batch: 32,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub gcn: Gcn,
    pub best_epoch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Which initialization was kept.
    pub restart: usize,
    /// Mean training cross-entropy per epoch of the kept run.
    pub loss_history: Vec<f64>,
}

/// Cross-entropy training with Adam. Keeps the parameters with the best
/// validation accuracy (ties broken by lower validation loss, then earlier
/// epoch) and reports held-out test accuracy for them.
pub fn train_classifier(ds: &Dataset, cfg: &ClassifierConfig, exec: Exec) -> Result<TrainedClassifier> {
    if ds.splits.train.is_empty() {
        return Err(Error::Param("empty training split".into()));
    }
    let mut best: Option<(TrainedClassifier, f64)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let seed = if restart == 0 { cfg.seed } else { rng::derive_seed(cfg.seed, "gcn-restart", restart as u64) };
        let (mut run, val_loss) = train_once(ds, cfg, seed, exec)?;
        run.restart = restart;
        log::info!("classifier restart {restart}: val acc {:.4} loss {val_loss:.4}", run.val_accuracy);
        let better = match &best {
            None => true,
            Some((b, l)) => run.val_accuracy > b.val_accuracy || (run.val_accuracy == b.val_accuracy && val_loss < *l),
        };
        if better {
            best = Some((run, val_loss));
        }
    }
    Ok(best.expect("at least one run").0)
}

fn train_once(ds: &Dataset, cfg: &ClassifierConfig, seed: u64, exec: Exec) -> Result<(TrainedClassifier, f64)> {
    let mut gcn = Gcn::new(ds.feature_dim, ds.num_classes, ds.task, cfg.layers, cfg.hidden, seed)?;
    let mut adam = Adam::new(&gcn.params, cfg.lr);
    let mut best: Option<(f64, f64, usize, ParamSet)> = None;
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batches: Vec<Vec<usize>> = match ds.task {
            Task::GraphClassification => {
                let mut order = ds.splits.train.clone();
                order.shuffle(&mut rng::stream(seed, "gcn-epoch", epoch as u64));
                order.chunks(cfg.batch.max(1)).map(<[usize]>::to_vec).collect()
            }
            Task::NodeClassification => vec![ds.splits.train.clone()],
        };
        let mut epoch_loss = 0.0;
        for batch in &batches {
            let (loss, grads) = batch_gradient(&gcn, ds, batch, exec)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Numeric(format!(
                    "classifier loss became {loss} at epoch {epoch} (grad norm {})",
                    grads.norm()
                )));
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut gcn.params, &grads);
        }
        loss_history.push(epoch_loss / ds.splits.train.len() as f64);
        let (val_acc, val_loss) = evaluate(&gcn, ds, &ds.splits.val, exec)?;
        let better = match &best {
            None => true,
            Some((acc, loss, _, _)) => val_acc > *acc || (val_acc == *acc && val_loss < *loss),
        };
        if better {
            best = Some((val_acc, val_loss, epoch, gcn.params.clone()));
        }
    }
    let (val_accuracy, val_loss, best_epoch, params) = match best {
        Some(b) => b,
        None => {
            let (acc, loss) = evaluate(&gcn, ds, &ds.splits.val, exec)?;
            (acc, loss, 0, gcn.params.clone())
        }
    };
    gcn.params = params;
    let run = TrainedClassifier {
        train_accuracy: evaluate(&gcn, ds, &ds.splits.train, exec)?.0,
        test_accuracy: evaluate(&gcn, ds, &ds.splits.test, exec)?.0,
        val_accuracy,
        best_epoch,
        restart: 0,
        loss_history,
        gcn,
    };
    Ok((run, val_loss))
}

/// Mean cross-entropy over `items` and its gradient.
fn batch_gradient(gcn: &Gcn, ds: &Dataset, items: &[usize], exec: Exec) -> Result<(f64, GradBuffer)> {
    let scale = 1.0 / items.len() as f64;
    match ds.task {
        Task::NodeClassification => {
            let g = &ds.graphs[0];
            let tape = Tape::new();
            let bound = gcn.params.bind(&tape);
            let logp = gcn
                .logits(&bound, tape.constant(g.adjacency_tensor()), tape.constant(g.features_tensor()))?
                .log_softmax()?;
            let picks: Vec<usize> = items.iter().map(|&i| i * gcn.num_classes + ds.label_of(i)).collect();
            let loss = logp.select(&picks)?.sum(None)?.scale(-scale);
            let grads = tape.backward(loss)?;
            let mut buf = GradBuffer::zeros_like(&gcn.params);
            buf.accumulate(&grads, &bound);
            Ok((loss.value().item(), buf))
        }
        Task::GraphClassification => {
            let parts = exec.map(items, |_, &i| -> Result<(f64, GradBuffer)> {
                let g = &ds.graphs[i];
                let tape = Tape::new();
                let bound = gcn.params.bind(&tape);
                let logp = gcn
                    .logits(&bound, tape.constant(g.adjacency_tensor()), tape.constant(g.features_tensor()))?
                    .log_softmax()?;
                let loss = logp.select(&[ds.label_of(i)])?.sum(None)?.scale(-scale);
                let grads = tape.backward(loss)?;
                let mut buf = GradBuffer::zeros_like(&gcn.params);
                buf.accumulate(&grads, &bound);
                Ok((loss.value().item(), buf))
            });
            let mut total = GradBuffer::zeros_like(&gcn.params);
            let mut loss = 0.0;
            for part in parts {
                let (l, b) = part?;
                loss += l;
                total.add(&b);
            }
            Ok((loss, total))
        }
    }
}

/// Accuracy and mean cross-entropy on `items`. An empty set scores 1.0.
pub fn evaluate(gcn: &Gcn, ds: &Dataset, items: &[usize], exec: Exec) -> Result<(f64, f64)> {
    if items.is_empty() {
        return Ok((1.0, 0.0));
    }
    let preds: Vec<Prediction> = match ds.task {
        Task::NodeClassification => {
            let all = gcn.predict_nodes(&ds.graphs[0])?;
            items.iter().map(|&i| all[i].clone()).collect()
        }
        Task::GraphClassification => exec
            .map(items, |_, &i| gcn.predict(&ds.graphs[i]))
            .into_iter()
            .collect::<Result<_>>()?,
    };
    let mut correct = 0;
    let mut loss = 0.0;
    for (p, &i) in preds.iter().zip(items) {
        let y = ds.label_of(i);
        correct += usize::from(p.label == y);
        loss -= p.probs[y].max(1e-300).ln();
    }
    let k = items.len() as f64;
    Ok((correct as f64 / k, loss / k))
}
