//! Multilayer perceptron: tanh hidden layers, linear output, Adam on MSE.
//!
//! Layer `j` is a dense `out x (in + 1)` matrix stored row-major with the
//! bias in the last column. Inputs are expected to be already normalized
//! (see [`Normalizer`]); targets stay in their physical units.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeling::LabeledExample;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid topology {0:?}")]
    BadTopology(String),
    #[error("input has {actual} features, network expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("networks have different topologies: {0} vs {1}")]
    TopologyMismatch(Topology, Topology),
    #[error("no networks to average")]
    NothingToAverage,
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("weights line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    layer_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, MlpError> {
        let bad = || MlpError::BadTopology(format!("{layer_sizes:?}"));
        if layer_sizes.len() < 3 || layer_sizes.contains(&0) || *layer_sizes.last().unwrap() != 1 {
            return Err(bad());
        }
        Ok(Topology { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of weight matrices.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

impl FromStr for Topology {
    type Err = MlpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let sizes = s
            .trim()
            .split('-')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| MlpError::BadTopology(s.to_string()))?;
        Topology::new(sizes).map_err(|_| MlpError::BadTopology(s.to_string()))
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.layer_sizes.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// g1(x) = -1 + 2 / (1 + exp(-2x)), evaluated as tanh for accuracy.
pub fn tan_sigmoid(x: f64) -> f64 {
    x.tanh()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    topology: Topology,
    layers: Vec<Matrix>,
}

impl MlpNetwork {
    pub fn zeros(topology: &Topology) -> Self {
        let layers = topology
            .layer_sizes
            .windows(2)
            .map(|w| Matrix::zeros(w[1], w[0] + 1))
            .collect();
        MlpNetwork { topology: topology.clone(), layers }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(topology: &Topology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = MlpNetwork::zeros(topology);
        for m in &mut net.layers {
            let fan_in = (m.cols - 1) as f64;
            let fan_out = m.rows as f64;
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            for r in 0..m.rows {
                for c in 0..m.cols - 1 {
                    m.set(r, c, rng.random_range(-limit..limit));
                }
            }
        }
        net
    }

    pub fn from_layers(topology: Topology, layers: Vec<Matrix>) -> Result<Self, MlpError> {
        if layers.len() != topology.depth() {
            return Err(MlpError::BadTopology(format!(
                "{topology} needs {} layers, got {}",
                topology.depth(),
                layers.len()
            )));
        }
        for (j, (m, w)) in layers.iter().zip(topology.layer_sizes.windows(2)).enumerate() {
            if m.rows != w[1] || m.cols != w[0] + 1 || m.data.len() != m.rows * m.cols {
                return Err(MlpError::BadTopology(format!(
                    "layer {j} is {}x{}, expected {}x{}",
                    m.rows,
                    m.cols,
                    w[1],
                    w[0] + 1
                )));
            }
            if m.data.iter().any(|v| !v.is_finite()) {
                return Err(MlpError::BadTopology(format!("layer {j} has non-finite weights")));
            }
        }
        Ok(MlpNetwork { topology, layers })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Matrix] {
        &mut self.layers
    }

    /// Sets the output bias, e.g. to the target mean before training.
    pub fn set_output_bias(&mut self, value: f64) {
        let last = self.layers.last_mut().unwrap();
        let c = last.cols - 1;
        last.set(0, c, value);
    }

    fn check_dim(&self, input: &[f64]) -> Result<(), MlpError> {
        if input.len() != self.topology.inputs() {
            return Err(MlpError::DimensionMismatch {
                expected: self.topology.inputs(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64, MlpError> {
        self.check_dim(input)?;
        let mut acts = Activations::new(&self.topology);
        Ok(self.forward_into(input, &mut acts))
    }

    pub fn predict_all(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, MlpError> {
        let mut acts = Activations::new(&self.topology);
        inputs
            .iter()
            .map(|x| {
                self.check_dim(x)?;
                Ok(self.forward_into(x, &mut acts))
            })
            .collect()
    }

    fn forward_into(&self, input: &[f64], acts: &mut Activations) -> f64 {
        acts.a[0].copy_from_slice(input);
        let last = self.layers.len() - 1;
        for (j, m) in self.layers.iter().enumerate() {
            let (prev, next) = acts.a.split_at_mut(j + 1);
            let a_in = &prev[j];
            let a_out = &mut next[0];
            for r in 0..m.rows {
                let row = m.row(r);
                let mut z = row[m.cols - 1];
                for (w, x) in row[..m.cols - 1].iter().zip(a_in) {
                    z += w * x;
                }
                a_out[r] = if j == last { z } else { tan_sigmoid(z) };
            }
        }
        acts.a[self.layers.len()][0]
    }

    /// Adds `scale` times the gradient of the squared error into `grads`
    /// and returns the squared error.
    fn backprop_into(
        &self,
        input: &[f64],
        target: f64,
        scale: f64,
        acts: &mut Activations,
        grads: &mut [Matrix],
    ) -> f64 {
        let y_hat = self.forward_into(input, acts);
        let err = y_hat - target;
        let depth = self.layers.len();
        acts.delta[depth - 1][0] = 2.0 * err * scale;
        for j in (0..depth).rev() {
            let m = &self.layers[j];
            let g = &mut grads[j];
            let a_in = &acts.a[j];
            for r in 0..m.rows {
                let d = acts.delta[j][r];
                let grow = &mut g.data[r * g.cols..(r + 1) * g.cols];
                for (gw, x) in grow[..m.cols - 1].iter_mut().zip(a_in) {
                    *gw += d * x;
                }
                grow[m.cols - 1] += d;
            }
            if j > 0 {
                let (lower, upper) = acts.delta.split_at_mut(j);
                let d_out = &upper[0];
                let d_in = &mut lower[j - 1];
                for c in 0..m.cols - 1 {
                    let mut s = 0.0;
                    for r in 0..m.rows {
                        s += m.get(r, c) * d_out[r];
                    }
                    let a = a_in[c];
                    d_in[c] = s * (1.0 - a * a);
                }
            }
        }
        err * err
    }

    /// Mean squared error over a dataset.
    pub fn loss(&self, data: &Dataset) -> Result<f64, MlpError> {
        data.check(self.topology.inputs())?;
        let mut acts = Activations::new(&self.topology);
        let sse: f64 = data
            .inputs
            .iter()
            .zip(&data.targets)
            .map(|(x, &y)| {
                let e = self.forward_into(x, &mut acts) - y;
                e * e
            })
            .sum();
        Ok(sse / data.len() as f64)
    }

    /// Analytic gradient of the dataset MSE.
    pub fn gradient(&self, data: &Dataset) -> Result<Vec<Matrix>, MlpError> {
        data.check(self.topology.inputs())?;
        let mut acts = Activations::new(&self.topology);
        let mut grads = self.zero_like();
        let scale = 1.0 / data.len() as f64;
        for (x, &y) in data.inputs.iter().zip(&data.targets) {
            self.backprop_into(x, y, scale, &mut acts, &mut grads);
        }
        Ok(grads)
    }

    fn zero_like(&self) -> Vec<Matrix> {
        self.layers.iter().map(|m| Matrix::zeros(m.rows, m.cols)).collect()
    }

    pub fn to_weights_text(&self) -> String {
        let mut s = format!("mlp-weights v1\ntopology {}\n", self.topology);
        for (j, m) in self.layers.iter().enumerate() {
            s.push_str(&format!("layer {j} {}x{}\n", m.rows, m.cols));
            for r in 0..m.rows {
                let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
        }
        s
    }

    pub fn from_weights_text(text: &str) -> Result<Self, MlpError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| MlpError::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            })
        };
        let perr = |line: usize, msg: String| MlpError::Parse { line: line + 1, msg };

        let (i, header) = next("header")?;
        if header.trim() != "mlp-weights v1" {
            return Err(perr(i, format!("unsupported header {header:?}")));
        }
        let (i, topo) = next("topology")?;
        let topology: Topology = topo
            .trim()
            .strip_prefix("topology ")
            .ok_or_else(|| perr(i, "expected `topology` line".into()))?
            .parse()
            .map_err(|e: MlpError| perr(i, e.to_string()))?;
        let mut layers = Vec::new();
        for (j, w) in topology.layer_sizes.windows(2).enumerate() {
            let (i, hdr) = next("layer header")?;
            let expect = format!("layer {j} {}x{}", w[1], w[0] + 1);
            if hdr.trim() != expect {
                return Err(perr(i, format!("expected {expect:?}, got {hdr:?}")));
            }
            let mut m = Matrix::zeros(w[1], w[0] + 1);
            for r in 0..m.rows {
                let (i, row) = next("weight row")?;
                let vals = row
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| perr(i, format!("bad number {t:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if vals.len() != m.cols {
                    return Err(perr(i, format!("expected {} values, got {}", m.cols, vals.len())));
                }
                m.data[r * m.cols..(r + 1) * m.cols].copy_from_slice(&vals);
            }
            layers.push(m);
        }
        MlpNetwork::from_layers(topology, layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MlpError> {
        fs::write(path, self.to_weights_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        MlpNetwork::from_weights_text(&fs::read_to_string(path)?)
    }
}

struct Activations {
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Activations {
    fn new(t: &Topology) -> Self {
        Activations {
            a: t.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: t.layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Per-feature min-max scaling to [0, 1], fitted on training inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(inputs: &[Vec<f64>]) -> Result<Self, MlpError> {
        let first = inputs.first().ok_or(MlpError::EmptyDataset)?;
        let mut min = first.clone();
        let mut max = first.clone();
        for x in inputs {
            if x.len() != min.len() {
                return Err(MlpError::DimensionMismatch { expected: min.len(), actual: x.len() });
            }
            for (k, &v) in x.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Normalizer { min, max })
    }

    pub fn identity(dim: usize) -> Self {
        Normalizer { min: vec![0.0; dim], max: vec![1.0; dim] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    /// Merges ranges so several nodes can share one scaling.
    pub fn union(&self, other: &Normalizer) -> Normalizer {
        Normalizer {
            min: self.min.iter().zip(&other.min).map(|(a, b)| a.min(*b)).collect(),
            max: self.max.iter().zip(&other.max).map(|(a, b)| a.max(*b)).collect(),
        }
    }
}

/// Inputs, targets and labels of a set of examples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn from_examples(examples: &[LabeledExample]) -> Self {
        Dataset {
            inputs: examples.iter().map(|e| e.inputs.clone()).collect(),
            targets: examples.iter().map(|e| e.expected).collect(),
            labels: examples.iter().map(|e| e.label).collect(),
        }
    }

    pub fn normalized(&self, norm: &Normalizer) -> Self {
        Dataset {
            inputs: self.inputs.iter().map(|x| norm.apply(x)).collect(),
            targets: self.targets.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn check(&self, dim: usize) -> Result<(), MlpError> {
        if self.is_empty() {
            return Err(MlpError::EmptyDataset);
        }
        if let Some(x) = self.inputs.iter().find(|x| x.len() != dim) {
            return Err(MlpError::DimensionMismatch { expected: dim, actual: x.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Residual tolerance for training accuracy, in target units.
    pub tol: f64,
    pub seed: u64,
    /// Examples per Adam step; `None` uses the whole dataset.
    pub batch_size: Option<usize>,
    /// Keeps an exponential moving average of the weights, updated after
    /// every step, and returns it in place of the raw weights.
    pub ema_momentum: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.01,
            epochs: 500,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            tol: 0.01,
            seed: 0,
            batch_size: Some(32),
            ema_momentum: Some(0.99),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: &str| Err(MlpError::BadConfig(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be positive");
        }
        if self.ema_momentum.is_some_and(|m| !(0.0..1.0).contains(&m)) {
            return bad("EMA momentum must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Adam moment estimates; kept across calls to continue training smoothly.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(net: &MlpNetwork) -> Self {
        AdamState { m: net.zero_like(), v: net.zero_like(), step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn update(&mut self, net: &mut MlpNetwork, grads: &[Matrix], cfg: &TrainingConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step.min(i32::MAX as u64) as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step.min(i32::MAX as u64) as i32);
        for (j, w) in net.layers.iter_mut().enumerate() {
            let g = &grads[j].data;
            let m = &mut self.m[j].data;
            let v = &mut self.v[j].data;
            for k in 0..w.data.len() {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                w.data[k] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Trains from fresh Adam moments; returns the per-epoch loss trace.
pub fn train(net: &mut MlpNetwork, data: &Dataset, cfg: &TrainingConfig) -> Result<Vec<f64>, MlpError> {
    let mut state = AdamState::new(net);
    train_with_state(net, &mut state, data, cfg)
}

/// Each entry of the trace is the mean squared error seen during that epoch.
pub fn train_with_state(
    net: &mut MlpNetwork,
    state: &mut AdamState,
    data: &Dataset,
    cfg: &TrainingConfig,
) -> Result<Vec<f64>, MlpError> {
    cfg.validate()?;
    data.check(net.topology.inputs())?;
    if state.m.len() != net.layers.len() {
        *state = AdamState::new(net);
    }
    let n = data.len();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut acts = Activations::new(&net.topology);
    let mut grads = net.zero_like();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut ema = cfg.ema_momentum.map(|m| (m, net.layers.clone()));
    for epoch in 0..cfg.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut sse = 0.0;
        for chunk in order.chunks(batch) {
            for g in grads.iter_mut() {
                g.data.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                sse += net.backprop_into(&data.inputs[i], data.targets[i], scale, &mut acts, &mut grads);
            }
            state.update(net, &grads, cfg);
            if let Some((m, avg)) = ema.as_mut() {
                for (a, w) in avg.iter_mut().zip(&net.layers) {
                    for (x, y) in a.data.iter_mut().zip(&w.data) {
                        *x += (1.0 - *m) * (y - *x);
                    }
                }
            }
        }
        let loss = sse / n as f64;
        if !loss.is_finite() || net.layers.iter().any(|m| m.data.iter().any(|v| !v.is_finite())) {
            return Err(MlpError::Diverged { epoch: epoch + 1, loss });
        }
        trace.push(loss);
    }
    if let Some((_, avg)) = ema {
        net.layers = avg;
    }
    Ok(trace)
}

/// Fraction of examples with `|y_hat - y| < tol`.
pub fn training_accuracy(net: &MlpNetwork, data: &Dataset, tol: f64) -> Result<f64, MlpError> {
    if !(tol > 0.0) {
        return Err(MlpError::BadConfig("tolerance must be positive".into()));
    }
    data.check(net.topology.inputs())?;
    let preds = net.predict_all(&data.inputs)?;
    let hits = preds.iter().zip(&data.targets).filter(|(p, y)| (*p - *y).abs() < tol).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Entrywise arithmetic mean of networks with one topology.
pub fn average_weights(nets: &[MlpNetwork]) -> Result<MlpNetwork, MlpError> {
    let first = nets.first().ok_or(MlpError::NothingToAverage)?;
    if let Some(other) = nets.iter().find(|n| n.topology != first.topology) {
        return Err(MlpError::TopologyMismatch(first.topology.clone(), other.topology.clone()));
    }
    // first + mean of deviations, so identical inputs come back bit-exact
    let mut out = first.clone();
    let k = nets.len() as f64;
    for (j, m) in out.layers.iter_mut().enumerate() {
        for (idx, v) in m.data.iter_mut().enumerate() {
            let base = *v;
            *v = base + nets.iter().map(|n| n.layers[j].data[idx] - base).sum::<f64>() / k;
        }
    }
    Ok(out)
}

/// Max relative error between backprop and central differences (h = 1e-5).
pub fn gradient_check(net: &MlpNetwork, data: &Dataset) -> Result<f64, MlpError> {
    const H: f64 = 1e-5;
    let analytic = net.gradient(data)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for j in 0..net.layers.len() {
        for k in 0..net.layers[j].data.len() {
            let w = net.layers[j].data[k];
            probe.layers[j].data[k] = w + H;
            let up = probe.loss(data)?;
            probe.layers[j].data[k] = w - H;
            let down = probe.loss(data)?;
            probe.layers[j].data[k] = w;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic[j].data[k];
            let scale = a.abs().max(numeric.abs());
            // both effectively zero
            if scale < 1e-7 {
                continue;
            }
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    Ok(worst)
}

/// `epoch,loss` records, one-based epochs.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        s.push_str(&format!("{},{l:?}\n", i + 1));
    }
    s
}
