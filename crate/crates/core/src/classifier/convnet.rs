//! Small 1D convolutional network.
//!
//! The m/z channels are the input features of a signal running along
//! retention time: every kernel spans all channels and `kernel` rows. Each
//! block is a valid (unpadded) convolution, ReLU, and non-overlapping max
//! pooling; dense ReLU layers follow, then `K + 1` logits.

use std::fmt;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{softmax, ClassifierModel, ModelKind, ModelMeta, ProbVector};
use crate::dataset::TrainingSet;
use crate::error::{Error, Result};
use crate::matrix::{AbundanceMatrix, DEFAULT_TARGETS};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub filters: usize,
    /// Kernel length in retention-time rows.
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvNetConfig {
    pub blocks: Vec<ConvBlock>,
    pub dense: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Number of target compounds `K`.
    pub targets: u16,
}

impl Default for ConvNetConfig {
    fn default() -> Self {
        let block = |filters| ConvBlock {
            filters,
            kernel: 5,
            pool: 2,
        };
        Self {
            blocks: vec![block(32), block(64), block(64)],
            dense: vec![128],
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            targets: DEFAULT_TARGETS,
        }
    }
}

impl ConvNetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("convnet: {m}")));
        if self.blocks.is_empty() {
            return bad("at least one conv block is required");
        }
        if self
            .blocks
            .iter()
            .any(|b| b.kernel == 0 || b.pool == 0 || b.filters == 0)
        {
            return bad("kernel, pool and filter counts must be at least 1");
        }
        if self.dense.contains(&0) {
            return bad("dense widths must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer {
    cin: usize,
    cout: usize,
    k: usize,
    pool: usize,
    lconv: usize,
    lout: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    nin: usize,
    nout: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    conv: Vec<ConvLayer>,
    dense: Vec<DenseLayer>,
    len: usize,
}

impl Layout {
    fn new(delta: usize, channels: usize, blocks: &[ConvBlock], dense: &[usize], classes: usize) -> Result<Self> {
        let mut off = 0;
        let mut conv = Vec::new();
        let (mut len, mut cin) = (delta, channels);
        for (i, b) in blocks.iter().enumerate() {
            if len < b.kernel || (len - b.kernel + 1) / b.pool == 0 {
                return Err(Error::Config(format!(
                    "convnet block {} gets {len} rows, too few for kernel {} and pool {}",
                    i + 1,
                    b.kernel,
                    b.pool
                )));
            }
            let lconv = len - b.kernel + 1;
            let lout = lconv / b.pool;
            let w = off;
            off += b.filters * b.kernel * cin;
            let bias = off;
            off += b.filters;
            conv.push(ConvLayer {
                cin,
                cout: b.filters,
                k: b.kernel,
                pool: b.pool,
                lconv,
                lout,
                w,
                b: bias,
            });
            len = lout;
            cin = b.filters;
        }
        let mut nin = len * cin;
        let mut layers = Vec::new();
        for &nout in dense.iter().chain(std::iter::once(&classes)) {
            let w = off;
            off += nout * nin;
            let b = off;
            off += nout;
            layers.push(DenseLayer { nin, nout, w, b });
            nin = nout;
        }
        Ok(Self {
            conv,
            dense: layers,
            len: off,
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Activations kept for back-propagation.
struct Trace {
    conv: Vec<Vec<f64>>,
    pool: Vec<Vec<f64>>,
    arg: Vec<Vec<u32>>,
    dense: Vec<Vec<f64>>,
}

impl Trace {
    fn logits(&self) -> &[f64] {
        self.dense.last().expect("output layer")
    }
}

#[derive(Clone, PartialEq)]
pub struct ConvNet {
    meta: ModelMeta,
    blocks: Vec<ConvBlock>,
    dense: Vec<usize>,
    params: Vec<f64>,
    layout: Layout,
}

impl fmt::Debug for ConvNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvNet")
            .field("meta", &self.meta)
            .field("blocks", &self.blocks)
            .field("dense", &self.dense)
            .field("params", &self.params.len())
            .finish()
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct ConvNetRepr {
    meta: ModelMeta,
    blocks: Vec<ConvBlock>,
    dense: Vec<usize>,
    params: Vec<f64>,
}

impl Serialize for ConvNet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConvNetRepr {
            meta: self.meta.clone(),
            blocks: self.blocks.clone(),
            dense: self.dense.clone(),
            params: self.params.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvNet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ConvNetRepr::deserialize(d)?;
        ConvNet::from_parts(r.meta, r.blocks, r.dense, r.params).map_err(serde::de::Error::custom)
    }
}

impl ConvNet {
    /// Weights drawn uniformly from `+-sqrt(6 / fan_in)`, biases zero.
    pub fn init(delta: usize, channels: usize, cfg: &ConvNetConfig) -> Result<Self> {
        cfg.validate()?;
        let meta = ModelMeta {
            targets: cfg.targets,
            delta,
            channels,
            kind: ModelKind::ConvNet,
        };
        let layout = Layout::new(delta, channels, &cfg.blocks, &cfg.dense, meta.classes())?;
        let mut params = vec![0.0; layout.len];
        let mut rng = seed::rng(cfg.seed, "convnet-init", 0);
        let mut fill = |range: Range<usize>, fan_in: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-limit..limit);
            }
        };
        for l in &layout.conv {
            fill(l.w..l.b, l.k * l.cin, &mut rng);
        }
        for l in &layout.dense {
            fill(l.w..l.b, l.nin, &mut rng);
        }
        Ok(Self {
            meta,
            blocks: cfg.blocks.clone(),
            dense: cfg.dense.clone(),
            params,
            layout,
        })
    }

    fn from_parts(meta: ModelMeta, blocks: Vec<ConvBlock>, dense: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if meta.kind != ModelKind::ConvNet {
            return Err(Error::Format("model kind is not convnet".into()));
        }
        let layout = Layout::new(meta.delta, meta.channels, &blocks, &dense, meta.classes())?;
        if params.len() != layout.len {
            return Err(Error::Format(format!(
                "convnet expects {} parameters, file has {}",
                layout.len,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("convnet parameters must be finite".into()));
        }
        Ok(Self {
            meta,
            blocks,
            dense,
            params,
            layout,
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Ok(())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// The same architecture with other parameter values.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.meta.clone(), self.blocks.clone(), self.dense.clone(), params)
    }

    /// Parameter index ranges of each layer's weights and biases, input to output.
    pub fn param_groups(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (i, l) in self.layout.conv.iter().enumerate() {
            out.push((format!("conv{i}.w"), l.w..l.b));
            out.push((format!("conv{i}.b"), l.b..l.b + l.cout));
        }
        for (i, l) in self.layout.dense.iter().enumerate() {
            out.push((format!("dense{i}.w"), l.w..l.b));
            out.push((format!("dense{i}.b"), l.b..l.b + l.nout));
        }
        out
    }

    pub fn blocks(&self) -> &[ConvBlock] {
        &self.blocks
    }

    fn w(&self, l: &ConvLayer, o: usize) -> &[f64] {
        let n = l.k * l.cin;
        &self.params[l.w + o * n..l.w + (o + 1) * n]
    }

    /// Convolution of layer `l` over `input`, ReLU applied.
    fn conv(&self, l: &ConvLayer, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; l.lconv * l.cout];
        let bias = &self.params[l.b..l.b + l.cout];
        for t in 0..l.lconv {
            let xs = &input[t * l.cin..(t + l.k) * l.cin];
            let row = &mut out[t * l.cout..(t + 1) * l.cout];
            for (o, y) in row.iter_mut().enumerate() {
                *y = (bias[o] + dot(self.w(l, o), xs)).max(0.0);
            }
        }
        out
    }

    fn pool(l: &ConvLayer, conv: &[f64]) -> (Vec<f64>, Vec<u32>) {
        let mut out = vec![0.0; l.lout * l.cout];
        let mut arg = vec![0u32; l.lout * l.cout];
        for t in 0..l.lout {
            for o in 0..l.cout {
                let mut best = t * l.pool * l.cout + o;
                for j in 1..l.pool {
                    let idx = (t * l.pool + j) * l.cout + o;
                    if conv[idx] > conv[best] {
                        best = idx;
                    }
                }
                out[t * l.cout + o] = conv[best];
                arg[t * l.cout + o] = best as u32;
            }
        }
        (out, arg)
    }

    /// Everything after the first convolution.
    fn forward_tail(&self, conv0: Vec<f64>) -> Trace {
        let nconv = self.layout.conv.len();
        let mut trace = Trace {
            conv: Vec::with_capacity(nconv),
            pool: Vec::with_capacity(nconv),
            arg: Vec::with_capacity(nconv),
            dense: Vec::with_capacity(self.layout.dense.len()),
        };
        trace.conv.push(conv0);
        for (i, l) in self.layout.conv.iter().enumerate() {
            if i > 0 {
                let c = self.conv(l, &trace.pool[i - 1]);
                trace.conv.push(c);
            }
            let (p, a) = Self::pool(l, &trace.conv[i]);
            trace.pool.push(p);
            trace.arg.push(a);
        }
        let last = self.layout.dense.len() - 1;
        for (i, l) in self.layout.dense.iter().enumerate() {
            let input = if i == 0 {
                trace.pool.last().unwrap()
            } else {
                &trace.dense[i - 1]
            };
            let mut out = vec![0.0; l.nout];
            for (o, y) in out.iter_mut().enumerate() {
                let w = &self.params[l.w + o * l.nin..l.w + (o + 1) * l.nin];
                let z = self.params[l.b + o] + dot(w, input);
                *y = if i == last { z } else { z.max(0.0) };
            }
            trace.dense.push(out);
        }
        trace
    }

    fn forward(&self, x: &[f64]) -> Trace {
        let conv0 = self.conv(&self.layout.conv[0], x);
        self.forward_tail(conv0)
    }

    /// Raw output scores for a normalized input.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.meta.check_input(x.len())?;
        Ok(self.forward(x).logits().to_vec())
    }

    /// Adds the cross-entropy gradient for one point to `grad`; returns the loss.
    fn backward(&self, x: &[f64], trace: &Trace, label: usize, grad: &mut [f64]) -> f64 {
        let logits = trace.logits();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
        let loss = lse - logits[label];

        let mut g: Vec<f64> = logits.iter().map(|&z| (z - lse).exp()).collect();
        g[label] -= 1.0;

        for (i, l) in self.layout.dense.iter().enumerate().rev() {
            let input: &[f64] = if i == 0 {
                trace.pool.last().unwrap()
            } else {
                &trace.dense[i - 1]
            };
            let mut gin = vec![0.0; l.nin];
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                let wr = l.w + o * l.nin..l.w + (o + 1) * l.nin;
                axpy(&mut grad[wr.clone()], go, input);
                grad[l.b + o] += go;
                axpy(&mut gin, go, &self.params[wr]);
            }
            if i > 0 {
                for (gi, &a) in gin.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            g = gin;
        }

        for (li, l) in self.layout.conv.iter().enumerate().rev() {
            let mut gconv = vec![0.0; l.lconv * l.cout];
            for (&idx, &gp) in trace.arg[li].iter().zip(&g) {
                gconv[idx as usize] += gp;
            }
            for (gc, &a) in gconv.iter_mut().zip(&trace.conv[li]) {
                if a <= 0.0 {
                    *gc = 0.0;
                }
            }
            let input: &[f64] = if li == 0 { x } else { &trace.pool[li - 1] };
            let n = l.k * l.cin;
            let mut gin = if li > 0 { vec![0.0; input.len()] } else { Vec::new() };
            for t in 0..l.lconv {
                let xs = &input[t * l.cin..(t + l.k) * l.cin];
                for o in 0..l.cout {
                    let go = gconv[t * l.cout + o];
                    if go == 0.0 {
                        continue;
                    }
                    let wr = l.w + o * n..l.w + (o + 1) * n;
                    axpy(&mut grad[wr.clone()], go, xs);
                    grad[l.b + o] += go;
                    if li > 0 {
                        axpy(&mut gin[t * l.cin..(t + l.k) * l.cin], go, &self.params[wr]);
                    }
                }
            }
            g = gin;
        }
        loss
    }

    /// Cross-entropy loss of one point and its gradient with respect to all parameters.
    pub fn loss_and_gradient(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        self.meta.check_input(x.len())?;
        if label >= self.meta.classes() {
            return Err(Error::Contract(format!("label {label} outside the model's classes")));
        }
        let mut grad = vec![0.0; self.params.len()];
        let trace = self.forward(x);
        let loss = self.backward(x, &trace, label, &mut grad);
        Ok((loss, grad))
    }

    /// Same network for inputs whose channel `c` moved to `perm[c]`.
    pub fn permute_input_channels(&self, perm: &[usize]) -> Result<Self> {
        let c = self.meta.channels;
        let mut seen = vec![false; c];
        if perm.len() != c || perm.iter().any(|&p| p >= c || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Contract(format!("not a permutation of {c} channels")));
        }
        let mut out = self.clone();
        let l = &self.layout.conv[0];
        for o in 0..l.cout {
            for j in 0..l.k {
                let base = l.w + o * l.k * c + j * c;
                for (src, &dst) in perm.iter().enumerate() {
                    out.params[base + dst] = self.params[base + src];
                }
            }
        }
        Ok(out)
    }
}

impl ClassifierModel for ConvNet {
    fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    fn predict(&self, values: &[f64]) -> Result<ProbVector> {
        Ok(softmax(&self.logits(values)?))
    }

    /// The first convolution is linear in the raw window, so it is computed
    /// once over the matrix and each window's min-max scaling is applied to
    /// the result: `(W.v - min * sum(W)) / (max - min) + b`.
    fn predict_windows(&self, a: &AbundanceMatrix, starts: Range<usize>) -> Result<Vec<ProbVector>> {
        self.meta.check_matrix(a, &starts)?;
        if starts.is_empty() {
            return Ok(Vec::new());
        }
        let (delta, c) = (self.meta.delta, self.meta.channels);
        let l = &self.layout.conv[0];
        let first = starts.start;
        let rows = starts.end - 1 + delta - first;
        let data = &a.data()[first * c..(first + rows) * c];

        let positions = rows - l.k + 1;
        let mut raw = vec![0.0; positions * l.cout];
        for t in 0..positions {
            let xs = &data[t * c..(t + l.k) * c];
            for o in 0..l.cout {
                raw[t * l.cout + o] = dot(self.w(l, o), xs);
            }
        }
        let wsum: Vec<f64> = (0..l.cout).map(|o| self.w(l, o).iter().sum()).collect();
        let bias = &self.params[l.b..l.b + l.cout];
        let (row_min, row_max): (Vec<f64>, Vec<f64>) = data
            .chunks_exact(c)
            .map(|r| {
                r.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            })
            .unzip();

        starts
            .map(|s| {
                let off = s - first;
                let lo = row_min[off..off + delta].iter().copied().fold(f64::INFINITY, f64::min);
                let hi = row_max[off..off + delta]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                let mut conv0 = vec![0.0; l.lconv * l.cout];
                for t in 0..l.lconv {
                    for o in 0..l.cout {
                        let z = if range > 0.0 {
                            (raw[(off + t) * l.cout + o] - lo * wsum[o]) / range + bias[o]
                        } else {
                            bias[o]
                        };
                        conv0[t * l.cout + o] = z.max(0.0);
                    }
                }
                Ok(softmax(self.forward_tail(conv0).logits()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's mini-batches.
    pub loss: f64,
    /// Accuracy of the predictions made while training.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub points: usize,
    pub epochs: Vec<EpochStats>,
    /// Accuracy of the trained model over the whole training set.
    pub final_accuracy: f64,
}

fn check_point<S: TrainingSet + ?Sized>(data: &S, meta: &ModelMeta, i: usize) -> Result<()> {
    let label = data.label(i);
    if label.index() >= meta.classes() {
        return Err(Error::Contract(format!(
            "point {i} has label {label}, above the {} targets",
            meta.targets
        )));
    }
    Ok(())
}

/// Mini-batch gradient descent with momentum on the mean cross-entropy.
/// Deterministic for a fixed `cfg.seed`.
pub fn train_convnet<S: TrainingSet + ?Sized>(
    data: &S,
    cfg: &ConvNetConfig,
) -> Result<(ConvNet, TrainingReport)> {
    if data.is_empty() {
        return Err(Error::Contract("training set is empty".into()));
    }
    let mut net = ConvNet::init(data.delta(), data.channels(), cfg)?;
    for i in 0..data.len() {
        check_point(data, &net.meta, i)?;
    }
    let n = data.len();
    let mut velocity = vec![0.0; net.params.len()];
    let mut grad = vec![0.0; net.params.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(cfg.seed, "convnet-epoch", epoch as u64));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let p = data.point(i);
                if !p.normalized || p.values.len() != net.meta.input_len() {
                    return Err(Error::Contract(format!(
                        "training point {i} is not a normalized {} x {} window",
                        net.meta.delta, net.meta.channels
                    )));
                }
                let trace = net.forward(&p.values);
                if softmax(trace.logits()).argmax().0 == p.label {
                    correct += 1;
                }
                batch_loss += net.backward(&p.values, &trace, p.label.index(), &mut grad);
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite loss {batch_loss} in epoch {}, batch {b} of {} points (learning rate {})",
                    epoch + 1,
                    batch.len(),
                    cfg.learning_rate
                )));
            }
            loss_sum += batch_loss;
            let scale = cfg.learning_rate / batch.len() as f64;
            for ((p, v), g) in net.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - scale * g;
                *p += *v;
            }
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        };
        log::info!(
            "epoch {}/{}: loss {:.4}, accuracy {:.4}",
            stats.epoch,
            cfg.epochs,
            stats.loss,
            stats.accuracy
        );
        epochs.push(stats);
    }

    let correct = (0..n)
        .filter(|&i| {
            let p = data.point(i);
            softmax(net.forward(&p.values).logits()).argmax().0 == p.label
        })
        .count();
    let report = TrainingReport {
        points: n,
        epochs,
        final_accuracy: correct as f64 / n as f64,
    };
    Ok((net, report))
}
