//! Layer-string feedforward networks, MSE training with Adam, checkpoints.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::slide::SlideDataset;

/// Rows per gradient chunk. Chunks are reduced in index order, so results do
/// not depend on how many workers evaluate them.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
    Sigmoid,
    Relu,
    /// Exponential-linear with unit scale.
    Elu,
}

impl Activation {
    pub fn from_letter(c: char) -> Result<Self> {
        match c {
            'L' => Ok(Self::Linear),
            'T' => Ok(Self::Tanh),
            'S' => Ok(Self::Sigmoid),
            'R' => Ok(Self::Relu),
            'E' => Ok(Self::Elu),
            _ => Err(Error::InvalidArchitecture(format!("unknown layer letter '{c}'"))),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Self::Linear => 'L',
            Self::Tanh => 'T',
            Self::Sigmoid => 'S',
            Self::Relu => 'R',
            Self::Elu => 'E',
        }
    }

    fn apply<T: Float>(self, z: T) -> T {
        match self {
            Self::Linear => z,
            Self::Tanh => z.tanh(),
            Self::Sigmoid => T::one() / (T::one() + (-z).exp()),
            Self::Relu => z.max(T::zero()),
            Self::Elu => {
                if z > T::zero() {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    /// Derivative from the pre-activation `z` and the output `a`.
    fn slope<T: Float>(self, z: T, a: T) -> T {
        match self {
            Self::Linear => T::one(),
            Self::Tanh => T::one() - a * a,
            Self::Sigmoid => a * (T::one() - a),
            Self::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Elu => {
                if z > T::zero() {
                    T::one()
                } else {
                    a + T::one()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub layers: String,
    pub hidden_units: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ArchSpec {
    pub fn new(layers: &str, hidden_units: usize, in_dim: usize, out_dim: usize) -> Result<Self> {
        let spec = Self {
            layers: layers.to_string(),
            hidden_units,
            in_dim,
            out_dim,
        };
        spec.activations()?;
        if hidden_units == 0 || in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArchitecture("layer widths must be >= 1".into()));
        }
        Ok(spec)
    }

    pub fn activations(&self) -> Result<Vec<Activation>> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArchitecture("empty layer string".into()));
        }
        self.layers.chars().map(Activation::from_letter).collect()
    }

    /// `(fan_in, fan_out)` of each layer.
    pub fn dims(&self) -> Vec<(usize, usize)> {
        let n = self.layers.chars().count();
        (0..n)
            .map(|l| {
                let fan_in = if l == 0 { self.in_dim } else { self.hidden_units };
                let fan_out = if l + 1 == n { self.out_dim } else { self.hidden_units };
                (fan_in, fan_out)
            })
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.dims().iter().map(|(i, o)| (i + 1) * o).sum()
    }
}

/// Hidden width presets relative to the window length.
pub fn hidden_units_preset(preset: &str, t_d: usize) -> Result<usize> {
    match preset {
        "td" => Ok(t_d),
        "2td" => Ok(2 * t_d),
        "3td" => Ok(3 * t_d),
        _ => preset
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("hidden units must be td, 2td, 3td or a count, got '{preset}'"))),
    }
}

/// Fully connected layer; `w` is `[n_out x n_in]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
    pub act: Activation,
}

impl<T: Float> Dense<T> {
    fn zeros_like(&self) -> Self {
        Self {
            w: vec![T::zero(); self.w.len()],
            b: vec![T::zero(); self.b.len()],
            ..*self
        }
    }

    fn cast<U: Float>(&self) -> Dense<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::from(*x).unwrap()).collect();
        Dense {
            n_in: self.n_in,
            n_out: self.n_out,
            w: c(&self.w),
            b: c(&self.b),
            act: self.act,
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.w.iter_mut().zip(&other.w).chain(self.b.iter_mut().zip(&other.b)) {
            *a = *a + *b;
        }
    }
}

/// Data layout the network was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct NetMeta {
    pub t_d: usize,
    pub k: usize,
    pub sensors: Vec<String>,
    pub scale_x: Vec<f64>,
    pub scale_y: f64,
}

impl NetMeta {
    pub fn from_dataset(ds: &SlideDataset) -> Self {
        Self {
            t_d: ds.t_d,
            k: ds.k,
            sensors: ds.sensors.clone(),
            scale_x: ds.scale_x.clone(),
            scale_y: ds.scale_y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: ArchSpec,
    pub layers: Vec<Dense<f32>>,
    pub meta: NetMeta,
}

/// Glorot-uniform weights, zero biases.
pub fn build_network<R: Rng + ?Sized>(arch: &ArchSpec, meta: NetMeta, rng: &mut R) -> Result<Network> {
    let acts = arch.activations()?;
    let layers = arch
        .dims()
        .into_iter()
        .zip(acts)
        .map(|((n_in, n_out), act)| {
            let limit = (6.0 / (n_in + n_out) as f64).sqrt() as f32;
            Dense {
                n_in,
                n_out,
                w: (0..n_in * n_out).map(|_| rng.random_range(-limit..=limit)).collect(),
                b: vec![0.0; n_out],
                act,
            }
        })
        .collect();
    Ok(Network {
        arch: arch.clone(),
        layers,
        meta,
    })
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    // eight independent lanes, summed in a fixed order
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail = tail + a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

fn axpy<T: Float>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Pre-activations and outputs of every layer for `n` rows.
fn forward_trace<T: Float>(layers: &[Dense<T>], x: &[T], n: usize) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let mut zs = Vec::with_capacity(layers.len());
    let mut outs: Vec<Vec<T>> = Vec::with_capacity(layers.len());
    for layer in layers {
        let input = outs.last().map(|v| v.as_slice()).unwrap_or(x);
        let mut z = vec![T::zero(); n * layer.n_out];
        for r in 0..n {
            let xr = &input[r * layer.n_in..(r + 1) * layer.n_in];
            for o in 0..layer.n_out {
                z[r * layer.n_out + o] = layer.b[o] + dot(&layer.w[o * layer.n_in..(o + 1) * layer.n_in], xr);
            }
        }
        let a = z.iter().map(|&v| layer.act.apply(v)).collect();
        zs.push(z);
        outs.push(a);
    }
    (zs, outs)
}

fn forward_rows<T: Float>(layers: &[Dense<T>], x: &[T], n: usize) -> Vec<T> {
    forward_trace(layers, x, n).1.pop().unwrap_or_default()
}

/// Sum of squared errors and its gradient for `n` rows.
fn sse_grad<T: Float>(layers: &[Dense<T>], x: &[T], y: &[T], n: usize) -> (T, Vec<Dense<T>>) {
    let (zs, outs) = forward_trace(layers, x, n);
    let last = layers.len() - 1;
    let mut sse = T::zero();
    let two = T::one() + T::one();
    let mut delta: Vec<T> = outs[last]
        .iter()
        .zip(y)
        .zip(&zs[last])
        .map(|((&a, &t), &z)| {
            let e = a - t;
            sse = sse + e * e;
            two * e * layers[last].act.slope(z, a)
        })
        .collect();
    let mut grads: Vec<Dense<T>> = layers.iter().map(Dense::zeros_like).collect();
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let input = if l == 0 { x } else { outs[l - 1].as_slice() };
        let g = &mut grads[l];
        for r in 0..n {
            let xr = &input[r * layer.n_in..(r + 1) * layer.n_in];
            for o in 0..layer.n_out {
                let d = delta[r * layer.n_out + o];
                g.b[o] = g.b[o] + d;
                axpy(d, xr, &mut g.w[o * layer.n_in..(o + 1) * layer.n_in]);
            }
        }
        if l > 0 {
            let prev = &layers[l - 1];
            let mut next = vec![T::zero(); n * layer.n_in];
            for r in 0..n {
                let row = &mut next[r * layer.n_in..(r + 1) * layer.n_in];
                for o in 0..layer.n_out {
                    axpy(delta[r * layer.n_out + o], &layer.w[o * layer.n_in..(o + 1) * layer.n_in], row);
                }
                for (i, v) in row.iter_mut().enumerate() {
                    let idx = r * layer.n_in + i;
                    *v = *v * prev.act.slope(zs[l - 1][idx], outs[l - 1][idx]);
                }
            }
            delta = next;
        }
    }
    (sse, grads)
}

/// Sum of squared errors and gradient over rows `idx`, reduced chunk by chunk in order.
fn batch_sse_grad(layers: &[Dense<f32>], ds: &SlideDataset, idx: &[usize]) -> (f32, Vec<Dense<f32>>) {
    let (nx, ny) = (ds.n_inputs(), ds.n_outputs());
    let parts: Vec<(f32, Vec<Dense<f32>>)> = idx
        .par_chunks(CHUNK)
        .map(|rows| {
            let mut x = Vec::with_capacity(rows.len() * nx);
            let mut y = Vec::with_capacity(rows.len() * ny);
            for &r in rows {
                x.extend_from_slice(ds.x_row(r));
                y.extend_from_slice(ds.y_row(r));
            }
            sse_grad(layers, &x, &y, rows.len())
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut sse, mut grads) = iter.next().expect("non-empty batch");
    for (s, g) in iter {
        sse += s;
        for (a, b) in grads.iter_mut().zip(&g) {
            a.add_assign(b);
        }
    }
    (sse, grads)
}

impl Network {
    pub fn in_dim(&self) -> usize {
        self.arch.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.arch.out_dim
    }

    /// Outputs for `n = x.len() / in_dim` rows.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        let d = self.in_dim();
        if x.len() % d != 0 {
            return Err(Error::Shape {
                expected: format!("a multiple of {d} inputs"),
                got: x.len().to_string(),
            });
        }
        let parts: Vec<Vec<f32>> = x
            .par_chunks(CHUNK * d)
            .map(|c| forward_rows(&self.layers, c, c.len() / d))
            .collect();
        Ok(parts.concat())
    }

    /// Mean squared error over all outputs of a dataset.
    pub fn mse(&self, ds: &SlideDataset) -> Result<f64> {
        self.check_dataset(ds)?;
        if ds.n_samples == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let pred = self.forward(&ds.x)?;
        let sse: f64 = pred.iter().zip(&ds.y).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum();
        Ok(sse / pred.len() as f64)
    }

    fn check_dataset(&self, ds: &SlideDataset) -> Result<()> {
        if ds.n_inputs() != self.in_dim() || ds.n_outputs() != self.out_dim() {
            return Err(Error::Shape {
                expected: format!("{} -> {}", self.in_dim(), self.out_dim()),
                got: format!("{} -> {}", ds.n_inputs(), ds.n_outputs()),
            });
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f32,
    /// Windows per minibatch; `None` means one eighth of the training trajectories.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub loss_min: f64,
    pub validation_every: usize,
    pub seed: u64,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: None,
            max_epochs: 1000,
            loss_min: 5e-6,
            validation_every: 20,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainParams {
    pub fn batch_size_for(&self, n_train_trajectories: usize) -> usize {
        self.batch_size
            .unwrap_or_else(|| (n_train_trajectories as f64 / 8.0).round() as usize)
            .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: f64,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse\n");
        for r in &self.records {
            let val = r.val_mse.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:e},{}", r.epoch, r.train_mse, val);
        }
        out
    }
}

struct Adam {
    m: Vec<Dense<f32>>,
    v: Vec<Dense<f32>>,
    t: i32,
}

impl Adam {
    fn new(layers: &[Dense<f32>]) -> Self {
        Self {
            m: layers.iter().map(Dense::zeros_like).collect(),
            v: layers.iter().map(Dense::zeros_like).collect(),
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [Dense<f32>], grads: &[Dense<f32>], p: &TrainParams) {
        self.t += 1;
        let c1 = (1.0 - (p.beta1 as f64).powi(self.t)) as f32;
        let c2 = (1.0 - (p.beta2 as f64).powi(self.t)) as f32;
        for (((layer, g), m), v) in layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let params = layer.w.iter_mut().chain(layer.b.iter_mut());
            let gs = g.w.iter().chain(&g.b);
            let ms = m.w.iter_mut().chain(m.b.iter_mut());
            let vs = v.w.iter_mut().chain(v.b.iter_mut());
            for (((x, &gi), mi), vi) in params.zip(gs).zip(ms).zip(vs) {
                *mi = p.beta1 * *mi + (1.0 - p.beta1) * gi;
                *vi = p.beta2 * *vi + (1.0 - p.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *x -= p.learning_rate * m_hat / (v_hat.sqrt() + p.epsilon);
            }
        }
    }
}

/// Minibatch Adam on the mean squared error; returns the parameters with the
/// lowest validation loss seen.
pub fn train(net: &Network, train_ds: &SlideDataset, val_ds: &SlideDataset, params: &TrainParams) -> Result<(Network, History)> {
    net.check_dataset(train_ds)?;
    net.check_dataset(val_ds)?;
    if train_ds.n_samples == 0 || val_ds.n_samples == 0 {
        return Err(Error::InvalidArgument("empty training or validation set".into()));
    }
    if params.max_epochs == 0 || params.validation_every == 0 {
        return Err(Error::InvalidArgument("epochs and validation interval must be positive".into()));
    }
    let batch = params.batch_size_for(train_ds.n_trajectories.max(1));
    let ny = train_ds.n_outputs() as f32;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut current = net.clone();
    let mut best = net.clone();
    let mut adam = Adam::new(&current.layers);
    let mut order: Vec<usize> = (0..train_ds.n_samples).collect();
    let mut history = History {
        best_val: f64::INFINITY,
        ..History::default()
    };

    for epoch in 1..=params.max_epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0f64;
        for idx in order.chunks(batch) {
            let (s, mut grads) = batch_sse_grad(&current.layers, train_ds, idx);
            let norm = 1.0 / (idx.len() as f32 * ny);
            for g in &mut grads {
                g.w.iter_mut().chain(g.b.iter_mut()).for_each(|v| *v *= norm);
            }
            adam.step(&mut current.layers, &grads, params);
            sse += s as f64;
        }
        let train_mse = sse / (train_ds.n_samples as f64 * ny as f64);
        if !train_mse.is_finite() || !current.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let validate = epoch % params.validation_every == 0 || epoch == params.max_epochs;
        let val_mse = if validate { Some(current.mse(val_ds)?) } else { None };
        history.records.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if let Some(v) = val_mse {
            if !v.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            log::debug!("epoch {epoch}: train {train_mse:.3e} val {v:.3e}");
            if v < history.best_val {
                history.best_val = v;
                history.best_epoch = epoch;
                best = current.clone();
            }
            if v <= params.loss_min {
                break;
            }
        }
    }
    Ok((best, history))
}

/// Largest relative gap between backpropagated and central-difference gradients
/// of the mean squared error, evaluated in 64-bit.
pub fn gradient_check(net: &Network, x: &[f32], y: &[f32]) -> Result<f64> {
    let d = net.in_dim();
    let n = x.len() / d;
    if n == 0 || x.len() != n * d || y.len() != n * net.out_dim() {
        return Err(Error::Shape {
            expected: format!("rows of {d} inputs and {} targets", net.out_dim()),
            got: format!("{} inputs, {} targets", x.len(), y.len()),
        });
    }
    let mut layers: Vec<Dense<f64>> = net.layers.iter().map(|l| l.cast()).collect();
    let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let count = y.len() as f64;
    let (_, grads) = sse_grad(&layers, &x, &y, n);
    let loss = |layers: &[Dense<f64>]| -> f64 {
        let out = forward_rows(layers, &x, n);
        out.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / count
    };
    let h = 1e-5;
    let mut worst = 0.0f64;
    for l in 0..layers.len() {
        let n_w = layers[l].w.len();
        for p in 0..n_w + layers[l].b.len() {
            let analytic = if p < n_w { grads[l].w[p] } else { grads[l].b[p - n_w] } / count;
            let orig = *param_mut(&mut layers, l, p);
            *param_mut(&mut layers, l, p) = orig + h;
            let up = loss(&layers);
            *param_mut(&mut layers, l, p) = orig - h;
            let down = loss(&layers);
            *param_mut(&mut layers, l, p) = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    Ok(worst)
}

/// Parameter `p` of layer `l`, weights first.
fn param_mut<T>(layers: &mut [Dense<T>], l: usize, p: usize) -> &mut T {
    let n_w = layers[l].w.len();
    if p < n_w {
        &mut layers[l].w[p]
    } else {
        &mut layers[l].b[p - n_w]
    }
}

const SNET_MAGIC: &str = "SLIDE-NET v1";

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_snet<W: Write>(mut w: W, net: &Network) -> Result<()> {
    let m = &net.meta;
    let mut scales = m.scale_x.clone();
    scales.push(m.scale_y);
    let header = format!(
        "{SNET_MAGIC}\narch={}\nin={}\nhidden={}\nout={}\ntd={}\nk={}\nsensors={}\nscales={}\n\n",
        net.arch.layers,
        net.arch.in_dim,
        net.arch.hidden_units,
        net.arch.out_dim,
        m.t_d,
        m.k,
        m.sensors.join(","),
        join(&scales),
    );
    w.write_all(header.as_bytes())?;
    let mut blob = Vec::with_capacity(net.n_params() * 4);
    for layer in &net.layers {
        for v in layer.w.iter().chain(&layer.b) {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&blob)?;
    Ok(())
}

pub fn read_snet<R: Read>(r: R) -> Result<Network> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut fields = std::collections::HashMap::new();
    r.read_line(&mut line)?;
    if line.trim_end() != SNET_MAGIC {
        return Err(Error::Format("missing SLIDE-NET header".into()));
    }
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("truncated header".into()));
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line '{l}'")))?;
        fields.insert(key.to_string(), value.to_string());
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| Error::Format(format!("missing header key '{k}'")));
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::Format(format!("bad value for '{k}'"))) };
    let arch = ArchSpec::new(get("arch")?, num("hidden")?, num("in")?, num("out")?)?;
    let sensors: Vec<String> = get("sensors")?.split(',').map(str::to_string).collect();
    let mut scale_x: Vec<f64> = get("scales")?
        .split(',')
        .map(|s| s.parse().map_err(|_| Error::Format("bad scale".into())))
        .collect::<Result<_>>()?;
    let scale_y = scale_x.pop().ok_or_else(|| Error::Format("no scales".into()))?;
    if scale_x.len() != sensors.len() {
        return Err(Error::Format("scale and sensor counts differ".into()));
    }
    let meta = NetMeta {
        t_d: num("td")?,
        k: num("k")?,
        sensors,
        scale_x,
        scale_y,
    };
    let mut layers = Vec::new();
    for ((n_in, n_out), act) in arch.dims().into_iter().zip(arch.activations()?) {
        let mut read = |len: usize| -> Result<Vec<f32>> {
            let mut buf = vec![0u8; len * 4];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let w = read(n_in * n_out)?;
        let b = read(n_out)?;
        layers.push(Dense { n_in, n_out, w, b, act });
    }
    Ok(Network { arch, layers, meta })
}

pub fn save_snet(path: &Path, net: &Network) -> Result<()> {
    write_snet(std::io::BufWriter::new(std::fs::File::create(path)?), net)
}

pub fn load_snet(path: &Path) -> Result<Network> {
    read_snet(std::fs::File::open(path)?)
}
