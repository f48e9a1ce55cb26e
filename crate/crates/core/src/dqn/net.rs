//! Small fully connected Q-networks with hand-derived gradients.
//!
//! All parameters live in one flat vector so that optimisers, target
//! synchronisation, finite-difference checks and checkpoints can treat
//! them uniformly. Each layer stores its weight matrix row-major (one row
//! per output unit) followed by its bias.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "coded-edge-qnet";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    /// Shared hidden layer feeding a scalar value head and an advantage
    /// head, combined as `Q = V + G - mean(G)`.
    Dueling,
    /// Two hidden layers and a linear Q head.
    Plain,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Dueling => "dueling",
            Architecture::Plain => "plain",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub name: &'static str,
    pub outputs: usize,
    pub inputs: usize,
    pub offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.outputs * self.inputs
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.outputs * self.inputs;
        start..start + self.outputs
    }

    fn len(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

fn layer_shapes(arch: Architecture, input: usize, hidden: usize, actions: usize) -> [LayerShape; 3] {
    let dims = match arch {
        Architecture::Dueling => [("shared", hidden, input), ("value", 1, hidden), ("advantage", actions, hidden)],
        Architecture::Plain => [("hidden1", hidden, input), ("hidden2", hidden, hidden), ("output", actions, hidden)],
    };
    let mut offset = 0;
    dims.map(|(name, outputs, inputs)| {
        let shape = LayerShape {
            name,
            outputs,
            inputs,
            offset,
        };
        offset += shape.len();
        shape
    })
}

/// `y = W x + b` for the layer stored at `shape` in `params`.
fn affine(params: &[f64], shape: &LayerShape, x: &[f64]) -> Vec<f64> {
    let w = &params[shape.weights()];
    let b = &params[shape.bias()];
    (0..shape.outputs)
        .map(|o| {
            let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
            b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Accumulates `dW += dy x^T`, `db += dy` into `grad`, returns `W^T dy`.
fn affine_backward(params: &[f64], grad: &mut [f64], shape: &LayerShape, x: &[f64], dy: &[f64]) -> Vec<f64> {
    let w = &params[shape.weights()];
    let mut dx = vec![0.0; shape.inputs];
    let wo = shape.weights().start;
    let bo = shape.bias().start;
    for (o, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
        let grow = &mut grad[wo + o * shape.inputs..wo + (o + 1) * shape.inputs];
        for i in 0..shape.inputs {
            grow[i] += d * x[i];
            dx[i] += d * row[i];
        }
        grad[bo + o] += d;
    }
    dx
}

fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Streams of a dueling forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct DuelingOutput {
    pub value: f64,
    pub advantages: Vec<f64>,
    pub q: Vec<f64>,
}

/// `V + G - mean(G)`.
pub fn combine_mean(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|g| value + g - mean).collect()
}

/// `V + G - max(G)`.
pub fn combine_max(value: f64, advantages: &[f64]) -> Vec<f64> {
    let max = advantages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    advantages.iter().map(|g| value + g - max).collect()
}

/// One regression sample: push `Q(features)[action]` towards `target`.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub features: &'a [f64],
    pub action: usize,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    arch: Architecture,
    input_dim: usize,
    hidden: usize,
    action_count: usize,
    layers: [LayerShape; 3],
    params: Vec<f64>,
}

impl QNetwork {
    /// Zero-initialised network.
    pub fn zeros(arch: Architecture, input_dim: usize, hidden: usize, action_count: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || action_count == 0 {
            return Err(Error::InvalidConfig("network dimensions must be positive".into()));
        }
        let layers = layer_shapes(arch, input_dim, hidden, action_count);
        let total = layers.iter().map(LayerShape::len).sum();
        Ok(Self {
            arch,
            input_dim,
            hidden,
            action_count,
            layers,
            params: vec![0.0; total],
        })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn new(
        arch: Architecture,
        input_dim: usize,
        hidden: usize,
        action_count: usize,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let mut net = Self::zeros(arch, input_dim, hidden, action_count)?;
        for shape in net.layers {
            let limit = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
            for w in &mut net.params[shape.weights()] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn dueling(input_dim: usize, hidden: usize, action_count: usize, rng: &mut SimRng) -> Result<Self> {
        Self::new(Architecture::Dueling, input_dim, hidden, action_count, rng)
    }

    pub fn plain(input_dim: usize, hidden: usize, action_count: usize, rng: &mut SimRng) -> Result<Self> {
        Self::new(Architecture::Plain, input_dim, hidden, action_count, rng)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn layers(&self) -> &[LayerShape; 3] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn copy_from(&mut self, other: &QNetwork) {
        debug_assert_eq!(self.params.len(), other.params.len());
        self.params.copy_from_slice(&other.params);
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                actual: features.len(),
            });
        }
        Ok(())
    }

    /// Value and advantage streams with the mean-subtracted combine.
    /// Only defined for the dueling architecture.
    pub fn forward(&self, features: &[f64]) -> Result<DuelingOutput> {
        self.check_input(features)?;
        if self.arch != Architecture::Dueling {
            return Err(Error::InvalidConfig("plain network has no value stream".into()));
        }
        let (value, advantages) = self.streams(features);
        let q = combine_mean(value, &advantages);
        Ok(DuelingOutput { value, advantages, q })
    }

    /// Dueling Q-values with the max-subtracted combine.
    pub fn forward_max_variant(&self, features: &[f64]) -> Result<Vec<f64>> {
        let out = self.forward(features)?;
        Ok(combine_max(out.value, &out.advantages))
    }

    fn streams(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let [shared, value, advantage] = &self.layers;
        let mut h = affine(&self.params, shared, x);
        relu(&mut h);
        let v = affine(&self.params, value, &h)[0];
        let g = affine(&self.params, advantage, &h);
        (v, g)
    }

    /// Q-values for every action.
    pub fn q_values(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.q_unchecked(features))
    }

    fn q_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self.arch {
            Architecture::Dueling => {
                let (v, g) = self.streams(x);
                combine_mean(v, &g)
            }
            Architecture::Plain => {
                let [l1, l2, out] = &self.layers;
                let mut h1 = affine(&self.params, l1, x);
                relu(&mut h1);
                let mut h2 = affine(&self.params, l2, &h1);
                relu(&mut h2);
                affine(&self.params, out, &h2)
            }
        }
    }

    /// Mean squared TD error over `batch` and its gradient with respect to
    /// every parameter (same layout as [`QNetwork::params`]).
    pub fn loss_and_gradient(&self, batch: &[Sample<'_>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for s in batch {
            self.check_input(s.features)?;
            if s.action >= self.action_count {
                return Err(Error::Dimension {
                    expected: self.action_count,
                    actual: s.action,
                });
            }
            loss += match self.arch {
                Architecture::Dueling => self.backward_dueling(s, scale, &mut grad),
                Architecture::Plain => self.backward_plain(s, scale, &mut grad),
            };
        }
        Ok((loss * scale, grad))
    }

    /// Returns the squared residual of one sample and accumulates its
    /// scaled gradient.
    fn backward_dueling(&self, s: &Sample<'_>, scale: f64, grad: &mut [f64]) -> f64 {
        let [shared, value, advantage] = &self.layers;
        let pre = affine(&self.params, shared, s.features);
        let mut h = pre.clone();
        relu(&mut h);
        let v = affine(&self.params, value, &h)[0];
        let g = affine(&self.params, advantage, &h);
        let q = combine_mean(v, &g)[s.action];
        let residual = s.target - q;

        // dL/dQ_a, then dQ_a/dV = 1 and dQ_a/dG_b = [a = b] - 1/|A|.
        let dq = -2.0 * residual * scale;
        let inv_a = 1.0 / self.action_count as f64;
        let mut dg = vec![-dq * inv_a; self.action_count];
        dg[s.action] += dq;
        let mut dh = affine_backward(&self.params, grad, value, &h, &[dq]);
        let dh_adv = affine_backward(&self.params, grad, advantage, &h, &dg);
        for ((d, a), z) in dh.iter_mut().zip(&dh_adv).zip(&pre) {
            *d = if *z > 0.0 { *d + a } else { 0.0 };
        }
        affine_backward(&self.params, grad, shared, s.features, &dh);
        residual * residual
    }

    fn backward_plain(&self, s: &Sample<'_>, scale: f64, grad: &mut [f64]) -> f64 {
        let [l1, l2, out] = &self.layers;
        let z1 = affine(&self.params, l1, s.features);
        let mut h1 = z1.clone();
        relu(&mut h1);
        let z2 = affine(&self.params, l2, &h1);
        let mut h2 = z2.clone();
        relu(&mut h2);
        let q = affine(&self.params, out, &h2)[s.action];
        let residual = s.target - q;

        let mut dq = vec![0.0; self.action_count];
        dq[s.action] = -2.0 * residual * scale;
        let mut d2 = affine_backward(&self.params, grad, out, &h2, &dq);
        for (d, z) in d2.iter_mut().zip(&z2) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        let mut d1 = affine_backward(&self.params, grad, l2, &h1, &d2);
        for (d, z) in d1.iter_mut().zip(&z1) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        affine_backward(&self.params, grad, l1, s.features, &d1);
        residual * residual
    }

    /// Mean squared error only; used by finite-difference checks.
    pub fn loss(&self, batch: &[Sample<'_>]) -> Result<f64> {
        let mut total = 0.0;
        for s in batch {
            let q = self.q_values(s.features)?[s.action];
            total += (s.target - q).powi(2);
        }
        Ok(total / batch.len() as f64)
    }

    /// Text checkpoint: a header with the format version and dimensions,
    /// then each layer's weight rows and its bias on one line, written with
    /// round-trip precision.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "format_version {FORMAT_VERSION}");
        let _ = writeln!(out, "architecture {}", self.arch.as_str());
        let _ = writeln!(out, "input_dim {}", self.input_dim);
        let _ = writeln!(out, "hidden {}", self.hidden);
        let _ = writeln!(out, "action_count {}", self.action_count);
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for shape in &self.layers {
            let _ = writeln!(out, "weights {} {} {}", shape.name, shape.outputs, shape.inputs);
            for row in self.params[shape.weights()].chunks(shape.inputs) {
                let _ = writeln!(out, "{}", join(row));
            }
            let _ = writeln!(out, "bias {} {}", shape.name, shape.outputs);
            let _ = writeln!(out, "{}", join(&self.params[shape.bias()]));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("checkpoint ends before {what}")))
        };
        let (n, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::parse(n, "not a q-network checkpoint"));
        }
        let mut field = |name: &str| -> Result<String> {
            let (n, line) = next(name)?;
            match line.split_once(' ') {
                Some((k, v)) if k == name => Ok(v.to_string()),
                _ => Err(Error::parse(n, format!("expected `{name} <value>`"))),
            }
        };
        let uint = |s: String| s.parse::<usize>().map_err(|e| Error::parse(0, e.to_string()));
        let version = uint(field("format_version")?)?;
        if version != FORMAT_VERSION as usize {
            return Err(Error::parse(2, format!("unsupported format version {version}")));
        }
        let arch = match field("architecture")?.as_str() {
            "dueling" => Architecture::Dueling,
            "plain" => Architecture::Plain,
            other => return Err(Error::parse(3, format!("unknown architecture `{other}`"))),
        };
        let input_dim = uint(field("input_dim")?)?;
        let hidden = uint(field("hidden")?)?;
        let action_count = uint(field("action_count")?)?;
        let mut net = QNetwork::zeros(arch, input_dim, hidden, action_count)?;

        let parse_row = |n: usize, line: &str, expect: usize| -> Result<Vec<f64>> {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(n, e.to_string())))
                .collect::<Result<_>>()?;
            if row.len() != expect || row.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(n, format!("expected {expect} finite values")));
            }
            Ok(row)
        };
        for shape in net.layers {
            let (n, head) = next("layer weights")?;
            if head != format!("weights {} {} {}", shape.name, shape.outputs, shape.inputs) {
                return Err(Error::parse(n, format!("expected weights for layer {}", shape.name)));
            }
            let mut values = Vec::with_capacity(shape.outputs * shape.inputs);
            for _ in 0..shape.outputs {
                let (n, line) = next("weight row")?;
                values.extend(parse_row(n, line, shape.inputs)?);
            }
            net.params[shape.weights()].copy_from_slice(&values);
            let (n, head) = next("layer bias")?;
            if head != format!("bias {} {}", shape.name, shape.outputs) {
                return Err(Error::parse(n, format!("expected bias for layer {}", shape.name)));
            }
            let (n, line) = next("bias row")?;
            let bias = parse_row(n, line, shape.outputs)?;
            net.params[shape.bias()].copy_from_slice(&bias);
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text)
    }
}
