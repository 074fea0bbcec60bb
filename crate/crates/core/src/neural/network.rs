use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::gemm::gemm;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Shape of a network: `input_dim -> hidden... -> output_dim`, tanh on every
/// hidden layer and identity on the output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl NetworkLayout {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self> {
        let layout = Self { input_dim, hidden, output_dim };
        layout.validate()?;
        Ok(layout)
    }

    /// Two hidden layers of width `max(d + 10, 16)`.
    pub fn default_for(dim: usize) -> Self {
        let w = (dim + 10).max(16);
        Self { input_dim: dim, hidden: vec![w, w], output_dim: dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::arg("network needs at least one hidden layer"));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::arg("all layer widths must be at least 1"));
        }
        Ok(())
    }

    /// `[input, hidden..., output]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(self.input_dim);
        s.extend_from_slice(&self.hidden);
        s.push(self.output_dim);
        s
    }

    pub fn param_count(&self) -> usize {
        self.sizes().windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layer {
    weights: usize,
    bias: usize,
    fan_in: usize,
    fan_out: usize,
}

/// Feed-forward network with all parameters in one flat vector.
///
/// Layer `k` stores its `fan_out x fan_in` weight matrix row-major followed
/// by its bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layout: NetworkLayout,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Activations recorded by [`Network::forward_recorded`] for a later
/// backward pass. Allocations are reused across calls.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    rows: usize,
    /// `acts[k]` is the input of layer `k`; the last entry is the output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], |v| v.as_slice())
    }

    /// Input of layer `k`, row-major; `k >= 1` are hidden activations.
    pub fn layer_input(&self, k: usize) -> &[f64] {
        &self.acts[k]
    }
}

impl Network {
    /// Glorot-uniform weights `U[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`,
    /// and zero biases.
    pub fn init(layout: NetworkLayout, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layout)?;
        let mut rng = Stream::new(seed);
        for layer in net.layers.clone() {
            let s = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut net.params[layer.weights..layer.bias] {
                *w = rng.uniform_in(-s, s);
            }
        }
        Ok(net)
    }

    pub fn zeros(layout: NetworkLayout) -> Result<Self> {
        layout.validate()?;
        let mut layers = Vec::new();
        let mut at = 0;
        for w in layout.sizes().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            layers.push(Layer { weights: at, bias: at + fan_in * fan_out, fan_in, fan_out });
            at += fan_in * fan_out + fan_out;
        }
        Ok(Self { layout, layers, params: vec![0.0; at] })
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Weight matrix of layer `k` (row-major `fan_out x fan_in`) and its shape.
    pub fn weights(&self, k: usize) -> (&[f64], usize, usize) {
        let l = self.layers[k];
        (&self.params[l.weights..l.bias], l.fan_out, l.fan_in)
    }

    pub fn bias(&self, k: usize) -> &[f64] {
        let l = self.layers[k];
        &self.params[l.bias..l.bias + l.fan_out]
    }

    pub fn weights_mut(&mut self, k: usize) -> &mut [f64] {
        let l = self.layers[k];
        &mut self.params[l.weights..l.bias]
    }

    pub fn bias_mut(&mut self, k: usize) -> &mut [f64] {
        let l = self.layers[k];
        &mut self.params[l.bias..l.bias + l.fan_out]
    }

    /// Output for one input vector.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.layout.input_dim {
            return Err(Error::arg(format!(
                "network input has length {}, expected {}",
                x.len(),
                self.layout.input_dim
            )));
        }
        let mut cache = ForwardCache::default();
        self.forward_recorded(x, 1, &mut cache);
        Ok(cache.output().to_vec())
    }

    /// Evaluates `rows` inputs stored row-major in `inputs`.
    pub fn eval_batch(&self, inputs: &[f64], rows: usize) -> Result<Vec<f64>> {
        if inputs.len() != rows * self.layout.input_dim {
            return Err(Error::arg("batched input has the wrong length"));
        }
        let mut cache = ForwardCache::default();
        self.forward_recorded(inputs, rows, &mut cache);
        Ok(cache.output().to_vec())
    }

    /// Forward pass that keeps every layer's input in `cache`.
    pub fn forward_recorded(&self, inputs: &[f64], rows: usize, cache: &mut ForwardCache) {
        debug_assert_eq!(inputs.len(), rows * self.layout.input_dim);
        cache.rows = rows;
        cache.acts.resize_with(self.layers.len() + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(inputs);
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let (head, tail) = cache.acts.split_at_mut(k + 1);
            let input = &head[k];
            let out = &mut tail[0];
            out.resize(rows * l.fan_out, 0.0);
            let bias = &self.params[l.bias..l.bias + l.fan_out];
            for row in out.chunks_exact_mut(l.fan_out) {
                row.copy_from_slice(bias);
            }
            // out (rows x fan_out) += input (rows x fan_in) * W^T
            gemm(
                rows,
                l.fan_in,
                l.fan_out,
                1.0,
                input,
                l.fan_in,
                1,
                &self.params[l.weights..l.bias],
                1,
                l.fan_in,
                1.0,
                out,
            );
            if k < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
    }

    /// Adds `d(sum_r grad_out[r] . output[r]) / d(params)` to `grads`.
    ///
    /// `grad_out` is `rows x output_dim`; `scratch` holds the running deltas.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grads: &mut [f64], scratch: &mut Vec<f64>) {
        let rows = cache.rows;
        debug_assert_eq!(grad_out.len(), rows * self.layout.output_dim);
        debug_assert_eq!(grads.len(), self.params.len());
        let mut delta = grad_out.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.acts[k];
            // dW (fan_out x fan_in) += delta^T (fan_out x rows) * input (rows x fan_in)
            gemm(
                l.fan_out,
                rows,
                l.fan_in,
                1.0,
                &delta,
                1,
                l.fan_out,
                input,
                l.fan_in,
                1,
                1.0,
                &mut grads[l.weights..l.bias],
            );
            let gb = &mut grads[l.bias..l.bias + l.fan_out];
            for row in delta.chunks_exact(l.fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if k == 0 {
                break;
            }
            // d input (rows x fan_in) = delta (rows x fan_out) * W (fan_out x fan_in)
            scratch.resize(rows * l.fan_in, 0.0);
            gemm(
                rows,
                l.fan_out,
                l.fan_in,
                1.0,
                &delta,
                l.fan_out,
                1,
                &self.params[l.weights..l.bias],
                l.fan_in,
                1,
                0.0,
                scratch,
            );
            // through tanh: input = tanh(pre), d pre = d input * (1 - input^2)
            for (s, a) in scratch.iter_mut().zip(input) {
                *s *= 1.0 - a * a;
            }
            std::mem::swap(&mut delta, scratch);
        }
    }

    /// Writes the checkpoint format:
    ///
    /// ```text
    /// sizes,<input>,<hidden...>,<output>
    /// layer,<k>
    /// <fan_out rows of fan_in comma-separated weights>
    /// bias,<fan_out comma-separated values>
    /// ```
    ///
    /// Values are printed in shortest round-trip form.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> io::Result<()> {
        let sizes: Vec<String> = self.layout.sizes().iter().map(|s| s.to_string()).collect();
        writeln!(out, "sizes,{}", sizes.join(","))?;
        for (k, l) in self.layers.iter().enumerate() {
            writeln!(out, "layer,{k}")?;
            for row in self.params[l.weights..l.bias].chunks_exact(l.fan_in) {
                writeln!(out, "{}", join(row))?;
            }
            writeln!(out, "bias,{}", join(&self.params[l.bias..l.bias + l.fan_out]))?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::arg(format!("checkpoint line {line}: {what}"));
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i, l)),
                Some((i, Err(e))) => Err(bad(i, &e.to_string())),
                None => Err(Error::arg("checkpoint ends early")),
            }
        };
        let (i, header) = next()?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.first() != Some(&"sizes") || fields.len() < 4 {
            return Err(bad(i, "expected `sizes,<in>,<hidden...>,<out>`"));
        }
        let sizes = fields[1..]
            .iter()
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad(i, "bad layer size")))
            .collect::<Result<Vec<_>>>()?;
        let layout = NetworkLayout::new(sizes[0], sizes[1..sizes.len() - 1].to_vec(), sizes[sizes.len() - 1])?;
        let mut net = Network::zeros(layout)?;
        for (k, l) in net.layers.clone().into_iter().enumerate() {
            let (i, tag) = next()?;
            if tag.trim() != format!("layer,{k}") {
                return Err(bad(i, &format!("expected `layer,{k}`")));
            }
            for r in 0..l.fan_out {
                let (i, row) = next()?;
                let vals = parse_row(&row).map_err(|_| bad(i, "bad weight"))?;
                if vals.len() != l.fan_in {
                    return Err(bad(i, "wrong number of weights"));
                }
                let at = l.weights + r * l.fan_in;
                net.params[at..at + l.fan_in].copy_from_slice(&vals);
            }
            let (i, row) = next()?;
            let vals = row
                .strip_prefix("bias,")
                .ok_or_else(|| bad(i, "expected `bias,...`"))
                .and_then(|r| parse_row(r).map_err(|_| bad(i, "bad bias")))?;
            if vals.len() != l.fan_out {
                return Err(bad(i, "wrong number of biases"));
            }
            net.params[l.bias..l.bias + l.fan_out].copy_from_slice(&vals);
        }
        Ok(net)
    }
}

fn join(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

fn parse_row(row: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    row.split(',').map(|s| s.trim().parse::<f64>()).collect()
}
