use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{LayerSpec, Padding, LEAKY_SLOPE};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Node {
    spec: LayerSpec,
    in_len: usize,
    in_ch: usize,
    out_len: usize,
    out_ch: usize,
    w_off: usize,
    w_len: usize,
    b_off: usize,
    b_len: usize,
}

impl Node {
    /// `(kernel, left padding)` of an affine layer.
    fn affine_geometry(&self) -> (usize, usize) {
        match self.spec {
            LayerSpec::Conv1d { kernel, padding: Padding::Causal, .. } => (kernel, kernel - 1),
            LayerSpec::Conv1d { kernel, padding: Padding::None, .. } => (kernel, 0),
            _ => (1, 0),
        }
    }
}

/// Sequential network over `len x channels` samples with a flat parameter
/// store. Conv/dense weights are laid out `[kernel][in][out]`, followed by
/// the biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkState", into = "NetworkState")]
pub struct Network {
    input_len: usize,
    input_channels: usize,
    nodes: Vec<Node>,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Cache {
    Affine { input: Tensor, bias: bool },
    Activation { pre: Tensor },
    Pool { argmax: Vec<usize> },
    Passive,
}

/// Intermediates recorded by a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Tape {
    signature: (usize, usize, usize, usize),
    batch: usize,
    caches: Vec<Cache>,
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// Derivative of the LeakyReLU; `x == 0` takes the slope side.
fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Serialized form of a [`Network`]: shape, layer list and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkState {
    pub input_len: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
    pub params: Vec<f64>,
}

impl TryFrom<NetworkState> for Network {
    type Error = Error;

    fn try_from(s: NetworkState) -> Result<Self> {
        Network::from_parts(s.input_len, s.input_channels, s.layers, s.params)
    }
}

impl From<Network> for NetworkState {
    fn from(net: Network) -> Self {
        NetworkState {
            input_len: net.input_len,
            input_channels: net.input_channels,
            layers: net.layer_specs(),
            params: net.params,
        }
    }
}

impl Network {
    /// Builds a network and draws Glorot-uniform weights from `seed`.
    pub fn new(input_len: usize, input_channels: usize, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut net = Self::layout(input_len, input_channels, layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for node in &net.nodes {
            if node.w_len == 0 {
                continue;
            }
            let (kernel, _) = node.affine_geometry();
            let fan_in = (kernel * node.in_ch) as f64;
            let fan_out = (kernel * node.out_ch) as f64;
            let limit = libm::sqrt(6.0 / (fan_in + fan_out));
            for w in &mut net.params[node.w_off..node.w_off + node.w_len] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from its layer list and a flat parameter vector.
    pub fn from_parts(input_len: usize, input_channels: usize, layers: Vec<LayerSpec>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::layout(input_len, input_channels, layers)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "network needs {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Data(format!("non-finite parameter in network")));
        }
        net.params = params;
        Ok(net)
    }

    fn layout(input_len: usize, input_channels: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if input_len == 0 || input_channels == 0 {
            return Err(Error::Shape(format!("empty input shape {input_len}x{input_channels}")));
        }
        let mut nodes = Vec::with_capacity(layers.len());
        let (mut len, mut ch) = (input_len, input_channels);
        let mut offset = 0;
        for (index, spec) in layers.into_iter().enumerate() {
            let (out_len, out_ch) = spec.output_shape(index, len, ch)?;
            let (w_len, b_len) = match spec {
                LayerSpec::Conv1d { kernel, .. } => (kernel * ch * out_ch, out_ch),
                LayerSpec::Dense { .. } => (ch * out_ch, out_ch),
                _ => (0, 0),
            };
            nodes.push(Node {
                spec,
                in_len: len,
                in_ch: ch,
                out_len,
                out_ch,
                w_off: offset,
                w_len,
                b_off: offset + w_len,
                b_len,
            });
            offset += w_len + b_len;
            len = out_len;
            ch = out_ch;
        }
        Ok(Self { input_len, input_channels, nodes, params: vec![0.0; offset] })
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.input_len, self.input_channels)
    }

    pub fn output_shape(&self) -> (usize, usize) {
        self.nodes.last().map_or((self.input_len, self.input_channels), |n| (n.out_len, n.out_ch))
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.nodes.iter().map(|n| &n.spec)
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers().cloned().collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight and bias slices of layer `index` (empty for parameter-free layers).
    pub fn layer_params_mut(&mut self, index: usize) -> (&mut [f64], &mut [f64]) {
        let n = &self.nodes[index];
        let (w_off, w_len, b_len) = (n.w_off, n.w_len, n.b_len);
        let (w, rest) = self.params[w_off..].split_at_mut(w_len);
        (w, &mut rest[..b_len])
    }

    /// Whether the network is piecewise linear in its input, which makes the
    /// linearized pass an exact second-order route.
    pub fn is_piecewise_linear(&self) -> bool {
        !self.nodes.iter().any(|n| matches!(n.spec, LayerSpec::Sigmoid))
    }

    /// FNV-1a hash of the parameter bits.
    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.params)
    }

    fn signature(&self) -> (usize, usize, usize, usize) {
        (self.nodes.len(), self.params.len(), self.input_len, self.input_channels)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.input_len || x.channels() != self.input_channels {
            return Err(Error::Shape(format!(
                "layer 0 ({}): expected input {}x{}, got {}x{}",
                self.nodes.first().map_or("input", |n| n.spec.name()),
                self.input_len,
                self.input_channels,
                x.len(),
                x.channels()
            )));
        }
        Ok(())
    }

    /// Inference pass without recording a tape.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for node in &self.nodes {
            cur = self.apply(node, cur, None, true)?;
        }
        Ok(cur)
    }

    /// Forward pass recording what `backward` needs.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tape)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.nodes.len());
        let mut cur = x.clone();
        for node in &self.nodes {
            cur = self.apply(node, cur, Some(&mut caches), true)?;
        }
        Ok((cur, Tape { signature: self.signature(), batch: x.batch(), caches }))
    }

    /// Forward-mode pass of `tangent` through the network linearized at the
    /// point recorded in `tape`: affine layers drop their bias, activations
    /// multiply by their local slope, pools reuse the recorded argmax.
    ///
    /// The returned tape differentiates the tangent output with respect to
    /// the weights (activation slopes held fixed). For piecewise-linear
    /// networks this is the exact parameter gradient of a directional input
    /// derivative.
    pub fn linearize(&self, tape: &Tape, tangent: &Tensor) -> Result<(Tensor, Tape)> {
        self.check_tape(tape)?;
        self.check_input(tangent)?;
        if tangent.batch() != tape.batch {
            return Err(Error::Tape(format!("tangent batch {} vs tape batch {}", tangent.batch(), tape.batch)));
        }
        let mut caches = Vec::with_capacity(self.nodes.len());
        let mut cur = tangent.clone();
        for (node, cache) in self.nodes.iter().zip(&tape.caches) {
            cur = match (&node.spec, cache) {
                (LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. }, _) => {
                    let out = self.affine_forward(node, &cur, false);
                    caches.push(Cache::Affine { input: cur, bias: false });
                    out
                }
                (LayerSpec::LeakyRelu, Cache::Activation { pre }) => {
                    let mut out = cur;
                    for (o, p) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                        *o *= leaky_grad(*p);
                    }
                    caches.push(Cache::Activation { pre: pre.clone() });
                    out
                }
                (LayerSpec::Sigmoid, Cache::Activation { pre }) => {
                    let mut out = cur;
                    for (o, p) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                        let s = sigmoid(*p);
                        *o *= s * (1.0 - s);
                    }
                    caches.push(Cache::Activation { pre: pre.clone() });
                    out
                }
                (LayerSpec::Maxpool1d { .. }, Cache::Pool { argmax }) => {
                    let mut out = Tensor::zeros(cur.batch(), node.out_len, node.out_ch);
                    for (o, &src) in out.as_mut_slice().iter_mut().zip(argmax) {
                        *o = cur.as_slice()[src];
                    }
                    caches.push(Cache::Pool { argmax: argmax.clone() });
                    out
                }
                (LayerSpec::Linear | LayerSpec::Upsample1d { .. } | LayerSpec::Flatten, _) => {
                    self.apply(node, cur, Some(&mut caches), false)?
                }
                _ => return Err(Error::Tape(format!("tape does not match layer {}", node.spec.name()))),
            };
        }
        Ok((cur, Tape { signature: self.signature(), batch: tape.batch, caches }))
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.signature != self.signature() || tape.caches.len() != self.nodes.len() {
            return Err(Error::Tape(format!("tape was recorded by a different network")));
        }
        Ok(())
    }

    /// Reverse pass. Accumulates parameter gradients into `grads` when given
    /// and returns the gradient with respect to the network input.
    pub fn backward(&self, tape: &Tape, upstream: &Tensor, mut grads: Option<&mut [f64]>) -> Result<Tensor> {
        self.check_tape(tape)?;
        let (out_len, out_ch) = self.output_shape();
        if upstream.shape() != (tape.batch, out_len, out_ch) {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                (tape.batch, out_len, out_ch)
            )));
        }
        if let Some(g) = grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Shape(format!("gradient store {} vs {} parameters", g.len(), self.params.len())));
            }
        }
        let mut g = upstream.clone();
        for (node, cache) in self.nodes.iter().zip(&tape.caches).rev() {
            g = match (&node.spec, cache) {
                (LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. }, Cache::Affine { input, bias }) => {
                    self.affine_backward(node, input, &g, *bias, grads.as_deref_mut())
                }
                (LayerSpec::LeakyRelu, Cache::Activation { pre }) => {
                    let mut out = g;
                    for (o, p) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                        *o *= leaky_grad(*p);
                    }
                    out
                }
                (LayerSpec::Sigmoid, Cache::Activation { pre }) => {
                    let mut out = g;
                    for (o, p) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                        let s = sigmoid(*p);
                        *o *= s * (1.0 - s);
                    }
                    out
                }
                (LayerSpec::Linear, _) => g,
                (LayerSpec::Maxpool1d { .. }, Cache::Pool { argmax }) => {
                    let mut out = Tensor::zeros(g.batch(), node.in_len, node.in_ch);
                    for (gv, &src) in g.as_slice().iter().zip(argmax) {
                        out.as_mut_slice()[src] += gv;
                    }
                    out
                }
                (LayerSpec::Upsample1d { size }, _) => {
                    let mut out = Tensor::zeros(g.batch(), node.in_len, node.in_ch);
                    for b in 0..g.batch() {
                        for t in 0..node.out_len {
                            for c in 0..node.in_ch {
                                *out.at_mut(b, t / size, c) += g.at(b, t, c);
                            }
                        }
                    }
                    out
                }
                (LayerSpec::Flatten, _) => g.reshaped(node.in_len, node.in_ch)?,
                _ => return Err(Error::Tape(format!("tape does not match layer {}", node.spec.name()))),
            };
        }
        Ok(g)
    }

    /// Convenience: parameter gradient of `upstream · output`.
    pub fn param_grads(&self, tape: &Tape, upstream: &Tensor) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward(tape, upstream, Some(&mut grads))?;
        Ok(grads)
    }

    fn apply(&self, node: &Node, x: Tensor, caches: Option<&mut Vec<Cache>>, with_bias: bool) -> Result<Tensor> {
        let record = caches.is_some();
        let (out, cache) = match node.spec {
            LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. } => {
                let out = self.affine_forward(node, &x, with_bias);
                (out, if record { Cache::Affine { input: x, bias: with_bias } } else { Cache::Passive })
            }
            LayerSpec::LeakyRelu => {
                let mut out = x.clone();
                out.as_mut_slice().iter_mut().for_each(|v| *v = leaky(*v));
                (out, if record { Cache::Activation { pre: x } } else { Cache::Passive })
            }
            LayerSpec::Sigmoid => {
                let mut out = x.clone();
                out.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
                (out, if record { Cache::Activation { pre: x } } else { Cache::Passive })
            }
            LayerSpec::Linear => (x, Cache::Passive),
            LayerSpec::Maxpool1d { size } => {
                let mut out = Tensor::zeros(x.batch(), node.out_len, node.out_ch);
                let mut argmax = Vec::with_capacity(if record { out.as_slice().len() } else { 0 });
                for b in 0..x.batch() {
                    for t in 0..node.out_len {
                        for c in 0..node.in_ch {
                            let mut best = (b * node.in_len + t * size) * node.in_ch + c;
                            for j in 1..size {
                                let idx = (b * node.in_len + t * size + j) * node.in_ch + c;
                                if x.as_slice()[idx] > x.as_slice()[best] {
                                    best = idx;
                                }
                            }
                            *out.at_mut(b, t, c) = x.as_slice()[best];
                            if record {
                                argmax.push(best);
                            }
                        }
                    }
                }
                (out, Cache::Pool { argmax })
            }
            LayerSpec::Upsample1d { size } => {
                let mut out = Tensor::zeros(x.batch(), node.out_len, node.out_ch);
                for b in 0..x.batch() {
                    for t in 0..node.out_len {
                        for c in 0..node.in_ch {
                            *out.at_mut(b, t, c) = x.at(b, t / size, c);
                        }
                    }
                }
                (out, Cache::Passive)
            }
            LayerSpec::Flatten => (x.reshaped(node.out_len, node.out_ch)?, Cache::Passive),
        };
        if let Some(caches) = caches {
            caches.push(cache);
        }
        Ok(out)
    }

    fn affine_forward(&self, node: &Node, x: &Tensor, with_bias: bool) -> Tensor {
        let (kernel, pad) = node.affine_geometry();
        let (in_len, in_ch, out_len, out_ch) = (node.in_len, node.in_ch, node.out_len, node.out_ch);
        let w = &self.params[node.w_off..node.w_off + node.w_len];
        let bias = &self.params[node.b_off..node.b_off + node.b_len];
        let mut out = Tensor::zeros(x.batch(), out_len, out_ch);
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for b in 0..x.batch() {
            for t in 0..out_len {
                let out_row = &mut os[(b * out_len + t) * out_ch..(b * out_len + t + 1) * out_ch];
                if with_bias {
                    out_row.copy_from_slice(bias);
                }
                // taps inside the input form one contiguous window of x and
                // of the weight rows
                let k_lo = pad.saturating_sub(t);
                let k_hi = kernel.min(in_len + pad - t);
                if k_lo >= k_hi {
                    continue;
                }
                let src = t + k_lo - pad;
                let window = &xs[(b * in_len + src) * in_ch..(b * in_len + src + k_hi - k_lo) * in_ch];
                let rows = &w[k_lo * in_ch * out_ch..k_hi * in_ch * out_ch];
                accumulate_rows(out_row, window, rows);
            }
        }
        out
    }

    fn affine_backward(&self, node: &Node, x: &Tensor, g: &Tensor, bias: bool, grads: Option<&mut [f64]>) -> Tensor {
        let (kernel, pad) = node.affine_geometry();
        let (in_len, in_ch, out_len, out_ch) = (node.in_len, node.in_ch, node.out_len, node.out_ch);
        let w = &self.params[node.w_off..node.w_off + node.w_len];
        // wt[(k·out + o)·in + i] = w[(k·in + i)·out + o]
        let mut wt = vec![0.0; w.len()];
        for k in 0..kernel {
            for i in 0..in_ch {
                for o in 0..out_ch {
                    wt[(k * out_ch + o) * in_ch + i] = w[(k * in_ch + i) * out_ch + o];
                }
            }
        }
        let mut dx = Tensor::zeros(x.batch(), in_len, in_ch);
        let xs = x.as_slice();
        let gs = g.as_slice();
        let dxs = dx.as_mut_slice();
        let mut grads = grads;
        for b in 0..x.batch() {
            for t in 0..out_len {
                let g_row = &gs[(b * out_len + t) * out_ch..(b * out_len + t + 1) * out_ch];
                if let (Some(store), true) = (grads.as_deref_mut(), bias) {
                    for (gb, gv) in store[node.b_off..node.b_off + out_ch].iter_mut().zip(g_row) {
                        *gb += gv;
                    }
                }
                let k_lo = pad.saturating_sub(t);
                let k_hi = kernel.min(in_len + pad - t);
                if k_lo >= k_hi {
                    continue;
                }
                let src = t + k_lo - pad;
                let span = (b * in_len + src) * in_ch..(b * in_len + src + k_hi - k_lo) * in_ch;
                for (kk, dx_row) in dxs[span.clone()].chunks_exact_mut(in_ch).enumerate() {
                    let rows = &wt[(k_lo + kk) * out_ch * in_ch..(k_lo + kk + 1) * out_ch * in_ch];
                    accumulate_rows(dx_row, g_row, rows);
                }
                if let Some(store) = grads.as_deref_mut() {
                    let gw = &mut store[node.w_off + k_lo * in_ch * out_ch..node.w_off + k_hi * in_ch * out_ch];
                    for (gw_row, &xi) in gw.chunks_exact_mut(out_ch).zip(&xs[span]) {
                        if xi != 0.0 {
                            for (gwv, gv) in gw_row.iter_mut().zip(g_row) {
                                *gwv += xi * gv;
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// `out += Σ_j coeffs[j] · rows[j]` where `rows` holds `coeffs.len()`
/// consecutive rows of `out.len()` values. Four rows are folded per pass.
fn accumulate_rows(out: &mut [f64], coeffs: &[f64], rows: &[f64]) {
    let n = out.len();
    let mut j = 0;
    while j + 4 <= coeffs.len() {
        let (c0, c1, c2, c3) = (coeffs[j], coeffs[j + 1], coeffs[j + 2], coeffs[j + 3]);
        let block = &rows[j * n..(j + 4) * n];
        let (r0, rest) = block.split_at(n);
        let (r1, rest) = rest.split_at(n);
        let (r2, r3) = rest.split_at(n);
        for ((((o, a), b), c), d) in out.iter_mut().zip(r0).zip(r1).zip(r2).zip(r3) {
            *o += c0 * a + c1 * b + c2 * c + c3 * d;
        }
        j += 4;
    }
    while j < coeffs.len() {
        let c = coeffs[j];
        for (o, r) in out.iter_mut().zip(&rows[j * n..(j + 1) * n]) {
            *o += c * r;
        }
        j += 1;
    }
}

/// FNV-1a over the bit patterns of a parameter vector.
pub fn fingerprint(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}
