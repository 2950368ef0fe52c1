//! Stacked LSTM classifier with a dense softmax head.
//!
//! Gate order inside every concatenated weight matrix is forget, input,
//! candidate, output:
//!
//! ```text
//! f_t  = sigmoid(x_t U^f + h_{t-1} W^f + b^f)
//! i_t  = sigmoid(x_t U^i + h_{t-1} W^i + b^i)
//! g_t  = tanh   (x_t U^g + h_{t-1} W^g + b^g)
//! o_t  = sigmoid(x_t U^o + h_{t-1} W^o + b^o)
//! c_t  = f_t * c_{t-1} + i_t * g_t
//! h_t  = o_t * tanh(c_t)
//! ```
//!
//! The class read-out is `softmax(h_T W_out + b_out)` on the last step of the
//! top layer. All batched computations take inputs shaped
//! `(steps, batch, channels)`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::{argmax_mode, DegradationMode, NUM_CLASSES};
use crate::neural::loss::{softmax_in_place, PROBABILITY_FLOOR};
use crate::seeds;

pub const GATE_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub num_lstm_layers: usize,
    pub hidden_dim: usize,
    pub input_dim: usize,
    pub num_classes: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            num_lstm_layers: 2,
            hidden_dim: 100,
            input_dim: crate::pipeline::NUM_CHANNELS,
            num_classes: NUM_CLASSES,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.input_dim == 0 || self.num_lstm_layers == 0 {
            return Err(Error::Config("network dimensions must be >= 1".into()));
        }
        if self.num_classes != NUM_CLASSES {
            return Err(Error::Config(format!("num_classes must be {NUM_CLASSES}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    /// `input_dim x 4*hidden_dim`, blocks `[U^f | U^i | U^g | U^o]`.
    pub input_weights: Array2<f64>,
    /// `hidden_dim x 4*hidden_dim`, blocks `[W^f | W^i | W^g | W^o]`.
    pub recurrent_weights: Array2<f64>,
    /// `4*hidden_dim`, blocks `[b^f | b^i | b^g | b^o]`.
    pub biases: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmLayerParams {
            input_weights: Array2::zeros((input_dim, GATE_COUNT * hidden_dim)),
            recurrent_weights: Array2::zeros((hidden_dim, GATE_COUNT * hidden_dim)),
            biases: Array1::zeros(GATE_COUNT * hidden_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.recurrent_weights.nrows()
    }

    fn gate_range(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden_dim();
        let g = gate as usize;
        g * h..(g + 1) * h
    }

    pub fn input_block(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.input_weights.slice(s![.., self.gate_range(gate)])
    }

    pub fn recurrent_block(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.recurrent_weights.slice(s![.., self.gate_range(gate)])
    }

    pub fn bias_block(&self, gate: Gate) -> ArrayView1<'_, f64> {
        self.biases.slice(s![self.gate_range(gate)])
    }

    fn validate_shapes(&self) -> Result<()> {
        let h = self.hidden_dim();
        if self.input_weights.ncols() != GATE_COUNT * h
            || self.recurrent_weights.ncols() != GATE_COUNT * h
            || self.biases.len() != GATE_COUNT * h
        {
            return Err(Error::Model("inconsistent LSTM layer shapes".into()));
        }
        Ok(())
    }
}

/// Gate activations of one cell update.
#[derive(Debug, Clone, PartialEq)]
pub struct GateActivations {
    pub forget: Array1<f64>,
    pub input: Array1<f64>,
    pub candidate: Array1<f64>,
    pub output: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub config: NetworkConfig,
    pub layers: Vec<LstmLayerParams>,
    /// `hidden_dim x num_classes`.
    pub head_weights: Array2<f64>,
    pub head_bias: Array1<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmNetwork {
    pub fn zeros(config: NetworkConfig) -> Self {
        let layers = (0..config.num_lstm_layers)
            .map(|l| {
                let input = if l == 0 { config.input_dim } else { config.hidden_dim };
                LstmLayerParams::zeros(input, config.hidden_dim)
            })
            .collect();
        LstmNetwork {
            config,
            layers,
            head_weights: Array2::zeros((config.hidden_dim, config.num_classes)),
            head_bias: Array1::zeros(config.num_classes),
        }
    }

    /// Uniform `+-1/sqrt(fan_in)` weights, forget-gate bias 1, other biases 0.
    pub fn initialize(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut net = LstmNetwork::zeros(config);
        let mut rng = seeds::substream(seed, 0);
        let h = config.hidden_dim;
        for layer in net.layers.iter_mut() {
            let bound = 1.0 / ((layer.input_dim() + h) as f64).sqrt();
            layer.input_weights.mapv_inplace(|_| rng.gen_range(-bound..=bound));
            layer.recurrent_weights.mapv_inplace(|_| rng.gen_range(-bound..=bound));
            layer.biases.slice_mut(s![0..h]).fill(1.0);
        }
        let bound = 1.0 / (h as f64).sqrt();
        net.head_weights.mapv_inplace(|_| rng.gen_range(-bound..=bound));
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.layers.len() != self.config.num_lstm_layers {
            return Err(Error::Model("layer count does not match config".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.validate_shapes()?;
            let expected_in = if l == 0 {
                self.config.input_dim
            } else {
                self.config.hidden_dim
            };
            if layer.input_dim() != expected_in || layer.hidden_dim() != self.config.hidden_dim {
                return Err(Error::Model(format!("layer {l} has unexpected dimensions")));
            }
        }
        if self.head_weights.dim() != (self.config.hidden_dim, self.config.num_classes)
            || self.head_bias.len() != self.config.num_classes
        {
            return Err(Error::Model("head has unexpected dimensions".into()));
        }
        let finite = self.parameter_slices().iter().all(|p| p.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Model("network contains non-finite parameters".into()));
        }
        Ok(())
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn parameter_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 3 + 2);
        for layer in &self.layers {
            out.push(layer.input_weights.as_slice().expect("standard layout"));
            out.push(layer.recurrent_weights.as_slice().expect("standard layout"));
            out.push(layer.biases.as_slice().expect("standard layout"));
        }
        out.push(self.head_weights.as_slice().expect("standard layout"));
        out.push(self.head_bias.as_slice().expect("standard layout"));
        out
    }

    pub fn parameter_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 3 + 2);
        for layer in self.layers.iter_mut() {
            out.push(layer.input_weights.as_slice_mut().expect("standard layout"));
            out.push(layer.recurrent_weights.as_slice_mut().expect("standard layout"));
            out.push(layer.biases.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head_weights.as_slice_mut().expect("standard layout"));
        out.push(self.head_bias.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_slices().iter().map(|p| p.len()).sum()
    }
}

/// One cell update for a single example.
pub fn lstm_cell_forward(
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
    params: &LstmLayerParams,
) -> Result<(Array1<f64>, Array1<f64>, GateActivations)> {
    params.validate_shapes()?;
    let h = params.hidden_dim();
    if x.len() != params.input_dim() || h_prev.len() != h || c_prev.len() != h {
        return Err(Error::Argument("cell input shapes do not match the layer".into()));
    }
    let mut z = x.dot(&params.input_weights) + h_prev.dot(&params.recurrent_weights) + &params.biases;
    let zs = z.as_slice_mut().expect("fresh array");
    let mut c = Array1::zeros(h);
    let mut h_out = Array1::zeros(h);
    activate_gates(zs, h);
    for j in 0..h {
        let (f, i, g, o) = (zs[j], zs[h + j], zs[2 * h + j], zs[3 * h + j]);
        c[j] = f * c_prev[j] + i * g;
        h_out[j] = o * c[j].tanh();
    }
    if !h_out.iter().chain(c.iter()).all(|v| v.is_finite()) {
        return Err(Error::Numeric {
            step: 0,
            message: "non-finite cell activation".into(),
        });
    }
    let gates = GateActivations {
        forget: Array1::from(zs[0..h].to_vec()),
        input: Array1::from(zs[h..2 * h].to_vec()),
        candidate: Array1::from(zs[2 * h..3 * h].to_vec()),
        output: Array1::from(zs[3 * h..4 * h].to_vec()),
    };
    Ok((h_out, c, gates))
}

/// Applies sigmoid/tanh to one row of gate pre-activations.
#[inline]
fn activate_gates(row: &mut [f64], h: usize) {
    for v in &mut row[0..2 * h] {
        *v = sigmoid(*v);
    }
    for v in &mut row[2 * h..3 * h] {
        *v = v.tanh();
    }
    for v in &mut row[3 * h..4 * h] {
        *v = sigmoid(*v);
    }
}

struct LayerCache {
    /// `(steps*batch, input_dim)`.
    input: Array2<f64>,
    /// Activated gates, `(steps, batch, 4*hidden)`.
    gates: Array3<f64>,
    cells: Array3<f64>,
    tanh_cells: Array3<f64>,
    hidden: Array3<f64>,
}

/// Forward activations kept for back-propagation.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    /// `(batch, num_classes)`.
    pub probs: Array2<f64>,
}

fn layer_forward(layer: &LstmLayerParams, input: Array2<f64>, steps: usize, batch: usize) -> Result<LayerCache> {
    let h = layer.hidden_dim();
    let width = GATE_COUNT * h;
    // input projections for all steps at once, bias folded in
    let mut gates = Array2::zeros((steps * batch, width));
    gates
        .rows_mut()
        .into_iter()
        .for_each(|mut row| row.assign(&layer.biases));
    general_mat_mul(1.0, &input, &layer.input_weights, 1.0, &mut gates);
    let mut gates = gates.into_shape_with_order((steps, batch, width)).expect("contiguous");
    let mut cells = Array3::zeros((steps, batch, h));
    let mut tanh_cells = Array3::zeros((steps, batch, h));
    let mut hidden = Array3::zeros((steps, batch, h));

    for t in 0..steps {
        if t > 0 {
            let h_prev = hidden.index_axis(Axis(0), t - 1);
            let mut z = gates.index_axis_mut(Axis(0), t);
            general_mat_mul(1.0, &h_prev, &layer.recurrent_weights, 1.0, &mut z);
        }
        let (prev_cells, mut rest_cells) = cells.view_mut().split_at(Axis(0), t);
        let mut c_t = rest_cells.index_axis_mut(Axis(0), 0);
        let mut z_t = gates.index_axis_mut(Axis(0), t);
        let mut tc_t = tanh_cells.index_axis_mut(Axis(0), t);
        let mut h_t = hidden.index_axis_mut(Axis(0), t);
        let mut finite = true;
        for b in 0..batch {
            let row = z_t.row_mut(b).into_slice().expect("contiguous row");
            activate_gates(row, h);
            let c_row = c_t.row_mut(b).into_slice().expect("contiguous row");
            let tc_row = tc_t.row_mut(b).into_slice().expect("contiguous row");
            let h_row = h_t.row_mut(b).into_slice().expect("contiguous row");
            for j in 0..h {
                let c_prev = if t > 0 { prev_cells[[t - 1, b, j]] } else { 0.0 };
                let c = row[j] * c_prev + row[h + j] * row[2 * h + j];
                let tc = c.tanh();
                c_row[j] = c;
                tc_row[j] = tc;
                h_row[j] = row[3 * h + j] * tc;
                finite &= h_row[j].is_finite() && c.is_finite();
            }
        }
        if !finite {
            return Err(Error::Numeric {
                step: t,
                message: "non-finite hidden or cell state".into(),
            });
        }
    }
    Ok(LayerCache {
        input,
        gates,
        cells,
        tanh_cells,
        hidden,
    })
}

fn check_input(net: &LstmNetwork, inputs: &ArrayView3<'_, f64>) -> Result<()> {
    let (steps, batch, channels) = inputs.dim();
    if steps == 0 || batch == 0 {
        return Err(Error::Argument("need at least one step and one example".into()));
    }
    if channels != net.config.input_dim {
        return Err(Error::Argument(format!(
            "input has {channels} channels, network expects {}",
            net.config.input_dim
        )));
    }
    Ok(())
}

/// Batched forward pass over inputs shaped `(steps, batch, input_dim)`.
pub fn forward_batch(net: &LstmNetwork, inputs: ArrayView3<'_, f64>) -> Result<ForwardCache> {
    check_input(net, &inputs)?;
    let (steps, batch, channels) = inputs.dim();
    let mut layer_input = inputs
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((steps * batch, channels))
        .expect("contiguous");
    let mut caches = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let cache = layer_forward(layer, layer_input, steps, batch)?;
        let h = layer.hidden_dim();
        layer_input = cache
            .hidden
            .clone()
            .into_shape_with_order((steps * batch, h))
            .expect("contiguous");
        caches.push(cache);
    }
    let top = caches.last().expect("at least one layer");
    let last_hidden = top.hidden.index_axis(Axis(0), steps - 1);
    let mut probs = last_hidden.dot(&net.head_weights) + &net.head_bias;
    for mut row in probs.rows_mut() {
        softmax_in_place(row.as_slice_mut().expect("contiguous row"));
    }
    if !probs.iter().all(|p| p.is_finite()) {
        return Err(Error::Numeric {
            step: steps - 1,
            message: "non-finite class probabilities".into(),
        });
    }
    Ok(ForwardCache { layers: caches, probs })
}

/// Class probabilities for one `(steps, input_dim)` sequence.
pub fn forward_sequence(net: &LstmNetwork, features: ArrayView2<'_, f64>) -> Result<[f64; NUM_CLASSES]> {
    let (steps, channels) = features.dim();
    let inputs = features
        .into_shape_with_order((steps, 1, channels))
        .map_err(|e| Error::Argument(e.to_string()))?;
    let cache = forward_batch(net, inputs)?;
    let mut out = [0.0; NUM_CLASSES];
    for (o, p) in out.iter_mut().zip(cache.probs.row(0)) {
        *o = *p;
    }
    Ok(out)
}

/// Argmax of the class probabilities; ties go to the lowest class code.
pub fn predict(net: &LstmNetwork, features: ArrayView2<'_, f64>) -> Result<(DegradationMode, [f64; NUM_CLASSES])> {
    let probs = forward_sequence(net, features)?;
    Ok((argmax_mode(&probs), probs))
}

/// Mean cross-entropy of a forward cache against its labels.
pub fn batch_loss(cache: &ForwardCache, labels: &[DegradationMode]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(b, label)| -cache.probs[[b, label.index()]].max(PROBABILITY_FLOOR).ln())
        .sum::<f64>()
        / labels.len() as f64
}

/// Gradients with the same layout as [`LstmNetwork`].
pub type LstmGradients = LstmNetwork;

fn layer_backward(
    layer: &LstmLayerParams,
    cache: &LayerCache,
    d_hidden: &Array3<f64>,
    grads: &mut LstmLayerParams,
    need_input_grad: bool,
) -> Option<Array2<f64>> {
    let (steps, batch, h) = cache.hidden.dim();
    let width = GATE_COUNT * h;
    let mut d_gates = Array3::<f64>::zeros((steps, batch, width));
    let mut dh_next = Array2::<f64>::zeros((batch, h));
    let mut dc_next = Array2::<f64>::zeros((batch, h));
    let wh_t = layer.recurrent_weights.t();

    for t in (0..steps).rev() {
        let gates_t = cache.gates.index_axis(Axis(0), t);
        let tc_t = cache.tanh_cells.index_axis(Axis(0), t);
        let dh_above = d_hidden.index_axis(Axis(0), t);
        let mut dz_t = d_gates.index_axis_mut(Axis(0), t);
        for b in 0..batch {
            let g = gates_t.row(b);
            let g = g.as_slice().expect("contiguous row");
            let tc = tc_t.row(b);
            let dz = dz_t.row_mut(b).into_slice().expect("contiguous row");
            for j in 0..h {
                let (f, i, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let c_prev = if t > 0 { cache.cells[[t - 1, b, j]] } else { 0.0 };
                let dh = dh_above[[b, j]] + dh_next[[b, j]];
                let tcj = tc[j];
                let dc = dh * o * (1.0 - tcj * tcj) + dc_next[[b, j]];
                dz[j] = dc * c_prev * f * (1.0 - f);
                dz[h + j] = dc * cand * i * (1.0 - i);
                dz[2 * h + j] = dc * i * (1.0 - cand * cand);
                dz[3 * h + j] = dh * tcj * o * (1.0 - o);
                dc_next[[b, j]] = dc * f;
            }
        }
        if t > 0 {
            general_mat_mul(1.0, &d_gates.index_axis(Axis(0), t), &wh_t, 0.0, &mut dh_next);
        }
    }

    let d_flat = d_gates
        .into_shape_with_order((steps * batch, width))
        .expect("contiguous");
    general_mat_mul(1.0, &cache.input.t(), &d_flat, 1.0, &mut grads.input_weights);
    if steps > 1 {
        let h_prev = cache
            .hidden
            .slice(s![0..steps - 1, .., ..])
            .into_shape_with_order(((steps - 1) * batch, h))
            .expect("contiguous prefix");
        let dz_rest = d_flat.slice(s![batch.., ..]);
        general_mat_mul(1.0, &h_prev.t(), &dz_rest, 1.0, &mut grads.recurrent_weights);
    }
    grads.biases += &d_flat.sum_axis(Axis(0));

    need_input_grad.then(|| d_flat.dot(&layer.input_weights.t()))
}

/// Gradients of the mean cross-entropy over the batch with respect to
/// every parameter, by back-propagation through all steps and layers.
pub fn backward_batch(net: &LstmNetwork, cache: &ForwardCache, labels: &[DegradationMode]) -> Result<LstmGradients> {
    let batch = cache.probs.nrows();
    if labels.len() != batch {
        return Err(Error::Argument("label count does not match batch size".into()));
    }
    let mut grads = LstmNetwork::zeros(net.config);
    let top = cache.layers.last().expect("at least one layer");
    let (steps, _, h) = top.hidden.dim();

    let mut d_logits = cache.probs.clone();
    for (b, label) in labels.iter().enumerate() {
        d_logits[[b, label.index()]] -= 1.0;
    }
    d_logits /= batch as f64;
    let last_hidden = top.hidden.index_axis(Axis(0), steps - 1);
    grads.head_weights = last_hidden.t().dot(&d_logits);
    grads.head_bias = d_logits.sum_axis(Axis(0));

    let mut d_hidden = Array3::<f64>::zeros((steps, batch, h));
    d_hidden
        .index_axis_mut(Axis(0), steps - 1)
        .assign(&d_logits.dot(&net.head_weights.t()));

    for l in (0..net.layers.len()).rev() {
        let d_input = layer_backward(&net.layers[l], &cache.layers[l], &d_hidden, &mut grads.layers[l], l > 0);
        if let Some(d_input) = d_input {
            d_hidden = d_input
                .into_shape_with_order((steps, batch, net.config.hidden_dim))
                .expect("contiguous");
        }
    }

    if !grads.parameter_slices().iter().all(|p| p.iter().all(|v| v.is_finite())) {
        return Err(Error::Numeric {
            step: 0,
            message: "non-finite gradient".into(),
        });
    }
    Ok(grads)
}

/// Loss and gradients for a single labelled sequence.
pub fn backward_bptt(
    net: &LstmNetwork,
    features: ArrayView2<'_, f64>,
    label: DegradationMode,
) -> Result<(f64, LstmGradients)> {
    let (steps, channels) = features.dim();
    let inputs = features
        .into_shape_with_order((steps, 1, channels))
        .map_err(|e| Error::Argument(e.to_string()))?;
    let cache = forward_batch(net, inputs)?;
    let loss = batch_loss(&cache, &[label]);
    let grads = backward_batch(net, &cache, &[label])?;
    Ok((loss, grads))
}
