//! Stacked recurrent network, forward trace and backpropagation through
//! time.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{axpy, Matrix};
use super::lstm::{lstm_cell_forward, LstmLayer, LstmStep};
use super::vanilla::{VanillaLayer, VanillaStep};
use super::Parameters;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[default]
    Lstm,
    Vanilla,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Lstm(LstmLayer),
    Vanilla(VanillaLayer),
}

impl Layer {
    pub fn kind(&self) -> CellKind {
        match self {
            Layer::Lstm(_) => CellKind::Lstm,
            Layer::Vanilla(_) => CellKind::Vanilla,
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            Layer::Lstm(l) => l.input_size(),
            Layer::Vanilla(l) => l.input_size(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        match self {
            Layer::Lstm(l) => l.hidden_size(),
            Layer::Vanilla(l) => l.hidden_size(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Layer::Lstm(l) => Layer::Lstm(l.zeros_like()),
            Layer::Vanilla(l) => Layer::Vanilla(l.zeros_like()),
        }
    }
}

/// Linear readout `y = W h_top + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    /// output × hidden
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl OutputLayer {
    pub fn zeros(hidden: usize, output: usize) -> Self {
        Self { weight: Matrix::zeros(output, hidden), bias: vec![0.0; output] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedNet {
    layers: Vec<Layer>,
    output: OutputLayer,
}

impl StackedNet {
    pub fn new(layers: Vec<Layer>, output: OutputLayer) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::Shape("network needs at least one layer".to_string()))?;
        let kind = first.kind();
        for (l, layer) in layers.iter().enumerate() {
            if layer.kind() != kind {
                return Err(Error::Shape(format!("layer {l} is {:?} in a {kind:?} network", layer.kind())));
            }
            match layer {
                Layer::Lstm(x) => x.check_shapes()?,
                Layer::Vanilla(x) => x.check_shapes()?,
            }
            if l > 0 && layer.input_size() != layers[l - 1].hidden_size() {
                return Err(Error::Shape(format!(
                    "layer {l} reads {} inputs but layer {} has {} hidden units",
                    layer.input_size(),
                    l - 1,
                    layers[l - 1].hidden_size()
                )));
            }
        }
        let top = layers[layers.len() - 1].hidden_size();
        if output.weight.cols() != top || output.weight.rows() != output.bias.len() {
            return Err(Error::Shape(format!(
                "output layer {}x{} with {} biases does not fit top hidden size {top}",
                output.weight.rows(),
                output.weight.cols(),
                output.bias.len()
            )));
        }
        Ok(Self { layers, output })
    }

    pub fn cell_kind(&self) -> CellKind {
        self.layers[0].kind()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output(&self) -> &OutputLayer {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut OutputLayer {
        &mut self.output
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.output.bias.len()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::hidden_size).collect()
    }

    /// Gradient accumulator with the same tensor tree.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
            output: OutputLayer::zeros(self.output.weight.cols(), self.output.weight.rows()),
        }
    }

    /// `self += alpha * other`; both must share a tensor tree.
    pub fn add_scaled(&mut self, alpha: f64, other: &StackedNet) {
        let flat = other.flatten();
        let mut at = 0;
        self.visit_mut(&mut |_, t| {
            axpy(alpha, &flat[at..at + t.len()], t);
            at += t.len();
        });
    }

    pub fn scale(&mut self, alpha: f64) {
        self.visit_mut(&mut |_, t| t.iter_mut().for_each(|v| *v *= alpha));
    }

    pub fn zero_state(&self) -> CellState {
        CellState {
            h: self.layers.iter().map(|l| vec![0.0; l.hidden_size()]).collect(),
            c: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Lstm(x) => vec![0.0; x.hidden_size()],
                    Layer::Vanilla(_) => Vec::new(),
                })
                .collect(),
        }
    }

    /// Output at the last step for a scalar input sequence, starting from
    /// the zero state.
    pub fn predict_last(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let seq: Vec<[f64; 1]> = inputs.iter().map(|v| [*v]).collect();
        let mut trace = stacked_forward(self, &seq, &self.zero_state())?;
        Ok(trace.outputs.pop().expect("non-empty sequence"))
    }
}

impl Parameters for StackedNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (l, layer) in self.layers.iter().enumerate() {
            let prefix = format!("layer{l}");
            match layer {
                Layer::Lstm(x) => x.visit(&prefix, f),
                Layer::Vanilla(x) => x.visit(&prefix, f),
            }
        }
        f("output.weight", self.output.weight.data());
        f("output.bias", &self.output.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let prefix = format!("layer{l}");
            match layer {
                Layer::Lstm(x) => x.visit_mut(&prefix, f),
                Layer::Vanilla(x) => x.visit_mut(&prefix, f),
            }
        }
        f("output.weight", self.output.weight.data_mut());
        f("output.bias", &mut self.output.bias);
    }
}

/// Per-layer hidden state, plus cell state for LSTM layers (empty for
/// vanilla layers).
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerStep {
    Lstm(LstmStep),
    Vanilla(VanillaStep),
}

impl LayerStep {
    pub fn h(&self) -> &[f64] {
        match self {
            LayerStep::Lstm(s) => &s.h,
            LayerStep::Vanilla(s) => &s.h,
        }
    }
}

/// Activations of a forward pass: `steps[t][l]` for step `t`, layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub steps: Vec<Vec<LayerStep>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn final_state(&self) -> CellState {
        let last = self.steps.last().expect("trace has at least one step");
        CellState {
            h: last.iter().map(|s| s.h().to_vec()).collect(),
            c: last
                .iter()
                .map(|s| match s {
                    LayerStep::Lstm(x) => x.c.clone(),
                    LayerStep::Vanilla(_) => Vec::new(),
                })
                .collect(),
        }
    }
}

pub fn stacked_forward<X: AsRef<[f64]>>(net: &StackedNet, sequence: &[X], initial: &CellState) -> Result<Trace> {
    if sequence.is_empty() {
        return Err(Error::Empty("input sequence has no steps".to_string()));
    }
    let n_layers = net.layers.len();
    if initial.h.len() != n_layers || initial.c.len() != n_layers {
        return Err(Error::Shape(format!(
            "initial state has {} hidden / {} cell vectors for {n_layers} layers",
            initial.h.len(),
            initial.c.len()
        )));
    }
    for (l, layer) in net.layers.iter().enumerate() {
        let want_c = match layer {
            Layer::Lstm(x) => x.hidden_size(),
            Layer::Vanilla(_) => 0,
        };
        if initial.h[l].len() != layer.hidden_size() || initial.c[l].len() != want_c {
            return Err(Error::Shape(format!("initial state of layer {l} has the wrong size")));
        }
    }

    let mut h = initial.h.clone();
    let mut c = initial.c.clone();
    let mut steps = Vec::with_capacity(sequence.len());
    let mut outputs = Vec::with_capacity(sequence.len());
    for (t, x) in sequence.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != net.input_size() {
            return Err(Error::Shape(format!("step {t} input has {} features, expected {}", x.len(), net.input_size())));
        }
        let mut per_layer = Vec::with_capacity(n_layers);
        for (l, layer) in net.layers.iter().enumerate() {
            let input: &[f64] = if l == 0 { x } else { per_layer_h(&per_layer, l - 1) };
            let step = match layer {
                Layer::Lstm(p) => {
                    let s = lstm_cell_forward(p, input, &h[l], &c[l])?;
                    c[l].clone_from(&s.c);
                    LayerStep::Lstm(s)
                }
                Layer::Vanilla(p) => LayerStep::Vanilla(p.forward(input, &h[l])?),
            };
            h[l].clear();
            h[l].extend_from_slice(step.h());
            per_layer.push(step);
        }
        let mut y = net.output.bias.clone();
        net.output.weight.mul_vec_add(per_layer[n_layers - 1].h(), &mut y);
        outputs.push(y);
        steps.push(per_layer);
    }
    Ok(Trace { steps, outputs })
}

fn per_layer_h(steps: &[LayerStep], l: usize) -> &[f64] {
    steps[l].h()
}

fn check_trace(net: &StackedNet, trace: &Trace) -> Result<()> {
    if trace.steps.is_empty() || trace.steps.len() != trace.outputs.len() {
        return Err(Error::Shape("trace is empty or inconsistent".to_string()));
    }
    for row in &trace.steps {
        if row.len() != net.layers.len() {
            return Err(Error::Shape(format!("trace has {} layers, network has {}", row.len(), net.layers.len())));
        }
        for (layer, step) in net.layers.iter().zip(row) {
            let ok = match (layer, step) {
                (Layer::Lstm(p), LayerStep::Lstm(s)) => s.h.len() == p.hidden_size() && s.x.len() == p.input_size(),
                (Layer::Vanilla(p), LayerStep::Vanilla(s)) => s.h.len() == p.hidden_size() && s.x.len() == p.input_size(),
                _ => false,
            };
            if !ok {
                return Err(Error::Shape("trace was not produced by this network".to_string()));
            }
        }
    }
    Ok(())
}

/// Backpropagates per-step output gradients `dy[t] = ∂L/∂y^(t)` through the
/// whole trace.
pub fn backward_from_output_grads(net: &StackedNet, trace: &Trace, dy: &[Vec<f64>]) -> Result<StackedNet> {
    let mut grad = net.zeros_like();
    backward_accumulate(net, trace, dy, &mut grad)?;
    Ok(grad)
}

/// As [`backward_from_output_grads`], adding into an existing gradient
/// tree (for mini-batch accumulation).
pub fn backward_accumulate(net: &StackedNet, trace: &Trace, dy: &[Vec<f64>], grad: &mut StackedNet) -> Result<()> {
    check_trace(net, trace)?;
    if dy.len() != trace.outputs.len() || dy.iter().any(|d| d.len() != net.output_size()) {
        return Err(Error::Shape("output gradient does not match trace outputs".to_string()));
    }
    if grad.layers.len() != net.layers.len()
        || grad.layers.iter().zip(&net.layers).any(|(g, p)| g.kind() != p.kind() || g.hidden_size() != p.hidden_size() || g.input_size() != p.input_size())
    {
        return Err(Error::Shape("gradient tree does not match network".to_string()));
    }
    let n_layers = net.layers.len();
    let mut dh_next: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.hidden_size()]).collect();
    let mut dc_next: Vec<Vec<f64>> = dh_next.clone();

    for t in (0..trace.steps.len()).rev() {
        let row = &trace.steps[t];
        let dy_t = &dy[t];
        grad.output.weight.add_outer(dy_t, row[n_layers - 1].h());
        axpy(1.0, dy_t, &mut grad.output.bias);
        let mut from_above = vec![0.0; net.layers[n_layers - 1].hidden_size()];
        net.output.weight.mul_t_vec_add(dy_t, &mut from_above);

        for l in (0..n_layers).rev() {
            axpy(1.0, &dh_next[l], &mut from_above);
            let dh = from_above;
            from_above = match (&net.layers[l], &row[l], &mut grad.layers[l]) {
                (Layer::Lstm(p), LayerStep::Lstm(s), Layer::Lstm(g)) => {
                    let (dx, dh_prev, dc_prev) = p.backward_step(s, &dh, &dc_next[l], g);
                    dh_next[l] = dh_prev;
                    dc_next[l] = dc_prev;
                    dx
                }
                (Layer::Vanilla(p), LayerStep::Vanilla(s), Layer::Vanilla(g)) => {
                    let (dx, dh_prev) = p.backward_step(s, &dh, g);
                    dh_next[l] = dh_prev;
                    dx
                }
                _ => unreachable!("checked by check_trace"),
            };
        }
    }
    Ok(())
}

/// Gradient of [`mse_loss`](super::loss::mse_loss) over every step and
/// output component.
pub fn backward_bptt(net: &StackedNet, trace: &Trace, targets: &[Vec<f64>]) -> Result<StackedNet> {
    let dy = super::loss::mse_grad(&trace.outputs, targets)?;
    backward_from_output_grads(net, trace, &dy)
}
