//! Dense recurrent networks with hand-derived backpropagation through time.
//!
//! Two cell kinds are supported: an LSTM with peephole connections from the
//! previous cell state into the input, forget and output gates, and a plain
//! `tanh` recurrence. Layers stack so that layer 1 reads the input sequence
//! and layer `l` reads the hidden state of layer `l - 1` at the same step; a
//! linear readout maps the top hidden state to the output.

pub mod activation;
pub mod gradcheck;
pub mod init;
pub mod linalg;
pub mod loss;
pub mod lstm;
pub mod network;
pub mod optim;
pub mod vanilla;

use alloc::string::String;
use alloc::vec::Vec;

pub use activation::{sigmoid, sigmoid_vec, tanh_vec};
pub use gradcheck::{grad_check, grad_check_against, random_problems, GradCheckReport, GradProblem};
pub use init::{init_params, NetConfig};
pub use linalg::Matrix;
pub use loss::mse_loss;
pub use lstm::{lstm_cell_forward, Gate, LstmLayer, LstmStep, Peephole, PeepholeKind};
pub use network::{
    backward_accumulate, backward_bptt, backward_from_output_grads, stacked_forward, CellKind, CellState, Layer, LayerStep,
    OutputLayer, StackedNet, Trace,
};
pub use optim::{optimizer_step, AdamConfig, AdamState, StepInfo};
pub use vanilla::{VanillaLayer, VanillaStep};

/// A tree of named parameter tensors that can be walked in a fixed order.
///
/// The order is part of the contract: flattening, optimizer state and
/// checkpoints all rely on it.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |_, t| out.extend_from_slice(t));
        out
    }

    /// Overwrites every parameter from `flat`, which must have
    /// `param_count()` entries.
    fn load_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut at = 0;
        self.visit_mut(&mut |_, t| {
            t.copy_from_slice(&flat[at..at + t.len()]);
            at += t.len();
        });
    }

    /// `(name, offset, len)` of each tensor within the flattened vector.
    fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        self.visit(&mut |name, t| {
            out.push((String::from(name), at, t.len()));
            at += t.len();
        });
        out
    }
}

impl Parameters for Vec<f64> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("params", self)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("params", self)
    }
}
