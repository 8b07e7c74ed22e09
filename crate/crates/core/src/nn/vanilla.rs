//! Plain recurrent layer: `a = b + W h' + U x`, `h = tanh(a)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{axpy, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaLayer {
    /// `U`, hidden × input
    pub input: Matrix,
    /// `W`, hidden × hidden
    pub recurrent: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub h: Vec<f64>,
}

impl VanillaLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { input: Matrix::zeros(hidden, input), recurrent: Matrix::zeros(hidden, hidden), bias: vec![0.0; hidden] }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size(), self.hidden_size())
    }

    pub fn input_size(&self) -> usize {
        self.input.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.bias.len()
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let n_h = self.hidden_size();
        if self.input.rows() != n_h || self.recurrent.rows() != n_h || self.recurrent.cols() != n_h {
            return Err(Error::Shape(format!("vanilla layer inconsistent with hidden size {n_h}")));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], h_prev: &[f64]) -> Result<VanillaStep> {
        if x.len() != self.input_size() || h_prev.len() != self.hidden_size() {
            return Err(Error::Shape(format!(
                "vanilla step expects x[{}], h[{}]; got x[{}], h[{}]",
                self.input_size(),
                self.hidden_size(),
                x.len(),
                h_prev.len()
            )));
        }
        let mut a = self.bias.clone();
        self.recurrent.mul_vec_add(h_prev, &mut a);
        self.input.mul_vec_add(x, &mut a);
        a.iter_mut().for_each(|v| *v = libm::tanh(*v));
        Ok(VanillaStep { x: x.to_vec(), h_prev: h_prev.to_vec(), h: a })
    }

    /// Returns `(dx, dh_prev)` and accumulates weight gradients into `grad`.
    pub fn backward_step(&self, step: &VanillaStep, dh: &[f64], grad: &mut VanillaLayer) -> (Vec<f64>, Vec<f64>) {
        let da: Vec<f64> = dh.iter().zip(&step.h).map(|(d, h)| d * (1.0 - h * h)).collect();
        grad.input.add_outer(&da, &step.x);
        grad.recurrent.add_outer(&da, &step.h_prev);
        axpy(1.0, &da, &mut grad.bias);
        let mut dx = vec![0.0; self.input_size()];
        let mut dh_prev = vec![0.0; self.hidden_size()];
        self.input.mul_t_vec_add(&da, &mut dx);
        self.recurrent.mul_t_vec_add(&da, &mut dh_prev);
        (dx, dh_prev)
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        f(&format!("{prefix}.input"), self.input.data());
        f(&format!("{prefix}.recurrent"), self.recurrent.data());
        f(&format!("{prefix}.bias"), &self.bias);
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(&format!("{prefix}.input"), self.input.data_mut());
        f(&format!("{prefix}.recurrent"), self.recurrent.data_mut());
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}
