//! LSTM cell with peephole connections.
//!
//! ```text
//! f = σ(W_fx x + W_fh h' + P_f c' + b_f)
//! i = σ(W_ix x + W_ih h' + P_i c' + b_i)
//! u = tanh(W_cx x + W_ch h' + b_c)
//! c = u ⊙ i + c' ⊙ f
//! o = σ(W_ox x + W_oh h' + P_o c' + b_o)
//! h = o ⊙ tanh(c)
//! ```
//!
//! `h'`, `c'` are the previous hidden and cell states. All three peepholes
//! read the *previous* cell state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::linalg::{axpy, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PeepholeKind {
    #[default]
    Diagonal,
    Full,
}

/// Connection from the previous cell state into a gate.
#[derive(Debug, Clone, PartialEq)]
pub enum Peephole {
    Diagonal(Vec<f64>),
    Full(Matrix),
}

impl Peephole {
    pub fn zeros(kind: PeepholeKind, hidden: usize) -> Self {
        match kind {
            PeepholeKind::Diagonal => Peephole::Diagonal(vec![0.0; hidden]),
            PeepholeKind::Full => Peephole::Full(Matrix::zeros(hidden, hidden)),
        }
    }

    pub fn kind(&self) -> PeepholeKind {
        match self {
            Peephole::Diagonal(_) => PeepholeKind::Diagonal,
            Peephole::Full(_) => PeepholeKind::Full,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Peephole::Diagonal(v) => v,
            Peephole::Full(m) => m.data(),
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Peephole::Diagonal(v) => v,
            Peephole::Full(m) => m.data_mut(),
        }
    }

    fn forward_add(&self, c_prev: &[f64], out: &mut [f64]) {
        match self {
            Peephole::Diagonal(w) => {
                for ((o, w), c) in out.iter_mut().zip(w).zip(c_prev) {
                    *o += w * c;
                }
            }
            Peephole::Full(m) => m.mul_vec_add(c_prev, out),
        }
    }

    /// Accumulates the weight gradient into `grad` and the state gradient
    /// into `dc_prev`.
    fn backward_add(&self, grad: &mut Peephole, da: &[f64], c_prev: &[f64], dc_prev: &mut [f64]) {
        match (self, grad) {
            (Peephole::Diagonal(w), Peephole::Diagonal(g)) => {
                for k in 0..w.len() {
                    g[k] += da[k] * c_prev[k];
                    dc_prev[k] += w[k] * da[k];
                }
            }
            (Peephole::Full(m), Peephole::Full(g)) => {
                g.add_outer(da, c_prev);
                m.mul_t_vec_add(da, dc_prev);
            }
            _ => unreachable!("gradient tree mirrors the parameter tree"),
        }
    }
}

/// Weights of one gate: input map, recurrent map, optional peephole, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    /// hidden × input
    pub input: Matrix,
    /// hidden × hidden
    pub recurrent: Matrix,
    pub peephole: Option<Peephole>,
    pub bias: Vec<f64>,
}

impl Gate {
    pub fn zeros(input: usize, hidden: usize, peephole: Option<PeepholeKind>) -> Self {
        Self {
            input: Matrix::zeros(hidden, input),
            recurrent: Matrix::zeros(hidden, hidden),
            peephole: peephole.map(|k| Peephole::zeros(k, hidden)),
            bias: vec![0.0; hidden],
        }
    }

    fn pre_activation(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Vec<f64> {
        let mut a = self.bias.clone();
        self.input.mul_vec_add(x, &mut a);
        self.recurrent.mul_vec_add(h_prev, &mut a);
        if let Some(p) = &self.peephole {
            p.forward_add(c_prev, &mut a);
        }
        a
    }

    /// Backpropagates the pre-activation gradient `da`.
    fn backward(&self, grad: &mut Gate, da: &[f64], step: &LstmStep, dx: &mut [f64], dh_prev: &mut [f64], dc_prev: &mut [f64]) {
        self.input.backward_add(da, &step.x, dx, &mut grad.input);
        self.recurrent.backward_add(da, &step.h_prev, dh_prev, &mut grad.recurrent);
        axpy(1.0, da, &mut grad.bias);
        if let (Some(p), Some(gp)) = (&self.peephole, grad.peephole.as_mut()) {
            p.backward_add(gp, da, &step.c_prev, dc_prev);
        }
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        f(&format!("{prefix}.input"), self.input.data());
        f(&format!("{prefix}.recurrent"), self.recurrent.data());
        if let Some(p) = &self.peephole {
            f(&format!("{prefix}.peephole"), p.values());
        }
        f(&format!("{prefix}.bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(&format!("{prefix}.input"), self.input.data_mut());
        f(&format!("{prefix}.recurrent"), self.recurrent.data_mut());
        if let Some(p) = &mut self.peephole {
            f(&format!("{prefix}.peephole"), p.values_mut());
        }
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_gate: Gate,
    pub forget_gate: Gate,
    pub output_gate: Gate,
    /// Candidate state `u`; has no peephole.
    pub candidate: Gate,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize, peephole: PeepholeKind) -> Self {
        Self {
            input_gate: Gate::zeros(input, hidden, Some(peephole)),
            forget_gate: Gate::zeros(input, hidden, Some(peephole)),
            output_gate: Gate::zeros(input, hidden, Some(peephole)),
            candidate: Gate::zeros(input, hidden, None),
        }
    }

    pub fn input_size(&self) -> usize {
        self.candidate.input.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.candidate.bias.len()
    }

    /// Zero tensor tree of the same shape.
    pub fn zeros_like(&self) -> Self {
        let kind = self.input_gate.peephole.as_ref().map_or(PeepholeKind::Diagonal, Peephole::kind);
        Self::zeros(self.input_size(), self.hidden_size(), kind)
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let (n_in, n_h) = (self.input_size(), self.hidden_size());
        for (name, g) in self.gates() {
            let ok = g.input.rows() == n_h
                && g.input.cols() == n_in
                && g.recurrent.rows() == n_h
                && g.recurrent.cols() == n_h
                && g.bias.len() == n_h
                && match &g.peephole {
                    None => name == "candidate",
                    Some(Peephole::Diagonal(v)) => name != "candidate" && v.len() == n_h,
                    Some(Peephole::Full(m)) => name != "candidate" && m.rows() == n_h && m.cols() == n_h,
                };
            if !ok {
                return Err(Error::Shape(format!("LSTM {name} gate inconsistent with input {n_in}, hidden {n_h}")));
            }
        }
        Ok(())
    }

    fn gates(&self) -> [(&'static str, &Gate); 4] {
        [
            ("input_gate", &self.input_gate),
            ("forget_gate", &self.forget_gate),
            ("output_gate", &self.output_gate),
            ("candidate", &self.candidate),
        ]
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        for (name, g) in self.gates() {
            g.visit(&format!("{prefix}.{name}"), f);
        }
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.input_gate.visit_mut(&format!("{prefix}.input_gate"), f);
        self.forget_gate.visit_mut(&format!("{prefix}.forget_gate"), f);
        self.output_gate.visit_mut(&format!("{prefix}.output_gate"), f);
        self.candidate.visit_mut(&format!("{prefix}.candidate"), f);
    }

    /// Gradients for one step. `dh` is the total gradient reaching `h_t`,
    /// `dc` the gradient reaching `c_t` from step `t + 1`. Accumulates
    /// weight gradients into `grad` and returns `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(&self, step: &LstmStep, dh: &[f64], dc: &[f64], grad: &mut LstmLayer) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n_h = self.hidden_size();
        let mut da_o = vec![0.0; n_h];
        let mut da_i = vec![0.0; n_h];
        let mut da_f = vec![0.0; n_h];
        let mut da_u = vec![0.0; n_h];
        let mut dc_prev = vec![0.0; n_h];
        for k in 0..n_h {
            let (i, f, o, u, tc) = (step.i[k], step.f[k], step.o[k], step.u[k], step.tanh_c[k]);
            da_o[k] = dh[k] * tc * o * (1.0 - o);
            let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da_i[k] = dck * u * i * (1.0 - i);
            da_u[k] = dck * i * (1.0 - u * u);
            da_f[k] = dck * step.c_prev[k] * f * (1.0 - f);
            dc_prev[k] = dck * f;
        }
        let mut dx = vec![0.0; self.input_size()];
        let mut dh_prev = vec![0.0; n_h];
        self.input_gate.backward(&mut grad.input_gate, &da_i, step, &mut dx, &mut dh_prev, &mut dc_prev);
        self.forget_gate.backward(&mut grad.forget_gate, &da_f, step, &mut dx, &mut dh_prev, &mut dc_prev);
        self.output_gate.backward(&mut grad.output_gate, &da_o, step, &mut dx, &mut dh_prev, &mut dc_prev);
        self.candidate.backward(&mut grad.candidate, &da_u, step, &mut dx, &mut dh_prev, &mut dc_prev);
        (dx, dh_prev, dc_prev)
    }
}

/// Everything one forward step produced, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn lstm_cell_forward(layer: &LstmLayer, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStep> {
    let (n_in, n_h) = (layer.input_size(), layer.hidden_size());
    if x.len() != n_in || h_prev.len() != n_h || c_prev.len() != n_h {
        return Err(Error::Shape(format!(
            "LSTM step expects x[{n_in}], h[{n_h}], c[{n_h}]; got x[{}], h[{}], c[{}]",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut f = layer.forget_gate.pre_activation(x, h_prev, c_prev);
    let mut i = layer.input_gate.pre_activation(x, h_prev, c_prev);
    let mut u = layer.candidate.pre_activation(x, h_prev, c_prev);
    let mut o = layer.output_gate.pre_activation(x, h_prev, c_prev);
    f.iter_mut().for_each(|v| *v = sigmoid(*v));
    i.iter_mut().for_each(|v| *v = sigmoid(*v));
    u.iter_mut().for_each(|v| *v = libm::tanh(*v));
    o.iter_mut().for_each(|v| *v = sigmoid(*v));
    let c: Vec<f64> = (0..n_h).map(|k| u[k] * i[k] + c_prev[k] * f[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| libm::tanh(*v)).collect();
    let h = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    Ok(LstmStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        o,
        u,
        c,
        tanh_c,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_half_gates() {
        let layer = LstmLayer::zeros(3, 4, PeepholeKind::Diagonal);
        let s = lstm_cell_forward(&layer, &[0.3, -2.0, 7.0], &[0.0; 4], &[0.0; 4]).unwrap();
        for v in [&s.i, &s.f, &s.o] {
            assert!(v.iter().all(|x| *x == 0.5));
        }
        assert!(s.u.iter().chain(&s.c).chain(&s.h).all(|x| *x == 0.0));
    }

    #[test]
    fn zero_parameters_halve_the_cell() {
        let layer = LstmLayer::zeros(1, 3, PeepholeKind::Diagonal);
        let s = lstm_cell_forward(&layer, &[1.5], &[0.0; 3], &[2.0, -4.0, 0.25]).unwrap();
        assert_eq!(s.c, [1.0, -2.0, 0.125]);
    }

    #[test]
    fn scalar_unit_weights_at_origin() {
        let mut layer = LstmLayer::zeros(1, 1, PeepholeKind::Diagonal);
        for g in [&mut layer.input_gate, &mut layer.forget_gate, &mut layer.output_gate, &mut layer.candidate] {
            g.input.data_mut()[0] = 1.0;
            g.recurrent.data_mut()[0] = 1.0;
            if let Some(p) = &mut g.peephole {
                p.values_mut()[0] = 1.0;
            }
        }
        let s = lstm_cell_forward(&layer, &[0.0], &[0.0], &[0.0]).unwrap();
        assert_eq!((s.f[0], s.i[0], s.o[0], s.u[0], s.c[0], s.h[0]), (0.5, 0.5, 0.5, 0.0, 0.0, 0.0));
    }

    #[test]
    fn peephole_reads_previous_cell() {
        let mut layer = LstmLayer::zeros(1, 1, PeepholeKind::Full);
        if let Some(p) = &mut layer.output_gate.peephole {
            p.values_mut()[0] = 2.0;
        }
        let s = lstm_cell_forward(&layer, &[0.0], &[0.0], &[1.0]).unwrap();
        assert!((s.o[0] - sigmoid(2.0)).abs() < 1e-15);
        assert_eq!(s.f[0], 0.5);
    }

    #[test]
    fn rejects_bad_shapes() {
        let layer = LstmLayer::zeros(2, 3, PeepholeKind::Diagonal);
        assert!(lstm_cell_forward(&layer, &[0.0], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(lstm_cell_forward(&layer, &[0.0; 2], &[0.0; 2], &[0.0; 3]).is_err());
        assert!(lstm_cell_forward(&layer, &[0.0; 2], &[0.0; 3], &[0.0; 4]).is_err());
    }
}
