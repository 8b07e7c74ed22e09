//! Central finite-difference check of the analytic BPTT gradient.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::init::{init_params, NetConfig};
use super::lstm::PeepholeKind;
use super::network::{backward_bptt, stacked_forward, CellKind, StackedNet};
use super::{mse_loss, Parameters};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index within it of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    pub passed: bool,
}

fn loss_at<X: AsRef<[f64]>>(net: &StackedNet, seq: &[X], targets: &[Vec<f64>]) -> Result<f64> {
    let trace = stacked_forward(net, seq, &net.zero_state())?;
    mse_loss(&trace.outputs, targets)
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn grad_check<X: AsRef<[f64]>>(net: &StackedNet, seq: &[X], targets: &[Vec<f64>], step: f64, tolerance: f64) -> Result<GradCheckReport> {
    let trace = stacked_forward(net, seq, &net.zero_state())?;
    let analytic = backward_bptt(net, &trace, targets)?;
    grad_check_against(net, seq, targets, &analytic, step, tolerance)
}

/// Compares a supplied gradient tree against finite differences of the
/// sequence MSE at every parameter coordinate.
pub fn grad_check_against<X: AsRef<[f64]>>(
    net: &StackedNet,
    seq: &[X],
    targets: &[Vec<f64>],
    analytic: &StackedNet,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::Config(alloc::format!("finite-difference step {step} must be positive")));
    }
    let grads = analytic.flatten();
    let base = net.flatten();
    if grads.len() != base.len() {
        return Err(Error::Shape("gradient tree does not match network".into()));
    }
    let layout = net.layout();
    let mut probe = net.clone();
    let mut flat = base.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: 0,
        passed: true,
    };
    for (name, offset, len) in &layout {
        for k in 0..*len {
            let i = offset + k;
            flat[i] = base[i] + step;
            probe.load_flat(&flat);
            let plus = loss_at(&probe, seq, targets)?;
            flat[i] = base[i] - step;
            probe.load_flat(&flat);
            let minus = loss_at(&probe, seq, targets)?;
            flat[i] = base[i];
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grads[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), k));
                report.analytic_at_worst = grads[i];
                report.numeric_at_worst = numeric;
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}

/// A network, input sequence and targets for checking gradients.
#[derive(Debug, Clone)]
pub struct GradProblem {
    pub config: NetConfig,
    pub net: StackedNet,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl GradProblem {
    /// Glorot-initialized weights with peepholes and biases drawn from
    /// ±0.5, inputs and targets from ±1.
    pub fn random(config: NetConfig, steps: usize, seed: u64) -> Result<GradProblem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = init_params(&config, rng.random())?;
        let mut flat = net.flatten();
        for (name, offset, len) in net.layout() {
            if name.ends_with("peephole") || name.ends_with("bias") {
                flat[offset..offset + len].iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
            }
        }
        net.load_flat(&flat);
        let draw = |rng: &mut ChaCha8Rng, width: usize| -> Vec<Vec<f64>> {
            (0..steps).map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
        };
        let inputs = draw(&mut rng, config.input);
        let targets = draw(&mut rng, config.output);
        Ok(GradProblem { config, net, inputs, targets })
    }

    pub fn check(&self, step: f64, tolerance: f64) -> Result<GradCheckReport> {
        grad_check(&self.net, &self.inputs, &self.targets, step, tolerance)
    }
}

/// `count` small problems alternating LSTM and vanilla cells, with 1 to 3
/// layers, hidden size 4 to 8 and 1 to 16 steps. Every fourth uses full
/// peephole matrices.
pub fn random_problems(count: usize, seed: u64) -> Result<Vec<GradProblem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let config = NetConfig {
                cell_kind: if i % 2 == 0 { CellKind::Lstm } else { CellKind::Vanilla },
                input: rng.random_range(1..=3),
                hidden: rng.random_range(4..=8),
                layers: rng.random_range(1..=3),
                output: rng.random_range(1..=2),
                peephole: if i % 4 == 0 { PeepholeKind::Full } else { PeepholeKind::Diagonal },
            };
            let steps = rng.random_range(1..=16);
            GradProblem::random(config, steps, rng.random())
        })
        .collect()
}
