use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use super::lstm::{Gate, LstmLayer, PeepholeKind};
use super::network::{CellKind, Layer, OutputLayer, StackedNet};
use super::vanilla::VanillaLayer;
use crate::{Error, Result};

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub cell_kind: CellKind,
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub output: usize,
    #[serde(default)]
    pub peephole: PeepholeKind,
}

impl NetConfig {
    pub fn lstm(input: usize, hidden: usize, layers: usize, output: usize) -> Self {
        Self { cell_kind: CellKind::Lstm, input, hidden, layers, output, peephole: PeepholeKind::Diagonal }
    }

    pub fn vanilla(input: usize, hidden: usize, layers: usize, output: usize) -> Self {
        Self { cell_kind: CellKind::Vanilla, ..Self::lstm(input, hidden, layers, output) }
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

/// Glorot-uniform input/recurrent/output weights, zero peepholes, zero
/// biases except the forget-gate bias, which starts at 1.
pub fn init_params(cfg: &NetConfig, seed: u64) -> Result<StackedNet> {
    if cfg.input == 0 || cfg.hidden == 0 || cfg.layers == 0 || cfg.output == 0 {
        return Err(Error::Config(alloc::format!("all network dimensions must be positive: {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = cfg.hidden;
    let layers: Vec<Layer> = (0..cfg.layers)
        .map(|l| {
            let n_in = if l == 0 { cfg.input } else { h };
            match cfg.cell_kind {
                CellKind::Lstm => {
                    let mut gate = |peephole: bool, bias: f64| {
                        let mut g = Gate::zeros(n_in, h, peephole.then_some(cfg.peephole));
                        g.input = glorot(&mut rng, h, n_in);
                        g.recurrent = glorot(&mut rng, h, h);
                        g.bias.iter_mut().for_each(|b| *b = bias);
                        g
                    };
                    Layer::Lstm(LstmLayer {
                        input_gate: gate(true, 0.0),
                        forget_gate: gate(true, 1.0),
                        output_gate: gate(true, 0.0),
                        candidate: gate(false, 0.0),
                    })
                }
                CellKind::Vanilla => {
                    let mut layer = VanillaLayer::zeros(n_in, h);
                    layer.input = glorot(&mut rng, h, n_in);
                    layer.recurrent = glorot(&mut rng, h, h);
                    Layer::Vanilla(layer)
                }
            }
        })
        .collect();
    let mut output = OutputLayer::zeros(h, cfg.output);
    output.weight = glorot(&mut rng, cfg.output, h);
    StackedNet::new(layers, output)
}
