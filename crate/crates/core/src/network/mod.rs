//! The feed-forward ansatz: tanh hidden layers, affine output, mapping a
//! particle position to IRK stage outputs.

mod batched;
mod checkpoint;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::Scalar;

pub use batched::NetWorkspace;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("layer {0} has zero width")]
    ZeroWidthLayer(usize),
    #[error("a network needs at least an input and an output layer")]
    TooFewLayers,
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    InputDim { expected: usize, got: usize },
    #[error("output length {got} does not match schema width {expected}")]
    SchemaWidth { expected: usize, got: usize },
}

/// Layer widths, input first, e.g. `[2, 60, 60, 62]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkLayout {
    pub sizes: Vec<usize>,
}

impl NetworkLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self, NetworkError> {
        if sizes.len() < 2 {
            return Err(NetworkError::TooFewLayers);
        }
        for (i, &n) in sizes.iter().enumerate() {
            if n == 0 {
                return Err(NetworkError::ZeroWidthLayer(i));
            }
        }
        Ok(NetworkLayout { sizes })
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

/// Names which output neurons hold the velocity stages, the next-step
/// velocity, and (for the fluid net) the pressure stages. The slices
/// partition the output vector: width = d·(s+1) for the ODE/velocity-only
/// net plus s pressure neurons when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputSchema {
    pub dim: usize,
    pub stages: usize,
    pub has_pressure: bool,
}

impl OutputSchema {
    /// Scalar ODE net: s velocity stages and the next velocity, no pressure.
    pub fn ode(stages: usize) -> Self {
        OutputSchema {
            dim: 1,
            stages,
            has_pressure: false,
        }
    }

    /// Fluid net in `dim` dimensions: s velocity stages + next velocity
    /// (each `dim`-wide) + s scalar pressure stages.
    pub fn fluid(dim: usize, stages: usize) -> Self {
        OutputSchema {
            dim,
            stages,
            has_pressure: true,
        }
    }

    pub fn output_width(&self) -> usize {
        self.dim * (self.stages + 1) + if self.has_pressure { self.stages } else { 0 }
    }

    /// Stage count implied by an output width, if consistent:
    /// `width = d·(s+1) + s` for a fluid net.
    pub fn fluid_stages_for_width(dim: usize, width: usize) -> Option<usize> {
        let num = width.checked_sub(dim)?;
        if num % (dim + 1) == 0 {
            Some(num / (dim + 1))
        } else {
            None
        }
    }

    /// Index of component `k` of velocity stage `i` (0-based).
    pub fn vel_stage(&self, i: usize, k: usize) -> usize {
        i * self.dim + k
    }

    /// Index of component `k` of the next-step velocity.
    pub fn vel_next(&self, k: usize) -> usize {
        self.stages * self.dim + k
    }

    /// Index of pressure stage `i`.
    pub fn pressure(&self, i: usize) -> usize {
        debug_assert!(self.has_pressure);
        self.dim * (self.stages + 1) + i
    }

    /// Partitions a raw output vector; rejects a length mismatch.
    pub fn split(&self, output: &[f64]) -> Result<StageSplit, NetworkError> {
        if output.len() != self.output_width() {
            return Err(NetworkError::SchemaWidth {
                expected: self.output_width(),
                got: output.len(),
            });
        }
        let vel_stages = (0..self.stages)
            .map(|i| (0..self.dim).map(|k| output[self.vel_stage(i, k)]).collect())
            .collect();
        let vel_next = (0..self.dim).map(|k| output[self.vel_next(k)]).collect();
        let pressures = if self.has_pressure {
            (0..self.stages).map(|i| output[self.pressure(i)]).collect()
        } else {
            Vec::new()
        };
        Ok(StageSplit {
            vel_stages,
            vel_next,
            pressures,
        })
    }
}

/// One particle's network outputs, split per the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSplit {
    pub vel_stages: Vec<Vec<f64>>,
    pub vel_next: Vec<f64>,
    pub pressures: Vec<f64>,
}

impl StageSplit {
    /// Inverse of [`OutputSchema::split`].
    pub fn reassemble(&self, schema: &OutputSchema) -> Vec<f64> {
        let mut out = vec![0.0; schema.output_width()];
        for (i, v) in self.vel_stages.iter().enumerate() {
            for (k, &x) in v.iter().enumerate() {
                out[schema.vel_stage(i, k)] = x;
            }
        }
        for (k, &x) in self.vel_next.iter().enumerate() {
            out[schema.vel_next(k)] = x;
        }
        for (i, &p) in self.pressures.iter().enumerate() {
            out[schema.pressure(i)] = p;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Weights and biases of the ansatz. Hidden activations are tanh, the output
/// layer is affine: velocities and pressures are unbounded.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
}

impl NetworkParams {
    /// Glorot-uniform weights (±sqrt(6/(n_in+n_out))), zero biases,
    /// reproducible from the seed.
    pub fn init(layout: &NetworkLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layout
            .sizes
            .windows(2)
            .map(|pair| {
                let (n_in, n_out) = (pair[0], pair[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                let w = Array2::from_shape_fn((n_out, n_in), |_| {
                    (2.0 * rng.random::<f64>() - 1.0) * limit
                });
                Layer {
                    w,
                    b: Array1::zeros(n_out),
                }
            })
            .collect();
        NetworkParams { layers }
    }

    pub fn layout(&self) -> NetworkLayout {
        let mut sizes = vec![self.layers[0].w.ncols()];
        sizes.extend(self.layers.iter().map(|l| l.w.nrows()));
        NetworkLayout { sizes }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flattens layer by layer: W row-major, then b.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            flat.extend(l.w.iter());
            flat.extend(l.b.iter());
        }
        flat
    }

    /// Writes a flat vector (same order as [`Self::to_flat`]) back in place.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = flat[off];
                off += 1;
            }
            for b in l.b.iter_mut() {
                *b = flat[off];
                off += 1;
            }
        }
    }

    /// Plain forward pass for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if x.len() != self.layers[0].w.ncols() {
            return Err(NetworkError::InputDim {
                expected: self.layers[0].w.ncols(),
                got: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut a: Vec<f64> = x.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> = layer.b.to_vec();
            for (j, zj) in z.iter_mut().enumerate() {
                for (k, &ak) in a.iter().enumerate() {
                    *zj += layer.w[[j, k]] * ak;
                }
            }
            if li < last {
                for zj in z.iter_mut() {
                    *zj = zj.tanh();
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Lifts weights and biases into another scalar domain (tape variables,
    /// duals) in `to_flat` order.
    pub fn lift<S: Scalar>(&self, mut f: impl FnMut(f64) -> S) -> LiftedParams<S> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w: Vec<S> = l.w.iter().map(|&v| f(v)).collect();
                let b: Vec<S> = l.b.iter().map(|&v| f(v)).collect();
                (l.w.nrows(), l.w.ncols(), w, b)
            })
            .collect();
        LiftedParams { layers }
    }
}

/// Network parameters lifted into a generic scalar domain.
pub struct LiftedParams<S> {
    layers: Vec<(usize, usize, Vec<S>, Vec<S>)>,
}

impl<S: Scalar> LiftedParams<S> {
    /// Feed-forward recursion in the lifted domain; with `S = Dual<Var, N>`
    /// this records the full nested computation on the tape.
    pub fn forward(&self, x: &[S]) -> Vec<S> {
        let last = self.layers.len() - 1;
        let mut a: Vec<S> = x.to_vec();
        for (li, (rows, cols, w, b)) in self.layers.iter().enumerate() {
            debug_assert_eq!(a.len(), *cols);
            let mut z = Vec::with_capacity(*rows);
            for j in 0..*rows {
                let mut zj = b[j];
                for (k, &ak) in a.iter().enumerate() {
                    zj = zj + w[j * cols + k] * ak;
                }
                z.push(if li < last { zj.tanh() } else { zj });
            }
            a = z;
        }
        a
    }
}
