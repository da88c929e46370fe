//! Automatic differentiation: a scalar reverse-mode tape, forward-mode dual
//! numbers, and a batched replay engine for tape programs.
//!
//! Spatial derivatives of the network (input dimension 1 or 2) are carried by
//! [`Dual`] tangents; parameter derivatives come from the reverse sweep over
//! the [`Tape`]. Nesting the two (`Dual<Var, N>`) differentiates losses that
//! themselves contain input-derivatives, e.g. divergence and pressure-gradient
//! residuals.

mod batch;
mod dual;
mod tape;

pub use batch::{BatchResult, BatchWorkspace, Program};
pub use dual::{Dual, Dual1, Dual2, Scalar};
pub use tape::{AdError, Gradient, Op, Tape, Var};

/// Evaluates `program` at `inputs` with forward-mode duals seeded along
/// `seed`, returning the value vector and its directional derivative.
pub fn forward_jvp<F>(program: F, inputs: &[f64], seed: &[f64]) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&[Dual1<f64>]) -> Vec<Dual1<f64>>,
{
    assert_eq!(inputs.len(), seed.len(), "seed length must match inputs");
    let duals: Vec<Dual1<f64>> = inputs
        .iter()
        .zip(seed)
        .map(|(&x, &s)| Dual::new(x, [s]))
        .collect();
    let out = program(&duals);
    let values = out.iter().map(|d| d.re).collect();
    let derivs = out.iter().map(|d| d.dx[0]).collect();
    (values, derivs)
}

/// Records `f` on a fresh tape with the given leaf values and returns the
/// scalar output together with its gradient with respect to every leaf.
///
/// When `f` builds the output through `Dual<Var, N>` arithmetic this is the
/// forward-over-reverse path: the inner tangents are themselves tape nodes,
/// so the returned gradient is the exact parameter derivative of a loss that
/// contains input-derivatives.
pub fn grad_of<F>(leaf_values: &[f64], f: F) -> Result<(f64, Vec<f64>), AdError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let leaves: Vec<Var<'_>> = leaf_values.iter().map(|&v| tape.leaf(v)).collect();
    let out = f(&tape, &leaves);
    let value = tape.value(out);
    let grad = tape.gradient(out)?;
    Ok((value, leaves.iter().map(|&l| grad.wrt(l)).collect()))
}
