use ndarray::{Array2, ArrayView2};

use super::tape::{heaviside, AdError, Node, Op, Tape, Var};

/// Lane width of one execution chunk. Values and adjoints for a chunk are
/// `n_nodes × LANES` and should stay cache-resident.
const LANES: usize = 64;

/// An immutable snapshot of a recorded tape, replayable over many
/// independent right-hand sides at once.
///
/// The per-particle residual computation has identical structure for every
/// particle; only leaf values differ. Recording it once and replaying the op
/// stream column-wise amortizes interpretation cost over the batch while
/// keeping the arithmetic identical to the scalar tape, node for node.
pub struct Program {
    ops: Vec<Op>,
    leaf_nodes: Vec<u32>,
}

impl Program {
    /// Snapshots the current tape contents. Leaves are numbered in recording
    /// order; bound values must follow that order.
    pub fn from_tape(tape: &Tape) -> Self {
        let nodes = tape.nodes.borrow();
        let ops: Vec<Op> = nodes.iter().map(|n: &Node| n.op).collect();
        let leaf_nodes = ops
            .iter()
            .enumerate()
            .filter(|(_, op)| matches!(op, Op::Leaf))
            .map(|(i, _)| i as u32)
            .collect();
        Program { ops, leaf_nodes }
    }

    pub fn n_nodes(&self) -> usize {
        self.ops.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn node_index(&self, var: Var<'_>) -> u32 {
        var.id()
    }

    /// Replays the program for every column of `leaf_values`.
    ///
    /// * `leaf_values` — `(n_leaves, n_cols)`, column = one particle.
    /// * `output` — node whose adjoint is seeded to 1 in the reverse sweep.
    /// * `monitors` — node ids whose forward values are exported.
    /// * `monitor_out` — `(monitors.len(), n_cols)`.
    /// * `leaf_adj_out` — `(n_leaves, n_cols)` adjoints of every leaf.
    ///
    /// Fails on the first chunk whose output or monitored values are
    /// non-finite, reporting the earliest offending node.
    pub fn run_batch(
        &self,
        leaf_values: ArrayView2<'_, f64>,
        output: u32,
        monitors: &[u32],
        ws: &mut BatchWorkspace,
        monitor_out: &mut Array2<f64>,
        leaf_adj_out: &mut Array2<f64>,
    ) -> Result<(), AdError> {
        let n_nodes = self.ops.len();
        let n_cols = leaf_values.ncols();
        assert_eq!(leaf_values.nrows(), self.leaf_nodes.len());
        assert_eq!(monitor_out.nrows(), monitors.len());
        assert_eq!(monitor_out.ncols(), n_cols);
        assert_eq!(leaf_adj_out.dim(), (self.leaf_nodes.len(), n_cols));
        assert!((output as usize) < n_nodes);
        ws.ensure(n_nodes);

        let mut col = 0;
        while col < n_cols {
            let w = LANES.min(n_cols - col);
            self.forward_chunk(&leaf_values, col, w, ws);
            self.check_chunk(output, monitors, ws, w)?;
            for (mi, &m) in monitors.iter().enumerate() {
                let row = &ws.values[m as usize * LANES..m as usize * LANES + w];
                monitor_out
                    .row_mut(mi)
                    .slice_mut(ndarray::s![col..col + w])
                    .iter_mut()
                    .zip(row)
                    .for_each(|(dst, &src)| *dst = src);
            }
            self.reverse_chunk(output, ws, w);
            for (li, &leaf) in self.leaf_nodes.iter().enumerate() {
                let row = &ws.adjoints[leaf as usize * LANES..leaf as usize * LANES + w];
                leaf_adj_out
                    .row_mut(li)
                    .slice_mut(ndarray::s![col..col + w])
                    .iter_mut()
                    .zip(row)
                    .for_each(|(dst, &src)| *dst = src);
            }
            col += w;
        }
        Ok(())
    }

    fn forward_chunk(
        &self,
        leaf_values: &ArrayView2<'_, f64>,
        col: usize,
        w: usize,
        ws: &mut BatchWorkspace,
    ) {
        let vals = &mut ws.values;
        let mut leaf_idx = 0usize;
        for (i, op) in self.ops.iter().enumerate() {
            let base = i * LANES;
            match *op {
                Op::Leaf => {
                    let src = leaf_values.row(leaf_idx);
                    for l in 0..w {
                        vals[base + l] = src[col + l];
                    }
                    leaf_idx += 1;
                }
                Op::Const(c) => vals[base..base + w].fill(c),
                Op::Add(x, y) => binary(vals, base, x, y, w, |a, b| a + b),
                Op::Sub(x, y) => binary(vals, base, x, y, w, |a, b| a - b),
                Op::Mul(x, y) => binary(vals, base, x, y, w, |a, b| a * b),
                Op::Div(x, y) => binary(vals, base, x, y, w, |a, b| a / b),
                Op::Neg(x) => unary(vals, base, x, w, |a| -a),
                Op::Tanh(x) => unary(vals, base, x, w, f64::tanh),
                Op::Step(x) => unary(vals, base, x, w, heaviside),
                Op::Scale(x, c) => unary(vals, base, x, w, |a| a * c),
                Op::DivC(x, c) => unary(vals, base, x, w, |a| a / c),
                Op::Shift(x, c) => unary(vals, base, x, w, |a| a + c),
                Op::MulAddC(acc, x, c) => binary(vals, base, acc, x, w, |a, b| a + b * c),
            }
        }
    }

    fn reverse_chunk(&self, output: u32, ws: &mut BatchWorkspace, w: usize) {
        let vals = &ws.values;
        let adj = &mut ws.adjoints;
        adj[..self.ops.len() * LANES].fill(0.0);
        let out_base = output as usize * LANES;
        adj[out_base..out_base + w].fill(1.0);

        for (i, op) in self.ops.iter().enumerate().take(output as usize + 1).rev() {
            let base = i * LANES;
            match *op {
                Op::Leaf | Op::Const(_) | Op::Step(_) => {}
                Op::Add(x, y) => {
                    let (xb, yb) = (x as usize * LANES, y as usize * LANES);
                    for l in 0..w {
                        let a = adj[base + l];
                        adj[xb + l] += a;
                        adj[yb + l] += a;
                    }
                }
                Op::Sub(x, y) => {
                    let (xb, yb) = (x as usize * LANES, y as usize * LANES);
                    for l in 0..w {
                        let a = adj[base + l];
                        adj[xb + l] += a;
                        adj[yb + l] -= a;
                    }
                }
                Op::Mul(x, y) => {
                    let (xb, yb) = (x as usize * LANES, y as usize * LANES);
                    for l in 0..w {
                        let a = adj[base + l];
                        adj[xb + l] += a * vals[yb + l];
                        adj[yb + l] += a * vals[xb + l];
                    }
                }
                Op::Div(x, y) => {
                    let (xb, yb) = (x as usize * LANES, y as usize * LANES);
                    for l in 0..w {
                        let a = adj[base + l];
                        let yv = vals[yb + l];
                        adj[xb + l] += a / yv;
                        adj[yb + l] -= a * vals[base + l] / yv;
                    }
                }
                Op::Neg(x) => {
                    let xb = x as usize * LANES;
                    for l in 0..w {
                        adj[xb + l] -= adj[base + l];
                    }
                }
                Op::Tanh(x) => {
                    let xb = x as usize * LANES;
                    for l in 0..w {
                        let t = vals[base + l];
                        adj[xb + l] += adj[base + l] * (1.0 - t * t);
                    }
                }
                Op::Scale(x, c) => {
                    let xb = x as usize * LANES;
                    for l in 0..w {
                        adj[xb + l] += adj[base + l] * c;
                    }
                }
                Op::DivC(x, c) => {
                    let xb = x as usize * LANES;
                    for l in 0..w {
                        adj[xb + l] += adj[base + l] / c;
                    }
                }
                Op::Shift(x, _) => {
                    let xb = x as usize * LANES;
                    for l in 0..w {
                        adj[xb + l] += adj[base + l];
                    }
                }
                Op::MulAddC(acc, x, c) => {
                    let (ab, xb) = (acc as usize * LANES, x as usize * LANES);
                    for l in 0..w {
                        let a = adj[base + l];
                        adj[ab + l] += a;
                        adj[xb + l] += a * c;
                    }
                }
            }
        }
    }

    /// Locates the first non-finite node if the chunk produced one.
    fn check_chunk(
        &self,
        output: u32,
        monitors: &[u32],
        ws: &BatchWorkspace,
        w: usize,
    ) -> Result<(), AdError> {
        let mut bad = false;
        for &m in monitors.iter().chain(std::iter::once(&output)) {
            let base = m as usize * LANES;
            if !ws.values[base..base + w].iter().all(|v| v.is_finite()) {
                bad = true;
                break;
            }
        }
        if !bad {
            return Ok(());
        }
        for (i, op) in self.ops.iter().enumerate() {
            let base = i * LANES;
            if !ws.values[base..base + w].iter().all(|v| v.is_finite()) {
                return Err(AdError::NonFinite {
                    id: i as u32,
                    op: match op {
                        Op::Div(..) => "div",
                        Op::Tanh(_) => "tanh",
                        Op::Mul(..) => "mul",
                        _ => "node",
                    },
                });
            }
        }
        Ok(())
    }
}

fn unary(vals: &mut [f64], base: usize, x: u32, w: usize, f: impl Fn(f64) -> f64) {
    let xb = x as usize * LANES;
    for l in 0..w {
        vals[base + l] = f(vals[xb + l]);
    }
}

fn binary(vals: &mut [f64], base: usize, x: u32, y: u32, w: usize, f: impl Fn(f64, f64) -> f64) {
    let xb = x as usize * LANES;
    let yb = y as usize * LANES;
    for l in 0..w {
        vals[base + l] = f(vals[xb + l], vals[yb + l]);
    }
}

/// Reusable forward/adjoint buffers for chunked replay.
pub struct BatchWorkspace {
    values: Vec<f64>,
    adjoints: Vec<f64>,
}

impl BatchWorkspace {
    pub fn new() -> Self {
        BatchWorkspace {
            values: Vec::new(),
            adjoints: Vec::new(),
        }
    }

    fn ensure(&mut self, n_nodes: usize) {
        let need = n_nodes * LANES;
        if self.values.len() < need {
            self.values.resize(need, 0.0);
            self.adjoints.resize(need, 0.0);
        }
    }
}

impl Default for BatchWorkspace {
    fn default() -> Self {
        Self::new()
    }
}

/// Convenience bundle for callers that want owned outputs.
#[derive(Debug)]
pub struct BatchResult {
    pub monitors: Array2<f64>,
    pub leaf_adjoints: Array2<f64>,
}

impl Program {
    /// Allocating wrapper around [`Program::run_batch`].
    pub fn run(
        &self,
        leaf_values: ArrayView2<'_, f64>,
        output: u32,
        monitors: &[u32],
    ) -> Result<BatchResult, AdError> {
        let n_cols = leaf_values.ncols();
        let mut ws = BatchWorkspace::new();
        let mut monitor_out = Array2::zeros((monitors.len(), n_cols));
        let mut leaf_adj_out = Array2::zeros((self.leaf_nodes.len(), n_cols));
        self.run_batch(
            leaf_values,
            output,
            monitors,
            &mut ws,
            &mut monitor_out,
            &mut leaf_adj_out,
        )?;
        Ok(BatchResult {
            monitors: monitor_out,
            leaf_adjoints: leaf_adj_out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;
    use ndarray::array;

    #[test]
    fn batch_matches_immediate_tape() {
        // f(a, b) = tanh(a*b) + a/b, three bindings.
        let tape = Tape::new();
        let a = tape.leaf(0.0);
        let b = tape.leaf(1.0);
        let f = (a * b).tanh() + a / b;
        let program = Program::from_tape(&tape);
        let out = program.node_index(f);

        let bindings = array![[0.3, -0.7, 1.2], [0.9, 0.4, -1.1]];
        let result = program.run(bindings.view(), out, &[out]).unwrap();

        for col in 0..3 {
            let (av, bv) = (bindings[[0, col]], bindings[[1, col]]);
            let t = Tape::new();
            let x = t.leaf(av);
            let y = t.leaf(bv);
            let g = (x * y).tanh() + x / y;
            let grad = t.gradient(g).unwrap();
            assert_eq!(result.monitors[[0, col]].to_bits(), t.value(g).to_bits());
            assert_eq!(
                result.leaf_adjoints[[0, col]].to_bits(),
                grad.wrt(x).to_bits()
            );
            assert_eq!(
                result.leaf_adjoints[[1, col]].to_bits(),
                grad.wrt(y).to_bits()
            );
        }
    }

    #[test]
    fn non_finite_column_is_reported() {
        let tape = Tape::new();
        let a = tape.leaf(1.0);
        let b = tape.leaf(1.0);
        let f = a / b;
        let program = Program::from_tape(&tape);
        let out = program.node_index(f);
        let bindings = array![[1.0, 1.0], [1.0, 0.0]];
        let err = program.run(bindings.view(), out, &[]).unwrap_err();
        assert!(matches!(err, AdError::NonFinite { .. }));
    }
}
