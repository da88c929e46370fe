use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use super::dual::Scalar;

/// Errors from tape construction or the reverse sweep.
#[derive(Debug, Error)]
pub enum AdError {
    #[error("variable #{0} does not belong to this tape")]
    ForeignNode(u32),
    #[error("non-finite value encountered during replay at node #{id} ({op})")]
    NonFinite { id: u32, op: &'static str },
}

/// A recorded primitive. Operand fields refer to earlier node indices, so the
/// node sequence is topologically ordered by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    /// Independent input (parameter or bound data).
    Leaf,
    /// Embedded constant.
    Const(f64),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Tanh(u32),
    /// Heaviside-style activation 0.5·(1 + sign(x)); derivative 0 a.e.
    Step(u32),
    /// x · c for a constant c.
    Scale(u32, f64),
    /// x / c for a constant c (kept as a true division so x = c maps to
    /// exactly 1).
    DivC(u32, f64),
    /// x + c for a constant c.
    Shift(u32, f64),
    /// acc + x · c for a constant c (fused form of Scale + Add).
    MulAddC(u32, u32, f64),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Const(_) => "const",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(_) => "neg",
            Op::Tanh(_) => "tanh",
            Op::Step(_) => "step",
            Op::Scale(..) => "scale",
            Op::DivC(..) => "divc",
            Op::Shift(..) => "shift",
            Op::MulAddC(..) => "muladd",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Node {
    pub op: Op,
    pub val: f64,
}

/// Append-only record of a scalar computation.
///
/// Values are evaluated eagerly while recording, so a tape doubles as the
/// forward pass; [`Tape::gradient`] replays adjoints in reverse node order,
/// which makes repeated sweeps bitwise reproducible.
pub struct Tape {
    pub(super) nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    /// Drops all nodes but keeps the allocation for re-recording.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, val: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len() as u32;
        nodes.push(Node { op, val });
        Var { tape: self, id }
    }

    /// Records an independent input.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        self.push(Op::Leaf, value)
    }

    /// Records an embedded constant.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Op::Const(value), value)
    }

    /// Current value of a recorded node.
    pub fn value(&self, var: Var<'_>) -> f64 {
        self.nodes.borrow()[var.id as usize].val
    }

    fn check_owned(&self, var: Var<'_>) -> Result<(), AdError> {
        if std::ptr::eq(var.tape, self) && (var.id as usize) < self.len() {
            Ok(())
        } else {
            Err(AdError::ForeignNode(var.id))
        }
    }

    /// Reverse sweep from a scalar output node. Every recorded node receives
    /// an adjoint; leaves that do not influence the output get exactly 0.
    ///
    /// Fails fast on the first non-finite value or adjoint met on a path that
    /// actually reaches the output.
    pub fn gradient(&self, output: Var<'_>) -> Result<Gradient, AdError> {
        self.check_owned(output)?;
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0f64; nodes.len()];
        adj[output.id as usize] = 1.0;

        for i in (0..=output.id as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            if !a.is_finite() || !node.val.is_finite() {
                return Err(AdError::NonFinite {
                    id: i as u32,
                    op: node.op.name(),
                });
            }
            match node.op {
                Op::Leaf | Op::Const(_) => {}
                Op::Add(x, y) => {
                    adj[x as usize] += a;
                    adj[y as usize] += a;
                }
                Op::Sub(x, y) => {
                    adj[x as usize] += a;
                    adj[y as usize] -= a;
                }
                Op::Mul(x, y) => {
                    adj[x as usize] += a * nodes[y as usize].val;
                    adj[y as usize] += a * nodes[x as usize].val;
                }
                Op::Div(x, y) => {
                    let yv = nodes[y as usize].val;
                    adj[x as usize] += a / yv;
                    adj[y as usize] -= a * node.val / yv;
                }
                Op::Neg(x) => adj[x as usize] -= a,
                Op::Tanh(x) => {
                    adj[x as usize] += a * (1.0 - node.val * node.val);
                }
                Op::Step(_) => {}
                Op::Scale(x, c) => adj[x as usize] += a * c,
                Op::DivC(x, c) => adj[x as usize] += a / c,
                Op::Shift(x, _) => adj[x as usize] += a,
                Op::MulAddC(acc, x, c) => {
                    adj[acc as usize] += a;
                    adj[x as usize] += a * c;
                }
            }
        }
        Ok(Gradient { adjoints: adj })
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Adjoints of one reverse sweep, indexable by recorded variable.
#[derive(Debug)]
pub struct Gradient {
    adjoints: Vec<f64>,
}

impl Gradient {
    pub fn wrt(&self, var: Var<'_>) -> f64 {
        self.adjoints[var.id as usize]
    }
}

/// Handle to a node on a [`Tape`]; arithmetic on handles records new nodes.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(super) tape: &'t Tape,
    pub(super) id: u32,
}

impl<'t> Var<'t> {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn value(&self) -> f64 {
        self.tape.value(*self)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Var<'t> {
        let v = self.value() + rhs.value();
        self.tape.push(Op::Add(self.id, rhs.id), v)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Var<'t> {
        let v = self.value() - rhs.value();
        self.tape.push(Op::Sub(self.id, rhs.id), v)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Var<'t> {
        let v = self.value() * rhs.value();
        self.tape.push(Op::Mul(self.id, rhs.id), v)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Var<'t> {
        let v = self.value() / rhs.value();
        self.tape.push(Op::Div(self.id, rhs.id), v)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        let v = -self.value();
        self.tape.push(Op::Neg(self.id), v)
    }
}

impl<'t> Scalar for Var<'t> {
    fn const_like(self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn scale(self, c: f64) -> Self {
        let v = self.value() * c;
        self.tape.push(Op::Scale(self.id, c), v)
    }

    fn div_c(self, c: f64) -> Self {
        let v = self.value() / c;
        self.tape.push(Op::DivC(self.id, c), v)
    }

    fn shift(self, c: f64) -> Self {
        let v = self.value() + c;
        self.tape.push(Op::Shift(self.id, c), v)
    }

    fn mul_add_c(self, x: Self, c: f64) -> Self {
        let v = self.value() + x.value() * c;
        self.tape.push(Op::MulAddC(self.id, x.id, c), v)
    }

    fn tanh(self) -> Self {
        let v = self.value().tanh();
        self.tape.push(Op::Tanh(self.id), v)
    }

    fn step(self) -> Self {
        let v = heaviside(self.value());
        self.tape.push(Op::Step(self.id), v)
    }
}

pub(super) fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let w = tape.leaf(3.0);
        let f = w * w;
        let g = tape.gradient(f).unwrap();
        assert_eq!(g.wrt(w), 6.0);
    }

    #[test]
    fn unused_leaf_gets_exact_zero() {
        let tape = Tape::new();
        let w1 = tape.leaf(2.5);
        let w2 = tape.leaf(-1.0);
        let f = w1.scale(1.0);
        let g = tape.gradient(f).unwrap();
        assert_eq!(g.wrt(w1), 1.0);
        assert_eq!(g.wrt(w2), 0.0);
    }

    #[test]
    fn foreign_node_rejected() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let a = t1.leaf(1.0);
        let _b = t2.leaf(2.0);
        assert!(matches!(t2.gradient(a), Err(AdError::ForeignNode(_))));
    }

    #[test]
    fn nan_fails_fast_with_node_id() {
        let tape = Tape::new();
        let x = tape.leaf(0.0);
        let y = tape.leaf(1.0);
        let q = y / x; // inf
        let f = q * x; // nan adjoint path
        let err = tape.gradient(f).unwrap_err();
        match err {
            AdError::NonFinite { .. } => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn division_rule() {
        let tape = Tape::new();
        let x = tape.leaf(3.0);
        let y = tape.leaf(2.0);
        let f = x / y;
        let g = tape.gradient(f).unwrap();
        assert!((g.wrt(x) - 0.5).abs() < 1e-15);
        assert!((g.wrt(y) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn step_has_zero_derivative() {
        let tape = Tape::new();
        let x = tape.leaf(0.3);
        let f = x.step() * x;
        assert_eq!(tape.value(f), 0.3);
        let g = tape.gradient(f).unwrap();
        // d/dx (step(x)·x) with step treated as constant = step(x) = 1.
        assert_eq!(g.wrt(x), 1.0);
    }

    #[test]
    fn deterministic_replay() {
        let tape = Tape::new();
        let leaves: Vec<_> = (0..8).map(|i| tape.leaf(0.1 * i as f64 - 0.3)).collect();
        let mut acc = tape.constant(0.0);
        for pair in leaves.chunks(2) {
            acc = acc + (pair[0] * pair[1]).tanh();
        }
        let g1 = tape.gradient(acc).unwrap();
        let g2 = tape.gradient(acc).unwrap();
        for &l in &leaves {
            assert_eq!(g1.wrt(l).to_bits(), g2.wrt(l).to_bits());
        }
    }
}
