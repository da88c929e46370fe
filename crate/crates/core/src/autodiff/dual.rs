use std::ops::{Add, Div, Mul, Neg, Sub};

/// The closed primitive set the differentiation engine supports: field
/// arithmetic, tanh, and the zero-derivative step activation. Programs are
/// written against this trait, so an unsupported primitive cannot be
/// expressed in the first place.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant in the same computation context as `self`.
    fn const_like(self, c: f64) -> Self;
    /// `self · c` for a plain constant.
    fn scale(self, c: f64) -> Self;
    /// `self / c` for a plain constant, as a true division.
    fn div_c(self, c: f64) -> Self;
    /// `self + c` for a plain constant.
    fn shift(self, c: f64) -> Self;
    /// `self + x · c` for a plain constant.
    fn mul_add_c(self, x: Self, c: f64) -> Self;
    fn tanh(self) -> Self;
    /// 0.5·(1 + sign(x)); treated as locally constant by differentiation.
    fn step(self) -> Self;
}

impl Scalar for f64 {
    fn const_like(self, c: f64) -> Self {
        c
    }

    fn scale(self, c: f64) -> Self {
        self * c
    }

    fn div_c(self, c: f64) -> Self {
        self / c
    }

    fn shift(self, c: f64) -> Self {
        self + c
    }

    // Two roundings on purpose, matching the tape's replay arithmetic.
    fn mul_add_c(self, x: Self, c: f64) -> Self {
        self + x * c
    }

    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    fn step(self) -> Self {
        super::tape::heaviside(self)
    }
}

/// Forward-mode number carrying `N` tangent slots alongside the value.
///
/// The tangent length is fixed by the type, so it is constant through any
/// computation; arithmetic applies the exact chain rule slot by slot. With
/// `S = f64` this is a plain dual number; with `S = Var` the tangents are
/// tape nodes and parameter gradients of input-derivatives become available
/// through the reverse sweep.
#[derive(Debug, Clone, Copy)]
pub struct Dual<S, const N: usize> {
    pub re: S,
    pub dx: [S; N],
}

pub type Dual1<S> = Dual<S, 1>;
pub type Dual2<S> = Dual<S, 2>;

impl<S: Scalar, const N: usize> Dual<S, N> {
    pub fn new(re: S, dx: [S; N]) -> Self {
        Dual { re, dx }
    }

    /// Lifts a value with zero tangents (a quantity independent of the seeds).
    pub fn lift(re: S) -> Self {
        Dual {
            re,
            dx: [re.const_like(0.0); N],
        }
    }

    /// Lifts a value with a unit tangent in direction `k` (an input seed).
    pub fn seeded(re: S, k: usize) -> Self {
        let mut dx = [re.const_like(0.0); N];
        dx[k] = re.const_like(1.0);
        Dual { re, dx }
    }
}

impl<S: Scalar, const N: usize> Add for Dual<S, N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = self.dx[k] + rhs.dx[k];
        }
        Dual {
            re: self.re + rhs.re,
            dx,
        }
    }
}

impl<S: Scalar, const N: usize> Sub for Dual<S, N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = self.dx[k] - rhs.dx[k];
        }
        Dual {
            re: self.re - rhs.re,
            dx,
        }
    }
}

impl<S: Scalar, const N: usize> Mul for Dual<S, N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = self.dx[k] * rhs.re + self.re * rhs.dx[k];
        }
        Dual {
            re: self.re * rhs.re,
            dx,
        }
    }
}

impl<S: Scalar, const N: usize> Div for Dual<S, N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re;
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = (self.dx[k] - re * rhs.dx[k]) / rhs.re;
        }
        Dual { re, dx }
    }
}

impl<S: Scalar, const N: usize> Neg for Dual<S, N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = -self.dx[k];
        }
        Dual { re: -self.re, dx }
    }
}

impl<S: Scalar, const N: usize> Scalar for Dual<S, N> {
    fn const_like(self, c: f64) -> Self {
        Dual {
            re: self.re.const_like(c),
            dx: [self.re.const_like(0.0); N],
        }
    }

    fn scale(self, c: f64) -> Self {
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = self.dx[k].scale(c);
        }
        Dual {
            re: self.re.scale(c),
            dx,
        }
    }

    fn div_c(self, c: f64) -> Self {
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = self.dx[k].div_c(c);
        }
        Dual {
            re: self.re.div_c(c),
            dx,
        }
    }

    fn shift(self, c: f64) -> Self {
        Dual {
            re: self.re.shift(c),
            dx: self.dx,
        }
    }

    fn mul_add_c(self, x: Self, c: f64) -> Self {
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = self.dx[k].mul_add_c(x.dx[k], c);
        }
        Dual {
            re: self.re.mul_add_c(x.re, c),
            dx,
        }
    }

    fn tanh(self) -> Self {
        let t = self.re.tanh();
        // d/dz tanh = 1 - tanh^2
        let s = (-(t * t)).shift(1.0);
        let mut dx = self.dx;
        for k in 0..N {
            dx[k] = s * self.dx[k];
        }
        Dual { re: t, dx }
    }

    fn step(self) -> Self {
        Dual {
            re: self.re.step(),
            dx: [self.re.const_like(0.0); N],
        }
    }
}
