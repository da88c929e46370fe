//! Gauss-Legendre implicit Runge-Kutta tableaus (order 2s) and the stage
//! algebra shared by the solver: position updates from velocity stages and
//! the rearranged velocity estimates that enter the training loss.

use thiserror::Error;

use crate::autodiff::Scalar;

#[derive(Debug, Error)]
pub enum TableauError {
    #[error("stage count {0} outside supported range 1..=100")]
    StageCount(usize),
    #[error("Newton iteration for Legendre root {index} stalled at residual {residual:e}")]
    NewtonStalled { index: usize, residual: f64 },
}

/// Coefficients of an s-stage collocation scheme: `a[j][i]`, weights `b[j]`
/// and abscissae `c[i]` on (0, 1).
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub s: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Legendre polynomial P_n and its derivative at `x`, by the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Builds the s-stage Gauss-Legendre tableau.
///
/// The abscissae are the roots of the degree-s Legendre polynomial shifted to
/// (0, 1), found by Newton iteration from Chebyshev initial guesses; `b` are
/// the Gauss weights and `a[j][i] = integral of the i-th Lagrange basis over
/// [0, c_j]`, evaluated with the same s-point rule (exact: the basis has
/// degree s-1 < 2s).
pub fn gauss_legendre(s: usize) -> Result<ButcherTableau, TableauError> {
    if s == 0 || s > 100 {
        return Err(TableauError::StageCount(s));
    }

    // Roots on [-1, 1], descending from the Chebyshev-like guesses.
    let mut roots = Vec::with_capacity(s);
    let mut weights = Vec::with_capacity(s);
    for i in 0..s {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (s as f64 + 0.5)).cos();
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre(s, x);
            if s == 1 {
                // P_1 = x: exact in one step.
                x = 0.0;
                converged = true;
                break;
            }
            let dx = p / dp;
            x -= dx;
            // Convergence in the root itself: |P| at the best f64 root can
            // stay above raw 1e-14 for large s where P' is huge.
            residual = dx.abs();
            if residual < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(TableauError::NewtonStalled { index: i, residual });
        }
        let (_, dp) = legendre(s, x);
        let w = if s == 1 {
            2.0
        } else {
            2.0 / ((1.0 - x * x) * dp * dp)
        };
        roots.push(x);
        weights.push(w);
    }
    roots.reverse();
    weights.reverse();

    let c: Vec<f64> = roots.iter().map(|&t| 0.5 * (t + 1.0)).collect();
    let b: Vec<f64> = weights.iter().map(|&w| 0.5 * w).collect();

    // Lagrange basis on the nodes c, evaluated by direct product.
    let lagrange = |i: usize, x: f64| -> f64 {
        let mut v = 1.0;
        for (k, &ck) in c.iter().enumerate() {
            if k != i {
                v *= (x - ck) / (c[i] - ck);
            }
        }
        v
    };

    let mut a = vec![vec![0.0; s]; s];
    for (j, &cj) in c.iter().enumerate() {
        for i in 0..s {
            let mut integral = 0.0;
            for (q, &cq) in c.iter().enumerate() {
                integral += b[q] * lagrange(i, cj * cq);
            }
            a[j][i] = cj * integral;
        }
    }

    Ok(ButcherTableau { s, a, b, c })
}

impl ButcherTableau {
    /// Stage estimates of the previous-step velocity, obtained by moving the
    /// quadrature term of the stage update to the other side:
    /// `v_n^j = v^j - dt * sum_i a[j][i] accel^i` and
    /// `v_n^{s+1} = v_next - dt * sum_j b[j] accel^j`.
    pub fn velocity_estimates<S: Scalar, const D: usize>(
        &self,
        dt: f64,
        v_stages: &[[S; D]],
        v_next: [S; D],
        accel: &[[S; D]],
    ) -> (Vec<[S; D]>, [S; D]) {
        assert_eq!(v_stages.len(), self.s);
        assert_eq!(accel.len(), self.s);
        let mut estimates = Vec::with_capacity(self.s);
        for j in 0..self.s {
            let mut est = v_stages[j];
            for (i, acc) in accel.iter().enumerate() {
                for k in 0..D {
                    est[k] = est[k].mul_add_c(acc[k], -dt * self.a[j][i]);
                }
            }
            estimates.push(est);
        }
        let mut last = v_next;
        for (j, acc) in accel.iter().enumerate() {
            for k in 0..D {
                last[k] = last[k].mul_add_c(acc[k], -dt * self.b[j]);
            }
        }
        (estimates, last)
    }

    /// Position stages and next position from the velocity stages:
    /// `x^j = x_n + dt * sum_i a[j][i] v^i`, `x_next = x_n + dt * sum_j b[j] v^j`.
    pub fn position_update<S: Scalar, const D: usize>(
        &self,
        dt: f64,
        x_n: [S; D],
        v_stages: &[[S; D]],
    ) -> (Vec<[S; D]>, [S; D]) {
        assert_eq!(v_stages.len(), self.s);
        let mut stages = Vec::with_capacity(self.s);
        for j in 0..self.s {
            let mut x = x_n;
            for (i, v) in v_stages.iter().enumerate() {
                for k in 0..D {
                    x[k] = x[k].mul_add_c(v[k], dt * self.a[j][i]);
                }
            }
            stages.push(x);
        }
        let mut x_next = x_n;
        for (j, v) in v_stages.iter().enumerate() {
            for k in 0..D {
                x_next[k] = x_next[k].mul_add_c(v[k], dt * self.b[j]);
            }
        }
        (stages, x_next)
    }
}

/// One step of the scheme applied to the scalar linear ODE `q' = lambda * q`,
/// solving the stage system directly. Test oracle for the order property.
pub fn linear_ode_step(tab: &ButcherTableau, lambda: f64, dt: f64, q: f64) -> f64 {
    let s = tab.s;
    // (I - lambda*dt*A) k = lambda * q * 1
    let mut m = vec![vec![0.0; s + 1]; s];
    for j in 0..s {
        for i in 0..s {
            m[j][i] = if i == j { 1.0 } else { 0.0 } - lambda * dt * tab.a[j][i];
        }
        m[j][s] = lambda * q;
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..s {
        let piv = (col..s)
            .max_by(|&r1, &r2| m[r1][col].abs().partial_cmp(&m[r2][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        for row in col + 1..s {
            let f = m[row][col] / m[col][col];
            for k in col..=s {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut k = vec![0.0; s];
    for row in (0..s).rev() {
        let mut acc = m[row][s];
        for col in row + 1..s {
            acc -= m[row][col] * k[col];
        }
        k[row] = acc / m[row][row];
    }
    let mut q_next = q;
    for j in 0..s {
        q_next += dt * tab.b[j] * k[j];
    }
    q_next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_stage_is_implicit_midpoint() {
        let t = gauss_legendre(1).unwrap();
        assert!((t.c[0] - 0.5).abs() < 1e-15);
        assert!((t.b[0] - 1.0).abs() < 1e-15);
        assert!((t.a[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_stage_matches_closed_form() {
        let t = gauss_legendre(2).unwrap();
        let r = 3f64.sqrt() / 6.0;
        assert!((t.c[0] - (0.5 - r)).abs() < 1e-14);
        assert!((t.c[1] - (0.5 + r)).abs() < 1e-14);
        assert!((t.b[0] - 0.5).abs() < 1e-14);
        assert!((t.b[1] - 0.5).abs() < 1e-14);
        assert!((t.a[0][0] - 0.25).abs() < 1e-14);
        assert!((t.a[0][1] - (0.25 - r)).abs() < 1e-14);
        assert!((t.a[1][0] - (0.25 + r)).abs() < 1e-14);
        assert!((t.a[1][1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn quadrature_moments_and_row_sums() {
        for s in [1usize, 2, 3, 5, 8, 20, 50] {
            let t = gauss_legendre(s).unwrap();
            // Exactness for polynomials up to degree 2s-1.
            for k in 0..2 * s {
                let m: f64 = t.b.iter().zip(&t.c).map(|(&b, &c)| b * c.powi(k as i32)).sum();
                assert!(
                    (m - 1.0 / (k as f64 + 1.0)).abs() < 1e-10,
                    "s={s} k={k} moment {m}"
                );
            }
            for j in 0..s {
                let row: f64 = t.a[j].iter().sum();
                assert!((row - t.c[j]).abs() < 1e-12, "s={s} row {j}");
            }
            for i in 0..s {
                assert!((t.c[i] + t.c[s - 1 - i] - 1.0).abs() < 1e-12);
                assert!(t.c[i] > 0.0 && t.c[i] < 1.0);
                if i > 0 {
                    assert!(t.c[i] > t.c[i - 1]);
                }
            }
        }
    }

    #[test]
    fn stage_count_bounds() {
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_legendre(101).is_err());
        assert!(gauss_legendre(100).is_ok());
    }

    #[test]
    fn estimates_with_zero_acceleration_return_stages() {
        let t = gauss_legendre(3).unwrap();
        let v: Vec<[f64; 2]> = vec![[1.0, -2.0], [0.5, 0.25], [3.0, 0.0]];
        let zero = vec![[0.0, 0.0]; 3];
        let (est, last) = t.velocity_estimates(0.7, &v, [9.0, -1.0], &zero);
        for j in 0..3 {
            assert_eq!(est[j], v[j]);
        }
        assert_eq!(last, [9.0, -1.0]);
    }

    #[test]
    fn estimates_recover_vn_for_constant_acceleration() {
        // With exact stages v^j = v_n + dt c_j a0 and v_next = v_n + dt a0,
        // the row-sum identity collapses every estimate to v_n.
        let t = gauss_legendre(4).unwrap();
        let dt = 0.3;
        let a0 = [1.7, -0.4];
        let v_n = [0.2, 0.9];
        let stages: Vec<[f64; 2]> = t
            .c
            .iter()
            .map(|&c| [v_n[0] + dt * c * a0[0], v_n[1] + dt * c * a0[1]])
            .collect();
        let v_next = [v_n[0] + dt * a0[0], v_n[1] + dt * a0[1]];
        let accel = vec![a0; 4];
        let (est, last) = t.velocity_estimates(dt, &stages, v_next, &accel);
        for e in est {
            assert!((e[0] - v_n[0]).abs() < 1e-14);
            assert!((e[1] - v_n[1]).abs() < 1e-14);
        }
        assert!((last[0] - v_n[0]).abs() < 1e-14);
        assert!((last[1] - v_n[1]).abs() < 1e-14);
    }

    #[test]
    fn midpoint_estimate_example() {
        let t = gauss_legendre(1).unwrap();
        let (est, _) = t.velocity_estimates(1.0, &[[1.0]], [0.0], &[[2.0]]);
        assert!((est[0][0] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn position_update_basics() {
        let t = gauss_legendre(2).unwrap();
        let zero = vec![[0.0, 0.0]; 2];
        let (stages, next) = t.position_update(0.1, [1.0, 2.0], &zero);
        assert_eq!(next, [1.0, 2.0]);
        assert_eq!(stages[0], [1.0, 2.0]);

        let v = vec![[1.0, 0.0]; 2];
        let (stages, next) = t.position_update(0.1, [0.0, 0.0], &v);
        assert!((next[0] - 0.1).abs() < 1e-15);
        assert!((stages[0][0] - 0.1 * t.c[0]).abs() < 1e-14);
        assert!((stages[1][0] - 0.1 * t.c[1]).abs() < 1e-14);
        assert_eq!(next[1], 0.0);
    }

    #[test]
    fn linear_ode_order() {
        // Observed order on q' = -q over T = 1 should approach 2s.
        for s in 1..=3 {
            let t = gauss_legendre(s).unwrap();
            let exact = (-1.0f64).exp();
            let err = |n: usize| -> f64 {
                let dt = 1.0 / n as f64;
                let mut q = 1.0;
                for _ in 0..n {
                    q = linear_ode_step(&t, -1.0, dt, q);
                }
                (q - exact).abs()
            };
            let (e1, e2) = (err(2), err(4));
            let slope = (e1 / e2).log2();
            assert!(
                slope >= 2.0 * s as f64 - 0.2,
                "s={s}: slope {slope} too low ({e1:e} vs {e2:e})"
            );
        }
    }
}
