use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis, Zip};

use super::{NetworkLayout, NetworkParams};

/// Preallocated buffers for evaluating the network over a whole particle set
/// at once: values, input-tangents (the spatial Jacobian of every output),
/// and the adjoint pass that turns output/Jacobian adjoints into parameter
/// gradients.
///
/// Forward tangents follow the layer recursion `Żˡ = Wˡ Tˡ⁻¹`,
/// `Tˡ = (1 − aˡ∘aˡ) ∘ Żˡ`; the backward pass is its exact adjoint, so
/// gradients of losses that depend on both outputs and input-derivatives are
/// exact. Verified against the nested tape route in the physics tests.
pub struct NetWorkspace {
    n: usize,
    d: usize,
    inv_scale: f64,
    a: Vec<Array2<f64>>,
    t: Vec<Vec<Array2<f64>>>,
    zdot: Vec<Vec<Array2<f64>>>,
    abar: Vec<Array2<f64>>,
    tbar: Vec<Vec<Array2<f64>>>,
    zbar: Vec<Array2<f64>>,
    zdotbar: Vec<Vec<Array2<f64>>>,
    s_tmp: Vec<Array2<f64>>,
    s_sum: Vec<Array2<f64>>,
}

impl NetWorkspace {
    /// `input_scale` divides physical coordinates before they enter the
    /// network; returned tangents are with respect to the physical
    /// coordinates.
    pub fn new(layout: &NetworkLayout, n: usize, input_scale: f64) -> Self {
        let d = layout.input_width();
        let sizes = &layout.sizes;
        let levels = sizes.len();
        let inv_scale = 1.0 / input_scale;

        let a: Vec<Array2<f64>> = sizes.iter().map(|&w| Array2::zeros((w, n))).collect();
        let mut t: Vec<Vec<Array2<f64>>> = sizes
            .iter()
            .map(|&w| (0..d).map(|_| Array2::zeros((w, n))).collect())
            .collect();
        for (k, plane) in t[0].iter_mut().enumerate() {
            plane.row_mut(k).fill(inv_scale);
        }
        let zdot: Vec<Vec<Array2<f64>>> = sizes[1..]
            .iter()
            .map(|&w| (0..d).map(|_| Array2::zeros((w, n))).collect())
            .collect();
        let abar = a.clone();
        let tbar: Vec<Vec<Array2<f64>>> = sizes
            .iter()
            .map(|&w| (0..d).map(|_| Array2::zeros((w, n))).collect())
            .collect();
        let zbar: Vec<Array2<f64>> = sizes[1..].iter().map(|&w| Array2::zeros((w, n))).collect();
        let zdotbar = zdot.clone();
        let s_tmp: Vec<Array2<f64>> = sizes[1..].iter().map(|&w| Array2::zeros((w, n))).collect();
        let s_sum = s_tmp.clone();

        let _ = levels;
        NetWorkspace {
            n,
            d,
            inv_scale,
            a,
            t,
            zdot,
            abar,
            tbar,
            zbar,
            zdotbar,
            s_tmp,
            s_sum,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    /// Values and spatial tangents for every column of `x` (`d × n`).
    pub fn forward(&mut self, params: &NetworkParams, x: ArrayView2<'_, f64>) {
        assert_eq!(x.dim(), (self.d, self.n));
        let levels = self.a.len();
        Zip::from(&mut self.a[0])
            .and(&x)
            .for_each(|a, &v| *a = v * self.inv_scale);

        for li in 0..levels - 1 {
            let (lower, upper) = self.a.split_at_mut(li + 1);
            let a_prev = &lower[li];
            let a_next = &mut upper[0];
            let layer = &params.layers[li];
            general_mat_mul(1.0, &layer.w, a_prev, 0.0, a_next);
            for (mut row, &b) in a_next.outer_iter_mut().zip(layer.b.iter()) {
                row.mapv_inplace(|z| z + b);
            }
            for k in 0..self.d {
                general_mat_mul(1.0, &layer.w, &self.t[li][k], 0.0, &mut self.zdot[li][k]);
            }
            let hidden = li < levels - 2;
            if hidden {
                a_next.mapv_inplace(f64::tanh);
                for k in 0..self.d {
                    Zip::from(&mut self.t[li + 1][k])
                        .and(&self.zdot[li][k])
                        .and(&*a_next)
                        .for_each(|t, &zd, &a| *t = (1.0 - a * a) * zd);
                }
            } else {
                for k in 0..self.d {
                    self.t[li + 1][k].assign(&self.zdot[li][k]);
                }
            }
        }
    }

    /// Network outputs of the last forward pass (`n_out × n`).
    pub fn outputs(&self) -> ArrayView2<'_, f64> {
        self.a.last().unwrap().view()
    }

    /// `∂(outputs)/∂x_k` of the last forward pass (`n_out × n`).
    pub fn output_tangent(&self, k: usize) -> ArrayView2<'_, f64> {
        self.t.last().unwrap()[k].view()
    }

    /// Adjoint pass: given `∂L/∂(outputs)` and `∂L/∂(tangent_k)`, accumulates
    /// `∂L/∂(params)` into `grad` (flat, [`NetworkParams::to_flat`] order).
    /// Must follow a matching [`Self::forward`].
    pub fn backward(
        &mut self,
        params: &NetworkParams,
        ybar: ArrayView2<'_, f64>,
        jbar: &[ArrayView2<'_, f64>],
        grad: &mut [f64],
    ) {
        let levels = self.a.len();
        let n_layers = levels - 1;
        assert_eq!(jbar.len(), self.d);
        assert_eq!(grad.len(), params.param_count());

        self.abar[n_layers].assign(&ybar);
        for k in 0..self.d {
            self.tbar[n_layers][k].assign(&jbar[k]);
        }

        let mut offset = params.param_count();
        for li in (0..n_layers).rev() {
            let layer = &params.layers[li];
            let (n_out, n_in) = layer.w.dim();
            offset -= n_out * n_in + n_out;
            let (w_slice, b_slice) = grad[offset..offset + n_out * n_in + n_out]
                .split_at_mut(n_out * n_in);

            let output_layer = li == n_layers - 1;
            if output_layer {
                self.zbar[li].assign(&self.abar[li + 1]);
                for k in 0..self.d {
                    self.zdotbar[li][k].assign(&self.tbar[li + 1][k]);
                }
            } else {
                // a = tanh(z), s = 1 − a², T = s ∘ Ż:
                //   Ż̄  = s ∘ T̄
                //   s̄  = Σ_k T̄_k ∘ Ż_k
                //   z̄  = s ∘ (ā − 2 a ∘ s̄)
                let a = &self.a[li + 1];
                Zip::from(&mut self.s_tmp[li])
                    .and(a)
                    .for_each(|s, &av| *s = 1.0 - av * av);
                self.s_sum[li].fill(0.0);
                for k in 0..self.d {
                    Zip::from(&mut self.zdotbar[li][k])
                        .and(&self.s_tmp[li])
                        .and(&self.tbar[li + 1][k])
                        .for_each(|zd, &s, &tb| *zd = s * tb);
                    Zip::from(&mut self.s_sum[li])
                        .and(&self.tbar[li + 1][k])
                        .and(&self.zdot[li][k])
                        .for_each(|acc, &tb, &zd| *acc += tb * zd);
                }
                Zip::from(&mut self.zbar[li])
                    .and(&self.s_tmp[li])
                    .and(&self.abar[li + 1])
                    .and(a)
                    .and(&self.s_sum[li])
                    .for_each(|z, &s, &ab, &av, &ss| *z = s * (ab - 2.0 * av * ss));
            }

            let mut wbar = ArrayViewMut2::from_shape((n_out, n_in), w_slice).unwrap();
            general_mat_mul(1.0, &self.zbar[li], &self.a[li].t(), 1.0, &mut wbar);
            for k in 0..self.d {
                general_mat_mul(1.0, &self.zdotbar[li][k], &self.t[li][k].t(), 1.0, &mut wbar);
            }
            let bsum = self.zbar[li].sum_axis(Axis(1));
            for (dst, &src) in b_slice.iter_mut().zip(bsum.iter()) {
                *dst += src;
            }

            if li > 0 {
                general_mat_mul(1.0, &layer.w.t(), &self.zbar[li], 0.0, &mut self.abar[li]);
                for k in 0..self.d {
                    general_mat_mul(
                        1.0,
                        &layer.w.t(),
                        &self.zdotbar[li][k],
                        0.0,
                        &mut self.tbar[li][k],
                    );
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Dual, Dual1};
    use crate::network::{NetworkLayout, NetworkParams};

    fn finite_diff_grad(params: &NetworkParams, loss: impl Fn(&NetworkParams) -> f64) -> Vec<f64> {
        let flat = params.to_flat();
        let mut g = vec![0.0; flat.len()];
        let mut work = params.clone();
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += h;
            work.assign_flat(&plus);
            let fp = loss(&work);
            let mut minus = flat.clone();
            minus[i] -= h;
            work.assign_flat(&minus);
            let fm = loss(&work);
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }

    #[test]
    fn batched_forward_matches_plain_and_jvp() {
        let layout = NetworkLayout::new(vec![2, 7, 5]).unwrap();
        let params = NetworkParams::init(&layout, 3);
        let xs = [[0.2, -0.4], [0.0, 0.9], [-1.1, 0.3]];
        let mut ws = NetWorkspace::new(&layout, xs.len(), 1.0);
        let mut xmat = Array2::zeros((2, xs.len()));
        for (c, x) in xs.iter().enumerate() {
            xmat[[0, c]] = x[0];
            xmat[[1, c]] = x[1];
        }
        ws.forward(&params, xmat.view());

        let lifted = params.lift(Dual1::<f64>::lift);
        for (c, x) in xs.iter().enumerate() {
            let plain = params.forward(x).unwrap();
            for (j, &v) in plain.iter().enumerate() {
                assert!((ws.outputs()[[j, c]] - v).abs() < 1e-13);
            }
            for k in 0..2 {
                let inputs = [
                    Dual::new(x[0], [if k == 0 { 1.0 } else { 0.0 }]),
                    Dual::new(x[1], [if k == 1 { 1.0 } else { 0.0 }]),
                ];
                let out = lifted.forward(&inputs);
                for (j, o) in out.iter().enumerate() {
                    assert!(
                        (ws.output_tangent(k)[[j, c]] - o.dx[0]).abs() < 1e-12,
                        "tangent mismatch at output {j} col {c} dir {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Loss mixing outputs and input-tangents:
        //   L = Σ_p Σ_j y_j(x_p)² + (∂y_j/∂x₀)·(∂y_j/∂x₁)
        let layout = NetworkLayout::new(vec![2, 6, 4]).unwrap();
        let params = NetworkParams::init(&layout, 9);
        let xs = [[0.25, -0.5], [0.8, 0.1]];
        let scale = 2.0;

        let eval = |p: &NetworkParams| -> (f64, Vec<f64>) {
            let mut ws = NetWorkspace::new(&layout, xs.len(), scale);
            let mut xmat = Array2::zeros((2, xs.len()));
            for (c, x) in xs.iter().enumerate() {
                xmat[[0, c]] = x[0];
                xmat[[1, c]] = x[1];
            }
            ws.forward(p, xmat.view());
            let y = ws.outputs().to_owned();
            let j0 = ws.output_tangent(0).to_owned();
            let j1 = ws.output_tangent(1).to_owned();
            let loss = (&y * &y).sum() + (&j0 * &j1).sum();

            let ybar = 2.0 * &y;
            let j0bar = j1.clone();
            let j1bar = j0.clone();
            let mut grad = vec![0.0; p.param_count()];
            ws.backward(p, ybar.view(), &[j0bar.view(), j1bar.view()], &mut grad);
            (loss, grad)
        };

        let (_, grad) = eval(&params);
        let fd = finite_diff_grad(&params, |p| eval(p).0);
        for (i, (&g, &f)) in grad.iter().zip(&fd).enumerate() {
            let denom = f.abs().max(1e-6);
            assert!(
                ((g - f) / denom).abs() < 1e-5,
                "param {i}: analytic {g} vs fd {f}"
            );
        }
    }

    #[test]
    fn input_scale_rescales_tangents() {
        let layout = NetworkLayout::new(vec![1, 3, 2]).unwrap();
        let params = NetworkParams::init(&layout, 1);
        let x = Array2::from_shape_vec((1, 1), vec![0.4]).unwrap();

        let mut ws1 = NetWorkspace::new(&layout, 1, 1.0);
        let mut ws2 = NetWorkspace::new(&layout, 1, 4.0);
        ws1.forward(&params, x.view());
        let x_scaled = Array2::from_shape_vec((1, 1), vec![0.4 * 4.0]).unwrap();
        ws2.forward(&params, x_scaled.view());
        for j in 0..2 {
            assert!((ws1.outputs()[[j, 0]] - ws2.outputs()[[j, 0]]).abs() < 1e-14);
            assert!(
                (ws1.output_tangent(0)[[j, 0]] - 4.0 * ws2.output_tangent(0)[[j, 0]]).abs()
                    < 1e-13
            );
        }
    }
}
