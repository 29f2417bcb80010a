//! Same-padded, stride-1 1-D convolution over `channels x length` signals.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis, Ix1, Ix3};
use rand::Rng;

use super::params::{Gradients, ParamId, ParameterStore};
use crate::error::{AlignError, Result};

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Array2<f64>,
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

fn check_shapes(weight: &ArrayView3<f64>, input: &ArrayView2<f64>) -> Result<()> {
    let (_, c_in, kernel) = weight.dim();
    if kernel % 2 == 0 {
        return Err(AlignError::InvalidParameter(format!(
            "kernel width must be odd, got {kernel}"
        )));
    }
    if input.nrows() != c_in {
        return Err(AlignError::dims(format!(
            "conv expects {c_in} input channels, got {}",
            input.nrows()
        )));
    }
    Ok(())
}

/// Output column range and matching input offset for tap `j`.
fn tap_span(j: usize, pad: usize, len: usize) -> Option<(usize, usize, isize)> {
    let offset = j as isize - pad as isize;
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset).min(len as isize);
    if hi <= lo as isize {
        return None;
    }
    Some((lo, hi as usize, offset))
}

pub fn conv1d_forward(
    weight: ArrayView3<f64>,
    bias: ArrayView1<f64>,
    input: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    check_shapes(&weight, &input)?;
    let (c_out, _, kernel) = weight.dim();
    if bias.len() != c_out {
        return Err(AlignError::dims(format!("bias length {} != {c_out}", bias.len())));
    }
    let len = input.ncols();
    let pad = kernel / 2;
    let mut out = Array2::zeros((c_out, len));
    for (o, mut row) in out.outer_iter_mut().enumerate() {
        row.fill(bias[o]);
    }
    for j in 0..kernel {
        let Some((lo, hi, off)) = tap_span(j, pad, len) else {
            continue;
        };
        let w_j = weight.slice(s![.., .., j]).to_owned();
        let src = input.slice(s![.., (lo as isize + off) as usize..(hi as isize + off) as usize]);
        let mut dst = out.slice_mut(s![.., lo..hi]);
        general_mat_mul(1.0, &w_j, &src, 1.0, &mut dst);
    }
    Ok(out)
}

pub fn conv1d_backward(
    weight: ArrayView3<f64>,
    input: ArrayView2<f64>,
    grad_out: ArrayView2<f64>,
) -> Result<ConvGrads> {
    check_shapes(&weight, &input)?;
    let (c_out, c_in, kernel) = weight.dim();
    let len = input.ncols();
    if grad_out.dim() != (c_out, len) {
        return Err(AlignError::dims(format!(
            "conv grad_out {:?}, expected {:?}",
            grad_out.dim(),
            (c_out, len)
        )));
    }
    let pad = kernel / 2;
    let mut g_in = Array2::zeros((c_in, len));
    let mut g_w = Array3::zeros((c_out, c_in, kernel));
    for j in 0..kernel {
        let Some((lo, hi, off)) = tap_span(j, pad, len) else {
            continue;
        };
        let (src_lo, src_hi) = ((lo as isize + off) as usize, (hi as isize + off) as usize);
        let go = grad_out.slice(s![.., lo..hi]);
        let src = input.slice(s![.., src_lo..src_hi]);
        let mut gw_j = Array2::zeros((c_out, c_in));
        general_mat_mul(1.0, &go, &src.t(), 0.0, &mut gw_j);
        g_w.slice_mut(s![.., .., j]).assign(&gw_j);
        let w_j = weight.slice(s![.., .., j]);
        let mut gi = g_in.slice_mut(s![.., src_lo..src_hi]);
        general_mat_mul(1.0, &w_j.t(), &go, 1.0, &mut gi);
    }
    let g_b = grad_out.sum_axis(Axis(1));
    Ok(ConvGrads {
        input: g_in,
        weight: g_w,
        bias: g_b,
    })
}

/// Convolution layer whose weights live in a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
}

/// How a fresh layer's weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform with variance `2 / fan_in`.
    He,
    /// Uniform with variance `1 / fan_in`.
    FanIn,
    Zeros,
}

impl Conv1dLayer {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let fan_in = (c_in * kernel) as f64;
        let bound = match init {
            Init::He => (6.0 / fan_in).sqrt(),
            Init::FanIn => (3.0 / fan_in).sqrt(),
            Init::Zeros => 0.0,
        };
        let w = Array3::from_shape_fn((c_out, c_in, kernel), |_| {
            if bound > 0.0 {
                rng.gen_range(-bound..bound)
            } else {
                0.0
            }
        });
        let weight = store.add(format!("{name}.weight"), w);
        let bias = store.add(format!("{name}.bias"), Array1::<f64>::zeros(c_out));
        Self {
            weight,
            bias,
            c_in,
            c_out,
            kernel,
        }
    }

    fn weight_view<'a>(&self, store: &'a ParameterStore) -> ArrayView3<'a, f64> {
        store
            .value(self.weight)
            .into_dimensionality::<Ix3>()
            .expect("conv weight is 3-d")
    }

    pub fn forward(&self, store: &ParameterStore, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        let bias = store
            .value(self.bias)
            .into_dimensionality::<Ix1>()
            .expect("conv bias is 1-d");
        conv1d_forward(self.weight_view(store), bias, input)
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(
        &self,
        store: &ParameterStore,
        input: ArrayView2<f64>,
        grad_out: ArrayView2<f64>,
        grads: &mut Gradients,
    ) -> Result<Array2<f64>> {
        let g = conv1d_backward(self.weight_view(store), input, grad_out)?;
        let mut gw = grads.get_mut(self.weight);
        gw += &g.weight.into_dyn();
        let mut gb = grads.get_mut(self.bias);
        gb += &g.bias.into_dyn();
        Ok(g.input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, compare_gradients};
    use ndarray::{array, Array};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_kernel() {
        let w = array![[[0.0, 1.0, 0.0]]];
        let b = array![0.0];
        let x = array![[1.0, -2.0, 3.5, 0.25]];
        let y = conv1d_forward(w.view(), b.view(), x.view()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn length_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for len in 1..9 {
            for kernel in [1, 3, 5, 7] {
                let w = Array::from_shape_fn((2, 3, kernel), |_| rng.gen_range(-1.0..1.0));
                let x = Array::from_shape_fn((3, len), |_| rng.gen_range(-1.0..1.0));
                let y = conv1d_forward(w.view(), Array1::zeros(2).view(), x.view()).unwrap();
                assert_eq!(y.dim(), (2, len));
            }
        }
    }

    #[test]
    fn shifted_taps() {
        // left tap reads the previous frame, right tap the next one
        let x = array![[1.0, 2.0, 3.0]];
        let left = conv1d_forward(array![[[1.0, 0.0, 0.0]]].view(), array![0.0].view(), x.view()).unwrap();
        assert_eq!(left, array![[0.0, 1.0, 2.0]]);
        let right = conv1d_forward(array![[[0.0, 0.0, 1.0]]].view(), array![0.5].view(), x.view()).unwrap();
        assert_eq!(right, array![[2.5, 3.5, 0.5]]);
    }

    #[test]
    fn channel_mismatch() {
        let w = Array3::<f64>::zeros((2, 3, 3));
        let x = Array2::<f64>::zeros((4, 5));
        assert!(conv1d_forward(w.view(), Array1::zeros(2).view(), x.view()).is_err());
        assert!(conv1d_backward(w.view(), x.view(), Array2::zeros((2, 5)).view()).is_err());
        let even = Array3::<f64>::zeros((1, 1, 2));
        assert!(conv1d_forward(even.view(), Array1::zeros(1).view(), Array2::zeros((1, 3)).view()).is_err());
    }

    #[test]
    fn finite_difference_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let w = Array::from_shape_fn((2, 2, 3), |_| rng.gen_range(-1.0..1.0));
        let b = Array::from_shape_fn(2, |_| rng.gen_range(-1.0..1.0));
        let x = Array::from_shape_fn((2, 5), |_| rng.gen_range(-1.0..1.0));
        let proj = Array::from_shape_fn((2, 5), |_| rng.gen_range(-1.0..1.0));
        let loss = |w: &Array3<f64>, b: &Array1<f64>, x: &Array2<f64>| {
            (conv1d_forward(w.view(), b.view(), x.view()).unwrap() * &proj).sum()
        };
        let g = conv1d_backward(w.view(), x.view(), proj.view()).unwrap();

        let num_w = central_difference(w.as_slice().unwrap(), 1e-5, |v| {
            loss(&Array3::from_shape_vec(w.dim(), v.to_vec()).unwrap(), &b, &x)
        });
        assert!(compare_gradients(g.weight.as_slice().unwrap(), &num_w, 1e-4, 1e-6).passed);
        let num_b = central_difference(b.as_slice().unwrap(), 1e-5, |v| {
            loss(&w, &Array1::from_vec(v.to_vec()), &x)
        });
        assert!(compare_gradients(g.bias.as_slice().unwrap(), &num_b, 1e-4, 1e-6).passed);
        let num_x = central_difference(x.as_slice().unwrap(), 1e-5, |v| {
            loss(&w, &b, &Array2::from_shape_vec(x.dim(), v.to_vec()).unwrap())
        });
        assert!(compare_gradients(g.input.as_slice().unwrap(), &num_x, 1e-4, 1e-6).passed);
    }
}
