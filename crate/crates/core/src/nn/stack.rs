//! Convolutional encoder/decoder stacks.
//!
//! Signals travel as `channels x length` arrays; the public boundaries of
//! [`Encoder`] and [`Decoder`] use `length x channels` to match the rest of
//! the crate (one row per frame or state).

use ndarray::{s, Array2, ArrayView2, Axis, Ix2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::conv::{Conv1dLayer, Init};
use super::params::{Gradients, ParamId, ParameterStore};
use super::vae::{VaeHead, LOGVAR_MAX, LOGVAR_MIN};
use crate::error::{AlignError, Result};
use crate::lattice::StateSequence;

/// Convolutions with a ReLU after every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack {
    pub layers: Vec<Conv1dLayer>,
}

/// Activations kept from a forward pass: the input of every layer, then the
/// final output.
#[derive(Debug, Clone)]
pub struct StackCache {
    activations: Vec<Array2<f64>>,
}

impl StackCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds the input")
    }
}

impl ConvStack {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        c_in: usize,
        hidden: usize,
        layers: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..layers)
            .map(|i| {
                let c = if i == 0 { c_in } else { hidden };
                Conv1dLayer::new(store, &format!("{name}.conv{i}"), c, hidden, kernel, Init::He, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, store: &ParameterStore, input: Array2<f64>) -> Result<StackCache> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        for layer in &self.layers {
            let mut out = layer.forward(store, activations.last().unwrap().view())?;
            out.mapv_inplace(|v| v.max(0.0));
            activations.push(out);
        }
        Ok(StackCache { activations })
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        cache: &StackCache,
        grad_out: Array2<f64>,
        grads: &mut Gradients,
    ) -> Result<Array2<f64>> {
        let mut grad = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.activations[i + 1];
            ndarray::Zip::from(&mut grad).and(out).for_each(|g, &o| {
                if o <= 0.0 {
                    *g = 0.0;
                }
            });
            grad = layer.backward(store, cache.activations[i].view(), grad.view(), grads)?;
        }
        Ok(grad)
    }
}

/// Convolution stack followed by a 1x1 projection to `(mu, logvar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub stack: ConvStack,
    pub proj: Conv1dLayer,
    pub embed_dim: usize,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    stack: StackCache,
    /// Unclamped log-variance, `E x M`.
    raw_logvar: Array2<f64>,
}

impl Encoder {
    /// The mean half of the projection gets small random weights and the
    /// log-variance half starts at zero.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        c_in: usize,
        hidden: usize,
        layers: usize,
        kernel: usize,
        embed_dim: usize,
        rng: &mut R,
    ) -> Self {
        let stack = ConvStack::new(store, name, c_in, hidden, layers, kernel, rng);
        let c_proj = if layers == 0 { c_in } else { hidden };
        let proj = Conv1dLayer::new(store, &format!("{name}.proj"), c_proj, 2 * embed_dim, 1, Init::FanIn, rng);
        let mut w = store.value_mut(proj.weight);
        w.slice_mut(s![embed_dim.., .., ..]).fill(0.0);
        Self {
            stack,
            proj,
            embed_dim,
        }
    }

    /// `input` is `C x M`; returns `M x E` statistics.
    pub fn forward(&self, store: &ParameterStore, input: Array2<f64>) -> Result<(VaeHead, EncoderCache)> {
        let stack = self.stack.forward(store, input)?;
        let stats = self.proj.forward(store, stack.output().view())?;
        let e = self.embed_dim;
        let mu = stats.slice(s![..e, ..]).t().to_owned();
        let raw_logvar = stats.slice(s![e.., ..]).to_owned();
        let logvar = raw_logvar.mapv(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX)).t().to_owned();
        Ok((VaeHead { mu, logvar }, EncoderCache { stack, raw_logvar }))
    }

    /// Takes `M x E` gradients on `(mu, logvar)`; returns the `C x M` input gradient.
    pub fn backward(
        &self,
        store: &ParameterStore,
        cache: &EncoderCache,
        grad_mu: &Array2<f64>,
        grad_logvar: &Array2<f64>,
        grads: &mut Gradients,
    ) -> Result<Array2<f64>> {
        let e = self.embed_dim;
        let len = cache.raw_logvar.ncols();
        if grad_mu.dim() != (len, e) || grad_logvar.dim() != (len, e) {
            return Err(AlignError::dims(format!(
                "encoder gradients {:?}/{:?}, expected {:?}",
                grad_mu.dim(),
                grad_logvar.dim(),
                (len, e)
            )));
        }
        let mut grad_stats = Array2::zeros((2 * e, len));
        grad_stats.slice_mut(s![..e, ..]).assign(&grad_mu.t());
        let mut glv = grad_stats.slice_mut(s![e.., ..]);
        glv.assign(&grad_logvar.t());
        ndarray::Zip::from(&mut glv).and(&cache.raw_logvar).for_each(|g, &raw| {
            if !(LOGVAR_MIN..=LOGVAR_MAX).contains(&raw) {
                *g = 0.0;
            }
        });
        let grad_hidden = self
            .proj
            .backward(store, cache.stack.output().view(), grad_stats.view(), grads)?;
        self.stack.backward(store, &cache.stack, grad_hidden, grads)
    }
}

/// Convolution stack followed by a linear 1x1 output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub stack: ConvStack,
    pub out: Conv1dLayer,
}

#[derive(Debug, Clone)]
pub struct DecoderCache {
    stack: StackCache,
}

impl Decoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        c_in: usize,
        hidden: usize,
        layers: usize,
        kernel: usize,
        c_out: usize,
        rng: &mut R,
    ) -> Self {
        let stack = ConvStack::new(store, name, c_in, hidden, layers, kernel, rng);
        let c_proj = if layers == 0 { c_in } else { hidden };
        let out = Conv1dLayer::new(store, &format!("{name}.out"), c_proj, c_out, 1, Init::Zeros, rng);
        Self { stack, out }
    }

    /// `z` is `M x E`; returns `M x C_out`.
    pub fn forward(&self, store: &ParameterStore, z: &Array2<f64>) -> Result<(Array2<f64>, DecoderCache)> {
        let stack = self.stack.forward(store, z.t().to_owned())?;
        let out = self.out.forward(store, stack.output().view())?;
        Ok((out.t().to_owned(), DecoderCache { stack }))
    }

    /// Takes an `M x C_out` output gradient; returns the `M x E` gradient on `z`.
    pub fn backward(
        &self,
        store: &ParameterStore,
        cache: &DecoderCache,
        grad_out: &Array2<f64>,
        grads: &mut Gradients,
    ) -> Result<Array2<f64>> {
        let g = grad_out.t().to_owned();
        let grad_hidden = self.out.backward(store, cache.stack.output().view(), g.view(), grads)?;
        let grad_in = self.stack.backward(store, &cache.stack, grad_hidden, grads)?;
        Ok(grad_in.t().to_owned())
    }
}

/// Phoneme and state embedding tables whose rows are summed per state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticInputTable {
    pub phonemes: ParamId,
    pub states: ParamId,
    pub vocab_size: usize,
    pub states_per_phoneme: usize,
    pub dim: usize,
}

impl LinguisticInputTable {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        vocab_size: usize,
        states_per_phoneme: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let ph = Array2::from_shape_simple_fn((vocab_size, dim), || rng.sample::<f64, _>(StandardNormal));
        let st = Array2::from_shape_simple_fn((states_per_phoneme, dim), || {
            rng.sample::<f64, _>(StandardNormal)
        });
        Self {
            phonemes: store.add(format!("{name}.phoneme_table"), ph),
            states: store.add(format!("{name}.state_table"), st),
            vocab_size,
            states_per_phoneme,
            dim,
        }
    }

    fn tables<'a>(&self, store: &'a ParameterStore) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>) {
        let ph = store.value(self.phonemes).into_dimensionality::<Ix2>().expect("2-d table");
        let st = store.value(self.states).into_dimensionality::<Ix2>().expect("2-d table");
        (ph, st)
    }

    fn check(&self, states: &StateSequence) -> Result<()> {
        for e in states.entries() {
            if e.phoneme >= self.vocab_size {
                return Err(AlignError::PhonemeIdOutOfRange {
                    id: e.phoneme,
                    size: self.vocab_size,
                });
            }
            if e.state >= self.states_per_phoneme {
                return Err(AlignError::dims(format!(
                    "state index {} with {} states per phoneme",
                    e.state, self.states_per_phoneme
                )));
            }
        }
        Ok(())
    }

    /// `dim x K` encoder input.
    pub fn forward(&self, store: &ParameterStore, states: &StateSequence) -> Result<Array2<f64>> {
        self.check(states)?;
        let (ph, st) = self.tables(store);
        let mut out = Array2::zeros((self.dim, states.len()));
        for (mut col, e) in out.axis_iter_mut(Axis(1)).zip(states.entries()) {
            col.assign(&(&ph.row(e.phoneme) + &st.row(e.state)));
        }
        Ok(out)
    }

    pub fn backward(&self, states: &StateSequence, grad: &Array2<f64>, grads: &mut Gradients) {
        {
            let mut gp = grads.get_mut(self.phonemes).into_dimensionality::<Ix2>().expect("2-d");
            for (col, e) in grad.axis_iter(Axis(1)).zip(states.entries()) {
                let mut row = gp.row_mut(e.phoneme);
                row += &col;
            }
        }
        let mut gs = grads.get_mut(self.states).into_dimensionality::<Ix2>().expect("2-d");
        for (col, e) in grad.axis_iter(Axis(1)).zip(states.entries()) {
            let mut row = gs.row_mut(e.state);
            row += &col;
        }
    }
}
