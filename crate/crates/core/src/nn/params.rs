use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD, Dimension};

use crate::error::{AlignError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor together with its Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: ArrayD<f64>,
    pub m: ArrayD<f64>,
    pub v: ArrayD<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Ordered collection of named parameters plus the optimizer step counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: Vec<Param>,
    step: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<D: Dimension>(&mut self, name: impl Into<String>, value: ndarray::Array<f64, D>) -> ParamId {
        let value = value.into_dyn();
        let zeros = ArrayD::zeros(value.raw_dim());
        self.params.push(Param {
            name: name.into(),
            m: zeros.clone(),
            v: zeros,
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn value(&self, id: ParamId) -> ArrayViewD<'_, f64> {
        self.params[id.0].value.view()
    }

    pub fn value_mut(&mut self, id: ParamId) -> ArrayViewMutD<'_, f64> {
        self.params[id.0].value.view_mut()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Appends a parameter with existing optimizer moments.
    pub fn push(&mut self, param: Param) -> Result<ParamId> {
        if param.m.shape() != param.value.shape() || param.v.shape() != param.value.shape() {
            return Err(AlignError::dims(format!("moment shapes differ for {}", param.name)));
        }
        self.params.push(param);
        Ok(ParamId(self.params.len() - 1))
    }

    /// Overwrites `target`'s values, moments and step with ours. Both stores
    /// must hold the same names and shapes in the same order.
    pub fn copy_into(&self, target: &mut ParameterStore) -> Result<()> {
        if self.params.len() != target.params.len() {
            return Err(AlignError::dims(format!(
                "{} parameters vs {} expected",
                self.params.len(),
                target.params.len()
            )));
        }
        for (src, dst) in self.params.iter().zip(&target.params) {
            if src.name != dst.name || src.value.shape() != dst.value.shape() {
                return Err(AlignError::dims(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    src.name,
                    src.value.shape(),
                    dst.name,
                    dst.value.shape()
                )));
            }
        }
        target.params.clone_from(&self.params);
        target.step = self.step;
        Ok(())
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            grads: self
                .params
                .iter()
                .map(|p| ArrayD::zeros(p.value.raw_dim()))
                .collect(),
        }
    }

    /// One bias-corrected Adam update. Fails without touching any parameter
    /// if a gradient is non-finite.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
        if grads.grads.len() != self.params.len() {
            return Err(AlignError::dims(format!(
                "{} gradients for {} parameters",
                grads.grads.len(),
                self.params.len()
            )));
        }
        for (p, g) in self.params.iter().zip(&grads.grads) {
            if p.value.shape() != g.shape() {
                return Err(AlignError::dims(format!(
                    "gradient shape {:?} for parameter {} of shape {:?}",
                    g.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(AlignError::Diverged(format!(
                    "non-finite gradient for {} at optimizer step {}",
                    p.name,
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (p, g) in self.params.iter_mut().zip(&grads.grads) {
            ndarray::Zip::from(&mut p.value)
                .and(&mut p.m)
                .and(&mut p.v)
                .and(g)
                .for_each(|w, m, v, &g| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                });
        }
        Ok(())
    }
}

/// Gradient buffers aligned with a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<ArrayD<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> ArrayViewD<'_, f64> {
        self.grads[id.0].view()
    }

    pub fn get_mut(&mut self, id: ParamId) -> ArrayViewMutD<'_, f64> {
        self.grads[id.0].view_mut()
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ArrayD<f64>> {
        self.grads.iter()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|g| g.iter().copied()).collect()
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array1};

    #[test]
    fn zero_gradient_leaves_params() {
        let mut store = ParameterStore::new();
        let id = store.add("w", arr1(&[1.5, -2.0]));
        let grads = store.zero_grads();
        store.adam_step(&grads, &AdamConfig::with_lr(0.1)).unwrap();
        assert_eq!(store.value(id).as_slice().unwrap(), &[1.5, -2.0]);
        assert_eq!(store.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let lr = 1e-3;
        let mut store = ParameterStore::new();
        let id = store.add("w", Array1::zeros(1));
        let mut grads = store.zero_grads();
        grads.get_mut(id)[[0]] = 1.0;
        store.adam_step(&grads, &AdamConfig::with_lr(lr)).unwrap();
        // m_hat = 1, v_hat = 1 -> w = -lr / (1 + eps)
        let want = -lr / (1.0 + 1e-8);
        assert!((store.value(id)[[0]] - want).abs() < 1e-18);
    }

    #[test]
    fn identical_pairs_update_identically() {
        let mut store = ParameterStore::new();
        let a = store.add("a", arr1(&[0.3, 0.7]));
        let b = store.add("b", arr1(&[0.3, 0.7]));
        for i in 0..5 {
            let mut g = store.zero_grads();
            g.get_mut(a).assign(&arr1(&[0.1 * i as f64, -1.0]).into_dyn());
            g.get_mut(b).assign(&arr1(&[0.1 * i as f64, -1.0]).into_dyn());
            store.adam_step(&g, &AdamConfig::with_lr(0.01)).unwrap();
        }
        assert_eq!(store.value(a), store.value(b));
    }

    #[test]
    fn nan_gradient_is_divergence() {
        let mut store = ParameterStore::new();
        let id = store.add("w", Array1::zeros(2));
        let mut g = store.zero_grads();
        g.get_mut(id)[[1]] = f64::NAN;
        let err = store.adam_step(&g, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, AlignError::Diverged(_)));
        assert_eq!(store.step(), 0);
    }
}
