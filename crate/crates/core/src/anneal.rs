//! Gaussian annealing of the occupancy gradient along the state axis.

use ndarray::Array2;

use crate::dp::OccupancyMatrix;
use crate::error::{AlignError, Result};

/// Width schedule: `max(sigma_min, sigma0 * rate^floor(step / interval))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealingSchedule {
    pub sigma0: f64,
    pub rate: f64,
    pub interval: u64,
    pub sigma_min: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self {
            sigma0: 30.0,
            rate: 0.9,
            interval: 1000,
            sigma_min: 1e-3,
        }
    }
}

impl AnnealingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0) {
            return Err(AlignError::InvalidParameter("sigma0 must be > 0".into()));
        }
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(AlignError::InvalidParameter("anneal rate must be in (0, 1)".into()));
        }
        if self.interval == 0 {
            return Err(AlignError::InvalidParameter("anneal interval must be >= 1".into()));
        }
        if !(self.sigma_min > 0.0) {
            return Err(AlignError::InvalidParameter("sigma_min must be > 0".into()));
        }
        Ok(())
    }
}

pub fn schedule_sigma(step: u64, schedule: &AnnealingSchedule) -> f64 {
    let updates = step / schedule.interval;
    // rate^updates underflows to 0 long before the exponent overflows i32
    let decay = schedule.rate.powi(updates.min(i32::MAX as u64) as i32);
    (schedule.sigma0 * decay).max(schedule.sigma_min)
}

/// Unnormalized weights `exp(-j^2 / (2 sigma^2))` for `j = -radius..=radius`.
pub fn gaussian_weights_raw(sigma: f64, radius: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(AlignError::InvalidParameter(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let r = radius as i64;
    Ok((-r..=r)
        .map(|j| {
            let j = j as f64;
            (-(j * j) / (2.0 * sigma * sigma)).exp()
        })
        .collect())
}

/// Normalized Gaussian filter over offsets `-radius..=radius`.
pub fn gaussian_filter(sigma: f64, radius: usize) -> Result<Vec<f64>> {
    let mut w = gaussian_weights_raw(sigma, radius)?;
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Filter radius for `sigma` on a `states`-wide axis: `ceil(4 sigma)` clamped to `[1, K-1]`.
pub fn filter_radius(sigma: f64, states: usize) -> usize {
    let r = (4.0 * sigma).ceil().max(1.0) as usize;
    r.min(states.saturating_sub(1)).max(1)
}

/// Convolves each frame of `gamma` with a Gaussian along the state axis.
///
/// The signal is zero-padded at both ends. With `normalize` the filter
/// weights sum to one and every output row is rescaled to sum to one;
/// without it the raw filter is applied and rows are left as they are.
pub fn anneal_occupancy(gamma: &OccupancyMatrix, sigma: f64, normalize: bool) -> Result<OccupancyMatrix> {
    let g = gamma.gamma();
    let states = g.ncols();
    if states == 1 {
        gaussian_weights_raw(sigma, 1)?;
        return Ok(gamma.clone());
    }
    let radius = filter_radius(sigma, states);
    let weights = if normalize {
        gaussian_filter(sigma, radius)?
    } else {
        gaussian_weights_raw(sigma, radius)?
    };
    let mut out = Array2::zeros(g.dim());
    for (t, (src, mut dst)) in g.outer_iter().zip(out.outer_iter_mut()).enumerate() {
        for (k, &mass) in src.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let lo = k.saturating_sub(radius);
            let hi = (k + radius).min(states - 1);
            for j in lo..=hi {
                dst[j] += mass * weights[j + radius - k];
            }
        }
        if normalize {
            let total = dst.sum();
            if !(total > 0.0) {
                return Err(AlignError::InvalidParameter(format!(
                    "annealed occupancy row {t} sums to {total}"
                )));
            }
            dst.mapv_inplace(|v| v / total);
        }
    }
    Ok(OccupancyMatrix::from_array(out))
}
