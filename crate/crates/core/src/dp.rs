//! Dynamic programming over monotonic left-to-right no-skip paths.
//!
//! Every path starts in the first state at the first frame, ends in the last
//! state at the last frame, and advances by at most one state per frame.
//! All kernels run in the log domain in double precision. Internally `-inf`
//! is carried as [`NEG_SENTINEL`] so that differences of two impossible
//! scores never produce NaN; values handed back to callers use `-inf`.

pub mod oracle;

use ndarray::Array2;

use crate::error::{AlignError, Result};
use crate::lattice::LogLikelihoodLattice;

pub(crate) const NEG_SENTINEL: f64 = -1e30;
const SENTINEL_CUTOFF: f64 = -1e29;

#[inline]
fn to_internal(v: f64) -> f64 {
    v.max(NEG_SENTINEL)
}

#[inline]
fn to_external(v: f64) -> f64 {
    if v <= SENTINEL_CUTOFF {
        f64::NEG_INFINITY
    } else {
        v
    }
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo <= SENTINEL_CUTOFF {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Whether `(t, k)` (0-based) can lie on a feasible path of a `T x K` lattice.
#[inline]
pub fn in_band(t: usize, k: usize, frames: usize, states: usize) -> bool {
    k <= t && k + frames >= states + t
}

fn check_feasible(lattice: &LogLikelihoodLattice) -> Result<(usize, usize)> {
    let (frames, states) = (lattice.num_frames(), lattice.num_states());
    if frames < states {
        return Err(AlignError::NoFeasiblePath { frames, states });
    }
    Ok((frames, states))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardLattice {
    alpha: Array2<f64>,
    log_z: f64,
}

impl ForwardLattice {
    /// Log forward scores; `-inf` outside the feasible band.
    pub fn alpha(&self) -> &Array2<f64> {
        &self.alpha
    }

    /// Log total path score, `alpha(T, K)`.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }
}

/// Forward-sum loss `-log sum_paths prod_t b(t, s_t)` and the forward lattice.
pub fn forward_sum(lattice: &LogLikelihoodLattice) -> Result<(f64, ForwardLattice)> {
    let (frames, states) = check_feasible(lattice)?;
    let lb = lattice.values();
    let mut alpha = Array2::from_elem((frames, states), NEG_SENTINEL);
    alpha[[0, 0]] = to_internal(lb[[0, 0]]);
    for t in 1..frames {
        let lo = (states + t).saturating_sub(frames);
        let hi = t.min(states - 1);
        for k in lo..=hi {
            let stay = alpha[[t - 1, k]];
            let advance = if k > 0 { alpha[[t - 1, k - 1]] } else { NEG_SENTINEL };
            alpha[[t, k]] = to_internal(to_internal(lb[[t, k]]) + log_add(stay, advance));
        }
    }
    alpha.mapv_inplace(to_external);
    let log_z = alpha[[frames - 1, states - 1]];
    Ok((-log_z, ForwardLattice { alpha, log_z }))
}

/// Log backward scores; `beta(T, K) = 0` and `-inf` outside the feasible band.
pub fn backward(lattice: &LogLikelihoodLattice) -> Result<Array2<f64>> {
    let (frames, states) = check_feasible(lattice)?;
    let lb = lattice.values();
    let mut beta = Array2::from_elem((frames, states), NEG_SENTINEL);
    beta[[frames - 1, states - 1]] = 0.0;
    for t in (0..frames - 1).rev() {
        let lo = (states + t).saturating_sub(frames);
        let hi = t.min(states - 1);
        for k in lo..=hi {
            let stay = to_internal(to_internal(lb[[t + 1, k]]) + beta[[t + 1, k]]);
            let advance = if k + 1 < states {
                to_internal(to_internal(lb[[t + 1, k + 1]]) + beta[[t + 1, k + 1]])
            } else {
                NEG_SENTINEL
            };
            beta[[t, k]] = log_add(stay, advance);
        }
    }
    beta.mapv_inplace(to_external);
    Ok(beta)
}

/// Posterior probability `gamma(t, k)` that the path passes state `k` at frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMatrix {
    gamma: Array2<f64>,
}

impl OccupancyMatrix {
    pub fn from_array(gamma: Array2<f64>) -> Self {
        Self { gamma }
    }

    pub fn gamma(&self) -> &Array2<f64> {
        &self.gamma
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.gamma
    }

    pub fn num_frames(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn num_states(&self) -> usize {
        self.gamma.ncols()
    }
}

pub fn occupancy(fwd: &ForwardLattice, beta: &Array2<f64>) -> Result<OccupancyMatrix> {
    if fwd.alpha.dim() != beta.dim() {
        return Err(AlignError::dims(format!(
            "alpha {:?} vs beta {:?}",
            fwd.alpha.dim(),
            beta.dim()
        )));
    }
    let log_z = fwd.log_z;
    if !log_z.is_finite() {
        return Err(AlignError::ZeroProbabilityLattice);
    }
    let mut gamma = Array2::zeros(beta.dim());
    ndarray::Zip::from(&mut gamma)
        .and(&fwd.alpha)
        .and(beta)
        .for_each(|g, &a, &b| {
            if a.is_finite() && b.is_finite() {
                *g = (a + b - log_z).exp();
            }
        });
    Ok(OccupancyMatrix { gamma })
}

/// Forward, backward and occupancy in one call.
pub fn forward_backward(lattice: &LogLikelihoodLattice) -> Result<(f64, OccupancyMatrix)> {
    let (loss, fwd) = forward_sum(lattice)?;
    let beta = backward(lattice)?;
    Ok((loss, occupancy(&fwd, &beta)?))
}

/// A monotonic no-skip state sequence with its log score.
///
/// States are 0-based: the path starts at 0 and ends at `K - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    pub states: Vec<usize>,
    pub log_score: f64,
}

impl AlignmentPath {
    /// Checks the start, end and step invariants against `num_states`.
    pub fn is_valid(&self, num_states: usize) -> bool {
        !self.states.is_empty()
            && self.states[0] == 0
            && *self.states.last().unwrap() + 1 == num_states
            && self
                .states
                .windows(2)
                .all(|w| w[1] == w[0] || w[1] == w[0] + 1)
    }
}

/// Highest-scoring path. Ties prefer staying in the current state.
pub fn viterbi(lattice: &LogLikelihoodLattice) -> Result<AlignmentPath> {
    let (frames, states) = check_feasible(lattice)?;
    let lb = lattice.values();
    let mut delta = Array2::from_elem((frames, states), NEG_SENTINEL);
    // true where the best predecessor is k - 1
    let mut advanced = Array2::from_elem((frames, states), false);
    delta[[0, 0]] = to_internal(lb[[0, 0]]);
    for t in 1..frames {
        let lo = (states + t).saturating_sub(frames);
        let hi = t.min(states - 1);
        for k in lo..=hi {
            let stay = delta[[t - 1, k]];
            let advance = if k > 0 { delta[[t - 1, k - 1]] } else { NEG_SENTINEL };
            let (best, adv) = if advance > stay { (advance, true) } else { (stay, false) };
            delta[[t, k]] = to_internal(to_internal(lb[[t, k]]) + best);
            advanced[[t, k]] = adv;
        }
    }
    let mut path = vec![0; frames];
    let mut k = states - 1;
    for t in (0..frames).rev() {
        path[t] = k;
        if t > 0 && advanced[[t, k]] {
            k -= 1;
        }
    }
    Ok(AlignmentPath {
        states: path,
        log_score: to_external(delta[[frames - 1, states - 1]]),
    })
}
