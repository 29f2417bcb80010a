//! Exhaustive path-enumeration oracles for the DP kernels.
//!
//! These enumerate all `C(T-1, K-1)` monotonic no-skip paths and define the
//! reference semantics the fast kernels are tested against.

use ndarray::Array2;

use super::AlignmentPath;
use crate::error::{AlignError, Result};
use crate::lattice::{logsumexp, LogLikelihoodLattice};

pub const MAX_FRAMES: usize = 12;
pub const MAX_STATES: usize = 6;

fn guard(lattice: &LogLikelihoodLattice) -> Result<(usize, usize)> {
    let (frames, states) = (lattice.num_frames(), lattice.num_states());
    if frames > MAX_FRAMES || states > MAX_STATES {
        return Err(AlignError::OracleTooLarge { frames, states });
    }
    if frames < states {
        return Err(AlignError::NoFeasiblePath { frames, states });
    }
    Ok((frames, states))
}

/// All monotonic no-skip paths of a `frames x states` lattice, 0-based.
pub fn enumerate_paths(frames: usize, states: usize) -> Vec<Vec<usize>> {
    fn extend(path: &mut Vec<usize>, frames: usize, states: usize, out: &mut Vec<Vec<usize>>) {
        let t = path.len();
        if t == frames {
            if *path.last().unwrap() + 1 == states {
                out.push(path.clone());
            }
            return;
        }
        let cur = *path.last().unwrap();
        for next in [cur, cur + 1] {
            // remaining frames after this one must still reach the last state
            if next < states && next + (frames - t) >= states {
                path.push(next);
                extend(path, frames, states, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if frames == 0 || states == 0 || frames < states {
        return out;
    }
    let mut path = vec![0];
    extend(&mut path, frames, states, &mut out);
    out
}

fn path_score(lattice: &LogLikelihoodLattice, path: &[usize]) -> f64 {
    let mut score = 0.0;
    for (t, &k) in path.iter().enumerate() {
        if t == 0 {
            score = lattice.get(0, k);
        } else {
            score += lattice.get(t, k);
        }
    }
    score
}

pub fn brute_force_logsum(lattice: &LogLikelihoodLattice) -> Result<f64> {
    let (frames, states) = guard(lattice)?;
    Ok(logsumexp(
        enumerate_paths(frames, states)
            .iter()
            .map(|p| path_score(lattice, p)),
    ))
}

pub fn brute_force_occupancy(lattice: &LogLikelihoodLattice) -> Result<Array2<f64>> {
    let (frames, states) = guard(lattice)?;
    let paths = enumerate_paths(frames, states);
    let scores: Vec<f64> = paths.iter().map(|p| path_score(lattice, p)).collect();
    let log_z = logsumexp(scores.iter().copied());
    if !log_z.is_finite() {
        return Err(AlignError::ZeroProbabilityLattice);
    }
    let mut gamma = Array2::zeros((frames, states));
    for (path, score) in paths.iter().zip(&scores) {
        let w = (score - log_z).exp();
        for (t, &k) in path.iter().enumerate() {
            gamma[[t, k]] += w;
        }
    }
    Ok(gamma)
}

/// Exhaustive argmax. Among equal scores the path that stays longest in the
/// later states wins (compared from the last frame backwards), which is what
/// a stay-preferring backtrace yields.
pub fn brute_force_best_path(lattice: &LogLikelihoodLattice) -> Result<AlignmentPath> {
    let (frames, states) = guard(lattice)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for path in enumerate_paths(frames, states) {
        let score = path_score(lattice, &path);
        let better = match &best {
            None => true,
            Some((b, bp)) => score > *b || (score == *b && path.iter().rev().gt(bp.iter().rev())),
        };
        if better {
            best = Some((score, path));
        }
    }
    let (log_score, states) = best.expect("at least one feasible path");
    Ok(AlignmentPath { states, log_score })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn path_counts() {
        assert_eq!(enumerate_paths(5, 3).len(), 6);
        assert_eq!(enumerate_paths(2, 2), vec![vec![0, 1]]);
        for t in 1..=MAX_FRAMES {
            for k in 1..=t.min(MAX_STATES) {
                assert_eq!(enumerate_paths(t, k).len(), binom(t - 1, k - 1));
            }
        }
    }

    #[test]
    fn uniform_logsum_is_log_path_count() {
        let l = LogLikelihoodLattice::new(Array2::zeros((4, 2))).unwrap();
        assert!((brute_force_logsum(&l).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn guard_rejects_large() {
        let l = LogLikelihoodLattice::new(Array2::zeros((13, 2))).unwrap();
        assert!(matches!(brute_force_logsum(&l), Err(AlignError::OracleTooLarge { .. })));
        let l = LogLikelihoodLattice::new(Array2::zeros((8, 7))).unwrap();
        assert!(brute_force_best_path(&l).is_err());
    }
}
