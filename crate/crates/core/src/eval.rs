//! Phoneme boundaries from decoded paths, and boundary-error metrics.

use crate::dp::AlignmentPath;
use crate::error::{AlignError, Result};
use crate::lattice::StateSequence;

/// Frames `[start_frame, end_frame)` of one phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub phoneme: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Contiguous phoneme segmentation of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    segments: Vec<Segment>,
    frame_shift: f64,
}

impl BoundarySet {
    pub fn new(segments: Vec<Segment>, frame_shift: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(AlignError::EmptySequence);
        }
        if !(frame_shift > 0.0) {
            return Err(AlignError::InvalidParameter(format!("frame shift {frame_shift}")));
        }
        if segments[0].start_frame != 0 {
            return Err(AlignError::InvalidParameter(format!(
                "first segment starts at frame {}",
                segments[0].start_frame
            )));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.end_frame <= seg.start_frame {
                return Err(AlignError::InvalidParameter(format!(
                    "segment {i} is empty: [{}, {})",
                    seg.start_frame, seg.end_frame
                )));
            }
            if i > 0 && segments[i - 1].end_frame != seg.start_frame {
                return Err(AlignError::InvalidParameter(format!(
                    "segment {i} starts at {} but previous ends at {}",
                    seg.start_frame,
                    segments[i - 1].end_frame
                )));
            }
        }
        Ok(Self {
            segments,
            frame_shift,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn num_frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end_frame)
    }

    pub fn phonemes(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.phoneme).collect()
    }

    pub fn start_sec(&self, i: usize) -> f64 {
        self.segments[i].start_frame as f64 * self.frame_shift
    }

    pub fn end_sec(&self, i: usize) -> f64 {
        self.segments[i].end_frame as f64 * self.frame_shift
    }

    fn frame_ms(&self) -> f64 {
        self.frame_shift * 1000.0
    }
}

/// Collapses a state path into phoneme segments.
pub fn path_to_boundaries(path: &AlignmentPath, states: &StateSequence, frame_shift: f64) -> Result<BoundarySet> {
    if !path.is_valid(states.len()) {
        return Err(AlignError::dims(format!(
            "path of {} frames is not a valid alignment over {} states",
            path.states.len(),
            states.len()
        )));
    }
    let entries = states.entries();
    let mut segments: Vec<Segment> = Vec::with_capacity(states.num_phonemes());
    for (t, &k) in path.states.iter().enumerate() {
        let entry = entries[k];
        let open = segments.len();
        if open > 0 && entry.source + 1 == open {
            segments[open - 1].end_frame = t + 1;
        } else {
            segments.push(Segment {
                phoneme: entry.phoneme,
                start_frame: t,
                end_frame: t + 1,
            });
        }
    }
    BoundarySet::new(segments, frame_shift)
}

/// Signed inner-boundary errors `pred - ref` in milliseconds, one per
/// phoneme after the first.
pub fn boundary_errors(pred: &BoundarySet, reference: &BoundarySet) -> Result<Vec<f64>> {
    if pred.phonemes() != reference.phonemes() {
        return Err(AlignError::SequenceMismatch(format!(
            "predicted {} phonemes vs reference {}",
            pred.segments.len(),
            reference.segments.len()
        )));
    }
    let (pms, rms) = (pred.frame_ms(), reference.frame_ms());
    Ok(pred
        .segments
        .iter()
        .zip(&reference.segments)
        .skip(1)
        .map(|(p, r)| p.start_frame as f64 * pms - r.start_frame as f64 * rms)
        .collect())
}

pub const TOLERANCES_MS: [f64; 2] = [20.0, 50.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mae_ms: f64,
    pub median_ms: f64,
    pub tol20_pct: f64,
    pub tol50_pct: f64,
    pub n_boundaries: usize,
}

impl MetricsReport {
    /// `key=value` block, two decimals.
    pub fn to_key_values(&self) -> String {
        format!(
            "mae_ms={:.2} median_ms={:.2} tol20={:.2} tol50={:.2}",
            self.mae_ms, self.median_ms, self.tol20_pct, self.tol50_pct
        )
    }
}

/// Percentage of errors whose magnitude strictly exceeds `threshold_ms`.
pub fn tolerance_error_rate(errors: &[f64], threshold_ms: f64) -> f64 {
    let over = errors.iter().filter(|e| e.abs() > threshold_ms).count();
    100.0 * over as f64 / errors.len() as f64
}

pub fn metrics(errors: &[f64]) -> Result<MetricsReport> {
    if errors.is_empty() {
        return Err(AlignError::NoBoundaries);
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let n = abs.len();
    let mae = abs.iter().sum::<f64>() / n as f64;
    abs.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        abs[n / 2]
    } else {
        0.5 * (abs[n / 2 - 1] + abs[n / 2])
    };
    Ok(MetricsReport {
        mae_ms: mae,
        median_ms: median,
        tol20_pct: tolerance_error_rate(errors, TOLERANCES_MS[0]),
        tol50_pct: tolerance_error_rate(errors, TOLERANCES_MS[1]),
        n_boundaries: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{expand_to_states, PhonemeSequence};
    use proptest::prelude::*;

    fn seg(phoneme: usize, start_frame: usize, end_frame: usize) -> Segment {
        Segment {
            phoneme,
            start_frame,
            end_frame,
        }
    }

    #[test]
    fn three_state_path_to_boundaries() {
        let states = expand_to_states(&PhonemeSequence::new(vec![4, 2], 5).unwrap(), 3).unwrap();
        let path = AlignmentPath {
            states: [1, 1, 2, 3, 4, 4, 5, 6].iter().map(|s| s - 1).collect(),
            log_score: 0.0,
        };
        let b = path_to_boundaries(&path, &states, 0.01).unwrap();
        assert_eq!(b.segments(), &[seg(4, 0, 4), seg(2, 4, 8)]);
        assert!((b.start_sec(1) * 1000.0 - 40.0).abs() < 1e-9);
    }

    #[test]
    fn single_phoneme_covers_utterance() {
        let states = expand_to_states(&PhonemeSequence::new(vec![0], 1).unwrap(), 3).unwrap();
        let path = AlignmentPath {
            states: vec![0, 1, 1, 2, 2],
            log_score: 0.0,
        };
        let b = path_to_boundaries(&path, &states, 0.01).unwrap();
        assert_eq!(b.segments(), &[seg(0, 0, 5)]);
    }

    #[test]
    fn repeated_phonemes_stay_separate() {
        let states = expand_to_states(&PhonemeSequence::new(vec![1, 1], 2).unwrap(), 1).unwrap();
        let path = AlignmentPath {
            states: vec![0, 0, 1],
            log_score: 0.0,
        };
        let b = path_to_boundaries(&path, &states, 0.01).unwrap();
        assert_eq!(b.segments(), &[seg(1, 0, 2), seg(1, 2, 3)]);
    }

    #[test]
    fn inconsistent_path_rejected() {
        let states = expand_to_states(&PhonemeSequence::new(vec![0, 1], 2).unwrap(), 2).unwrap();
        let path = AlignmentPath {
            states: vec![0, 1, 2],
            log_score: 0.0,
        };
        assert!(path_to_boundaries(&path, &states, 0.01).is_err());
    }

    #[test]
    fn errors_and_mismatch() {
        let r = BoundarySet::new(vec![seg(0, 0, 5), seg(1, 5, 9)], 0.01).unwrap();
        assert_eq!(boundary_errors(&r, &r).unwrap(), vec![0.0]);
        let p = BoundarySet::new(vec![seg(0, 0, 4), seg(1, 4, 9)], 0.01).unwrap();
        let r2 = BoundarySet::new(vec![seg(0, 0, 11), seg(1, 11, 12)], 0.005).unwrap();
        // 40 ms vs 55 ms
        let e = boundary_errors(&p, &r2).unwrap();
        assert!((e[0] + 15.0).abs() < 1e-9);
        let single = BoundarySet::new(vec![seg(0, 0, 9)], 0.01).unwrap();
        assert!(boundary_errors(&single, &single).unwrap().is_empty());
        assert!(matches!(boundary_errors(&single, &r), Err(AlignError::SequenceMismatch(_))));
    }

    #[test]
    fn ten_ms_frames_give_exact_milliseconds() {
        let p = BoundarySet::new(vec![seg(0, 0, 2), seg(1, 2, 9)], 0.01).unwrap();
        let r = BoundarySet::new(vec![seg(0, 0, 4), seg(1, 4, 9)], 0.01).unwrap();
        let e = boundary_errors(&p, &r).unwrap();
        assert_eq!(e, vec![-20.0]);
        assert_eq!(metrics(&e).unwrap().tol20_pct, 0.0);
    }

    #[test]
    fn invalid_boundary_sets() {
        assert!(BoundarySet::new(vec![seg(0, 1, 3)], 0.01).is_err());
        assert!(BoundarySet::new(vec![seg(0, 0, 3), seg(1, 4, 6)], 0.01).is_err());
        assert!(BoundarySet::new(vec![seg(0, 0, 0)], 0.01).is_err());
    }

    #[test]
    fn metric_arithmetic() {
        let m = metrics(&[0.0, 10.0, 25.0, 60.0]).unwrap();
        assert_eq!(m.mae_ms, 23.75);
        assert_eq!(m.median_ms, 17.5);
        assert_eq!(m.tol20_pct, 50.0);
        assert_eq!(m.tol50_pct, 25.0);
        let z = metrics(&[0.0; 5]).unwrap();
        assert_eq!((z.mae_ms, z.median_ms, z.tol20_pct, z.tol50_pct), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(z.to_key_values(), "mae_ms=0.00 median_ms=0.00 tol20=0.00 tol50=0.00");
        assert_eq!(metrics(&[-7.0, 7.0, -30.0, 30.0]).unwrap(), metrics(&[7.0, 7.0, 30.0, 30.0]).unwrap());
        assert!(matches!(metrics(&[]), Err(AlignError::NoBoundaries)));
        // ties at the threshold are within tolerance
        assert_eq!(metrics(&[20.0, 50.0]).unwrap().tol20_pct, 50.0);
    }

    proptest! {
        #[test]
        fn single_state_expansion_is_identity(seed in any::<u64>(), n in 1usize..6, extra in 0usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frames = n + extra;
            let values = ndarray::Array2::from_shape_simple_fn((frames, n), || rng.gen_range(-4.0..0.0));
            let lattice = crate::lattice::LogLikelihoodLattice::new(values).unwrap();
            let path = crate::dp::viterbi(&lattice).unwrap();
            let ids: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let states = expand_to_states(&PhonemeSequence::new(ids.clone(), 3).unwrap(), 1).unwrap();
            let decoded = path_to_boundaries(&path, &states, 0.01).unwrap();
            // phoneme i spans exactly the frames the path spends in column i
            let raw: Vec<Segment> = (0..n)
                .map(|i| {
                    let start = path.states.iter().position(|&k| k == i).unwrap();
                    let end = path.states.iter().rposition(|&k| k == i).unwrap() + 1;
                    seg(ids[i], start, end)
                })
                .collect();
            prop_assert_eq!(decoded.segments(), &raw[..]);
        }
    }

    proptest! {
        #[test]
        fn tolerances_nested(errors in proptest::collection::vec(-200.0f64..200.0, 1..50)) {
            let m = metrics(&errors).unwrap();
            prop_assert!(m.tol20_pct >= m.tol50_pct);
            prop_assert!(m.mae_ms >= 0.0);
            prop_assert!((0.0..=100.0).contains(&m.tol20_pct));
        }

        #[test]
        fn large_error_raises_mae(errors in proptest::collection::vec(-100.0f64..100.0, 1..30), extra in 1.0f64..50.0) {
            let base = metrics(&errors).unwrap().mae_ms;
            let mut more = errors.clone();
            more.push(base + extra);
            prop_assert!(metrics(&more).unwrap().mae_ms > base);
        }

        #[test]
        fn pooling_is_concatenation(a in proptest::collection::vec(-80.0f64..80.0, 1..20), b in proptest::collection::vec(-80.0f64..80.0, 1..20)) {
            let mut pooled = a.clone();
            pooled.extend_from_slice(&b);
            let m = metrics(&pooled).unwrap();
            prop_assert_eq!(m.n_boundaries, a.len() + b.len());
            let mae = pooled.iter().map(|e| e.abs()).sum::<f64>() / pooled.len() as f64;
            prop_assert!((m.mae_ms - mae).abs() < 1e-12);
        }
    }
}
