//! Log-likelihood lattice construction.
//!
//! A lattice entry `log b(t, k)` scores acoustic frame `t` against linguistic
//! state `k`. It is the sum of a distance-softmax matching term and a
//! beta-binomial position prior that favours near-diagonal alignments.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};

use crate::error::{AlignError, Result};
use crate::special::ln_gamma;

/// Smallest log value the position prior may take.
pub const PRIOR_LOG_FLOOR: f64 = -745.0;

/// Acoustic features of one utterance, `T` frames by `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: Array2<f64>,
    frame_shift: f64,
}

impl FeatureMatrix {
    pub const DEFAULT_FRAME_SHIFT: f64 = 0.010;

    pub fn new(frames: Array2<f64>, frame_shift: f64) -> Result<Self> {
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return Err(AlignError::dims(format!(
                "feature matrix must be non-empty, got {}x{}",
                frames.nrows(),
                frames.ncols()
            )));
        }
        if let Some(pos) = frames.iter().position(|v| !v.is_finite()) {
            return Err(AlignError::InvalidParameter(format!(
                "non-finite feature value at flat index {pos}"
            )));
        }
        if !(frame_shift > 0.0 && frame_shift.is_finite()) {
            return Err(AlignError::InvalidParameter(format!(
                "frame shift must be positive, got {frame_shift}"
            )));
        }
        Ok(Self {
            frames,
            frame_shift,
        })
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    /// Seconds per frame.
    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }
}

/// Closed phoneme vocabulary mapping symbols to dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from symbols in order of first appearance.
    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocabulary::default();
        for s in symbols {
            vocab.insert(s.as_ref());
        }
        vocab
    }

    pub fn insert(&mut self, symbol: &str) -> usize {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len();
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), id);
        id
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<PhonemeSequence> {
        let ids = tokens
            .iter()
            .map(|t| {
                self.id(t.as_ref())
                    .ok_or_else(|| AlignError::UnknownPhoneme(t.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        PhonemeSequence::new(ids, self.len())
    }
}

/// Non-empty sequence of phoneme ids drawn from a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeSequence {
    ids: Vec<usize>,
}

impl PhonemeSequence {
    pub fn new(ids: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(AlignError::EmptySequence);
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= vocab_size) {
            return Err(AlignError::PhonemeIdOutOfRange {
                id,
                size: vocab_size,
            });
        }
        Ok(Self { ids })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// One linguistic state: sub-unit `state` of the phoneme at `source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateEntry {
    pub phoneme: usize,
    pub state: usize,
    pub source: usize,
}

/// Phoneme sequence expanded to `states_per_phoneme` consecutive states each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSequence {
    entries: Vec<StateEntry>,
    states_per_phoneme: usize,
}

impl StateSequence {
    pub fn entries(&self) -> &[StateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn states_per_phoneme(&self) -> usize {
        self.states_per_phoneme
    }

    pub fn num_phonemes(&self) -> usize {
        self.entries.len() / self.states_per_phoneme
    }

    /// Recovers the phoneme sequence by collapsing each state group.
    pub fn phonemes(&self) -> Vec<usize> {
        self.entries
            .chunks(self.states_per_phoneme)
            .map(|group| group[0].phoneme)
            .collect()
    }
}

pub fn expand_to_states(
    phonemes: &PhonemeSequence,
    states_per_phoneme: usize,
) -> Result<StateSequence> {
    if states_per_phoneme == 0 {
        return Err(AlignError::InvalidParameter(
            "states_per_phoneme must be at least 1".into(),
        ));
    }
    if phonemes.is_empty() {
        return Err(AlignError::EmptySequence);
    }
    let entries = phonemes
        .ids()
        .iter()
        .enumerate()
        .flat_map(|(source, &phoneme)| {
            (0..states_per_phoneme).map(move |state| StateEntry {
                phoneme,
                state,
                source,
            })
        })
        .collect();
    Ok(StateSequence {
        entries,
        states_per_phoneme,
    })
}

/// Log of the matching function: a softmax over states of negative squared
/// embedding distances, one row per acoustic frame.
pub fn log_matching(acoustic: ArrayView2<f64>, linguistic: ArrayView2<f64>) -> Result<Array2<f64>> {
    if acoustic.ncols() != linguistic.ncols() {
        return Err(AlignError::dims(format!(
            "acoustic embedding dim {} != linguistic embedding dim {}",
            acoustic.ncols(),
            linguistic.ncols()
        )));
    }
    if linguistic.nrows() == 0 || acoustic.nrows() == 0 {
        return Err(AlignError::dims("empty embedding matrix"));
    }
    let (frames, states) = (acoustic.nrows(), linguistic.nrows());
    let mut out = Array2::zeros((frames, states));
    for (y, mut row) in acoustic.outer_iter().zip(out.outer_iter_mut()) {
        for (x, logit) in linguistic.outer_iter().zip(row.iter_mut()) {
            let dist: f64 = y.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            *logit = -dist;
        }
        let lse = logsumexp(row.iter().copied());
        row.mapv_inplace(|v| v - lse);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    omega: f64,
}

impl PriorParams {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(AlignError::InvalidParameter(format!(
                "prior omega must be positive, got {omega}"
            )));
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Beta-binomial log pmf at `k` successes out of `n` trials.
pub fn beta_binomial_ln_pmf(k: usize, n: usize, alpha: f64, beta: f64) -> f64 {
    let (kf, nf) = (k as f64, n as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    ln_choose + ln_beta(kf + alpha, nf - kf + beta) - ln_beta(alpha, beta)
}

/// Beta-binomial position prior over `states` for each of `frames` frames.
///
/// Frame `t` (1-based) uses `alpha = omega * t`, `beta = omega * (T - t + 1)`
/// with `K - 1` trials, so state `k` (1-based) sits at support point `k - 1`.
pub fn log_position_prior(frames: usize, states: usize, params: PriorParams) -> Result<Array2<f64>> {
    if frames == 0 || states == 0 {
        return Err(AlignError::InvalidParameter(format!(
            "prior needs T >= 1 and K >= 1, got T={frames}, K={states}"
        )));
    }
    let n = states - 1;
    let omega = params.omega();
    let mut out = Array2::zeros((frames, states));
    if n == 0 {
        return Ok(out);
    }
    for (t, mut row) in out.outer_iter_mut().enumerate() {
        let alpha = omega * (t + 1) as f64;
        let beta = omega * (frames - t) as f64;
        for (k, v) in row.iter_mut().enumerate() {
            *v = beta_binomial_ln_pmf(k, n, alpha, beta).max(PRIOR_LOG_FLOOR);
        }
    }
    Ok(out)
}

/// `T x K` matrix of `log b(t, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihoodLattice {
    values: Array2<f64>,
}

impl LogLikelihoodLattice {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(AlignError::dims("lattice must be non-empty"));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(AlignError::InvalidParameter(
                "lattice entries must be finite or -inf".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_states(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[[t, k]]
    }
}

pub fn build_lattice(
    log_f: &Array2<f64>,
    log_prior: &Array2<f64>,
    use_prior: bool,
) -> Result<LogLikelihoodLattice> {
    if log_f.dim() != log_prior.dim() {
        return Err(AlignError::dims(format!(
            "matching {:?} vs prior {:?}",
            log_f.dim(),
            log_prior.dim()
        )));
    }
    let values = if use_prior {
        log_f + log_prior
    } else {
        log_f.clone()
    };
    LogLikelihoodLattice::new(values)
}

/// Numerically stable `log(sum(exp(x)))`; `-inf` for an empty or all `-inf` input.
pub fn logsumexp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
