//! Seeded synthetic corpus with exact reference boundaries.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AlignError, Result};
use crate::eval::{BoundarySet, Segment};
use crate::io::features::{write_feature_file, FeatureFile};
use crate::io::text::{write_boundaries, write_labels, write_manifest, ManifestEntry};
use crate::lattice::{PhonemeSequence, Vocabulary};
use crate::train::Utterance;

pub const MIN_PHONEMES: usize = 5;
pub const MAX_PHONEMES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n_utts: usize,
    pub n_dev: usize,
    pub vocab_size: usize,
    pub states_per_phoneme: usize,
    pub feature_dim: usize,
    /// Inclusive per-state duration range in frames.
    pub min_dur: usize,
    pub max_dur: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub frame_shift_us: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_utts: 200,
            n_dev: 20,
            vocab_size: 10,
            states_per_phoneme: 3,
            feature_dim: 16,
            min_dur: 2,
            max_dur: 8,
            noise_std: 0.1,
            seed: 7,
            frame_shift_us: 10_000,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AlignError::InvalidParameter(m.into()));
        if self.min_dur < 1 || self.max_dur < self.min_dur {
            return bad("durations need 1 <= min <= max");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be >= 2");
        }
        if self.states_per_phoneme == 0 || self.feature_dim == 0 || self.frame_shift_us == 0 {
            return bad("states_per_phoneme, feature_dim and frame_shift_us must be >= 1");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be finite and >= 0");
        }
        Ok(())
    }

    pub fn symbol(i: usize) -> String {
        format!("p{i}")
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_symbols((0..self.vocab_size).map(Self::symbol))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub phonemes: Vec<usize>,
    /// Sampled duration of every state, phoneme-major.
    pub durations: Vec<usize>,
    pub features: FeatureFile,
    pub reference: BoundarySet,
}

impl SynthUtterance {
    pub fn to_utterance(&self, vocab_size: usize) -> Result<Utterance> {
        Ok(Utterance {
            id: self.id.clone(),
            features: self.features.to_matrix()?,
            phonemes: PhonemeSequence::new(self.phonemes.clone(), vocab_size)?,
            reference: Some(self.reference.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    /// `[phoneme * S + state]` rows.
    pub means: Array2<f64>,
    pub train: Vec<SynthUtterance>,
    pub dev: Vec<SynthUtterance>,
}

impl SynthCorpus {
    pub fn vocabulary(&self) -> Vocabulary {
        self.spec.vocabulary()
    }

    pub fn train_utterances(&self) -> Result<Vec<Utterance>> {
        self.train.iter().map(|u| u.to_utterance(self.spec.vocab_size)).collect()
    }

    pub fn dev_utterances(&self) -> Result<Vec<Utterance>> {
        self.dev.iter().map(|u| u.to_utterance(self.spec.vocab_size)).collect()
    }
}

/// Train and dev share the state means; dev utterances are drawn after all
/// training utterances from the same stream.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = spec.states_per_phoneme;
    let means = Array2::from_shape_simple_fn((spec.vocab_size * s, spec.feature_dim), || {
        rng.sample::<f64, _>(StandardNormal)
    });
    let mut sample = |id: String| -> Result<SynthUtterance> {
        let n = rng.gen_range(MIN_PHONEMES..=MAX_PHONEMES);
        let phonemes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..spec.vocab_size)).collect();
        let durations: Vec<usize> = (0..n * s).map(|_| rng.gen_range(spec.min_dur..=spec.max_dur)).collect();
        let total: usize = durations.iter().sum();
        let mut frames = Array2::<f32>::zeros((total, spec.feature_dim));
        let mut t = 0;
        let mut segments = Vec::with_capacity(n);
        for (i, &p) in phonemes.iter().enumerate() {
            let start = t;
            for j in 0..s {
                for _ in 0..durations[i * s + j] {
                    for d in 0..spec.feature_dim {
                        let noise: f64 = rng.sample(StandardNormal);
                        frames[[t, d]] = (means[[p * s + j, d]] + spec.noise_std * noise) as f32;
                    }
                    t += 1;
                }
            }
            segments.push(Segment {
                phoneme: p,
                start_frame: start,
                end_frame: t,
            });
        }
        let shift = spec.frame_shift_us as f64 * 1e-6;
        Ok(SynthUtterance {
            id,
            phonemes,
            durations,
            features: FeatureFile {
                frame_shift_us: spec.frame_shift_us,
                frames,
            },
            reference: BoundarySet::new(segments, shift)?,
        })
    };
    let train = (0..spec.n_utts)
        .map(|i| sample(format!("train_{i:04}")))
        .collect::<Result<Vec<_>>>()?;
    let dev = (0..spec.n_dev)
        .map(|i| sample(format!("dev_{i:04}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCorpus {
        spec: *spec,
        means,
        train,
        dev,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub train_manifest: PathBuf,
    pub dev_manifest: PathBuf,
}

/// Writes `features/`, `labels/`, `refs/`, `train.tsv` and `dev.tsv`.
pub fn write_corpus(corpus: &SynthCorpus, out_dir: &Path) -> Result<SynthPaths> {
    for sub in ["features", "labels", "refs"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| AlignError::io(&d, e))?;
    }
    let vocab = corpus.vocabulary();
    let write_split = |utts: &[SynthUtterance], name: &str| -> Result<PathBuf> {
        let mut entries = Vec::with_capacity(utts.len());
        for u in utts {
            let feat = PathBuf::from(format!("features/{}.faf", u.id));
            let lab = PathBuf::from(format!("labels/{}.lab", u.id));
            let refp = PathBuf::from(format!("refs/{}.tsv", u.id));
            write_feature_file(&out_dir.join(&feat), &u.features)?;
            let tokens: Vec<String> = u.phonemes.iter().map(|&p| SynthSpec::symbol(p)).collect();
            let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();
            write_labels(&out_dir.join(&lab), &tokens)?;
            write_boundaries(&out_dir.join(&refp), &u.reference, &vocab)?;
            entries.push(ManifestEntry {
                utt_id: u.id.clone(),
                features: feat,
                labels: lab,
                reference: Some(refp),
            });
        }
        let path = out_dir.join(name);
        write_manifest(&path, &entries)?;
        Ok(path)
    };
    let train_manifest = write_split(&corpus.train, "train.tsv")?;
    let dev_manifest = write_split(&corpus.dev, "dev.tsv")?;
    Ok(SynthPaths {
        train_manifest,
        dev_manifest,
    })
}

pub fn synth_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<(SynthCorpus, SynthPaths)> {
    let corpus = generate(spec)?;
    let paths = write_corpus(&corpus, out_dir)?;
    Ok((corpus, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            n_utts: 4,
            n_dev: 2,
            vocab_size: 4,
            feature_dim: 3,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn references_are_cumulative_durations() {
        let c = generate(&small()).unwrap();
        for u in c.train.iter().chain(&c.dev) {
            assert!((MIN_PHONEMES..=MAX_PHONEMES).contains(&u.phonemes.len()));
            let mut start = 0;
            for (i, seg) in u.reference.segments().iter().enumerate() {
                assert_eq!(seg.start_frame, start);
                assert_eq!(seg.phoneme, u.phonemes[i]);
                start += u.durations[i * 3..i * 3 + 3].iter().sum::<usize>();
            }
            assert_eq!(start, u.features.frames.nrows());
            assert!(u.durations.iter().all(|d| (2..=8).contains(d)));
        }
    }

    #[test]
    fn noiseless_features_are_state_means() {
        let spec = SynthSpec {
            noise_std: 0.0,
            ..small()
        };
        let c = generate(&spec).unwrap();
        let u = &c.train[0];
        let mut t = 0;
        for (i, &p) in u.phonemes.iter().enumerate() {
            for j in 0..3 {
                for _ in 0..u.durations[i * 3 + j] {
                    for d in 0..3 {
                        assert_eq!(u.features.frames[[t, d]], c.means[[p * 3 + j, d]] as f32);
                    }
                    t += 1;
                }
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        synth_corpus(&small(), a.path()).unwrap();
        synth_corpus(&small(), b.path()).unwrap();
        for rel in ["train.tsv", "dev.tsv", "features/train_0002.faf", "labels/dev_0001.lab", "refs/train_0003.tsv"] {
            assert_eq!(
                std::fs::read(a.path().join(rel)).unwrap(),
                std::fs::read(b.path().join(rel)).unwrap(),
                "{rel}"
            );
        }
        let other = generate(&SynthSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(other.train[0].features, generate(&small()).unwrap().train[0].features);
    }

    #[test]
    fn spec_validation() {
        assert!(generate(&SynthSpec { min_dur: 0, ..small() }).is_err());
        assert!(generate(&SynthSpec { vocab_size: 1, ..small() }).is_err());
        assert!(generate(&SynthSpec { min_dur: 5, max_dur: 4, ..small() }).is_err());
    }
}
