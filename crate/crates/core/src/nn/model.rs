use ndarray::Array2;
use rand::Rng;

use super::loss::{cross_entropy_loss, mse_loss};
use super::params::ParameterStore;
use super::stack::{Decoder, DecoderCache, Encoder, EncoderCache, LinguisticInputTable};
use super::vae::VaeHead;
use crate::error::{AlignError, Result};
use crate::lattice::{FeatureMatrix, StateSequence};

pub const KERNEL_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub states_per_phoneme: usize,
    pub embed_dim: usize,
    pub hidden_channels: usize,
    pub layers: usize,
}

/// Acoustic and linguistic encoders with their reconstruction decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignerModel {
    pub config: ModelConfig,
    pub acoustic_encoder: Encoder,
    pub acoustic_decoder: Decoder,
    pub linguistic_input: LinguisticInputTable,
    pub linguistic_encoder: Encoder,
    pub linguistic_decoder: Decoder,
}

impl AlignerModel {
    /// Registers all parameters in `store` in a fixed order.
    pub fn new<R: Rng>(config: ModelConfig, store: &mut ParameterStore, rng: &mut R) -> Result<Self> {
        let ModelConfig {
            feature_dim,
            vocab_size,
            states_per_phoneme,
            embed_dim,
            hidden_channels,
            layers,
        } = config;
        for (name, v) in [
            ("feature_dim", feature_dim),
            ("vocab_size", vocab_size),
            ("states_per_phoneme", states_per_phoneme),
            ("embed_dim", embed_dim),
            ("hidden_channels", hidden_channels),
            ("layers", layers),
        ] {
            if v == 0 {
                return Err(AlignError::InvalidParameter(format!("{name} must be >= 1")));
            }
        }
        let k = KERNEL_WIDTH;
        let acoustic_encoder = Encoder::new(store, "aco_enc", feature_dim, hidden_channels, layers, k, embed_dim, rng);
        let acoustic_decoder = Decoder::new(store, "aco_dec", embed_dim, hidden_channels, layers, k, feature_dim, rng);
        let linguistic_input =
            LinguisticInputTable::new(store, "lng_in", vocab_size, states_per_phoneme, hidden_channels, rng);
        let linguistic_encoder =
            Encoder::new(store, "lng_enc", hidden_channels, hidden_channels, layers, k, embed_dim, rng);
        let linguistic_decoder = Decoder::new(store, "lng_dec", embed_dim, hidden_channels, layers, k, vocab_size, rng);
        Ok(Self {
            config,
            acoustic_encoder,
            acoustic_decoder,
            linguistic_input,
            linguistic_encoder,
            linguistic_decoder,
        })
    }

    pub fn encode_acoustic(&self, store: &ParameterStore, features: &FeatureMatrix) -> Result<(VaeHead, EncoderCache)> {
        if features.dim() != self.config.feature_dim {
            return Err(AlignError::dims(format!(
                "model expects feature dim {}, got {}",
                self.config.feature_dim,
                features.dim()
            )));
        }
        self.acoustic_encoder
            .forward(store, features.frames().t().as_standard_layout().into_owned())
    }

    /// Returns the head plus the encoder input needed for the backward pass.
    pub fn encode_linguistic(
        &self,
        store: &ParameterStore,
        states: &StateSequence,
    ) -> Result<(VaeHead, EncoderCache)> {
        let input = self.linguistic_input.forward(store, states)?;
        self.linguistic_encoder.forward(store, input)
    }

    pub fn decode_acoustic(&self, store: &ParameterStore, z: &Array2<f64>) -> Result<(Array2<f64>, DecoderCache)> {
        self.acoustic_decoder.forward(store, z)
    }

    pub fn decode_linguistic(&self, store: &ParameterStore, z: &Array2<f64>) -> Result<(Array2<f64>, DecoderCache)> {
        self.linguistic_decoder.forward(store, z)
    }
}

/// Mean squared reconstruction error against the input features.
pub fn recon_loss_acoustic(recon: &Array2<f64>, target: &FeatureMatrix) -> Result<f64> {
    Ok(mse_loss(recon, target.frames())?.0)
}

/// Mean cross-entropy of per-state logits against each state's source phoneme.
pub fn recon_loss_linguistic(logits: &Array2<f64>, states: &StateSequence) -> Result<f64> {
    let targets: Vec<usize> = states.entries().iter().map(|e| e.phoneme).collect();
    Ok(cross_entropy_loss(logits, &targets)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{expand_to_states, PhonemeSequence};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> (AlignerModel, ParameterStore) {
        let cfg = ModelConfig {
            feature_dim: 4,
            vocab_size: 5,
            states_per_phoneme: 2,
            embed_dim: 3,
            hidden_channels: 6,
            layers: 2,
        };
        let mut store = ParameterStore::new();
        let model = AlignerModel::new(cfg, &mut store, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        (model, store)
    }

    fn features(frames: usize) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(frames as u64);
        FeatureMatrix::new(Array2::from_shape_simple_fn((frames, 4), || rng.gen_range(-1.0..1.0)), 0.01).unwrap()
    }

    #[test]
    fn row_counts_follow_inputs() {
        let (model, store) = small();
        for t in [1, 2, 9] {
            let (head, _) = model.encode_acoustic(&store, &features(t)).unwrap();
            assert_eq!(head.mu.dim(), (t, 3));
            assert_eq!(head.logvar.dim(), (t, 3));
            let (recon, _) = model.decode_acoustic(&store, &head.mu).unwrap();
            assert_eq!(recon.dim(), (t, 4));
        }
        let states = expand_to_states(&PhonemeSequence::new(vec![0, 4, 2], 5).unwrap(), 2).unwrap();
        let (head, _) = model.encode_linguistic(&store, &states).unwrap();
        assert_eq!(head.mu.dim(), (6, 3));
        let (logits, _) = model.decode_linguistic(&store, &head.mu).unwrap();
        assert_eq!(logits.dim(), (6, 5));
    }

    #[test]
    fn encoding_is_deterministic() {
        let (model, store) = small();
        let f = features(7);
        let a = model.encode_acoustic(&store, &f).unwrap().0;
        let b = model.encode_acoustic(&store, &f).unwrap().0;
        assert_eq!(a, b);
        let (model2, store2) = small();
        assert_eq!(model2.encode_acoustic(&store2, &f).unwrap().0, a);
    }

    #[test]
    fn zero_projection_gives_standard_normal_head() {
        let (model, mut store) = small();
        for enc in [&model.acoustic_encoder, &model.linguistic_encoder] {
            store.value_mut(enc.proj.weight).fill(0.0);
            store.value_mut(enc.proj.bias).fill(0.0);
        }
        let (head, _) = model.encode_acoustic(&store, &features(5)).unwrap();
        assert!(head.mu.iter().chain(head.logvar.iter()).all(|&v| v == 0.0));
        let states = expand_to_states(&PhonemeSequence::new(vec![1, 3], 5).unwrap(), 2).unwrap();
        let (head, _) = model.encode_linguistic(&store, &states).unwrap();
        assert!(head.mu.iter().chain(head.logvar.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn fresh_heads_have_zero_logvar_and_decoders_output_zero() {
        let (model, store) = small();
        let (head, _) = model.encode_acoustic(&store, &features(4)).unwrap();
        assert!(head.logvar.iter().all(|&v| v == 0.0));
        assert!(head.mu.iter().any(|&v| v != 0.0));
        let (recon, _) = model.decode_acoustic(&store, &head.mu).unwrap();
        assert!(recon.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_errors() {
        let (model, store) = small();
        let wrong = FeatureMatrix::new(Array2::zeros((3, 5)), 0.01).unwrap();
        assert!(model.encode_acoustic(&store, &wrong).is_err());
        let bad_vocab = expand_to_states(&PhonemeSequence::new(vec![7], 8).unwrap(), 2).unwrap();
        assert!(matches!(
            model.encode_linguistic(&store, &bad_vocab),
            Err(AlignError::PhonemeIdOutOfRange { id: 7, size: 5 })
        ));
    }

    #[test]
    fn reconstruction_losses() {
        let f = features(3);
        assert_eq!(recon_loss_acoustic(f.frames(), &f).unwrap(), 0.0);
        let shifted = f.frames() + 0.5;
        assert!((recon_loss_acoustic(&shifted, &f).unwrap() - 0.25).abs() < 1e-15);
        let states = expand_to_states(&PhonemeSequence::new(vec![0, 1], 5).unwrap(), 2).unwrap();
        let uniform = Array2::zeros((4, 5));
        assert!((recon_loss_linguistic(&uniform, &states).unwrap() - 5f64.ln()).abs() < 1e-12);
    }
}
