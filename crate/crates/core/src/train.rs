//! Loss composition, the annealed alignment gradient, and the optimization loop.

use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::anneal::{anneal_occupancy, schedule_sigma, AnnealingSchedule};
use crate::dp::{forward_backward, viterbi, AlignmentPath, OccupancyMatrix};
use crate::error::{AlignError, Result};
use crate::eval::{boundary_errors, metrics, path_to_boundaries, BoundarySet, MetricsReport};
use crate::io::checkpoint::{write_checkpoint, Checkpoint};
use crate::io::{atomic_write, config::config_to_text};
use crate::lattice::{
    build_lattice, expand_to_states, log_matching, log_position_prior, FeatureMatrix, LogLikelihoodLattice,
    PhonemeSequence, PriorParams, StateSequence, Vocabulary,
};
use crate::nn::loss::{cross_entropy_loss, mse_loss};
use crate::nn::vae::{kl_standard_normal, kl_standard_normal_grad, reparameterize, reparameterize_backward, standard_normal};
use crate::nn::{AdamConfig, AlignerModel, Gradients, ModelConfig, ParameterStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub w_aco: f64,
    pub w_lng: f64,
    /// KL weight inside each VAE loss.
    pub kl_beta: f64,
    pub omega: f64,
    pub use_prior: bool,
    pub use_vae: bool,
    pub use_annealing: bool,
    pub anneal_normalize: bool,
    pub states_per_phoneme: usize,
    pub schedule: AnnealingSchedule,
    pub lr: f64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub seed: u64,
    pub eval_interval: u64,
    pub embed_dim: usize,
    pub hidden_channels: usize,
    pub layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            w_aco: 0.1,
            w_lng: 0.1,
            kl_beta: 1.0,
            omega: 0.01,
            use_prior: true,
            use_vae: true,
            use_annealing: true,
            anneal_normalize: true,
            states_per_phoneme: 3,
            schedule: AnnealingSchedule::default(),
            lr: 1e-5,
            batch_size: 4,
            max_steps: 90_000,
            seed: 0,
            eval_interval: 1000,
            embed_dim: 64,
            hidden_channels: 256,
            layers: 6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AlignError::InvalidParameter(msg.to_string()));
        if !(self.w_aco >= 0.0 && self.w_lng >= 0.0 && self.kl_beta >= 0.0) {
            return bad("loss weights must be >= 0");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and >= 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be >= 1");
        }
        if self.states_per_phoneme == 0 || self.embed_dim == 0 || self.hidden_channels == 0 || self.layers == 0 {
            return bad("states_per_phoneme, embed_dim, hidden_channels and layers must be >= 1");
        }
        PriorParams::new(self.omega)?;
        self.schedule.validate()
    }

    pub fn model_config(&self, feature_dim: usize, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            feature_dim,
            vocab_size,
            states_per_phoneme: self.states_per_phoneme,
            embed_dim: self.embed_dim,
            hidden_channels: self.hidden_channels,
            layers: self.layers,
        }
    }
}

/// `L = L_align + w_aco * L_aco + w_lng * L_lng`.
pub fn total_loss(l_align: f64, l_aco: f64, l_lng: f64, config: &TrainConfig) -> f64 {
    l_align + config.w_aco * l_aco + config.w_lng * l_lng
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentGrads {
    pub grad_acoustic: Array2<f64>,
    pub grad_linguistic: Array2<f64>,
    pub loss: f64,
    pub gamma: OccupancyMatrix,
    pub gamma_prime: OccupancyMatrix,
}

/// Embedding gradients of the forward-sum loss.
///
/// The lattice gradient is taken as `-gamma'` (the annealed occupancy, or
/// plain occupancy with annealing off) and chained through the log-softmax
/// matching into both embedding matrices. The prior is constant.
pub fn alignment_backward(
    lattice: &LogLikelihoodLattice,
    acoustic: ArrayView2<f64>,
    linguistic: ArrayView2<f64>,
    sigma: f64,
    config: &TrainConfig,
) -> Result<AlignmentGrads> {
    if lattice.num_frames() != acoustic.nrows() || lattice.num_states() != linguistic.nrows() {
        return Err(AlignError::dims(format!(
            "lattice {}x{} vs embeddings {}/{}",
            lattice.num_frames(),
            lattice.num_states(),
            acoustic.nrows(),
            linguistic.nrows()
        )));
    }
    let (loss, gamma) = forward_backward(lattice)?;
    let gamma_prime = if config.use_annealing {
        anneal_occupancy(&gamma, sigma, config.anneal_normalize)?
    } else {
        gamma.clone()
    };
    let log_f = log_matching(acoustic, linguistic)?;
    // dL/dd(t,k) for squared distances d: the logits are -d, and
    // dL/dlogit = -gamma' + f * sum_k gamma'
    let gp = gamma_prime.gamma();
    let mass = gp.sum_axis(Axis(1));
    let mut d_dist = Array2::zeros(log_f.dim());
    ndarray::Zip::indexed(&mut d_dist)
        .and(gp)
        .and(&log_f)
        .for_each(|(t, _), a, &g, &lf| *a = g - lf.exp() * mass[t]);
    let row = d_dist.sum_axis(Axis(1)).insert_axis(Axis(1));
    let col = d_dist.sum_axis(Axis(0)).insert_axis(Axis(1));
    let grad_acoustic = 2.0 * (&acoustic * &row - d_dist.dot(&linguistic));
    let grad_linguistic = 2.0 * (&linguistic * &col - d_dist.t().dot(&acoustic));
    Ok(AlignmentGrads {
        grad_acoustic,
        grad_linguistic,
        loss,
        gamma,
        gamma_prime,
    })
}

/// One training or evaluation utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub features: FeatureMatrix,
    pub phonemes: PhonemeSequence,
    pub reference: Option<BoundarySet>,
}

impl Utterance {
    pub fn is_feasible(&self, states_per_phoneme: usize) -> bool {
        self.features.num_frames() >= self.phonemes.len() * states_per_phoneme
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Number of optimizer updates completed, this one included.
    pub step: u64,
    pub loss: f64,
    pub l_align: f64,
    pub l_aco: f64,
    pub l_lng: f64,
    pub sigma: f64,
}

impl StepReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}",
            self.step, self.loss, self.l_align, self.l_aco, self.l_lng, self.sigma
        )
    }
}

pub const METRICS_HEADER: &str = "step\tL\tL_align\tL_aco\tL_lng\tsigma";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtteranceLosses {
    pub l_align: f64,
    pub l_aco: f64,
    pub l_lng: f64,
}

/// Reparameterization noise for one utterance, `T x E` and `K x E`.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeNoise {
    pub acoustic: Array2<f64>,
    pub linguistic: Array2<f64>,
}

/// Losses of one utterance with their parameter gradients accumulated into
/// `grads`. `L_align` is divided by the frame count. The VAE terms are
/// computed only when `noise` is given.
pub fn utterance_objective(
    model: &AlignerModel,
    store: &ParameterStore,
    cfg: &TrainConfig,
    utt: &Utterance,
    sigma: f64,
    noise: Option<&VaeNoise>,
    grads: &mut Gradients,
) -> Result<UtteranceLosses> {
    let states = expand_to_states(&utt.phonemes, cfg.states_per_phoneme)?;
    let (aco, aco_cache) = model.encode_acoustic(store, &utt.features)?;
    let (lng, lng_cache) = model.encode_linguistic(store, &states)?;

    let lattice = utterance_lattice(&aco.mu, &lng.mu, cfg)?;
    let frames = utt.features.num_frames() as f64;
    let ab = alignment_backward(&lattice, aco.mu.view(), lng.mu.view(), sigma, cfg)?;
    let mut g_mu_a = ab.grad_acoustic / frames;
    let mut g_lv_a = Array2::zeros(aco.logvar.dim());
    let mut g_mu_l = ab.grad_linguistic / frames;
    let mut g_lv_l = Array2::zeros(lng.logvar.dim());
    let mut losses = UtteranceLosses {
        l_align: ab.loss / frames,
        l_aco: 0.0,
        l_lng: 0.0,
    };

    if let Some(noise) = noise {
        let z_a = reparameterize(&aco, &noise.acoustic)?;
        let (recon, dec_cache) = model.decode_acoustic(store, &z_a)?;
        let (mse, g_recon) = mse_loss(&recon, utt.features.frames())?;
        losses.l_aco = mse + cfg.kl_beta * kl_standard_normal(&aco);
        let g_z = model
            .acoustic_decoder
            .backward(store, &dec_cache, &(g_recon * cfg.w_aco), grads)?;
        let (gm, gl) = reparameterize_backward(&aco, &noise.acoustic, &g_z);
        let (km, kl) = kl_standard_normal_grad(&aco);
        let kw = cfg.w_aco * cfg.kl_beta;
        g_mu_a = g_mu_a + gm + km * kw;
        g_lv_a = g_lv_a + gl + kl * kw;

        let z_l = reparameterize(&lng, &noise.linguistic)?;
        let (logits, dec_cache) = model.decode_linguistic(store, &z_l)?;
        let targets: Vec<usize> = states.entries().iter().map(|e| e.phoneme).collect();
        let (ce, g_logits) = cross_entropy_loss(&logits, &targets)?;
        losses.l_lng = ce + cfg.kl_beta * kl_standard_normal(&lng);
        let g_z = model
            .linguistic_decoder
            .backward(store, &dec_cache, &(g_logits * cfg.w_lng), grads)?;
        let (gm, gl) = reparameterize_backward(&lng, &noise.linguistic, &g_z);
        let (km, kl) = kl_standard_normal_grad(&lng);
        let kw = cfg.w_lng * cfg.kl_beta;
        g_mu_l = g_mu_l + gm + km * kw;
        g_lv_l = g_lv_l + gl + kl * kw;
    }

    model
        .acoustic_encoder
        .backward(store, &aco_cache, &g_mu_a, &g_lv_a, grads)?;
    let g_in = model
        .linguistic_encoder
        .backward(store, &lng_cache, &g_mu_l, &g_lv_l, grads)?;
    model.linguistic_input.backward(&states, &g_in, grads);
    Ok(losses)
}

/// Model, parameters and optimizer state for one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub model: AlignerModel,
    pub store: ParameterStore,
    noise_rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig, vocab: Vocabulary, feature_dim: usize) -> Result<Self> {
        config.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParameterStore::new();
        let model = AlignerModel::new(config.model_config(feature_dim, vocab.len()), &mut store, &mut init_rng)?;
        Ok(Self {
            config,
            vocab,
            model,
            store,
            noise_rng: ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9)),
        })
    }

    /// Restores a trainer from a checkpoint, including the optimizer state.
    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let mut trainer = Trainer::new(ckpt.config, ckpt.vocab, ckpt.feature_dim)?;
        ckpt.store.copy_into(&mut trainer.store)?;
        Ok(trainer)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config,
            vocab: self.vocab.clone(),
            feature_dim: self.model.config.feature_dim,
            store: self.store.clone(),
        }
    }

    /// Forward, composed backward and one Adam update over `batch`.
    pub fn train_step(&mut self, batch: &[&Utterance]) -> Result<StepReport> {
        if batch.is_empty() {
            return Err(AlignError::InvalidParameter("empty batch".into()));
        }
        let step = self.store.step();
        let sigma = schedule_sigma(step, &self.config.schedule);
        let mut grads = self.store.zero_grads();
        let mut sum = UtteranceLosses {
            l_align: 0.0,
            l_aco: 0.0,
            l_lng: 0.0,
        };
        for utt in batch {
            let mut g = self.store.zero_grads();
            let noise = if self.config.use_vae {
                let (m, k) = (utt.features.num_frames(), utt.phonemes.len() * self.config.states_per_phoneme);
                let e = self.config.embed_dim;
                Some(VaeNoise {
                    acoustic: standard_normal(m, e, &mut self.noise_rng),
                    linguistic: standard_normal(k, e, &mut self.noise_rng),
                })
            } else {
                None
            };
            let l = utterance_objective(&self.model, &self.store, &self.config, utt, sigma, noise.as_ref(), &mut g)?;
            grads.accumulate(&g);
            sum.l_align += l.l_align;
            sum.l_aco += l.l_aco;
            sum.l_lng += l.l_lng;
        }
        let n = batch.len() as f64;
        grads.scale(1.0 / n);
        let (l_align, l_aco, l_lng) = (sum.l_align / n, sum.l_aco / n, sum.l_lng / n);
        let loss = total_loss(l_align, l_aco, l_lng, &self.config);
        if !loss.is_finite() {
            return Err(AlignError::Diverged(format!(
                "non-finite loss at step {} (L_align={l_align}, L_aco={l_aco}, L_lng={l_lng})",
                step + 1
            )));
        }
        self.store.adam_step(&grads, &AdamConfig::with_lr(self.config.lr))?;
        Ok(StepReport {
            step: self.store.step(),
            loss,
            l_align,
            l_aco,
            l_lng,
            sigma,
        })
    }

    /// Viterbi decoding of one utterance with posterior-mean embeddings.
    pub fn decode(&self, features: &FeatureMatrix, phonemes: &PhonemeSequence) -> Result<(AlignmentPath, BoundarySet)> {
        decode(&self.model, &self.store, &self.config, features, phonemes)
    }

    pub fn evaluate(&self, utterances: &[Utterance]) -> Result<MetricsReport> {
        evaluate(&self.model, &self.store, &self.config, utterances)
    }
}

pub fn utterance_lattice(acoustic: &Array2<f64>, linguistic: &Array2<f64>, cfg: &TrainConfig) -> Result<LogLikelihoodLattice> {
    let log_f = log_matching(acoustic.view(), linguistic.view())?;
    if cfg.use_prior {
        let prior = log_position_prior(log_f.nrows(), log_f.ncols(), PriorParams::new(cfg.omega)?)?;
        build_lattice(&log_f, &prior, true)
    } else {
        LogLikelihoodLattice::new(log_f)
    }
}

pub fn decode(
    model: &AlignerModel,
    store: &ParameterStore,
    cfg: &TrainConfig,
    features: &FeatureMatrix,
    phonemes: &PhonemeSequence,
) -> Result<(AlignmentPath, BoundarySet)> {
    let states: StateSequence = expand_to_states(phonemes, cfg.states_per_phoneme)?;
    if features.num_frames() < states.len() {
        return Err(AlignError::NoFeasiblePath {
            frames: features.num_frames(),
            states: states.len(),
        });
    }
    let (aco, _) = model.encode_acoustic(store, features)?;
    let (lng, _) = model.encode_linguistic(store, &states)?;
    let lattice = utterance_lattice(&aco.mu, &lng.mu, cfg)?;
    let path = viterbi(&lattice)?;
    let bounds = path_to_boundaries(&path, &states, features.frame_shift())?;
    Ok((path, bounds))
}

/// Pooled boundary metrics over all utterances that carry a reference.
pub fn evaluate(
    model: &AlignerModel,
    store: &ParameterStore,
    cfg: &TrainConfig,
    utterances: &[Utterance],
) -> Result<MetricsReport> {
    let mut pooled = Vec::new();
    for utt in utterances {
        let Some(reference) = &utt.reference else {
            continue;
        };
        if !utt.is_feasible(cfg.states_per_phoneme) {
            continue;
        }
        let (_, pred) = decode(model, store, cfg, &utt.features, &utt.phonemes)?;
        pooled.extend(boundary_errors(&pred, reference)?);
    }
    metrics(&pooled)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub steps: Vec<StepReport>,
    pub evals: Vec<(u64, MetricsReport)>,
    pub processed: usize,
    pub skipped: usize,
    pub checkpoints: Vec<PathBuf>,
}

pub fn checkpoint_name(step: u64) -> String {
    format!("step_{step:08}.ckpt")
}

/// Runs `config.max_steps` updates over seeded shuffled batches.
///
/// Utterances with fewer frames than states are skipped. Every
/// `eval_interval` steps the dev set is decoded and scored, and a checkpoint
/// is written when `out_dir` is given (plus one before the first step).
pub fn train_loop(
    train: &[Utterance],
    dev: &[Utterance],
    vocab: &Vocabulary,
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<(Trainer, TrainReport)> {
    config.validate()?;
    let usable: Vec<&Utterance> = train
        .iter()
        .filter(|u| {
            let ok = u.is_feasible(config.states_per_phoneme);
            if !ok {
                log::warn!(
                    "skipping {}: {} frames < {} states",
                    u.id,
                    u.features.num_frames(),
                    u.phonemes.len() * config.states_per_phoneme
                );
            }
            ok
        })
        .collect();
    let mut report = TrainReport {
        processed: usable.len(),
        skipped: train.len() - usable.len(),
        ..TrainReport::default()
    };
    let Some(first) = usable.first() else {
        return Err(AlignError::InvalidParameter("no trainable utterances".into()));
    };
    let feature_dim = first.features.dim();
    let mut trainer = Trainer::new(*config, vocab.clone(), feature_dim)?;

    let mut log_lines = vec![METRICS_HEADER.to_string()];
    let mut eval_lines = vec!["step\tmae_ms\tmedian_ms\ttol20\ttol50\tn".to_string()];
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| AlignError::io(dir, e))?;
        atomic_write(&dir.join("config.resolved"), config_to_text(config).as_bytes())?;
        report.checkpoints.push(save(&trainer, dir)?);
    }

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut cursor = order.len();
    for _ in 0..config.max_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(usable[order[cursor]]);
            cursor += 1;
        }
        let entry = trainer.train_step(&batch)?;
        log_lines.push(entry.to_tsv());
        report.steps.push(entry);

        if entry.step % config.eval_interval == 0 {
            if dev.iter().any(|u| u.reference.is_some()) {
                let m = trainer.evaluate(dev)?;
                log::info!("step {}: L={:.4} L_align={:.4} sigma={:.3} dev {}", entry.step, entry.loss, entry.l_align, entry.sigma, m.to_key_values());
                eval_lines.push(format!(
                    "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
                    entry.step, m.mae_ms, m.median_ms, m.tol20_pct, m.tol50_pct, m.n_boundaries
                ));
                report.evals.push((entry.step, m));
            } else {
                log::info!("step {}: L={:.4} L_align={:.4} sigma={:.3}", entry.step, entry.loss, entry.l_align, entry.sigma);
            }
            if let Some(dir) = out_dir {
                report.checkpoints.push(save(&trainer, dir)?);
                write_lines(&dir.join("metrics.tsv"), &log_lines)?;
                write_lines(&dir.join("dev_eval.tsv"), &eval_lines)?;
            }
        }
    }
    if let Some(dir) = out_dir {
        let last = checkpoint_name(trainer.store.step());
        if report.checkpoints.last().and_then(|p| p.file_name()) != Some(last.as_ref()) {
            report.checkpoints.push(save(&trainer, dir)?);
        }
        write_lines(&dir.join("metrics.tsv"), &log_lines)?;
        write_lines(&dir.join("dev_eval.tsv"), &eval_lines)?;
    }
    Ok((trainer, report))
}

fn save(trainer: &Trainer, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(checkpoint_name(trainer.store.step()));
    write_checkpoint(&path, &trainer.checkpoint())?;
    Ok(path)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, compare_gradients};
    use crate::io::checkpoint::read_checkpoint;
    use crate::synth::{generate, SynthSpec};
    use rand::Rng;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            embed_dim: 3,
            hidden_channels: 4,
            layers: 1,
            lr: 1e-3,
            batch_size: 2,
            max_steps: 4,
            eval_interval: 2,
            omega: 0.1,
            ..TrainConfig::default()
        }
    }

    fn tiny_corpus() -> (Vec<Utterance>, Vec<Utterance>, Vocabulary) {
        let spec = SynthSpec {
            n_utts: 5,
            n_dev: 2,
            vocab_size: 4,
            feature_dim: 3,
            min_dur: 1,
            max_dur: 3,
            ..SynthSpec::default()
        };
        let c = generate(&spec).unwrap();
        (c.train_utterances().unwrap(), c.dev_utterances().unwrap(), c.vocabulary())
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0))
    }

    fn lattice_for(a: &Array2<f64>, l: &Array2<f64>, cfg: &TrainConfig) -> LogLikelihoodLattice {
        utterance_lattice(a, l, cfg).unwrap()
    }

    #[test]
    fn total_loss_is_weighted_sum() {
        let cfg = TrainConfig::default();
        assert_eq!((cfg.w_aco, cfg.w_lng), (0.1, 0.1));
        assert!((total_loss(1.0, 2.0, 3.0, &cfg) - 1.5).abs() < 1e-15);
        let off = TrainConfig {
            w_aco: 0.0,
            w_lng: 0.0,
            ..cfg
        };
        assert_eq!(total_loss(1.25, 7.0, 9.0, &off), 1.25);
    }

    #[test]
    fn alignment_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = TrainConfig {
            use_annealing: false,
            ..TrainConfig::default()
        };
        let (t, k, e) = (5, 3, 4);
        let a = random(&mut rng, t, e);
        let l = random(&mut rng, k, e);
        let ab = alignment_backward(&lattice_for(&a, &l, &cfg), a.view(), l.view(), 1.0, &cfg).unwrap();
        let x: Vec<f64> = a.iter().chain(l.iter()).copied().collect();
        let numeric = central_difference(&x, 1e-5, |x| {
            let a = Array2::from_shape_vec((t, e), x[..t * e].to_vec()).unwrap();
            let l = Array2::from_shape_vec((k, e), x[t * e..].to_vec()).unwrap();
            crate::dp::forward_sum(&lattice_for(&a, &l, &cfg)).unwrap().0
        });
        let analytic: Vec<f64> = ab.grad_acoustic.iter().chain(ab.grad_linguistic.iter()).copied().collect();
        let r = compare_gradients(&analytic, &numeric, 1e-4, 1e-6);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn minimal_sigma_matches_plain_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let on = TrainConfig::default();
        let off = TrainConfig {
            use_annealing: false,
            ..on
        };
        let a = random(&mut rng, 7, 4);
        let l = random(&mut rng, 4, 4);
        let lat = lattice_for(&a, &l, &on);
        let g_on = alignment_backward(&lat, a.view(), l.view(), on.schedule.sigma_min, &on).unwrap();
        let g_off = alignment_backward(&lat, a.view(), l.view(), 5.0, &off).unwrap();
        let diff = (&g_on.grad_acoustic - &g_off.grad_acoustic)
            .iter()
            .chain((&g_on.grad_linguistic - &g_off.grad_linguistic).iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-8, "{diff}");
        assert_eq!(g_off.gamma, g_off.gamma_prime);
    }

    #[test]
    fn single_frame_single_state() {
        let cfg = TrainConfig::default();
        let a = Array2::from_elem((1, 2), 0.3);
        let l = Array2::from_elem((1, 2), -0.7);
        let ab = alignment_backward(&lattice_for(&a, &l, &cfg), a.view(), l.view(), 3.0, &cfg).unwrap();
        assert_eq!(ab.gamma.gamma()[[0, 0]], 1.0);
        assert_eq!(ab.gamma_prime.gamma()[[0, 0]], 1.0);
        assert!(ab.grad_acoustic.iter().all(|&v| v == 0.0));
        assert!(ab.grad_linguistic.iter().all(|&v| v == 0.0));
        assert_eq!(ab.loss, 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let cfg = TrainConfig::default();
        let a = Array2::zeros((4, 2));
        let l = Array2::zeros((2, 2));
        let lat = lattice_for(&a, &l, &cfg);
        assert!(alignment_backward(&lat, a.view(), Array2::zeros((3, 2)).view(), 1.0, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                w_aco: -0.1,
                ..TrainConfig::default()
            },
            TrainConfig {
                omega: 0.0,
                ..TrainConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn identical_runs_identical_losses() {
        let (train, dev, vocab) = tiny_corpus();
        let (_, a) = train_loop(&train, &dev, &vocab, &tiny_config(), None).unwrap();
        let (_, b) = train_loop(&train, &dev, &vocab, &tiny_config(), None).unwrap();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.evals, b.evals);
        for s in &a.steps {
            assert_eq!(s.loss, total_loss(s.l_align, s.l_aco, s.l_lng, &tiny_config()));
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let (train, _, vocab) = tiny_corpus();
        let batch: Vec<&Utterance> = train.iter().take(2).collect();
        for use_vae in [true, false] {
            let cfg = TrainConfig {
                lr: 0.0,
                use_vae,
                ..tiny_config()
            };
            let mut trainer = Trainer::new(cfg, vocab.clone(), 3).unwrap();
            let before: Vec<_> = trainer.store.params().iter().map(|p| p.value.clone()).collect();
            let r1 = trainer.train_step(&batch).unwrap();
            let r2 = trainer.train_step(&batch).unwrap();
            let after: Vec<_> = trainer.store.params().iter().map(|p| p.value.clone()).collect();
            assert_eq!(before, after);
            assert_eq!(r1.l_align, r2.l_align);
            if !use_vae {
                assert_eq!((r1.loss, r1.l_aco, r1.l_lng), (r2.loss, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn no_steps_writes_initial_checkpoint_only() {
        let (train, dev, vocab) = tiny_corpus();
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            max_steps: 0,
            ..tiny_config()
        };
        let (_, report) = train_loop(&train, &dev, &vocab, &cfg, Some(dir.path())).unwrap();
        assert_eq!(report.checkpoints, vec![dir.path().join("step_00000000.ckpt")]);
        assert!(report.steps.is_empty() && report.evals.is_empty());
        let ckpts = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ckpt"))
            .count();
        assert_eq!(ckpts, 1);
    }

    #[test]
    fn eval_cadence_and_resume() {
        let (train, dev, vocab) = tiny_corpus();
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            eval_interval: 100,
            max_steps: 300,
            batch_size: 1,
            embed_dim: 2,
            hidden_channels: 2,
            ..tiny_config()
        };
        let (trainer, report) = train_loop(&train, &dev, &vocab, &cfg, Some(dir.path())).unwrap();
        assert_eq!(report.evals.iter().map(|e| e.0).collect::<Vec<_>>(), vec![100, 200, 300]);
        assert_eq!(report.checkpoints.len(), 4);
        let metrics = std::fs::read_to_string(dir.path().join("metrics.tsv")).unwrap();
        assert_eq!(metrics.lines().count(), 301);
        assert_eq!(metrics.lines().next().unwrap(), METRICS_HEADER);
        let ck = read_checkpoint(report.checkpoints.last().unwrap()).unwrap();
        let restored = Trainer::from_checkpoint(ck).unwrap();
        assert_eq!(restored.store, trainer.store);
        assert_eq!(restored.decode(&dev[0].features, &dev[0].phonemes).unwrap(), trainer.decode(&dev[0].features, &dev[0].phonemes).unwrap());
    }

    #[test]
    fn short_utterances_are_skipped_and_counted() {
        let (mut train, dev, vocab) = tiny_corpus();
        let short = Utterance {
            id: "short".into(),
            features: FeatureMatrix::new(Array2::zeros((2, 3)), 0.01).unwrap(),
            phonemes: PhonemeSequence::new(vec![0, 1], 4).unwrap(),
            reference: None,
        };
        train.push(short);
        let (_, report) = train_loop(&train, &dev, &vocab, &tiny_config(), None).unwrap();
        assert_eq!((report.processed, report.skipped), (5, 1));
        assert_eq!(report.processed + report.skipped, train.len());
        assert!(train_loop(&train[5..], &dev, &vocab, &tiny_config(), None).is_err());
    }

    #[test]
    fn decode_rejects_infeasible() {
        let (_, dev, vocab) = tiny_corpus();
        let trainer = Trainer::new(tiny_config(), vocab, 3).unwrap();
        let f = FeatureMatrix::new(Array2::zeros((2, 3)), 0.01).unwrap();
        let p = PhonemeSequence::new(vec![0, 1], 4).unwrap();
        assert!(matches!(trainer.decode(&f, &p), Err(AlignError::NoFeasiblePath { frames: 2, states: 6 })));
        let (path, bounds) = trainer.decode(&dev[0].features, &dev[0].phonemes).unwrap();
        assert_eq!(path.states.len(), dev[0].features.num_frames());
        assert_eq!(bounds.phonemes(), dev[0].phonemes.ids());
    }
}
