//! Self-check suites: DP oracles, gradient identities, annealing limits,
//! neural finite-difference checks and metric arithmetic.

use std::fmt;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::anneal::{anneal_occupancy, gaussian_filter};
use crate::dp::oracle::{brute_force_best_path, brute_force_logsum, brute_force_occupancy};
use crate::dp::{forward_backward, forward_sum, viterbi, OccupancyMatrix};
use crate::error::Result;
use crate::eval::{metrics, tolerance_error_rate};
use crate::gradcheck::{central_difference, compare_gradients, GradCheckReport};
use crate::lattice::{
    build_lattice, expand_to_states, log_matching, log_position_prior, FeatureMatrix, LogLikelihoodLattice,
    PhonemeSequence, PriorParams,
};
use crate::nn::conv::{conv1d_backward, conv1d_forward};
use crate::nn::stack::{Decoder, Encoder, LinguisticInputTable};
use crate::nn::vae::{kl_standard_normal, kl_standard_normal_grad, reparameterize, reparameterize_backward, VaeHead};
use crate::nn::{cross_entropy_loss, mse_loss, AlignerModel, Gradients, ParameterStore};
use crate::train::{alignment_backward, utterance_objective, TrainConfig, Utterance, VaeNoise};

/// Finite-difference step for 64-bit checks.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance for 64-bit gradient checks.
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Coordinates whose analytic and numeric values differ by less than this
/// pass regardless of relative error; central-difference rounding noise is
/// about `1e-16 * |f| / h`.
pub const GRAD_ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * normal(rng))
}

/// Random lattice, half of the time with a position prior mixed in.
pub fn random_lattice(rng: &mut ChaCha8Rng, frames: usize, states: usize) -> Result<LogLikelihoodLattice> {
    let raw = random_matrix(rng, frames, states, 2.0);
    if rng.gen_bool(0.5) {
        let omega = rng.gen_range(0.005..2.0);
        let prior = log_position_prior(frames, states, PriorParams::new(omega)?)?;
        build_lattice(&raw, &prior, true)
    } else {
        LogLikelihoodLattice::new(raw)
    }
}

/// Forward sum, occupancy and Viterbi against exhaustive path enumeration.
pub fn dp_oracle_equivalence(seed: u64, instances: usize) -> CheckResult {
    timed("dp oracle equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst_z, mut worst_g) = (0.0f64, 0.0f64);
        let mut viterbi_mismatch = 0;
        for _ in 0..instances {
            let t = rng.gen_range(1..=8);
            let k = rng.gen_range(1..=t.min(5));
            let lat = random_lattice(&mut rng, t, k)?;
            let (loss, gamma) = forward_backward(&lat)?;
            let (loss_fwd, _) = forward_sum(&lat)?;
            let want = -brute_force_logsum(&lat)?;
            let rel = |a: f64| (a - want).abs() / want.abs().max(1e-300);
            worst_z = worst_z.max(rel(loss)).max(rel(loss_fwd));
            let brute = brute_force_occupancy(&lat)?;
            worst_g = worst_g.max((gamma.gamma() - &brute).iter().fold(0.0, |m, v| m.max(v.abs())));
            let fast = viterbi(&lat)?;
            let slow = brute_force_best_path(&lat)?;
            if fast.log_score != slow.log_score || fast.states != slow.states {
                viterbi_mismatch += 1;
            }
        }
        let passed = worst_z <= 1e-9 && worst_g <= 1e-9 && viterbi_mismatch == 0;
        Ok((
            passed,
            format!(
                "{instances} lattices: max rel logZ err {worst_z:.2e}, max occupancy err {worst_g:.2e}, viterbi mismatches {viterbi_mismatch}"
            ),
        ))
    })
}

/// Finite differences of the forward-sum loss in every lattice cell equal
/// minus the occupancy.
pub fn occupancy_gradient_identity(seed: u64, instances: usize) -> CheckResult {
    timed("occupancy gradient identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let t = rng.gen_range(1..=8);
            let k = rng.gen_range(1..=t.min(5));
            let lat = random_lattice(&mut rng, t, k)?;
            let (_, gamma) = forward_backward(&lat)?;
            let base: Vec<f64> = lat.values().iter().copied().collect();
            let numeric = central_difference(&base, FD_STEP, |x| {
                let v = Array2::from_shape_vec((t, k), x.to_vec()).expect("shape");
                forward_sum(&LogLikelihoodLattice::new(v).expect("finite")).expect("feasible").0
            });
            for (n, g) in numeric.iter().zip(gamma.gamma().iter()) {
                worst = worst.max((n + g).abs());
            }
        }
        Ok((worst <= 1e-4, format!("{instances} lattices: max |dL/dlog b + gamma| {worst:.2e}")))
    })
}

/// Embedding gradients from `alignment_backward` with annealing off against
/// finite differences of matching, prior, lattice and forward sum.
pub fn embedding_gradient_check(seed: u64, instances: usize) -> CheckResult {
    timed("embedding gradient chain", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst, mut worst_abs) = (0.0f64, 0.0f64);
        let mut failures = 0;
        for i in 0..instances {
            let t = rng.gen_range(1..=6);
            let k = rng.gen_range(1..=t.min(4));
            let e = rng.gen_range(1..=8);
            let cfg = TrainConfig {
                use_annealing: false,
                use_prior: i % 2 == 0,
                omega: rng.gen_range(0.01..1.0),
                ..TrainConfig::default()
            };
            let a = random_matrix(&mut rng, t, e, 0.7);
            let l = random_matrix(&mut rng, k, e, 0.7);
            let prior = log_position_prior(t, k, PriorParams::new(cfg.omega)?)?;
            let pipeline = |a: &Array2<f64>, l: &Array2<f64>| -> f64 {
                let log_f = log_matching(a.view(), l.view()).expect("shapes");
                let lat = build_lattice(&log_f, &prior, cfg.use_prior).expect("lattice");
                forward_sum(&lat).expect("feasible").0
            };
            let lat = build_lattice(&log_matching(a.view(), l.view())?, &prior, cfg.use_prior)?;
            let ab = alignment_backward(&lat, a.view(), l.view(), 1.0, &cfg)?;
            let mut x: Vec<f64> = a.iter().chain(l.iter()).copied().collect();
            let numeric = central_difference(&x, FD_STEP, |x| {
                let a = Array2::from_shape_vec((t, e), x[..t * e].to_vec()).expect("shape");
                let l = Array2::from_shape_vec((k, e), x[t * e..].to_vec()).expect("shape");
                pipeline(&a, &l)
            });
            x.clear();
            x.extend(ab.grad_acoustic.iter().chain(ab.grad_linguistic.iter()));
            let r = compare_gradients(&x, &numeric, GRAD_REL_TOL, GRAD_ABS_FLOOR);
            worst = worst.max(r.max_rel_err);
            worst_abs = worst_abs.max(r.max_abs_err);
            failures += usize::from(!r.passed);
        }
        Ok((
            failures == 0,
            format!("{instances} instances: max abs err {worst_abs:.2e}, max rel err where abs err > 1e-8 {worst:.2e}, failures {failures}"),
        ))
    })
}

/// Limits of the annealing filter.
pub fn annealing_limits(seed: u64, instances: usize) -> CheckResult {
    timed("annealing limits", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut small_sigma_err = 0.0f64;
        let mut row_sum_err = 0.0f64;
        for _ in 0..instances {
            let t = rng.gen_range(1..=8);
            let k = rng.gen_range(1..=t.min(6));
            let (_, gamma) = forward_backward(&random_lattice(&mut rng, t, k)?)?;
            for normalize in [true, false] {
                let g = anneal_occupancy(&gamma, 1e-3, normalize)?;
                let d = (g.gamma() - gamma.gamma()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                small_sigma_err = small_sigma_err.max(d);
            }
            for sigma in [1e-3, 0.3, 1.0, 2.5, 30.0] {
                let g = anneal_occupancy(&gamma, sigma, true)?;
                for row in g.gamma().rows() {
                    row_sum_err = row_sum_err.max((row.sum() - 1.0).abs());
                }
            }
        }

        let states = 11;
        let centre = 5;
        let mut spike = Array2::zeros((1, states));
        spike[[0, centre]] = 1.0;
        let out = anneal_occupancy(&OccupancyMatrix::from_array(spike), 1.0, true)?;
        let row = out.gamma().row(0);
        let filter = gaussian_filter(1.0, 4)?;
        let mut spike_err = 0.0f64;
        for (j, w) in filter.iter().enumerate() {
            spike_err = spike_err.max((row[centre - 4 + j] - w).abs());
        }
        for (j, w) in row.iter().enumerate() {
            if j + 4 < centre || j > centre + 4 {
                spike_err = spike_err.max(w.abs());
            }
        }
        let neighbour = [row[centre - 1], row[centre + 1]]
            .iter()
            .fold(0.0f64, |m, v| m.max((v / row[centre] - (-0.5f64).exp()).abs()));
        spike_err = spike_err.max(neighbour);

        let passed = small_sigma_err <= 1e-9 && spike_err <= 1e-9 && row_sum_err <= 1e-9;
        Ok((
            passed,
            format!(
                "sigma=1e-3 max|g'-g| {small_sigma_err:.2e}; spike err {spike_err:.2e}; max row-sum err {row_sum_err:.2e}"
            ),
        ))
    })
}

/// Metric arithmetic on a fixed example plus random ordering checks.
pub fn metric_arithmetic(seed: u64, instances: usize) -> CheckResult {
    timed("metric arithmetic", || {
        let m = metrics(&[0.0, 10.0, 25.0, 60.0])?;
        let exact = m.mae_ms == 23.75 && m.median_ms == 17.5 && m.tol20_pct == 50.0 && m.tol50_pct == 25.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ordered = true;
        for _ in 0..instances {
            let n = rng.gen_range(1..40);
            let errs: Vec<f64> = (0..n).map(|_| rng.gen_range(-120.0..120.0)).collect();
            ordered &= tolerance_error_rate(&errs, 20.0) >= tolerance_error_rate(&errs, 50.0);
        }
        Ok((
            exact && ordered,
            format!(
                "metrics(0,10,25,60) = ({}, {}, {}%, {}%); tol20 >= tol50 on {instances} random sets: {ordered}",
                m.mae_ms, m.median_ms, m.tol20_pct, m.tol50_pct
            ),
        ))
    })
}

fn flat_params(store: &ParameterStore) -> Vec<f64> {
    store.params().iter().flat_map(|p| p.value.iter().copied()).collect()
}

fn set_flat_params(store: &mut ParameterStore, values: &[f64]) {
    let mut it = values.iter();
    for p in store.params_mut() {
        p.value.iter_mut().for_each(|v| *v = *it.next().expect("length"));
    }
}

fn randomize(store: &mut ParameterStore, rng: &mut ChaCha8Rng, scale: f64) {
    for p in store.params_mut() {
        p.value.mapv_inplace(|_| scale * normal(rng));
    }
}

/// Checks parameter gradients of a scalar objective built over `store`.
fn check_store<F>(store: &ParameterStore, objective: F) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore, &mut Gradients) -> Result<f64>,
{
    let mut grads = store.zero_grads();
    objective(store, &mut grads)?;
    let mut probe = store.clone();
    let x = flat_params(store);
    let numeric = central_difference(&x, FD_STEP, |x| {
        set_flat_params(&mut probe, x);
        let mut scratch = probe.zero_grads();
        objective(&probe, &mut scratch).expect("objective evaluates")
    });
    Ok(compare_gradients(&grads.flatten(), &numeric, GRAD_REL_TOL, GRAD_ABS_FLOOR))
}

fn check_inputs<F>(x: &Array2<f64>, analytic: &Array2<f64>, objective: F) -> GradCheckReport
where
    F: Fn(&Array2<f64>) -> f64,
{
    let flat: Vec<f64> = x.iter().copied().collect();
    let numeric = central_difference(&flat, FD_STEP, |v| {
        objective(&Array2::from_shape_vec(x.raw_dim(), v.to_vec()).expect("shape"))
    });
    let a: Vec<f64> = analytic.iter().copied().collect();
    compare_gradients(&a, &numeric, GRAD_REL_TOL, GRAD_ABS_FLOOR)
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum()
}

#[derive(Default)]
struct Tally {
    checks: usize,
    failed: Vec<String>,
    worst: f64,
    worst_abs: f64,
}

impl Tally {
    fn add(&mut self, what: &str, r: GradCheckReport) {
        self.checks += 1;
        self.worst = self.worst.max(r.max_rel_err);
        self.worst_abs = self.worst_abs.max(r.max_abs_err);
        if !r.passed {
            self.failed.push(format!("{what} (max rel {:.1e})", r.max_rel_err));
        }
    }
}

fn conv_case(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let c_in = rng.gen_range(1..=4);
    let c_out = rng.gen_range(1..=4);
    let kernel = [1, 3, 5][rng.gen_range(0..3)];
    let len = rng.gen_range(1..=7);
    let w = Array3::from_shape_simple_fn((c_out, c_in, kernel), || normal(rng));
    let b = Array1::from_shape_simple_fn(c_out, || normal(rng));
    let x = random_matrix(rng, c_in, len, 1.0);
    let r = random_matrix(rng, c_out, len, 1.0);
    let g = conv1d_backward(w.view(), x.view(), r.view())?;
    let nw = w.len();
    let nb = b.len();
    let mut flat: Vec<f64> = w.iter().chain(b.iter()).chain(x.iter()).copied().collect();
    let numeric = central_difference(&flat, FD_STEP, |v| {
        let w = Array3::from_shape_vec(w.raw_dim(), v[..nw].to_vec()).expect("shape");
        let b = Array1::from_vec(v[nw..nw + nb].to_vec());
        let x = Array2::from_shape_vec(x.raw_dim(), v[nw + nb..].to_vec()).expect("shape");
        dot(&conv1d_forward(w.view(), b.view(), x.view()).expect("conv"), &r)
    });
    flat.clear();
    flat.extend(g.weight.iter().chain(g.bias.iter()).chain(g.input.iter()));
    tally.add("conv1d", compare_gradients(&flat, &numeric, GRAD_REL_TOL, GRAD_ABS_FLOOR));
    Ok(())
}

fn encoder_case(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let c_in = rng.gen_range(1..=3);
    let hidden = rng.gen_range(1..=4);
    let layers = rng.gen_range(1..=2);
    let e = rng.gen_range(1..=3);
    let len = rng.gen_range(1..=6);
    let mut store = ParameterStore::new();
    let enc = Encoder::new(&mut store, "enc", c_in, hidden, layers, 3, e, rng);
    randomize(&mut store, rng, 0.5);
    let x = random_matrix(rng, c_in, len, 1.0);
    let (rm, rl) = (random_matrix(rng, len, e, 1.0), random_matrix(rng, len, e, 1.0));
    let objective = |s: &ParameterStore, x: &Array2<f64>, grads: Option<&mut Gradients>| -> Result<(f64, Array2<f64>)> {
        let (head, cache) = enc.forward(s, x.clone())?;
        let value = dot(&head.mu, &rm) + dot(&head.logvar, &rl);
        let gin = match grads {
            Some(g) => enc.backward(s, &cache, &rm, &rl, g)?,
            None => Array2::zeros(x.raw_dim()),
        };
        Ok((value, gin))
    };
    tally.add("encoder params", check_store(&store, |s, g| Ok(objective(s, &x, Some(g))?.0))?);
    let mut scratch = store.zero_grads();
    let (_, gin) = objective(&store, &x, Some(&mut scratch))?;
    tally.add("encoder input", check_inputs(&x, &gin, |x| objective(&store, x, None).expect("forward").0));
    Ok(())
}

fn decoder_case(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let e = rng.gen_range(1..=3);
    let hidden = rng.gen_range(1..=4);
    let layers = rng.gen_range(1..=2);
    let c_out = rng.gen_range(1..=4);
    let len = rng.gen_range(1..=6);
    let mut store = ParameterStore::new();
    let dec = Decoder::new(&mut store, "dec", e, hidden, layers, 3, c_out, rng);
    randomize(&mut store, rng, 0.5);
    let z = random_matrix(rng, len, e, 1.0);
    let r = random_matrix(rng, len, c_out, 1.0);
    tally.add(
        "decoder params",
        check_store(&store, |s, g| {
            let (out, cache) = dec.forward(s, &z)?;
            dec.backward(s, &cache, &r, g)?;
            Ok(dot(&out, &r))
        })?,
    );
    let (_, cache) = dec.forward(&store, &z)?;
    let gz = dec.backward(&store, &cache, &r, &mut store.zero_grads())?;
    tally.add(
        "decoder input",
        check_inputs(&z, &gz, |z| dot(&dec.forward(&store, z).expect("forward").0, &r)),
    );
    Ok(())
}

fn table_case(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let vocab = rng.gen_range(2..=4);
    let s = rng.gen_range(1..=3);
    let dim = rng.gen_range(1..=4);
    let mut store = ParameterStore::new();
    let table = LinguisticInputTable::new(&mut store, "tab", vocab, s, dim, rng);
    let ids: Vec<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..vocab)).collect();
    let states = expand_to_states(&PhonemeSequence::new(ids, vocab)?, s)?;
    let r = random_matrix(rng, dim, states.len(), 1.0);
    tally.add(
        "linguistic input table",
        check_store(&store, |st, g| {
            table.backward(&states, &r, g);
            Ok(dot(&table.forward(st, &states)?, &r))
        })?,
    );
    Ok(())
}

fn loss_cases(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let rows = rng.gen_range(1..=5);
    let cols = rng.gen_range(1..=4);
    let recon = random_matrix(rng, rows, cols, 1.0);
    let target = random_matrix(rng, rows, cols, 1.0);
    let (_, g) = mse_loss(&recon, &target)?;
    tally.add("mse", check_inputs(&recon, &g, |x| mse_loss(x, &target).expect("mse").0));

    let classes = rng.gen_range(2..=5);
    let logits = random_matrix(rng, rows, classes, 2.0);
    let targets: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
    let (_, g) = cross_entropy_loss(&logits, &targets)?;
    tally.add(
        "cross entropy",
        check_inputs(&logits, &g, |x| cross_entropy_loss(x, &targets).expect("ce").0),
    );

    let mu = random_matrix(rng, rows, cols, 1.0);
    let lv = random_matrix(rng, rows, cols, 0.8);
    let noise = random_matrix(rng, rows, cols, 1.0);
    let r = random_matrix(rng, rows, cols, 1.0);
    let head = VaeHead::new(mu.clone(), lv.clone())?;
    let (gm, gl) = reparameterize_backward(&head, &noise, &r);
    let z_of = |m: &Array2<f64>, l: &Array2<f64>| {
        dot(&reparameterize(&VaeHead::new(m.clone(), l.clone()).expect("head"), &noise).expect("z"), &r)
    };
    tally.add("reparameterize mu", check_inputs(&mu, &gm, |m| z_of(m, &lv)));
    tally.add("reparameterize logvar", check_inputs(&lv, &gl, |l| z_of(&mu, l)));

    let (km, kl) = kl_standard_normal_grad(&head);
    let kl_of = |m: &Array2<f64>, l: &Array2<f64>| kl_standard_normal(&VaeHead::new(m.clone(), l.clone()).expect("head"));
    tally.add("kl mu", check_inputs(&mu, &km, |m| kl_of(m, &lv)));
    tally.add("kl logvar", check_inputs(&lv, &kl, |l| kl_of(&mu, l)));
    Ok(())
}

/// Full per-utterance objective with annealing off and fixed noise.
fn model_case(rng: &mut ChaCha8Rng, tally: &mut Tally, use_vae: bool) -> Result<()> {
    let cfg = TrainConfig {
        use_annealing: false,
        use_vae,
        states_per_phoneme: 2,
        embed_dim: 3,
        hidden_channels: 3,
        layers: 2,
        w_aco: 0.7,
        w_lng: 0.4,
        kl_beta: 0.5,
        ..TrainConfig::default()
    };
    let (feature_dim, vocab) = (3, 3);
    let mut store = ParameterStore::new();
    let model = AlignerModel::new(cfg.model_config(feature_dim, vocab), &mut store, rng)?;
    randomize(&mut store, rng, 0.4);
    let ids: Vec<usize> = (0..2).map(|_| rng.gen_range(0..vocab)).collect();
    let frames = rng.gen_range(4..=7);
    let utt = Utterance {
        id: "check".into(),
        features: FeatureMatrix::new(random_matrix(rng, frames, feature_dim, 1.0), 0.01)?,
        phonemes: PhonemeSequence::new(ids, vocab)?,
        reference: None,
    };
    let noise = VaeNoise {
        acoustic: random_matrix(rng, frames, cfg.embed_dim, 1.0),
        linguistic: random_matrix(rng, 4, cfg.embed_dim, 1.0),
    };
    let noise = use_vae.then_some(&noise);
    let r = check_store(&store, |s, g| {
        let l = utterance_objective(&model, s, &cfg, &utt, 1.0, noise, g)?;
        Ok(l.l_align + cfg.w_aco * l.l_aco + cfg.w_lng * l.l_lng)
    })?;
    tally.add(if use_vae { "full model" } else { "full model without vae" }, r);
    Ok(())
}

/// Finite-difference checks of every trainable operation.
pub fn neural_gradient_suite(seed: u64, repeats: usize) -> CheckResult {
    timed("neural gradient suite", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tally = Tally::default();
        for _ in 0..repeats {
            conv_case(&mut rng, &mut tally)?;
            encoder_case(&mut rng, &mut tally)?;
            decoder_case(&mut rng, &mut tally)?;
            table_case(&mut rng, &mut tally)?;
            loss_cases(&mut rng, &mut tally)?;
        }
        model_case(&mut rng, &mut tally, true)?;
        model_case(&mut rng, &mut tally, false)?;
        let detail = if tally.failed.is_empty() {
            format!(
                "{} checks, max abs err {:.2e}, max rel err where abs err > 1e-8 {:.2e}",
                tally.checks, tally.worst_abs, tally.worst
            )
        } else {
            format!("{} of {} checks failed: {}", tally.failed.len(), tally.checks, tally.failed.join(", "))
        };
        Ok((tally.failed.is_empty(), detail))
    })
}

/// Every suite at its standard size.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        dp_oracle_equivalence(seed, 1000),
        occupancy_gradient_identity(seed.wrapping_add(1), 100),
        embedding_gradient_check(seed.wrapping_add(2), 100),
        annealing_limits(seed.wrapping_add(3), 200),
        neural_gradient_suite(seed.wrapping_add(4), 8),
        metric_arithmetic(seed.wrapping_add(5), 500),
    ]
}
