//! `key = value` training configuration files.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use super::read_to_string;
use crate::error::{AlignError, Result};
use crate::train::TrainConfig;

pub const KEYS: &[&str] = &[
    "omega",
    "w_aco",
    "w_lng",
    "kl_beta",
    "states_per_phoneme",
    "sigma0",
    "anneal_rate",
    "anneal_interval",
    "sigma_min",
    "anneal_normalize",
    "use_prior",
    "use_vae",
    "use_annealing",
    "lr",
    "batch_size",
    "max_steps",
    "seed",
    "eval_interval",
    "embed_dim",
    "hidden_channels",
    "layers",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| AlignError::Config {
        line,
        msg: format!("bad value `{value}` for {key}"),
    })
}

/// Applies `key = value` lines on top of the defaults. Blank lines and
/// `#` comments are ignored; unknown or repeated keys are errors.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let mut seen = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(AlignError::Config {
                line,
                msg: format!("expected `key = value`, found `{body}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(AlignError::Config {
                line,
                msg: format!("duplicate key `{key}`"),
            });
        }
        match key {
            "omega" => cfg.omega = parse(line, key, value)?,
            "w_aco" => cfg.w_aco = parse(line, key, value)?,
            "w_lng" => cfg.w_lng = parse(line, key, value)?,
            "kl_beta" => cfg.kl_beta = parse(line, key, value)?,
            "states_per_phoneme" => cfg.states_per_phoneme = parse(line, key, value)?,
            "sigma0" => cfg.schedule.sigma0 = parse(line, key, value)?,
            "anneal_rate" => cfg.schedule.rate = parse(line, key, value)?,
            "anneal_interval" => cfg.schedule.interval = parse(line, key, value)?,
            "sigma_min" => cfg.schedule.sigma_min = parse(line, key, value)?,
            "anneal_normalize" => cfg.anneal_normalize = parse(line, key, value)?,
            "use_prior" => cfg.use_prior = parse(line, key, value)?,
            "use_vae" => cfg.use_vae = parse(line, key, value)?,
            "use_annealing" => cfg.use_annealing = parse(line, key, value)?,
            "lr" => cfg.lr = parse(line, key, value)?,
            "batch_size" => cfg.batch_size = parse(line, key, value)?,
            "max_steps" => cfg.max_steps = parse(line, key, value)?,
            "seed" => cfg.seed = parse(line, key, value)?,
            "eval_interval" => cfg.eval_interval = parse(line, key, value)?,
            "embed_dim" => cfg.embed_dim = parse(line, key, value)?,
            "hidden_channels" => cfg.hidden_channels = parse(line, key, value)?,
            "layers" => cfg.layers = parse(line, key, value)?,
            _ => {
                return Err(AlignError::Config {
                    line,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
    }
    cfg.validate().map_err(|e| AlignError::Config {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    parse_config(&read_to_string(path)?).map_err(|e| match e {
        AlignError::Config { line, msg } => AlignError::format(path, format!("line {line}: {msg}")),
        other => other,
    })
}

/// Every key with its resolved value, in [`KEYS`] order. Parses back to
/// an identical config.
pub fn config_to_text(cfg: &TrainConfig) -> String {
    let s = &cfg.schedule;
    let values: [String; 21] = [
        cfg.omega.to_string(),
        cfg.w_aco.to_string(),
        cfg.w_lng.to_string(),
        cfg.kl_beta.to_string(),
        cfg.states_per_phoneme.to_string(),
        s.sigma0.to_string(),
        s.rate.to_string(),
        s.interval.to_string(),
        s.sigma_min.to_string(),
        cfg.anneal_normalize.to_string(),
        cfg.use_prior.to_string(),
        cfg.use_vae.to_string(),
        cfg.use_annealing.to_string(),
        cfg.lr.to_string(),
        cfg.batch_size.to_string(),
        cfg.max_steps.to_string(),
        cfg.seed.to_string(),
        cfg.eval_interval.to_string(),
        cfg.embed_dim.to_string(),
        cfg.hidden_channels.to_string(),
        cfg.layers.to_string(),
    ];
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
