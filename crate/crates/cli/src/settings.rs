//! Flat `key = value` configuration files and their mapping onto `SimConfig`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use snn_core::engine::SimConfig;

/// One applied override and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: String,
    pub source: String,
}

pub const KEYS: &[&str] = &[
    "dt",
    "t_present",
    "t_rest",
    "seed",
    "workers",
    "size_sa",
    "w_inh",
    "w_init_max",
    "mu",
    "homeostasis_at_inference",
    "c_norm_pathways",
    "alpha",
    "alpha_initial",
    "alpha_halving_period",
    "alpha_cutoff",
    "v_rest",
    "v_thres",
    "v_reset",
    "v_exc",
    "v_inh",
    "tau_v",
    "tau_ge",
    "tau_gi",
    "tau_theta",
    "theta_plus",
    "t_ref",
    "eta_pre",
    "eta_post",
    "tau_pre",
    "tau_post1",
    "tau_post2",
    "w_max",
    "c_norm",
    "lambda_base",
    "lambda_step",
    "min_output_spikes",
    "max_attempts",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("invalid value `{value}` for `{key}`: {e}"))
}

/// Sets one configuration key.
pub fn apply(cfg: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    let f = || num::<f64>(key, value);
    match key {
        "dt" => cfg.dt = f()?,
        "t_present" => cfg.t_present = f()?,
        "t_rest" => cfg.t_rest = f()?,
        "seed" => cfg.seed = num(key, value)?,
        "workers" => cfg.workers = num(key, value)?,
        "size_sa" => cfg.size_sa = num(key, value)?,
        "w_inh" => cfg.w_inh = f()?,
        "w_init_max" => cfg.w_init_max = f()?,
        "mu" => cfg.mu = f()?,
        "homeostasis_at_inference" => cfg.homeostasis_at_inference = num(key, value)?,
        "c_norm_pathways" => {
            let parts: Vec<f64> = value
                .split(',')
                .map(|p| num::<f64>(key, p.trim()))
                .collect::<Result<_>>()?;
            let arr: [f64; 3] = parts
                .try_into()
                .map_err(|_| anyhow!("`c_norm_pathways` needs three comma-separated values"))?;
            cfg.pathway_c_norm = Some(arr);
        }
        "alpha" => cfg.alpha.fixed = Some(f()?),
        "alpha_initial" => cfg.alpha.initial = f()?,
        "alpha_halving_period" => cfg.alpha.halving_period = num(key, value)?,
        "alpha_cutoff" => cfg.alpha.cutoff = num(key, value)?,
        "v_rest" => cfg.neuron.v_rest = f()?,
        "v_thres" => cfg.neuron.v_thres = f()?,
        "v_reset" => cfg.neuron.v_reset = f()?,
        "v_exc" => cfg.neuron.v_exc = f()?,
        "v_inh" => cfg.neuron.v_inh = f()?,
        "tau_v" => cfg.neuron.tau_v = f()?,
        "tau_ge" => cfg.neuron.tau_ge = f()?,
        "tau_gi" => cfg.neuron.tau_gi = f()?,
        "tau_theta" => cfg.neuron.tau_theta = f()?,
        "theta_plus" => cfg.neuron.theta_plus = f()?,
        "t_ref" => cfg.neuron.t_ref = f()?,
        "eta_pre" => cfg.stdp.eta_pre = f()?,
        "eta_post" => cfg.stdp.eta_post = f()?,
        "tau_pre" => cfg.stdp.tau_pre = f()?,
        "tau_post1" => cfg.stdp.tau_post1 = f()?,
        "tau_post2" => cfg.stdp.tau_post2 = f()?,
        "w_max" => cfg.stdp.w_max = f()?,
        "c_norm" => cfg.stdp.c_norm = f()?,
        "lambda_base" => cfg.encoder.lambda_base = f()?,
        "lambda_step" => cfg.encoder.lambda_step = f()?,
        "min_output_spikes" => cfg.encoder.min_output_spikes = num(key, value)?,
        "max_attempts" => cfg.encoder.max_attempts = num(key, value)?,
        other => bail!("unknown configuration key `{other}` (known keys: {})", KEYS.join(", ")),
    }
    Ok(())
}

/// Parses `key = value` lines. Blank lines and `#` comments are ignored.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{raw}`", n + 1))?;
        let (k, v) = (k.trim(), v.trim().trim_matches('"'));
        if k.is_empty() || v.is_empty() {
            bail!("line {}: empty key or value", n + 1);
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn load_file(cfg: &mut SimConfig, path: &Path, log: &mut Vec<Override>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    for (k, v) in parse_flat(&text).with_context(|| format!("in config {}", path.display()))? {
        apply(cfg, &k, &v).with_context(|| format!("in config {}", path.display()))?;
        log.push(Override {
            key: k,
            value: v,
            source: path.display().to_string(),
        });
    }
    Ok(())
}

pub fn apply_flag(cfg: &mut SimConfig, key: &str, value: String, log: &mut Vec<Override>) -> Result<()> {
    apply(cfg, key, &value)?;
    log.push(Override {
        key: key.to_string(),
        value,
        source: "command line".into(),
    });
    Ok(())
}
