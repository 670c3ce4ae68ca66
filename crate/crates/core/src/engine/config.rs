use serde::{Deserialize, Serialize};

use crate::encoding::EncoderParams;
use crate::error::{Result, SnnError};
use crate::neuron::{steps_for, NeuronParams};
use crate::plasticity::StdpParams;

/// Step-wise decaying schedule for the adaptive-reset strength α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub initial: f64,
    /// α halves every `halving_period` iterations.
    pub halving_period: u64,
    /// α is 0 from this iteration on.
    pub cutoff: u64,
    /// Constant α for the whole run, overriding the schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        Self {
            initial: 0.6,
            halving_period: 5000,
            cutoff: 20_000,
            fixed: None,
        }
    }
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Self {
        Self {
            fixed: Some(alpha),
            ..Self::default()
        }
    }

    pub fn at(&self, iteration: u64) -> f64 {
        if let Some(a) = self.fixed {
            return a;
        }
        alpha_schedule(iteration, self.initial, self.halving_period, self.cutoff)
    }

    fn validate(&self) -> Result<()> {
        let ok = |a: f64| (0.0..=1.0).contains(&a);
        if !ok(self.initial) || !self.fixed.is_none_or(ok) {
            return Err(SnnError::Config("alpha must lie in [0, 1]".into()));
        }
        if self.halving_period == 0 {
            return Err(SnnError::Config("alpha halving period must be positive".into()));
        }
        Ok(())
    }
}

/// `initial · 2^(−⌊iteration / period⌋)` before `cutoff`, 0 afterwards.
pub fn alpha_schedule(iteration: u64, initial: f64, period: u64, cutoff: u64) -> f64 {
    if iteration >= cutoff {
        return 0.0;
    }
    let halvings = (iteration / period).min(1074) as i32;
    initial * 2f64.powi(-halvings)
}

/// Everything needed to build and drive a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Simulation step (ms).
    pub dt: f64,
    /// Presentation length (ms).
    pub t_present: f64,
    /// Input-free rest after each presentation (ms).
    pub t_rest: f64,
    pub seed: u64,
    pub workers: usize,
    pub size_sa: usize,
    /// Fixed lateral inhibitory weight.
    pub w_inh: f64,
    /// Initial plastic weights are uniform in `[0, w_init_max)` before normalisation.
    pub w_init_max: f64,
    /// VFA exponent μ.
    pub mu: f64,
    /// Keep the adaptive threshold running during calibration and evaluation.
    pub homeostasis_at_inference: bool,
    /// Per-pathway normalisation targets; `stdp.c_norm` everywhere when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathway_c_norm: Option<[f64; 3]>,
    pub alpha: AlphaSchedule,
    pub neuron: NeuronParams,
    pub stdp: StdpParams,
    pub encoder: EncoderParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            t_present: 350.0,
            t_rest: 150.0,
            seed: 1,
            workers: 1,
            size_sa: 100,
            w_inh: 17.0,
            w_init_max: 0.3,
            mu: 0.1,
            homeostasis_at_inference: false,
            pathway_c_norm: None,
            alpha: AlphaSchedule::default(),
            neuron: NeuronParams::default(),
            stdp: StdpParams::default(),
            encoder: EncoderParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.neuron.validate(self.dt)?;
        self.stdp.validate()?;
        self.encoder.validate()?;
        self.alpha.validate()?;
        steps_for(self.t_present, self.dt, "t_present")?;
        steps_for(self.t_rest, self.dt, "t_rest")?;
        if self.workers == 0 {
            return Err(SnnError::Config("worker count must be at least 1".into()));
        }
        if !(self.mu > 0.0) {
            return Err(SnnError::Config("mu must be positive".into()));
        }
        if !(self.w_init_max > 0.0) {
            return Err(SnnError::Config("w_init_max must be positive".into()));
        }
        if let Some(c) = self.pathway_c_norm {
            if c.iter().any(|&x| !(x > 0.0)) {
                return Err(SnnError::Config("per-pathway c_norm must be positive".into()));
            }
        }
        if self.seed > i64::MAX as u64 {
            return Err(SnnError::Config("seed must fit in a signed 64-bit integer".into()));
        }
        Ok(())
    }

    pub fn present_steps(&self) -> usize {
        (self.t_present / self.dt).round() as usize
    }

    pub fn rest_steps(&self) -> usize {
        (self.t_rest / self.dt).round() as usize
    }

    pub fn c_norm_for(&self, pathway: usize) -> f64 {
        self.pathway_c_norm.map_or(self.stdp.c_norm, |c| c[pathway])
    }
}
