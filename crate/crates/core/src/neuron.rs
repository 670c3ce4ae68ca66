//! Conductance-based leaky integrate-and-fire neuron with an adaptive
//! threshold (homeostasis) and adaptive repolarization, plus the
//! infinite-threshold vote counter used by the decoding layer.
//!
//! Membrane dynamics, in ms and mV:
//!
//! ```text
//! τ_v  dv/dt  = v_rest − v + (v_exc − v)·g_e + (v_inh − v)·g_i
//! τ_ge dge/dt = −g_e            (+ w on every excitatory input spike)
//! τ_gi dgi/dt = −g_i            (+ w on every inhibitory input spike)
//! τ_θ  dθ/dt  = v_thres − θ     (+ θ_plus on every output spike)
//! ```
//!
//! `v` is advanced with one forward-Euler step per tick; the three pure decays
//! use their exact exponential factors. On a spike the membrane is reset to
//!
//! ```text
//! ψ = v_reset + α·ΔC   if Δg > 0
//!     v_reset − α·ΔC   if Δg < 0
//!     v_reset          if Δg = 0
//! Δg = (g_e(t_f) − g_e(t_{f−1} + T_ref)) − (g_i(t_f) − g_i(t_{f−1} + T_ref))
//! ΔC = v_thres − v_rest
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

/// Static parameters of the LIF model. Voltages in mV, times in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub v_rest: f64,
    pub v_thres: f64,
    pub v_reset: f64,
    pub v_exc: f64,
    pub v_inh: f64,
    pub tau_v: f64,
    pub tau_ge: f64,
    pub tau_gi: f64,
    pub tau_theta: f64,
    pub theta_plus: f64,
    pub t_ref: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            v_rest: -65.0,
            v_thres: -52.0,
            v_reset: -65.0,
            v_exc: 0.0,
            v_inh: -100.0,
            tau_v: 100.0,
            tau_ge: 1.0,
            tau_gi: 2.0,
            tau_theta: 1.0e7,
            theta_plus: 0.05,
            t_ref: 5.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if !(self.v_inh < self.v_rest && self.v_rest < self.v_thres && self.v_thres < self.v_exc) {
            return Err(SnnError::Config(format!(
                "voltages must satisfy v_inh < v_rest < v_thres < v_exc (got {} / {} / {} / {})",
                self.v_inh, self.v_rest, self.v_thres, self.v_exc
            )));
        }
        for (name, tau) in [
            ("tau_v", self.tau_v),
            ("tau_ge", self.tau_ge),
            ("tau_gi", self.tau_gi),
            ("tau_theta", self.tau_theta),
        ] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(SnnError::Config(format!("{name} must be positive, got {tau}")));
            }
        }
        if self.theta_plus < 0.0 {
            return Err(SnnError::Config("theta_plus must be non-negative".into()));
        }
        steps_for(self.t_ref, dt, "t_ref")?;
        Ok(())
    }
}

/// Converts a duration to a whole number of steps, rejecting durations that
/// are not exact multiples of `dt`.
pub fn steps_for(duration: f64, dt: f64, name: &str) -> Result<u32> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SnnError::Config(format!("dt must be positive, got {dt}")));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(SnnError::Config(format!("{name} must be non-negative, got {duration}")));
    }
    let steps = (duration / dt).round();
    if ((steps * dt) - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(SnnError::Config(format!(
            "{name} = {duration} ms is not a multiple of dt = {dt} ms"
        )));
    }
    Ok(steps as u32)
}

/// Strength of the adaptive reset. `delta_c` is always `v_thres − v_rest`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepolarizationParams {
    alpha: f64,
    delta_c: f64,
}

impl RepolarizationParams {
    pub fn new(alpha: f64, params: &NeuronParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(SnnError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self {
            alpha,
            delta_c: params.v_thres - params.v_rest,
        })
    }

    /// Fixed reset to `v_reset`.
    pub fn disabled(params: &NeuronParams) -> Self {
        Self {
            alpha: 0.0,
            delta_c: params.v_thres - params.v_rest,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }

    /// Reset voltage ψ for a spike with net conductance change `delta_g`.
    pub fn reset_voltage(&self, v_reset: f64, delta_g: f64) -> f64 {
        if delta_g > 0.0 {
            v_reset + self.alpha * self.delta_c
        } else if delta_g < 0.0 {
            v_reset - self.alpha * self.delta_c
        } else {
            v_reset
        }
    }
}

/// Per-step constants derived once from `(NeuronParams, dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConstants {
    pub dt: f64,
    pub euler_gain: f64,
    pub ge_decay: f64,
    pub gi_decay: f64,
    pub theta_decay: f64,
    pub t_ref_steps: u32,
}

impl StepConstants {
    pub fn new(params: &NeuronParams, dt: f64) -> Result<Self> {
        params.validate(dt)?;
        Ok(Self {
            dt,
            euler_gain: dt / params.tau_v,
            ge_decay: (-dt / params.tau_ge).exp(),
            gi_decay: (-dt / params.tau_gi).exp(),
            theta_decay: (-dt / params.tau_theta).exp(),
            t_ref_steps: steps_for(params.t_ref, dt, "t_ref")?,
        })
    }
}

/// Exponentially decaying quantities are set to exactly 0 once they drop
/// below the smallest normal f64. Subnormal arithmetic is orders of magnitude
/// slower on common hardware and the values carry no meaningful signal.
#[inline]
pub(crate) fn flush_subnormal(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

/// Which conductance a synapse drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynapseKind {
    Excitatory,
    Inhibitory,
}

/// Dynamic state of one output neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    pub g_e: f64,
    pub g_i: f64,
    pub theta: f64,
    /// Remaining refractory time in whole steps.
    pub refractory_steps: u32,
    /// `g_e` sampled when the previous refractory period ended.
    pub g_e_ref: f64,
    /// `g_i` sampled when the previous refractory period ended.
    pub g_i_ref: f64,
    pub last_spike_step: Option<u64>,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        Self {
            v: params.v_rest,
            g_e: 0.0,
            g_i: 0.0,
            theta: params.v_thres,
            refractory_steps: 0,
            g_e_ref: 0.0,
            g_i_ref: 0.0,
            last_spike_step: None,
        }
    }

    pub fn is_refractory(&self) -> bool {
        self.refractory_steps > 0
    }

    pub fn refractory_remaining(&self, dt: f64) -> f64 {
        self.refractory_steps as f64 * dt
    }

    /// Checked delivery of one incoming spike. Spikes that arrive during the
    /// refractory period are dropped.
    pub fn deliver_spike(&mut self, weight: f64, kind: SynapseKind) -> Result<()> {
        if !(weight >= 0.0) {
            return Err(SnnError::Contract(format!(
                "synaptic weight must be non-negative, got {weight}"
            )));
        }
        match kind {
            SynapseKind::Excitatory => self.receive_excitatory(weight),
            SynapseKind::Inhibitory => self.receive_inhibitory(weight),
        }
        Ok(())
    }

    #[inline]
    pub fn receive_excitatory(&mut self, weight: f64) {
        if self.refractory_steps == 0 {
            self.g_e += weight;
        }
    }

    #[inline]
    pub fn receive_inhibitory(&mut self, weight: f64) {
        if self.refractory_steps == 0 {
            self.g_i += weight;
        }
    }

    /// Marks the start of a presentation: the Δg reference for the first
    /// spike of the presentation is the conductance at this moment.
    pub fn begin_presentation(&mut self) {
        self.g_e_ref = self.g_e;
        self.g_i_ref = self.g_i;
    }

    /// Membrane half of a step: one Euler update of `v`, or one tick of the
    /// refractory countdown (with `v` held). When the countdown reaches zero
    /// the Δg references are sampled from the current conductances.
    #[inline]
    pub fn integrate_membrane(&mut self, params: &NeuronParams, k: &StepConstants) {
        if self.refractory_steps > 0 {
            self.refractory_steps -= 1;
            if self.refractory_steps == 0 {
                self.g_e_ref = self.g_e;
                self.g_i_ref = self.g_i;
            }
            return;
        }
        let v = self.v;
        self.v = v
            + k.euler_gain
                * (params.v_rest - v + (params.v_exc - v) * self.g_e + (params.v_inh - v) * self.g_i);
    }

    /// Threshold check for the current step. On a spike: adaptive reset,
    /// threshold increment (when `adapt_threshold`), refractory start.
    #[inline]
    pub fn check_fire(
        &mut self,
        params: &NeuronParams,
        repol: &RepolarizationParams,
        k: &StepConstants,
        step: u64,
        adapt_threshold: bool,
    ) -> bool {
        if self.refractory_steps > 0 || self.v < self.theta {
            return false;
        }
        let delta_g = (self.g_e - self.g_e_ref) - (self.g_i - self.g_i_ref);
        self.v = repol.reset_voltage(params.v_reset, delta_g);
        if adapt_threshold {
            self.theta += params.theta_plus;
        }
        self.refractory_steps = k.t_ref_steps;
        self.last_spike_step = Some(step);
        if k.t_ref_steps == 0 {
            self.g_e_ref = self.g_e;
            self.g_i_ref = self.g_i;
        }
        true
    }

    /// Exact exponential decay of both conductances and (optionally) of θ.
    #[inline]
    pub fn decay(&mut self, params: &NeuronParams, k: &StepConstants, adapt_threshold: bool) {
        self.g_e = flush_subnormal(self.g_e * k.ge_decay);
        self.g_i = flush_subnormal(self.g_i * k.gi_decay);
        if adapt_threshold {
            self.theta = params.v_thres + (self.theta - params.v_thres) * k.theta_decay;
        }
    }

    /// Membrane update followed by the decays, without a threshold check.
    pub fn integrate_step(&mut self, params: &NeuronParams, k: &StepConstants) {
        self.integrate_membrane(params, k);
        self.decay(params, k, true);
    }
}

/// Decoder-layer neuron with an infinite threshold: it only sums votes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VoteCounter {
    v: f64,
}

impl VoteCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, weight: f64) -> Result<()> {
        if !(weight >= 0.0) {
            return Err(SnnError::Contract(format!("vote weight must be non-negative, got {weight}")));
        }
        self.v += weight;
        Ok(())
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn reset(&mut self) {
        self.v = 0.0;
    }
}
