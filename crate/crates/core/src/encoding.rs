//! Poisson rate coding of 28×28 images and the adaptive-intensity rule.
//!
//! Input neuron `i` fires at each step with probability
//! `min(1, pixel_i · λ · dt)`, with λ in Hz per intensity unit. Each input
//! neuron draws from its own keyed stream, one uniform per step, so raising λ
//! can only add spikes to a train.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::rng::StreamKey;
use crate::IMAGE_PIXELS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// Rate per intensity unit (Hz) at the first presentation of an image.
    pub lambda_base: f64,
    /// Rate increment per re-presentation (Hz per intensity unit).
    pub lambda_step: f64,
    /// Re-present while the whole output layer fires fewer spikes than this.
    pub min_output_spikes: u32,
    /// Maximum number of presentations of one image.
    pub max_attempts: u32,
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self {
            lambda_base: 63.75 / 255.0,
            lambda_step: 32.0 / 255.0,
            min_output_spikes: 5,
            max_attempts: 8,
        }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_base > 0.0) || !(self.lambda_step > 0.0) {
            return Err(SnnError::Config("lambda_base and lambda_step must be positive".into()));
        }
        if self.min_output_spikes < 1 || self.max_attempts < 1 {
            return Err(SnnError::Config(
                "min_output_spikes and max_attempts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Input spikes of one presentation, grouped by step (CSR layout).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    steps: usize,
    offsets: Vec<u32>,
    indices: Vec<u16>,
}

impl SpikeTrain {
    pub fn empty(steps: usize) -> Self {
        Self {
            steps,
            offsets: vec![0; steps + 1],
            indices: Vec::new(),
        }
    }

    /// Builds a train from explicit per-step event lists.
    pub fn from_events(events: &[Vec<u16>]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(events.len() + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for step in events {
            for &i in step {
                if i as usize >= IMAGE_PIXELS {
                    return Err(SnnError::Input(format!("input index {i} out of range")));
                }
                indices.push(i);
            }
            offsets.push(indices.len() as u32);
        }
        Ok(Self {
            steps: events.len(),
            offsets,
            indices,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Input neurons firing at `step`, in ascending order.
    #[inline]
    pub fn at(&self, step: usize) -> &[u16] {
        &self.indices[self.offsets[step] as usize..self.offsets[step + 1] as usize]
    }

    pub fn total_spikes(&self) -> usize {
        self.indices.len()
    }

    pub fn counts_per_input(&self) -> Vec<u32> {
        let mut counts = vec![0u32; IMAGE_PIXELS];
        for &i in &self.indices {
            counts[i as usize] += 1;
        }
        counts
    }
}

/// Encodes one presentation of `image` (784 raw intensities, row-major).
pub fn encode_presentation(
    image: &[u8],
    lambda: f64,
    duration: f64,
    dt: f64,
    key: &StreamKey,
) -> Result<SpikeTrain> {
    if image.len() != IMAGE_PIXELS {
        return Err(SnnError::Input(format!(
            "image must be 28x28 ({IMAGE_PIXELS} pixels), got {} values",
            image.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(SnnError::Contract(format!("lambda must be non-negative, got {lambda}")));
    }
    let steps = crate::neuron::steps_for(duration, dt, "presentation duration")? as usize;
    let mut per_step: Vec<Vec<u16>> = vec![Vec::new(); steps];
    let dt_s = dt * 1e-3;
    for (i, &pixel) in image.iter().enumerate() {
        if pixel == 0 {
            continue;
        }
        let p = (pixel as f64 * lambda * dt_s).min(1.0);
        let mut rng = key.rng(i as u64);
        for events in per_step.iter_mut() {
            if rng.random::<f64>() < p {
                events.push(i as u16);
            }
        }
    }
    SpikeTrain::from_events(&per_step)
}

/// Decision after one presentation of an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensityDecision {
    /// Present the same image again at the raised rate.
    Represent { lambda: f64 },
    /// Enough output activity; the next image starts again from `lambda`.
    Accept { lambda: f64 },
    /// Still too quiet after the last allowed attempt; move on anyway.
    GiveUp { lambda: f64 },
}

impl IntensityDecision {
    pub fn represent(&self) -> bool {
        matches!(self, IntensityDecision::Represent { .. })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            IntensityDecision::Represent { lambda }
            | IntensityDecision::Accept { lambda }
            | IntensityDecision::GiveUp { lambda } => lambda,
        }
    }
}

/// Adaptive input intensity. `attempt` is the zero-based index of the
/// presentation that produced `total_output_spikes`.
pub fn adapt_intensity(
    lambda: f64,
    total_output_spikes: u64,
    params: &EncoderParams,
    attempt: u32,
) -> IntensityDecision {
    if total_output_spikes >= params.min_output_spikes as u64 {
        return IntensityDecision::Accept {
            lambda: params.lambda_base,
        };
    }
    if attempt + 1 >= params.max_attempts {
        warn!(
            "only {total_output_spikes} output spikes after {} presentations; giving up on this image",
            attempt + 1
        );
        return IntensityDecision::GiveUp {
            lambda: params.lambda_base,
        };
    }
    IntensityDecision::Represent {
        lambda: lambda + params.lambda_step,
    }
}
