//! Response statistics and the two spike decoders.
//!
//! * Vote-for-one (VFO): every output neuron is assigned to the class it
//!   responds to most, and each of its spikes is one vote for that class.
//! * Vote-for-all (VFA): neuron `i` votes for every class `j` with weight
//!   `w_ij = s_ij^μ / Σ_k s_ik^μ`, where `s_ij` is its mean spike count on
//!   class-`j` calibration samples. One vote-counter neuron per class sums the
//!   weighted votes.
//!
//! Both decoders break ties toward the lowest class index.

use crate::error::{Result, SnnError};
use crate::neuron::VoteCounter;

/// Running per-neuron, per-class spike sums over calibration presentations.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    neurons: usize,
    classes: usize,
    /// `sums[i * classes + j]`
    sums: Vec<f64>,
    presentations: Vec<u64>,
}

impl ResponseTable {
    pub fn new(neurons: usize, classes: usize) -> Self {
        Self {
            neurons,
            classes,
            sums: vec![0.0; neurons * classes],
            presentations: vec![0; classes],
        }
    }

    pub fn from_parts(neurons: usize, classes: usize, sums: Vec<f64>, presentations: Vec<u64>) -> Result<Self> {
        if sums.len() != neurons * classes || presentations.len() != classes {
            return Err(SnnError::Checkpoint("response table shape mismatch".into()));
        }
        Ok(Self {
            neurons,
            classes,
            sums,
            presentations,
        })
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn presentations(&self) -> &[u64] {
        &self.presentations
    }

    pub fn accumulate(&mut self, spike_counts: &[u32], label: usize) -> Result<()> {
        if label >= self.classes {
            return Err(SnnError::Input(format!(
                "label {label} out of range for {} classes",
                self.classes
            )));
        }
        if spike_counts.len() != self.neurons {
            return Err(SnnError::Contract(format!(
                "expected {} spike counts, got {}",
                self.neurons,
                spike_counts.len()
            )));
        }
        for (i, &c) in spike_counts.iter().enumerate() {
            self.sums[i * self.classes + label] += c as f64;
        }
        self.presentations[label] += 1;
        Ok(())
    }

    /// Adds another partial table (e.g. from another worker).
    pub fn merge(&mut self, other: &ResponseTable) -> Result<()> {
        if other.neurons != self.neurons || other.classes != self.classes {
            return Err(SnnError::Contract("cannot merge tables of different shape".into()));
        }
        self.sums.iter_mut().zip(&other.sums).for_each(|(a, b)| *a += b);
        self.presentations
            .iter_mut()
            .zip(&other.presentations)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Mean spike count `s_ij`; zero for classes never presented.
    pub fn average(&self, neuron: usize, class: usize) -> f64 {
        match self.presentations[class] {
            0 => 0.0,
            n => self.sums[neuron * self.classes + class] / n as f64,
        }
    }

    pub fn average_row(&self, neuron: usize) -> Vec<f64> {
        (0..self.classes).map(|j| self.average(neuron, j)).collect()
    }
}

/// Index of the largest value, lowest index on ties.
fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (j, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

/// Decoder-layer synaptic weights, one normalised row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct VfaWeights {
    neurons: usize,
    classes: usize,
    mu: f64,
    w: Vec<f64>,
}

impl VfaWeights {
    pub fn compute(table: &ResponseTable, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(SnnError::Config(format!("mu must be positive, got {mu}")));
        }
        let c = table.classes();
        let mut w = vec![0.0; table.neurons() * c];
        for i in 0..table.neurons() {
            let powered: Vec<f64> = (0..c)
                .map(|j| match table.average(i, j) {
                    s if s > 0.0 => s.powf(mu),
                    _ => 0.0,
                })
                .collect();
            let total: f64 = powered.iter().sum();
            if total > 0.0 {
                for (dst, p) in w[i * c..(i + 1) * c].iter_mut().zip(&powered) {
                    *dst = p / total;
                }
            }
        }
        Ok(Self {
            neurons: table.neurons(),
            classes: c,
            mu,
            w,
        })
    }

    pub fn from_parts(neurons: usize, classes: usize, mu: f64, w: Vec<f64>) -> Result<Self> {
        if w.len() != neurons * classes {
            return Err(SnnError::Checkpoint("VFA weight shape mismatch".into()));
        }
        Ok(Self { neurons, classes, mu, w })
    }

    /// All-zero weights: every decision falls to class 0.
    pub fn uncalibrated(neurons: usize, classes: usize, mu: f64) -> Self {
        Self {
            neurons,
            classes,
            mu,
            w: vec![0.0; neurons * classes],
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn raw(&self) -> &[f64] {
        &self.w
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        &self.w[neuron * self.classes..(neuron + 1) * self.classes]
    }

    /// Vote-counter voltages after one presentation.
    pub fn votes(&self, spike_counts: &[u32]) -> Vec<f64> {
        let mut counters = vec![VoteCounter::new(); self.classes];
        for (i, &count) in spike_counts.iter().enumerate().take(self.neurons) {
            if count == 0 {
                continue;
            }
            for (counter, &w) in counters.iter_mut().zip(self.row(i)) {
                // Weights are non-negative by construction.
                let _ = counter.accumulate(count as f64 * w);
            }
        }
        counters.iter().map(VoteCounter::value).collect()
    }

    pub fn decode(&self, spike_counts: &[u32]) -> usize {
        argmax(self.votes(spike_counts))
    }
}

/// Per-neuron class assignment for vote-for-one decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VfoAssignment {
    classes: usize,
    assigned: Vec<usize>,
}

impl VfoAssignment {
    pub fn assign(table: &ResponseTable) -> Self {
        let assigned = (0..table.neurons())
            .map(|i| argmax(table.average_row(i)))
            .collect();
        Self {
            classes: table.classes(),
            assigned,
        }
    }

    pub fn from_parts(classes: usize, assigned: Vec<usize>) -> Result<Self> {
        if assigned.iter().any(|&c| c >= classes) {
            return Err(SnnError::Checkpoint("VFO assignment out of class range".into()));
        }
        Ok(Self { classes, assigned })
    }

    pub fn assigned(&self) -> &[usize] {
        &self.assigned
    }

    pub fn votes(&self, spike_counts: &[u32]) -> Vec<f64> {
        let mut votes = vec![0.0; self.classes];
        for (&class, &count) in self.assigned.iter().zip(spike_counts) {
            votes[class] += count as f64;
        }
        votes
    }

    pub fn decode(&self, spike_counts: &[u32]) -> usize {
        argmax(self.votes(spike_counts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Vfa,
    Vfo,
}

impl DecoderKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderKind::Vfa => "vfa",
            DecoderKind::Vfo => "vfo",
        }
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = SnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vfa" => Ok(DecoderKind::Vfa),
            "vfo" => Ok(DecoderKind::Vfo),
            other => Err(SnnError::Config(format!("unknown decoder `{other}` (expected vfa or vfo)"))),
        }
    }
}

/// Calibrated decoder state: the raw responses and both derived decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderTable {
    pub responses: ResponseTable,
    pub vfa: VfaWeights,
    pub vfo: VfoAssignment,
}

impl DecoderTable {
    pub fn from_responses(responses: ResponseTable, mu: f64) -> Result<Self> {
        let vfa = VfaWeights::compute(&responses, mu)?;
        let vfo = VfoAssignment::assign(&responses);
        Ok(Self { responses, vfa, vfo })
    }

    pub fn classes(&self) -> usize {
        self.responses.classes()
    }

    pub fn decode(&self, kind: DecoderKind, spike_counts: &[u32]) -> usize {
        match kind {
            DecoderKind::Vfa => self.vfa.decode(spike_counts),
            DecoderKind::Vfo => self.vfo.decode(spike_counts),
        }
    }
}
