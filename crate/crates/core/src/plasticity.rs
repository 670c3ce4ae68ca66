//! Triplet-STDP synapse groups.
//!
//! ```text
//! post spike:  w ← clip(w + η_post · x_pre · x_post2)     (x_post2 read before its reset)
//! pre spike:   w ← clip(w − η_pre  · x_post1)
//! ```
//!
//! Traces are set to 1 by the corresponding spike and decay exponentially
//! toward 0. After every training iteration the alive incoming weights of each
//! postsynaptic neuron are rescaled so they sum to `c_norm`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::neuron::flush_subnormal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpParams {
    pub eta_pre: f64,
    pub eta_post: f64,
    pub tau_pre: f64,
    pub tau_post1: f64,
    pub tau_post2: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub c_norm: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self {
            eta_pre: 1.0e-4,
            eta_post: 1.0e-2,
            tau_pre: 20.0,
            tau_post1: 20.0,
            tau_post2: 40.0,
            w_min: 0.0,
            w_max: 1.0,
            c_norm: 78.4,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        if self.eta_pre < 0.0 || self.eta_post < 0.0 {
            return Err(SnnError::Config("learning rates must be non-negative".into()));
        }
        if self.eta_post < 10.0 * self.eta_pre {
            return Err(SnnError::Config(format!(
                "eta_post ({}) must be at least 10x eta_pre ({})",
                self.eta_post, self.eta_pre
            )));
        }
        for (name, tau) in [
            ("tau_pre", self.tau_pre),
            ("tau_post1", self.tau_post1),
            ("tau_post2", self.tau_post2),
        ] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(SnnError::Config(format!("{name} must be positive, got {tau}")));
            }
        }
        if self.w_min != 0.0 || !(self.w_max > self.w_min) {
            return Err(SnnError::Config(format!(
                "weight bounds must satisfy 0 = w_min < w_max (got {} / {})",
                self.w_min, self.w_max
            )));
        }
        if !(self.c_norm > 0.0) {
            return Err(SnnError::Config("c_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Per-step multiplicative trace decay factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceDecay {
    pub pre: f64,
    pub post1: f64,
    pub post2: f64,
}

impl TraceDecay {
    pub fn new(params: &StdpParams, dt: f64) -> Self {
        Self {
            pre: (-dt / params.tau_pre).exp(),
            post1: (-dt / params.tau_post1).exp(),
            post2: (-dt / params.tau_post2).exp(),
        }
    }
}

/// Outcome of [`PlasticConnection::normalize_incoming`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizeReport {
    /// Postsynaptic neurons whose alive incoming weights summed to zero and
    /// were therefore left untouched.
    pub skipped: Vec<usize>,
}

/// One group of plastic synapses from a shared set of presynaptic inputs onto
/// a set of postsynaptic neurons.
///
/// Weights are stored input-major (`weights[pre * n_post + post]`) so that
/// delivering one input spike touches a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasticConnection {
    n_post: usize,
    n_pre: usize,
    weights: Vec<f64>,
    x_pre: Vec<f64>,
    x_post1: Vec<f64>,
    x_post2: Vec<f64>,
    /// Same layout as `weights`; `None` means every synapse is alive.
    mask: Option<Vec<bool>>,
}

impl PlasticConnection {
    pub fn zeros(n_post: usize, n_pre: usize) -> Self {
        Self {
            n_post,
            n_pre,
            weights: vec![0.0; n_post * n_pre],
            x_pre: vec![0.0; n_pre],
            x_post1: vec![0.0; n_post],
            x_post2: vec![0.0; n_post],
            mask: None,
        }
    }

    /// Uniform weights in `[0, w_init_max)`.
    pub fn random<R: Rng + ?Sized>(n_post: usize, n_pre: usize, w_init_max: f64, rng: &mut R) -> Self {
        let mut conn = Self::zeros(n_post, n_pre);
        // Draw in neuron-major order so the stream layout matches the
        // checkpoint ordering.
        for post in 0..n_post {
            for pre in 0..n_pre {
                conn.weights[pre * n_post + post] = rng.random::<f64>() * w_init_max;
            }
        }
        conn
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn synapse_count(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    fn idx(&self, post: usize, pre: usize) -> usize {
        pre * self.n_post + post
    }

    pub fn weight(&self, post: usize, pre: usize) -> f64 {
        self.weights[self.idx(post, pre)]
    }

    pub fn set_weight(&mut self, post: usize, pre: usize, w: f64) {
        let i = self.idx(post, pre);
        self.weights[i] = w;
    }

    pub fn is_alive(&self, post: usize, pre: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[self.idx(post, pre)])
    }

    /// Effective weight: zero for a masked synapse.
    pub fn effective_weight(&self, post: usize, pre: usize) -> f64 {
        if self.is_alive(post, pre) {
            self.weight(post, pre)
        } else {
            0.0
        }
    }

    pub fn kill_synapse(&mut self, post: usize, pre: usize) {
        let len = self.weights.len();
        let i = self.idx(post, pre);
        self.mask.get_or_insert_with(|| vec![true; len])[i] = false;
    }

    pub fn alive_count(&self) -> usize {
        match &self.mask {
            None => self.weights.len(),
            Some(m) => m.iter().filter(|&&a| a).count(),
        }
    }

    pub fn has_mask(&self) -> bool {
        self.mask.is_some()
    }

    /// Outgoing weights of presynaptic input `pre`, one per postsynaptic neuron.
    #[inline]
    pub fn column(&self, pre: usize) -> &[f64] {
        &self.weights[pre * self.n_post..(pre + 1) * self.n_post]
    }

    #[inline]
    pub fn column_mask(&self, pre: usize) -> Option<&[bool]> {
        self.mask
            .as_deref()
            .map(|m| &m[pre * self.n_post..(pre + 1) * self.n_post])
    }

    /// Incoming weights of one postsynaptic neuron (copied; storage is input-major).
    pub fn row(&self, post: usize) -> Vec<f64> {
        (0..self.n_pre).map(|pre| self.weight(post, pre)).collect()
    }

    pub fn x_pre(&self) -> &[f64] {
        &self.x_pre
    }

    pub fn x_post1(&self) -> &[f64] {
        &self.x_post1
    }

    pub fn x_post2(&self) -> &[f64] {
        &self.x_post2
    }

    pub fn traces_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.x_pre, &mut self.x_post1, &mut self.x_post2)
    }

    /// Depression on a presynaptic spike, then `x_pre` reset.
    pub fn on_presynaptic_spike(&mut self, pre: usize, params: &StdpParams) -> Result<()> {
        if pre >= self.n_pre {
            return Err(SnnError::Contract(format!(
                "presynaptic index {pre} out of range ({} inputs)",
                self.n_pre
            )));
        }
        self.depress(pre, params);
        Ok(())
    }

    #[inline]
    pub(crate) fn depress(&mut self, pre: usize, params: &StdpParams) {
        let n = self.n_post;
        let col = &mut self.weights[pre * n..(pre + 1) * n];
        match self.mask.as_deref() {
            None => {
                for (w, &x1) in col.iter_mut().zip(&self.x_post1) {
                    *w = (*w - params.eta_pre * x1).clamp(params.w_min, params.w_max);
                }
            }
            Some(mask) => {
                let m = &mask[pre * n..(pre + 1) * n];
                for ((w, &x1), &alive) in col.iter_mut().zip(&self.x_post1).zip(m) {
                    if alive {
                        *w = (*w - params.eta_pre * x1).clamp(params.w_min, params.w_max);
                    }
                }
            }
        }
        self.x_pre[pre] = 1.0;
    }

    /// Potentiation on a postsynaptic spike using the pre-reset `x_post2`,
    /// then `x_post1`/`x_post2` reset.
    pub fn on_postsynaptic_spike(&mut self, post: usize, params: &StdpParams) -> Result<()> {
        if post >= self.n_post {
            return Err(SnnError::Contract(format!(
                "postsynaptic index {post} out of range ({} neurons)",
                self.n_post
            )));
        }
        self.potentiate(post, params);
        Ok(())
    }

    #[inline]
    pub(crate) fn potentiate(&mut self, post: usize, params: &StdpParams) {
        let gain = params.eta_post * self.x_post2[post];
        let n = self.n_post;
        if gain != 0.0 {
            for pre in 0..self.n_pre {
                let i = pre * n + post;
                if self.mask.as_ref().is_some_and(|m| !m[i]) {
                    continue;
                }
                let w = self.weights[i] + gain * self.x_pre[pre];
                self.weights[i] = w.clamp(params.w_min, params.w_max);
            }
        }
        self.x_post1[post] = 1.0;
        self.x_post2[post] = 1.0;
    }

    pub fn decay_traces(&mut self, decay: &TraceDecay) {
        for x in &mut self.x_pre {
            *x = flush_subnormal(*x * decay.pre);
        }
        for x in &mut self.x_post1 {
            *x = flush_subnormal(*x * decay.post1);
        }
        for x in &mut self.x_post2 {
            *x = flush_subnormal(*x * decay.post2);
        }
    }

    pub fn alive_row_sum(&self, post: usize) -> f64 {
        (0..self.n_pre).map(|pre| self.effective_weight(post, pre)).sum()
    }

    /// Rescales each neuron's alive incoming weights to sum to `c_norm`.
    /// Rows summing to zero are skipped and reported. Results are not
    /// re-clipped to `w_max`.
    pub fn normalize_incoming(&mut self, c_norm: f64) -> NormalizeReport {
        let mut report = NormalizeReport::default();
        let n = self.n_post;
        let mut sums = vec![0.0; n];
        for pre in 0..self.n_pre {
            let col = &self.weights[pre * n..(pre + 1) * n];
            match self.column_mask(pre) {
                None => sums.iter_mut().zip(col).for_each(|(s, &w)| *s += w),
                Some(m) => {
                    for ((s, &w), &alive) in sums.iter_mut().zip(col).zip(m) {
                        if alive {
                            *s += w;
                        }
                    }
                }
            }
        }
        let factors: Vec<f64> = sums
            .iter()
            .enumerate()
            .map(|(post, &s)| {
                if s > 0.0 {
                    c_norm / s
                } else {
                    report.skipped.push(post);
                    1.0
                }
            })
            .collect();
        for pre in 0..self.n_pre {
            let base = pre * n;
            for (post, f) in factors.iter().enumerate() {
                let i = base + post;
                if self.mask.as_ref().is_none_or(|m| m[i]) {
                    self.weights[i] *= f;
                }
            }
        }
        report
    }

    /// Weights in neuron-major order (`post`, then `pre`), the persisted layout.
    pub fn weights_neuron_major(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_post).flat_map(move |post| (0..self.n_pre).map(move |pre| self.weight(post, pre)))
    }

    /// Mask flags in neuron-major order.
    pub fn mask_neuron_major(&self) -> Option<Vec<bool>> {
        self.mask.as_ref().map(|m| {
            (0..self.n_post)
                .flat_map(|post| (0..self.n_pre).map(move |pre| m[pre * self.n_post + post]))
                .collect()
        })
    }

    /// Restores weights from neuron-major order.
    pub fn load_neuron_major(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.weights.len() {
            return Err(SnnError::Checkpoint(format!(
                "expected {} weights, found {}",
                self.weights.len(),
                values.len()
            )));
        }
        for post in 0..self.n_post {
            for pre in 0..self.n_pre {
                let i = self.idx(post, pre);
                self.weights[i] = values[post * self.n_pre + pre];
            }
        }
        Ok(())
    }

    pub fn load_mask_neuron_major(&mut self, flags: &[bool]) -> Result<()> {
        if flags.len() != self.weights.len() {
            return Err(SnnError::Checkpoint("synapse mask length mismatch".into()));
        }
        if flags.iter().all(|&a| a) {
            self.mask = None;
            return Ok(());
        }
        let mut mask = vec![true; flags.len()];
        for post in 0..self.n_post {
            for pre in 0..self.n_pre {
                mask[pre * self.n_post + post] = flags[post * self.n_pre + pre];
            }
        }
        self.mask = Some(mask);
        Ok(())
    }

    pub fn load_traces(&mut self, x_pre: &[f64], x_post1: &[f64], x_post2: &[f64]) -> Result<()> {
        if x_pre.len() != self.n_pre || x_post1.len() != self.n_post || x_post2.len() != self.n_post {
            return Err(SnnError::Checkpoint("trace length mismatch".into()));
        }
        self.x_pre.copy_from_slice(x_pre);
        self.x_post1.copy_from_slice(x_post1);
        self.x_post2.copy_from_slice(x_post2);
        Ok(())
    }

    pub fn raw_weights(&self) -> &[f64] {
        &self.weights
    }
}
