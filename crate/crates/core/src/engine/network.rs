use std::sync::Arc;

use log::warn;
use sha2::{Digest, Sha256};

use super::config::SimConfig;
use super::subarea::{StepContext, SubAreaSim};
use crate::encoding::SpikeTrain;
use crate::error::{Result, SnnError};
use crate::neuron::{RepolarizationParams, StepConstants};
use crate::parallel::Executor;
use crate::plasticity::{PlasticConnection, TraceDecay};
use crate::rng::{Domain, StreamKey};
use crate::topology::{build_inception, delete_synapses, NetworkTopology};

/// Whether a phase updates plastic state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// STDP on, adaptive threshold on, adaptive reset with strength `alpha`.
    Learning { alpha: f64 },
    /// No STDP, fixed reset, threshold frozen unless homeostasis at
    /// inference is configured.
    Frozen,
}

/// Per-neuron values in the dynamic state blob.
pub const STATE_FIELDS_PER_NEURON: usize = 8;

/// The full network: topology, per-sub-area state and the run clock.
#[derive(Debug, Clone)]
pub struct Network {
    config: SimConfig,
    topology: NetworkTopology,
    subareas: Vec<SubAreaSim>,
    consts: StepConstants,
    traces: TraceDecay,
    executor: Arc<Executor>,
    iteration: u64,
    clock: u64,
    frozen: bool,
}

impl Network {
    /// Builds a freshly initialised network: uniform random weights,
    /// normalised, all neurons at rest.
    pub fn new(config: SimConfig) -> Result<Self> {
        let executor = Arc::new(Executor::new(config.workers)?);
        Self::with_executor(config, executor)
    }

    pub fn with_executor(config: SimConfig, executor: Arc<Executor>) -> Result<Self> {
        config.validate()?;
        let topology = build_inception(config.size_sa, config.w_inh)?;
        let subareas = topology
            .sub_areas()
            .iter()
            .enumerate()
            .map(|(i, sa)| {
                let mut rng = StreamKey::new(config.seed, Domain::Init, i as u64, 0).rng(0);
                let conn = PlasticConnection::random(sa.neurons.len(), sa.inputs.len(), config.w_init_max, &mut rng);
                SubAreaSim::new(&config.neuron, &sa.inputs, conn)
            })
            .collect();
        let mut net = Self {
            consts: StepConstants::new(&config.neuron, config.dt)?,
            traces: TraceDecay::new(&config.stdp, config.dt),
            config,
            topology,
            subareas,
            executor,
            iteration: 0,
            clock: 0,
            frozen: false,
        };
        net.normalize();
        Ok(net)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn subareas(&self) -> &[SubAreaSim] {
        &self.subareas
    }

    pub fn executor(&self) -> &Arc<Executor> {
        &self.executor
    }

    /// Runs later phases on a different executor. Results do not depend on it.
    pub fn set_executor(&mut self, executor: Arc<Executor>) {
        self.config.workers = executor.workers();
        self.executor = executor;
    }

    /// Changes the seed used for later input encoding. Weights are unaffected.
    pub fn set_seed(&mut self, seed: u64) -> Result<()> {
        let mut cfg = self.config.clone();
        cfg.seed = seed;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn neuron_count(&self) -> usize {
        self.topology.neuron_count()
    }

    /// Completed training iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub(crate) fn set_iteration(&mut self, iteration: u64) {
        self.iteration = iteration;
    }

    pub(crate) fn advance_iteration(&mut self) {
        self.iteration += 1;
    }

    /// Simulation steps run so far.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub(crate) fn set_clock(&mut self, clock: u64) {
        self.clock = clock;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Ends learning. Plastic weights and thresholds are fixed from here on.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Re-enables learning, e.g. to continue training from a checkpoint.
    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn alpha_at_current_iteration(&self) -> f64 {
        self.config.alpha.at(self.iteration)
    }

    fn context(&self, mode: Mode) -> Result<StepContext> {
        let (repol, learning, adapt) = match mode {
            Mode::Learning { alpha } => {
                if self.frozen {
                    return Err(SnnError::Contract("learning phase requested on a frozen network".into()));
                }
                (RepolarizationParams::new(alpha, &self.config.neuron)?, true, true)
            }
            Mode::Frozen => (
                RepolarizationParams::disabled(&self.config.neuron),
                false,
                self.config.homeostasis_at_inference,
            ),
        };
        Ok(StepContext {
            neuron: self.config.neuron,
            consts: self.consts,
            stdp: self.config.stdp,
            traces: self.traces,
            repol,
            w_inh: self.config.w_inh,
            learning,
            adapt_threshold: adapt,
        })
    }

    /// Presents one input train and returns the spike count of every output
    /// neuron (global order).
    pub fn run_presentation(&mut self, train: &SpikeTrain, mode: Mode) -> Result<Vec<u32>> {
        let steps = self.config.present_steps();
        if train.steps() != steps {
            return Err(SnnError::Contract(format!(
                "spike train has {} steps, presentation needs {steps}",
                train.steps()
            )));
        }
        let clock0 = self.clock;
        let ctx = self.context(mode)?;
        self.executor.map_mut(&mut self.subareas, |_, sa| {
            sa.begin_presentation();
            for t in 0..steps {
                sa.step(train.at(t), clock0 + t as u64, &ctx);
            }
        });
        self.clock += steps as u64;
        Ok(self.spike_counts())
    }

    /// Input-free interval between presentations.
    pub fn rest(&mut self, mode: Mode) -> Result<()> {
        let steps = self.config.rest_steps();
        let clock0 = self.clock;
        let ctx = self.context(mode)?;
        self.executor.map_mut(&mut self.subareas, |_, sa| {
            for t in 0..steps {
                sa.step(&[], clock0 + t as u64, &ctx);
            }
        });
        self.clock += steps as u64;
        Ok(())
    }

    /// Spike counts of the last presentation, global neuron order.
    pub fn spike_counts(&self) -> Vec<u32> {
        self.subareas.iter().flat_map(|sa| sa.counts().iter().copied()).collect()
    }

    /// Rescales every neuron's incoming weights to its pathway's target sum.
    /// Returns the number of neurons skipped because all their weights are 0.
    pub fn normalize(&mut self) -> usize {
        let mut skipped = 0;
        for (sa, info) in self.subareas.iter_mut().zip(self.topology.sub_areas()) {
            let report = sa.conn.normalize_incoming(self.config.c_norm_for(info.pathway));
            for &post in &report.skipped {
                warn!(
                    "neuron {} has no non-zero incoming weight; normalisation skipped",
                    info.neurons.start + post
                );
            }
            skipped += report.skipped.len();
        }
        skipped
    }

    /// Absolute firing thresholds θ, global order.
    pub fn thresholds(&self) -> Vec<f64> {
        self.subareas
            .iter()
            .flat_map(|sa| sa.neurons().iter().map(|n| n.theta))
            .collect()
    }

    /// All plastic weights in persisted order (sub-area, neuron, input).
    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.topology.excitatory_synapse_count());
        for sa in &self.subareas {
            out.extend(sa.connection().weights_neuron_major());
        }
        out
    }

    /// Synapse liveness in persisted order, or `None` if nothing was deleted.
    pub fn synapse_mask(&self) -> Option<Vec<bool>> {
        if !self.subareas.iter().any(|sa| sa.connection().has_mask()) {
            return None;
        }
        let mut out = Vec::with_capacity(self.topology.excitatory_synapse_count());
        for sa in &self.subareas {
            let c = sa.connection();
            match c.mask_neuron_major() {
                Some(m) => out.extend(m),
                None => out.extend(std::iter::repeat_n(true, c.synapse_count())),
            }
        }
        Some(out)
    }

    /// SHA-256 (hex) over the persisted weights followed by the thresholds.
    pub fn weight_checksum(&self) -> String {
        let mut h = Sha256::new();
        for w in self.weights() {
            h.update(w.to_le_bytes());
        }
        for t in self.thresholds() {
            h.update(t.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load_weights(&mut self, weights: &[f64]) -> Result<()> {
        let expected = self.topology.excitatory_synapse_count();
        if weights.len() != expected {
            return Err(SnnError::Checkpoint(format!(
                "expected {expected} weights, found {}",
                weights.len()
            )));
        }
        let mut off = 0;
        for sa in &mut self.subareas {
            let n = sa.conn.synapse_count();
            sa.conn.load_neuron_major(&weights[off..off + n])?;
            off += n;
        }
        Ok(())
    }

    pub fn load_thresholds(&mut self, thetas: &[f64]) -> Result<()> {
        if thetas.len() != self.neuron_count() {
            return Err(SnnError::Checkpoint(format!(
                "expected {} thresholds, found {}",
                self.neuron_count(),
                thetas.len()
            )));
        }
        let mut it = thetas.iter();
        for sa in &mut self.subareas {
            for n in &mut sa.neurons {
                n.theta = *it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn load_synapse_mask(&mut self, mask: &[bool]) -> Result<()> {
        if mask.len() != self.topology.excitatory_synapse_count() {
            return Err(SnnError::Checkpoint("synapse mask length mismatch".into()));
        }
        let mut off = 0;
        for sa in &mut self.subareas {
            let n = sa.conn.synapse_count();
            sa.conn.load_mask_neuron_major(&mask[off..off + n])?;
            off += n;
        }
        Ok(())
    }

    /// Length of [`Network::dynamic_state`].
    pub fn dynamic_state_len(&self) -> usize {
        let traces: usize = self
            .subareas
            .iter()
            .map(|sa| sa.conn.n_pre() + 2 * sa.conn.n_post())
            .sum();
        self.neuron_count() * STATE_FIELDS_PER_NEURON + traces
    }

    /// Everything besides weights and thresholds that the next step depends on:
    /// per neuron `v, g_e, g_i, g_e_ref, g_i_ref, refractory steps, last spike
    /// step (−1 if none), pending-inhibition flag`, then per sub-area the
    /// `x_pre, x_post1, x_post2` traces.
    pub fn dynamic_state(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dynamic_state_len());
        for sa in &self.subareas {
            let pending = sa.pending_inhibition();
            for (j, n) in sa.neurons().iter().enumerate() {
                out.extend([
                    n.v,
                    n.g_e,
                    n.g_i,
                    n.g_e_ref,
                    n.g_i_ref,
                    n.refractory_steps as f64,
                    n.last_spike_step.map_or(-1.0, |s| s as f64),
                    if pending.contains(&(j as u16)) { 1.0 } else { 0.0 },
                ]);
            }
        }
        for sa in &self.subareas {
            let c = sa.connection();
            out.extend_from_slice(c.x_pre());
            out.extend_from_slice(c.x_post1());
            out.extend_from_slice(c.x_post2());
        }
        out
    }

    pub fn load_dynamic_state(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.dynamic_state_len() {
            return Err(SnnError::Checkpoint(format!(
                "expected {} state values, found {}",
                self.dynamic_state_len(),
                state.len()
            )));
        }
        let mut chunks = state.chunks_exact(STATE_FIELDS_PER_NEURON);
        for sa in &mut self.subareas {
            let mut pending = Vec::new();
            for (j, n) in sa.neurons.iter_mut().enumerate() {
                let f = chunks.next().unwrap();
                n.v = f[0];
                n.g_e = f[1];
                n.g_i = f[2];
                n.g_e_ref = f[3];
                n.g_i_ref = f[4];
                n.refractory_steps = f[5] as u32;
                n.last_spike_step = (f[6] >= 0.0).then_some(f[6] as u64);
                if f[7] != 0.0 {
                    pending.push(j as u16);
                }
            }
            sa.set_pending_inhibition(pending);
        }
        let mut off = self.neuron_count() * STATE_FIELDS_PER_NEURON;
        for sa in &mut self.subareas {
            let (np, nq) = (sa.conn.n_pre(), sa.conn.n_post());
            let x_pre = &state[off..off + np];
            let x1 = &state[off + np..off + np + nq];
            let x2 = &state[off + np + nq..off + np + 2 * nq];
            sa.conn.load_traces(x_pre, x1, x2)?;
            off += np + 2 * nq;
        }
        Ok(())
    }

    /// Applies a neuron liveness mask (global order).
    pub fn set_neuron_mask(&mut self, alive: Vec<bool>) -> Result<()> {
        self.topology = self.topology.with_neuron_mask(alive)?;
        for (sa, info) in self.subareas.iter_mut().zip(self.topology.sub_areas()) {
            for (j, n) in info.neurons.clone().enumerate() {
                sa.alive[j] = self.topology.is_alive(n);
            }
        }
        Ok(())
    }

    /// Copy with each neuron removed independently with probability `rho`.
    pub fn with_deleted_neurons(&self, rho: f64, key: &StreamKey) -> Result<Network> {
        let mut net = self.clone();
        let topo = self.topology.delete_neurons(rho, key)?;
        net.set_neuron_mask(topo.neuron_mask().to_vec())?;
        Ok(net)
    }

    /// Copy with each plastic synapse removed independently with probability
    /// `rho`. Also returns the number of synapses removed.
    pub fn with_deleted_synapses(&self, rho: f64, key: &StreamKey) -> Result<(Network, usize)> {
        let mut net = self.clone();
        let mut conns: Vec<PlasticConnection> = net.subareas.iter().map(|sa| sa.conn.clone()).collect();
        let killed = delete_synapses(&mut conns, rho, key)?;
        for (sa, c) in net.subareas.iter_mut().zip(conns) {
            sa.conn = c;
        }
        Ok((net, killed))
    }
}
