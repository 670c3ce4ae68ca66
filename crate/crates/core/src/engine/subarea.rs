use crate::neuron::{NeuronParams, NeuronState, RepolarizationParams, StepConstants};
use crate::plasticity::{PlasticConnection, StdpParams, TraceDecay};
use crate::IMAGE_PIXELS;

const NO_INPUT: u16 = u16::MAX;

/// Parameters shared by every sub-area during one phase.
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    pub neuron: NeuronParams,
    pub consts: StepConstants,
    pub stdp: StdpParams,
    pub traces: TraceDecay,
    pub repol: RepolarizationParams,
    pub w_inh: f64,
    pub learning: bool,
    pub adapt_threshold: bool,
}

/// Simulation state of one competition sub-area: its neurons, their shared
/// plastic input connection and the spikes that inhibit the next step.
#[derive(Debug, Clone)]
pub struct SubAreaSim {
    pub(crate) neurons: Vec<NeuronState>,
    pub(crate) alive: Vec<bool>,
    pub(crate) conn: PlasticConnection,
    /// Pixel index → local input index.
    local_of: Vec<u16>,
    /// Neurons that fired in the previous step (local ids).
    fired_prev: Vec<u16>,
    fired_now: Vec<u16>,
    pub(crate) counts: Vec<u32>,
}

impl SubAreaSim {
    pub fn new(params: &NeuronParams, inputs: &[u16], conn: PlasticConnection) -> Self {
        let mut local_of = vec![NO_INPUT; IMAGE_PIXELS];
        for (li, &px) in inputs.iter().enumerate() {
            local_of[px as usize] = li as u16;
        }
        let n = conn.n_post();
        Self {
            neurons: vec![NeuronState::at_rest(params); n],
            alive: vec![true; n],
            conn,
            local_of,
            fired_prev: Vec::new(),
            fired_now: Vec::new(),
            counts: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    pub fn connection(&self) -> &PlasticConnection {
        &self.conn
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub(crate) fn pending_inhibition(&self) -> &[u16] {
        &self.fired_prev
    }

    pub(crate) fn set_pending_inhibition(&mut self, fired: Vec<u16>) {
        self.fired_prev = fired;
    }

    pub fn begin_presentation(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        for n in &mut self.neurons {
            n.begin_presentation();
        }
    }

    /// Advances one step. `inputs` are the pixels spiking at this step;
    /// lateral inhibition comes from the neurons that fired one step earlier.
    pub fn step(&mut self, inputs: &[u16], clock: u64, ctx: &StepContext) {
        for &px in inputs {
            let li = self.local_of[px as usize];
            if li == NO_INPUT {
                continue;
            }
            let li = li as usize;
            let col = self.conn.column(li);
            match self.conn.column_mask(li) {
                None => {
                    for (n, &w) in self.neurons.iter_mut().zip(col) {
                        n.receive_excitatory(w);
                    }
                }
                Some(mask) => {
                    for ((n, &w), &m) in self.neurons.iter_mut().zip(col).zip(mask) {
                        if m {
                            n.receive_excitatory(w);
                        }
                    }
                }
            }
            if ctx.learning {
                self.conn.depress(li, &ctx.stdp);
            }
        }

        if !self.fired_prev.is_empty() {
            let fired = self.fired_prev.len();
            for (j, n) in self.neurons.iter_mut().enumerate() {
                let senders = fired - self.fired_prev.iter().filter(|&&f| f as usize == j).count();
                for _ in 0..senders {
                    n.receive_inhibitory(ctx.w_inh);
                }
            }
        }

        self.fired_now.clear();
        for j in 0..self.neurons.len() {
            if !self.alive[j] {
                continue;
            }
            let n = &mut self.neurons[j];
            n.integrate_membrane(&ctx.neuron, &ctx.consts);
            if n.check_fire(&ctx.neuron, &ctx.repol, &ctx.consts, clock, ctx.adapt_threshold) {
                self.counts[j] += 1;
                self.fired_now.push(j as u16);
                if ctx.learning {
                    self.conn.potentiate(j, &ctx.stdp);
                }
            }
        }

        for n in &mut self.neurons {
            n.decay(&ctx.neuron, &ctx.consts, ctx.adapt_threshold);
        }
        if ctx.learning {
            self.conn.decay_traces(&ctx.traces);
        }
        std::mem::swap(&mut self.fired_prev, &mut self.fired_now);
    }
}
