//! Event-ordered simulation of the whole network and the training,
//! calibration and evaluation drivers built on it.
//!
//! Each step runs, per sub-area: delivery of this step's input spikes (with
//! presynaptic STDP), delivery of lateral inhibition from the previous
//! step's output spikes, the membrane update, threshold checks (with
//! postsynaptic STDP), then the exponential decays. Sub-areas share no state
//! within a presentation, so they run independently.

mod config;
mod driver;
mod network;
mod subarea;

pub use config::{alpha_schedule, AlphaSchedule, SimConfig};
pub use driver::{
    calibrate, collect_responses, evaluate, measure_intensity, present_image, recent_training_indices, score,
    train, train_iterations, EvalReport, IterationRecord, PresentationOutcome, RunLog, TrainOptions,
    ValidationProbe,
};
pub use network::{Mode, Network, STATE_FIELDS_PER_NEURON};
pub use subarea::{StepContext, SubAreaSim};
