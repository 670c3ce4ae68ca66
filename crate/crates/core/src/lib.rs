//! Clock-driven simulation and unsupervised training of a three-pathway
//! spiking network built from conductance-based LIF neurons, triplet STDP
//! synapses and lateral inhibition confined to equal-size competition
//! sub-areas.
//!
//! The crate is organised bottom-up:
//!
//! * [`neuron`]: single-neuron dynamics (membrane, conductances, adaptive
//!   threshold, adaptive reset) and the vote-counter neuron of the decoder.
//! * [`plasticity`]: triplet-STDP synapse groups with trace bookkeeping and
//!   incoming-weight normalisation.
//! * [`encoding`]: Poisson rate coding of 28×28 images and the adaptive
//!   input-intensity rule.
//! * [`topology`]: receptive fields, the three pathways, sub-area partitioning
//!   and fault injection (neuron and synapse deletion).
//! * [`decoding`]: response statistics plus vote-for-one and vote-for-all
//!   decoders.
//! * [`engine`]: the fixed-step simulation loop, training / calibration /
//!   evaluation drivers and the α schedule.
//! * [`dataio`]: IDX dataset loading and checkpoint persistence.
//!
//! Sub-areas never exchange state inside a presentation, so the engine runs
//! them as independent tasks. With the `parallel` feature (on by default)
//! they are distributed over a rayon pool; without it, or with one worker,
//! they run sequentially. Results are bit-identical either way.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod decoding;
pub mod encoding;
pub mod engine;
pub mod error;
pub mod neuron;
pub mod parallel;
pub mod plasticity;
pub mod rng;
pub mod topology;

pub use error::{Result, SnnError};

/// Side length of the input images in pixels.
pub const IMAGE_SIDE: usize = 28;
/// Number of input neurons (one per pixel).
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
