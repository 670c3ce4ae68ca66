//! Checkpoint directory layout:
//!
//! * `manifest`: TOML with the format version, run counters, topology
//!   descriptor, array lengths, SHA-256 of every blob and the full config.
//! * `weights.bin`: little-endian f64. All plastic weights in order
//!   pathway, area, sub-area block, neuron, local input index; then θ for
//!   every output neuron in global order.
//! * `state.bin`: little-endian f64 dynamic state (membrane, conductances,
//!   refractory counters, traces) so training resumes bit-exactly.
//! * `decoder.bin` (if calibrated): little-endian f64 response sums
//!   (neuron-major), per-class presentation counts, VFA weights
//!   (neuron-major), VFO class per neuron.
//! * `masks.bin` (if synapses were deleted): one byte per plastic synapse,
//!   weight order, 1 = alive.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoding::{DecoderTable, ResponseTable, VfaWeights, VfoAssignment};
use crate::engine::{Network, SimConfig};
use crate::error::{Result, SnnError};
use crate::parallel::Executor;
use crate::topology::PATHWAY_LAYOUT;

pub const CHECKPOINT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest";
const WEIGHTS: &str = "weights.bin";
const STATE: &str = "state.bin";
const DECODER: &str = "decoder.bin";
const MASKS: &str = "masks.bin";

/// A trained (or freshly initialised) network with its optional decoder.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network,
    pub decoder: Option<DecoderTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    seed: u64,
    iteration: u64,
    clock: u64,
    frozen: bool,
    topology: TopologyDescriptor,
    arrays: Arrays,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decoder: Option<DecoderInfo>,
    config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TopologyDescriptor {
    size_sa: usize,
    /// `[kernel, stride, features]` per pathway.
    kernels: Vec<[usize; 3]>,
    dead_neurons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Arrays {
    excitatory_weights: usize,
    thresholds: usize,
    state_values: usize,
    weights_sha256: String,
    state_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    masks_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DecoderInfo {
    classes: usize,
    neurons: usize,
    mu: f64,
    sha256: String,
}

fn kernels_for(size_sa: usize) -> Vec<[usize; 3]> {
    PATHWAY_LAYOUT
        .iter()
        .map(|&(k, s, areas_mult)| [k, s, areas_mult * size_sa])
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn f64_bytes(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values.into_iter().flat_map(f64::to_le_bytes).collect()
}

fn bytes_f64(bytes: &[u8], file: &str) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(SnnError::Checkpoint(format!("{file} length is not a multiple of 8 bytes")));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, bytes).map_err(|e| SnnError::io(p, e))
}

fn read_file(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let p = dir.join(name);
    std::fs::read(&p).map_err(|e| SnnError::io(p, e))
}

fn verify(bytes: &[u8], expected: &str, file: &str) -> Result<()> {
    let actual = sha256_hex(bytes);
    if actual != expected {
        return Err(SnnError::Checkpoint(format!(
            "{file} checksum mismatch (manifest {expected}, file {actual})"
        )));
    }
    Ok(())
}

/// Writes a checkpoint into `dir`. Refuses to replace an existing
/// checkpoint unless `overwrite` is set.
pub fn save_checkpoint(ckpt: &Checkpoint, dir: &Path, overwrite: bool) -> Result<()> {
    if dir.join(MANIFEST).exists() && !overwrite {
        return Err(SnnError::Checkpoint(format!(
            "{} already holds a checkpoint; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| SnnError::io(dir, e))?;
    let net = &ckpt.network;
    let weights = net.weights();
    let thetas = net.thresholds();
    let state = net.dynamic_state();

    let weight_bytes = f64_bytes(weights.iter().copied().chain(thetas.iter().copied()));
    let state_bytes = f64_bytes(state.iter().copied());
    let mask_bytes: Option<Vec<u8>> = net.synapse_mask().map(|m| m.into_iter().map(u8::from).collect());

    let decoder = ckpt.decoder.as_ref().map(|d| {
        let r = &d.responses;
        let bytes = f64_bytes(
            r.sums()
                .iter()
                .copied()
                .chain(r.presentations().iter().map(|&p| p as f64))
                .chain(d.vfa.raw().iter().copied())
                .chain(d.vfo.assigned().iter().map(|&c| c as f64)),
        );
        let info = DecoderInfo {
            classes: r.classes(),
            neurons: r.neurons(),
            mu: d.vfa.mu(),
            sha256: sha256_hex(&bytes),
        };
        (info, bytes)
    });

    let cfg = net.config().clone();
    let manifest = Manifest {
        format_version: CHECKPOINT_VERSION,
        seed: cfg.seed,
        iteration: net.iteration(),
        clock: net.clock(),
        frozen: net.is_frozen(),
        topology: TopologyDescriptor {
            size_sa: cfg.size_sa,
            kernels: kernels_for(cfg.size_sa),
            dead_neurons: net.topology().dead_neurons(),
        },
        arrays: Arrays {
            excitatory_weights: weights.len(),
            thresholds: thetas.len(),
            state_values: state.len(),
            weights_sha256: sha256_hex(&weight_bytes),
            state_sha256: sha256_hex(&state_bytes),
            masks_sha256: mask_bytes.as_deref().map(sha256_hex),
        },
        decoder: decoder.as_ref().map(|(i, _)| i.clone()),
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| SnnError::Checkpoint(format!("manifest encoding: {e}")))?;

    write_file(dir, WEIGHTS, &weight_bytes)?;
    write_file(dir, STATE, &state_bytes)?;
    match &mask_bytes {
        Some(b) => write_file(dir, MASKS, b)?,
        None => remove_stale(dir, MASKS)?,
    }
    match &decoder {
        Some((_, b)) => write_file(dir, DECODER, b)?,
        None => remove_stale(dir, DECODER)?,
    }
    write_file(dir, MANIFEST, text.as_bytes())
}

fn remove_stale(dir: &Path, name: &str) -> Result<()> {
    let p = dir.join(name);
    match std::fs::remove_file(&p) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(SnnError::io(p, e)),
    }
}

/// Loads and validates a checkpoint. `workers` overrides the stored worker
/// count; results do not depend on it.
pub fn load_checkpoint(dir: &Path, workers: Option<usize>) -> Result<Checkpoint> {
    let text = read_file(dir, MANIFEST)?;
    let text = String::from_utf8(text).map_err(|_| SnnError::Checkpoint("manifest is not UTF-8".into()))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| SnnError::Parse {
        path: dir.join(MANIFEST),
        field: "manifest",
        detail: e.to_string(),
    })?;
    if m.format_version != CHECKPOINT_VERSION {
        return Err(SnnError::Checkpoint(format!(
            "unsupported checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
            m.format_version
        )));
    }
    let mut config = m.config.clone();
    if m.topology.size_sa != config.size_sa {
        return Err(SnnError::Checkpoint(format!(
            "topology size_sa {} disagrees with config size_sa {}",
            m.topology.size_sa, config.size_sa
        )));
    }
    if m.topology.kernels != kernels_for(m.topology.size_sa) {
        return Err(SnnError::Checkpoint("unsupported pathway layout in topology descriptor".into()));
    }
    if m.seed != config.seed {
        return Err(SnnError::Checkpoint("manifest seed disagrees with config seed".into()));
    }
    if let Some(w) = workers {
        config.workers = w;
    }
    let executor = Arc::new(Executor::new(config.workers)?);
    let mut net = Network::with_executor(config, executor)?;

    let n_w = net.topology().excitatory_synapse_count();
    let n_t = net.neuron_count();
    let n_s = net.dynamic_state_len();
    if (m.arrays.excitatory_weights, m.arrays.thresholds, m.arrays.state_values) != (n_w, n_t, n_s) {
        return Err(SnnError::Checkpoint(format!(
            "array lengths ({}, {}, {}) do not match the topology ({n_w}, {n_t}, {n_s})",
            m.arrays.excitatory_weights, m.arrays.thresholds, m.arrays.state_values
        )));
    }

    let wb = read_file(dir, WEIGHTS)?;
    verify(&wb, &m.arrays.weights_sha256, WEIGHTS)?;
    let wv = bytes_f64(&wb, WEIGHTS)?;
    if wv.len() != n_w + n_t {
        return Err(SnnError::Checkpoint(format!(
            "{WEIGHTS} holds {} values, expected {}",
            wv.len(),
            n_w + n_t
        )));
    }
    net.load_weights(&wv[..n_w])?;
    net.load_thresholds(&wv[n_w..])?;

    let sb = read_file(dir, STATE)?;
    verify(&sb, &m.arrays.state_sha256, STATE)?;
    net.load_dynamic_state(&bytes_f64(&sb, STATE)?)?;

    if let Some(hash) = &m.arrays.masks_sha256 {
        let mb = read_file(dir, MASKS)?;
        verify(&mb, hash, MASKS)?;
        let mask: Vec<bool> = mb.iter().map(|&b| b != 0).collect();
        net.load_synapse_mask(&mask)?;
    }

    if !m.topology.dead_neurons.is_empty() {
        let mut alive = vec![true; n_t];
        for &d in &m.topology.dead_neurons {
            if d >= n_t {
                return Err(SnnError::Checkpoint(format!("dead neuron index {d} out of range")));
            }
            alive[d] = false;
        }
        net.set_neuron_mask(alive)?;
    }

    net.set_iteration(m.iteration);
    net.set_clock(m.clock);
    if m.frozen {
        net.freeze();
    }

    let decoder = match &m.decoder {
        None => None,
        Some(info) => {
            let db = read_file(dir, DECODER)?;
            verify(&db, &info.sha256, DECODER)?;
            Some(decode_decoder(&bytes_f64(&db, DECODER)?, info, n_t)?)
        }
    };
    Ok(Checkpoint { network: net, decoder })
}

fn decode_decoder(v: &[f64], info: &DecoderInfo, neurons: usize) -> Result<DecoderTable> {
    let (n, c) = (info.neurons, info.classes);
    if n != neurons || c == 0 {
        return Err(SnnError::Checkpoint("decoder shape does not match the network".into()));
    }
    if v.len() != 2 * n * c + c + n {
        return Err(SnnError::Checkpoint(format!("{DECODER} has {} values", v.len())));
    }
    let (sums, rest) = v.split_at(n * c);
    let (pres, rest) = rest.split_at(c);
    let (vfa, vfo) = rest.split_at(n * c);
    let responses = ResponseTable::from_parts(n, c, sums.to_vec(), pres.iter().map(|&p| p as u64).collect())?;
    Ok(DecoderTable {
        responses,
        vfa: VfaWeights::from_parts(n, c, info.mu, vfa.to_vec())?,
        vfo: VfoAssignment::from_parts(c, vfo.iter().map(|&x| x as usize).collect())?,
    })
}
