use log::{info, warn};

use super::network::{Mode, Network};
use crate::dataio::Dataset;
use crate::decoding::{DecoderKind, DecoderTable, ResponseTable};
use crate::encoding::{adapt_intensity, encode_presentation, IntensityDecision};
use crate::error::{Result, SnnError};
use crate::rng::{Domain, StreamKey};

/// Result of presenting one image, including any re-presentations.
#[derive(Debug, Clone, PartialEq)]
pub struct PresentationOutcome {
    /// Spike counts of the final presentation.
    pub counts: Vec<u32>,
    pub attempts: u32,
    /// Output spikes summed over all presentations of the image.
    pub total_spikes: u64,
    /// Input rate of the final presentation.
    pub final_lambda: f64,
    pub gave_up: bool,
}

/// Presents `image` with adaptive intensity: each presentation is followed
/// by a rest phase, and the image is shown again at a higher rate while the
/// output layer stays too quiet.
pub fn present_image(
    net: &mut Network,
    image: &[u8],
    mode: Mode,
    domain: Domain,
    sample: u64,
) -> Result<PresentationOutcome> {
    let cfg = net.config().clone();
    let mut lambda = cfg.encoder.lambda_base;
    let mut total = 0u64;
    let mut attempt = 0u32;
    loop {
        let key = StreamKey::new(cfg.seed, domain, sample, attempt as u64);
        let train = encode_presentation(image, lambda, cfg.t_present, cfg.dt, &key)?;
        let counts = net.run_presentation(&train, mode)?;
        net.rest(mode)?;
        let spikes: u64 = counts.iter().map(|&c| c as u64).sum();
        total += spikes;
        let decision = adapt_intensity(lambda, spikes, &cfg.encoder, attempt);
        attempt += 1;
        match decision {
            IntensityDecision::Represent { lambda: next } => lambda = next,
            IntensityDecision::Accept { .. } | IntensityDecision::GiveUp { .. } => {
                return Ok(PresentationOutcome {
                    counts,
                    attempts: attempt,
                    total_spikes: total,
                    final_lambda: lambda,
                    gave_up: matches!(decision, IntensityDecision::GiveUp { .. }),
                });
            }
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub sample: usize,
    pub label: usize,
    pub alpha: f64,
    pub attempts: u32,
    pub output_spikes: u64,
    pub final_lambda: f64,
    pub gave_up: bool,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
}

impl RunLog {
    /// Iterations that needed more than one presentation.
    pub fn represented(&self) -> usize {
        self.records.iter().filter(|r| r.attempts > 1).count()
    }

    pub fn mean_output_spikes(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.output_spikes as f64).sum::<f64>() / self.records.len() as f64
    }
}

/// Periodic accuracy check on a frozen copy of the network during training.
#[derive(Debug, Clone)]
pub struct ValidationProbe<'a> {
    pub every: u64,
    pub data: &'a Dataset,
    pub calibration: Vec<usize>,
    pub validation: Vec<usize>,
    pub kind: DecoderKind,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    pub probe: Option<ValidationProbe<'a>>,
    /// Log progress every this many iterations (0 disables).
    pub log_every: u64,
}

/// Runs `iterations` learning iterations, continuing from the network's
/// iteration counter. Iteration `k` uses image `k mod len` of `data`.
/// The network stays plastic afterwards.
pub fn train_iterations(
    net: &mut Network,
    data: &Dataset,
    iterations: u64,
    opts: &TrainOptions<'_>,
) -> Result<RunLog> {
    if data.is_empty() {
        return Err(SnnError::Input("training set is empty".into()));
    }
    if net.is_frozen() {
        return Err(SnnError::Contract("cannot train a frozen network".into()));
    }
    let mut log = RunLog::default();
    for _ in 0..iterations {
        let it = net.iteration();
        let sample = (it % data.len() as u64) as usize;
        let alpha = net.alpha_at_current_iteration();
        let out = present_image(net, data.image(sample), Mode::Learning { alpha }, Domain::Train, it)?;
        net.normalize();
        net.advance_iteration();
        let mut record = IterationRecord {
            iteration: it,
            sample,
            label: data.label(sample),
            alpha,
            attempts: out.attempts,
            output_spikes: out.total_spikes,
            final_lambda: out.final_lambda,
            gave_up: out.gave_up,
            validation_accuracy: None,
        };
        if let Some(p) = &opts.probe {
            if p.every > 0 && net.iteration().is_multiple_of(p.every) {
                let mut frozen = net.clone();
                frozen.freeze();
                let table = calibrate(&frozen, p.data, &p.calibration)?;
                let report = evaluate(&frozen, &table, p.data, &p.validation, &[p.kind])?;
                info!("iteration {}: validation accuracy {:.4}", net.iteration(), report[0].accuracy);
                record.validation_accuracy = Some(report[0].accuracy);
            }
        }
        if opts.log_every > 0 && net.iteration().is_multiple_of(opts.log_every) {
            info!(
                "iteration {} (alpha {alpha}, {} spikes, {} attempts)",
                net.iteration(),
                out.total_spikes,
                out.attempts
            );
        }
        log.records.push(record);
    }
    Ok(log)
}

/// Trains and then freezes the network.
pub fn train(net: &mut Network, data: &Dataset, iterations: u64, opts: &TrainOptions<'_>) -> Result<RunLog> {
    let log = train_iterations(net, data, iterations, opts)?;
    net.freeze();
    Ok(log)
}

/// Indices of the images seen in the last `min(limit, trained)` iterations.
pub fn recent_training_indices(iterations: u64, train_len: usize, limit: usize) -> Vec<usize> {
    let n = (iterations as usize).min(limit);
    (iterations - n as u64..iterations)
        .map(|k| (k % train_len as u64) as usize)
        .collect()
}

/// Spike counts of a frozen network for each listed image. Runs on a copy,
/// so `net` itself is untouched and repeated calls see the same start state.
pub fn collect_responses(net: &Network, data: &Dataset, indices: &[usize], domain: Domain) -> Result<Vec<Vec<u32>>> {
    if !net.is_frozen() {
        return Err(SnnError::Contract("inference requires a frozen network".into()));
    }
    let mut sim = net.clone();
    indices
        .iter()
        .map(|&i| {
            check_index(data, i)?;
            Ok(present_image(&mut sim, data.image(i), Mode::Frozen, domain, i as u64)?.counts)
        })
        .collect()
}

/// Builds the decoder tables from the responses to labelled images.
pub fn calibrate(net: &Network, data: &Dataset, indices: &[usize]) -> Result<DecoderTable> {
    if indices.len() < data.classes() {
        warn!(
            "calibrating on {} images for {} classes; some classes may have no examples",
            indices.len(),
            data.classes()
        );
    }
    let responses = collect_responses(net, data, indices, Domain::Calibrate)?;
    let mut table = ResponseTable::new(net.neuron_count(), data.classes());
    for (&i, counts) in indices.iter().zip(&responses) {
        table.accumulate(counts, data.label(i))?;
    }
    for c in 0..data.classes() {
        if table.presentations()[c] == 0 {
            warn!("class {c} has no calibration examples");
        }
    }
    DecoderTable::from_responses(table, net.config().mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub kind: DecoderKind,
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Classifies each listed image with every decoder in `kinds`. All decoders
/// see the same spike counts.
pub fn evaluate(
    net: &Network,
    decoder: &DecoderTable,
    data: &Dataset,
    indices: &[usize],
    kinds: &[DecoderKind],
) -> Result<Vec<EvalReport>> {
    if decoder.classes() != data.classes() {
        return Err(SnnError::Input(format!(
            "decoder has {} classes, dataset has {}",
            decoder.classes(),
            data.classes()
        )));
    }
    let responses = collect_responses(net, data, indices, Domain::Evaluate)?;
    Ok(score(decoder, data, indices, &responses, kinds))
}

/// Scores precomputed responses.
pub fn score(
    decoder: &DecoderTable,
    data: &Dataset,
    indices: &[usize],
    responses: &[Vec<u32>],
    kinds: &[DecoderKind],
) -> Vec<EvalReport> {
    let k = decoder.classes();
    kinds
        .iter()
        .map(|&kind| {
            let mut confusion = vec![vec![0u64; k]; k];
            let mut correct = 0;
            for (&i, counts) in indices.iter().zip(responses) {
                let truth = data.label(i);
                let pred = decoder.decode(kind, counts);
                confusion[truth][pred] += 1;
                correct += (truth == pred) as u64;
            }
            let total = indices.len() as u64;
            EvalReport {
                kind,
                correct,
                total,
                accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
                confusion,
            }
        })
        .collect()
}

/// Mean output spikes per image with the network frozen, counting every
/// re-presentation of an image.
pub fn measure_intensity(net: &Network, data: &Dataset, indices: &[usize]) -> Result<f64> {
    if !net.is_frozen() {
        return Err(SnnError::Contract("intensity is measured on a frozen network".into()));
    }
    if indices.is_empty() {
        return Err(SnnError::Input("no images to measure".into()));
    }
    let mut sim = net.clone();
    let mut total = 0u64;
    for &i in indices {
        check_index(data, i)?;
        total += present_image(&mut sim, data.image(i), Mode::Frozen, Domain::Intensity, i as u64)?.total_spikes;
    }
    Ok(total as f64 / indices.len() as f64)
}

fn check_index(data: &Dataset, i: usize) -> Result<()> {
    if i >= data.len() {
        return Err(SnnError::Input(format!("image index {i} out of range ({} images)", data.len())));
    }
    Ok(())
}
