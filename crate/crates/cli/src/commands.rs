use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use snn_core::dataio::{load_checkpoint, load_dataset, save_checkpoint, Checkpoint, Dataset, DatasetName, Split};
use snn_core::decoding::{DecoderKind, DecoderTable};
use snn_core::engine::{
    calibrate as calibrate_decoder, evaluate, measure_intensity, recent_training_indices, train as run_training,
    EvalReport, Network, RunLog, SimConfig, TrainOptions, ValidationProbe,
};
use snn_core::rng::{Domain, StreamKey};

use crate::metrics::{prepare_out, write_csv};
use crate::settings::{self, Override};
use crate::{AblateArgs, CalibrateArgs, DecoderArg, DeleteTarget, EvalArgs, GlobalArgs, IntensityArgs, SplitArg, TrainArgs};

const CHECKPOINT_FILES: &[&str] = &["manifest", "weights.bin", "state.bin"];

fn dataset_name(g: &GlobalArgs) -> Result<DatasetName> {
    Ok(g.dataset.parse()?)
}

fn split(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    }
}

fn kind(d: DecoderArg) -> DecoderKind {
    match d {
        DecoderArg::Vfa => DecoderKind::Vfa,
        DecoderArg::Vfo => DecoderKind::Vfo,
    }
}

fn load(g: &GlobalArgs, s: Split) -> Result<Dataset> {
    let name = dataset_name(g)?;
    load_dataset(name, s, &g.data_dir).with_context(|| format!("loading {name} from {}", g.data_dir.display()))
}

/// Default config, then the config file, then command-line flags.
fn build_config(g: &GlobalArgs, size_sa: Option<usize>, alpha: Option<f64>, extra: &[String]) -> Result<(SimConfig, Vec<Override>)> {
    let mut cfg = SimConfig::default();
    let mut log = Vec::new();
    if let Some(p) = &g.config {
        settings::load_file(&mut cfg, p, &mut log)?;
    }
    for kv in extra {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        settings::apply_flag(&mut cfg, k.trim(), v.trim().to_string(), &mut log)?;
    }
    if let Some(s) = g.seed {
        settings::apply_flag(&mut cfg, "seed", s.to_string(), &mut log)?;
    }
    if let Some(w) = g.workers {
        settings::apply_flag(&mut cfg, "workers", w.to_string(), &mut log)?;
    }
    if let Some(s) = size_sa {
        settings::apply_flag(&mut cfg, "size_sa", s.to_string(), &mut log)?;
    }
    if let Some(a) = alpha {
        settings::apply_flag(&mut cfg, "alpha", a.to_string(), &mut log)?;
    }
    cfg.validate()?;
    for o in &log {
        info!("override {} = {} ({})", o.key, o.value, o.source);
    }
    Ok((cfg, log))
}

fn write_overrides(dir: &Path, log: &[Override]) -> Result<()> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|o| vec![o.key.clone(), o.value.clone(), o.source.clone()])
        .collect();
    write_csv(&dir.join("overrides.csv"), &["key", "value", "source"], &rows)
}

fn write_runlog(dir: &Path, log: &RunLog) -> Result<()> {
    let rows: Vec<Vec<String>> = log
        .records
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                r.sample.to_string(),
                r.label.to_string(),
                r.output_spikes.to_string(),
                r.alpha.to_string(),
                r.final_lambda.to_string(),
                r.attempts.to_string(),
                r.gave_up.to_string(),
                r.validation_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("runlog.csv"),
        &[
            "iteration",
            "sample",
            "label",
            "spikes",
            "alpha",
            "lambda",
            "attempts",
            "gave_up",
            "validation_accuracy",
        ],
        &rows,
    )
}

fn open_checkpoint(g: &GlobalArgs, dir: &Path) -> Result<Checkpoint> {
    let mut ckpt = load_checkpoint(dir, g.workers).with_context(|| format!("loading checkpoint {}", dir.display()))?;
    if let Some(seed) = g.seed {
        ckpt.network.set_seed(seed)?;
    }
    Ok(ckpt)
}

fn require_decoder(ckpt: &Checkpoint, dir: &Path) -> Result<DecoderTable> {
    ckpt.decoder.clone().ok_or_else(|| {
        anyhow!(
            "checkpoint {} is not calibrated; run `snn calibrate --checkpoint {}` or train with calibration enabled",
            dir.display(),
            dir.display()
        )
    })
}

fn require_frozen(net: &mut Network) {
    if !net.is_frozen() {
        warn!("checkpoint is still plastic; freezing it for inference");
        net.freeze();
    }
}

fn clamp_limit(limit: Option<usize>, data: &Dataset) -> Vec<usize> {
    let n = match limit {
        Some(l) if l > data.len() => {
            info!("limit {l} exceeds the split size; evaluating all {} images", data.len());
            data.len()
        }
        Some(l) => l,
        None => data.len(),
    };
    (0..n).collect()
}

pub fn train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    let (cfg, overrides) = build_config(g, a.size_sa, a.alpha, &a.set)?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("runs/train"));
    let mut files = CHECKPOINT_FILES.to_vec();
    files.extend(["runlog.csv", "summary.csv", "overrides.csv"]);
    prepare_out(&out, &files, g.force)?;

    let data = load(g, Split::Train)?;
    let iterations = a.iterations.unwrap_or(data.len() as u64);
    let mut net = Network::new(cfg)?;
    info!(
        "training {} neurons in {} sub-areas for {iterations} iterations",
        net.neuron_count(),
        net.subareas().len()
    );

    let probe = a.probe_every.map(|every| {
        let start = (iterations as usize).min(data.len());
        let validation: Vec<usize> = (start..data.len()).take(a.probe_size).collect();
        if validation.is_empty() {
            warn!("no unseen training images left for the validation probe");
        }
        ValidationProbe {
            every,
            data: &data,
            calibration: recent_training_indices(iterations, data.len(), a.probe_size),
            validation,
            kind: DecoderKind::Vfa,
        }
    });
    let opts = TrainOptions { probe, log_every: 100 };

    let t0 = Instant::now();
    let log = run_training(&mut net, &data, iterations, &opts)?;
    let decoder = if a.no_calibrate || iterations == 0 {
        info!("checkpoint left uncalibrated");
        None
    } else {
        let idx = recent_training_indices(iterations, data.len(), a.calib_limit);
        info!("calibrating on the last {} training images", idx.len());
        Some(calibrate_decoder(&net, &data, &idx)?)
    };
    let wall = t0.elapsed().as_secs_f64();

    let checksum = net.weight_checksum();
    let calibrated = decoder.is_some();
    save_checkpoint(&Checkpoint { network: net, decoder }, &out, g.force)?;
    write_runlog(&out, &log)?;
    write_overrides(&out, &overrides)?;
    write_csv(
        &out.join("summary.csv"),
        &["iterations", "represented", "mean_spikes", "wall_seconds", "calibrated", "weight_sha256"],
        &[vec![
            iterations.to_string(),
            log.represented().to_string(),
            format!("{:.4}", log.mean_output_spikes()),
            format!("{wall:.2}"),
            calibrated.to_string(),
            checksum,
        ]],
    )?;
    println!(
        "trained {iterations} iterations ({} re-presented) in {wall:.1} s; checkpoint written to {}",
        log.represented(),
        out.display()
    );
    Ok(())
}

pub fn calibrate(g: &GlobalArgs, a: &CalibrateArgs) -> Result<()> {
    let mut ckpt = open_checkpoint(g, &a.checkpoint)?;
    let out = g.out.clone().unwrap_or_else(|| a.checkpoint.clone());
    let in_place = out == a.checkpoint;
    if in_place && ckpt.decoder.is_some() && !g.force {
        bail!("{} is already calibrated; pass --force to replace its decoder", a.checkpoint.display());
    }
    if !in_place {
        prepare_out(&out, CHECKPOINT_FILES, g.force)?;
    }
    require_frozen(&mut ckpt.network);
    let data = load(g, Split::Train)?;
    let it = ckpt.network.iteration();
    if it == 0 {
        bail!("checkpoint has no training iterations to calibrate on");
    }
    let idx = recent_training_indices(it, data.len(), a.limit);
    info!("calibrating on {} training images", idx.len());
    ckpt.decoder = Some(calibrate_decoder(&ckpt.network, &data, &idx)?);
    save_checkpoint(&ckpt, &out, true)?;
    println!("decoder calibrated on {} images; checkpoint written to {}", idx.len(), out.display());
    Ok(())
}

fn print_report(r: &EvalReport, split: &str) {
    println!(
        "{} accuracy on {} {split} images: {:.4} ({}/{})",
        r.kind.name(),
        r.total,
        r.accuracy,
        r.correct,
        r.total
    );
    for (c, row) in r.confusion.iter().enumerate() {
        let total: u64 = row.iter().sum();
        println!("  class {c}: {}/{total}", row[c]);
    }
}

pub fn eval(g: &GlobalArgs, a: &EvalArgs) -> Result<()> {
    let mut ckpt = open_checkpoint(g, &a.checkpoint)?;
    let decoder = require_decoder(&ckpt, &a.checkpoint)?;
    require_frozen(&mut ckpt.network);
    let s = split(a.split);
    let k = kind(a.decoder);
    let out = g
        .out
        .clone()
        .unwrap_or_else(|| a.checkpoint.join(format!("eval-{}-{}", k.name(), s.as_str())));
    prepare_out(&out, &["eval.csv", "confusion.csv"], g.force)?;
    let data = load(g, s)?;
    let idx = clamp_limit(a.limit, &data);
    let report = evaluate(&ckpt.network, &decoder, &data, &idx, &[k])?.remove(0);
    print_report(&report, s.as_str());

    write_csv(
        &out.join("eval.csv"),
        &["decoder", "split", "n", "accuracy"],
        &[vec![
            k.name().into(),
            s.as_str().into(),
            report.total.to_string(),
            report.accuracy.to_string(),
        ]],
    )?;
    let mut header = vec!["true_label".to_string()];
    header.extend((0..report.confusion.len()).map(|c| format!("pred_{c}")));
    let rows: Vec<Vec<String>> = report
        .confusion
        .iter()
        .enumerate()
        .map(|(c, row)| std::iter::once(c.to_string()).chain(row.iter().map(u64::to_string)).collect())
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("confusion.csv"), &header, &rows)?;
    Ok(())
}

pub fn ablate(g: &GlobalArgs, a: &AblateArgs) -> Result<()> {
    let mut ckpt = open_checkpoint(g, &a.checkpoint)?;
    let decoder = require_decoder(&ckpt, &a.checkpoint)?;
    require_frozen(&mut ckpt.network);
    let target = match a.target {
        DeleteTarget::Neurons => "neurons",
        DeleteTarget::Synapses => "synapses",
    };
    let out = g
        .out
        .clone()
        .unwrap_or_else(|| a.checkpoint.join(format!("ablate-{target}")));
    prepare_out(&out, &["ablate.csv"], g.force)?;
    let s = split(a.split);
    let data = load(g, s)?;
    let idx = clamp_limit(a.limit, &data);
    let k = kind(a.decoder);
    let seed = ckpt.network.config().seed;

    let mut rows = Vec::new();
    for &rho in &a.rho {
        for trial in 0..a.trials {
            let net = match a.target {
                DeleteTarget::Neurons => {
                    let key = StreamKey::new(seed, Domain::NeuronDeletion, trial, rho.to_bits());
                    ckpt.network.with_deleted_neurons(rho, &key)?
                }
                DeleteTarget::Synapses => {
                    let key = StreamKey::new(seed, Domain::SynapseDeletion, trial, rho.to_bits());
                    ckpt.network.with_deleted_synapses(rho, &key)?.0
                }
            };
            let acc = evaluate(&net, &decoder, &data, &idx, &[k])?[0].accuracy;
            println!("{target} rho={rho} trial={trial}: accuracy {acc:.4}");
            rows.push(vec![target.to_string(), rho.to_string(), trial.to_string(), acc.to_string()]);
        }
    }
    write_csv(&out.join("ablate.csv"), &["target", "rho", "trial", "accuracy"], &rows)
}

pub fn intensity(g: &GlobalArgs, a: &IntensityArgs) -> Result<()> {
    let out = g.out.clone().unwrap_or_else(|| match &a.checkpoint {
        Some(c) => c.join("intensity"),
        None => PathBuf::from("runs/intensity"),
    });
    prepare_out(&out, &["intensity.csv"], g.force)?;
    let header = ["alpha", "intensity", "accuracy"];
    let s = split(a.split);

    if let Some(dir) = &a.checkpoint {
        let mut ckpt = open_checkpoint(g, dir)?;
        require_frozen(&mut ckpt.network);
        let data = load(g, s)?;
        let idx = clamp_limit(Some(a.limit), &data);
        if idx.is_empty() {
            bail!("no samples to measure");
        }
        let value = measure_intensity(&ckpt.network, &data, &idx)?;
        let acc = match &ckpt.decoder {
            Some(d) => evaluate(&ckpt.network, d, &data, &idx, &[DecoderKind::Vfa])?[0].accuracy.to_string(),
            None => String::new(),
        };
        let alpha = ckpt.network.config().alpha.fixed.map(|x| x.to_string()).unwrap_or_else(|| "schedule".into());
        println!("mean output spikes per iteration over {} images: {value:.3}", idx.len());
        return write_csv(&out.join("intensity.csv"), &header, &[vec![alpha, value.to_string(), acc]]);
    }

    if a.iterations == 0 {
        bail!("no samples to measure: --iterations must be positive");
    }
    let alphas: Vec<Option<f64>> = if a.alpha_sweep.is_empty() {
        vec![a.alpha]
    } else {
        a.alpha_sweep.iter().copied().map(Some).collect()
    };
    let train_data = load(g, Split::Train)?;
    let test_data = load(g, s)?;
    let test_idx = clamp_limit(Some(a.limit), &test_data);
    let mut rows = Vec::new();
    for alpha in alphas {
        let (cfg, _) = build_config(g, a.size_sa, alpha, &[])?;
        let mut net = Network::new(cfg)?;
        let log = run_training(&mut net, &train_data, a.iterations, &TrainOptions::default())?;
        let value = log.mean_output_spikes();
        let calib = recent_training_indices(a.iterations, train_data.len(), 10_000);
        let table = calibrate_decoder(&net, &train_data, &calib)?;
        let acc = if test_idx.is_empty() {
            String::new()
        } else {
            evaluate(&net, &table, &test_data, &test_idx, &[DecoderKind::Vfa])?[0].accuracy.to_string()
        };
        let label = alpha.map(|x| x.to_string()).unwrap_or_else(|| "schedule".into());
        println!("alpha {label}: {value:.3} spikes/iteration over {} training iterations, accuracy {acc}", a.iterations);
        rows.push(vec![label, value.to_string(), acc]);
    }
    write_csv(&out.join("intensity.csv"), &header, &rows)
}
