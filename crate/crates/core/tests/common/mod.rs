//! Oracles and checks shared by the integration tests and the acceptance
//! harness. Every check returns `Ok(detail)` or `Err(reason)`.

#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snn_core::dataio::{load_dataset, Dataset, DatasetName, Split};
use snn_core::decoding::{DecoderKind, DecoderTable, ResponseTable, VfaWeights};
use snn_core::engine::{train_iterations, Mode, Network, SimConfig, TrainOptions};
use snn_core::neuron::{NeuronParams, NeuronState, RepolarizationParams, StepConstants};
use snn_core::plasticity::{PlasticConnection, StdpParams, TraceDecay};
use snn_core::rng::{Domain, StreamKey};
use snn_core::topology::{build_inception, delete_synapses, PATHWAY_LAYOUT};
use snn_core::IMAGE_SIDE;

pub type Check = Result<String, String>;

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

pub fn mnist_dir() -> PathBuf {
    std::env::var_os("SNN_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub fn load_mnist(split: Split) -> Result<Dataset, String> {
    load_dataset(DatasetName::Mnist, split, &mnist_dir())
        .map_err(|e| format!("MNIST not available ({e}); set SNN_MNIST_DIR"))
}

/// Deterministic stroke images: class `c` draws a bar whose angle and
/// position depend on `c`, plus noise pixels.
pub fn synthetic_dataset(n: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n * 784);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let mut img = [0u8; 784];
        let angle = std::f64::consts::PI * c as f64 / classes as f64;
        let (dx, dy) = (angle.cos(), angle.sin());
        let (cx, cy) = (13.5 + rng.random_range(-1.5..1.5), 13.5 + rng.random_range(-1.5..1.5));
        for t in -10..=10 {
            for w in -1..=1 {
                let x = cx + t as f64 * dx - w as f64 * dy;
                let y = cy + t as f64 * dy + w as f64 * dx;
                let (xi, yi) = (x.round() as i64, y.round() as i64);
                if (0..IMAGE_SIDE as i64).contains(&xi) && (0..IMAGE_SIDE as i64).contains(&yi) {
                    img[yi as usize * IMAGE_SIDE + xi as usize] = rng.random_range(180..=255);
                }
            }
        }
        for _ in 0..10 {
            img[rng.random_range(0..784)] = rng.random_range(0..120);
        }
        images.extend_from_slice(&img);
        labels.push(c as u8);
    }
    Dataset::new(images, labels, classes).unwrap()
}

pub fn small_config(size_sa: usize, seed: u64, workers: usize) -> SimConfig {
    SimConfig {
        size_sa,
        seed,
        workers,
        ..SimConfig::default()
    }
}

// ---------------------------------------------------------------- ODE oracles

/// Free decay of conductances, θ and traces against closed-form
/// exponentials, and the membrane Euler sequence against a scalar recurrence
/// driven by closed-form conductances.
pub fn check_ode_oracles() -> Check {
    let p = NeuronParams::default();
    let dt = 0.5;
    let k = StepConstants::new(&p, dt).map_err(|e| e.to_string())?;
    let steps = 700;

    let (ge0, gi0, th0) = (1.0, 0.8, p.v_thres + 3.0);
    let mut n = NeuronState::at_rest(&p);
    n.g_e = ge0;
    n.g_i = gi0;
    n.theta = th0;
    n.v = -60.0;
    let mut v_oracle = n.v;
    let (mut max_decay, mut max_v) = (0.0f64, 0.0f64);
    for step in 1..=steps {
        // Oracle membrane step uses the conductances at the start of the step.
        let t0 = (step - 1) as f64 * dt;
        let ge = ge0 * (-t0 / p.tau_ge).exp();
        let gi = gi0 * (-t0 / p.tau_gi).exp();
        v_oracle += dt / p.tau_v * ((p.v_rest - v_oracle) + (p.v_exc - v_oracle) * ge + (p.v_inh - v_oracle) * gi);

        n.integrate_step(&p, &k);
        let t = step as f64 * dt;
        max_decay = max_decay
            .max(rel_err(n.g_e, ge0 * (-t / p.tau_ge).exp()))
            .max(rel_err(n.g_i, gi0 * (-t / p.tau_gi).exp()))
            .max(rel_err(n.theta - p.v_thres, (th0 - p.v_thres) * (-t / p.tau_theta).exp()));
        max_v = max_v.max(rel_err(n.v, v_oracle));
    }

    let stdp = StdpParams::default();
    let decay = TraceDecay::new(&stdp, dt);
    let mut c = PlasticConnection::zeros(1, 1);
    c.on_presynaptic_spike(0, &stdp).map_err(|e| e.to_string())?;
    c.on_postsynaptic_spike(0, &stdp).map_err(|e| e.to_string())?;
    for step in 1..=steps {
        c.decay_traces(&decay);
        let t = step as f64 * dt;
        max_decay = max_decay
            .max(rel_err(c.x_pre()[0], (-t / stdp.tau_pre).exp()))
            .max(rel_err(c.x_post1()[0], (-t / stdp.tau_post1).exp()))
            .max(rel_err(c.x_post2()[0], (-t / stdp.tau_post2).exp()));
    }

    let detail = format!("decay max rel err {max_decay:.2e}, membrane max rel err {max_v:.2e}");
    if max_decay < 1e-9 && max_v < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Conductance injected over a presentation equals the sum of the weights
/// delivered while the neuron was not refractory, each decayed to the end.
pub fn check_conductance_bookkeeping() -> Check {
    let p = NeuronParams::default();
    let k = StepConstants::new(&p, 0.5).map_err(|e| e.to_string())?;
    let repol = RepolarizationParams::disabled(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut n = NeuronState::at_rest(&p);
    let mut accepted: Vec<(usize, f64)> = Vec::new();
    let steps = 700;
    for step in 0..steps {
        if rng.random::<f64>() < 0.3 {
            let w = rng.random::<f64>() * 0.8;
            if !n.is_refractory() {
                accepted.push((step, w));
            }
            n.receive_excitatory(w);
        }
        n.integrate_membrane(&p, &k);
        n.check_fire(&p, &repol, &k, step as u64, false);
        n.decay(&p, &k, false);
    }
    let oracle: f64 = accepted
        .iter()
        .map(|&(s, w)| w * (-((steps - s) as f64) * 0.5 / p.tau_ge).exp())
        .sum();
    let err = rel_err(n.g_e, oracle);
    if err < 1e-9 {
        Ok(format!("{} deliveries accepted, rel err {err:.1e}", accepted.len()))
    } else {
        Err(format!("g_e {} vs oracle {oracle} (rel err {err:.1e})", n.g_e))
    }
}

// --------------------------------------------------------------- STDP oracle

/// Replays one pre/post spike-train pair through the module, step by step.
pub fn stdp_module(pre: &[bool], post: &[bool], w0: f64, params: &StdpParams, dt: f64) -> f64 {
    let decay = TraceDecay::new(params, dt);
    let mut c = PlasticConnection::zeros(1, 1);
    c.set_weight(0, 0, w0);
    for s in 0..pre.len() {
        if pre[s] {
            c.on_presynaptic_spike(0, params).unwrap();
        }
        if post[s] {
            c.on_postsynaptic_spike(0, params).unwrap();
        }
        c.decay_traces(&decay);
    }
    c.weight(0, 0)
}

/// Event-time oracle: visits only spike events and evaluates each trace in
/// closed form from the time of the last spike of its neuron.
pub fn stdp_oracle(pre: &[bool], post: &[bool], w0: f64, params: &StdpParams, dt: f64) -> f64 {
    let mut events: Vec<(usize, u8)> = Vec::new();
    for s in 0..pre.len() {
        if pre[s] {
            events.push((s, 0));
        }
        if post[s] {
            events.push((s, 1));
        }
    }
    let tr = |last: Option<usize>, now: usize, tau: f64| last.map_or(0.0, |t| (-((now - t) as f64) * dt / tau).exp());
    let (mut last_pre, mut last_post) = (None, None);
    let mut w = w0;
    for (s, kind) in events {
        if kind == 0 {
            w = (w - params.eta_pre * tr(last_post, s, params.tau_post1)).clamp(params.w_min, params.w_max);
            last_pre = Some(s);
        } else {
            let x_pre = tr(last_pre, s, params.tau_pre);
            let x_post2 = tr(last_post, s, params.tau_post2);
            w = (w + params.eta_post * x_pre * x_post2).clamp(params.w_min, params.w_max);
            last_post = Some(s);
        }
    }
    w
}

pub fn check_stdp_oracle() -> Check {
    let dt = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let base = StdpParams::default();
    let strong = StdpParams {
        eta_pre: 0.01,
        eta_post: 0.1,
        ..base
    };
    let (mut max_w, mut max_dw) = (0.0f64, 0.0f64);
    for pair in 0..100 {
        let params = if pair % 2 == 0 { base } else { strong };
        let steps = 700;
        let (rp, rq) = (rng.random_range(0.005..0.1), rng.random_range(0.005..0.1));
        let pre: Vec<bool> = (0..steps).map(|_| rng.random::<f64>() < rp).collect();
        let post: Vec<bool> = (0..steps).map(|_| rng.random::<f64>() < rq).collect();
        let w0 = rng.random::<f64>();
        let m = stdp_module(&pre, &post, w0, &params, dt);
        let o = stdp_oracle(&pre, &post, w0, &params, dt);
        max_w = max_w.max(rel_err(m, o));
        if (o - w0).abs() > 1e-6 {
            max_dw = max_dw.max(rel_err(m - w0, o - w0));
        }
    }
    let detail = format!("100 pairs, weight max rel err {max_w:.2e}, change max rel err {max_dw:.2e}");
    if max_w < 1e-10 && max_dw < 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ----------------------------------------------------------------- topology

/// Counts neurons, sub-areas and synapses by brute-force enumeration of
/// receptive-field windows, independently of the topology module.
pub fn enumerate_counts(size_sa: usize) -> (usize, usize, usize, usize) {
    let (mut neurons, mut subareas, mut exc, mut lat) = (0, 0, 0, 0);
    for &(k, s, split) in PATHWAY_LAYOUT.iter() {
        let features = split * size_sa;
        let mut r = 0;
        while r + k <= IMAGE_SIDE {
            let mut c = 0;
            while c + k <= IMAGE_SIDE {
                let mut pixels = std::collections::BTreeSet::new();
                for y in r..r + k {
                    for x in c..c + k {
                        pixels.insert(y * IMAGE_SIDE + x);
                    }
                }
                neurons += features;
                exc += features * pixels.len();
                subareas += split;
                lat += split * size_sa * (size_sa - 1);
                c += s;
            }
            r += s;
        }
    }
    (neurons, subareas, exc, lat)
}

pub fn check_topology_counts() -> Check {
    let t = build_inception(100, 17.0).map_err(|e| e.to_string())?;
    let (n, sa, exc, lat) = enumerate_counts(100);
    let got = (
        t.neuron_count(),
        t.sub_areas().len(),
        t.excitatory_synapse_count(),
        t.lateral_synapse_count(),
    );
    let sizes_ok = t.sub_areas().iter().all(|s| s.neurons.len() == 100);
    let detail = format!(
        "neurons {}, sub-areas {}, excitatory {}, lateral {} (oracle {n}, {sa}, {exc}, {lat})",
        got.0, got.1, got.2, got.3
    );
    if got == (2100, 21, 1_004_800, 207_900) && got == (n, sa, exc, lat) && sizes_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- invariants

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        PropConfig {
            cases,
            failure_persistence: None,
            ..PropConfig::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

pub fn check_normalization_every_iteration() -> Check {
    let data = synthetic_dataset(30, 10, 3);
    let mut net = Network::new(small_config(4, 3, 1)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..data.len() {
        train_iterations(&mut net, &data, 1, &TrainOptions::default()).map_err(|e| e.to_string())?;
        for (sa, info) in net.subareas().iter().zip(net.topology().sub_areas()) {
            let target = net.config().c_norm_for(info.pathway);
            for post in 0..sa.len() {
                worst = worst.max((sa.connection().alive_row_sum(post) - target).abs());
            }
            if sa.connection().raw_weights().iter().any(|w| w.is_nan() || *w < 0.0) {
                return Err("negative or NaN weight after normalisation".into());
            }
        }
    }
    if worst <= 1e-9 {
        Ok(format!("30 iterations, max |row sum - 78.4| = {worst:.1e}"))
    } else {
        Err(format!("row sum deviates by {worst:.1e}"))
    }
}

pub fn check_weight_bounds() -> Check {
    let strat = (
        1usize..6,
        1usize..6,
        proptest::collection::vec((0usize..36, any::<bool>()), 1..200),
        any::<u64>(),
    );
    runner(128)
        .run(&strat, |(n_post, n_pre, events, seed)| {
            let params = StdpParams {
                eta_pre: 0.05,
                eta_post: 0.5,
                ..StdpParams::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = PlasticConnection::random(n_post, n_pre, 1.0, &mut rng);
            let decay = TraceDecay::new(&params, 0.5);
            for (i, is_pre) in events {
                if is_pre {
                    c.on_presynaptic_spike(i % n_pre, &params).unwrap();
                } else {
                    c.on_postsynaptic_spike(i % n_post, &params).unwrap();
                }
                c.decay_traces(&decay);
                prop_assert!(c.raw_weights().iter().all(|&w| (0.0..=1.0).contains(&w)));
            }
            Ok(())
        })
        .map(|_| "128 random event sequences stay within [0, 1]".to_string())
        .map_err(|e| e.to_string())
}

pub fn check_refractory_spacing() -> Check {
    let p = NeuronParams::default();
    let k = StepConstants::new(&p, 0.5).map_err(|e| e.to_string())?;
    let repol = RepolarizationParams::new(0.6, &p).map_err(|e| e.to_string())?;
    let mut n = NeuronState::at_rest(&p);
    let mut spikes = Vec::new();
    for step in 0..700u64 {
        n.receive_excitatory(5.0);
        n.integrate_membrane(&p, &k);
        if n.check_fire(&p, &repol, &k, step, true) {
            spikes.push(step);
        }
        n.decay(&p, &k, true);
    }
    let min_gap = spikes.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(u64::MAX);
    if spikes.len() > 70 || min_gap < k.t_ref_steps as u64 {
        return Err(format!("{} spikes, min gap {min_gap} steps", spikes.len()));
    }

    // Whole network under saturating input.
    let mut net = Network::new(small_config(2, 8, 1)).map_err(|e| e.to_string())?;
    let img = vec![255u8; 784];
    let key = StreamKey::new(8, Domain::Train, 0, 0);
    let train = snn_core::encoding::encode_presentation(&img, 10.0, 350.0, 0.5, &key).map_err(|e| e.to_string())?;
    let counts = net.run_presentation(&train, Mode::Learning { alpha: 0.6 }).map_err(|e| e.to_string())?;
    let max = counts.iter().copied().max().unwrap_or(0);
    if max > 70 {
        return Err(format!("a neuron fired {max} times in one presentation"));
    }
    Ok(format!(
        "driven neuron: {} spikes, min gap {min_gap} steps; network max count {max} <= 70",
        spikes.len()
    ))
}

fn table_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..12, 1usize..8).prop_flat_map(|(n, c)| {
        (
            Just(n),
            Just(c),
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..50.0], n * c),
        )
    })
}

pub fn check_vfa_row_sums() -> Check {
    runner(256)
        .run(&(table_strategy(), 0.01f64..3.0), |((n, c, sums), mu)| {
            let table = ResponseTable::from_parts(n, c, sums, vec![1; c]).unwrap();
            let w = VfaWeights::compute(&table, mu).unwrap();
            for i in 0..n {
                let s: f64 = w.row(i).iter().sum();
                prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-12, "row {} sums to {}", i, s);
            }
            Ok(())
        })
        .map(|_| "256 random response tables".to_string())
        .map_err(|e| e.to_string())
}

pub fn check_argmax_scale_invariance() -> Check {
    let strat = table_strategy().prop_flat_map(|(n, c, sums)| {
        (
            Just((n, c, sums)),
            proptest::collection::vec(0u32..20, n),
            2u32..50,
        )
    });
    runner(256)
        .run(&strat, |((n, c, sums), counts, scale)| {
            let table = ResponseTable::from_parts(n, c, sums, vec![1; c]).unwrap();
            let dec = DecoderTable::from_responses(table, 0.1).unwrap();
            let scaled: Vec<u32> = counts.iter().map(|&x| x * scale).collect();
            for kind in [DecoderKind::Vfa, DecoderKind::Vfo] {
                prop_assert_eq!(dec.decode(kind, &counts), dec.decode(kind, &scaled));
            }
            Ok(())
        })
        .map(|_| "256 random tables and count vectors, both decoders".to_string())
        .map_err(|e| e.to_string())
}

fn within_binomial(k: usize, n: usize, rho: f64) -> bool {
    let mean = n as f64 * rho;
    let sd = (n as f64 * rho * (1.0 - rho)).sqrt();
    (k as f64 - mean).abs() <= 5.0 * sd + 1e-9
}

pub fn check_deletion_binomial() -> Check {
    let topo = build_inception(100, 17.0).map_err(|e| e.to_string())?;
    let net = Network::new(small_config(2, 4, 1)).map_err(|e| e.to_string())?;
    let conns: Vec<PlasticConnection> = net.subareas().iter().map(|s| s.connection().clone()).collect();
    let n_syn: usize = conns.iter().map(|c| c.synapse_count()).sum();
    let mut detail = Vec::new();
    for (i, rho) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let key = StreamKey::new(4, Domain::NeuronDeletion, i as u64, 0);
        let dead = topo.delete_neurons(rho, &key).map_err(|e| e.to_string())?.dead_neurons().len();
        let mut c = conns.clone();
        let key = StreamKey::new(4, Domain::SynapseDeletion, i as u64, 0);
        let killed = delete_synapses(&mut c, rho, &key).map_err(|e| e.to_string())?;
        if !within_binomial(dead, 2100, rho) || !within_binomial(killed, n_syn, rho) {
            return Err(format!("rho {rho}: {dead}/2100 neurons, {killed}/{n_syn} synapses"));
        }
        detail.push(format!("rho {rho}: {dead} neurons, {killed} synapses"));
    }
    Ok(detail.join("; "))
}

// ---------------------------------------------------------------- persistence

pub fn check_persistence(data: &Dataset) -> Check {
    use snn_core::dataio::{load_checkpoint, save_checkpoint, Checkpoint};
    let cfg = small_config(100, 21, 1);
    let opts = TrainOptions::default();
    let err = |e: snn_core::SnnError| e.to_string();

    let mut straight = Network::new(cfg.clone()).map_err(err)?;
    train_iterations(&mut straight, data, 100, &opts).map_err(err)?;

    let mut first = Network::new(cfg).map_err(err)?;
    train_iterations(&mut first, data, 50, &opts).map_err(err)?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let before = first.weight_checksum();
    save_checkpoint(&Checkpoint { network: first, decoder: None }, dir.path(), false).map_err(err)?;
    let mut resumed = load_checkpoint(dir.path(), None).map_err(err)?.network;
    if resumed.weight_checksum() != before {
        return Err("checksum changed across save/load".into());
    }
    train_iterations(&mut resumed, data, 50, &opts).map_err(err)?;
    let (a, b) = (straight.weight_checksum(), resumed.weight_checksum());
    if a != b || straight.dynamic_state() != resumed.dynamic_state() {
        return Err(format!("100 straight {a} vs 50+50 {b}"));
    }
    Ok(format!("round trip and 50+50 == 100 ({})", &a[..16]))
}
