mod common;

use std::sync::Arc;

use snn_core::decoding::{DecoderKind, DecoderTable, ResponseTable};
use snn_core::encoding::{encode_presentation, SpikeTrain};
use snn_core::engine::{
    calibrate, collect_responses, evaluate, measure_intensity, train, train_iterations, Mode, Network, StepContext,
    SubAreaSim, TrainOptions,
};
use snn_core::neuron::{NeuronParams, RepolarizationParams, StepConstants};
use snn_core::parallel::Executor;
use snn_core::plasticity::{PlasticConnection, StdpParams, TraceDecay};
use snn_core::rng::{Domain, StreamKey};
use snn_core::SnnError;

fn context(learning: bool) -> StepContext {
    let neuron = NeuronParams::default();
    let stdp = StdpParams::default();
    StepContext {
        neuron,
        consts: StepConstants::new(&neuron, 0.5).unwrap(),
        stdp,
        traces: TraceDecay::new(&stdp, 0.5),
        repol: RepolarizationParams::disabled(&neuron),
        w_inh: 17.0,
        learning,
        adapt_threshold: learning,
    }
}

#[test]
fn lateral_spike_arrives_one_step_later() {
    // Neuron 0 gets a huge weight from pixel 0, neuron 1 gets nothing.
    let mut conn = PlasticConnection::zeros(2, 1);
    conn.set_weight(0, 0, 50.0);
    let ctx = context(false);
    let mut sa = SubAreaSim::new(&ctx.neuron, &[0], conn);
    let mut fired_at = None;
    for step in 0..40u64 {
        let before = sa.counts()[0];
        sa.step(&[0], step, &ctx);
        if sa.counts()[0] > before {
            fired_at = Some(step);
            assert_eq!(sa.neurons()[1].g_i, 0.0, "inhibition visible in the firing step");
            break;
        }
    }
    assert!(fired_at.is_some());
    sa.step(&[], fired_at.unwrap() + 1, &ctx);
    assert!(sa.neurons()[1].g_i > 0.0, "inhibition missing one step later");
    assert_eq!(sa.neurons()[0].g_i, 0.0, "a neuron must not inhibit itself");
}

#[test]
fn inhibition_stays_inside_its_sub_area() {
    let mut net = Network::new(common::small_config(2, 5, 1)).unwrap();
    let first = net.topology().sub_areas()[0].neurons.clone();
    let alive: Vec<bool> = (0..net.neuron_count()).map(|n| first.contains(&n)).collect();
    net.set_neuron_mask(alive).unwrap();
    let img = vec![200u8; 784];
    let train = encode_presentation(&img, 1.0, 350.0, 0.5, &StreamKey::new(5, Domain::Train, 0, 0)).unwrap();
    let counts = net.run_presentation(&train, Mode::Learning { alpha: 0.6 }).unwrap();
    assert!(counts[first.clone()].iter().sum::<u32>() > 0);
    let mut inhibited_inside = false;
    for (sa, info) in net.subareas().iter().zip(net.topology().sub_areas()) {
        for (j, n) in sa.neurons().iter().enumerate() {
            let global = info.neurons.start + j;
            if first.contains(&global) {
                inhibited_inside |= n.g_i > 0.0;
            } else {
                assert_eq!(n.g_i, 0.0, "neuron {global} outside the active sub-area was inhibited");
            }
        }
    }
    assert!(inhibited_inside);
}

#[test]
fn determinism_across_worker_counts() {
    let data = common::synthetic_dataset(12, 10, 9);
    let mut sums = Vec::new();
    for workers in [1, 4] {
        let mut net = Network::new(common::small_config(4, 9, workers)).unwrap();
        train(&mut net, &data, 12, &TrainOptions::default()).unwrap();
        let table = calibrate(&net, &data, &(0..12).collect::<Vec<_>>()).unwrap();
        sums.push((net.weight_checksum(), table));
    }
    assert_eq!(sums[0], sums[1]);
    if cfg!(feature = "parallel") {
        assert!(Executor::new(4).unwrap().is_parallel());
    }
}

#[test]
fn frozen_phases_do_not_touch_weights() {
    let data = common::synthetic_dataset(10, 10, 2);
    let mut net = Network::new(common::small_config(2, 2, 1)).unwrap();
    train(&mut net, &data, 10, &TrainOptions::default()).unwrap();
    let sum = net.weight_checksum();
    let idx: Vec<usize> = (0..10).collect();
    let table = calibrate(&net, &data, &idx).unwrap();
    evaluate(&net, &table, &data, &idx, &[DecoderKind::Vfa, DecoderKind::Vfo]).unwrap();
    measure_intensity(&net, &data, &idx).unwrap();
    let train_spikes = encode_presentation(data.image(0), 0.5, 350.0, 0.5, &StreamKey::new(2, Domain::Evaluate, 0, 0)).unwrap();
    net.run_presentation(&train_spikes, Mode::Frozen).unwrap();
    net.rest(Mode::Frozen).unwrap();
    assert_eq!(net.weight_checksum(), sum);
    assert!(matches!(
        train_iterations(&mut net, &data, 1, &TrainOptions::default()),
        Err(SnnError::Contract(_))
    ));
}

#[test]
fn rest_phase_relaxes_state() {
    let mut net = Network::new(common::small_config(2, 3, 1)).unwrap();
    let mut state = net.dynamic_state();
    // First neuron: g_e = 1, v = -55.
    state[0] = -55.0;
    state[1] = 1.0;
    net.load_dynamic_state(&state).unwrap();
    net.rest(Mode::Frozen).unwrap();
    let after = net.dynamic_state();
    assert!(after[1] < 1e-60);
    let shrink = (after[0] + 65.0).abs() / 10.0;
    // Euler with dt/τ = 0.005 over 300 steps against e^{-1.5}, plus the brief
    // excitatory push from g_e.
    assert!((shrink - (-1.5f64).exp()).abs() < 0.02, "shrink {shrink}");

    let mut resting = Network::new(common::small_config(2, 3, 1)).unwrap();
    let before = resting.dynamic_state();
    resting.rest(Mode::Frozen).unwrap();
    assert_eq!(resting.dynamic_state(), before);
}

#[test]
fn uncalibrated_decoder_predicts_class_zero() {
    let data = common::synthetic_dataset(20, 10, 4);
    let mut net = Network::new(common::small_config(2, 4, 1)).unwrap();
    net.freeze();
    let table = DecoderTable::from_responses(ResponseTable::new(net.neuron_count(), 10), 0.1).unwrap();
    let idx: Vec<usize> = (0..20).collect();
    let r = evaluate(&net, &table, &data, &idx, &[DecoderKind::Vfa, DecoderKind::Vfo]).unwrap();
    for rep in r {
        assert_eq!(rep.accuracy, data.class_frequencies()[0]);
    }
}

#[test]
fn training_contracts() {
    let empty = snn_core::dataio::Dataset::new(vec![], vec![], 10).unwrap();
    let mut net = Network::new(common::small_config(2, 1, 1)).unwrap();
    assert!(matches!(
        train(&mut net, &empty, 5, &TrainOptions::default()),
        Err(SnnError::Input(_))
    ));
    let data = common::synthetic_dataset(7, 10, 1);
    let log = train(&mut net, &data, 7, &TrainOptions::default()).unwrap();
    assert_eq!(log.records.len(), 7);
    assert_eq!(net.iteration(), 7);
    assert!(net.is_frozen());
    assert!(log.records.iter().all(|r| r.attempts >= 1 && r.alpha == 0.6));

    let short = SpikeTrain::empty(10);
    assert!(net.run_presentation(&short, Mode::Frozen).is_err());
}

#[test]
fn zero_input_gives_zero_intensity() {
    let data = snn_core::dataio::Dataset::new(vec![0; 784 * 2], vec![0, 1], 10).unwrap();
    let mut net = Network::new(common::small_config(2, 1, 1)).unwrap();
    net.freeze();
    assert_eq!(measure_intensity(&net, &data, &[0, 1]).unwrap(), 0.0);
    let r = collect_responses(&net, &data, &[0], Domain::Evaluate).unwrap();
    assert!(r[0].iter().all(|&c| c == 0));
}

#[test]
fn sequential_executor_matches_shared_pool() {
    let data = common::synthetic_dataset(4, 10, 6);
    let mut a = Network::new(common::small_config(2, 6, 1)).unwrap();
    let mut b = Network::with_executor(common::small_config(2, 6, 1), Arc::new(Executor::sequential())).unwrap();
    train(&mut a, &data, 4, &TrainOptions::default()).unwrap();
    train(&mut b, &data, 4, &TrainOptions::default()).unwrap();
    assert_eq!(a.weight_checksum(), b.weight_checksum());
}
