//! Receptive fields, the three-pathway layout and fault injection.
//!
//! | pathway | (k, s)  | areas | feature maps | sub-areas per area |
//! |---------|---------|-------|--------------|--------------------|
//! | 1 (FC)  | (28, 1) | 1     | 4·S          | 4                  |
//! | 2 (LC)  | (24, 4) | 4     | 2·S          | 2                  |
//! | 3 (LC)  | (16, 6) | 9     | S            | 1                  |
//!
//! `S` is the sub-area size; every one of the 21 sub-areas holds exactly `S`
//! neurons. Neuron ids are global and ordered pathway, area, neuron; each
//! sub-area is a contiguous block of ids. Lateral inhibition connects every
//! neuron to every other neuron of its own sub-area with weight `w_inh`.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::plasticity::PlasticConnection;
use crate::rng::StreamKey;
use crate::IMAGE_SIDE;

/// Square receptive field: kernel `k`, stride `s`, `f` feature maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfSpec {
    pub kernel: usize,
    pub stride: usize,
    pub features: usize,
}

impl RfSpec {
    pub fn new(kernel: usize, stride: usize, features: usize) -> Result<Self> {
        let rf = Self {
            kernel,
            stride,
            features,
        };
        rf.validate()?;
        Ok(rf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel > IMAGE_SIDE {
            return Err(SnnError::Config(format!("kernel size {} outside 1..=28", self.kernel)));
        }
        if self.stride == 0 {
            return Err(SnnError::Config("stride must be at least 1".into()));
        }
        if !(IMAGE_SIDE - self.kernel).is_multiple_of(self.stride) {
            return Err(SnnError::Config(format!(
                "(28 - {}) is not divisible by stride {}",
                self.kernel, self.stride
            )));
        }
        Ok(())
    }

    pub fn positions_per_axis(&self) -> usize {
        (IMAGE_SIDE - self.kernel) / self.stride + 1
    }

    pub fn positions(&self) -> usize {
        self.positions_per_axis().pow(2)
    }

    pub fn window_len(&self) -> usize {
        self.kernel * self.kernel
    }
}

/// One receptive-field position and the input pixels it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfWindow {
    pub row: usize,
    pub col: usize,
    /// Row-major pixel indices of the k×k window, ascending.
    pub inputs: Vec<u16>,
}

/// Enumerates the windows of a locally connected layer (FC is `k = 28`).
pub fn build_lc_connection(rf: &RfSpec) -> Result<Vec<RfWindow>> {
    rf.validate()?;
    let per_axis = rf.positions_per_axis();
    let mut windows = Vec::with_capacity(per_axis * per_axis);
    for pr in 0..per_axis {
        for pc in 0..per_axis {
            let (row, col) = (pr * rf.stride, pc * rf.stride);
            let inputs = (row..row + rf.kernel)
                .flat_map(|r| (col..col + rf.kernel).map(move |c| (r * IMAGE_SIDE + c) as u16))
                .collect();
            windows.push(RfWindow { row, col, inputs });
        }
    }
    Ok(windows)
}

/// Splits an area's neurons into contiguous blocks of `size_sa`.
pub fn partition_subareas(area: Range<usize>, size_sa: usize) -> Result<Vec<Range<usize>>> {
    let len = area.len();
    if size_sa == 0 || !len.is_multiple_of(size_sa) {
        return Err(SnnError::Config(format!(
            "area of {len} neurons cannot be split into sub-areas of {size_sa}"
        )));
    }
    Ok((0..len / size_sa)
        .map(|b| area.start + b * size_sa..area.start + (b + 1) * size_sa)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pathway {
    pub rf: RfSpec,
    pub windows: Vec<RfWindow>,
    pub subareas_per_area: usize,
    /// First global neuron id of this pathway.
    pub first_neuron: usize,
}

impl Pathway {
    pub fn neuron_count(&self) -> usize {
        self.rf.features * self.windows.len()
    }
}

/// A set of neurons that share one receptive field and compete through
/// lateral inhibition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompetitionSubArea {
    pub pathway: usize,
    pub area: usize,
    /// Index of this block within its area.
    pub block: usize,
    pub neurons: Range<usize>,
    /// Shared presynaptic pixel indices.
    pub inputs: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    size_sa: usize,
    w_inh: f64,
    pathways: Vec<Pathway>,
    sub_areas: Vec<CompetitionSubArea>,
    neuron_alive: Vec<bool>,
}

/// Kernel, stride and sub-area split of the three pathways.
pub const PATHWAY_LAYOUT: [(usize, usize, usize); 3] = [(28, 1, 4), (24, 4, 2), (16, 6, 1)];

/// Builds the three-pathway network for sub-area size `size_sa`.
pub fn build_inception(size_sa: usize, w_inh: f64) -> Result<NetworkTopology> {
    if size_sa < 2 || !size_sa.is_multiple_of(2) {
        return Err(SnnError::Config(format!(
            "sub-area size must be an even number >= 2, got {size_sa}"
        )));
    }
    if !(w_inh >= 0.0) {
        return Err(SnnError::Config("inhibitory weight must be non-negative".into()));
    }
    let mut pathways = Vec::with_capacity(3);
    let mut sub_areas = Vec::new();
    let mut next = 0;
    for (p, &(k, s, split)) in PATHWAY_LAYOUT.iter().enumerate() {
        let rf = RfSpec::new(k, s, split * size_sa)?;
        let windows = build_lc_connection(&rf)?;
        let first = next;
        for (a, window) in windows.iter().enumerate() {
            let area = next..next + rf.features;
            for (b, block) in partition_subareas(area, size_sa)?.into_iter().enumerate() {
                sub_areas.push(CompetitionSubArea {
                    pathway: p,
                    area: a,
                    block: b,
                    neurons: block,
                    inputs: window.inputs.clone(),
                });
            }
            next += rf.features;
        }
        pathways.push(Pathway {
            rf,
            windows,
            subareas_per_area: split,
            first_neuron: first,
        });
    }
    Ok(NetworkTopology {
        size_sa,
        w_inh,
        pathways,
        sub_areas,
        neuron_alive: vec![true; next],
    })
}

impl NetworkTopology {
    pub fn size_sa(&self) -> usize {
        self.size_sa
    }

    pub fn w_inh(&self) -> f64 {
        self.w_inh
    }

    pub fn pathways(&self) -> &[Pathway] {
        &self.pathways
    }

    pub fn sub_areas(&self) -> &[CompetitionSubArea] {
        &self.sub_areas
    }

    pub fn neuron_count(&self) -> usize {
        self.neuron_alive.len()
    }

    pub fn is_alive(&self, neuron: usize) -> bool {
        self.neuron_alive[neuron]
    }

    pub fn neuron_mask(&self) -> &[bool] {
        &self.neuron_alive
    }

    pub fn dead_neurons(&self) -> Vec<usize> {
        (0..self.neuron_count()).filter(|&n| !self.neuron_alive[n]).collect()
    }

    pub fn with_neuron_mask(&self, alive: Vec<bool>) -> Result<Self> {
        if alive.len() != self.neuron_count() {
            return Err(SnnError::Contract("neuron mask length mismatch".into()));
        }
        Ok(Self {
            neuron_alive: alive,
            ..self.clone()
        })
    }

    /// Sub-area that owns `neuron`.
    pub fn sub_area_of(&self, neuron: usize) -> usize {
        self.sub_areas
            .partition_point(|sa| sa.neurons.end <= neuron)
    }

    /// Plastic input→output synapse count.
    pub fn excitatory_synapse_count(&self) -> usize {
        self.sub_areas.iter().map(|sa| sa.neurons.len() * sa.inputs.len()).sum()
    }

    /// Lateral inhibitory synapse count.
    pub fn lateral_synapse_count(&self) -> usize {
        self.sub_areas.iter().map(|sa| sa.neurons.len() * (sa.neurons.len() - 1)).sum()
    }

    /// Neurons that receive inhibition from `neuron`.
    pub fn lateral_targets(&self, neuron: usize) -> impl Iterator<Item = usize> + '_ {
        let sa = &self.sub_areas[self.sub_area_of(neuron)];
        sa.neurons.clone().filter(move |&n| n != neuron)
    }

    /// Marks each neuron dead independently with probability `rho`. Already
    /// dead neurons stay dead.
    pub fn delete_neurons(&self, rho: f64, key: &StreamKey) -> Result<Self> {
        check_probability(rho)?;
        let mut rng = key.rng(0);
        let alive = self
            .neuron_alive
            .iter()
            .map(|&a| {
                let dies = rng.random::<f64>() < rho;
                a && !dies
            })
            .collect();
        self.with_neuron_mask(alive)
    }
}

/// Masks each alive plastic synapse independently with probability `rho`.
/// Connections are visited in persisted order (sub-area, neuron, input).
/// Returns the number of newly masked synapses.
pub fn delete_synapses(connections: &mut [PlasticConnection], rho: f64, key: &StreamKey) -> Result<usize> {
    check_probability(rho)?;
    let mut rng = key.rng(0);
    let mut killed = 0;
    for conn in connections.iter_mut() {
        for post in 0..conn.n_post() {
            for pre in 0..conn.n_pre() {
                if rng.random::<f64>() < rho && conn.is_alive(post, pre) {
                    conn.kill_synapse(post, pre);
                    killed += 1;
                }
            }
        }
    }
    Ok(killed)
}

fn check_probability(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(SnnError::Config(format!("deletion probability {rho} outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Domain;

    #[test]
    fn lc_position_counts() {
        let w = build_lc_connection(&RfSpec::new(16, 6, 1).unwrap()).unwrap();
        assert_eq!(w.len(), 9);
        assert!(w.iter().all(|w| w.inputs.len() == 256));
        let w = build_lc_connection(&RfSpec::new(28, 1, 1).unwrap()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].inputs.len(), 784);
        let w = build_lc_connection(&RfSpec::new(24, 4, 1).unwrap()).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.iter().all(|w| w.inputs.len() == 576));
        assert_eq!((w[3].row, w[3].col), (4, 4));
        assert_eq!(w[3].inputs[0] as usize, 4 * 28 + 4);
    }

    #[test]
    fn indivisible_stride_is_rejected() {
        assert!(matches!(RfSpec::new(16, 5, 1), Err(SnnError::Config(_))));
        assert!(RfSpec::new(0, 1, 1).is_err());
        assert!(RfSpec::new(29, 1, 1).is_err());
    }

    #[test]
    fn windows_are_contiguous_and_inside_the_grid() {
        for &(k, s, _) in &PATHWAY_LAYOUT {
            for w in build_lc_connection(&RfSpec::new(k, s, 1).unwrap()).unwrap() {
                for (j, &i) in w.inputs.iter().enumerate() {
                    let (r, c) = (i as usize / 28, i as usize % 28);
                    assert_eq!((r, c), (w.row + j / k, w.col + j % k));
                    assert!(r < 28 && c < 28);
                }
            }
        }
    }

    #[test]
    fn partition_blocks() {
        assert_eq!(partition_subareas(0..400, 100).unwrap().len(), 4);
        assert_eq!(partition_subareas(0..200, 100).unwrap().len(), 2);
        assert_eq!(partition_subareas(5..105, 100).unwrap(), vec![5..105]);
        assert!(partition_subareas(0..150, 100).is_err());
    }

    #[test]
    fn inception_counts_for_size_100() {
        let t = build_inception(100, 17.0).unwrap();
        assert_eq!(t.neuron_count(), 2100);
        assert_eq!(t.sub_areas().len(), 21);
        assert!(t.sub_areas().iter().all(|sa| sa.neurons.len() == 100));
        assert_eq!(t.excitatory_synapse_count(), 1_004_800);
        assert_eq!(t.lateral_synapse_count(), 207_900);
        let per_pathway: Vec<usize> = t.pathways().iter().map(|p| p.neuron_count()).collect();
        assert_eq!(per_pathway, vec![400, 800, 900]);
    }

    #[test]
    fn closed_form_counts_for_several_sizes() {
        for s in [2usize, 10, 100] {
            let t = build_inception(s, 17.0).unwrap();
            assert_eq!(t.neuron_count(), 21 * s);
            assert_eq!(t.excitatory_synapse_count(), 1_004_800 * s / 100);
            assert_eq!(t.lateral_synapse_count(), 21 * s * (s - 1));
            // Enumeration oracle over the generated wiring.
            let lateral: usize = (0..t.neuron_count()).map(|n| t.lateral_targets(n).count()).sum();
            assert_eq!(lateral, t.lateral_synapse_count());
        }
    }

    #[test]
    fn sub_areas_partition_the_neurons() {
        let t = build_inception(10, 17.0).unwrap();
        let mut seen = vec![0u32; t.neuron_count()];
        for (i, sa) in t.sub_areas().iter().enumerate() {
            for n in sa.neurons.clone() {
                seen[n] += 1;
                assert_eq!(t.sub_area_of(n), i);
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        // Lateral targets stay inside the sub-area and exclude the source.
        for n in 0..t.neuron_count() {
            let sa = &t.sub_areas()[t.sub_area_of(n)];
            assert!(t.lateral_targets(n).all(|m| m != n && sa.neurons.contains(&m)));
        }
    }

    #[test]
    fn invalid_sizes() {
        assert!(build_inception(0, 17.0).is_err());
        assert!(build_inception(3, 17.0).is_err());
        assert!(build_inception(1, 17.0).is_err());
    }

    #[test]
    fn neuron_deletion_bounds() {
        let t = build_inception(100, 17.0).unwrap();
        let key = StreamKey::new(1, Domain::NeuronDeletion, 0, 0);
        assert_eq!(t.delete_neurons(0.0, &key).unwrap(), t);
        assert!(t.delete_neurons(1.0, &key).unwrap().neuron_mask().iter().all(|&a| !a));
        let dead = t.delete_neurons(0.5, &key).unwrap().dead_neurons().len() as f64;
        assert!((dead - 1050.0).abs() <= 68.8, "{dead}");
        assert!(t.delete_neurons(1.5, &key).is_err());
        // Deleting with rho = 0 afterwards changes nothing further.
        let once = t.delete_neurons(0.3, &key).unwrap();
        assert_eq!(once.delete_neurons(0.0, &key).unwrap(), once);
    }

    #[test]
    fn synapse_deletion_bounds() {
        let t = build_inception(100, 17.0).unwrap();
        let mut conns: Vec<PlasticConnection> = t
            .sub_areas()
            .iter()
            .map(|sa| PlasticConnection::zeros(sa.neurons.len(), sa.inputs.len()))
            .collect();
        let key = StreamKey::new(1, Domain::SynapseDeletion, 0, 0);
        assert_eq!(delete_synapses(&mut conns, 0.0, &key).unwrap(), 0);
        assert!(conns.iter().all(|c| !c.has_mask()));
        let killed = delete_synapses(&mut conns, 0.3, &key).unwrap() as f64;
        assert!((killed - 301_440.0).abs() <= 1378.0, "{killed}");
        let alive: usize = conns.iter().map(|c| c.alive_count()).sum();
        assert_eq!(alive as f64, 1_004_800.0 - killed);
    }
}
