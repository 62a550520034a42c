//! Evolutionary-game and resistor-network dynamics on a ground-truth
//! network, and the per-node linear systems they induce for the NR task.
//!
//! Both simulators record `ns` independent sequences of `l` samples. A
//! sequence contributes `l` rows to each node's design matrix, so node `i`
//! ends up with an `(ns*l) x n` system `U_i x_i = Y_i` that the truth
//! adjacency row solves exactly.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{CommunityPartition, Network};
use crate::objectives::NrGenome;
use crate::{Error, Result};

/// Prisoner's dilemma payoffs: rows index own strategy, columns the
/// opponent's; 0 = cooperate, 1 = defect.
const PAYOFF: [[f64; 2]; 2] = [[1.0, 0.0], [1.2, 0.0]];
/// Fermi rule selection intensity.
const KAPPA: f64 = 0.1;
/// Resistor-network drive frequency and voltage peak.
const RN_FREQUENCY: f64 = 1e3;
const RN_VOLTAGE_PEAK: f64 = 1.0;
/// Node-frequency perturbations are uniform on [0, RN_PERTURBATION_MAX].
const RN_PERTURBATION_MAX: f64 = 20.0;

/// Recorded evolutionary-game observations: strategies (0 = cooperate,
/// 1 = defect) and payoffs, indexed `[sequence][round][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgData {
    pub ns: usize,
    pub l: usize,
    pub n: usize,
    pub strategies: Vec<u8>,
    pub payoffs: Vec<f64>,
}

impl EgData {
    fn idx(&self, s: usize, t: usize, i: usize) -> usize {
        (s * self.l + t) * self.n + i
    }

    pub fn strategy(&self, s: usize, t: usize, i: usize) -> u8 {
        self.strategies[self.idx(s, t, i)]
    }

    pub fn payoff(&self, s: usize, t: usize, i: usize) -> f64 {
        self.payoffs[self.idx(s, t, i)]
    }
}

/// Recorded resistor-network observations indexed `[sequence][sample][node]`,
/// plus the per-sequence node frequency perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnData {
    pub ns: usize,
    pub l: usize,
    pub n: usize,
    pub voltages: Vec<f64>,
    pub currents: Vec<f64>,
    pub perturbations: Vec<f64>,
}

impl RnData {
    fn idx(&self, s: usize, t: usize, i: usize) -> usize {
        (s * self.l + t) * self.n + i
    }

    pub fn voltage(&self, s: usize, t: usize, i: usize) -> f64 {
        self.voltages[self.idx(s, t, i)]
    }

    pub fn current(&self, s: usize, t: usize, i: usize) -> f64 {
        self.currents[self.idx(s, t, i)]
    }
}

/// Fermi imitation probability `W(S_i <- S_j)`.
pub fn fermi_adoption_probability(own_payoff: f64, neighbor_payoff: f64) -> f64 {
    1.0 / (1.0 + ((own_payoff - neighbor_payoff) / KAPPA).exp())
}

fn eg_payoffs(net: &Network, strategies: &[u8], out: &mut [f64]) {
    let n = net.n();
    for i in 0..n {
        let row = &net.adjacency()[i * n..(i + 1) * n];
        let si = strategies[i] as usize;
        let mut acc = 0.0;
        for j in 0..n {
            if row[j] != 0 {
                acc += PAYOFF[si][strategies[j] as usize];
            }
        }
        out[i] = acc;
    }
}

/// Simulates the evolutionary game: random initial strategies, payoffs per
/// round, synchronous Fermi updates against one uniformly random neighbor.
pub fn simulate_eg(net: &Network, ns: usize, l: usize, seed: u64) -> EgData {
    assert!(ns >= 1 && l >= 1, "need at least one sequence and round");
    let n = net.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let neighbor_lists: Vec<Vec<usize>> = (0..n).map(|i| net.neighbors(i).collect()).collect();
    let mut data = EgData {
        ns,
        l,
        n,
        strategies: vec![0; ns * l * n],
        payoffs: vec![0.0; ns * l * n],
    };
    let mut current: Vec<u8> = vec![0; n];
    let mut payoff: Vec<f64> = vec![0.0; n];
    let mut next: Vec<u8> = vec![0; n];
    for s in 0..ns {
        for st in current.iter_mut() {
            *st = u8::from(rng.random::<f64>() < 0.5);
        }
        for t in 0..l {
            eg_payoffs(net, &current, &mut payoff);
            let base = (s * l + t) * n;
            data.strategies[base..base + n].copy_from_slice(&current);
            data.payoffs[base..base + n].copy_from_slice(&payoff);
            if t + 1 == l {
                break;
            }
            // Synchronous update from this round's payoffs.
            next.copy_from_slice(&current);
            for i in 0..n {
                let nbrs = &neighbor_lists[i];
                if nbrs.is_empty() {
                    continue;
                }
                let j = nbrs[rng.random_range(0..nbrs.len())];
                let w = fermi_adoption_probability(payoff[i], payoff[j]);
                if rng.random::<f64>() < w {
                    next[i] = current[j];
                }
            }
            current.copy_from_slice(&next);
        }
    }
    data
}

/// Simulates the resistor network: per sequence, random per-node frequency
/// perturbations and `l` sample times uniform over ten drive periods.
pub fn simulate_rn(net: &Network, ns: usize, l: usize, seed: u64) -> RnData {
    assert!(ns >= 1 && l >= 1, "need at least one sequence and sample");
    let n = net.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 10.0 * 2.0 * std::f64::consts::PI / RN_FREQUENCY;
    let mut data = RnData {
        ns,
        l,
        n,
        voltages: vec![0.0; ns * l * n],
        currents: vec![0.0; ns * l * n],
        perturbations: vec![0.0; ns * n],
    };
    for s in 0..ns {
        let dw = &mut data.perturbations[s * n..(s + 1) * n];
        for v in dw.iter_mut() {
            *v = rng.random_range(0.0..=RN_PERTURBATION_MAX);
        }
        for t in 0..l {
            let time = rng.random_range(0.0..=horizon);
            let base = (s * l + t) * n;
            for i in 0..n {
                data.voltages[base + i] =
                    RN_VOLTAGE_PEAK * ((RN_FREQUENCY + data.perturbations[s * n + i]) * time).sin();
            }
            for i in 0..n {
                let vi = data.voltages[base + i];
                let row = &net.adjacency()[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for j in 0..n {
                    if row[j] != 0 {
                        acc += vi - data.voltages[base + j];
                    }
                }
                data.currents[base + i] = acc;
            }
        }
    }
    data
}

/// Per-node linear systems defining the NR objective, together with the
/// ground truth they were generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrProblem {
    n: usize,
    rows: usize,
    design: Vec<Vec<f64>>,
    target: Vec<Vec<f64>>,
    truth: Network,
}

impl NrProblem {
    pub fn new(
        n: usize,
        rows: usize,
        design: Vec<Vec<f64>>,
        target: Vec<Vec<f64>>,
        truth: Network,
    ) -> Result<Self> {
        if design.len() != n || target.len() != n || truth.n() != n {
            return Err(Error::Dimension("per-node system count != n".into()));
        }
        if design.iter().any(|u| u.len() != rows * n) || target.iter().any(|y| y.len() != rows) {
            return Err(Error::Dimension("system shape mismatch".into()));
        }
        Ok(Self {
            n,
            rows,
            design,
            target,
            truth,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Rows per node (`ns * l`).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Genome length `D = n^2`.
    pub fn genome_len(&self) -> usize {
        self.n * self.n
    }

    /// Node `i`'s design matrix, row-major `rows x n`.
    pub fn design(&self, i: usize) -> &[f64] {
        &self.design[i]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.target[i]
    }

    pub fn truth(&self) -> &Network {
        &self.truth
    }

    pub fn truth_partition(&self) -> Option<&CommunityPartition> {
        self.truth.truth_partition.as_ref()
    }

    pub fn truth_genome(&self) -> NrGenome {
        NrGenome::from_network(&self.truth)
    }
}

/// Assembles per-node systems from game data: `U_i[t][j] = S_i(t)' P S_j(t)`
/// and `Y_i` stacks the recorded payoffs sequence by sequence.
pub fn build_eg_problem(data: &EgData, net: &Network) -> Result<NrProblem> {
    if data.n != net.n() {
        return Err(Error::Dimension(format!(
            "data for {} nodes, network has {}",
            data.n,
            net.n()
        )));
    }
    let n = data.n;
    let rows = data.ns * data.l;
    let mut design = vec![vec![0.0; rows * n]; n];
    let mut target = vec![vec![0.0; rows]; n];
    for s in 0..data.ns {
        for t in 0..data.l {
            let r = s * data.l + t;
            let base = (s * data.l + t) * n;
            let strategies = &data.strategies[base..base + n];
            for i in 0..n {
                let si = strategies[i] as usize;
                let row = &mut design[i][r * n..(r + 1) * n];
                for j in 0..n {
                    row[j] = PAYOFF[si][strategies[j] as usize];
                }
                target[i][r] = data.payoffs[base + i];
            }
        }
    }
    NrProblem::new(n, rows, design, target, net.clone())
}

/// Assembles per-node systems from resistor data: `R_i[t][j] = V_i(t) - V_j(t)`
/// and `Y_i` stacks the recorded currents.
pub fn build_rn_problem(data: &RnData, net: &Network) -> Result<NrProblem> {
    if data.n != net.n() {
        return Err(Error::Dimension(format!(
            "data for {} nodes, network has {}",
            data.n,
            net.n()
        )));
    }
    let n = data.n;
    let rows = data.ns * data.l;
    let mut design = vec![vec![0.0; rows * n]; n];
    let mut target = vec![vec![0.0; rows]; n];
    for s in 0..data.ns {
        for t in 0..data.l {
            let r = s * data.l + t;
            let base = (s * data.l + t) * n;
            let voltages = &data.voltages[base..base + n];
            for i in 0..n {
                let vi = voltages[i];
                let row = &mut design[i][r * n..(r + 1) * n];
                for j in 0..n {
                    row[j] = vi - voltages[j];
                }
                target[i][r] = data.currents[base + i];
            }
        }
    }
    NrProblem::new(n, rows, design, target, net.clone())
}

/// Which dynamics generated a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsKind {
    Eg,
    Rn,
}

impl std::fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DynamicsKind::Eg => write!(f, "eg"),
            DynamicsKind::Rn => write!(f, "rn"),
        }
    }
}

/// Self-contained problem instance: metadata, ground truth and the
/// assembled row-major systems, replayable without re-simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instance: String,
    pub dynamics: DynamicsKind,
    pub ns: usize,
    pub l: usize,
    pub seed: u64,
    pub n: usize,
    pub rows: usize,
    pub truth_edges: Vec<(usize, usize)>,
    pub truth_labels: Option<Vec<usize>>,
    pub design: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
}

impl Dataset {
    /// Simulates the requested dynamics on `net` and packages the instance.
    pub fn generate(
        instance: &str,
        dynamics: DynamicsKind,
        net: &Network,
        ns: usize,
        l: usize,
        seed: u64,
    ) -> Result<Self> {
        let problem = match dynamics {
            DynamicsKind::Eg => build_eg_problem(&simulate_eg(net, ns, l, seed), net)?,
            DynamicsKind::Rn => build_rn_problem(&simulate_rn(net, ns, l, seed), net)?,
        };
        Ok(Self {
            instance: instance.to_string(),
            dynamics,
            ns,
            l,
            seed,
            n: net.n(),
            rows: problem.rows(),
            truth_edges: net.edges(),
            truth_labels: net.truth_partition.as_ref().map(|p| p.labels.clone()),
            design: problem.design.clone(),
            target: problem.target.clone(),
        })
    }

    pub fn to_problem(&self) -> Result<NrProblem> {
        let mut truth = Network::from_edges(self.n, &self.truth_edges)?;
        truth.truth_partition = self
            .truth_labels
            .clone()
            .map(CommunityPartition::new);
        NrProblem::new(
            self.n,
            self.rows,
            self.design.clone(),
            self.target.clone(),
            truth,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
