//! The multitasking optimizer: an NSGA-II style reconstruction loop and a
//! dynamic community-detection loop exchanging knowledge in both
//! directions, plus the transfer-free reconstruct-then-detect baseline.
//!
//! Budget layout: a `1-lambda` share of each task's evaluation budget goes
//! to a pre-optimization stage (reconstruction alone, then detection on the
//! selected structure). The remaining share drives the normal stage, where
//! every outer generation runs one reconstruction generation, one
//! dynamic-CD step on the freshly selected structure, and one
//! community-guided local-search transfer back into the NR population.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::NrProblem;
use crate::graph::CommunityPartition;
use crate::moea::{
    binary_tournament, cd_dynamic_step, cd_preoptimize, crowding_distance,
    fast_nondominated_sort, nr_variation, CdRates, Individual, NrRates, Population,
};
use crate::moea::{all_offdiagonal_positions, environment_selection};
use crate::objectives::{self, nr_objectives, NrGenome, ObjectiveVector};
use crate::{Error, Result};

/// Probability that a masked position flips when seeding a local search.
const TRANSFER_FLIP_PROBABILITY: f64 = 0.8;
/// Expected degree of the random initial reconstruction population.
const INIT_EXPECTED_DEGREE: f64 = 6.0;

/// All run parameters: population sizes, budgets, the stage split and the
/// variation rates. `pm = None` means the 1/D default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NcConfig {
    pub n1: usize,
    pub n2: usize,
    pub tfe1: u64,
    pub tfe2: u64,
    pub lambda: f64,
    pub t1: u64,
    pub alpha: usize,
    pub seed: u64,
    pub pc: f64,
    pub pm: Option<f64>,
    pub pmu: f64,
    pub pmi: f64,
    pub pmu_mi: f64,
}

impl Default for NcConfig {
    fn default() -> Self {
        Self {
            n1: 100,
            n2: 100,
            tfe1: 200_000,
            tfe2: 200_000,
            lambda: 0.5,
            t1: 1000,
            alpha: 20,
            seed: 0,
            pc: 1.0,
            pm: None,
            pmu: 0.2,
            pmi: 0.2,
            pmu_mi: 0.5,
        }
    }
}

impl NcConfig {
    /// Normal-stage budget for the NR task; the remainder is pre-stage.
    pub fn normal_budget1(&self) -> u64 {
        (self.lambda * self.tfe1 as f64).floor() as u64
    }

    pub fn pre_budget1(&self) -> u64 {
        self.tfe1 - self.normal_budget1()
    }

    pub fn normal_budget2(&self) -> u64 {
        (self.lambda * self.tfe2 as f64).floor() as u64
    }

    pub fn pre_budget2(&self) -> u64 {
        self.tfe2 - self.normal_budget2()
    }

    /// Number of CD time steps `T = ceil(lambda*TFE1 / (N1 + 2*t1))`.
    pub fn outer_steps(&self) -> u64 {
        let cost = self.n1 as u64 + 2 * self.t1;
        self.normal_budget1().div_ceil(cost)
    }

    /// Evaluations per CD step, `floor(lambda*TFE2 / T)`; leftover budget is
    /// granted to the final step.
    pub fn t2(&self) -> u64 {
        self.normal_budget2() / self.outer_steps()
    }

    pub fn effective_pm(&self, genome_len: usize) -> f64 {
        self.pm.unwrap_or(1.0 / genome_len as f64)
    }

    pub fn nr_rates(&self, genome_len: usize) -> NrRates {
        NrRates {
            pc: self.pc,
            pm: self.effective_pm(genome_len),
        }
    }

    pub fn cd_rates(&self) -> CdRates {
        CdRates {
            pmu: self.pmu,
            pmi: self.pmi,
            pmu_mi: self.pmu_mi,
        }
    }

    fn validate_rates(&self) -> Result<()> {
        let rates = [
            ("pc", self.pc),
            ("pm", self.pm.unwrap_or(0.0)),
            ("pmu", self.pmu),
            ("pmi", self.pmi),
            ("pmu_mi", self.pmu_mi),
        ];
        for (name, value) in rates {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("{name} = {value} outside [0, 1]")));
            }
        }
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::Config("population sizes must be at least 2".into()));
        }
        Ok(())
    }

    /// Checks that every stage can run at least one generation.
    pub fn validate_nc(&self) -> Result<()> {
        self.validate_rates()?;
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!(
                "lambda = {} outside (0, 1)",
                self.lambda
            )));
        }
        if self.pre_budget1() < self.n1 as u64 {
            return Err(Error::Config(format!(
                "NR pre-stage budget {} cannot initialize {} genomes",
                self.pre_budget1(),
                self.n1
            )));
        }
        if self.pre_budget2() < self.n2 as u64 {
            return Err(Error::Config(format!(
                "CD pre-stage budget {} cannot initialize {} partitions",
                self.pre_budget2(),
                self.n2
            )));
        }
        if self.normal_budget1() == 0 {
            return Err(Error::Config("no budget for the normal stage".into()));
        }
        if self.t2() < self.n2 as u64 {
            return Err(Error::Config(format!(
                "per-step CD budget {} below population size {}",
                self.t2(),
                self.n2
            )));
        }
        Ok(())
    }

    /// Checks the baseline variant, which has no stage split.
    pub fn validate_nr2cd(&self) -> Result<()> {
        self.validate_rates()?;
        if self.tfe1 < self.n1 as u64 {
            return Err(Error::Config(format!(
                "NR budget {} cannot initialize {} genomes",
                self.tfe1, self.n1
            )));
        }
        if self.tfe2 < self.n2 as u64 {
            return Err(Error::Config(format!(
                "CD budget {} cannot initialize {} partitions",
                self.tfe2, self.n2
            )));
        }
        Ok(())
    }
}

/// One outer-generation trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: u64,
    pub fe1: u64,
    pub fe2: u64,
    /// Size of the NR population's first nondominated front.
    pub nr_front_size: usize,
    /// Best residual in the NR population.
    pub best_h: f64,
    /// Objectives `(h, g)` of the structure handed to the CD task.
    pub rep_objectives: Option<(f64, f64)>,
    pub cd_front_size: Option<usize>,
    pub cd_nmi_vs_truth: Option<f64>,
}

/// Final structures, metrics against the ground truth and the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: String,
    pub instance: Option<String>,
    pub seed: u64,
    pub x_star: Vec<u8>,
    pub c_star: Vec<usize>,
    pub mcc: f64,
    pub nmi_vs_truth: Option<f64>,
    /// Modularity of `c_star` on the ground-truth network.
    pub q_star: f64,
    pub fe1: u64,
    pub fe2: u64,
    pub trace: Vec<TraceRow>,
}

fn representative_index<G, R: Rng>(members: &[Individual<G>], rng: &mut R) -> Result<usize> {
    if members.is_empty() {
        return Err(Error::State("empty population".into()));
    }
    let objs: Vec<ObjectiveVector> = members.iter().map(|m| m.objectives.clone()).collect();
    let fronts = fast_nondominated_sort(&objs)?;
    let first = &fronts[0];
    if first.len() > 2 {
        let front_objs: Vec<ObjectiveVector> = first.iter().map(|&i| objs[i].clone()).collect();
        let crowd = crowding_distance(&front_objs);
        let best = crowd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = first
            .iter()
            .zip(&crowd)
            .filter(|(_, &c)| c == best)
            .map(|(&i, _)| i)
            .collect();
        Ok(tied[rng.random_range(0..tied.len())])
    } else {
        Ok(first[rng.random_range(0..first.len())])
    }
}

/// Picks the structure handed across tasks: the max-crowding member of the
/// first front, or a uniformly random front member when the front has at
/// most two structures.
pub fn select_representative<R: Rng>(
    pop: &Population<NrGenome>,
    rng: &mut R,
) -> Result<NrGenome> {
    let idx = representative_index(&pop.members, rng)?;
    Ok(pop.members[idx].genome.clone())
}

/// Ordered intra-community positions `(i, j)`, `i != j`, of one community.
pub fn intra_community_positions(n: usize, community: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(community.len() * community.len().saturating_sub(1));
    for &i in community {
        for &j in community {
            if i != j {
                out.push(i * n + j);
            }
        }
    }
    out
}

/// Ordered positions whose endpoints lie in different communities.
pub fn inter_community_positions(partition: &CommunityPartition) -> Vec<usize> {
    let n = partition.len();
    let labels = &partition.labels;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && labels[i] != labels[j] {
                out.push(i * n + j);
            }
        }
    }
    out
}

/// Copies `base` and flips every masked position independently with
/// probability `p`.
pub fn flip_within_mask<R: Rng>(
    base: &NrGenome,
    mask: &[usize],
    p: f64,
    rng: &mut R,
) -> NrGenome {
    let mut genome = base.clone();
    for &pos in mask {
        if rng.random::<f64>() < p {
            let flipped = genome.bits()[pos] ^ 1;
            genome.set_raw(pos, flipped);
        }
    }
    genome
}

/// Knowledge transfer output: the merged population plus the pieces the
/// invariants are stated over.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub population: Population<NrGenome>,
    pub x_prime: NrGenome,
    pub mask_within: Vec<usize>,
    pub mask_between: Vec<usize>,
    pub evaluations: u64,
}

struct TransferBudget {
    remaining: u64,
}

impl TransferBudget {
    fn take(&mut self, want: u64) -> u64 {
        let got = want.min(self.remaining);
        self.remaining -= got;
        got
    }
}

fn local_search<R: Rng>(
    x_prime: &NrGenome,
    mask: &[usize],
    alpha: usize,
    t1: u64,
    problem: &NrProblem,
    rates: &NrRates,
    budget: &mut TransferBudget,
    rng: &mut R,
) -> Result<Vec<Individual<NrGenome>>> {
    let size = budget.take(alpha as u64) as usize;
    if size == 0 {
        return Ok(Vec::new());
    }
    let mut members: Vec<Individual<NrGenome>> = (0..size)
        .map(|_| {
            let genome = flip_within_mask(x_prime, mask, TRANSFER_FLIP_PROBABILITY, rng);
            let objs = nr_objectives(problem, &genome);
            Individual::new(genome, objs)
        })
        .collect();
    let mut pop = environment_selection(Population::new(members, 0), size)?;
    let mut spent_ls = 0u64;
    while spent_ls < t1 {
        let k = budget.take((t1 - spent_ls).min(size as u64)) as usize;
        if k == 0 {
            break;
        }
        let mut offspring = Vec::with_capacity(k);
        while offspring.len() < k {
            let a = rng.random_range(0..pop.members.len());
            let b = rng.random_range(0..pop.members.len());
            let (ca, cb) = nr_variation(
                &pop.members[a].genome,
                &pop.members[b].genome,
                Some(mask),
                rates,
                rng,
            )?;
            offspring.push(ca);
            if offspring.len() < k {
                offspring.push(cb);
            }
        }
        for child in offspring {
            let objs = nr_objectives(problem, &child);
            pop.members.push(Individual::new(child, objs));
        }
        spent_ls += k as u64;
        pop = environment_selection(pop, size)?;
    }
    members = pop.members;
    Ok(members)
}

/// Community-guided local searches seeded from the selected structure:
/// one restricted to a random community's internal link variables, one to
/// the cross-community link variables, merged back by NSGA-II survival.
pub fn knowledge_transfer_cd_to_nr<R: Rng>(
    pop: Population<NrGenome>,
    partition: &CommunityPartition,
    alpha: usize,
    t1: u64,
    problem: &NrProblem,
    rates: &NrRates,
    fe_cap: u64,
    rng: &mut R,
) -> Result<TransferOutcome> {
    let n = problem.n();
    let target = pop.members.len();
    let fe_before = pop.fe_used;
    if alpha == 0 {
        let population = environment_selection(pop, target)?;
        let x_prime = population.members[0].genome.clone();
        return Ok(TransferOutcome {
            population,
            x_prime,
            mask_within: Vec::new(),
            mask_between: Vec::new(),
            evaluations: 0,
        });
    }
    let x_idx = representative_index(&pop.members, rng)?;
    let x_prime = pop.members[x_idx].genome.clone();

    let communities = partition.communities();
    let chosen = &communities[rng.random_range(0..communities.len())];
    let mask_within = intra_community_positions(n, chosen);
    let mask_between = inter_community_positions(partition);

    let mut budget = TransferBudget { remaining: fe_cap };
    let p_in = local_search(
        &x_prime,
        &mask_within,
        alpha,
        t1,
        problem,
        rates,
        &mut budget,
        rng,
    )?;
    let p_out = local_search(
        &x_prime,
        &mask_between,
        alpha,
        t1,
        problem,
        rates,
        &mut budget,
        rng,
    )?;
    let spent = fe_cap - budget.remaining;

    let mut merged = pop;
    merged.members.extend(p_in);
    merged.members.extend(p_out);
    merged.fe_used = fe_before + spent;
    let population = environment_selection(merged, target)?;
    Ok(TransferOutcome {
        population,
        x_prime,
        mask_within,
        mask_between,
        evaluations: spent,
    })
}

fn random_nr_population<R: Rng>(
    problem: &NrProblem,
    n1: usize,
    rng: &mut R,
) -> Vec<Individual<NrGenome>> {
    let n = problem.n();
    let density = (INIT_EXPECTED_DEGREE / n as f64).min(1.0);
    (0..n1)
        .map(|_| {
            let mut genome = NrGenome::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < density {
                        genome.flip(i, j);
                    }
                }
            }
            let objs = nr_objectives(problem, &genome);
            Individual::new(genome, objs)
        })
        .collect()
}

/// One survival generation of the reconstruction task: `k` offspring from
/// binary tournaments, then NSGA-II selection over parents and offspring.
fn nr_generation<R: Rng>(
    mut pop: Population<NrGenome>,
    k: usize,
    problem: &NrProblem,
    positions: &[usize],
    rates: &NrRates,
    rng: &mut R,
) -> Result<Population<NrGenome>> {
    let target = pop.members.len();
    let mut offspring = Vec::with_capacity(k);
    while offspring.len() < k {
        let a = binary_tournament(&pop.members, rng);
        let b = binary_tournament(&pop.members, rng);
        let (ca, cb) = nr_variation(
            &pop.members[a].genome,
            &pop.members[b].genome,
            Some(positions),
            rates,
            rng,
        )?;
        offspring.push(ca);
        if offspring.len() < k {
            offspring.push(cb);
        }
    }
    for child in offspring {
        let objs = nr_objectives(problem, &child);
        pop.members.push(Individual::new(child, objs));
    }
    pop.fe_used += k as u64;
    environment_selection(pop, target)
}

fn best_residual(members: &[Individual<NrGenome>]) -> f64 {
    members
        .iter()
        .map(|m| m.objectives[0])
        .fold(f64::INFINITY, f64::min)
}

fn front_size(members: &[Individual<NrGenome>]) -> usize {
    members.iter().filter(|m| m.rank == 0).count()
}

fn finish(
    algorithm: &str,
    seed: u64,
    problem: &NrProblem,
    x_star: NrGenome,
    c_star: CommunityPartition,
    fe1: u64,
    fe2: u64,
    trace: Vec<TraceRow>,
) -> RunResult {
    let truth = problem.truth();
    let mcc = objectives::mcc(&x_star, truth);
    let nmi_vs_truth = problem
        .truth_partition()
        .map(|tp| objectives::nmi(&c_star, tp).expect("matching lengths"));
    let q_star = objectives::modularity(truth.adjacency(), truth.n(), &c_star);
    RunResult {
        algorithm: algorithm.to_string(),
        instance: None,
        seed,
        x_star: x_star.bits().to_vec(),
        c_star: c_star.labels,
        mcc,
        nmi_vs_truth,
        q_star,
        fe1,
        fe2,
        trace,
    }
}

/// Runs the full two-stage multitasking optimizer.
pub fn run_network_collaborator(problem: &NrProblem, cfg: &NcConfig) -> Result<RunResult> {
    cfg.validate_nc()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = problem.n();
    let rates = cfg.nr_rates(problem.genome_len());
    let cd_rates = cfg.cd_rates();
    let positions = all_offdiagonal_positions(n);

    // Pre-optimization of the NR task.
    let members = random_nr_population(problem, cfg.n1, &mut rng);
    let mut pop = environment_selection(Population::new(members, cfg.n1 as u64), cfg.n1)?;
    while pop.fe_used < cfg.pre_budget1() {
        let k = (cfg.pre_budget1() - pop.fe_used).min(cfg.n1 as u64) as usize;
        pop = nr_generation(pop, k, problem, &positions, &rates, &mut rng)?;
    }

    // Pre-optimization of the CD task on the selected structure.
    let x0 = select_representative(&pop, &mut rng)?;
    let (mut c_prev, pre2_spent) = cd_preoptimize(
        &x0.symmetrize_or(),
        n,
        cfg.n2,
        cfg.pre_budget2(),
        &cd_rates,
        &mut rng,
    )?;
    let mut fe2 = pre2_spent;

    let t2 = cfg.t2();
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut generation = 0u64;
    loop {
        let r1 = cfg.tfe1 - pop.fe_used;
        let r2 = cfg.tfe2 - fe2;
        if r1 == 0 && r2 == 0 {
            break;
        }
        generation += 1;
        if r1 > 0 {
            let k = r1.min(cfg.n1 as u64) as usize;
            pop = nr_generation(pop, k, problem, &positions, &rates, &mut rng)?;
        }
        let mut row = TraceRow {
            generation,
            fe1: pop.fe_used,
            fe2,
            nr_front_size: front_size(&pop.members),
            best_h: best_residual(&pop.members),
            rep_objectives: None,
            cd_front_size: None,
            cd_nmi_vs_truth: None,
        };
        let r2 = cfg.tfe2 - fe2;
        if r2 > 0 {
            debug_assert!(r2 >= t2, "CD budget fragments below one step");
            let step_budget = if r2 - t2 < t2 { r2 } else { t2 };
            let x_idx = representative_index(&pop.members, &mut rng)?;
            let x_t = pop.members[x_idx].genome.clone();
            let objs = &pop.members[x_idx].objectives;
            row.rep_objectives = Some((objs[0], objs[1]));
            let step = cd_dynamic_step(
                &x_t.symmetrize_or(),
                n,
                &c_prev,
                cfg.n2,
                step_budget,
                &cd_rates,
                &mut rng,
            )?;
            fe2 += step.evaluations;
            row.cd_front_size = Some(step.front.len());
            c_prev = step.partition;
            row.cd_nmi_vs_truth = problem
                .truth_partition()
                .map(|tp| objectives::nmi(&c_prev, tp).expect("matching lengths"));

            let fe_cap = cfg.tfe1 - pop.fe_used;
            if fe_cap > 0 {
                let outcome = knowledge_transfer_cd_to_nr(
                    pop,
                    &c_prev,
                    cfg.alpha,
                    cfg.t1,
                    problem,
                    &rates,
                    fe_cap,
                    &mut rng,
                )?;
                pop = outcome.population;
            }
        }
        row.fe1 = pop.fe_used;
        row.fe2 = fe2;
        row.best_h = best_residual(&pop.members);
        trace.push(row);
    }

    let x_star = select_representative(&pop, &mut rng)?;
    Ok(finish(
        "nc",
        cfg.seed,
        problem,
        x_star,
        c_prev,
        pop.fe_used,
        fe2,
        trace,
    ))
}

/// Baseline: spend the whole NR budget reconstructing, then detect
/// communities on the selected structure with the whole CD budget.
pub fn run_nr2cd(problem: &NrProblem, cfg: &NcConfig) -> Result<RunResult> {
    cfg.validate_nr2cd()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = problem.n();
    let rates = cfg.nr_rates(problem.genome_len());
    let positions = all_offdiagonal_positions(n);

    let members = random_nr_population(problem, cfg.n1, &mut rng);
    let mut pop = environment_selection(Population::new(members, cfg.n1 as u64), cfg.n1)?;
    while pop.fe_used < cfg.tfe1 {
        let k = (cfg.tfe1 - pop.fe_used).min(cfg.n1 as u64) as usize;
        pop = nr_generation(pop, k, problem, &positions, &rates, &mut rng)?;
    }
    let x_star = select_representative(&pop, &mut rng)?;
    let (c_star, fe2) = cd_preoptimize(
        &x_star.symmetrize_or(),
        n,
        cfg.n2,
        cfg.tfe2,
        &cfg.cd_rates(),
        &mut rng,
    )?;
    Ok(finish(
        "nr2cd",
        cfg.seed,
        problem,
        x_star,
        c_star,
        pop.fe_used,
        fe2,
        Vec::new(),
    ))
}
