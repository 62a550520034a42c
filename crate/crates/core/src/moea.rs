//! Evolutionary machinery shared by both tasks: fast nondominated sorting,
//! crowding distance, NSGA-II environment selection, binary variation for
//! the NR task, label-vector variation for the CD task, and the two CD
//! optimizers (single-objective pre-optimization and the biobjective
//! dynamic-snapshot step).

use rand::Rng;

use crate::graph::CommunityPartition;
use crate::objectives::{self, dominates, ObjectiveVector};
use crate::objectives::NrGenome;
use crate::{Error, Result};

/// Population member: genome, objectives and NSGA-II metadata.
#[derive(Debug, Clone)]
pub struct Individual<G> {
    pub genome: G,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

impl<G> Individual<G> {
    pub fn new(genome: G, objectives: ObjectiveVector) -> Self {
        Self {
            genome,
            objectives,
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// Ordered population for one task plus its evaluation counter.
#[derive(Debug, Clone)]
pub struct Population<G> {
    pub members: Vec<Individual<G>>,
    pub fe_used: u64,
}

impl<G> Population<G> {
    pub fn new(members: Vec<Individual<G>>, fe_used: u64) -> Self {
        Self { members, fe_used }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Partitions indices into nondominated fronts (Deb's fast sort).
///
/// `F^1` holds exactly the nondominated points; every point in `F^k` is
/// dominated only by points in earlier fronts.
pub fn fast_nondominated_sort(objs: &[ObjectiveVector]) -> Result<Vec<Vec<usize>>> {
    if objs.is_empty() {
        return Err(Error::Dimension("empty objective list".into()));
    }
    let m = objs[0].len();
    if objs.iter().any(|o| o.len() != m) {
        return Err(Error::Dimension("mixed objective lengths".into()));
    }
    let n = objs.len();
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objs[i], &objs[j]) {
                dominated[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominated[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::take(&mut current));
        current = next;
    }
    Ok(fronts)
}

/// Crowding distance of one front: per-objective boundary points get
/// infinity, interior points get the normalized neighbor-gap sum; fronts of
/// size <= 2 are all infinite; zero-range objectives contribute nothing.
pub fn crowding_distance(front_objs: &[ObjectiveVector]) -> Vec<f64> {
    let k = front_objs.len();
    if k == 0 {
        return Vec::new();
    }
    if k <= 2 {
        return vec![f64::INFINITY; k];
    }
    let m = front_objs[0].len();
    let mut dist = vec![0.0f64; k];
    let mut order: Vec<usize> = (0..k).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| front_objs[a][obj].partial_cmp(&front_objs[b][obj]).unwrap());
        let lo = front_objs[order[0]][obj];
        let hi = front_objs[order[k - 1]][obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[k - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range == 0.0 {
            continue;
        }
        for w in 1..(k - 1) {
            let gap = front_objs[order[w + 1]][obj] - front_objs[order[w - 1]][obj];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

fn select_members<G>(pool: Vec<Individual<G>>, n: usize) -> Result<Vec<Individual<G>>> {
    if pool.len() < n {
        return Err(Error::State(format!(
            "selection pool of {} cannot fill {} slots",
            pool.len(),
            n
        )));
    }
    let objs: Vec<ObjectiveVector> = pool.iter().map(|ind| ind.objectives.clone()).collect();
    let fronts = fast_nondominated_sort(&objs)?;
    let mut slots: Vec<Option<Individual<G>>> = pool.into_iter().map(Some).collect();
    let mut selected = Vec::with_capacity(n);
    for (rank, front) in fronts.iter().enumerate() {
        if selected.len() == n {
            break;
        }
        let front_objs: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i].clone()).collect();
        let crowd = crowding_distance(&front_objs);
        let mut order: Vec<usize> = (0..front.len()).collect();
        if selected.len() + front.len() > n {
            // Split the last admitted front by descending crowding distance;
            // the stable sort keeps index order among ties.
            order.sort_by(|&a, &b| crowd[b].partial_cmp(&crowd[a]).unwrap());
        }
        for &w in order.iter().take(n - selected.len()) {
            let mut ind = slots[front[w]].take().unwrap();
            ind.rank = rank;
            ind.crowding = crowd[w];
            selected.push(ind);
        }
    }
    Ok(selected)
}

/// NSGA-II survival: fill by fronts, split the last admitted front by
/// descending crowding distance. Output size is exactly `n`.
pub fn environment_selection<G>(pool: Population<G>, n: usize) -> Result<Population<G>> {
    let fe = pool.fe_used;
    Ok(Population::new(select_members(pool.members, n)?, fe))
}

/// Binary tournament on (rank, crowding); ties are broken by a coin flip.
pub fn binary_tournament<G, R: Rng>(members: &[Individual<G>], rng: &mut R) -> usize {
    let a = rng.random_range(0..members.len());
    let b = rng.random_range(0..members.len());
    let (ia, ib) = (&members[a], &members[b]);
    if ia.rank < ib.rank || (ia.rank == ib.rank && ia.crowding > ib.crowding) {
        a
    } else if ib.rank < ia.rank || (ib.rank == ia.rank && ib.crowding > ia.crowding) {
        b
    } else if rng.random::<bool>() {
        a
    } else {
        b
    }
}

/// Visits each index in `0..len` independently with probability `p`,
/// using geometric skips so the cost is proportional to the hits.
fn bernoulli_indices<R: Rng>(len: usize, p: f64, rng: &mut R, mut visit: impl FnMut(usize)) {
    if len == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for i in 0..len {
            visit(i);
        }
        return;
    }
    let ln_q = (1.0 - p).ln();
    let mut pos = 0usize;
    loop {
        let u: f64 = rng.random();
        let skip = (u.ln() / ln_q).floor();
        if !skip.is_finite() || skip >= (len - pos) as f64 {
            return;
        }
        pos += skip as usize;
        visit(pos);
        pos += 1;
        if pos >= len {
            return;
        }
    }
}

/// Variation rates for the NR task.
#[derive(Debug, Clone, Copy)]
pub struct NrRates {
    pub pc: f64,
    pub pm: f64,
}

/// All off-diagonal genome positions, row-major.
pub fn all_offdiagonal_positions(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n * n - n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.push(i * n + j);
            }
        }
    }
    out
}

fn validate_positions(positions: &[usize], n: usize) -> Result<()> {
    for &pos in positions {
        if pos >= n * n {
            return Err(Error::Domain(format!(
                "mask position {pos} out of range for genome length {}",
                n * n
            )));
        }
        if pos / n == pos % n {
            return Err(Error::Domain(format!("mask position {pos} is diagonal")));
        }
    }
    Ok(())
}

/// Swaps the values at `positions[..cut]` between the two children.
/// A cut of zero leaves both children equal to their parents.
fn single_point_crossover(a: &mut NrGenome, b: &mut NrGenome, positions: &[usize], cut: usize) {
    for &pos in &positions[..cut] {
        let (va, vb) = (a.bits()[pos], b.bits()[pos]);
        a.set_raw(pos, vb);
        b.set_raw(pos, va);
    }
}

/// Single-point crossover plus bitwise mutation over the masked positions;
/// unmasked positions are copied from the respective parent and diagonal
/// positions never flip.
pub fn nr_variation<R: Rng>(
    parent_a: &NrGenome,
    parent_b: &NrGenome,
    mask: Option<&[usize]>,
    rates: &NrRates,
    rng: &mut R,
) -> Result<(NrGenome, NrGenome)> {
    if parent_a.n() != parent_b.n() {
        return Err(Error::Dimension("parent genome lengths differ".into()));
    }
    let owned;
    let positions: &[usize] = match mask {
        Some(m) => {
            validate_positions(m, parent_a.n())?;
            m
        }
        None => {
            owned = all_offdiagonal_positions(parent_a.n());
            &owned
        }
    };
    let mut child_a = parent_a.clone();
    let mut child_b = parent_b.clone();
    if !positions.is_empty() && rng.random::<f64>() < rates.pc {
        let cut = rng.random_range(0..=positions.len());
        single_point_crossover(&mut child_a, &mut child_b, positions, cut);
    }
    for child in [&mut child_a, &mut child_b] {
        bernoulli_indices(positions.len(), rates.pm, rng, |w| {
            let pos = positions[w];
            let flipped = child.bits()[pos] ^ 1;
            child.set_raw(pos, flipped);
        });
    }
    Ok((child_a, child_b))
}

/// Variation rates for the CD task.
#[derive(Debug, Clone, Copy)]
pub struct CdRates {
    pub pmu: f64,
    pub pmi: f64,
    pub pmu_mi: f64,
}

/// Static view of one network snapshot used by the CD operators.
#[derive(Debug, Clone)]
pub struct CdContext {
    n: usize,
    adjacency: Vec<u8>,
    neighbors: Vec<Vec<usize>>,
}

impl CdContext {
    pub fn new(adjacency: Vec<u8>, n: usize) -> Self {
        debug_assert_eq!(adjacency.len(), n * n);
        let neighbors = (0..n)
            .map(|i| {
                adjacency[i * n..(i + 1) * n]
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a != 0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Self {
            n,
            adjacency,
            neighbors,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modularity(&self, partition: &CommunityPartition) -> f64 {
        objectives::modularity(&self.adjacency, self.n, partition)
    }

    /// One random partition: every node adopts a uniformly random member of
    /// its closed neighborhood as its label.
    pub fn neighbor_label_random<R: Rng>(&self, rng: &mut R) -> CommunityPartition {
        let labels = (0..self.n)
            .map(|i| {
                let nbrs = &self.neighbors[i];
                let pick = rng.random_range(0..=nbrs.len());
                if pick == nbrs.len() {
                    i
                } else {
                    nbrs[pick]
                }
            })
            .collect();
        CommunityPartition::new(labels)
    }
}

fn two_point_label_crossover<R: Rng>(
    a: &[usize],
    b: &[usize],
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let n = a.len();
    let mut c1 = rng.random_range(0..=n);
    let mut c2 = rng.random_range(0..=n);
    if c1 > c2 {
        std::mem::swap(&mut c1, &mut c2);
    }
    let mut child_a = a.to_vec();
    let mut child_b = b.to_vec();
    child_a[c1..c2].copy_from_slice(&b[c1..c2]);
    child_b[c1..c2].copy_from_slice(&a[c1..c2]);
    (child_a, child_b)
}

/// Each node, with probability `pmu`, adopts a uniformly random neighbor's
/// label, read from the pre-pass snapshot. Isolated nodes are untouched.
fn mutation_pass<R: Rng>(labels: &mut [usize], ctx: &CdContext, pmu: f64, rng: &mut R) {
    let snapshot = labels.to_vec();
    for i in 0..labels.len() {
        let nbrs = &ctx.neighbors[i];
        if nbrs.is_empty() {
            continue;
        }
        if rng.random::<f64>() < pmu {
            labels[i] = snapshot[nbrs[rng.random_range(0..nbrs.len())]];
        }
    }
}

/// Each node, with probability `pmi`, adopts the majority label among its
/// neighbors (snapshot view); ties are broken uniformly at random.
fn migration_pass<R: Rng>(labels: &mut [usize], ctx: &CdContext, pmi: f64, rng: &mut R) {
    let snapshot = labels.to_vec();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for i in 0..labels.len() {
        let nbrs = &ctx.neighbors[i];
        if nbrs.is_empty() {
            continue;
        }
        if rng.random::<f64>() >= pmi {
            continue;
        }
        counts.clear();
        for &j in nbrs {
            let label = snapshot[j];
            match counts.iter_mut().find(|(l, _)| *l == label) {
                Some((_, c)) => *c += 1,
                None => counts.push((label, 1)),
            }
        }
        let best = counts.iter().map(|&(_, c)| c).max().unwrap();
        let tied: Vec<usize> = counts
            .iter()
            .filter(|&&(_, c)| c == best)
            .map(|&(l, _)| l)
            .collect();
        labels[i] = tied[rng.random_range(0..tied.len())];
    }
}

/// Two-point label crossover, then per child either mutation (with
/// probability `pmu_mi`) or migration.
pub fn cd_variation<R: Rng>(
    parent_a: &CommunityPartition,
    parent_b: &CommunityPartition,
    ctx: &CdContext,
    rates: &CdRates,
    rng: &mut R,
) -> (CommunityPartition, CommunityPartition) {
    debug_assert_eq!(parent_a.len(), parent_b.len());
    let (mut la, mut lb) = two_point_label_crossover(&parent_a.labels, &parent_b.labels, rng);
    for labels in [&mut la, &mut lb] {
        if rng.random::<f64>() < rates.pmu_mi {
            mutation_pass(labels, ctx, rates.pmu, rng);
        } else {
            migration_pass(labels, ctx, rates.pmi, rng);
        }
    }
    (CommunityPartition::new(la), CommunityPartition::new(lb))
}

fn tournament_by_q<R: Rng>(pop: &[(CommunityPartition, f64)], rng: &mut R) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    if pop[a].1 > pop[b].1 {
        a
    } else if pop[b].1 > pop[a].1 {
        b
    } else if rng.random::<bool>() {
        a
    } else {
        b
    }
}

/// Single-objective GA maximizing modularity. Returns the best partition
/// found and the number of evaluations consumed (`<= budget`).
pub fn cd_preoptimize<R: Rng>(
    adjacency: &[u8],
    n: usize,
    n2: usize,
    budget: u64,
    rates: &CdRates,
    rng: &mut R,
) -> Result<(CommunityPartition, u64)> {
    if (budget as usize) < n2 {
        return Err(Error::Config(format!(
            "CD budget {budget} below population size {n2}"
        )));
    }
    let ctx = CdContext::new(adjacency.to_vec(), n);
    let mut pop: Vec<(CommunityPartition, f64)> = (0..n2)
        .map(|_| {
            let p = ctx.neighbor_label_random(rng);
            let q = ctx.modularity(&p);
            (p, q)
        })
        .collect();
    let mut spent = n2 as u64;
    let mut best = pop
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap()
        .clone();
    while spent < budget {
        let k = (budget - spent).min(n2 as u64) as usize;
        let mut offspring = Vec::with_capacity(k);
        while offspring.len() < k {
            let pa = &pop[tournament_by_q(&pop, rng)].0.clone();
            let pb = &pop[tournament_by_q(&pop, rng)].0.clone();
            let (c1, c2) = cd_variation(pa, pb, &ctx, rates, rng);
            offspring.push(c1);
            if offspring.len() < k {
                offspring.push(c2);
            }
        }
        for child in offspring {
            let q = ctx.modularity(&child);
            if q > best.1 {
                best = (child.clone(), q);
            }
            pop.push((child, q));
        }
        spent += k as u64;
        // Elitist truncation; the stable sort keeps older members first
        // among equal scores.
        pop.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        pop.truncate(n2);
    }
    Ok((best.0, spent))
}

/// Outcome of one dynamic-CD snapshot step.
#[derive(Debug, Clone)]
pub struct CdStepResult {
    pub partition: CommunityPartition,
    /// Final first nondominated front.
    pub front: Vec<Individual<CommunityPartition>>,
    pub evaluations: u64,
}

/// Biobjective NSGA-II step on one snapshot: maximize modularity of the
/// snapshot and NMI against the previous partition. The initial population
/// is the previous partition plus neighbor-label randomizations; the
/// returned partition is the max-modularity member of the first front.
pub fn cd_dynamic_step<R: Rng>(
    adjacency: &[u8],
    n: usize,
    c_prev: &CommunityPartition,
    n2: usize,
    budget: u64,
    rates: &CdRates,
    rng: &mut R,
) -> Result<CdStepResult> {
    if c_prev.len() != n {
        return Err(Error::Dimension(format!(
            "previous partition length {} != {}",
            c_prev.len(),
            n
        )));
    }
    if (budget as usize) < n2 {
        return Err(Error::Config(format!(
            "CD step budget {budget} below population size {n2}"
        )));
    }
    let ctx = CdContext::new(adjacency.to_vec(), n);
    let evaluate = |p: &CommunityPartition| -> ObjectiveVector {
        let q = ctx.modularity(p);
        let sim = objectives::nmi(p, c_prev).expect("matching lengths");
        vec![-q, -sim]
    };
    let mut members = Vec::with_capacity(n2);
    members.push(Individual::new(c_prev.clone(), evaluate(c_prev)));
    while members.len() < n2 {
        let p = ctx.neighbor_label_random(rng);
        let objs = evaluate(&p);
        members.push(Individual::new(p, objs));
    }
    let mut spent = n2 as u64;
    let mut members = select_members(members, n2)?;
    while spent < budget {
        let k = (budget - spent).min(n2 as u64) as usize;
        let mut offspring = Vec::with_capacity(k);
        while offspring.len() < k {
            let pa = members[binary_tournament(&members, rng)].genome.clone();
            let pb = members[binary_tournament(&members, rng)].genome.clone();
            let (c1, c2) = cd_variation(&pa, &pb, &ctx, rates, rng);
            offspring.push(c1);
            if offspring.len() < k {
                offspring.push(c2);
            }
        }
        for child in offspring {
            let objs = evaluate(&child);
            members.push(Individual::new(child, objs));
        }
        spent += k as u64;
        members = select_members(members, n2)?;
    }
    let front: Vec<Individual<CommunityPartition>> = members
        .iter()
        .filter(|ind| ind.rank == 0)
        .cloned()
        .collect();
    let best = front
        .iter()
        .min_by(|a, b| a.objectives[0].partial_cmp(&b.objectives[0]).unwrap())
        .expect("front is nonempty");
    Ok(CdStepResult {
        partition: best.genome.clone(),
        front: front.clone(),
        evaluations: spent,
    })
}
