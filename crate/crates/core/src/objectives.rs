//! Objective functions and evaluation metrics for both tasks.
//!
//! Everything here is a pure function; CD quality scores (modularity, NMI)
//! are maximized by convention, so optimizers negate them to minimize.

use serde::{Deserialize, Serialize};

use crate::dynamics::NrProblem;
use crate::graph::{CommunityPartition, Network};
use crate::{Error, Result};

/// Objective tuple; both tasks use two minimization objectives.
pub type ObjectiveVector = Vec<f64>;

/// Candidate network structure: a length-N² binary vector, row-major,
/// with the diagonal fixed to zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NrGenome {
    n: usize,
    bits: Vec<u8>,
}

impl NrGenome {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            bits: vec![0; n * n],
        }
    }

    /// Copies the truth adjacency into genome encoding.
    pub fn from_network(net: &Network) -> Self {
        Self {
            n: net.n(),
            bits: net.adjacency().to_vec(),
        }
    }

    pub fn from_bits(n: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != n * n {
            return Err(Error::Dimension(format!(
                "genome length {} != {}^2",
                bits.len(),
                n
            )));
        }
        for i in 0..n {
            if bits[i * n + i] != 0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
        }
        Ok(Self { n, bits })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.n + j]
    }

    /// Flips position `(i, j)`; the diagonal is left untouched.
    pub fn flip(&mut self, i: usize, j: usize) {
        if i != j {
            self.bits[i * self.n + j] ^= 1;
        }
    }

    pub(crate) fn set_raw(&mut self, pos: usize, value: u8) {
        debug_assert!(pos / self.n != pos % self.n || value == 0);
        self.bits[pos] = value;
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Symmetrizes by logical OR into an adjacency matrix.
    pub fn symmetrize_or(&self) -> Vec<u8> {
        let n = self.n;
        let mut adj = vec![0u8; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let a = self.bits[i * n + j] | self.bits[j * n + i];
                adj[i * n + j] = a;
                adj[j * n + i] = a;
            }
        }
        adj
    }
}

/// Reconstruction objectives `(h, g)`: summed per-node squared residual
/// and the number of set bits.
pub fn nr_objectives(problem: &NrProblem, genome: &NrGenome) -> ObjectiveVector {
    assert_eq!(genome.n(), problem.n(), "genome/problem size mismatch");
    let n = problem.n();
    let rows = problem.rows();
    let mut h = 0.0;
    let mut ones_idx: Vec<usize> = Vec::with_capacity(16);
    for i in 0..n {
        ones_idx.clear();
        let row = &genome.bits()[i * n..(i + 1) * n];
        ones_idx.extend(row.iter().enumerate().filter(|(_, &b)| b != 0).map(|(j, _)| j));
        let u = problem.design(i);
        let y = problem.target(i);
        for r in 0..rows {
            let base = r * n;
            let mut acc = 0.0;
            for &j in &ones_idx {
                acc += u[base + j];
            }
            let d = acc - y[r];
            h += d * d;
        }
    }
    vec![h, genome.ones() as f64]
}

/// Modularity Q of a partition over a symmetric binary adjacency matrix.
///
/// `Q = Σ_s [l_s/e − (d_s/2e)²]`; defined as 0 when the graph has no edges.
pub fn modularity(adjacency: &[u8], n: usize, partition: &CommunityPartition) -> f64 {
    assert_eq!(partition.len(), n, "partition length mismatch");
    assert_eq!(adjacency.len(), n * n, "adjacency shape mismatch");
    let labels = partition.compact();
    let s = labels.iter().max().map_or(0, |m| m + 1);
    let mut intra = vec![0usize; s]; // l_s
    let mut degree_sum = vec![0usize; s]; // d_s
    let mut edges2 = 0usize;
    for i in 0..n {
        let row = &adjacency[i * n..(i + 1) * n];
        let deg: usize = row.iter().map(|&a| a as usize).sum();
        degree_sum[labels[i]] += deg;
        edges2 += deg;
        for j in (i + 1)..n {
            if row[j] != 0 && labels[i] == labels[j] {
                intra[labels[i]] += 1;
            }
        }
    }
    if edges2 == 0 {
        return 0.0;
    }
    let e = edges2 as f64 / 2.0;
    (0..s)
        .map(|c| intra[c] as f64 / e - (degree_sum[c] as f64 / (2.0 * e)).powi(2))
        .sum()
}

/// Normalized mutual information between two partitions, in `[0, 1]`.
pub fn nmi(b1: &CommunityPartition, b2: &CommunityPartition) -> Result<f64> {
    if b1.len() != b2.len() {
        return Err(Error::Dimension(format!(
            "partition lengths {} != {}",
            b1.len(),
            b2.len()
        )));
    }
    let n = b1.len();
    if n == 0 {
        return Err(Error::Dimension("empty partitions".into()));
    }
    let l1 = b1.compact();
    let l2 = b2.compact();
    let s1 = l1.iter().max().unwrap() + 1;
    let s2 = l2.iter().max().unwrap() + 1;
    if s1 == 1 && s2 == 1 {
        return Ok(1.0);
    }
    let mut confusion = vec![0usize; s1 * s2];
    for k in 0..n {
        confusion[l1[k] * s2 + l2[k]] += 1;
    }
    let row_sum: Vec<usize> = (0..s1)
        .map(|i| confusion[i * s2..(i + 1) * s2].iter().sum())
        .collect();
    let col_sum: Vec<usize> = (0..s2)
        .map(|j| (0..s1).map(|i| confusion[i * s2 + j]).sum())
        .collect();
    let nf = n as f64;
    let mut numer = 0.0;
    for i in 0..s1 {
        for j in 0..s2 {
            let a = confusion[i * s2 + j];
            if a > 0 {
                numer -= 2.0
                    * a as f64
                    * ((a as f64 * nf) / (row_sum[i] as f64 * col_sum[j] as f64)).ln();
            }
        }
    }
    let mut denom = 0.0;
    for &r in &row_sum {
        if r > 0 {
            denom += r as f64 * (r as f64 / nf).ln();
        }
    }
    for &c in &col_sum {
        if c > 0 {
            denom += c as f64 * (c as f64 / nf).ln();
        }
    }
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((numer / denom).clamp(0.0, 1.0))
}

/// Matthews correlation coefficient of the predicted structure against the
/// truth adjacency, over all ordered off-diagonal entries.
pub fn mcc(pred: &NrGenome, truth: &Network) -> f64 {
    assert_eq!(pred.n(), truth.n(), "size mismatch");
    let n = truth.n();
    let (mut tp, mut tn, mut fp, mut fneg) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            match (pred.get(i, j) != 0, truth.adjacency()[i * n + j] != 0) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => tn += 1,
            }
        }
    }
    let (tp, tn, fp, fneg) = (tp as f64, tn as f64, fp as f64, fneg as f64);
    let factors = [tp + fp, tp + fneg, tn + fp, tn + fneg];
    if factors.iter().any(|&f| f == 0.0) {
        return 0.0;
    }
    (tp * tn - fp * fneg) / factors.iter().map(|&f| f.sqrt()).product::<f64>()
}

/// Pareto dominance for minimization: `a` dominates `b` iff `a <= b`
/// componentwise and `a < b` somewhere. Panics on mixed lengths.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    assert_eq!(a.len(), b.len(), "objective dimension mismatch");
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Checked variant of [`dominates`].
pub fn try_dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "objective lengths {} != {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::zachary_karate;

    /// Pairwise-form modularity, an independent route to the same score:
    /// `Q = (1/2e) Σ_ij (A_ij − d_i d_j / 2e) δ(c_i, c_j)`.
    fn modularity_pairwise_oracle(adj: &[u8], n: usize, labels: &[usize]) -> f64 {
        let deg: Vec<f64> = (0..n)
            .map(|i| adj[i * n..(i + 1) * n].iter().map(|&a| a as f64).sum())
            .collect();
        let two_e: f64 = deg.iter().sum();
        if two_e == 0.0 {
            return 0.0;
        }
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    q += adj[i * n + j] as f64 - deg[i] * deg[j] / two_e;
                }
            }
        }
        q / two_e
    }

    /// Entropy-based NMI oracle working on probability tables.
    fn nmi_entropy_oracle(l1: &[usize], l2: &[usize]) -> f64 {
        let n = l1.len() as f64;
        let s1 = l1.iter().max().unwrap() + 1;
        let s2 = l2.iter().max().unwrap() + 1;
        let mut joint = vec![vec![0.0; s2]; s1];
        for (&a, &b) in l1.iter().zip(l2) {
            joint[a][b] += 1.0 / n;
        }
        let p1: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
        let p2: Vec<f64> = (0..s2).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
        let h = |p: &[f64]| -> f64 {
            -p.iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| x * x.ln())
                .sum::<f64>()
        };
        let mut mi = 0.0;
        for i in 0..s1 {
            for j in 0..s2 {
                if joint[i][j] > 0.0 {
                    mi += joint[i][j] * (joint[i][j] / (p1[i] * p2[j])).ln();
                }
            }
        }
        let denom = h(&p1) + h(&p2);
        if denom == 0.0 {
            return 1.0;
        }
        2.0 * mi / denom
    }

    fn two_triangles() -> Network {
        Network::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    #[test]
    fn modularity_single_community_is_zero() {
        let net = two_triangles();
        let p = CommunityPartition::new(vec![0; 6]);
        assert_eq!(modularity(net.adjacency(), 6, &p), 0.0);
    }

    #[test]
    fn modularity_two_triangles() {
        // 2 * (3/6 − (6/12)²) = 0.5
        let net = two_triangles();
        let p = CommunityPartition::new(vec![0, 0, 0, 1, 1, 1]);
        let q = modularity(net.adjacency(), 6, &p);
        assert!((q - 0.5).abs() < 1e-12, "q = {q}");
    }

    #[test]
    fn modularity_matches_pairwise_oracle_on_karate() {
        let net = zachary_karate();
        let truth = net.truth_partition.clone().unwrap();
        let q = modularity(net.adjacency(), net.n(), &truth);
        let oracle = modularity_pairwise_oracle(net.adjacency(), net.n(), &truth.labels);
        assert!((q - oracle).abs() < 1e-12, "q = {q}, oracle = {oracle}");
    }

    #[test]
    fn modularity_no_edges_is_zero() {
        let p = CommunityPartition::new(vec![0, 1, 2]);
        assert_eq!(modularity(&[0; 9], 3, &p), 0.0);
    }

    #[test]
    fn nmi_identical_partitions() {
        let a = CommunityPartition::new(vec![0, 0, 1, 1, 2]);
        let b = CommunityPartition::new(vec![7, 7, 3, 3, 9]); // same up to relabeling
        assert!((nmi(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_singletons_vs_single_community() {
        let a = CommunityPartition::new(vec![0, 1, 2, 3]);
        let b = CommunityPartition::new(vec![0, 0, 0, 0]);
        assert_eq!(nmi(&a, &b).unwrap(), 0.0);
        assert_eq!(nmi(&b, &a).unwrap(), 0.0);
    }

    #[test]
    fn nmi_matches_entropy_oracle() {
        let a = CommunityPartition::new(vec![0, 0, 1, 1]);
        let b = CommunityPartition::new(vec![0, 1, 1, 1]);
        let got = nmi(&a, &b).unwrap();
        let want = nmi_entropy_oracle(&a.labels, &b.labels);
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn nmi_length_mismatch_errors() {
        let a = CommunityPartition::new(vec![0, 1]);
        let b = CommunityPartition::new(vec![0, 1, 2]);
        assert!(matches!(nmi(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn mcc_perfect_and_inverted() {
        let net = two_triangles();
        let truth_genome = NrGenome::from_network(&net);
        assert!((mcc(&truth_genome, &net) - 1.0).abs() < 1e-12);

        let mut flipped = NrGenome::zeros(6);
        for i in 0..6 {
            for j in 0..6 {
                if i != j && !net.has_edge(i, j) {
                    flipped.flip(i, j);
                }
            }
        }
        assert!((mcc(&flipped, &net) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mcc_matches_hand_confusion_counts() {
        // Truth: path 0-1-2. Prediction adds the (0,2)/(2,0) pair:
        // TP = 4, FP = 2, FN = 0, TN = 0 -> denominator factor TN+FN = 0.
        let net = Network::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let mut pred = NrGenome::from_network(&net);
        pred.flip(0, 2);
        pred.flip(2, 0);
        assert_eq!(mcc(&pred, &net), 0.0);

        // Same prediction against a 4-node path keeps some true negatives:
        // TP = 6, FP = 2, FN = 0, TN = 4.
        let net4 = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut pred4 = NrGenome::from_network(&net4);
        pred4.flip(0, 2);
        pred4.flip(2, 0);
        let want = (6.0 * 4.0 - 2.0 * 0.0)
            / ((6.0f64 + 2.0).sqrt() * 6.0f64.sqrt() * (4.0f64 + 2.0).sqrt() * 4.0f64.sqrt());
        let got = mcc(&pred4, &net4);
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&[1.0, 1.0], &[2.0, 2.0]));
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]));
        assert!(!dominates(&[2.0, 1.0], &[1.0, 2.0]));
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]));
        assert!(matches!(
            try_dominates(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn genome_diagonal_is_pinned() {
        let mut g = NrGenome::zeros(4);
        g.flip(2, 2);
        assert_eq!(g.get(2, 2), 0);
        g.flip(1, 2);
        assert_eq!(g.get(1, 2), 1);
        assert_eq!(g.ones(), 1);
        assert!(NrGenome::from_bits(2, vec![1, 0, 0, 0]).is_err());
        assert!(NrGenome::from_bits(2, vec![0, 1]).is_err());
    }
}
