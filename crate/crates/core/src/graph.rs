//! Undirected binary networks, synthetic generators and edge-list loaders.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Disjoint community partition as a per-node label vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityPartition {
    pub labels: Vec<usize>,
}

impl CommunityPartition {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Relabels to compact ids `0..S` in order of first appearance.
    pub fn compact(&self) -> Vec<usize> {
        let mut map: Vec<Option<usize>> = Vec::new();
        let mut out = Vec::with_capacity(self.labels.len());
        let mut next = 0usize;
        for &l in &self.labels {
            if l >= map.len() {
                map.resize(l + 1, None);
            }
            let id = *map[l].get_or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
            out.push(id);
        }
        out
    }

    /// Number of distinct labels.
    pub fn num_communities(&self) -> usize {
        self.compact().iter().max().map_or(0, |m| m + 1)
    }

    /// Node sets sharing a label, ordered by first appearance.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let compact = self.compact();
        let s = compact.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); s];
        for (node, &c) in compact.iter().enumerate() {
            groups[c].push(node);
        }
        groups
    }
}

/// Undirected binary graph with a symmetric, zero-diagonal adjacency
/// matrix and an optional ground-truth partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    n: usize,
    adjacency: Vec<u8>,
    pub truth_partition: Option<CommunityPartition>,
}

impl Network {
    /// Edgeless network on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![0; n * n],
            truth_partition: None,
        }
    }

    /// Builds a network from undirected edges; self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut net = Self::empty(n);
        for &(u, v) in edges {
            if u == v {
                return Err(Error::Domain(format!("self-loop on node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::Domain(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            net.add_edge(u, v);
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &[u8] {
        &self.adjacency
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u * self.n + v] != 0
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        debug_assert!(u != v);
        self.adjacency[u * self.n + v] = 1;
        self.adjacency[v * self.n + u] = 1;
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) {
        self.adjacency[u * self.n + v] = 0;
        self.adjacency[v * self.n + u] = 0;
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u * self.n..(u + 1) * self.n]
            .iter()
            .map(|&a| a as usize)
            .sum()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[u * self.n..(u + 1) * self.n]
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(j, _)| j)
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        let total: usize = self.adjacency.iter().map(|&a| a as usize).sum();
        debug_assert_eq!(total % 2, 0);
        total / 2
    }

    /// Edges as `(u, v)` with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Counts of dropped input artifacts from [`load_edge_list`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadWarnings {
    pub self_loops_dropped: usize,
    pub duplicates_collapsed: usize,
}

/// Loads an edge list, plus an optional one-label-per-line truth file.
///
/// Lines starting with `#` are comments. An optional first data line with a
/// single integer declares the node count. Node ids may be 0- or 1-based;
/// the convention is detected from the minimum id seen.
pub fn load_edge_list(path: &Path, truth_path: Option<&Path>) -> Result<Network> {
    load_edge_list_detailed(path, truth_path).map(|(net, _)| net)
}

/// As [`load_edge_list`], also reporting dropped self-loops and duplicates.
pub fn load_edge_list_detailed(
    path: &Path,
    truth_path: Option<&Path>,
) -> Result<(Network, LoadWarnings)> {
    let text = fs::read_to_string(path)?;
    let mut declared_n: Option<usize> = None;
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new(); // (u, v, line)
    let mut saw_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [n] if !saw_data => {
                declared_n = Some(n.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid node count {n:?}"),
                })?);
                saw_data = true;
            }
            [u, v] => {
                let u: usize = u.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid node id {u:?}"),
                })?;
                let v: usize = v.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid node id {v:?}"),
                })?;
                pairs.push((u, v, line_no));
                saw_data = true;
            }
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected \"u v\", got {line:?}"),
                })
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "no edges".into(),
        });
    }

    // 1-based files are detected by their minimum id and shifted down.
    let min_id = pairs.iter().map(|&(u, v, _)| u.min(v)).min().unwrap();
    let offset = usize::from(min_id >= 1);
    let max_id = pairs.iter().map(|&(u, v, _)| u.max(v)).max().unwrap() - offset;
    let n = match declared_n {
        Some(n) => {
            if max_id >= n {
                let (u, v, line) = *pairs
                    .iter()
                    .find(|&&(u, v, _)| u.max(v) - offset >= n)
                    .unwrap();
                return Err(Error::Parse {
                    line,
                    msg: format!("edge ({u}, {v}) outside declared node count {n}"),
                });
            }
            n
        }
        None => max_id + 1,
    };

    let mut net = Network::empty(n);
    let mut warnings = LoadWarnings::default();
    for (u, v, _) in pairs {
        let (u, v) = (u - offset, v - offset);
        if u == v {
            warnings.self_loops_dropped += 1;
        } else if net.has_edge(u, v) {
            warnings.duplicates_collapsed += 1;
        } else {
            net.add_edge(u, v);
        }
    }

    if let Some(tp) = truth_path {
        net.truth_partition = Some(load_truth_labels(tp, n)?);
    }
    Ok((net, warnings))
}

/// Loads a truth file with exactly one integer label per node line.
pub fn load_truth_labels(path: &Path, n: usize) -> Result<CommunityPartition> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::with_capacity(n);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(line.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("invalid label {line:?}"),
        })?);
    }
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "truth file has {} labels for {} nodes",
            labels.len(),
            n
        )));
    }
    Ok(CommunityPartition::new(labels))
}

/// Erdős–Rényi G(n, p): each unordered pair linked independently.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Network> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::empty(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                net.add_edge(u, v);
            }
        }
    }
    Ok(net)
}

/// Barabási–Albert preferential attachment starting from an m-clique.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Network> {
    if m < 1 || m >= n {
        return Err(Error::Domain(format!(
            "attachment count {m} must satisfy 1 <= m < n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::empty(n);
    // One entry per edge endpoint; sampling from it is degree-proportional.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m * (m - 1) / 2 + m * (n - m)));
    for u in 0..m {
        for v in (u + 1)..m {
            net.add_edge(u, v);
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    for v in m..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.random_range(0..v)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            net.add_edge(v, t);
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    Ok(net)
}

fn ring_lattice(n: usize, k: usize) -> Result<Network> {
    if k % 2 != 0 {
        return Err(Error::Domain(format!("ring degree {k} must be even")));
    }
    if k >= n {
        return Err(Error::Domain(format!("ring degree {k} must be < n = {n}")));
    }
    let mut net = Network::empty(n);
    for u in 0..n {
        for off in 1..=(k / 2) {
            net.add_edge(u, (u + off) % n);
        }
    }
    Ok(net)
}

/// Watts–Strogatz: ring lattice with each edge rewired with probability
/// `p_rewire`, avoiding self-loops and duplicates. Edge count stays `nk/2`.
pub fn generate_ws(n: usize, k: usize, p_rewire: f64, seed: u64) -> Result<Network> {
    if !(0.0..=1.0).contains(&p_rewire) {
        return Err(Error::Domain(format!(
            "rewire probability {p_rewire} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = ring_lattice(n, k)?;
    for u in 0..n {
        for off in 1..=(k / 2) {
            let v = (u + off) % n;
            if rng.random::<f64>() >= p_rewire {
                continue;
            }
            if net.degree(u) == n - 1 {
                continue; // no free slot to rewire into
            }
            let mut t = rng.random_range(0..n);
            while t == u || net.has_edge(u, t) {
                t = rng.random_range(0..n);
            }
            net.remove_edge(u, v);
            net.add_edge(u, t);
        }
    }
    Ok(net)
}

/// Newman–Watts: ring lattice plus each non-lattice pair added as a
/// shortcut with probability `p_add`; no edges are removed.
pub fn generate_nw(n: usize, k: usize, p_add: f64, seed: u64) -> Result<Network> {
    if !(0.0..=1.0).contains(&p_add) {
        return Err(Error::Domain(format!(
            "shortcut probability {p_add} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = ring_lattice(n, k)?;
    for u in 0..n {
        for v in (u + 1)..n {
            if net.has_edge(u, v) {
                continue;
            }
            if rng.random::<f64>() < p_add {
                net.add_edge(u, v);
            }
        }
    }
    Ok(net)
}

/// Zachary's karate club: 34 nodes, 78 edges, two factions.
pub fn zachary_karate() -> Network {
    // 1-based pairs as usually distributed.
    const EDGES: [(usize, usize); 78] = [
        (2, 1),
        (3, 1),
        (3, 2),
        (4, 1),
        (4, 2),
        (4, 3),
        (5, 1),
        (6, 1),
        (7, 1),
        (7, 5),
        (7, 6),
        (8, 1),
        (8, 2),
        (8, 3),
        (8, 4),
        (9, 1),
        (9, 3),
        (10, 3),
        (11, 1),
        (11, 5),
        (11, 6),
        (12, 1),
        (13, 1),
        (13, 4),
        (14, 1),
        (14, 2),
        (14, 3),
        (14, 4),
        (17, 6),
        (17, 7),
        (18, 1),
        (18, 2),
        (20, 1),
        (20, 2),
        (22, 1),
        (22, 2),
        (26, 24),
        (26, 25),
        (28, 3),
        (28, 24),
        (28, 25),
        (29, 3),
        (30, 24),
        (30, 27),
        (31, 2),
        (31, 9),
        (32, 1),
        (32, 25),
        (32, 26),
        (32, 29),
        (33, 3),
        (33, 9),
        (33, 15),
        (33, 16),
        (33, 19),
        (33, 21),
        (33, 23),
        (33, 24),
        (33, 30),
        (33, 31),
        (33, 32),
        (34, 9),
        (34, 10),
        (34, 14),
        (34, 15),
        (34, 16),
        (34, 19),
        (34, 20),
        (34, 21),
        (34, 23),
        (34, 24),
        (34, 27),
        (34, 28),
        (34, 29),
        (34, 30),
        (34, 31),
        (34, 32),
        (34, 33),
    ];
    // Club membership after the split (0-based ids of the second faction).
    const OFFICERS: [usize; 17] = [
        9, 14, 15, 18, 20, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33,
    ];
    let edges: Vec<(usize, usize)> = EDGES.iter().map(|&(u, v)| (u - 1, v - 1)).collect();
    let mut net = Network::from_edges(34, &edges).expect("static edge list is valid");
    let mut labels = vec![0usize; 34];
    for &i in &OFFICERS {
        labels[i] = 1;
    }
    net.truth_partition = Some(CommunityPartition::new(labels));
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn assert_symmetric_zero_diag(net: &Network) {
        let n = net.n();
        for i in 0..n {
            assert_eq!(net.adjacency()[i * n + i], 0, "diagonal at {i}");
            for j in 0..n {
                assert_eq!(
                    net.adjacency()[i * n + j],
                    net.adjacency()[j * n + i],
                    "asymmetry at ({i}, {j})"
                );
            }
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn karate_club_shape() {
        let net = zachary_karate();
        assert_eq!(net.n(), 34);
        assert_eq!(net.edge_count(), 78);
        assert_symmetric_zero_diag(&net);
        let truth = net.truth_partition.as_ref().unwrap();
        assert_eq!(truth.num_communities(), 2);
    }

    #[test]
    fn load_edge_list_roundtrip() {
        let f = write_temp("# comment\n1 2\n2 3\n3 1\n");
        let (net, warn) = load_edge_list_detailed(f.path(), None).unwrap();
        assert_eq!(net.n(), 3);
        assert_eq!(net.edge_count(), 3);
        assert_eq!(warn, LoadWarnings::default());
        assert_symmetric_zero_diag(&net);
    }

    #[test]
    fn load_edge_list_zero_based_with_header() {
        let f = write_temp("4\n0 1\n1 2\n");
        let net = load_edge_list(f.path(), None).unwrap();
        assert_eq!(net.n(), 4);
        assert_eq!(net.edge_count(), 2);
    }

    #[test]
    fn load_edge_list_range_error_with_header() {
        let f = write_temp("3\n0 1\n1 5\n");
        let err = load_edge_list(f.path(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn load_edge_list_empty_is_error() {
        let f = write_temp("# nothing here\n");
        let err = load_edge_list(f.path(), None).unwrap_err();
        assert!(err.to_string().contains("no edges"), "{err}");
    }

    #[test]
    fn load_edge_list_self_loop_only() {
        let f = write_temp("1 1\n");
        let (net, warn) = load_edge_list_detailed(f.path(), None).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert_eq!(warn.self_loops_dropped, 1);
    }

    #[test]
    fn load_edge_list_collapses_duplicates() {
        let f = write_temp("1 2\n2 1\n1 2\n");
        let (net, warn) = load_edge_list_detailed(f.path(), None).unwrap();
        assert_eq!(net.edge_count(), 1);
        assert_eq!(warn.duplicates_collapsed, 2);
    }

    #[test]
    fn load_edge_list_malformed_line() {
        let f = write_temp("1 2\noops\n");
        let err = load_edge_list(f.path(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn load_truth_labels_mismatch() {
        let edges = write_temp("1 2\n2 3\n");
        let truth = write_temp("0\n1\n");
        let err = load_edge_list(edges.path(), Some(truth.path())).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
    }

    #[test]
    fn er_extremes() {
        let net = generate_er(10, 0.0, 7).unwrap();
        assert_eq!(net.edge_count(), 0);
        let net = generate_er(10, 1.0, 7).unwrap();
        assert_eq!(net.edge_count(), 45);
        assert_symmetric_zero_diag(&net);
        assert!(generate_er(10, 1.5, 7).is_err());
        assert!(generate_er(1, 0.5, 7).is_err());
    }

    #[test]
    fn er_mean_degree_monte_carlo() {
        // Monte-Carlo estimate of the binomial mean degree (n-1)p = 6.
        let n = 50;
        let p = 6.0 / 49.0;
        let mut total_degree = 0usize;
        let seeds = 10_000u64;
        for seed in 0..seeds {
            total_degree += 2 * generate_er(n, p, seed).unwrap().edge_count();
        }
        let mean_degree = total_degree as f64 / (seeds as f64 * n as f64);
        assert!(
            (mean_degree - 6.0).abs() < 0.1,
            "mean degree {mean_degree}"
        );
    }

    #[test]
    fn ba_edge_count() {
        let net = generate_ba(50, 3, 11).unwrap();
        assert_eq!(net.edge_count(), 3 + 3 * 47);
        assert_symmetric_zero_diag(&net);
    }

    #[test]
    fn ba_tree_case() {
        let net = generate_ba(20, 1, 5).unwrap();
        assert_eq!(net.edge_count(), 19);
        assert!(generate_ba(5, 5, 0).is_err());
    }

    #[test]
    fn ba_deterministic() {
        let a = generate_ba(30, 3, 42).unwrap();
        let b = generate_ba(30, 3, 42).unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
    }

    #[test]
    fn ws_ring_lattice() {
        let net = generate_ws(50, 6, 0.0, 3).unwrap();
        assert_eq!(net.edge_count(), 150);
        for u in 0..50 {
            assert_eq!(net.degree(u), 6);
        }
        assert!(generate_ws(50, 5, 0.1, 3).is_err());
    }

    #[test]
    fn ws_preserves_edge_count_and_determinism() {
        let a = generate_ws(50, 6, 1.0, 9).unwrap();
        let b = generate_ws(50, 6, 1.0, 9).unwrap();
        assert_eq!(a.edge_count(), 150);
        assert_eq!(a.adjacency(), b.adjacency());
        assert_symmetric_zero_diag(&a);
    }

    #[test]
    fn nw_matches_ws_without_randomness() {
        let ws = generate_ws(40, 4, 0.0, 1).unwrap();
        let nw = generate_nw(40, 4, 0.0, 2).unwrap();
        assert_eq!(ws.adjacency(), nw.adjacency());
    }

    #[test]
    fn nw_degrees_at_least_k() {
        let net = generate_nw(50, 4, 0.1, 21).unwrap();
        for u in 0..50 {
            assert!(net.degree(u) >= 4);
        }
        assert_symmetric_zero_diag(&net);
    }

    #[test]
    fn nw_mean_degree_near_six() {
        // k + (n-1-k) * p_add = 4 + 2 = 6 in expectation.
        let n = 50;
        let k = 4;
        let p_add = 2.0 / (n as f64 - 1.0 - k as f64);
        let seeds = 2000u64;
        let mut total_degree = 0usize;
        for seed in 0..seeds {
            total_degree += 2 * generate_nw(n, k, p_add, seed).unwrap().edge_count();
        }
        let mean_degree = total_degree as f64 / (seeds as f64 * n as f64);
        assert!(
            (mean_degree - 6.0).abs() < 0.1,
            "mean degree {mean_degree}"
        );
    }

    #[test]
    fn partition_helpers() {
        let p = CommunityPartition::new(vec![5, 5, 9, 5, 9]);
        assert_eq!(p.compact(), vec![0, 0, 1, 0, 1]);
        assert_eq!(p.num_communities(), 2);
        assert_eq!(p.communities(), vec![vec![0, 1, 3], vec![2, 4]]);
    }
}
