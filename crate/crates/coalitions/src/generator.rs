//! Benchmark graphs with planted overlapping communities.
//!
//! The pipeline draws power-law degrees and community sizes, marks a set of
//! bridge nodes that each belong to p communities (every other node to one),
//! fills the communities by random assignment with eviction on overflow, and
//! wires edges in two configuration-model passes: one per community for the
//! internal fraction of each member's degree, one over all nodes for the
//! leftover external stubs. The output graph is simple by construction.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Retry budget per generation stage.
const STAGE_BUDGET: u32 = 10_000;
/// Redraws before a conflicting stub pairing is discarded.
const PAIR_REDRAWS: u32 = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Node count.
    pub n: usize,
    /// Bridge node count.
    pub n_o: usize,
    /// Communities each bridge node belongs to.
    pub p: usize,
    /// Community count cap.
    pub n_c: usize,
    /// External edge fraction of non-bridge nodes, in [0,1].
    pub mu: f64,
    /// External edge fraction of bridge nodes, in [0,1].
    pub mu_o: f64,
    /// Degree power-law exponent.
    pub gamma: f64,
    /// Community-size power-law exponent.
    pub beta: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if self.n_o > self.n {
            return fail(format!("n_o = {} exceeds n = {}", self.n_o, self.n));
        }
        if self.p < 1 || self.n_c < 1 {
            return fail("p and n_c must be at least 1".into());
        }
        if self.p > self.n_c {
            return fail(format!(
                "a bridge node needs p = {} distinct communities but at most n_c = {} exist",
                self.p, self.n_c
            ));
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return fail(format!("degree bounds [{}, {}] invalid", self.k_min, self.k_max));
        }
        if self.s_min < 1 || self.s_min > self.s_max {
            return fail(format!("size bounds [{}, {}] invalid", self.s_min, self.s_max));
        }
        for (name, v) in [("mu", self.mu), ("mu_o", self.mu_o)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{} = {} outside [0, 1]", name, v));
            }
        }
        // a bridge node splits its degree over p communities, so its
        // internal fraction per community cannot exceed 1/p
        if self.p >= 2 && self.n_o > 0 {
            let floor = 1.0 - 1.0 / self.p as f64;
            if self.mu_o < floor - 1e-12 {
                return fail(format!(
                    "mu_o = {} below the feasibility floor 1 - 1/p = {}",
                    self.mu_o, floor
                ));
            }
        }
        Ok(())
    }

    /// Total memberships to hand out: one per node plus p-1 extra per bridge.
    fn membership_total(&self) -> usize {
        self.n + (self.p - 1) * self.n_o
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Planted communities, each sorted; sizes sum to n + (p-1)*n_o.
    pub communities: Vec<Vec<NodeId>>,
    /// Sorted bridge node ids, exactly n_o of them.
    pub bridge_nodes: Vec<NodeId>,
}

impl GroundTruth {
    pub fn is_bridge(&self, i: NodeId) -> bool {
        self.bridge_nodes.binary_search(&i).is_ok()
    }
}

/// Discrete power law on lo..=hi with P(x) proportional to x^(-exponent),
/// sampled by inverse CDF.
pub(crate) struct PowerLaw {
    lo: usize,
    cumulative: Vec<f64>,
}

impl PowerLaw {
    pub(crate) fn new(lo: usize, hi: usize, exponent: f64) -> Result<PowerLaw> {
        if lo < 1 || lo > hi {
            return Err(Error::Domain(format!("power-law support [{}, {}] invalid", lo, hi)));
        }
        let mut cumulative = Vec::with_capacity(hi - lo + 1);
        let mut total = 0.0;
        for x in lo..=hi {
            total += (x as f64).powf(-exponent);
            cumulative.push(total);
        }
        Ok(PowerLaw { lo, cumulative })
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty support");
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.lo + idx.min(self.cumulative.len() - 1)
    }
}

pub fn sample_power_law(lo: usize, hi: usize, exponent: f64, rng: &mut impl Rng) -> Result<usize> {
    Ok(PowerLaw::new(lo, hi, exponent)?.sample(rng))
}

fn draw_degrees(cfg: &GeneratorConfig, rng: &mut StdRng) -> Result<Vec<usize>> {
    let dist = PowerLaw::new(cfg.k_min, cfg.k_max, cfg.gamma)?;
    for _ in 0..STAGE_BUDGET {
        let degrees: Vec<usize> = (0..cfg.n).map(|_| dist.sample(rng)).collect();
        if degrees.iter().sum::<usize>() % 2 == 0 {
            return Ok(degrees);
        }
    }
    Err(Error::Unsatisfiable { stage: "degree sequence", attempts: STAGE_BUDGET })
}

/// Community sizes summing exactly to the membership total. A draw that
/// overshoots is truncated to the remainder; the whole selection restarts
/// when the remainder falls below s_min or the community cap is hit.
fn draw_sizes(cfg: &GeneratorConfig, rng: &mut StdRng) -> Result<Vec<usize>> {
    let target = cfg.membership_total();
    let dist = PowerLaw::new(cfg.s_min, cfg.s_max, cfg.beta)?;
    let mut restarts = 0u32;
    'attempt: loop {
        let mut sizes = Vec::new();
        let mut sum = 0usize;
        while sum < target {
            if target - sum < cfg.s_min || sizes.len() >= cfg.n_c {
                restarts += 1;
                if restarts >= STAGE_BUDGET {
                    return Err(Error::Unsatisfiable {
                        stage: "community sizes",
                        attempts: restarts,
                    });
                }
                continue 'attempt;
            }
            let mut s = dist.sample(rng);
            if sum + s > target {
                s = target - sum;
            }
            sum += s;
            sizes.push(s);
        }
        return Ok(sizes);
    }
}

/// Candidate pool with O(1) uniform pick, remove, and re-insert.
struct CandidateSet {
    items: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl CandidateSet {
    fn full(n: usize) -> CandidateSet {
        CandidateSet { items: (0..n).collect(), pos: (0..n).map(Some).collect() }
    }

    fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn pick(&self, rng: &mut StdRng) -> usize {
        self.items[rng.gen_range(0..self.items.len())]
    }

    fn remove(&mut self, node: usize) {
        if let Some(at) = self.pos[node].take() {
            self.items.swap_remove(at);
            if at < self.items.len() {
                self.pos[self.items[at]] = Some(at);
            }
        }
    }

    fn insert(&mut self, node: usize) {
        if self.pos[node].is_none() {
            self.pos[node] = Some(self.items.len());
            self.items.push(node);
        }
    }
}

/// Fills communities to their exact target sizes. Each step drops a random
/// unplaced node into a random community; joining a full community evicts a
/// uniformly chosen member back into the pool. Ends when every node has its
/// membership quota.
fn assign_communities(
    cfg: &GeneratorConfig,
    sizes: &[usize],
    bridge: &[bool],
    rng: &mut StdRng,
) -> Result<Vec<Vec<NodeId>>> {
    let n = cfg.n;
    let n_com = sizes.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_com];
    let mut is_member: Vec<Vec<bool>> = vec![vec![false; n]; n_com];
    let mut count: Vec<usize> = vec![0; n];
    let quota: Vec<usize> = (0..n).map(|i| if bridge[i] { cfg.p } else { 1 }).collect();
    let mut pool = CandidateSet::full(n);
    let budget = (STAGE_BUDGET as u64).saturating_mul(n as u64);
    let mut iterations = 0u64;
    while !pool.is_empty() {
        iterations += 1;
        if iterations > budget {
            return Err(Error::Unsatisfiable {
                stage: "community assignment",
                attempts: STAGE_BUDGET,
            });
        }
        let i = pool.pick(rng);
        let k = rng.gen_range(0..n_com);
        if is_member[k][i] {
            continue;
        }
        members[k].push(i);
        is_member[k][i] = true;
        count[i] += 1;
        if count[i] == quota[i] {
            pool.remove(i);
        }
        if members[k].len() > sizes[k] {
            let at = rng.gen_range(0..members[k].len());
            let evicted = members[k].swap_remove(at);
            is_member[k][evicted] = false;
            count[evicted] -= 1;
            pool.insert(evicted);
        }
    }
    for (k, m) in members.iter_mut().enumerate() {
        debug_assert_eq!(m.len(), sizes[k]);
        m.sort_unstable();
    }
    Ok(members)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Picks the entry with the largest degree (ties to the smallest node id)
/// and removes one stub from it, so an odd stub total becomes even.
fn shed_one_stub(nodes: &[usize], degrees: &mut [usize]) {
    let mut best: Option<usize> = None;
    for (at, &d) in degrees.iter().enumerate() {
        if d == 0 {
            continue;
        }
        best = Some(match best {
            None => at,
            Some(b) => {
                if d > degrees[b] || (d == degrees[b] && nodes[at] < nodes[b]) {
                    at
                } else {
                    b
                }
            }
        });
    }
    if let Some(b) = best {
        degrees[b] -= 1;
    }
}

/// Configuration model over `nodes` with per-node stub counts. Pairs two
/// uniformly chosen stubs; a self-loop or an edge already present is redrawn
/// up to the redraw budget, then the offending pair is discarded outright.
fn configuration_model(
    rng: &mut StdRng,
    nodes: &[usize],
    degrees: &[usize],
    edges: &mut BTreeSet<(usize, usize)>,
) {
    let mut stubs: Vec<usize> = Vec::new();
    for (at, &d) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat(nodes[at]).take(d));
    }
    debug_assert_eq!(stubs.len() % 2, 0, "stub total must be even");
    while stubs.len() >= 2 {
        let mut attempts = 0u32;
        loop {
            let a = rng.gen_range(0..stubs.len());
            let mut b = rng.gen_range(0..stubs.len() - 1);
            if b >= a {
                b += 1;
            }
            let (u, v) = (stubs[a], stubs[b]);
            let key = (u.min(v), u.max(v));
            let ok = u != v && !edges.contains(&key);
            if ok || attempts >= PAIR_REDRAWS {
                let (hi, lo) = if a > b { (a, b) } else { (b, a) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                if ok {
                    edges.insert(key);
                }
                break;
            }
            attempts += 1;
        }
    }
}

fn wire_edges(
    cfg: &GeneratorConfig,
    degrees: &[usize],
    communities: &[Vec<NodeId>],
    bridge: &[bool],
    rng: &mut StdRng,
) -> Vec<(usize, usize)> {
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut internal_used = vec![0usize; cfg.n];
    for comm in communities {
        let cap = comm.len().saturating_sub(1);
        let mut internal: Vec<usize> = comm
            .iter()
            .map(|&i| {
                let keep = if bridge[i] { 1.0 - cfg.mu_o } else { 1.0 - cfg.mu };
                // rounding half-up over p communities can oversubscribe a
                // node's degree, so each community only gets what is left
                let budget = degrees[i] - internal_used[i];
                round_half_up(keep * degrees[i] as f64).min(cap).min(budget)
            })
            .collect();
        if internal.iter().sum::<usize>() % 2 == 1 {
            // the shed stub rejoins the node's external pool below
            shed_one_stub(comm, &mut internal);
        }
        for (at, &i) in comm.iter().enumerate() {
            internal_used[i] += internal[at];
        }
        configuration_model(rng, comm, &internal, &mut edges);
    }
    // every node consumes exactly its drawn degree: internal plus external;
    // the external total is even because the full sum and each community's
    // post-repair sum are
    let all: Vec<usize> = (0..cfg.n).collect();
    let external: Vec<usize> = (0..cfg.n).map(|i| degrees[i] - internal_used[i]).collect();
    debug_assert_eq!(external.iter().sum::<usize>() % 2, 0);
    configuration_model(rng, &all, &external, &mut edges);
    edges.into_iter().collect()
}

/// Runs the full pipeline for a config. Identical configs (seed included)
/// produce identical outputs.
pub fn generate(cfg: &GeneratorConfig) -> Result<(Graph, GroundTruth)> {
    cfg.validate()?;
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let degrees = draw_degrees(cfg, &mut rng)?;
    let sizes = draw_sizes(cfg, &mut rng)?;
    let mut bridge = vec![false; cfg.n];
    for at in rand::seq::index::sample(&mut rng, cfg.n, cfg.n_o) {
        bridge[at] = true;
    }
    let communities = assign_communities(cfg, &sizes, &bridge, &mut rng)?;
    let edges = wire_edges(cfg, &degrees, &communities, &bridge, &mut rng);
    let graph = Graph::from_edges(cfg.n, edges)?;
    let bridge_nodes: Vec<usize> = (0..cfg.n).filter(|&i| bridge[i]).collect();
    Ok((graph, GroundTruth { communities, bridge_nodes }))
}

/// Realized external-edge fractions, averaged per node class: non-bridge
/// first, bridge second. An edge is external when its endpoints share no
/// ground-truth community. Zero-degree nodes are skipped; an empty class
/// averages to NaN.
pub fn measure_mixing(g: &Graph, gt: &GroundTruth) -> (f64, f64) {
    let n = g.node_count();
    let mut comm_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, c) in gt.communities.iter().enumerate() {
        for &i in c {
            comm_of[i].push(k);
        }
    }
    let share = |i: usize, j: usize| comm_of[i].iter().any(|k| comm_of[j].contains(k));
    let mut sum = [0.0f64; 2];
    let mut cnt = [0usize; 2];
    for i in 0..n {
        let deg = g.degree(i);
        if deg == 0 {
            continue;
        }
        let ext = g.neighbours(i).iter().filter(|&&j| !share(i, j)).count();
        let class = gt.is_bridge(i) as usize;
        sum[class] += ext as f64 / deg as f64;
        cnt[class] += 1;
    }
    let avg = |c: usize| if cnt[c] == 0 { f64::NAN } else { sum[c] / cnt[c] as f64 };
    (avg(0), avg(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn base_config() -> GeneratorConfig {
        GeneratorConfig {
            n: 60,
            n_o: 6,
            p: 2,
            n_c: 8,
            mu: 0.1,
            mu_o: 0.5,
            gamma: 2.5,
            beta: 1.5,
            k_min: 4,
            k_max: 10,
            s_min: 8,
            s_max: 24,
            seed: 7,
        }
    }

    #[test]
    fn degenerate_support_is_constant() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(sample_power_law(5, 5, 2.0, &mut rng).unwrap(), 5);
        }
    }

    #[test]
    fn invalid_support_rejected() {
        let mut rng = StdRng::seed_from_u64(1);
        assert!(sample_power_law(0, 5, 2.0, &mut rng).is_err());
        assert!(sample_power_law(6, 5, 2.0, &mut rng).is_err());
    }

    #[test]
    fn zero_exponent_is_uniform() {
        let (lo, hi, draws) = (1usize, 10usize, 100_000usize);
        let dist = PowerLaw::new(lo, hi, 0.0).unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        let mut counts = vec![0usize; hi - lo + 1];
        for _ in 0..draws {
            counts[dist.sample(&mut rng) - lo] += 1;
        }
        let expected = draws as f64 / counts.len() as f64;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let critical =
            ChiSquared::new((counts.len() - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 = {} >= {}", chi2, critical);
    }

    #[test]
    fn frequency_ratio_tracks_exponent() {
        let (lo, hi, exponent) = (2usize, 8usize, 2.0f64);
        let dist = PowerLaw::new(lo, hi, exponent).unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        let mut counts = vec![0usize; hi - lo + 1];
        for _ in 0..1_000_000 {
            counts[dist.sample(&mut rng) - lo] += 1;
        }
        let ratio = counts[0] as f64 / counts[hi - lo] as f64;
        let want = (hi as f64 / lo as f64).powf(exponent);
        assert!((ratio - want).abs() / want < 0.1, "ratio {} vs {}", ratio, want);
    }

    #[test]
    fn config_validation() {
        let mut cfg = base_config();
        cfg.mu_o = 0.3;
        assert!(cfg.validate().is_err(), "p=2 needs mu_o >= 0.5");
        cfg = base_config();
        cfg.p = 9;
        assert!(cfg.validate().is_err(), "p must fit within n_c");
        cfg = base_config();
        cfg.k_min = 0;
        assert!(cfg.validate().is_err());
        assert!(base_config().validate().is_ok());
    }

    #[test]
    fn membership_quotas_and_size_total() {
        let cfg = base_config();
        let (_, gt) = generate(&cfg).unwrap();
        assert_eq!(gt.bridge_nodes.len(), cfg.n_o);
        let total: usize = gt.communities.iter().map(|c| c.len()).sum();
        assert_eq!(total, cfg.membership_total());
        let mut count = vec![0usize; cfg.n];
        for c in &gt.communities {
            assert!(c.len() >= cfg.s_min && c.len() <= cfg.s_max);
            for &i in c {
                count[i] += 1;
            }
        }
        for i in 0..cfg.n {
            let want = if gt.is_bridge(i) { cfg.p } else { 1 };
            assert_eq!(count[i], want, "node {} membership count", i);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = base_config();
        let (g1, t1) = generate(&cfg).unwrap();
        let (g2, t2) = generate(&cfg).unwrap();
        assert_eq!(g1.edges(), g2.edges());
        assert_eq!(t1.communities, t2.communities);
        assert_eq!(t1.bridge_nodes, t2.bridge_nodes);
        let other = GeneratorConfig { seed: 8, ..cfg };
        let (g3, _) = generate(&other).unwrap();
        assert_ne!(g1.edges(), g3.edges());
    }

    #[test]
    fn realized_degree_never_exceeds_drawn() {
        let cfg = base_config();
        let mut rng = StdRng::seed_from_u64(cfg.seed);
        let degrees = draw_degrees(&cfg, &mut rng).unwrap();
        let (g, _) = generate(&cfg).unwrap();
        for i in 0..cfg.n {
            assert!(g.degree(i) <= degrees[i], "node {}: {} > {}", i, g.degree(i), degrees[i]);
        }
    }

    #[test]
    fn low_mixing_config_yields_mostly_internal_edges() {
        let mut internal_fraction = 0.0;
        let seeds = 5;
        for seed in 0..seeds {
            let cfg = GeneratorConfig { mu: 0.0, seed, ..base_config() };
            let (g, gt) = generate(&cfg).unwrap();
            let (mu_hat, _) = measure_mixing(&g, &gt);
            internal_fraction += 1.0 - mu_hat;
        }
        internal_fraction /= seeds as f64;
        assert!(internal_fraction >= 0.9, "internal fraction {}", internal_fraction);
    }

    #[test]
    fn mixing_extremes() {
        // two communities, one bridge member in each, every edge internal
        let g = Graph::from_edges(4, vec![(0, 1), (2, 3)]).unwrap();
        let gt = GroundTruth {
            communities: vec![vec![0, 1], vec![1, 2, 3]],
            bridge_nodes: vec![1],
        };
        assert_eq!(measure_mixing(&g, &gt), (0.0, 0.0));
        // complete bipartite across two communities, no internal edges,
        // no bridge nodes: the bridge average has no support
        let g = Graph::from_edges(4, vec![(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let gt = GroundTruth {
            communities: vec![vec![0, 1], vec![2, 3]],
            bridge_nodes: vec![],
        };
        let (mu_hat, mu_o_hat) = measure_mixing(&g, &gt);
        assert_eq!(mu_hat, 1.0);
        assert!(mu_o_hat.is_nan());
    }

    #[test]
    fn impossible_parity_fails_with_stage_name() {
        // constant odd degree on an odd node count can never sum even
        let cfg = GeneratorConfig {
            n: 5,
            n_o: 0,
            p: 1,
            n_c: 2,
            k_min: 3,
            k_max: 3,
            s_min: 2,
            s_max: 5,
            ..base_config()
        };
        match generate(&cfg) {
            Err(Error::Unsatisfiable { stage, .. }) => assert_eq!(stage, "degree sequence"),
            other => panic!("expected parity failure, got {:?}", other.map(|_| ())),
        }
    }
}
