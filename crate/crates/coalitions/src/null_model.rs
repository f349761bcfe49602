//! Configuration-model probabilities and the matching-enumeration oracle.
//!
//! The configuration model cuts every edge of the empirical graph into two
//! stubs and pairs the 2m labelled stubs uniformly at random. The three
//! probability functions give, for nodes of fixed empirical degree, the
//! chance that a random pairing realizes adjacency, a shared neighbour, or a
//! triangle. Each is an inclusion-exclusion alternating sum whose terms are
//! evaluated by multiplicative recurrence and accumulated with compensated
//! summation. The enumeration oracle walks every perfect matching (m ≤ 6)
//! and returns exact rational probabilities for the same events.

use std::collections::HashMap;
use std::sync::RwLock;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};

use crate::error::{Error, Result};

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum
    }
}

/// Shared memo tables for one empirical edge count `m`.
///
/// The recursions re-enter with reduced edge counts, so keys carry the edge
/// count alongside the degrees. Degree pairs are canonicalized: every
/// function is symmetric in (k_i, k_j).
#[derive(Debug)]
pub struct NullModelContext {
    m: usize,
    adj: RwLock<HashMap<(u32, u32, u32), f64>>,
    common: RwLock<HashMap<(u32, u32, u32, u32), f64>>,
    triangle: RwLock<HashMap<(u32, u32, u32, u32), f64>>,
}

impl NullModelContext {
    pub fn new(m: usize) -> NullModelContext {
        NullModelContext {
            m,
            adj: RwLock::new(HashMap::new()),
            common: RwLock::new(HashMap::new()),
            triangle: RwLock::new(HashMap::new()),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    /// Probability that i and j are adjacent in a random stub pairing.
    pub fn p_adjacency(&self, k_i: usize, k_j: usize) -> Result<f64> {
        check_args(&[k_i, k_j], self.m)?;
        Ok(self.adj_rec(k_i as u32, k_j as u32, self.m as u32))
    }

    /// Probability that some fixed r is adjacent to both i and j.
    pub fn p_common_neighbour(&self, k_i: usize, k_j: usize, k_r: usize) -> Result<f64> {
        check_args(&[k_i, k_j, k_r], self.m)?;
        Ok(self.common_rec(k_i as u32, k_j as u32, k_r as u32, self.m as u32))
    }

    /// Probability that i, j, r form a triangle.
    pub fn p_triangle(&self, k_i: usize, k_j: usize, k_r: usize) -> Result<f64> {
        check_args(&[k_i, k_j, k_r], self.m)?;
        Ok(self.triangle_rec(k_i as u32, k_j as u32, k_r as u32, self.m as u32))
    }

    fn adj_rec(&self, k_i: u32, k_j: u32, m: u32) -> f64 {
        let (a, b) = (k_i.min(k_j), k_i.max(k_j));
        if a == 0 || m == 0 {
            return 0.0;
        }
        let key = (a, b, m);
        if let Some(&v) = self.adj.read().unwrap().get(&key) {
            return v;
        }
        // term_1 = k_i k_j / (2m-1); term ratio (k_i-t)(k_j-t) / ((t+1)(2m-1-2t))
        let mut acc = KahanSum::default();
        let mut term = f64::from(a) * f64::from(b) / f64::from(2 * m - 1);
        let mut sign = 1.0;
        let mut t = 1;
        loop {
            acc.add(sign * term);
            if t >= a {
                break;
            }
            term *= f64::from(a - t) * f64::from(b - t)
                / (f64::from(t + 1) * f64::from(2 * m - 1 - 2 * t));
            sign = -sign;
            t += 1;
        }
        let v = acc.total();
        self.adj.write().unwrap().insert(key, v);
        v
    }

    fn common_rec(&self, k_i: u32, k_j: u32, k_r: u32, m: u32) -> f64 {
        let (a, b) = (k_i.min(k_j), k_i.max(k_j));
        if a == 0 || k_r < 1 || m == 0 {
            return 0.0;
        }
        let key = (a, b, k_r, m);
        if let Some(&v) = self.common.read().unwrap().get(&key) {
            return v;
        }
        // Alternating sum over t of C(k_r,t) C(k_j,t) t! / prod_{q=1..t}(2m+1-2q)
        // times the adjacency probability of (k_i, k_r - t) with m - t edges.
        // The (k_i, k_j) orientation is canonicalized to (b, a): the event is
        // symmetric, so both orientations agree.
        let (ki, kj) = (b, a);
        let hi = kj.min(k_r.saturating_sub(1));
        let mut acc = KahanSum::default();
        let mut factor = f64::from(k_r) * f64::from(kj) / f64::from(2 * m - 1);
        let mut sign = 1.0;
        let mut t = 1;
        while t <= hi {
            acc.add(sign * factor * self.adj_rec(ki, k_r - t, m - t));
            if t + 1 > hi {
                break;
            }
            factor *= f64::from(k_r - t) * f64::from(kj - t)
                / (f64::from(t + 1) * f64::from(2 * m - 1 - 2 * t));
            sign = -sign;
            t += 1;
        }
        let v = acc.total();
        self.common.write().unwrap().insert(key, v);
        v
    }

    fn triangle_rec(&self, k_i: u32, k_j: u32, k_r: u32, m: u32) -> f64 {
        let (a, b) = (k_i.min(k_j), k_i.max(k_j));
        if a < 2 || k_r < 1 || m == 0 {
            // min(k_i-1, k_j-1) < 1: empty sum
            return 0.0;
        }
        let key = (a, b, k_r, m);
        if let Some(&v) = self.triangle.read().unwrap().get(&key) {
            return v;
        }
        let (ki, kj) = (a, b);
        let hi = (ki - 1).min(kj - 1);
        let mut acc = KahanSum::default();
        let mut factor = f64::from(ki) * f64::from(kj) / f64::from(2 * m - 1);
        let mut sign = 1.0;
        let mut t = 1;
        while t <= hi {
            acc.add(sign * factor * self.common_rec(ki - t, kj - t, k_r, m - t));
            if t + 1 > hi {
                break;
            }
            factor *= f64::from(ki - t) * f64::from(kj - t)
                / (f64::from(t + 1) * f64::from(2 * m - 1 - 2 * t));
            sign = -sign;
            t += 1;
        }
        let v = acc.total();
        self.triangle.write().unwrap().insert(key, v);
        v
    }
}

fn check_args(degrees: &[usize], m: usize) -> Result<()> {
    if m < 1 {
        return Err(Error::Domain("edge count m must be at least 1".into()));
    }
    let total: usize = degrees.iter().sum();
    if total > 2 * m {
        return Err(Error::Domain(format!(
            "degrees sum to {} which exceeds the {} stubs of m={} edges",
            total,
            2 * m,
            m
        )));
    }
    Ok(())
}

/// Free-function forms with an explicit edge count (no shared memo).
pub fn p_adjacency(k_i: usize, k_j: usize, m: usize) -> Result<f64> {
    NullModelContext::new(m).p_adjacency(k_i, k_j)
}

pub fn p_common_neighbour(k_i: usize, k_j: usize, k_r: usize, m: usize) -> Result<f64> {
    NullModelContext::new(m).p_common_neighbour(k_i, k_j, k_r)
}

pub fn p_triangle(k_i: usize, k_j: usize, k_r: usize, m: usize) -> Result<f64> {
    NullModelContext::new(m).p_triangle(k_i, k_j, k_r)
}

/// Exact-rational evaluation of the same sums, for validating the floating
/// point path. Degrees above 64 are refused: the factorial products grow
/// past any sensible validation size.
pub mod rational {
    use super::*;

    const MAX_DEGREE: usize = 64;

    fn guard(degrees: &[usize], m: usize) -> Result<()> {
        check_args(degrees, m)?;
        if let Some(&d) = degrees.iter().max() {
            if d > MAX_DEGREE {
                return Err(Error::Domain(format!(
                    "rational validation mode supports max degree {} (got {})",
                    MAX_DEGREE, d
                )));
            }
        }
        Ok(())
    }

    fn binomial(n: u64, k: u64) -> BigInt {
        if k > n {
            return BigInt::zero();
        }
        let mut v = BigInt::one();
        for t in 0..k {
            v = v * BigInt::from(n - t) / BigInt::from(t + 1);
        }
        v
    }

    /// C(a,t) C(b,t) t! / prod_{q=1..t}(2m+1-2q) with sign (-1)^(t+1).
    fn term(a: u64, b: u64, t: u64, m: u64) -> BigRational {
        let mut num = binomial(a, t) * binomial(b, t);
        for q in 1..=t {
            num *= BigInt::from(q);
        }
        let mut den = BigInt::one();
        for q in 1..=t {
            den *= BigInt::from(2 * m + 1 - 2 * q);
        }
        let v = BigRational::new(num, den);
        if t % 2 == 1 {
            v
        } else {
            -v
        }
    }

    fn adj(k_i: u64, k_j: u64, m: u64) -> BigRational {
        if k_i.min(k_j) == 0 || m == 0 {
            return BigRational::zero();
        }
        (1..=k_i.min(k_j)).map(|t| term(k_i, k_j, t, m)).sum()
    }

    fn common(k_i: u64, k_j: u64, k_r: u64, m: u64) -> BigRational {
        if k_i == 0 || k_r == 0 || m == 0 {
            return BigRational::zero();
        }
        let hi = k_j.min(k_r - 1);
        (1..=hi)
            .map(|t| term(k_r, k_j, t, m) * adj(k_i, k_r - t, m - t))
            .sum()
    }

    fn triangle(k_i: u64, k_j: u64, k_r: u64, m: u64) -> BigRational {
        if k_i == 0 || k_j == 0 || m == 0 {
            return BigRational::zero();
        }
        let hi = (k_i - 1).min(k_j - 1);
        (1..=hi)
            .map(|t| term(k_i, k_j, t, m) * common(k_i - t, k_j - t, k_r, m - t))
            .sum()
    }

    pub fn p_adjacency(k_i: usize, k_j: usize, m: usize) -> Result<BigRational> {
        guard(&[k_i, k_j], m)?;
        Ok(adj(k_i as u64, k_j as u64, m as u64))
    }

    pub fn p_common_neighbour(k_i: usize, k_j: usize, k_r: usize, m: usize) -> Result<BigRational> {
        guard(&[k_i, k_j, k_r], m)?;
        Ok(common(k_i as u64, k_j as u64, k_r as u64, m as u64))
    }

    pub fn p_triangle(k_i: usize, k_j: usize, k_r: usize, m: usize) -> Result<BigRational> {
        guard(&[k_i, k_j, k_r], m)?;
        Ok(triangle(k_i as u64, k_j as u64, k_r as u64, m as u64))
    }
}

/// Event observed on a collapsed realization of the configuration model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchEvent {
    Adjacency { i: usize, j: usize },
    CommonNeighbour { i: usize, j: usize, r: usize },
    Triangle { i: usize, j: usize, r: usize },
}

/// Largest edge count the enumeration oracle accepts; (2m-1)!! matchings.
pub const ORACLE_MAX_EDGES: usize = 6;

/// Multigraph realization: per-pair match counts (self-loops discarded).
pub(crate) struct Realization {
    n: usize,
    counts: Vec<u32>,
}

impl Realization {
    fn new(n: usize) -> Realization {
        Realization { n, counts: vec![0; n * n] }
    }

    fn bump(&mut self, u: usize, v: usize, delta: i32) {
        if u != v {
            let c = &mut self.counts[u * self.n + v];
            *c = (*c as i32 + delta) as u32;
            self.counts[v * self.n + u] = *c;
        }
    }

    /// Collapsed adjacency: at least one u-v match.
    pub(crate) fn connected(&self, u: usize, v: usize) -> bool {
        self.counts[u * self.n + v] > 0
    }

    /// Number of u-v matches including multiplicity.
    pub(crate) fn multiplicity(&self, u: usize, v: usize) -> u32 {
        self.counts[u * self.n + v]
    }
}

/// Visits every perfect matching of the labelled stubs, invoking `visit` on
/// each realization. Returns the number of matchings, which is (2m-1)!!.
pub(crate) fn visit_matchings<F>(degrees: &[usize], mut visit: F) -> Result<u64>
where
    F: FnMut(&Realization),
{
    let total: usize = degrees.iter().sum();
    if total % 2 != 0 {
        return Err(Error::Domain("degree sequence must have even sum".into()));
    }
    let m = total / 2;
    if m == 0 {
        return Err(Error::Domain("degree sequence has no stubs".into()));
    }
    if m > ORACLE_MAX_EDGES {
        return Err(Error::Domain(format!(
            "enumeration oracle limited to m <= {} edges (got m = {})",
            ORACLE_MAX_EDGES, m
        )));
    }
    let mut owner = Vec::with_capacity(total);
    for (node, &d) in degrees.iter().enumerate() {
        owner.extend(std::iter::repeat(node).take(d));
    }
    let mut taken = vec![false; total];
    let mut real = Realization::new(degrees.len());
    let mut count = 0u64;
    fn recurse<F: FnMut(&Realization)>(
        owner: &[usize],
        taken: &mut [bool],
        real: &mut Realization,
        count: &mut u64,
        visit: &mut F,
    ) {
        let Some(first) = taken.iter().position(|&t| !t) else {
            *count += 1;
            visit(real);
            return;
        };
        taken[first] = true;
        for second in first + 1..taken.len() {
            if taken[second] {
                continue;
            }
            taken[second] = true;
            real.bump(owner[first], owner[second], 1);
            recurse(owner, taken, real, count, visit);
            real.bump(owner[first], owner[second], -1);
            taken[second] = false;
        }
        taken[first] = false;
    }
    recurse(&owner, &mut taken, &mut real, &mut count, &mut visit);
    Ok(count)
}

fn check_event_nodes(degrees: &[usize], nodes: &[usize]) -> Result<()> {
    let n = degrees.len();
    for &v in nodes {
        if v >= n {
            return Err(Error::NodeIndex { node: v, n });
        }
    }
    for (a, &u) in nodes.iter().enumerate() {
        for &v in &nodes[a + 1..] {
            if u == v {
                return Err(Error::Domain("event nodes must be distinct".into()));
            }
        }
    }
    Ok(())
}

/// Exact probability of `event` over all perfect matchings of the stubs.
pub fn enumerate_matchings_oracle(degrees: &[usize], event: MatchEvent) -> Result<BigRational> {
    match event {
        MatchEvent::Adjacency { i, j } => check_event_nodes(degrees, &[i, j])?,
        MatchEvent::CommonNeighbour { i, j, r } | MatchEvent::Triangle { i, j, r } => {
            check_event_nodes(degrees, &[i, j, r])?
        }
    }
    let mut favourable = 0u64;
    let total = visit_matchings(degrees, |real| {
        let hit = match event {
            MatchEvent::Adjacency { i, j } => real.connected(i, j),
            MatchEvent::CommonNeighbour { i, j, r } => {
                real.connected(i, r) && real.connected(j, r)
            }
            MatchEvent::Triangle { i, j, r } => {
                real.connected(i, j) && real.connected(i, r) && real.connected(j, r)
            }
        };
        if hit {
            favourable += 1;
        }
    })?;
    Ok(BigRational::new(BigInt::from(favourable), BigInt::from(total)))
}

/// Exact expected number of i-j matches (with multiplicity) per pairing.
pub fn oracle_expected_matches(degrees: &[usize], i: usize, j: usize) -> Result<BigRational> {
    check_event_nodes(degrees, &[i, j])?;
    let mut matches = 0u64;
    let total = visit_matchings(degrees, |real| {
        matches += u64::from(real.multiplicity(i, j));
    })?;
    Ok(BigRational::new(BigInt::from(matches), BigInt::from(total)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn single_edge_is_certain() {
        let p = enumerate_matchings_oracle(&[1, 1], MatchEvent::Adjacency { i: 0, j: 1 }).unwrap();
        assert_eq!(p, rat(1, 1));
        assert_eq!(p_adjacency(1, 1, 1).unwrap(), 1.0);
    }

    #[test]
    fn two_edges_adjacency() {
        let p =
            enumerate_matchings_oracle(&[1, 1, 1, 1], MatchEvent::Adjacency { i: 0, j: 1 }).unwrap();
        assert_eq!(p, rat(1, 3));
        assert!((p_adjacency(1, 1, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_degrees_adjacency() {
        let p = enumerate_matchings_oracle(&[2, 2, 2], MatchEvent::Adjacency { i: 0, j: 1 }).unwrap();
        assert_eq!(p, rat(2, 3));
        assert!((p_adjacency(2, 2, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_degree_gives_zero() {
        assert_eq!(p_adjacency(0, 5, 10).unwrap(), 0.0);
        assert_eq!(p_common_neighbour(3, 0, 2, 10).unwrap(), 0.0);
        assert_eq!(p_common_neighbour(3, 2, 1, 10).unwrap(), 0.0);
        assert_eq!(p_triangle(1, 4, 3, 10).unwrap(), 0.0);
    }

    #[test]
    fn oversubscribed_degrees_rejected() {
        assert!(matches!(p_adjacency(5, 5, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn oracle_refuses_large_m() {
        let degrees = vec![2; 7];
        match enumerate_matchings_oracle(&degrees, MatchEvent::Adjacency { i: 0, j: 1 }) {
            Err(Error::Domain(msg)) => assert!(msg.contains("m <= 6")),
            other => panic!("expected refusal, got {:?}", other),
        }
    }

    #[test]
    fn expected_matches_identity_small() {
        // k_i k_j / (2m-1) on a square's degree sequence
        let e = oracle_expected_matches(&[2, 2, 2, 2], 0, 1).unwrap();
        assert_eq!(e, rat(4, 7));
    }

    #[test]
    fn rational_matches_float_on_triangle() {
        use num::ToPrimitive;
        let exact = rational::p_adjacency(2, 2, 3).unwrap();
        assert_eq!(exact, rat(2, 3));
        let f = p_adjacency(2, 2, 3).unwrap();
        assert!((f - exact.to_f64().unwrap()).abs() < 1e-12);
    }
}
