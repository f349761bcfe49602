//! Pair weight matrices.
//!
//! Raw weights blend adjacency with common-neighbour density: with
//! P_ij = 1/k_i + 1/k_j and CN_ij = (common neighbours + 1)·P_ij, a pair is
//! worth (CN−P)/4 when not adjacent, P when adjacent with a degree-1
//! endpoint, and 2·CN+P when adjacent with both degrees above 1 (0 if an
//! endpoint is isolated). Modular variants subtract a null expectation:
//! the approximate form uses the strength-product estimate W_i·W_j/(2W),
//! the exact form the configuration-model expectation of the raw formula.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::null_model::{visit_matchings, KahanSum, NullModelContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightVariant {
    Raw,
    ApproxModular,
    ExactModular,
}

impl WeightVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightVariant::Raw => "raw",
            WeightVariant::ApproxModular => "approx",
            WeightVariant::ExactModular => "exact",
        }
    }
}

/// Symmetric n×n matrix with zero diagonal, tagged with its variant and the
/// fingerprint of the source graph. Row sums are cached: the stability
/// inequality compares a member's in-community weight against half its row.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    variant: WeightVariant,
    n: usize,
    values: Vec<f64>,
    row_sums: Vec<f64>,
    fingerprint: u64,
}

impl WeightMatrix {
    fn from_upper<F>(variant: WeightVariant, n: usize, fingerprint: u64, mut f: F) -> WeightMatrix
    where
        F: FnMut(NodeId, NodeId) -> f64,
    {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let w = f(i, j);
                values[i * n + j] = w;
                values[j * n + i] = w;
            }
        }
        Self::from_values(variant, n, fingerprint, values)
    }

    fn from_values(
        variant: WeightVariant,
        n: usize,
        fingerprint: u64,
        values: Vec<f64>,
    ) -> WeightMatrix {
        let row_sums = (0..n)
            .map(|i| {
                let mut acc = KahanSum::default();
                for j in 0..n {
                    acc.add(values[i * n + j]);
                }
                acc.total()
            })
            .collect();
        WeightMatrix { variant, n, values, row_sums, fingerprint }
    }

    pub fn variant(&self) -> WeightVariant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source_graph_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.values[i * self.n + j]
    }

    /// Σ_j W_ij over all j (diagonal is zero).
    pub fn row_sum(&self, i: NodeId) -> f64 {
        self.row_sums[i]
    }

    /// Unordered pairs (i, j, w) with i < j.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    /// Tab-separated `label_i label_j w` triples, one unordered pair per line.
    pub fn to_tsv(&self, labels: &[u64]) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for (i, j, w) in self.upper_pairs() {
            let _ = writeln!(out, "{}\t{}\t{}", labels[i], labels[j], w);
        }
        out
    }
}

/// 1/k_i + 1/k_j.
pub fn partition_ratio(g: &Graph, i: NodeId, j: NodeId) -> Result<f64> {
    let (ki, kj) = (g.degree(i), g.degree(j));
    if ki == 0 || kj == 0 {
        return Err(Error::Domain(format!(
            "partition ratio undefined for isolated node (degrees {} and {})",
            ki, kj
        )));
    }
    Ok(1.0 / ki as f64 + 1.0 / kj as f64)
}

fn raw_weight(g: &Graph, i: NodeId, j: NodeId) -> f64 {
    let (ki, kj) = (g.degree(i), g.degree(j));
    if ki == 0 || kj == 0 {
        return 0.0;
    }
    let p = 1.0 / ki as f64 + 1.0 / kj as f64;
    let cn = (g.common_neighbours(i, j).expect("checked pair") + 1) as f64 * p;
    if !g.has_edge(i, j) {
        (cn - p) / 4.0
    } else if ki == 1 || kj == 1 {
        p
    } else {
        2.0 * cn + p
    }
}

pub fn raw_weights(g: &Graph) -> WeightMatrix {
    WeightMatrix::from_upper(WeightVariant::Raw, g.node_count(), g.fingerprint(), |i, j| {
        raw_weight(g, i, j)
    })
}

/// W′_ij = W_ij − W_i·W_j/(2W) with strengths W_i = Σ_j W_ij and W the total
/// weight of the pair graph (half the strength sum), so Σ_i W_i = 2W.
pub fn approx_modular_weights(g: &Graph, w: &WeightMatrix) -> Result<WeightMatrix> {
    if w.variant() != WeightVariant::Raw {
        return Err(Error::Domain("approximate modular weights start from raw weights".into()));
    }
    if w.n() != g.node_count() || w.source_graph_fingerprint() != g.fingerprint() {
        return Err(Error::Validation("weight matrix was not computed from this graph".into()));
    }
    let mut total = KahanSum::default();
    for i in 0..w.n() {
        total.add(w.row_sum(i));
    }
    let two_w = total.total();
    if two_w <= 0.0 {
        return Err(Error::Domain("modular weights undefined: graph has no edges".into()));
    }
    Ok(WeightMatrix::from_upper(
        WeightVariant::ApproxModular,
        w.n(),
        w.source_graph_fingerprint(),
        |i, j| w.get(i, j) - w.row_sum(i) * w.row_sum(j) / two_w,
    ))
}

/// Per-pair sums of null-model probabilities over the third node r.
struct ExpectationTables<'a> {
    ctx: &'a NullModelContext,
    degrees: Vec<usize>,
    /// distinct degree -> multiplicity
    degree_counts: Vec<(usize, usize)>,
}

impl<'a> ExpectationTables<'a> {
    fn new(g: &Graph, ctx: &'a NullModelContext) -> ExpectationTables<'a> {
        let degrees = g.degrees();
        let mut counts = std::collections::BTreeMap::new();
        for &d in &degrees {
            *counts.entry(d).or_insert(0usize) += 1;
        }
        ExpectationTables { ctx, degrees, degree_counts: counts.into_iter().collect() }
    }

    /// Σ_{r ∉ {i,j}} prob(k_r) via the degree multiset. The counts of k_i
    /// and k_j drop by one each before evaluating, so every argument triple
    /// has a real witness node and stays within the stub total.
    fn sum_over_others(
        &self,
        i: NodeId,
        j: NodeId,
        prob: impl Fn(usize) -> Result<f64>,
    ) -> Result<f64> {
        let (ki, kj) = (self.degrees[i], self.degrees[j]);
        let mut acc = KahanSum::default();
        for &(d, count) in &self.degree_counts {
            let others = count - usize::from(d == ki) - usize::from(d == kj);
            if others > 0 {
                acc.add(others as f64 * prob(d)?);
            }
        }
        Ok(acc.total())
    }

    fn sum_common(&self, i: NodeId, j: NodeId) -> Result<f64> {
        let (ki, kj) = (self.degrees[i], self.degrees[j]);
        self.sum_over_others(i, j, |d| self.ctx.p_common_neighbour(ki, kj, d))
    }

    fn sum_triangle(&self, i: NodeId, j: NodeId) -> Result<f64> {
        let (ki, kj) = (self.degrees[i], self.degrees[j]);
        self.sum_over_others(i, j, |d| self.ctx.p_triangle(ki, kj, d))
    }

    fn expected(&self, i: NodeId, j: NodeId) -> Result<f64> {
        let (ki, kj) = (self.degrees[i], self.degrees[j]);
        if ki == 0 || kj == 0 {
            return Ok(0.0);
        }
        let p = 1.0 / ki as f64 + 1.0 / kj as f64;
        let p_adj = self.ctx.p_adjacency(ki, kj)?;
        if ki == 1 || kj == 1 {
            Ok(p / 4.0 * self.sum_common(i, j)? + p * p_adj)
        } else {
            let sc = self.sum_common(i, j)?;
            let st = self.sum_triangle(i, j)?;
            Ok(p / 4.0 * (sc - st) + 2.0 * p * st + 3.0 * p * p_adj)
        }
    }
}

/// Configuration-model expectation of the raw weight of one pair.
pub fn expected_weight(g: &Graph, ctx: &NullModelContext, i: NodeId, j: NodeId) -> Result<f64> {
    if i >= g.node_count() || j >= g.node_count() {
        return Err(Error::NodeIndex { node: i.max(j), n: g.node_count() });
    }
    if i == j {
        return Err(Error::Domain("expected weight requires i != j".into()));
    }
    if ctx.edge_count() != g.edge_count() {
        return Err(Error::Validation(format!(
            "context built for m={} but graph has m={}",
            ctx.edge_count(),
            g.edge_count()
        )));
    }
    ExpectationTables::new(g, ctx).expected(i, j)
}

/// W*_ij = W_ij − E[W_ij].
pub fn exact_modular_weights(g: &Graph) -> Result<WeightMatrix> {
    if g.edge_count() == 0 {
        return Err(Error::Domain("modular weights undefined: graph has no edges".into()));
    }
    let raw = raw_weights(g);
    let ctx = NullModelContext::new(g.edge_count());
    let tables = ExpectationTables::new(g, &ctx);
    let n = g.node_count();
    // Pair loop is pure given the memo; parallelize by row.
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| tables.expected(i, j)).collect())
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, e) in row?.into_iter().enumerate() {
            let j = i + 1 + off;
            let w = raw.get(i, j) - e;
            values[i * n + j] = w;
            values[j * n + i] = w;
        }
    }
    Ok(WeightMatrix::from_values(
        WeightVariant::ExactModular,
        n,
        g.fingerprint(),
        values,
    ))
}

/// Exact mean of the raw weight formula over every stub matching of the
/// degree sequence, with adjacency collapsed per pair and the empirical
/// degrees driving both P_ij and the case selection. Test oracle; m ≤ 6.
pub fn oracle_expected_raw_weight(
    degrees: &[usize],
    i: usize,
    j: usize,
) -> Result<BigRational> {
    let n = degrees.len();
    if i >= n || j >= n {
        return Err(Error::NodeIndex { node: i.max(j), n });
    }
    if i == j {
        return Err(Error::Domain("expected weight requires i != j".into()));
    }
    let (ki, kj) = (degrees[i], degrees[j]);
    if ki == 0 || kj == 0 {
        // still consume the matchings to validate the sequence
        let _ = visit_matchings(degrees, |_| {})?;
        return Ok(BigRational::zero());
    }
    // Every case value is P/4 times an integer: cn (non-edge), 4 (edge with a
    // degree-1 endpoint), or 8·cn+12 (edge, both degrees > 1).
    let mut coeff_total: u64 = 0;
    let total = visit_matchings(degrees, |real| {
        let mut cn = 0u64;
        for r in 0..n {
            if r != i && r != j && real.connected(i, r) && real.connected(j, r) {
                cn += 1;
            }
        }
        coeff_total += if !real.connected(i, j) {
            cn
        } else if ki == 1 || kj == 1 {
            4
        } else {
            8 * cn + 12
        };
    })?;
    let p = BigRational::new(BigInt::from(ki as u64 + kj as u64), BigInt::from((ki * kj) as u64));
    Ok(p / BigRational::from(BigInt::from(4))
        * BigRational::new(BigInt::from(coeff_total), BigInt::from(total)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edge_list_text("0 1\n1 2").unwrap()
    }

    #[test]
    fn partition_ratio_hand_values() {
        let g = path3();
        assert_eq!(partition_ratio(&g, 0, 1).unwrap(), 1.5);
        let k3 = Graph::from_edge_list_text("0 1\n1 2\n2 0").unwrap();
        assert_eq!(partition_ratio(&k3, 0, 1).unwrap(), 1.0);
    }

    #[test]
    fn partition_ratio_rejects_isolated() {
        let g = Graph::from_edge_list_text("0 1\n2").unwrap();
        assert!(matches!(partition_ratio(&g, 0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn raw_weights_hand_values() {
        let g = path3();
        let w = raw_weights(&g);
        assert_eq!(w.get(0, 1), 1.5);
        assert_eq!(w.get(0, 2), 0.5);
        let k3 = Graph::from_edge_list_text("0 1\n1 2\n2 0").unwrap();
        let wk = raw_weights(&k3);
        assert_eq!(wk.get(0, 1), 5.0);
        assert_eq!(wk.get(1, 2), 5.0);
    }

    #[test]
    fn isolated_endpoint_weighs_zero() {
        let g = Graph::from_edge_list_text("0 1\n3").unwrap();
        let w = raw_weights(&g);
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.get(1, 2), 0.0);
    }

    #[test]
    fn row_sum_checksum() {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 3\n3 0\n0 2").unwrap();
        let w = raw_weights(&g);
        let rows: f64 = (0..w.n()).map(|i| w.row_sum(i)).sum();
        let pairs: f64 = w.upper_pairs().map(|(_, _, v)| v).sum();
        assert!((rows - 2.0 * pairs).abs() < 1e-9);
    }

    #[test]
    fn single_edge_approx_modular() {
        let g = Graph::from_edge_list_text("0 1").unwrap();
        let w = raw_weights(&g);
        assert_eq!(w.get(0, 1), 2.0);
        let wp = approx_modular_weights(&g, &w).unwrap();
        assert_eq!(wp.get(0, 1), 1.0);
    }

    #[test]
    fn edgeless_graph_rejected() {
        let g = Graph::from_edges(3, std::iter::empty()).unwrap();
        let w = raw_weights(&g);
        assert!(matches!(approx_modular_weights(&g, &w), Err(Error::Domain(_))));
        assert!(matches!(exact_modular_weights(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_modular_is_raw_minus_expected() {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 0\n2 3").unwrap();
        let raw = raw_weights(&g);
        let ws = exact_modular_weights(&g).unwrap();
        let ctx = NullModelContext::new(g.edge_count());
        for (i, j, v) in ws.upper_pairs() {
            let e = expected_weight(&g, &ctx, i, j).unwrap();
            assert!((v - (raw.get(i, j) - e)).abs() < 1e-12);
        }
    }

    #[test]
    fn k3_expected_matches_oracle() {
        use num::ToPrimitive;
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 0").unwrap();
        let ctx = NullModelContext::new(3);
        let closed = expected_weight(&g, &ctx, 0, 1).unwrap();
        let oracle = oracle_expected_raw_weight(&[2, 2, 2], 0, 1).unwrap();
        assert!((closed - oracle.to_f64().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn path_expected_matches_oracle() {
        use num::ToPrimitive;
        let g = path3();
        let ctx = NullModelContext::new(2);
        let closed = expected_weight(&g, &ctx, 0, 1).unwrap();
        let oracle = oracle_expected_raw_weight(&[1, 2, 1], 0, 1).unwrap();
        assert!((closed - oracle.to_f64().unwrap()).abs() < 1e-12);
    }
}
