//! Cover-versus-cover agreement scores and bridge-node classification
//! metrics for benchmark evaluation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::GroundTruth;
use crate::graph::NodeId;
use crate::stability::CommunityStructure;

/// All evaluation numbers for one detected cover against ground truth.
/// Serializes flat: nmi, omega, the six rates, then the confusion counts.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub nmi: f64,
    pub omega: f64,
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
    pub precision: f64,
    pub f1: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MetricsReport {
    pub fn assemble(nmi: f64, omega: f64, bridge: &BridgeReport) -> MetricsReport {
        MetricsReport {
            nmi,
            omega,
            accuracy: bridge.accuracy,
            tpr: bridge.tpr,
            fpr: bridge.fpr,
            auc: bridge.auc,
            precision: bridge.precision,
            f1: bridge.f1,
            tp: bridge.tp,
            tn: bridge.tn,
            fp: bridge.fp,
            fn_: bridge.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BridgeReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
    pub precision: f64,
    pub f1: f64,
}

fn check_cover(cover: &[Vec<NodeId>], n: usize) -> Result<()> {
    if cover.is_empty() {
        return Err(Error::Domain("cover has no communities".into()));
    }
    for c in cover {
        if c.is_empty() {
            return Err(Error::Domain("cover contains an empty community".into()));
        }
        for &i in c {
            if i >= n {
                return Err(Error::NodeIndex { node: i, n });
            }
        }
    }
    Ok(())
}

/// Node-set bitmask for fast intersection counting.
struct Mask {
    words: Vec<u64>,
    count: usize,
}

impl Mask {
    fn from_community(c: &[NodeId], n: usize) -> Mask {
        let mut words = vec![0u64; n.div_ceil(64)];
        let mut count = 0;
        for &i in c {
            let (w, b) = (i / 64, i % 64);
            if words[w] >> b & 1 == 0 {
                words[w] |= 1 << b;
                count += 1;
            }
        }
        Mask { words, count }
    }

    fn intersection(&self, other: &Mask) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

/// -p·log2(p), continuously extended to 0 at p = 0.
fn h(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Binary entropy of a community holding `count` of `n` nodes.
fn community_entropy(count: usize, n: usize) -> f64 {
    let p = count as f64 / n as f64;
    h(p) + h(1.0 - p)
}

/// Mean normalized conditional entropy of cover `a` given cover `b`.
/// Each community of `a` is matched to the community of `b` that leaves the
/// least conditional entropy, among candidates whose joint distribution is
/// dominated by its agreement cells; with no acceptable candidate the
/// community keeps its full entropy. A zero-entropy community contributes 0.
fn conditional_entropy_norm(a: &[Mask], b: &[Mask], n: usize) -> f64 {
    let nf = n as f64;
    let mut total = 0.0;
    for x in a {
        let hx = community_entropy(x.count, n);
        let mut best = hx;
        for y in b {
            let c11 = x.intersection(y);
            let c10 = x.count - c11;
            let c01 = y.count - c11;
            let c00 = n - c11 - c10 - c01;
            let (p11, p10, p01, p00) =
                (c11 as f64 / nf, c10 as f64 / nf, c01 as f64 / nf, c00 as f64 / nf);
            if h(p11) + h(p00) < h(p01) + h(p10) {
                continue;
            }
            let joint = h(p11) + h(p10) + h(p01) + h(p00);
            let hy = community_entropy(y.count, n);
            best = best.min(joint - hy);
        }
        if hx > 0.0 {
            total += (best / hx).clamp(0.0, 1.0);
        }
    }
    total / a.len() as f64
}

/// Similarity of two covers in [0,1] from per-community membership
/// entropies: 1 minus the mean of the two normalized conditional
/// entropies. Identical covers score 1.
pub fn overlapping_nmi(a: &[Vec<NodeId>], b: &[Vec<NodeId>], n: usize) -> Result<f64> {
    check_cover(a, n)?;
    check_cover(b, n)?;
    if n == 0 {
        return Err(Error::Domain("empty node set".into()));
    }
    let ma: Vec<Mask> = a.iter().map(|c| Mask::from_community(c, n)).collect();
    let mb: Vec<Mask> = b.iter().map(|c| Mask::from_community(c, n)).collect();
    let hab = conditional_entropy_norm(&ma, &mb, n);
    let hba = conditional_entropy_norm(&mb, &ma, n);
    Ok((1.0 - 0.5 * (hab + hba)).clamp(0.0, 1.0))
}

fn pair_counts(cover: &[Vec<NodeId>], n: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n * (n - 1) / 2];
    let index = |i: usize, j: usize| i * n - i * (i + 1) / 2 + (j - i - 1);
    for c in cover {
        let mut sorted = c.clone();
        sorted.sort_unstable();
        sorted.dedup();
        for (at, &i) in sorted.iter().enumerate() {
            for &j in &sorted[at + 1..] {
                counts[index(i, j)] += 1;
            }
        }
    }
    counts
}

/// Chance-adjusted fraction of node pairs whose co-membership counts agree
/// between the covers: (obs - exp)/(1 - exp), where exp is the agreement
/// expected from the two count histograms alone. Equals 1 when the counts
/// agree everywhere; the degenerate exp = 1 case scores 1 for perfect
/// observed agreement and 0 otherwise.
pub fn omega_index(a: &[Vec<NodeId>], b: &[Vec<NodeId>], n: usize) -> Result<f64> {
    check_cover(a, n)?;
    check_cover(b, n)?;
    if n < 2 {
        return Ok(1.0);
    }
    let ca = pair_counts(a, n);
    let cb = pair_counts(b, n);
    let t = ca.len() as u128;
    let agree = ca.iter().zip(&cb).filter(|(x, y)| x == y).count() as u128;
    let top = *ca.iter().chain(&cb).max().expect("pairs exist") as usize;
    let mut hist_a = vec![0u128; top + 1];
    let mut hist_b = vec![0u128; top + 1];
    for &c in &ca {
        hist_a[c as usize] += 1;
    }
    for &c in &cb {
        hist_b[c as usize] += 1;
    }
    let expectation: u128 = hist_a.iter().zip(&hist_b).map(|(x, y)| x * y).sum();
    if expectation == t * t {
        return Ok(if agree == t { 1.0 } else { 0.0 });
    }
    // (obs - exp)/(1 - exp) with both fractions put over t^2
    let numerator = (agree * t) as f64 - expectation as f64;
    Ok(numerator / (t * t - expectation) as f64)
}

/// Confusion counts and rates for bridge-node prediction: a node is
/// predicted bridge when it holds two or more memberships. Undefined rates
/// (zero denominators) report as 0.
pub fn bridge_confusion(pred: &CommunityStructure, truth: &GroundTruth) -> Result<BridgeReport> {
    let n = pred.n();
    for c in &truth.communities {
        for &i in c {
            if i >= n {
                return Err(Error::Domain(format!(
                    "ground-truth node {} outside the predicted structure's {} nodes",
                    i, n
                )));
            }
        }
    }
    if truth.bridge_nodes.iter().any(|&i| i >= n) {
        return Err(Error::Domain("ground-truth bridge node outside the node set".into()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        let predicted = pred.membership(i).len() >= 2;
        let actual = truth.is_bridge(i);
        match (predicted, actual) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let tpr = rate(tp, tp + fn_);
    let fpr = rate(fp, tn + fp);
    Ok(BridgeReport {
        tp,
        tn,
        fp,
        fn_,
        accuracy: rate(tp + tn, n),
        tpr,
        fpr,
        auc: (1.0 - fpr + tpr) / 2.0,
        precision: rate(tp, tp + fp),
        f1: rate(2 * tp, 2 * tp + fp + fn_),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grand(n: usize) -> Vec<Vec<NodeId>> {
        vec![(0..n).collect()]
    }

    fn singletons(n: usize) -> Vec<Vec<NodeId>> {
        (0..n).map(|i| vec![i]).collect()
    }

    #[test]
    fn nmi_identical_covers() {
        let a = vec![vec![0, 1, 2], vec![2, 3, 4], vec![5]];
        assert!((overlapping_nmi(&a, &a, 6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_grand_versus_singletons() {
        let got = overlapping_nmi(&grand(4), &singletons(4), 4).unwrap();
        assert!((got - 0.5).abs() < 1e-12, "got {}", got);
    }

    #[test]
    fn nmi_is_symmetric() {
        let a = vec![vec![0, 1, 2, 3], vec![3, 4, 5]];
        let b = vec![vec![0, 1], vec![2, 3, 4], vec![5]];
        let ab = overlapping_nmi(&a, &b, 6).unwrap();
        let ba = overlapping_nmi(&b, &a, 6).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0 && ab < 1.0);
    }

    #[test]
    fn covers_must_be_sound() {
        let empty_comm = vec![vec![0, 1], vec![]];
        assert!(overlapping_nmi(&empty_comm, &grand(2), 2).is_err());
        assert!(overlapping_nmi(&[], &grand(2), 2).is_err());
        assert!(omega_index(&grand(3), &vec![vec![0, 7]], 3).is_err());
    }

    #[test]
    fn omega_identical_and_relabelled() {
        let a = vec![vec![0, 1, 2], vec![2, 3], vec![4, 5]];
        let shuffled = vec![vec![4, 5], vec![0, 1, 2], vec![2, 3]];
        assert!((omega_index(&a, &a, 6).unwrap() - 1.0).abs() < 1e-12);
        assert!((omega_index(&a, &shuffled, 6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_hand_pair_table() {
        // obs = 2/6, exp = (4*4 + 2*2)/36, omega = -1/2
        let a = vec![vec![0, 1], vec![2, 3]];
        let b = vec![vec![0, 2], vec![1, 3]];
        let got = omega_index(&a, &b, 4).unwrap();
        assert!((got + 0.5).abs() < 1e-12, "got {}", got);
    }

    #[test]
    fn omega_degenerate_expectation() {
        // every pair co-occurs once in a and twice in b: expectation 1,
        // observed agreement 0
        let a = grand(4);
        let b = vec![(0..4).collect::<Vec<_>>(), (0..4).collect()];
        assert_eq!(omega_index(&a, &b, 4).unwrap(), 0.0);
        assert_eq!(omega_index(&a, &a, 4).unwrap(), 1.0);
    }

    fn truth_with_bridges(n: usize, bridges: &[NodeId]) -> GroundTruth {
        GroundTruth { communities: vec![(0..n).collect()], bridge_nodes: bridges.to_vec() }
    }

    #[test]
    fn confusion_hand_example() {
        // truth bridges {0,1,2}, predicted {0,1,3}
        let pred = CommunityStructure::new(
            10,
            2,
            2,
            vec![(0..10).collect(), vec![0, 1, 3]],
        )
        .unwrap();
        let r = bridge_confusion(&pred, &truth_with_bridges(10, &[0, 1, 2])).unwrap();
        assert_eq!((r.tp, r.tn, r.fp, r.fn_), (2, 6, 1, 1));
        assert!((r.accuracy - 0.8).abs() < 1e-12);
        assert!((r.tpr - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.fpr - 1.0 / 7.0).abs() < 1e-12);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.auc - (1.0 - 1.0 / 7.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        // harmonic-mean identity holds when precision and tpr are positive
        let harmonic = 2.0 * r.precision * r.tpr / (r.precision + r.tpr);
        assert!((r.f1 - harmonic).abs() < 1e-12);
    }

    #[test]
    fn confusion_perfect_and_empty_predictions() {
        let perfect = CommunityStructure::new(
            4,
            2,
            2,
            vec![vec![0, 1, 2, 3], vec![0, 1]],
        )
        .unwrap();
        let r = bridge_confusion(&perfect, &truth_with_bridges(4, &[0, 1])).unwrap();
        assert_eq!((r.accuracy, r.auc, r.f1), (1.0, 1.0, 1.0));

        let none = CommunityStructure::new(4, 1, 1, vec![vec![0, 1, 2, 3]]).unwrap();
        let r = bridge_confusion(&none, &truth_with_bridges(4, &[0, 1])).unwrap();
        assert_eq!((r.tpr, r.fpr, r.auc), (0.0, 0.0, 0.5));
    }

    #[test]
    fn confusion_rejects_foreign_nodes() {
        let pred = CommunityStructure::new(3, 1, 1, vec![vec![0, 1, 2]]).unwrap();
        let bad = GroundTruth { communities: vec![vec![0, 5]], bridge_nodes: vec![] };
        assert!(bridge_confusion(&pred, &bad).is_err());
    }

    #[test]
    fn report_serializes_with_fixed_keys() {
        let pred = CommunityStructure::new(4, 1, 1, vec![vec![0, 1, 2, 3]]).unwrap();
        let bridge = bridge_confusion(&pred, &truth_with_bridges(4, &[])).unwrap();
        let report = MetricsReport::assemble(1.0, 1.0, &bridge);
        let json = serde_json::to_string(&report).unwrap();
        for key in
            ["nmi", "omega", "accuracy", "tpr", "fpr", "auc", "precision", "f1", "tp", "tn", "fp", "\"fn\""]
        {
            assert!(json.contains(key), "missing key {} in {}", key, json);
        }
    }

    /// Random cover over n nodes with every community non-empty.
    fn cover_strategy(n: usize) -> impl Strategy<Value = Vec<Vec<NodeId>>> {
        prop::collection::vec(prop::collection::vec(any::<bool>(), n), 1..4).prop_map(
            move |rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(at, row)| {
                        let mut c: Vec<NodeId> =
                            (0..n).filter(|&i| row[i]).collect();
                        if c.is_empty() {
                            c.push(at % n);
                        }
                        c
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn self_similarity_is_one(a in cover_strategy(7)) {
            prop_assert!((overlapping_nmi(&a, &a, 7).unwrap() - 1.0).abs() < 1e-9);
            prop_assert!((omega_index(&a, &a, 7).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn relabelling_nodes_consistently_changes_nothing(
            a in cover_strategy(7),
            b in cover_strategy(7),
            rot in 0usize..7,
        ) {
            let relabel = |cover: &[Vec<NodeId>]| -> Vec<Vec<NodeId>> {
                cover.iter().map(|c| c.iter().map(|i| (i + rot) % 7).collect()).collect()
            };
            let nmi = overlapping_nmi(&a, &b, 7).unwrap();
            let nmi_rot = overlapping_nmi(&relabel(&a), &relabel(&b), 7).unwrap();
            prop_assert!((nmi - nmi_rot).abs() < 1e-9);
            let om = omega_index(&a, &b, 7).unwrap();
            let om_rot = omega_index(&relabel(&a), &relabel(&b), 7).unwrap();
            prop_assert!((om - om_rot).abs() < 1e-9);
        }

        #[test]
        fn nmi_symmetry(a in cover_strategy(6), b in cover_strategy(6)) {
            let ab = overlapping_nmi(&a, &b, 6).unwrap();
            let ba = overlapping_nmi(&b, &a, 6).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
        }
    }
}
