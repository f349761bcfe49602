//! Shapley values, coalition stability, and community structure validation.
//!
//! A member's payoff in coalition S is half its weight to the rest of S. S is
//! stable when no member would earn more by defecting to the opposite
//! coalition, which linearizes to: for every i in S, Σ_{j∈S, j≠i} W_ij ≥
//! ½ Σ_{j≠i} W_ij.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::null_model::KahanSum;
use crate::weights::WeightMatrix;

/// Slack absorbing floating-point noise in numerically computed weights:
/// a member defects only when it gains more than this.
pub const STABILITY_TOL: f64 = 1e-9;

/// An overlapping cover of the node set: up to `n_c` non-empty communities,
/// each node in at most `p` of them. The constructor enforces representation
/// invariants (in-range sorted members, non-empty sets, inverse membership
/// index); semantic feasibility (coverage, p-limit, non-inclusion, stability)
/// is reported by [`validate_structure`] so infeasible candidates can be
/// built and inspected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityStructure {
    n: usize,
    n_c: usize,
    p: usize,
    communities: Vec<Vec<NodeId>>,
    membership: Vec<Vec<usize>>,
}

impl CommunityStructure {
    pub fn new(
        n: usize,
        n_c: usize,
        p: usize,
        communities: Vec<Vec<NodeId>>,
    ) -> Result<CommunityStructure> {
        if n_c == 0 || p == 0 {
            return Err(Error::Validation("n_c and p must be at least 1".into()));
        }
        if communities.len() > n_c {
            return Err(Error::Validation(format!(
                "{} communities exceed the configured maximum n_c = {}",
                communities.len(),
                n_c
            )));
        }
        let mut sorted = Vec::with_capacity(communities.len());
        for (k, c) in communities.into_iter().enumerate() {
            let set: BTreeSet<NodeId> = c.into_iter().collect();
            if set.is_empty() {
                return Err(Error::Validation(format!(
                    "community {} is empty; unused slots are represented by absence",
                    k
                )));
            }
            if let Some(&max) = set.iter().next_back() {
                if max >= n {
                    return Err(Error::NodeIndex { node: max, n });
                }
            }
            sorted.push(set.into_iter().collect::<Vec<_>>());
        }
        let mut membership = vec![Vec::new(); n];
        for (k, c) in sorted.iter().enumerate() {
            for &i in c {
                membership[i].push(k);
            }
        }
        Ok(CommunityStructure { n, n_c, p, communities: sorted, membership })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn communities(&self) -> &[Vec<NodeId>] {
        &self.communities
    }

    /// Indices of the communities containing node i (ascending).
    pub fn membership(&self, i: NodeId) -> &[usize] {
        &self.membership[i]
    }

    pub fn contains(&self, k: usize, i: NodeId) -> bool {
        self.communities[k].binary_search(&i).is_ok()
    }

    /// True when i and j share at least one community.
    pub fn share_community(&self, i: NodeId, j: NodeId) -> bool {
        let (a, b) = (&self.membership[i], &self.membership[j]);
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Same structure with communities reordered by decreasing size, ties by
    /// lexicographic member order.
    pub fn canonical(&self) -> CommunityStructure {
        let mut cs = self.communities.clone();
        cs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        CommunityStructure::new(self.n, self.n_c, self.p, cs)
            .expect("reordering preserves representation invariants")
    }

    /// One community per line, space-separated original node labels, in
    /// canonical order.
    pub fn to_text(&self, g: &Graph) -> String {
        use std::fmt::Write as _;
        let canon = self.canonical();
        let mut out = String::new();
        for c in &canon.communities {
            let line: Vec<String> = c.iter().map(|&i| g.label(i).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses the [`to_text`](Self::to_text) format against a graph's labels.
    pub fn from_text(g: &Graph, n_c: usize, p: usize, text: &str) -> Result<CommunityStructure> {
        let mut communities = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut c = Vec::new();
            for tok in line.split_whitespace() {
                let label: u64 = tok.parse().map_err(|_| Error::Parse {
                    line: ln + 1,
                    msg: format!("invalid node label {:?}", tok),
                })?;
                let node = g.node_of_label(label).ok_or_else(|| Error::Parse {
                    line: ln + 1,
                    msg: format!("label {} does not occur in the graph", label),
                })?;
                c.push(node);
            }
            communities.push(c);
        }
        CommunityStructure::new(g.node_count(), n_c, p, communities)
    }
}

/// One failed feasibility condition of a candidate structure.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Node belongs to no community.
    Coverage { node: NodeId },
    /// Node belongs to more communities than p allows.
    MembershipLimit { node: NodeId, count: usize, p: usize },
    /// Community `inner` is a subset of (or equal to) community `outer`.
    Inclusion { inner: usize, outer: usize },
    /// Member would gain by defecting: its in-community weight misses half
    /// its total weight by more than the tolerance.
    Unstable { community: usize, node: NodeId, inside: f64, required: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Coverage { node } => write!(f, "node {} is in no community", node),
            Violation::MembershipLimit { node, count, p } => {
                write!(f, "node {} is in {} communities (limit p = {})", node, count, p)
            }
            Violation::Inclusion { inner, outer } => {
                write!(f, "community {} is contained in community {}", inner, outer)
            }
            Violation::Unstable { community, node, inside, required } => write!(
                f,
                "community {} is unstable at node {}: inside weight {} < required {}",
                community, node, inside, required
            ),
        }
    }
}

/// φ_i(S) = ½ Σ_{j∈S, j≠i} W_ij.
pub fn shapley_value(w: &WeightMatrix, s: &[NodeId], i: NodeId) -> Result<f64> {
    if !s.contains(&i) {
        return Err(Error::Domain(format!("node {} is not a member of the coalition", i)));
    }
    let mut acc = KahanSum::default();
    for &j in s {
        if j != i {
            acc.add(w.get(i, j));
        }
    }
    Ok(acc.total() / 2.0)
}

/// True iff every member's weight into S reaches half its total weight,
/// within [`STABILITY_TOL`]. Equivalent to comparing the member's payoff in
/// S against its payoff after defecting to the opposite coalition.
pub fn is_stable(w: &WeightMatrix, s: &[NodeId]) -> bool {
    is_stable_with(w, s, STABILITY_TOL)
}

/// [`is_stable`] with an explicit tolerance.
pub fn is_stable_with(w: &WeightMatrix, s: &[NodeId], tol: f64) -> bool {
    s.iter().all(|&i| {
        let mut acc = KahanSum::default();
        for &j in s {
            if j != i {
                acc.add(w.get(i, j));
            }
        }
        acc.total() >= 0.5 * w.row_sum(i) - tol
    })
}

/// Checks coverage, the p-limit, non-inclusion, and per-community stability;
/// returns one record per failed condition (empty = feasible).
pub fn validate_structure(w: &WeightMatrix, pi: &CommunityStructure) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 0..pi.n() {
        let count = pi.membership(i).len();
        if count == 0 {
            out.push(Violation::Coverage { node: i });
        } else if count > pi.p() {
            out.push(Violation::MembershipLimit { node: i, count, p: pi.p() });
        }
    }
    let cs = pi.communities();
    for k in 0..cs.len() {
        for r in 0..cs.len() {
            if k != r && is_subset(&cs[k], &cs[r]) && (cs[k].len() < cs[r].len() || k < r) {
                // equal sets are reported once, for the smaller index
                out.push(Violation::Inclusion { inner: k, outer: r });
            }
        }
    }
    for (k, c) in cs.iter().enumerate() {
        for &i in c {
            let mut acc = KahanSum::default();
            for &j in c.iter() {
                if j != i {
                    acc.add(w.get(i, j));
                }
            }
            let inside = acc.total();
            let required = 0.5 * w.row_sum(i);
            if inside < required - STABILITY_TOL {
                out.push(Violation::Unstable { community: k, node: i, inside, required });
            }
        }
    }
    out
}

fn is_subset(a: &[NodeId], b: &[NodeId]) -> bool {
    // both sorted
    let mut y = 0;
    for &v in a {
        while y < b.len() && b[y] < v {
            y += 1;
        }
        if y >= b.len() || b[y] != v {
            return false;
        }
        y += 1;
    }
    true
}

/// Σ W_ij over unordered pairs sharing at least one community, each pair
/// counted once however many communities it shares. Pairs are accumulated in
/// sorted order, so the value is invariant to community reordering.
pub fn structure_objective(w: &WeightMatrix, pi: &CommunityStructure) -> f64 {
    let mut pairs = BTreeSet::new();
    for c in pi.communities() {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                pairs.insert((i, j));
            }
        }
    }
    let mut acc = KahanSum::default();
    for (i, j) in pairs {
        acc.add(w.get(i, j));
    }
    acc.total()
}

/// Σ_k Σ_{i<j ∈ S_k} W_ij: pairs counted once per shared community. Equals
/// the sum over communities of their members' payoffs.
pub fn shapley_sum_objective(w: &WeightMatrix, pi: &CommunityStructure) -> f64 {
    let mut acc = KahanSum::default();
    for c in pi.communities() {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                acc.add(w.get(i, j));
            }
        }
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::raw_weights;

    fn path3() -> (Graph, WeightMatrix) {
        let g = Graph::from_edge_list_text("0 1\n1 2").unwrap();
        let w = raw_weights(&g);
        (g, w)
    }

    #[test]
    fn shapley_hand_values() {
        let (_, w) = path3();
        assert_eq!(shapley_value(&w, &[0, 1, 2], 0).unwrap(), 1.0);
        assert_eq!(shapley_value(&w, &[1], 1).unwrap(), 0.0);
    }

    #[test]
    fn shapley_requires_membership() {
        let (_, w) = path3();
        assert!(matches!(shapley_value(&w, &[1, 2], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn shapley_grand_coalition_double_counts() {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 3\n3 0\n1 3").unwrap();
        let w = raw_weights(&g);
        let v: Vec<NodeId> = (0..4).collect();
        let total: f64 = v.iter().map(|&i| shapley_value(&w, &v, i).unwrap()).sum();
        let pairs: f64 = w.upper_pairs().map(|(_, _, x)| x).sum();
        assert!((total - pairs).abs() < 1e-12);
    }

    #[test]
    fn grand_coalition_stable_singletons_not() {
        let (_, w) = path3();
        assert!(is_stable(&w, &[0, 1, 2]));
        assert!(!is_stable(&w, &[0]));
        assert!(!is_stable(&w, &[1]));
    }

    #[test]
    fn stability_matches_defection_comparison() {
        // explicit payoff-vs-defection evaluation on every non-empty subset
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 3\n3 0\n0 2\n1 4").unwrap();
        let w = raw_weights(&g);
        let n = g.node_count();
        for bits in 1u32..(1 << n) {
            let s: Vec<NodeId> = (0..n).filter(|&i| bits >> i & 1 == 1).collect();
            let explicit = s.iter().all(|&i| {
                let opposite: Vec<NodeId> =
                    (0..n).filter(|&j| j == i || bits >> j & 1 == 0).collect();
                let stay = shapley_value(&w, &s, i).unwrap();
                let swing = shapley_value(&w, &opposite, i).unwrap();
                stay >= swing - STABILITY_TOL
            });
            assert_eq!(is_stable(&w, &s), explicit, "subset {:?}", s);
        }
    }

    #[test]
    fn structure_invariants_reported() {
        let (_, w) = path3();
        let ok = CommunityStructure::new(3, 2, 1, vec![vec![0, 1, 2]]).unwrap();
        assert!(validate_structure(&w, &ok).is_empty());

        let nested = CommunityStructure::new(3, 2, 2, vec![vec![0, 1, 2], vec![0, 1]]).unwrap();
        let v = validate_structure(&w, &nested);
        assert!(v.contains(&Violation::Inclusion { inner: 1, outer: 0 }));

        let missing = CommunityStructure::new(3, 2, 1, vec![vec![0, 1]]).unwrap();
        let v = validate_structure(&w, &missing);
        assert!(v.contains(&Violation::Coverage { node: 2 }));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(CommunityStructure::new(3, 1, 1, vec![vec![0], vec![1]]).is_err());
        assert!(CommunityStructure::new(3, 2, 1, vec![vec![]]).is_err());
        assert!(CommunityStructure::new(3, 2, 1, vec![vec![5]]).is_err());
        assert!(CommunityStructure::new(3, 0, 1, vec![vec![0]]).is_err());
    }

    #[test]
    fn objectives_agree_on_disjoint_structures() {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 0\n3 4").unwrap();
        let w = raw_weights(&g);
        let pi = CommunityStructure::new(5, 2, 1, vec![vec![0, 1, 2], vec![3, 4]]).unwrap();
        let a = structure_objective(&w, &pi);
        let b = shapley_sum_objective(&w, &pi);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pair_counted_once_across_overlap() {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 0\n2 3").unwrap();
        let w = raw_weights(&g);
        let pi =
            CommunityStructure::new(4, 2, 2, vec![vec![0, 1, 2], vec![1, 2, 3]]).unwrap();
        let f = structure_objective(&w, &pi);
        let mut expect = 0.0;
        for (i, j, x) in w.upper_pairs() {
            if pi.share_community(i, j) {
                expect += x;
            }
        }
        assert!((f - expect).abs() < 1e-12);
        // pair (1,2) shared by both communities counts twice here
        let z = shapley_sum_objective(&w, &pi);
        assert!((z - (f + w.get(1, 2))).abs() < 1e-12);
    }

    #[test]
    fn objective_invariant_to_reordering() {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 0\n2 3\n3 4\n4 0").unwrap();
        let w = raw_weights(&g);
        let a = CommunityStructure::new(5, 3, 2, vec![vec![0, 1, 2], vec![2, 3, 4], vec![4, 0]])
            .unwrap();
        let b = CommunityStructure::new(5, 3, 2, vec![vec![2, 3, 4], vec![4, 0], vec![0, 1, 2]])
            .unwrap();
        assert_eq!(structure_objective(&w, &a).to_bits(), structure_objective(&w, &b).to_bits());
    }

    #[test]
    fn convex_marginal_gains_for_raw_weights() {
        // along S ⊂ T, adding i to the larger coalition gains at least as much
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 3\n3 0\n0 2\n1 4\n4 5\n5 0").unwrap();
        let w = raw_weights(&g);
        let n = g.node_count();
        for i in 0..n {
            let s: Vec<NodeId> = vec![i, (i + 1) % n];
            let t: Vec<NodeId> = (0..n).filter(|&j| j != (i + 2) % n).collect();
            let add = (i + 2) % n;
            let mut s_plus = s.clone();
            s_plus.push(add);
            let mut t_plus = t.clone();
            t_plus.push(add);
            let gain_small = shapley_value(&w, &s_plus, add).unwrap();
            let gain_large = shapley_value(&w, &t_plus, add).unwrap();
            assert!(gain_large >= gain_small - 1e-12);
        }
    }

    #[test]
    fn text_round_trip_canonical() {
        let g = Graph::from_edge_list_text("10 20\n20 30\n30 40").unwrap();
        let pi = CommunityStructure::new(4, 2, 2, vec![vec![2, 3], vec![0, 1, 2]]).unwrap();
        let text = pi.to_text(&g);
        assert_eq!(text, "10 20 30\n30 40\n");
        let back = CommunityStructure::from_text(&g, 2, 2, &text).unwrap();
        assert_eq!(back.canonical(), pi.canonical());
    }
}
