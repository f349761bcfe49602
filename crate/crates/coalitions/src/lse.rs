//! Multi-start steepest-ascent search for stable overlapping community
//! structures.
//!
//! One start draws an initial structure, then repeatedly applies the
//! admissible move with the largest objective gain until no move clears the
//! progress floor. Moves add a node to a community, remove it from one, or swap two
//! nodes between communities; a move is admissible when the structure it
//! yields keeps every node covered, respects the per-node membership limit p,
//! leaves no community contained in another, and keeps every modified
//! community stable. Deltas are computed incrementally from the co-membership
//! pattern, never by rescoring the whole structure.
//!
//! Unstable random starts are repaired by a bootstrap phase that suspends
//! only the stability filter until the structure first becomes fully
//! feasible; a start that runs out of positive moves, or out of budget,
//! before that point is abandoned and reported.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::stability::{
    is_stable_with, structure_objective, validate_structure, CommunityStructure, STABILITY_TOL,
};
use crate::weights::WeightMatrix;

/// Hard cap on community slots: per-node membership sets are stored as
/// 128-bit masks.
pub const MAX_COMMUNITY_SLOTS: usize = 128;

/// Smallest computed delta that counts as progress. The delta formulas
/// cancel sums of similar magnitude, so a move whose true gain is exactly
/// zero can come out a few ulps positive; without a floor the ascent accepts
/// it, the mirror move comes out positive again, and the search cycles
/// between two structures forever. True nonzero gains are far larger for
/// any weight system built here (rationals with moderate denominators).
pub const PROGRESS_TOL: f64 = 1e-9;

/// How a start obtains its initial structure.
#[derive(Debug, Clone)]
pub enum StartStrategy {
    /// Each node joins one uniformly random community; empty slots are
    /// dropped. Usually unstable, so the bootstrap phase repairs it.
    RandomAssignment,
    /// First search with the membership limit forced to 1, then continue
    /// from that disjoint local optimum with the real limit.
    DisjointFirst,
    /// Disjoint constructive start: spread-out hubs seed the slots, every
    /// other node joins its strongest community, then relocation sweeps run
    /// to a fixed point (empty slots die). At the fixed point each node sits
    /// where its in-community weight is maximal, which in practice satisfies
    /// stability outright, so large instances skip the bootstrap phase that
    /// a random start rarely survives. Start seeds shuffle the assignment
    /// and sweep orders for multi-start diversity.
    SeededGrowth,
    /// Caller-supplied structure; the run degenerates to a single start
    /// since the ascent is deterministic.
    Provided(CommunityStructure),
}

#[derive(Debug, Clone)]
pub struct LseConfig {
    /// Number of independent starts (≥ 1).
    pub t_max: usize,
    pub seed: u64,
    pub start_strategy: StartStrategy,
    pub stability_tolerance: f64,
    /// Allow unstable intermediate structures until the first fully
    /// feasible one; when false, an infeasible start fails immediately.
    pub bootstrap: bool,
}

impl LseConfig {
    pub fn new(t_max: usize, seed: u64) -> Result<LseConfig> {
        if t_max == 0 {
            return Err(Error::Validation("t_max must be at least 1".into()));
        }
        Ok(LseConfig {
            t_max,
            seed,
            start_strategy: StartStrategy::RandomAssignment,
            stability_tolerance: STABILITY_TOL,
            bootstrap: true,
        })
    }
}

/// One candidate modification of a structure. Swaps are reported once, with
/// `community < other_community`. The derived order is the deterministic
/// tie-break: on equal deltas the smallest move wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MoveKind {
    Add { node: NodeId, community: usize },
    Remove { node: NodeId, community: usize },
    Swap { node: NodeId, community: usize, other_node: NodeId, other_community: usize },
}

impl MoveKind {
    fn is_swap(&self) -> bool {
        matches!(self, MoveKind::Swap { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub kind: MoveKind,
    pub delta: f64,
}

/// How a start ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartOutcome {
    /// Reached a feasible local optimum.
    Converged,
    /// Bootstrap ran out of positive moves while still infeasible.
    BootstrapStuck,
    /// Bootstrap exceeded its move budget.
    BootstrapExhausted,
    /// Initial structure infeasible and bootstrap disabled.
    InfeasibleStart,
}

/// Per-start record, one JSON line each in CLI output.
#[derive(Debug, Clone, Serialize)]
pub struct StartReport {
    pub start: usize,
    pub seed: u64,
    pub outcome: StartOutcome,
    /// Applied moves, bootstrap phase included.
    pub iterations: usize,
    pub bootstrap_moves: usize,
    pub start_objective: f64,
    /// From-scratch objective of the final structure; absent when the start
    /// never reached feasibility.
    pub end_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LseResult {
    pub structure: CommunityStructure,
    pub objective: f64,
    pub reports: Vec<StartReport>,
}

fn shared_count(pi: &CommunityStructure, i: NodeId, j: NodeId) -> usize {
    let (a, b) = (pi.membership(i), pi.membership(j));
    let (mut x, mut y, mut c) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                x += 1;
                y += 1;
            }
        }
    }
    c
}

/// Objective change of a move, from the co-membership pattern alone.
///
/// Add gains the weights to members the node shares no community with;
/// Remove loses the weights to members shared through this community only;
/// Swap combines the gains of each node in its destination with the losses
/// in its origin, skipping members of the other community (their pair status
/// does not change).
pub fn move_delta(w: &WeightMatrix, pi: &CommunityStructure, kind: &MoveKind) -> f64 {
    let cs = pi.communities();
    match *kind {
        MoveKind::Add { node: i, community: k } => {
            let mut d = 0.0;
            for &j in &cs[k] {
                if shared_count(pi, i, j) == 0 {
                    d += w.get(i, j);
                }
            }
            d
        }
        MoveKind::Remove { node: i, community: k } => {
            let mut d = 0.0;
            for &j in &cs[k] {
                if j != i && shared_count(pi, i, j) == 1 {
                    d += w.get(i, j);
                }
            }
            -d
        }
        MoveKind::Swap {
            node: i,
            community: k,
            other_node: ip,
            other_community: kp,
        } => {
            let mut t1 = 0.0;
            for &j in &cs[kp] {
                if j != ip && shared_count(pi, i, j) == 0 {
                    t1 += w.get(i, j);
                }
            }
            let mut t2 = 0.0;
            for &j in &cs[k] {
                if j != i && !pi.contains(kp, j) && shared_count(pi, i, j) == 1 {
                    t2 += w.get(i, j);
                }
            }
            let mut t3 = 0.0;
            for &j in &cs[k] {
                if j != i && shared_count(pi, ip, j) == 0 {
                    t3 += w.get(ip, j);
                }
            }
            let mut t4 = 0.0;
            for &j in &cs[kp] {
                if j != ip && !pi.contains(k, j) && shared_count(pi, ip, j) == 1 {
                    t4 += w.get(ip, j);
                }
            }
            t1 - t2 + t3 - t4
        }
    }
}

/// Structure after the move, with community indices preserved.
pub fn apply_move(pi: &CommunityStructure, kind: &MoveKind) -> Result<CommunityStructure> {
    let mut cs: Vec<Vec<NodeId>> = pi.communities().to_vec();
    match *kind {
        MoveKind::Add { node, community } => {
            if pi.contains(community, node) {
                return Err(Error::Domain(format!(
                    "node {} is already in community {}",
                    node, community
                )));
            }
            cs[community].push(node);
        }
        MoveKind::Remove { node, community } => {
            if !pi.contains(community, node) {
                return Err(Error::Domain(format!(
                    "node {} is not in community {}",
                    node, community
                )));
            }
            cs[community].retain(|&x| x != node);
        }
        MoveKind::Swap { node, community, other_node, other_community } => {
            if !pi.contains(community, node)
                || pi.contains(other_community, node)
                || !pi.contains(other_community, other_node)
                || pi.contains(community, other_node)
            {
                return Err(Error::Domain("swap endpoints do not straddle the two communities".into()));
            }
            cs[community].retain(|&x| x != node);
            cs[community].push(other_node);
            cs[other_community].retain(|&x| x != other_node);
            cs[other_community].push(node);
        }
    }
    CommunityStructure::new(pi.n(), pi.n_c(), pi.p(), cs)
}

fn sorted_insert(v: &Vec<NodeId>, x: NodeId) -> Vec<NodeId> {
    let mut out = v.clone();
    let pos = out.binary_search(&x).unwrap_err();
    out.insert(pos, x);
    out
}

fn sorted_without(v: &[NodeId], x: NodeId) -> Vec<NodeId> {
    v.iter().copied().filter(|&y| y != x).collect()
}

fn is_subset_sorted(a: &[NodeId], b: &[NodeId]) -> bool {
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

/// No inclusion in either direction between each modified community and
/// every other one (with other modifications substituted). Violations not
/// involving a modified community are ignored, so repair moves stay
/// admissible on infeasible structures.
fn inclusion_ok(cs: &[Vec<NodeId>], modified: &[(usize, &Vec<NodeId>)]) -> bool {
    for &(k, t) in modified {
        for r in 0..cs.len() {
            if r == k {
                continue;
            }
            let other: &Vec<NodeId> =
                modified.iter().find(|&&(kk, _)| kk == r).map_or(&cs[r], |&(_, m)| m);
            if is_subset_sorted(t, other) || is_subset_sorted(other, t) {
                return false;
            }
        }
    }
    true
}

/// All admissible moves with their deltas. `bootstrap` suspends the
/// stability filter; coverage, the p-limit, and non-inclusion always hold.
pub fn feasible_moves(
    w: &WeightMatrix,
    pi: &CommunityStructure,
    bootstrap: bool,
    tol: f64,
) -> Vec<Move> {
    let cs = pi.communities();
    let n = pi.n();
    let mut out = Vec::new();
    let mut push = |kind: MoveKind| {
        out.push(Move { kind, delta: move_delta(w, pi, &kind) });
    };
    for k in 0..cs.len() {
        for i in 0..n {
            if pi.contains(k, i) {
                if pi.membership(i).len() < 2 || cs[k].len() < 2 {
                    continue;
                }
                let post = sorted_without(&cs[k], i);
                if inclusion_ok(cs, &[(k, &post)]) && (bootstrap || is_stable_with(w, &post, tol))
                {
                    push(MoveKind::Remove { node: i, community: k });
                }
            } else {
                if pi.membership(i).len() >= pi.p() {
                    continue;
                }
                let post = sorted_insert(&cs[k], i);
                if inclusion_ok(cs, &[(k, &post)]) && (bootstrap || is_stable_with(w, &post, tol))
                {
                    push(MoveKind::Add { node: i, community: k });
                }
            }
        }
    }
    for k in 0..cs.len() {
        for kp in k + 1..cs.len() {
            for &i in &cs[k] {
                if pi.contains(kp, i) {
                    continue;
                }
                for &ip in &cs[kp] {
                    if pi.contains(k, ip) {
                        continue;
                    }
                    let post_k = sorted_insert(&sorted_without(&cs[k], i), ip);
                    let post_kp = sorted_insert(&sorted_without(&cs[kp], ip), i);
                    if !inclusion_ok(cs, &[(k, &post_k), (kp, &post_kp)]) {
                        continue;
                    }
                    if bootstrap
                        || (is_stable_with(w, &post_k, tol) && is_stable_with(w, &post_kp, tol))
                    {
                        push(MoveKind::Swap {
                            node: i,
                            community: k,
                            other_node: ip,
                            other_community: kp,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Move-selection rule applied to a batch of admissible moves: the best
/// Add/Remove whose delta clears [`PROGRESS_TOL`], overridden by the best
/// Swap only when the swap delta strictly exceeds max(best single delta,
/// PROGRESS_TOL). Ties go to the smallest move in [`MoveKind`] order.
pub fn pick_move(moves: &[Move]) -> Option<&Move> {
    let better = |a: &&Move, b: &&Move| {
        b.delta.total_cmp(&a.delta).then_with(|| a.kind.cmp(&b.kind))
    };
    let best_single = moves
        .iter()
        .filter(|m| !m.kind.is_swap() && m.delta > PROGRESS_TOL)
        .min_by(|a, b| better(a, b));
    let threshold = best_single.map_or(PROGRESS_TOL, |m| m.delta);
    let best_swap = moves
        .iter()
        .filter(|m| m.kind.is_swap() && m.delta > threshold)
        .min_by(|a, b| better(a, b));
    best_swap.or(best_single)
}

/// n-bit membership set over nodes.
#[derive(Clone, PartialEq, Eq)]
struct NodeMask {
    words: Vec<u64>,
}

impl NodeMask {
    fn new(n: usize) -> NodeMask {
        NodeMask { words: vec![0; n.div_ceil(64)] }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn is_subset(&self, other: &NodeMask) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }
}

/// Mutable search position: sorted member lists, bit masks for membership
/// tests, and per-slot weight sums in_sum[k][i] = Σ_{j∈S_k} W_ij kept
/// incrementally. Slots never die: admissible moves cannot empty a
/// community.
struct SearchState<'a> {
    w: &'a WeightMatrix,
    n_c: usize,
    p: usize,
    tol: f64,
    members: Vec<Vec<NodeId>>,
    masks: Vec<NodeMask>,
    node_comms: Vec<u128>,
    in_sum: Vec<Vec<f64>>,
    half_row: Vec<f64>,
    objective: f64,
}

impl<'a> SearchState<'a> {
    fn new(w: &'a WeightMatrix, pi: &CommunityStructure, p: usize, tol: f64) -> SearchState<'a> {
        let n = w.n();
        let members: Vec<Vec<NodeId>> = pi.communities().to_vec();
        let mut masks = Vec::with_capacity(members.len());
        let mut node_comms = vec![0u128; n];
        for (k, c) in members.iter().enumerate() {
            let mut mask = NodeMask::new(n);
            for &i in c {
                mask.set(i);
                node_comms[i] |= 1u128 << k;
            }
            masks.push(mask);
        }
        let in_sum = members
            .iter()
            .map(|c| {
                (0..n)
                    .map(|i| {
                        let mut s = 0.0;
                        for &j in c {
                            s += w.get(i, j);
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let half_row = (0..n).map(|i| 0.5 * w.row_sum(i)).collect();
        let objective = structure_objective(w, pi);
        SearchState {
            w,
            n_c: pi.n_c(),
            p,
            tol,
            members,
            masks,
            node_comms,
            in_sum,
            half_row,
            objective,
        }
    }

    fn to_structure(&self) -> CommunityStructure {
        CommunityStructure::new(self.w.n(), self.n_c, self.p, self.members.clone())
            .expect("search state maintains representation invariants")
    }

    fn shared(&self, i: NodeId, j: NodeId) -> u32 {
        (self.node_comms[i] & self.node_comms[j]).count_ones()
    }

    // Delta formulas mirror move_delta exactly, same member order and
    // accumulation, so both paths agree bit for bit.
    fn add_delta(&self, i: NodeId, k: usize) -> f64 {
        let mut d = 0.0;
        for &j in &self.members[k] {
            if self.shared(i, j) == 0 {
                d += self.w.get(i, j);
            }
        }
        d
    }

    fn remove_delta(&self, i: NodeId, k: usize) -> f64 {
        let mut d = 0.0;
        for &j in &self.members[k] {
            if j != i && self.shared(i, j) == 1 {
                d += self.w.get(i, j);
            }
        }
        -d
    }

    fn swap_delta(&self, i: NodeId, k: usize, ip: NodeId, kp: usize) -> f64 {
        let mut t1 = 0.0;
        for &j in &self.members[kp] {
            if j != ip && self.shared(i, j) == 0 {
                t1 += self.w.get(i, j);
            }
        }
        let mut t2 = 0.0;
        for &j in &self.members[k] {
            if j != i && !self.masks[kp].contains(j) && self.shared(i, j) == 1 {
                t2 += self.w.get(i, j);
            }
        }
        let mut t3 = 0.0;
        for &j in &self.members[k] {
            if j != i && self.shared(ip, j) == 0 {
                t3 += self.w.get(ip, j);
            }
        }
        let mut t4 = 0.0;
        for &j in &self.members[kp] {
            if j != ip && !self.masks[k].contains(j) && self.shared(ip, j) == 1 {
                t4 += self.w.get(ip, j);
            }
        }
        t1 - t2 + t3 - t4
    }

    fn stable_after_add(&self, i: NodeId, k: usize) -> bool {
        if self.in_sum[k][i] < self.half_row[i] - self.tol {
            return false;
        }
        self.members[k]
            .iter()
            .all(|&x| self.in_sum[k][x] + self.w.get(x, i) >= self.half_row[x] - self.tol)
    }

    fn stable_after_remove(&self, i: NodeId, k: usize) -> bool {
        self.members[k].iter().all(|&x| {
            x == i || self.in_sum[k][x] - self.w.get(x, i) >= self.half_row[x] - self.tol
        })
    }

    /// Stability of (S_k \ {out}) ∪ {incoming}.
    fn stable_after_replace(&self, k: usize, out: NodeId, incoming: NodeId) -> bool {
        if self.in_sum[k][incoming] - self.w.get(incoming, out) < self.half_row[incoming] - self.tol
        {
            return false;
        }
        self.members[k].iter().all(|&x| {
            x == out
                || self.in_sum[k][x] - self.w.get(x, out) + self.w.get(x, incoming)
                    >= self.half_row[x] - self.tol
        })
    }

    fn mask_inclusion_ok(&self, modified: &[(usize, &NodeMask)]) -> bool {
        for &(k, t) in modified {
            for r in 0..self.masks.len() {
                if r == k {
                    continue;
                }
                let other: &NodeMask =
                    modified.iter().find(|&&(kk, _)| kk == r).map_or(&self.masks[r], |&(_, m)| m);
                if t.is_subset(other) || other.is_subset(t) {
                    return false;
                }
            }
        }
        true
    }

    /// Inclusion and (unless in bootstrap) stability of the modified
    /// communities; coverage and the p-limit are enforced at enumeration.
    fn admissible(&self, kind: &MoveKind, bootstrap: bool) -> bool {
        match *kind {
            MoveKind::Add { node: i, community: k } => {
                let mut t = self.masks[k].clone();
                t.set(i);
                self.mask_inclusion_ok(&[(k, &t)]) && (bootstrap || self.stable_after_add(i, k))
            }
            MoveKind::Remove { node: i, community: k } => {
                let mut t = self.masks[k].clone();
                t.clear(i);
                self.mask_inclusion_ok(&[(k, &t)])
                    && (bootstrap || self.stable_after_remove(i, k))
            }
            MoveKind::Swap { node: i, community: k, other_node: ip, other_community: kp } => {
                let mut tk = self.masks[k].clone();
                tk.clear(i);
                tk.set(ip);
                let mut tkp = self.masks[kp].clone();
                tkp.clear(ip);
                tkp.set(i);
                self.mask_inclusion_ok(&[(k, &tk), (kp, &tkp)])
                    && (bootstrap
                        || (self.stable_after_replace(k, i, ip)
                            && self.stable_after_replace(kp, ip, i)))
            }
        }
    }

    /// Steepest admissible move under the Swap-precedence rule, or None at a
    /// local optimum. Candidates are screened by delta first and checked for
    /// admissibility lazily in descending delta order (ties by move order),
    /// which selects exactly what [`pick_move`] would on the full list.
    fn best_move(&self, bootstrap: bool) -> Option<(MoveKind, f64)> {
        let n = self.w.n();
        let nk = self.members.len();
        let mut singles: Vec<(f64, MoveKind)> = Vec::new();
        let mut swaps: Vec<(f64, MoveKind)> = Vec::new();
        for k in 0..nk {
            for i in 0..n {
                if self.masks[k].contains(i) {
                    if self.node_comms[i].count_ones() >= 2 && self.members[k].len() >= 2 {
                        let d = self.remove_delta(i, k);
                        if d > PROGRESS_TOL {
                            singles.push((d, MoveKind::Remove { node: i, community: k }));
                        }
                    }
                } else if (self.node_comms[i].count_ones() as usize) < self.p {
                    let d = self.add_delta(i, k);
                    if d > PROGRESS_TOL {
                        singles.push((d, MoveKind::Add { node: i, community: k }));
                    }
                }
            }
        }
        for k in 0..nk {
            for kp in k + 1..nk {
                for &i in &self.members[k] {
                    if self.masks[kp].contains(i) {
                        continue;
                    }
                    for &ip in &self.members[kp] {
                        if self.masks[k].contains(ip) {
                            continue;
                        }
                        let d = self.swap_delta(i, k, ip, kp);
                        if d > PROGRESS_TOL {
                            swaps.push((
                                d,
                                MoveKind::Swap {
                                    node: i,
                                    community: k,
                                    other_node: ip,
                                    other_community: kp,
                                },
                            ));
                        }
                    }
                }
            }
        }
        let order = |a: &(f64, MoveKind), b: &(f64, MoveKind)| {
            b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
        };
        singles.sort_by(order);
        swaps.sort_by(order);
        let best_single = singles.iter().find(|(_, kind)| self.admissible(kind, bootstrap));
        let threshold = best_single.map_or(PROGRESS_TOL, |&(d, _)| d);
        let best_swap = swaps
            .iter()
            .take_while(|&&(d, _)| d > threshold)
            .find(|(_, kind)| self.admissible(kind, bootstrap));
        best_swap.or(best_single).map(|&(d, kind)| (kind, d))
    }

    fn apply(&mut self, kind: &MoveKind, delta: f64) {
        match *kind {
            MoveKind::Add { node: i, community: k } => self.insert(i, k),
            MoveKind::Remove { node: i, community: k } => self.delete(i, k),
            MoveKind::Swap { node: i, community: k, other_node: ip, other_community: kp } => {
                self.delete(i, k);
                self.insert(ip, k);
                self.delete(ip, kp);
                self.insert(i, kp);
            }
        }
        self.objective += delta;
    }

    fn insert(&mut self, i: NodeId, k: usize) {
        let pos = self.members[k].binary_search(&i).unwrap_err();
        self.members[k].insert(pos, i);
        self.masks[k].set(i);
        self.node_comms[i] |= 1u128 << k;
        for x in 0..self.w.n() {
            self.in_sum[k][x] += self.w.get(x, i);
        }
    }

    fn delete(&mut self, i: NodeId, k: usize) {
        let pos = self.members[k].binary_search(&i).expect("member present");
        self.members[k].remove(pos);
        self.masks[k].clear(i);
        self.node_comms[i] &= !(1u128 << k);
        for x in 0..self.w.n() {
            self.in_sum[k][x] -= self.w.get(x, i);
        }
    }

    /// Coverage, p-limit, non-inclusion, and stability of every community.
    fn fully_feasible(&self) -> bool {
        if self.node_comms.iter().any(|&m| m == 0 || m.count_ones() as usize > self.p) {
            return false;
        }
        for k in 0..self.masks.len() {
            for r in 0..self.masks.len() {
                if k != r && self.masks[k].is_subset(&self.masks[r]) {
                    return false;
                }
            }
        }
        self.members.iter().enumerate().all(|(k, c)| {
            c.iter().all(|&x| self.in_sum[k][x] >= self.half_row[x] - self.tol)
        })
    }
}

struct AscentEnd {
    outcome: StartOutcome,
    iterations: usize,
    bootstrap_moves: usize,
}

/// Runs steepest ascent to a local optimum, bootstrapping through an
/// infeasible start when allowed. Budget: 10·n bootstrap moves.
fn ascend(state: &mut SearchState<'_>, allow_bootstrap: bool) -> AscentEnd {
    let budget = 10 * state.w.n();
    let mut bootstrap_active = !state.fully_feasible();
    let mut iterations = 0;
    let mut bootstrap_moves = 0;
    if bootstrap_active && !allow_bootstrap {
        return AscentEnd { outcome: StartOutcome::InfeasibleStart, iterations, bootstrap_moves };
    }
    loop {
        match state.best_move(bootstrap_active) {
            None => {
                let outcome = if bootstrap_active {
                    StartOutcome::BootstrapStuck
                } else {
                    StartOutcome::Converged
                };
                return AscentEnd { outcome, iterations, bootstrap_moves };
            }
            Some((kind, delta)) => {
                state.apply(&kind, delta);
                iterations += 1;
                if bootstrap_active {
                    bootstrap_moves += 1;
                    if state.fully_feasible() {
                        bootstrap_active = false;
                    } else if bootstrap_moves >= budget {
                        return AscentEnd {
                            outcome: StartOutcome::BootstrapExhausted,
                            iterations,
                            bootstrap_moves,
                        };
                    }
                }
            }
        }
    }
}

fn random_partition(n: usize, n_c: usize, p: usize, seed: u64) -> Result<CommunityStructure> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut slots: Vec<Vec<NodeId>> = vec![Vec::new(); n_c];
    for i in 0..n {
        slots[rng.gen_range(0..n_c)].push(i);
    }
    slots.retain(|c| !c.is_empty());
    CommunityStructure::new(n, n_c, p, slots)
}

fn seeded_growth(
    g: &Graph,
    w: &WeightMatrix,
    n_c: usize,
    p: usize,
    seed: u64,
) -> Result<CommunityStructure> {
    let n = g.node_count();
    let n_c = n_c.min(n);
    let mut rng = StdRng::seed_from_u64(seed);

    // seeds: highest-degree nodes first, preferring ones not adjacent to an
    // earlier seed so the slots start in different regions
    let mut by_degree: Vec<NodeId> = (0..n).collect();
    by_degree.sort_by_key(|&i| (std::cmp::Reverse(g.degree(i)), i));
    let mut is_seed = vec![false; n];
    let mut seeds: Vec<NodeId> = Vec::new();
    for &i in &by_degree {
        if seeds.len() == n_c {
            break;
        }
        if seeds.iter().all(|&s| !g.has_edge(s, i)) {
            seeds.push(i);
            is_seed[i] = true;
        }
    }
    for &i in &by_degree {
        if seeds.len() == n_c {
            break;
        }
        if !is_seed[i] {
            seeds.push(i);
            is_seed[i] = true;
        }
    }

    // tot[i][k]: weight between node i and the current members of slot k,
    // kept incrementally so each candidate check is O(1)
    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut tot = vec![vec![0.0f64; n_c]; n];
    let mut occupancy = vec![0usize; n_c];
    let mut place = |i: NodeId,
                     k: usize,
                     assign: &mut Vec<Option<usize>>,
                     tot: &mut Vec<Vec<f64>>,
                     occupancy: &mut Vec<usize>| {
        if let Some(old) = assign[i] {
            occupancy[old] -= 1;
            for j in 0..n {
                tot[j][old] -= w.get(j, i);
            }
        }
        assign[i] = Some(k);
        occupancy[k] += 1;
        for j in 0..n {
            tot[j][k] += w.get(j, i);
        }
    };
    for (k, &s) in seeds.iter().enumerate() {
        place(s, k, &mut assign, &mut tot, &mut occupancy);
    }
    let mut rest: Vec<NodeId> = (0..n).filter(|&i| !is_seed[i]).collect();
    rest.shuffle(&mut rng);
    for &i in &rest {
        let k = (0..n_c)
            .max_by(|&a, &b| tot[i][a].total_cmp(&tot[i][b]))
            .expect("n_c >= 1");
        place(i, k, &mut assign, &mut tot, &mut occupancy);
    }

    // relocation sweeps: every node (seeds included) moves to its strongest
    // slot; each relocation strictly raises the disjoint objective, so the
    // sweep reaches a fixed point. Slots may empty out; n_c is a cap.
    let mut order: Vec<NodeId> = (0..n).collect();
    for _ in 0..RELOCATION_SWEEP_CAP {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &i in &order {
            let cur = assign[i].expect("all nodes placed");
            if occupancy[cur] == 1 {
                // a lone node defines its slot; moving it just renames
                continue;
            }
            let k = (0..n_c)
                .max_by(|&a, &b| tot[i][a].total_cmp(&tot[i][b]))
                .expect("n_c >= 1");
            if k != cur && tot[i][k] > tot[i][cur] {
                place(i, k, &mut assign, &mut tot, &mut occupancy);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut slots: Vec<Vec<NodeId>> = vec![Vec::new(); n_c];
    for (i, k) in assign.iter().enumerate() {
        slots[k.expect("all nodes placed")].push(i);
    }
    slots.retain(|c| !c.is_empty());
    CommunityStructure::new(n, n_c, p, slots)
}

/// Relocation passes before the growth start is handed to the ascent; the
/// fixed point almost always arrives within a handful of sweeps.
const RELOCATION_SWEEP_CAP: usize = 50;

/// Initial structure for one start. `RandomAssignment` draws a partition
/// (possibly unstable; the caller's bootstrap repairs it). `DisjointFirst`
/// ascends from such a partition with the membership limit forced to 1 and
/// returns that disjoint local optimum; it fails when the disjoint phase
/// cannot reach feasibility. `SeededGrowth` builds a hub-seeded partition
/// refined by relocation sweeps. `Provided` echoes the caller's structure
/// rebuilt for this n_c and p.
pub fn initial_structure(
    g: &Graph,
    w: &WeightMatrix,
    n_c: usize,
    p: usize,
    strategy: &StartStrategy,
    seed: u64,
) -> Result<CommunityStructure> {
    check_inputs(w, g, n_c, p)?;
    match strategy {
        StartStrategy::RandomAssignment => random_partition(g.node_count(), n_c, p, seed),
        StartStrategy::SeededGrowth => seeded_growth(g, w, n_c, p, seed),
        StartStrategy::DisjointFirst => {
            let pi = random_partition(g.node_count(), n_c, 1, seed)?;
            let mut state = SearchState::new(w, &pi, 1, STABILITY_TOL);
            let end = ascend(&mut state, true);
            if end.outcome != StartOutcome::Converged {
                return Err(Error::Search {
                    diagnostics: format!(
                        "disjoint phase failed: {:?} after {} moves",
                        end.outcome, end.iterations
                    ),
                });
            }
            CommunityStructure::new(g.node_count(), n_c, p, state.members)
        }
        StartStrategy::Provided(pi) => {
            if pi.n() != g.node_count() {
                return Err(Error::Validation(format!(
                    "provided structure covers {} nodes but the graph has {}",
                    pi.n(),
                    g.node_count()
                )));
            }
            CommunityStructure::new(g.node_count(), n_c, p, pi.communities().to_vec())
        }
    }
}

fn check_inputs(w: &WeightMatrix, g: &Graph, n_c: usize, p: usize) -> Result<()> {
    if g.node_count() == 0 {
        return Err(Error::Validation("graph has no nodes".into()));
    }
    if w.n() != g.node_count() || w.source_graph_fingerprint() != g.fingerprint() {
        return Err(Error::Validation("weight matrix was not computed from this graph".into()));
    }
    if n_c == 0 || p == 0 {
        return Err(Error::Validation("n_c and p must be at least 1".into()));
    }
    if n_c > MAX_COMMUNITY_SLOTS {
        return Err(Error::Validation(format!(
            "n_c = {} exceeds the supported maximum of {}",
            n_c, MAX_COMMUNITY_SLOTS
        )));
    }
    Ok(())
}

struct StartResult {
    report: StartReport,
    structure: Option<CommunityStructure>,
}

fn run_one_start(
    w: &WeightMatrix,
    g: &Graph,
    n_c: usize,
    p: usize,
    cfg: &LseConfig,
    start: usize,
) -> Result<StartResult> {
    let seed = cfg.seed.wrapping_add(start as u64);
    let fail = |outcome: StartOutcome, end: &AscentEnd, start_objective: f64| StartResult {
        report: StartReport {
            start,
            seed,
            outcome,
            iterations: end.iterations,
            bootstrap_moves: end.bootstrap_moves,
            start_objective,
            end_objective: None,
        },
        structure: None,
    };
    match &cfg.start_strategy {
        StartStrategy::DisjointFirst => {
            // disjoint phase, then continue from its optimum with the real p
            let pi0 = random_partition(g.node_count(), n_c, 1, seed)?;
            let start_objective = structure_objective(w, &pi0);
            let mut state = SearchState::new(w, &pi0, 1, cfg.stability_tolerance);
            let phase_a = ascend(&mut state, cfg.bootstrap);
            if phase_a.outcome != StartOutcome::Converged {
                return Ok(fail(phase_a.outcome, &phase_a, start_objective));
            }
            let pi1 =
                CommunityStructure::new(g.node_count(), n_c, p, state.members.clone())?;
            let mut state = SearchState::new(w, &pi1, p, cfg.stability_tolerance);
            let phase_b = ascend(&mut state, cfg.bootstrap);
            let structure = state.to_structure();
            let end_objective = structure_objective(w, &structure);
            Ok(StartResult {
                report: StartReport {
                    start,
                    seed,
                    outcome: phase_b.outcome,
                    iterations: phase_a.iterations + phase_b.iterations,
                    bootstrap_moves: phase_a.bootstrap_moves + phase_b.bootstrap_moves,
                    start_objective,
                    end_objective: Some(end_objective),
                },
                structure: Some(structure),
            })
        }
        strategy => {
            let pi0 = match strategy {
                StartStrategy::RandomAssignment => {
                    random_partition(g.node_count(), n_c, p, seed)?
                }
                StartStrategy::SeededGrowth => seeded_growth(g, w, n_c, p, seed)?,
                StartStrategy::Provided(pi) => {
                    CommunityStructure::new(g.node_count(), n_c, p, pi.communities().to_vec())?
                }
                StartStrategy::DisjointFirst => unreachable!("handled above"),
            };
            let start_objective = structure_objective(w, &pi0);
            let mut state = SearchState::new(w, &pi0, p, cfg.stability_tolerance);
            let end = ascend(&mut state, cfg.bootstrap);
            if end.outcome != StartOutcome::Converged {
                return Ok(fail(end.outcome, &end, start_objective));
            }
            let structure = state.to_structure();
            let end_objective = structure_objective(w, &structure);
            debug_assert!((state.objective - end_objective).abs() < 1e-6);
            Ok(StartResult {
                report: StartReport {
                    start,
                    seed,
                    outcome: StartOutcome::Converged,
                    iterations: end.iterations,
                    bootstrap_moves: end.bootstrap_moves,
                    start_objective,
                    end_objective: Some(end_objective),
                },
                structure: Some(structure),
            })
        }
    }
}

/// Multi-start search. Starts are independent and run in parallel; the
/// result is the feasible local optimum with the largest objective, ties
/// resolved toward the earliest start. Fails only when every start fails,
/// with per-start outcomes in the error.
pub fn run_lse(
    w: &WeightMatrix,
    g: &Graph,
    n_c: usize,
    p: usize,
    cfg: &LseConfig,
) -> Result<LseResult> {
    check_inputs(w, g, n_c, p)?;
    if cfg.t_max == 0 {
        return Err(Error::Validation("t_max must be at least 1".into()));
    }
    // a deterministic ascent from a fixed start cannot differ across starts
    let t_max = match cfg.start_strategy {
        StartStrategy::Provided(_) => 1,
        _ => cfg.t_max,
    };
    let starts: Result<Vec<StartResult>> = (0..t_max)
        .into_par_iter()
        .map(|t| run_one_start(w, g, n_c, p, cfg, t))
        .collect();
    let starts = starts?;
    let mut best: Option<(f64, usize)> = None;
    for (t, s) in starts.iter().enumerate() {
        if let Some(obj) = s.report.end_objective {
            if best.map_or(true, |(b, _)| obj > b) {
                best = Some((obj, t));
            }
        }
    }
    let reports: Vec<StartReport> = starts.iter().map(|s| s.report.clone()).collect();
    match best {
        Some((objective, t)) => {
            let structure = starts[t].structure.clone().expect("winning start kept its structure");
            debug_assert!(validate_structure(w, &structure).is_empty());
            Ok(LseResult { structure, objective, reports })
        }
        None => {
            let mut lines = String::new();
            for r in &reports {
                lines.push_str(&format!(
                    "start {} (seed {}): {:?} after {} moves, {} in bootstrap\n",
                    r.start, r.seed, r.outcome, r.iterations, r.bootstrap_moves
                ));
            }
            Err(Error::Search {
                diagnostics: format!("all {} starts failed to reach feasibility\n{}", t_max, lines),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{approx_modular_weights, exact_modular_weights, raw_weights};

    fn two_triangles() -> (Graph, WeightMatrix) {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 0\n3 4\n4 5\n5 3").unwrap();
        let w = raw_weights(&g);
        (g, w)
    }

    fn random_graph(n: usize, m_target: usize, seed: u64) -> Graph {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut edges = std::collections::BTreeSet::new();
        while edges.len() < m_target {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        Graph::from_edges(n, edges.into_iter()).unwrap()
    }

    fn random_structure(n: usize, n_c: usize, p: usize, seed: u64) -> CommunityStructure {
        let mut rng = StdRng::seed_from_u64(seed);
        loop {
            let mut slots: Vec<Vec<NodeId>> = vec![Vec::new(); n_c];
            for i in 0..n {
                slots[rng.gen_range(0..n_c)].push(i);
                if p > 1 && rng.gen_bool(0.3) {
                    let extra = rng.gen_range(0..n_c);
                    if !slots[extra].contains(&i) {
                        slots[extra].push(i);
                    }
                }
            }
            slots.retain(|c| !c.is_empty());
            if slots.len() >= 2 {
                return CommunityStructure::new(n, n_c, p, slots).unwrap();
            }
        }
    }

    #[test]
    fn delta_matches_full_recompute() {
        let g = random_graph(8, 14, 7);
        let w = raw_weights(&g);
        let wp = approx_modular_weights(&g, &w).unwrap();
        for seed in 0..20 {
            let pi = random_structure(8, 3, 2, seed);
            for mv in feasible_moves(&wp, &pi, true, STABILITY_TOL) {
                let after = apply_move(&pi, &mv.kind).unwrap();
                let recomputed =
                    structure_objective(&wp, &after) - structure_objective(&wp, &pi);
                assert!(
                    (mv.delta - recomputed).abs() < 1e-9,
                    "{:?}: incremental {} vs recomputed {}",
                    mv.kind,
                    mv.delta,
                    recomputed
                );
            }
        }
    }

    #[test]
    fn remove_then_add_restores_objective() {
        let g = random_graph(7, 12, 11);
        let w = raw_weights(&g);
        let pi = random_structure(7, 3, 2, 3);
        for k in 0..pi.communities().len() {
            for &i in &pi.communities()[k].clone() {
                if pi.membership(i).len() < 2 || pi.communities()[k].len() < 2 {
                    continue;
                }
                let rm = MoveKind::Remove { node: i, community: k };
                let d1 = move_delta(&w, &pi, &rm);
                let mid = apply_move(&pi, &rm).unwrap();
                let back = MoveKind::Add { node: i, community: k };
                let d2 = move_delta(&w, &mid, &back);
                assert!((d1 + d2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grand_coalition_offers_no_single_moves() {
        let (g, w) = two_triangles();
        let pi = CommunityStructure::new(g.node_count(), 1, 1, vec![(0..6).collect()]).unwrap();
        let moves = feasible_moves(&w, &pi, false, STABILITY_TOL);
        assert!(moves.is_empty());
    }

    #[test]
    fn swap_endpoints_straddle() {
        let g = random_graph(8, 13, 5);
        let w = raw_weights(&g);
        let pi = random_structure(8, 3, 2, 9);
        for mv in feasible_moves(&w, &pi, true, STABILITY_TOL) {
            if let MoveKind::Swap { node, community, other_node, other_community } = mv.kind {
                assert!(pi.contains(community, node) && !pi.contains(other_community, node));
                assert!(
                    pi.contains(other_community, other_node) && !pi.contains(community, other_node)
                );
                assert!(community < other_community);
            }
        }
    }

    #[test]
    fn swap_needs_strict_advantage() {
        let single = Move { kind: MoveKind::Add { node: 0, community: 0 }, delta: 2.0 };
        let swap_eq = Move {
            kind: MoveKind::Swap { node: 1, community: 0, other_node: 2, other_community: 1 },
            delta: 2.0,
        };
        let swap_gt = Move {
            kind: MoveKind::Swap { node: 1, community: 0, other_node: 2, other_community: 1 },
            delta: 2.5,
        };
        assert_eq!(pick_move(&[single, swap_eq]).unwrap().kind, single.kind);
        assert_eq!(pick_move(&[single, swap_gt]).unwrap().kind, swap_gt.kind);
        let lone_swap = Move {
            kind: MoveKind::Swap { node: 1, community: 0, other_node: 2, other_community: 1 },
            delta: 1e-6,
        };
        assert_eq!(pick_move(&[lone_swap]).unwrap().kind, lone_swap.kind);
        assert!(pick_move(&[Move { kind: single.kind, delta: -1.0 }]).is_none());
    }

    // A rounding residue must never count as progress: a zero-gain swap whose
    // computed delta is a few ulps positive would otherwise alternate with its
    // mirror image and the ascent would never terminate.
    #[test]
    fn noise_deltas_are_not_progress() {
        let noise = Move {
            kind: MoveKind::Swap { node: 1, community: 0, other_node: 2, other_community: 1 },
            delta: 2.776e-17,
        };
        assert!(pick_move(&[noise]).is_none());
        let tiny_single = Move { kind: MoveKind::Add { node: 0, community: 0 }, delta: 1e-10 };
        assert!(pick_move(&[tiny_single]).is_none());
        let real = Move { kind: MoveKind::Add { node: 0, community: 0 }, delta: 1e-8 };
        assert_eq!(pick_move(&[real, noise, tiny_single]).unwrap().kind, real.kind);
    }

    #[test]
    fn fast_state_agrees_with_reference_moves() {
        for seed in 0..30u64 {
            let g = random_graph(9, 16, 100 + seed);
            let raw = raw_weights(&g);
            let w = approx_modular_weights(&g, &raw).unwrap();
            let mut pi = random_structure(9, 3, 2, 200 + seed);
            for bootstrap in [true, false] {
                let mut steps = 0;
                loop {
                    let state = SearchState::new(&w, &pi, pi.p(), STABILITY_TOL);
                    let fast = state.best_move(bootstrap);
                    let moves = feasible_moves(&w, &pi, bootstrap, STABILITY_TOL);
                    let slow = pick_move(&moves);
                    match (fast, slow) {
                        (None, None) => break,
                        (Some((kind, delta)), Some(m)) => {
                            assert_eq!(kind, m.kind, "seed {} bootstrap {}", seed, bootstrap);
                            assert!((delta - m.delta).abs() < 1e-12);
                            pi = apply_move(&pi, &kind).unwrap();
                        }
                        (f, s) => panic!("fast {:?} vs slow {:?}", f, s.map(|m| m.kind)),
                    }
                    steps += 1;
                    assert!(steps < 500, "no convergence");
                }
                if !bootstrap {
                    break;
                }
            }
        }
    }

    #[test]
    fn finds_planted_triangles() {
        // cross-triangle pairs carry strictly negative centered weight, so
        // the planted split is the unique optimum
        let (g, _) = two_triangles();
        let w = exact_modular_weights(&g).unwrap();
        let cfg = LseConfig::new(8, 42).unwrap();
        let res = run_lse(&w, &g, 2, 1, &cfg).unwrap();
        let canon = res.structure.canonical();
        assert_eq!(canon.communities(), &[vec![0, 1, 2], vec![3, 4, 5]]);
        let planted = structure_objective(&w, &canon);
        assert!((res.objective - planted).abs() < 1e-9);
        assert!(res.objective > 0.0);
        assert!(validate_structure(&w, &res.structure).is_empty());
    }

    #[test]
    fn deterministic_across_runs() {
        let g = random_graph(12, 24, 77);
        let raw = raw_weights(&g);
        let w = approx_modular_weights(&g, &raw).unwrap();
        let cfg = LseConfig::new(6, 5).unwrap();
        let a = run_lse(&w, &g, 3, 2, &cfg).unwrap();
        let b = run_lse(&w, &g, 3, 2, &cfg).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.structure, b.structure);
        let a_states: Vec<_> = a.reports.iter().map(|r| (r.outcome, r.iterations)).collect();
        let b_states: Vec<_> = b.reports.iter().map(|r| (r.outcome, r.iterations)).collect();
        assert_eq!(a_states, b_states);
    }

    #[test]
    fn provided_start_runs_once() {
        let (g, w) = two_triangles();
        let pi =
            CommunityStructure::new(6, 2, 1, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let mut cfg = LseConfig::new(10, 0).unwrap();
        cfg.start_strategy = StartStrategy::Provided(pi.clone());
        let res = run_lse(&w, &g, 2, 1, &cfg).unwrap();
        assert_eq!(res.reports.len(), 1);
        assert_eq!(res.structure.canonical(), pi.canonical());
    }

    #[test]
    fn rejects_mismatched_weights() {
        let (g, _) = two_triangles();
        let other = Graph::from_edge_list_text("0 1\n1 2\n2 0\n3 4\n4 5\n5 3\n0 3").unwrap();
        let w = raw_weights(&other);
        let cfg = LseConfig::new(1, 0).unwrap();
        assert!(matches!(run_lse(&w, &g, 2, 1, &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn objective_never_decreases_after_feasibility() {
        let g = random_graph(10, 20, 31);
        let raw = raw_weights(&g);
        let w = approx_modular_weights(&g, &raw).unwrap();
        let pi = random_partition(10, 3, 2, 4).unwrap();
        let mut state = SearchState::new(&w, &pi, 2, STABILITY_TOL);
        let mut feasible = state.fully_feasible();
        let mut last = state.objective;
        while let Some((kind, delta)) = state.best_move(!feasible) {
            state.apply(&kind, delta);
            if feasible {
                assert!(state.objective >= last - 1e-12);
            }
            if !feasible && state.fully_feasible() {
                feasible = true;
            }
            last = state.objective;
        }
        let recomputed = structure_objective(&w, &state.to_structure());
        assert!((state.objective - recomputed).abs() < 1e-6);
    }
}
