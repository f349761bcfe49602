//! Integer-programming formulations of the community detection problem,
//! LP-format export for external solvers, solution import, and an exact
//! brute-force optimizer for tiny instances.
//!
//! Two model families share the binary membership variables x_ik and the
//! co-membership products z_ijk: the raw-weight model maximizes the summed
//! member payoffs per community (counting a pair once per shared community),
//! the modular models maximize the weight over pairs sharing at least one
//! community (y_ij counts each pair once). Only x is integer; z, h, and y
//! relax to [0,1] because the x constraints force them integral.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::stability::{
    validate_structure, CommunityStructure, Violation, STABILITY_TOL,
};
use crate::weights::{WeightMatrix, WeightVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Raw weights, per-community payoff objective, h-variable non-inclusion.
    FShJk,
    /// Exact modular weights, pair-once objective with activated stability.
    FStarShMod,
    /// Same model on the approximate modular weights.
    FPrimeShMod,
}

impl Formulation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Formulation::FShJk => "F_Sh-JK",
            Formulation::FStarShMod => "F*_Sh-Mod",
            Formulation::FPrimeShMod => "F'_Sh-Mod",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    UnitInterval,
}

/// What a decision variable stands for; indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarMeaning {
    /// Node i belongs to community k.
    X { i: NodeId, k: usize },
    /// Nodes i < j both belong to community k.
    Z { i: NodeId, j: NodeId, k: usize },
    /// Node i belongs to community r but not to community k (k < r).
    H { i: NodeId, k: usize, r: usize },
    /// Nodes i < j share at least one community.
    Y { i: NodeId, j: NodeId },
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub meaning: VarMeaning,
}

#[derive(Debug, Clone, Copy)]
pub struct LinTerm {
    pub coeff: f64,
    pub var: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Ge,
    Le,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<LinTerm>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub formulation: Formulation,
    pub n: usize,
    pub n_c: usize,
    /// Membership limit; absent in the raw-weight formulation.
    pub p: Option<usize>,
    variables: Vec<Variable>,
    var_index: HashMap<String, usize>,
    constraints: Vec<Constraint>,
    objective: Vec<LinTerm>,
}

impl MilpModel {
    fn new(formulation: Formulation, n: usize, n_c: usize, p: Option<usize>) -> MilpModel {
        MilpModel {
            formulation,
            n,
            n_c,
            p,
            variables: Vec::new(),
            var_index: HashMap::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
        }
    }

    fn add_var(&mut self, kind: VarKind, meaning: VarMeaning) -> usize {
        let name = match meaning {
            VarMeaning::X { i, k } => format!("x_{}_{}", i, k),
            VarMeaning::Z { i, j, k } => format!("z_{}_{}_{}", i, j, k),
            VarMeaning::H { i, k, r } => format!("h_{}_{}_{}", i, k, r),
            VarMeaning::Y { i, j } => format!("y_{}_{}", i, j),
        };
        let idx = self.variables.len();
        self.var_index.insert(name.clone(), idx);
        self.variables.push(Variable { name, kind, meaning });
        idx
    }

    fn add_constraint(&mut self, name: String, terms: Vec<LinTerm>, sense: Sense, rhs: f64) {
        debug_assert!(terms.iter().all(|t| t.var < self.variables.len()));
        self.constraints.push(Constraint { name, terms, sense, rhs });
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[LinTerm] {
        &self.objective
    }

    pub fn variable_named(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    fn x(&self, i: NodeId, k: usize) -> usize {
        // x-variables are created first, i-major
        i * self.n_c + k
    }

    /// Value a structure induces on a variable: x from membership, z and h
    /// as their defining products, y as shared membership. Community index
    /// k beyond the structure's community count reads as empty.
    pub fn induced_value(&self, pi: &CommunityStructure, meaning: VarMeaning) -> f64 {
        let has = |k: usize, i: NodeId| k < pi.communities().len() && pi.contains(k, i);
        match meaning {
            VarMeaning::X { i, k } => has(k, i) as u8 as f64,
            VarMeaning::Z { i, j, k } => (has(k, i) && has(k, j)) as u8 as f64,
            VarMeaning::H { i, k, r } => (has(r, i) && !has(k, i)) as u8 as f64,
            VarMeaning::Y { i, j } => pi.share_community(i, j) as u8 as f64,
        }
    }

    /// Objective evaluated on the assignment a structure induces.
    pub fn objective_for_structure(&self, pi: &CommunityStructure) -> f64 {
        self.objective
            .iter()
            .map(|t| t.coeff * self.induced_value(pi, self.variables[t.var].meaning))
            .sum()
    }
}

fn check_small(n_c: usize) -> Result<()> {
    if n_c < 1 {
        return Err(Error::Domain("n_c must be at least 1".into()));
    }
    Ok(())
}

/// Raw-weight model: maximize Σ_k Σ_{i<j} W_ij z_ijk subject to
/// z-linearization (emitted only where W_ij ≠ 0), per-member stability,
/// non-inclusion through h, decreasing community sizes, and coverage.
pub fn build_f_sh_jk(w: &WeightMatrix, n_c: usize) -> Result<MilpModel> {
    check_small(n_c)?;
    if w.variant() != WeightVariant::Raw {
        return Err(Error::Validation(format!(
            "this formulation expects raw weights, got {}",
            w.variant().as_str()
        )));
    }
    let n = w.n();
    let mut m = MilpModel::new(Formulation::FShJk, n, n_c, None);
    for i in 0..n {
        for k in 0..n_c {
            m.add_var(VarKind::Binary, VarMeaning::X { i, k });
        }
    }
    let mut z = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n_c {
                z.insert((i, j, k), m.add_var(VarKind::UnitInterval, VarMeaning::Z { i, j, k }));
            }
        }
    }
    let mut h = HashMap::new();
    for i in 0..n {
        for k in 0..n_c {
            for r in k + 1..n_c {
                h.insert((i, k, r), m.add_var(VarKind::UnitInterval, VarMeaning::H { i, k, r }));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if w.get(i, j) == 0.0 {
                continue;
            }
            for k in 0..n_c {
                let zv = z[&(i, j, k)];
                emit_z_linearization(&mut m, i, j, k, zv);
            }
        }
    }
    for i in 0..n {
        for k in 0..n_c {
            m.add_constraint(
                format!("stab_{}_{}", i, k),
                stability_terms(&m, w, i, k, None),
                Sense::Ge,
                0.0,
            );
        }
    }
    for k in 0..n_c {
        for r in k + 1..n_c {
            for i in 0..n {
                let mut terms: Vec<LinTerm> =
                    (0..n).map(|j| LinTerm { coeff: 1.0, var: h[&(j, k, r)] }).collect();
                terms.push(LinTerm { coeff: -1.0, var: m.x(i, r) });
                m.add_constraint(format!("noincl_{}_{}_{}", k, r, i), terms, Sense::Ge, 0.0);
            }
        }
    }
    emit_order_and_cover(&mut m);
    for i in 0..n {
        for k in 0..n_c {
            for r in k + 1..n_c {
                let hv = h[&(i, k, r)];
                let (xik, xir) = (m.x(i, k), m.x(i, r));
                m.add_constraint(
                    format!("h_ub1_{}_{}_{}", i, k, r),
                    vec![LinTerm { coeff: 1.0, var: hv }, LinTerm { coeff: 1.0, var: xik }],
                    Sense::Le,
                    1.0,
                );
                m.add_constraint(
                    format!("h_ub2_{}_{}_{}", i, k, r),
                    vec![LinTerm { coeff: 1.0, var: hv }, LinTerm { coeff: -1.0, var: xir }],
                    Sense::Le,
                    0.0,
                );
                m.add_constraint(
                    format!("h_lb_{}_{}_{}", i, k, r),
                    vec![
                        LinTerm { coeff: 1.0, var: xir },
                        LinTerm { coeff: -1.0, var: xik },
                        LinTerm { coeff: -1.0, var: hv },
                    ],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let coeff = w.get(i, j);
            if coeff != 0.0 {
                for k in 0..n_c {
                    m.objective.push(LinTerm { coeff, var: z[&(i, j, k)] });
                }
            }
        }
    }
    Ok(m)
}

/// Modular model: maximize Σ_{i<j} W_ij y_ij with stability constraints that
/// deactivate for non-members (the right side falls back to the node's
/// negative-weight sum, a valid lower bound of any partial row sum), the
/// membership limit p, full z-linearization, y bracketing, decreasing
/// community sizes, and coverage.
pub fn build_f_sh_mod(w: &WeightMatrix, n_c: usize, p: usize) -> Result<MilpModel> {
    check_small(n_c)?;
    if p < 1 {
        return Err(Error::Domain("p must be at least 1".into()));
    }
    let formulation = match w.variant() {
        WeightVariant::ExactModular => Formulation::FStarShMod,
        WeightVariant::ApproxModular => Formulation::FPrimeShMod,
        WeightVariant::Raw => {
            return Err(Error::Validation(
                "this formulation expects modular weights, got raw".into(),
            ))
        }
    };
    let n = w.n();
    let mut m = MilpModel::new(formulation, n, n_c, Some(p));
    for i in 0..n {
        for k in 0..n_c {
            m.add_var(VarKind::Binary, VarMeaning::X { i, k });
        }
    }
    let mut z = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n_c {
                z.insert((i, j, k), m.add_var(VarKind::UnitInterval, VarMeaning::Z { i, j, k }));
            }
        }
    }
    let mut y = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            y.insert((i, j), m.add_var(VarKind::UnitInterval, VarMeaning::Y { i, j }));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n_c {
                let zv = z[&(i, j, k)];
                emit_z_linearization(&mut m, i, j, k, zv);
            }
        }
    }
    emit_order_and_cover(&mut m);
    for i in 0..n {
        let neg_sum: f64 = (0..n).map(|j| w.get(i, j)).filter(|&v| v < 0.0).sum();
        for k in 0..n_c {
            m.add_constraint(
                format!("stab_{}_{}", i, k),
                stability_terms(&m, w, i, k, Some(neg_sum)),
                Sense::Ge,
                neg_sum,
            );
        }
    }
    for i in 0..n {
        let terms = (0..n_c).map(|k| LinTerm { coeff: 1.0, var: m.x(i, k) }).collect();
        m.add_constraint(format!("plim_{}", i), terms, Sense::Le, p as f64);
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n_c {
                m.add_constraint(
                    format!("y_lb_{}_{}_{}", i, j, k),
                    vec![
                        LinTerm { coeff: 1.0, var: y[&(i, j)] },
                        LinTerm { coeff: -1.0, var: m.x(i, k) },
                        LinTerm { coeff: -1.0, var: m.x(j, k) },
                    ],
                    Sense::Ge,
                    -1.0,
                );
            }
            let mut terms = vec![LinTerm { coeff: 1.0, var: y[&(i, j)] }];
            for k in 0..n_c {
                terms.push(LinTerm { coeff: -1.0, var: z[&(i, j, k)] });
            }
            m.add_constraint(format!("y_ub_{}_{}", i, j), terms, Sense::Le, 0.0);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let coeff = w.get(i, j);
            if coeff != 0.0 {
                m.objective.push(LinTerm { coeff, var: y[&(i, j)] });
            }
        }
    }
    Ok(m)
}

fn emit_z_linearization(m: &mut MilpModel, i: NodeId, j: NodeId, k: usize, zv: usize) {
    let (xik, xjk) = (m.x(i, k), m.x(j, k));
    m.add_constraint(
        format!("z_ub1_{}_{}_{}", i, j, k),
        vec![LinTerm { coeff: 1.0, var: zv }, LinTerm { coeff: -1.0, var: xik }],
        Sense::Le,
        0.0,
    );
    m.add_constraint(
        format!("z_ub2_{}_{}_{}", i, j, k),
        vec![LinTerm { coeff: 1.0, var: zv }, LinTerm { coeff: -1.0, var: xjk }],
        Sense::Le,
        0.0,
    );
    m.add_constraint(
        format!("z_lb_{}_{}_{}", i, j, k),
        vec![
            LinTerm { coeff: 1.0, var: xik },
            LinTerm { coeff: 1.0, var: xjk },
            LinTerm { coeff: -1.0, var: zv },
        ],
        Sense::Le,
        1.0,
    );
}

/// Membership weight into community k versus half the node's total weight;
/// `activation` adds the modular fallback term for non-members.
fn stability_terms(
    m: &MilpModel,
    w: &WeightMatrix,
    i: NodeId,
    k: usize,
    activation: Option<f64>,
) -> Vec<LinTerm> {
    let mut terms = Vec::new();
    for j in 0..w.n() {
        if j != i && w.get(i, j) != 0.0 {
            terms.push(LinTerm { coeff: w.get(i, j), var: m.x(j, k) });
        }
    }
    let xik_coeff = match activation {
        // LHS − x_ik·row/2 ≥ 0
        None => -0.5 * w.row_sum(i),
        // LHS − x_ik·(row/2 − neg) ≥ neg
        Some(neg_sum) => neg_sum - 0.5 * w.row_sum(i),
    };
    if xik_coeff != 0.0 {
        terms.push(LinTerm { coeff: xik_coeff, var: m.x(i, k) });
    }
    terms
}

fn emit_order_and_cover(m: &mut MilpModel) {
    let (n, n_c) = (m.n, m.n_c);
    for k in 0..n_c.saturating_sub(1) {
        let mut terms: Vec<LinTerm> =
            (0..n).map(|i| LinTerm { coeff: 1.0, var: m.x(i, k) }).collect();
        terms.extend((0..n).map(|i| LinTerm { coeff: -1.0, var: m.x(i, k + 1) }));
        m.add_constraint(format!("order_{}", k), terms, Sense::Ge, 0.0);
    }
    for i in 0..n {
        let terms = (0..n_c).map(|k| LinTerm { coeff: 1.0, var: m.x(i, k) }).collect();
        m.add_constraint(format!("cover_{}", i), terms, Sense::Ge, 1.0);
    }
}

fn push_term(out: &mut String, first: bool, coeff: f64, name: &str) {
    if first {
        if coeff < 0.0 {
            let _ = write!(out, "- {} {}", -coeff, name);
        } else {
            let _ = write!(out, "{} {}", coeff, name);
        }
    } else if coeff < 0.0 {
        let _ = write!(out, " - {} {}", -coeff, name);
    } else {
        let _ = write!(out, " + {} {}", coeff, name);
    }
}

fn render_terms(m: &MilpModel, terms: &[LinTerm]) -> String {
    let mut out = String::new();
    for (idx, t) in terms.iter().enumerate() {
        push_term(&mut out, idx == 0, t.coeff, &m.variables[t.var].name);
        // keep lines under the classic LP-format length limit
        if (idx + 1) % 8 == 0 && idx + 1 < terms.len() {
            out.push_str("\n   ");
        }
    }
    out
}

/// LP-format text: Maximize / Subject To / Bounds / Binaries / End.
/// Byte-identical for identical models.
pub fn export_lp(m: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {} n={} n_c={}{}", m.formulation.as_str(), m.n, m.n_c, match m.p {
        Some(p) => format!(" p={}", p),
        None => String::new(),
    });
    out.push_str("Maximize\n obj: ");
    if m.objective.is_empty() {
        // anchor term so the section is never empty
        let _ = write!(out, "0 {}", m.variables[0].name);
    } else {
        out.push_str(&render_terms(m, &m.objective));
    }
    out.push_str("\nSubject To\n");
    for c in &m.constraints {
        let op = match c.sense {
            Sense::Ge => ">=",
            Sense::Le => "<=",
        };
        let _ = writeln!(out, " {}: {} {} {}", c.name, render_terms(m, &c.terms), op, c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &m.variables {
        if v.kind == VarKind::UnitInterval {
            let _ = writeln!(out, " 0 <= {} <= 1", v.name);
        }
    }
    out.push_str("Binaries\n");
    let mut line_len = 0;
    for v in &m.variables {
        if v.kind == VarKind::Binary {
            if line_len == 0 {
                out.push(' ');
            } else if line_len >= 8 {
                out.push_str("\n ");
                line_len = 0;
            } else {
                out.push(' ');
            }
            out.push_str(&v.name);
            line_len += 1;
        }
    }
    out.push_str("\nEnd\n");
    out
}

#[derive(Debug, Clone)]
pub struct ImportedSolution {
    pub structure: CommunityStructure,
    /// Unknown variable names encountered while parsing.
    pub warnings: Vec<String>,
    /// Feasibility report of the decoded structure; the decode never rejects.
    pub violations: Vec<Violation>,
}

/// Decodes "name value" lines against a model: x ≥ 0.5 means membership,
/// empty communities are dropped. Unknown names warn; a missing x variable
/// is an error. The result carries the violation report of the decoded
/// structure.
pub fn import_solution(
    w: &WeightMatrix,
    m: &MilpModel,
    sol_text: &str,
) -> Result<ImportedSolution> {
    if w.n() != m.n {
        return Err(Error::Validation(format!(
            "weights cover {} nodes but the model was built for {}",
            w.n(),
            m.n
        )));
    }
    let mut values: Vec<Option<f64>> = vec![None; m.variables.len()];
    let mut warnings = Vec::new();
    for (ln, line) in sol_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('\\') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (name, value) = match (it.next(), it.next(), it.next()) {
            (Some(name), Some(value), None) => (name, value),
            _ => {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected \"name value\", got {:?}", line),
                })
            }
        };
        let value: f64 = value.parse().map_err(|_| Error::Parse {
            line: ln + 1,
            msg: format!("invalid value {:?} for {}", value, name),
        })?;
        match m.variable_named(name) {
            Some(idx) => values[idx] = Some(value),
            None => warnings.push(format!("line {}: unknown variable {}", ln + 1, name)),
        }
    }
    let mut communities: Vec<Vec<NodeId>> = vec![Vec::new(); m.n_c];
    for v in &m.variables {
        if let VarMeaning::X { i, k } = v.meaning {
            let idx = m.variable_named(&v.name).expect("declared variable");
            match values[idx] {
                Some(val) => {
                    if val >= 0.5 {
                        communities[k].push(i);
                    }
                }
                None => {
                    return Err(Error::Validation(format!(
                        "solution does not assign {}",
                        v.name
                    )))
                }
            }
        }
    }
    communities.retain(|c| !c.is_empty());
    let p = m.p.unwrap_or(m.n_c);
    let structure = CommunityStructure::new(m.n, m.n_c, p, communities)?;
    let violations = validate_structure(w, &structure);
    Ok(ImportedSolution { structure, warnings, violations })
}

/// Which objective the brute-force oracle maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteObjective {
    /// Σ_k Σ_{i<j ∈ S_k} W_ij, pairs counted once per shared community;
    /// feasibility uses the per-(node, community) linear stability rows,
    /// non-members included.
    ShapleySum,
    /// Σ over pairs sharing ≥ 1 community, counted once; feasibility checks
    /// each community's stability directly.
    PairOnce,
}

struct BruteBest {
    objective: f64,
    /// Canonically ordered communities, the tie-break key.
    key: Vec<Vec<NodeId>>,
}

/// Exhaustive optimum over all 2^(n·n_c) membership assignments with
/// coverage, p-limit, non-inclusion, and stability filtering. Ties pick the
/// canonically smallest structure. Refuses n·n_c > 20.
pub fn brute_force_optimum(
    w: &WeightMatrix,
    n_c: usize,
    p: usize,
    objective: BruteObjective,
) -> Result<(CommunityStructure, f64)> {
    let n = w.n();
    if n_c < 1 || p < 1 {
        return Err(Error::Domain("n_c and p must be at least 1".into()));
    }
    let bits = n * n_c;
    if bits > 20 {
        return Err(Error::Validation(format!(
            "enumeration over 2^{} assignments refused (limit 2^20)",
            bits
        )));
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let half_row: Vec<f64> = (0..n).map(|i| 0.5 * w.row_sum(i)).collect();
    let sum_into = |i: usize, mask: u32| {
        let mut s = 0.0;
        let mut m = mask;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            s += w.get(i, j);
            m &= m - 1;
        }
        s
    };
    let evaluate = |a: u64| -> Option<BruteBest> {
        let mut masks = [0u32; 20];
        let mut cover = 0u32;
        for (k, mk) in masks.iter_mut().enumerate().take(n_c) {
            *mk = (a >> (k * n)) as u32 & full;
            cover |= *mk;
        }
        if cover != full {
            return None;
        }
        for i in 0..n {
            let count = (0..n_c).filter(|&k| masks[k] >> i & 1 == 1).count();
            if count > p {
                return None;
            }
        }
        for k in 0..n_c {
            for r in 0..n_c {
                if k != r && masks[k] != 0 && masks[r] != 0 && masks[k] & !masks[r] == 0 {
                    return None;
                }
            }
        }
        match objective {
            BruteObjective::PairOnce => {
                for k in 0..n_c {
                    let mut m = masks[k];
                    while m != 0 {
                        let i = m.trailing_zeros() as usize;
                        m &= m - 1;
                        if sum_into(i, masks[k]) < half_row[i] - STABILITY_TOL {
                            return None;
                        }
                    }
                }
            }
            BruteObjective::ShapleySum => {
                // the linear stability rows, including non-member rows where
                // the requirement degrades to Σ_{j∈S_k} W_ij ≥ 0
                for k in 0..n_c {
                    for i in 0..n {
                        let need =
                            if masks[k] >> i & 1 == 1 { half_row[i] } else { 0.0 };
                        if sum_into(i, masks[k]) < need - STABILITY_TOL {
                            return None;
                        }
                    }
                }
            }
        }
        let mut value = 0.0;
        match objective {
            BruteObjective::ShapleySum => {
                for &mk in masks.iter().take(n_c) {
                    let mut m = mk;
                    while m != 0 {
                        let i = m.trailing_zeros() as usize;
                        m &= m - 1;
                        let mut rest = m;
                        while rest != 0 {
                            let j = rest.trailing_zeros() as usize;
                            rest &= rest - 1;
                            value += w.get(i, j);
                        }
                    }
                }
            }
            BruteObjective::PairOnce => {
                for i in 0..n {
                    for j in i + 1..n {
                        if (0..n_c).any(|k| masks[k] >> i & 1 == 1 && masks[k] >> j & 1 == 1) {
                            value += w.get(i, j);
                        }
                    }
                }
            }
        }
        let mut comms: Vec<Vec<NodeId>> = Vec::new();
        for &mk in masks.iter().take(n_c) {
            if mk != 0 {
                comms.push((0..n).filter(|&i| mk >> i & 1 == 1).collect());
            }
        }
        comms.sort_by(|x, y| y.len().cmp(&x.len()).then_with(|| x.cmp(y)));
        Some(BruteBest { objective: value, key: comms })
    };
    let better = |a: BruteBest, b: BruteBest| {
        if b.objective > a.objective || (b.objective == a.objective && b.key < a.key) {
            b
        } else {
            a
        }
    };
    let total: u64 = 1 << bits;
    let chunk: u64 = 1 << 12;
    let best = (0..total.div_ceil(chunk))
        .into_par_iter()
        .filter_map(|c| {
            let mut local: Option<BruteBest> = None;
            for a in c * chunk..((c + 1) * chunk).min(total) {
                if let Some(cand) = evaluate(a) {
                    local = Some(match local {
                        None => cand,
                        Some(cur) => better(cur, cand),
                    });
                }
            }
            local
        })
        .reduce_with(better);
    match best {
        Some(b) => {
            let objective = b.objective;
            let pi = CommunityStructure::new(n, n_c, p, b.key)?;
            Ok((pi, objective))
        }
        None => Err(Error::Unsatisfiable {
            stage: "exhaustive structure enumeration",
            attempts: total.min(u32::MAX as u64) as u32,
        }),
    }
}
