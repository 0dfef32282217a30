//! Subjective expected utility with a single Kolmogorovian probability, and
//! exact feasibility of preference patterns over the admissible polytope.
//!
//! Every difference `W(f) − W(g)` is linear in `p`, and the admissible set is
//! a product of scaled simplices (one per known-probability group). Pattern
//! feasibility is the linear program "maximise the joint strict margin `s`",
//! solved here by enumerating basic solutions, which is exact up to floating
//! point for the handful of events these scenarios have.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenarios::{Act, QuestionPair, Scenario, ScenarioError, UtilityFunction};

/// A witness must beat indifference by at least this much, in utility units.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Default grid resolution on free probability coordinates.
pub const GRID_STEP: f64 = 1e-3;
const FEAS_TOL: f64 = 1e-10;
const MAX_BASES: usize = 2_000_000;
const MAX_GRID_POINTS: usize = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("probability vector has {got} entries, scenario has {expected} events")]
    Length { expected: usize, got: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("inconsistent pattern: {0}")]
    Pattern(String),
    #[error("problem too large for exact enumeration ({0} candidate bases)")]
    TooLarge(usize),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

pub type Result<T> = std::result::Result<T, ClassicalError>;

/// Outcome of comparing two acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    FirstStrict,
    SecondStrict,
    Indifferent,
}

impl Relation {
    pub const ALL: [Relation; 3] = [
        Relation::FirstStrict,
        Relation::SecondStrict,
        Relation::Indifferent,
    ];

    /// Classifies a utility difference with an indifference band.
    pub fn from_difference(d: f64, band: f64) -> Relation {
        if d > band {
            Relation::FirstStrict
        } else if d < -band {
            Relation::SecondStrict
        } else {
            Relation::Indifferent
        }
    }

    fn sign(self) -> f64 {
        match self {
            Relation::FirstStrict => 1.0,
            Relation::SecondStrict => -1.0,
            Relation::Indifferent => 0.0,
        }
    }

    pub fn flipped(self) -> Relation {
        match self {
            Relation::FirstStrict => Relation::SecondStrict,
            Relation::SecondStrict => Relation::FirstStrict,
            Relation::Indifferent => Relation::Indifferent,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::FirstStrict => "≻",
            Relation::SecondStrict => "≺",
            Relation::Indifferent => "∼",
        }
    }
}

/// A point of the event simplex satisfying every group constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalProbability {
    probs: Vec<f64>,
}

impl ClassicalProbability {
    pub fn new(s: &Scenario, probs: Vec<f64>) -> Result<Self> {
        const TOL: f64 = 1e-12;
        if probs.len() != s.n_events() {
            return Err(ClassicalError::Length {
                expected: s.n_events(),
                got: probs.len(),
            });
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(-TOL..=1.0 + TOL).contains(*p))
        {
            return Err(ClassicalError::InvalidProbability(format!(
                "p_{} = {p} outside [0, 1]",
                s.events[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(ClassicalError::InvalidProbability(format!(
                "probabilities sum to {total}"
            )));
        }
        for c in &s.constraints {
            let g: f64 = c.event_indices.iter().map(|&i| probs[i]).sum();
            if (g - c.total_f64()).abs() > TOL {
                return Err(ClassicalError::InvalidProbability(format!(
                    "group {} has mass {g}, expected {}",
                    group_label(s, &c.event_indices),
                    c.total
                )));
            }
        }
        Ok(ClassicalProbability { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `λ p + (1 − λ) q`.
    pub fn mix(&self, other: &ClassicalProbability, lambda: f64) -> ClassicalProbability {
        ClassicalProbability {
            probs: self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        }
    }
}

/// `W(f) = Σ_i p_i u(x_i)`.
pub fn expected_utility(p: &ClassicalProbability, act: &Act, u: &UtilityFunction) -> Result<f64> {
    if act.payoffs.len() != p.probs.len() {
        return Err(ClassicalError::Length {
            expected: p.probs.len(),
            got: act.payoffs.len(),
        });
    }
    let us = act.utilities(u)?;
    Ok(us.iter().zip(&p.probs).map(|(u, p)| u * p).sum())
}

/// A required relation between two acts of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub first: usize,
    pub second: usize,
    pub relation: Relation,
}

/// One relation per question pair, in the scenario's pair orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePattern {
    pub relations: Vec<Relation>,
}

impl PreferencePattern {
    pub fn new(relations: Vec<Relation>) -> Self {
        PreferencePattern { relations }
    }

    /// Parses `"f1>f2,f4>f3"`; `>`, `<` and `~` (or `=`) are accepted, and
    /// each comparison may name its pair in either orientation.
    pub fn parse(s: &Scenario, text: &str) -> Result<Self> {
        let mut relations: Vec<Option<Relation>> = vec![None; s.question_pairs.len()];
        for raw in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (op_pos, op) = raw
                .char_indices()
                .find(|(_, c)| matches!(c, '>' | '<' | '~' | '='))
                .ok_or_else(|| ClassicalError::Pattern(format!("'{raw}' has no relation symbol")))?;
            let lhs = raw[..op_pos].trim();
            let rhs = raw[op_pos + op.len_utf8()..].trim();
            let find = |l: &str| {
                s.act_index(l)
                    .ok_or_else(|| ClassicalError::Pattern(format!("unknown act '{l}'")))
            };
            let (a, b) = (find(lhs)?, find(rhs)?);
            let rel = match op {
                '>' => Relation::FirstStrict,
                '<' => Relation::SecondStrict,
                _ => Relation::Indifferent,
            };
            let (qi, rel) = s
                .question_pairs
                .iter()
                .enumerate()
                .find_map(|(qi, q)| {
                    if (q.first, q.second) == (a, b) {
                        Some((qi, rel))
                    } else if (q.first, q.second) == (b, a) {
                        Some((qi, rel.flipped()))
                    } else {
                        None
                    }
                })
                .ok_or_else(|| {
                    ClassicalError::Pattern(format!("'{lhs}' vs '{rhs}' is not a question pair"))
                })?;
            if relations[qi].is_some() {
                return Err(ClassicalError::Pattern(format!(
                    "question pair {} given twice",
                    qi + 1
                )));
            }
            relations[qi] = Some(rel);
        }
        let relations = relations
            .into_iter()
            .enumerate()
            .map(|(qi, r)| {
                r.ok_or_else(|| {
                    ClassicalError::Pattern(format!("question pair {} not specified", qi + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreferencePattern { relations })
    }

    pub fn comparisons(&self, s: &Scenario) -> Result<Vec<Comparison>> {
        if self.relations.len() != s.question_pairs.len() {
            return Err(ClassicalError::Pattern(format!(
                "pattern has {} entries, scenario has {} question pairs",
                self.relations.len(),
                s.question_pairs.len()
            )));
        }
        Ok(s.question_pairs
            .iter()
            .zip(&self.relations)
            .map(|(q, &relation)| Comparison {
                first: q.first,
                second: q.second,
                relation,
            })
            .collect())
    }

    /// Every combination of relations over `pairs` question pairs.
    pub fn all(pairs: usize) -> Vec<PreferencePattern> {
        let mut out = vec![vec![]];
        for _ in 0..pairs {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Relation>| {
                    Relation::ALL.into_iter().map(move |r| {
                        let mut v = prefix.clone();
                        v.push(r);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(PreferencePattern::new).collect()
    }

    pub fn describe(&self, s: &Scenario) -> String {
        s.question_pairs
            .iter()
            .zip(&self.relations)
            .map(|(q, r)| {
                format!(
                    "{}{}{}",
                    s.acts[q.first].label,
                    r.symbol(),
                    s.acts[q.second].label
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Outcome of the discretised cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct GridCheck {
    pub step: f64,
    /// Indifference band and strictness threshold used on grid points.
    pub band: f64,
    pub points: usize,
    pub satisfying: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub witness: Option<ClassicalProbability>,
    /// Best achievable joint strict margin (`None` when nothing is strict).
    pub margin: Option<f64>,
    /// Whether the sign conditions hold for every strictly increasing utility.
    pub utility_independent: bool,
    pub certificate: String,
    pub grid: Option<GridCheck>,
}

impl FeasibilityResult {
    /// `None` when the grid was too large to run.
    pub fn grid_agrees(&self) -> Option<bool> {
        self.grid.as_ref().map(|g| g.feasible == self.feasible)
    }
}

struct Model {
    n: usize,
    groups: Vec<(Vec<usize>, f64)>,
    diffs: Vec<Vec<f64>>,
}

impl Model {
    fn new(s: &Scenario, comparisons: &[Comparison], u: &UtilityFunction) -> Result<Self> {
        s.validate()?;
        u.validate_on(&s.payoffs())?;
        let mut diffs = Vec::with_capacity(comparisons.len());
        for c in comparisons {
            if c.first >= s.acts.len() || c.second >= s.acts.len() {
                return Err(ClassicalError::Pattern(format!(
                    "act index out of range in ({}, {})",
                    c.first, c.second
                )));
            }
            let a = s.acts[c.first].utilities(u)?;
            let b = s.acts[c.second].utilities(u)?;
            diffs.push(a.iter().zip(&b).map(|(x, y)| x - y).collect());
        }
        Ok(Model {
            n: s.n_events(),
            groups: s
                .constraints
                .iter()
                .map(|c| (c.event_indices.clone(), c.total_f64()))
                .collect(),
            diffs,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-reduces `[A | b]`, dropping dependent rows; `None` if inconsistent.
fn independent_rows(rows: Vec<(Vec<f64>, f64)>) -> Option<Vec<(Vec<f64>, f64)>> {
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut reduced: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    for (row, rhs) in rows {
        let mut r = row.clone();
        let mut b = rhs;
        for (basis, brhs, pivot) in &reduced {
            let f = r[*pivot];
            if f != 0.0 {
                for (x, y) in r.iter_mut().zip(basis) {
                    *x -= f * y;
                }
                b -= f * brhs;
            }
        }
        let scale = row.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let (pivot, pv) = r
            .iter()
            .enumerate()
            .map(|(i, x)| (i, *x))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap_or((0, 0.0));
        if pv.abs() <= 1e-10 * scale {
            if b.abs() > 1e-9 * scale.max(rhs.abs()).max(1.0) {
                return None;
            }
            continue;
        }
        for x in r.iter_mut() {
            *x /= pv;
        }
        b /= pv;
        // keep earlier reduced rows free of the new pivot column
        for (basis, brhs, _) in reduced.iter_mut() {
            let f = basis[pivot];
            if f != 0.0 {
                for (x, y) in basis.iter_mut().zip(&r) {
                    *x -= f * y;
                }
                *brhs -= f * b;
            }
        }
        reduced.push((r, b, pivot));
        kept.push((row, rhs));
    }
    Some(kept)
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 && idx[0] == n - k {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Basic feasible solutions of the margin LP, as `(p, margin)`.
fn vertices(model: &Model, comparisons: &[Comparison]) -> Result<Vec<(Vec<f64>, Option<f64>)>> {
    let n = model.n;
    let strict: Vec<Vec<f64>> = comparisons
        .iter()
        .zip(&model.diffs)
        .filter(|(c, _)| c.relation != Relation::Indifferent)
        .map(|(c, d)| d.iter().map(|x| x * c.relation.sign()).collect())
        .collect();
    let has_margin = !strict.is_empty();
    let dim = n + usize::from(has_margin);

    let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
    for (idx, t) in &model.groups {
        let mut row = vec![0.0; dim];
        for &i in idx {
            row[i] = 1.0;
        }
        eq.push((row, *t));
    }
    for (c, d) in comparisons.iter().zip(&model.diffs) {
        if c.relation == Relation::Indifferent {
            let mut row = d.clone();
            row.resize(dim, 0.0);
            eq.push((row, 0.0));
        }
    }
    let Some(eq) = independent_rows(eq) else {
        return Ok(vec![]);
    };

    // inequalities: row · x >= 0
    let mut ineq: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; dim];
            r[i] = 1.0;
            r
        })
        .collect();
    for d in &strict {
        let mut r = d.clone();
        r.push(-1.0);
        ineq.push(r);
    }

    if eq.len() > dim {
        return Ok(vec![]);
    }
    let need = dim - eq.len();
    let bases = binomial(ineq.len(), need);
    if bases > MAX_BASES {
        return Err(ClassicalError::TooLarge(bases));
    }

    let mut out = Vec::new();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for (r, (row, rhs)) in eq.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            a[(r, c)] = *v;
        }
        b[r] = *rhs;
    }
    combinations(ineq.len(), need, |active| {
        let mut a = a.clone();
        let mut b = b.clone();
        for (k, &j) in active.iter().enumerate() {
            let r = eq.len() + k;
            for (c, v) in ineq[j].iter().enumerate() {
                a[(r, c)] = *v;
            }
            b[r] = 0.0;
        }
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-11 * smax.max(1.0) {
            return;
        }
        let Some(x) = a.lu().solve(&b) else { return };
        if ineq.iter().any(|r| dot(r, x.as_slice()) < -FEAS_TOL) {
            return;
        }
        if eq
            .iter()
            .any(|(r, rhs)| (dot(r, x.as_slice()) - rhs).abs() > 1e-9)
        {
            return;
        }
        let p: Vec<f64> = x.iter().take(n).map(|v| v.max(0.0)).collect();
        let margin = has_margin.then(|| x[n]);
        out.push((p, margin));
    });
    Ok(out)
}

/// Per-pair u-independence: `W(f) − W(g) = Σ_l Δ_l b_l · p` with `Δ_l > 0`
/// the utility increments between consecutive payoff levels. The sign
/// condition is utility-free when all nonzero `b_l` share one direction.
fn utility_free_direction(f: &Act, g: &Act) -> Option<Vec<f64>> {
    let mut levels: Vec<f64> = f.payoffs.iter().chain(&g.payoffs).copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let n = f.payoffs.len();
    let mut direction: Option<Vec<f64>> = None;
    for &level in levels.iter().take(levels.len().saturating_sub(1)) {
        let above = |x: f64| if x > level { 1.0 } else { 0.0 };
        let b: Vec<f64> = (0..n)
            .map(|i| above(f.payoffs[i]) - above(g.payoffs[i]))
            .collect();
        if b.iter().all(|x| *x == 0.0) {
            continue;
        }
        match &direction {
            None => direction = Some(b),
            Some(d) => {
                let k = dot(&b, d) / dot(d, d);
                let same = k > 0.0 && b.iter().zip(d).all(|(x, y)| (x - k * y).abs() < 1e-12);
                if !same {
                    return None;
                }
            }
        }
    }
    Some(direction.unwrap_or_else(|| vec![0.0; n]))
}

fn group_label(s: &Scenario, idx: &[usize]) -> String {
    let names: Vec<&str> = idx.iter().map(|&i| s.events[i].as_str()).collect();
    format!("{{{}}}", names.join(","))
}

fn fmt_num(x: f64) -> String {
    let v = if x.abs() < 1e-12 { 0.0 } else { x };
    crate::report::fmt_value(v, false)
}

/// `L(p) = c · p` rewritten in free coordinates (last event of each group
/// eliminated) plus a constant.
fn reduced_form(s: &Scenario, c: &[f64]) -> String {
    let mut coef = vec![0.0; c.len()];
    let mut constant = 0.0;
    for g in &s.constraints {
        let (&last, rest) = g.event_indices.split_last().expect("nonempty group");
        constant += c[last] * g.total_f64();
        for &i in rest {
            coef[i] += c[i] - c[last];
        }
    }
    let mut out = String::new();
    for (i, k) in coef.iter().enumerate() {
        if k.abs() < 1e-12 {
            continue;
        }
        let sign = if *k < 0.0 { "-" } else { "+" };
        let mag = fmt_num(k.abs());
        if out.is_empty() {
            out.push_str(&format!("{}{mag}·p_{}", if *k < 0.0 { "-" } else { "" }, s.events[i]));
        } else {
            out.push_str(&format!(" {sign} {mag}·p_{}", s.events[i]));
        }
    }
    if constant.abs() >= 1e-12 || out.is_empty() {
        if out.is_empty() {
            out = fmt_num(constant);
        } else {
            let sign = if constant < 0.0 { "-" } else { "+" };
            out.push_str(&format!(" {sign} {}", fmt_num(constant.abs())));
        }
    }
    out
}

fn range_over_polytope(model: &Model, c: &[f64]) -> (f64, f64) {
    // extreme values of a linear functional over a product of simplices
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (idx, t) in &model.groups {
        let vals = idx.iter().map(|&i| c[i]);
        lo += t * vals.clone().fold(f64::INFINITY, f64::min);
        hi += t * vals.fold(f64::NEG_INFINITY, f64::max);
    }
    (lo, hi)
}

/// Exact feasibility of a list of comparisons over the admissible polytope.
pub fn feasibility_of(
    s: &Scenario,
    comparisons: &[Comparison],
    u: &UtilityFunction,
) -> Result<FeasibilityResult> {
    let model = Model::new(s, comparisons, u)?;
    let verts = vertices(&model, comparisons)?;
    let has_margin = comparisons.iter().any(|c| c.relation != Relation::Indifferent);

    let best_margin = verts
        .iter()
        .filter_map(|(_, m)| *m)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))));
    let feasible = if has_margin {
        best_margin.is_some_and(|m| m >= STRICT_MARGIN)
    } else {
        !verts.is_empty()
    };

    let witness = if feasible {
        let chosen: Vec<&Vec<f64>> = verts
            .iter()
            .filter(|(_, m)| match (m, best_margin) {
                (Some(m), Some(best)) => *m >= best / 2.0,
                _ => true,
            })
            .map(|(p, _)| p)
            .collect();
        let mut p = vec![0.0; model.n];
        for v in &chosen {
            for (a, b) in p.iter_mut().zip(v.iter()) {
                *a += b / chosen.len() as f64;
            }
        }
        for v in p.iter_mut() {
            if *v < 1e-12 {
                *v = 0.0;
            }
        }
        // snap group sums onto the rational totals
        for (idx, t) in &model.groups {
            let g: f64 = idx.iter().map(|&i| p[i]).sum();
            if g > 0.0 {
                for &i in idx {
                    p[i] *= t / g;
                }
            }
        }
        Some(ClassicalProbability::new(s, p)?)
    } else {
        None
    };

    let utility_independent = comparisons
        .iter()
        .all(|c| utility_free_direction(&s.acts[c.first], &s.acts[c.second]).is_some());

    let mut cert = Vec::new();
    let pattern_text = comparisons
        .iter()
        .map(|c| {
            format!(
                "{}{}{}",
                s.acts[c.first].label,
                c.relation.symbol(),
                s.acts[c.second].label
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    if feasible {
        cert.push(format!("pattern ({pattern_text}) is feasible"));
    } else {
        match best_margin {
            Some(m) => cert.push(format!(
                "pattern ({pattern_text}) is infeasible: best joint strict margin over the admissible polytope is {} < {STRICT_MARGIN:e}",
                fmt_num(m)
            )),
            None => cert.push(format!(
                "pattern ({pattern_text}) is infeasible: no admissible probability satisfies the equalities"
            )),
        }
    }
    for (c, d) in comparisons.iter().zip(&model.diffs) {
        let f = &s.acts[c.first].label;
        let g = &s.acts[c.second].label;
        let requirement = match c.relation {
            Relation::FirstStrict => "> 0",
            Relation::SecondStrict => "< 0",
            Relation::Indifferent => "= 0",
        };
        let (lo, hi) = range_over_polytope(&model, d);
        cert.push(format!(
            "W({f}) − W({g}) = {}; {f}{}{g} requires this {requirement}; range over admissible p: [{}, {}]",
            reduced_form(s, d),
            c.relation.symbol(),
            fmt_num(lo),
            fmt_num(hi)
        ));
        if let Some(dir) = utility_free_direction(&s.acts[c.first], &s.acts[c.second]) {
            cert.push(format!(
                "  sign of W({f}) − W({g}) equals sign of {} for every strictly increasing u",
                reduced_form(s, &dir)
            ));
        }
    }
    if utility_independent {
        cert.push("conclusion is independent of the utility function".to_string());
    } else {
        cert.push(format!(
            "conclusion verified for u = {} only",
            u.spec()
        ));
    }

    let grid = grid_feasibility(s, comparisons, u, GRID_STEP)?;

    Ok(FeasibilityResult {
        feasible,
        witness,
        margin: if has_margin { best_margin } else { None },
        utility_independent,
        certificate: cert.join("\n"),
        grid,
    })
}

/// Exact feasibility of a pattern over the scenario's question pairs.
pub fn feasibility(
    s: &Scenario,
    pattern: &PreferencePattern,
    u: &UtilityFunction,
) -> Result<FeasibilityResult> {
    let comparisons = pattern.comparisons(s)?;
    feasibility_of(s, &comparisons, u)
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

/// Discretised feasibility: each group's simplex is sampled at resolution
/// `step`. A grid point satisfies a strict relation when the difference
/// exceeds the band `step · max ||c||₁` and an indifference when it lies
/// within it. Returns `None` when the grid would be too large.
pub fn grid_feasibility(
    s: &Scenario,
    comparisons: &[Comparison],
    u: &UtilityFunction,
    step: f64,
) -> Result<Option<GridCheck>> {
    let model = Model::new(s, comparisons, u)?;
    let band = step
        * model
            .diffs
            .iter()
            .map(|d| d.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
    let band = band.max(STRICT_MARGIN);

    let mut per_group: Vec<(Vec<usize>, Vec<Vec<f64>>)> = Vec::new();
    let mut points = 1usize;
    for (idx, t) in &model.groups {
        let m = ((t / step).round() as usize).max(1);
        let count = binomial(m + idx.len() - 1, idx.len() - 1);
        points = points.saturating_mul(count);
        if points > MAX_GRID_POINTS {
            return Ok(None);
        }
        let comps = compositions(m, idx.len())
            .into_iter()
            .map(|c| c.iter().map(|&k| t * k as f64 / m as f64).collect())
            .collect();
        per_group.push((idx.clone(), comps));
    }

    let satisfied = |p: &[f64]| {
        comparisons.iter().zip(&model.diffs).all(|(c, d)| {
            let v = dot(d, p);
            match c.relation {
                Relation::FirstStrict => v > band,
                Relation::SecondStrict => v < -band,
                Relation::Indifferent => v.abs() <= band,
            }
        })
    };

    let (head, tail) = per_group.split_first().expect("scenario has constraints");
    let satisfying: usize = head
        .1
        .par_iter()
        .map(|first| {
            let mut p = vec![0.0; model.n];
            for (i, v) in head.0.iter().zip(first) {
                p[*i] = *v;
            }
            count_rest(&mut p, tail, &satisfied)
        })
        .sum();

    Ok(Some(GridCheck {
        step,
        band,
        points,
        satisfying,
        feasible: satisfying > 0,
    }))
}

fn count_rest(
    p: &mut Vec<f64>,
    groups: &[(Vec<usize>, Vec<Vec<f64>>)],
    satisfied: &(impl Fn(&[f64]) -> bool + Sync),
) -> usize {
    match groups.split_first() {
        None => usize::from(satisfied(p)),
        Some(((idx, comps), rest)) => {
            let mut n = 0;
            for c in comps {
                for (i, v) in idx.iter().zip(c) {
                    p[*i] = *v;
                }
                n += count_rest(p, rest, satisfied);
            }
            n
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BiconditionalResult {
    pub holds: bool,
    /// `λ` with `W(a) − W(b) = λ (W(c) − W(d))` coefficient-wise, if any.
    pub proportionality: Option<f64>,
    /// A mismatched sign pattern that is feasible, with its witness.
    pub counterexample: Option<(Relation, Relation, ClassicalProbability)>,
    /// Whether the grid search found any mismatched grid point.
    pub grid_agrees: Option<bool>,
}

/// Decides whether `sign(W(a₁) − W(a₂)) = sign(W(b₁) − W(b₂))` for every
/// admissible probability, by showing all six mismatched sign patterns are
/// infeasible.
pub fn biconditional_check(
    s: &Scenario,
    pair_a: QuestionPair,
    pair_b: QuestionPair,
    u: &UtilityFunction,
) -> Result<BiconditionalResult> {
    let mut counterexample = None;
    let mut grid_mismatch = Some(false);
    for ra in Relation::ALL {
        for rb in Relation::ALL {
            if ra == rb {
                continue;
            }
            let cmp = [
                Comparison {
                    first: pair_a.first,
                    second: pair_a.second,
                    relation: ra,
                },
                Comparison {
                    first: pair_b.first,
                    second: pair_b.second,
                    relation: rb,
                },
            ];
            let r = feasibility_of(s, &cmp, u)?;
            if r.feasible && counterexample.is_none() {
                counterexample = Some((ra, rb, r.witness.clone().expect("feasible has witness")));
            }
            match (&r.grid, grid_mismatch) {
                (Some(g), Some(found)) => grid_mismatch = Some(found || g.feasible),
                _ => grid_mismatch = None,
            }
        }
    }
    let holds = counterexample.is_none();
    let da = Model::new(
        s,
        &[Comparison {
            first: pair_a.first,
            second: pair_a.second,
            relation: Relation::Indifferent,
        }],
        u,
    )?
    .diffs
    .remove(0);
    let db = Model::new(
        s,
        &[Comparison {
            first: pair_b.first,
            second: pair_b.second,
            relation: Relation::Indifferent,
        }],
        u,
    )?
    .diffs
    .remove(0);
    let nb = dot(&db, &db);
    let proportionality = if nb > 0.0 {
        let k = dot(&da, &db) / nb;
        let scale = da.iter().map(|x| x.abs()).fold(1.0, f64::max);
        da.iter()
            .zip(&db)
            .all(|(x, y)| (x - k * y).abs() <= 1e-12 * scale)
            .then_some(k)
    } else {
        None
    };
    Ok(BiconditionalResult {
        holds,
        proportionality,
        counterexample,
        grid_agrees: grid_mismatch.map(|found| found != holds),
    })
}

impl fmt::Display for FeasibilityResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "feasible: {}", self.feasible)?;
        if let Some(w) = &self.witness {
            writeln!(
                f,
                "witness p = ({})",
                w.probs
                    .iter()
                    .map(|x| fmt_num(*x))
                    .collect::<Vec<_>>()
                    .join(", ")
            )?;
        }
        write!(f, "{}", self.certificate)
    }
}
