//! Problem instances, validation, and the closed-form constants derived from
//! them.
//!
//! An instance describes `K` keywords, `n` clients and `L` webpage slots.
//! Click-through rates are indexed `ctr[q][i][s]`, bids `bid[q][i]`. The set of
//! admissible assignment matrices for keyword `q` is the set of one-to-one
//! client/slot matchings that only use pairs allowed by `eligibility[q]`.
//!
//! Revenue instances carry `budget`; click-through instances carry
//! `requirement`. Either may be absent, and the operations that need one
//! return [`Error::MissingField`] when it is.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{Matcher, WeightMatrix, INELIGIBLE};

/// Tolerance on the keyword distribution summing to one.
pub const KEYWORD_PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "InstanceFile")]
pub struct ProblemInstance {
    #[serde(rename = "keywords")]
    pub num_keywords: usize,
    #[serde(rename = "clients")]
    pub num_clients: usize,
    #[serde(rename = "slots")]
    pub num_slots: usize,
    /// `ctr[q][i][s]`
    pub ctr: Vec<Vec<Vec<f64>>>,
    /// `bid[q][i]`, money per click.
    pub bid: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requirement: Option<Vec<f64>>,
    /// Probability that a query arrives in a time slot.
    pub arrival_prob: f64,
    /// Conditional keyword distribution given an arrival.
    pub keyword_prob: Vec<f64>,
    /// Time slots per budgeting (or requirement) cycle.
    pub cycle_slots: usize,
    /// `eligibility[q][i][s]`
    pub eligibility: Vec<Vec<Vec<bool>>>,
    /// Optional per-hour arrival probabilities; a cycle is split into
    /// `hourly_arrival_prob.len()` equal periods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hourly_arrival_prob: Option<Vec<f64>>,
    /// Optional short-term contract types (click-through model only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub short_term: Option<Vec<ShortTermType>>,
}

/// One type of short-term client. The client row `client` of the instance
/// stands for the whole population of this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortTermType {
    pub client: usize,
    /// Impressions owed to each client of this type per contract term.
    pub per_term_requirement: f64,
    /// Weight on the unhappiness of this type.
    pub weight: f64,
    /// Distribution of the number of clients of this type present in a cycle.
    pub population: DiscreteDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    pub values: Vec<u32>,
    pub probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(&v, &p)| f64::from(v) * p)
            .sum()
    }

    /// Inverse-CDF lookup for a uniform draw in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> u32 {
        let mut acc = 0.0;
        for (&v, &p) in self.values.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return v;
            }
        }
        *self.values.last().unwrap_or(&0)
    }
}

/// On-disk layout. `bid` defaults to all ones and `eligibility` to all true.
#[derive(Deserialize)]
struct InstanceFile {
    keywords: usize,
    clients: usize,
    slots: usize,
    ctr: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    bid: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    budget: Option<Vec<f64>>,
    #[serde(default)]
    requirement: Option<Vec<f64>>,
    arrival_prob: f64,
    keyword_prob: Vec<f64>,
    cycle_slots: usize,
    #[serde(default)]
    eligibility: Option<Vec<Vec<Vec<bool>>>>,
    #[serde(default)]
    hourly_arrival_prob: Option<Vec<f64>>,
    #[serde(default)]
    short_term: Option<Vec<ShortTermType>>,
}

impl From<InstanceFile> for ProblemInstance {
    fn from(f: InstanceFile) -> Self {
        let bid = f
            .bid
            .unwrap_or_else(|| vec![vec![1.0; f.clients]; f.keywords]);
        let eligibility = f
            .eligibility
            .unwrap_or_else(|| vec![vec![vec![true; f.slots]; f.clients]; f.keywords]);
        ProblemInstance {
            num_keywords: f.keywords,
            num_clients: f.clients,
            num_slots: f.slots,
            ctr: f.ctr,
            bid,
            budget: f.budget,
            requirement: f.requirement,
            arrival_prob: f.arrival_prob,
            keyword_prob: f.keyword_prob,
            cycle_slots: f.cycle_slots,
            eligibility,
            hourly_arrival_prob: f.hourly_arrival_prob,
            short_term: f.short_term,
        }
    }
}

/// A failed invariant check, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ProblemInstance {
    /// Builds an instance with every pair eligible and no budgets or
    /// requirements. Dimensions are taken from `ctr`.
    pub fn new(
        ctr: Vec<Vec<Vec<f64>>>,
        bid: Vec<Vec<f64>>,
        arrival_prob: f64,
        keyword_prob: Vec<f64>,
        cycle_slots: usize,
    ) -> Self {
        let num_keywords = ctr.len();
        let num_clients = ctr.first().map_or(0, Vec::len);
        let num_slots = ctr
            .first()
            .and_then(|rows| rows.first())
            .map_or(0, Vec::len);
        ProblemInstance {
            num_keywords,
            num_clients,
            num_slots,
            eligibility: vec![vec![vec![true; num_slots]; num_clients]; num_keywords],
            ctr,
            bid,
            budget: None,
            requirement: None,
            arrival_prob,
            keyword_prob,
            cycle_slots,
            hourly_arrival_prob: None,
            short_term: None,
        }
    }

    /// One keyword, one client, one slot.
    pub fn single(arrival_prob: f64, ctr: f64, bid: f64, cycle_slots: usize) -> Self {
        Self::new(
            vec![vec![vec![ctr]]],
            vec![vec![bid]],
            arrival_prob,
            vec![1.0],
            cycle_slots,
        )
    }

    pub fn with_budget(mut self, budget: Vec<f64>) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_requirement(mut self, requirement: Vec<f64>) -> Self {
        self.requirement = Some(requirement);
        self
    }

    pub fn with_eligibility(mut self, eligibility: Vec<Vec<Vec<bool>>>) -> Self {
        self.eligibility = eligibility;
        self
    }

    /// Marks every pair with a zero click-through rate as ineligible.
    pub fn with_eligibility_from_ctr(mut self) -> Self {
        self.eligibility = self
            .ctr
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| row.iter().map(|&c| c > 0.0).collect())
                    .collect()
            })
            .collect();
        self
    }

    pub fn with_hourly_arrivals(mut self, hourly: Vec<f64>) -> Self {
        self.hourly_arrival_prob = Some(hourly);
        self
    }

    pub fn with_short_term(mut self, types: Vec<ShortTermType>) -> Self {
        self.short_term = Some(types);
        self
    }

    /// Reads a JSON or TOML instance file (chosen by extension, JSON otherwise)
    /// and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let inst = Self::parse(&text, path)?;
        let violations = validate_instance(&inst);
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(Error::InvalidInstance(violations))
        }
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        let parsed = if is_toml {
            toml::from_str(text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<inline>.json"))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<inline>.toml"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }

    /// Joint probability `ν_q = ν·ϑ_q` that keyword `q` arrives in a slot.
    #[inline]
    pub fn keyword_rate(&self, q: usize) -> f64 {
        self.arrival_prob * self.keyword_prob[q]
    }

    #[inline]
    pub fn is_eligible(&self, q: usize, i: usize, s: usize) -> bool {
        self.eligibility[q][i][s]
    }

    pub fn budgets(&self) -> Result<&[f64]> {
        self.budget.as_deref().ok_or(Error::MissingField("budget"))
    }

    pub fn requirements(&self) -> Result<&[f64]> {
        self.requirement
            .as_deref()
            .ok_or(Error::MissingField("requirement"))
    }

    /// `max_{q,s} r_{qi} c_{qis}` over eligible pairs of client `i`.
    pub fn max_click_value(&self, i: usize) -> f64 {
        let mut best = 0.0f64;
        for q in 0..self.num_keywords {
            for s in 0..self.num_slots {
                if self.is_eligible(q, i, s) {
                    best = best.max(self.bid[q][i] * self.ctr[q][i][s]);
                }
            }
        }
        best
    }

    pub fn all_bids_integral(&self) -> bool {
        self.bid.iter().flatten().all(|b| b.fract() == 0.0)
    }

    /// Non-fatal diagnostics. Fractional bids are accepted but make the
    /// overdraft queues real-valued.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.all_bids_integral() {
            out.push(
                "some bids are not integers; overdraft queues will not be integer-valued".into(),
            );
        }
        out
    }

    /// Per-client short-term type, if any.
    pub fn short_term_type(&self, i: usize) -> Option<&ShortTermType> {
        self.short_term
            .as_ref()
            .and_then(|types| types.iter().find(|t| t.client == i))
    }
}

fn check_prob(v: f64, field: impl FnOnce() -> String, out: &mut Vec<Violation>) {
    if !(0.0..=1.0).contains(&v) {
        out.push(Violation::new(
            field(),
            format!("probability {v} outside [0,1]"),
        ));
    }
}

/// Checks every instance invariant. Returns an empty list when the instance
/// is valid; never fails.
pub fn validate_instance(inst: &ProblemInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let (nk, nc, ns) = (inst.num_keywords, inst.num_clients, inst.num_slots);

    if nk == 0 {
        out.push(Violation::new("keywords", "must be positive"));
    }
    if nc == 0 {
        out.push(Violation::new("clients", "must be positive"));
    }
    if ns == 0 {
        out.push(Violation::new("slots", "must be positive"));
    }
    if inst.cycle_slots == 0 {
        out.push(Violation::new("cycle_slots", "must be positive"));
    }
    if !(inst.arrival_prob > 0.0 && inst.arrival_prob < 1.0) {
        out.push(Violation::new(
            "arrival_prob",
            "arrival_prob must lie strictly in (0,1)",
        ));
    }

    let shape_ok = |name: &str, out: &mut Vec<Violation>, ok: bool| {
        if !ok {
            out.push(Violation::new(
                name,
                format!("shape does not match {nk} keywords x {nc} clients x {ns} slots"),
            ));
        }
        ok
    };

    let ctr_shape = inst.ctr.len() == nk
        && inst
            .ctr
            .iter()
            .all(|rows| rows.len() == nc && rows.iter().all(|r| r.len() == ns));
    if shape_ok("ctr", &mut out, ctr_shape) {
        for (q, rows) in inst.ctr.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                for (s, &c) in row.iter().enumerate() {
                    check_prob(c, || format!("ctr[{q}][{i}][{s}]"), &mut out);
                }
            }
        }
    }

    let bid_shape = inst.bid.len() == nk && inst.bid.iter().all(|r| r.len() == nc);
    if shape_ok("bid", &mut out, bid_shape) {
        for (q, row) in inst.bid.iter().enumerate() {
            for (i, &b) in row.iter().enumerate() {
                if !(b >= 0.0 && b.is_finite()) {
                    out.push(Violation::new(
                        format!("bid[{q}][{i}]"),
                        "must be finite and nonnegative",
                    ));
                }
            }
        }
    }

    let elig_shape = inst.eligibility.len() == nk
        && inst
            .eligibility
            .iter()
            .all(|rows| rows.len() == nc && rows.iter().all(|r| r.len() == ns));
    if shape_ok("eligibility", &mut out, elig_shape)
        && !inst.eligibility.iter().flatten().flatten().any(|&e| e)
    {
        out.push(Violation::new(
            "eligibility",
            "no eligible (keyword, client, slot) triple",
        ));
    }

    if inst.keyword_prob.len() != nk {
        out.push(Violation::new(
            "keyword_prob",
            format!("expected {nk} entries"),
        ));
    } else {
        for (q, &p) in inst.keyword_prob.iter().enumerate() {
            check_prob(p, || format!("keyword_prob[{q}]"), &mut out);
        }
        let total: f64 = inst.keyword_prob.iter().sum();
        if (total - 1.0).abs() > KEYWORD_PROB_TOL {
            out.push(Violation::new(
                "keyword_prob",
                format!("sums to {total}, not 1"),
            ));
        }
    }

    for (name, vec) in [("budget", &inst.budget), ("requirement", &inst.requirement)] {
        if let Some(v) = vec {
            if v.len() != nc {
                out.push(Violation::new(name, format!("expected {nc} entries")));
            }
            for (i, &x) in v.iter().enumerate() {
                if !(x >= 0.0 && x.is_finite()) {
                    out.push(Violation::new(
                        format!("{name}[{i}]"),
                        "must be finite and nonnegative",
                    ));
                }
            }
        }
    }

    if let Some(hourly) = &inst.hourly_arrival_prob {
        if hourly.is_empty() || !inst.cycle_slots.is_multiple_of(hourly.len()) {
            out.push(Violation::new(
                "hourly_arrival_prob",
                "number of periods must divide cycle_slots",
            ));
        }
        for (h, &p) in hourly.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                out.push(Violation::new(
                    format!("hourly_arrival_prob[{h}]"),
                    "must lie strictly in (0,1)",
                ));
            }
        }
    }

    if let Some(types) = &inst.short_term {
        for (k, t) in types.iter().enumerate() {
            let field = |f: &str| format!("short_term[{k}].{f}");
            if t.client >= nc {
                out.push(Violation::new(field("client"), "client index out of range"));
            }
            if !(t.weight > 0.0) {
                out.push(Violation::new(field("weight"), "must be positive"));
            }
            if !(t.per_term_requirement >= 0.0) {
                out.push(Violation::new(
                    field("per_term_requirement"),
                    "must be nonnegative",
                ));
            }
            let p = &t.population;
            let total: f64 = p.probs.iter().sum();
            if p.values.len() != p.probs.len() || p.values.is_empty() || (total - 1.0).abs() > 1e-9
            {
                out.push(Violation::new(
                    field("population"),
                    "values/probs must be nonempty, equal length, and sum to 1",
                ));
            }
        }
    }

    out
}

/// Per-client threshold of the large-`N` condition.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeNCheck {
    /// `b_i / (Σ_q ν_q r_{qi} max_s c_{qis})`, `None` for unreachable clients.
    pub thresholds: Vec<Option<f64>>,
    /// Clients with positive budget and no eligible (q, s) with positive
    /// click value.
    pub unreachable: Vec<usize>,
    pub required_n: f64,
    pub passes: bool,
}

/// Whether the cycle length is large enough that every client can, on its
/// own, exhaust its budget.
pub fn check_large_n(inst: &ProblemInstance) -> Result<LargeNCheck> {
    let budget = inst.budgets()?;
    let mut thresholds = Vec::with_capacity(inst.num_clients);
    let mut unreachable = Vec::new();
    for (i, &b) in budget.iter().enumerate() {
        let rate: f64 = (0..inst.num_keywords)
            .map(|q| {
                let best = (0..inst.num_slots)
                    .filter(|&s| inst.is_eligible(q, i, s))
                    .map(|s| inst.ctr[q][i][s])
                    .fold(0.0, f64::max);
                inst.keyword_rate(q) * inst.bid[q][i] * best
            })
            .sum();
        if rate > 0.0 {
            thresholds.push(Some(b / rate));
        } else if b > 0.0 {
            thresholds.push(None);
            unreachable.push(i);
        } else {
            thresholds.push(Some(0.0));
        }
    }
    let required_n = thresholds.iter().flatten().copied().fold(0.0, f64::max);
    let passes = unreachable.is_empty() && inst.cycle_slots as f64 >= required_n;
    Ok(LargeNCheck {
        thresholds,
        unreachable,
        required_n,
        passes,
    })
}

/// `E[x̃²]` for the two-point integer randomisation of `x`.
pub fn integer_second_moment(x: f64) -> f64 {
    let lo = x.floor();
    let hi = x.ceil();
    let frac = x - lo;
    hi * hi * frac + lo * lo * (1.0 - frac)
}

fn slot_pair_term(inst: &ProblemInstance) -> f64 {
    let n = inst.cycle_slots as f64;
    let l = inst.num_slots as f64;
    n * (n - 1.0) * l * l + n * l
}

/// Constant term of the revenue-model drift bound.
pub fn compute_b1(inst: &ProblemInstance) -> Result<f64> {
    let budget = inst.budgets()?;
    let max_rc = (0..inst.num_clients)
        .map(|i| inst.max_click_value(i))
        .fold(0.0, f64::max);
    let budget_term: f64 = budget.iter().map(|&b| integer_second_moment(b)).sum();
    Ok(0.5 * (slot_pair_term(inst) * max_rc * max_rc + budget_term))
}

/// Per-client cap on the overdraft queue under the standard algorithm:
/// `1/ε + N·max_{q,s} r c − ⌊b_i⌋`.
pub fn overdraft_hard_bound(inst: &ProblemInstance, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let budget = inst.budgets()?;
    let n = inst.cycle_slots as f64;
    Ok(budget
        .iter()
        .enumerate()
        .map(|(i, &b)| 1.0 / epsilon + n * inst.max_click_value(i) - b.floor())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueConstants {
    pub b1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtrConstants {
    pub d1: f64,
    pub d3: f64,
}

/// The requirement-dependent constant of the click-through drift bound.
pub fn compute_d1(inst: &ProblemInstance, requirement: &[f64]) -> f64 {
    let req: f64 = requirement.iter().map(|&m| integer_second_moment(m)).sum();
    0.5 * (slot_pair_term(inst) + req)
}

/// `N` times the best expected clicks per slot with no requirement
/// constraints: each keyword independently takes its maximum-click matching.
pub fn compute_d3(inst: &ProblemInstance) -> f64 {
    let mut w = WeightMatrix::new(inst.num_clients, inst.num_slots);
    let mut matcher = Matcher::new();
    let mut clicks = 0.0;
    for q in 0..inst.num_keywords {
        for i in 0..inst.num_clients {
            for s in 0..inst.num_slots {
                let x = if inst.is_eligible(q, i, s) {
                    inst.ctr[q][i][s]
                } else {
                    INELIGIBLE
                };
                w.set(i, s, x);
            }
        }
        clicks += inst.keyword_rate(q) * matcher.solve(&w).1;
    }
    inst.cycle_slots as f64 * clicks
}

pub fn compute_ctr_constants(inst: &ProblemInstance, requirement: &[f64]) -> CtrConstants {
    CtrConstants {
        d1: compute_d1(inst, requirement),
        d3: compute_d3(inst),
    }
}
