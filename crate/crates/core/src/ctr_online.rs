//! Click-through-rate maximisation with per-client credit queues.
//!
//! Client `i` is owed `m_i` impressions per requirement cycle on average and
//! its credit queue `Q_i` holds what is still owed. Each query is answered
//! with the maximum-weight assignment under weights `c/ε + Q_i`, and at the
//! end of the cycle `Q_i ← [Q_i + m̃_i − S_i]^+` where `m̃_i` is the
//! integer-randomised requirement and `S_i` the impressions delivered.
//!
//! With fast updates the cycle is split into `T` queueing cycles. The
//! requirement is credited when the cycle starts, and the impressions of each
//! queueing cycle are debited as soon as it ends, so the weights lag by at
//! most `N/T` slots.
//!
//! A short-term client type replaces `m̃_i` by `(1 − α*)·l·X`, where `X`
//! clients of the type are active this cycle and `α*` is the unfulfilled
//! rate picked from the backlog with unhappiness `φ(α) = α²/2`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::{Assignment, Matcher, WeightMatrix, INELIGIBLE};
use crate::model::{compute_d1, compute_d3, ProblemInstance};
use crate::offline_baseline::{solve_lp, MatchingLp, OfflineSolution, Policy, SolveOptions};
use crate::stochastic::{streams, RngStream, SlotDraw, World};

#[derive(Debug, Clone, PartialEq)]
pub struct CreditState {
    pub queues: Vec<f64>,
    pub epsilon: f64,
    /// Queueing cycles per requirement cycle when fast updates are on.
    pub fast_update: Option<usize>,
}

impl CreditState {
    pub fn new(inst: &ProblemInstance, epsilon: f64, fast_update: Option<usize>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if let Some(t) = fast_update {
            queueing_cycle_len(inst.cycle_slots, t)?;
        }
        Ok(CreditState {
            queues: vec![0.0; inst.num_clients],
            epsilon,
            fast_update,
        })
    }

    /// `c/ε + Q_i` on eligible pairs of keyword `q`.
    pub fn weights_into(&self, inst: &ProblemInstance, q: usize, w: &mut WeightMatrix) {
        for i in 0..inst.num_clients {
            for s in 0..inst.num_slots {
                let x = if inst.is_eligible(q, i, s) {
                    inst.ctr[q][i][s] / self.epsilon + self.queues[i]
                } else {
                    INELIGIBLE
                };
                w.set(i, s, x);
            }
        }
    }
}

/// Slots per queueing cycle; `t` must divide `n`.
pub fn queueing_cycle_len(n: usize, t: usize) -> Result<usize> {
    if t == 0 || !n.is_multiple_of(t) {
        return Err(Error::InvalidArgument(format!(
            "{t} queueing cycles do not divide a cycle of {n} slots"
        )));
    }
    Ok(n / t)
}

pub fn ctr_weights(inst: &ProblemInstance, state: &CreditState, q: usize) -> WeightMatrix {
    let mut w = WeightMatrix::new(inst.num_clients, inst.num_slots);
    state.weights_into(inst, q, &mut w);
    w
}

/// `[Q + arrival − served]^+`.
pub fn credit_update(queue: f64, arrival: f64, served: f64) -> f64 {
    (queue + arrival - served).max(0.0)
}

/// One requirement cycle of the fast update: credits `arrivals` and then
/// debits `served[τ]`, the impressions of queueing cycle `τ`, clipping at
/// zero after each one.
pub fn fast_queue_update(queues: &[f64], arrivals: &[f64], served: &[Vec<u32>]) -> Vec<f64> {
    let mut q: Vec<f64> = queues.iter().zip(arrivals).map(|(a, b)| a + b).collect();
    for block in served {
        for (x, &s) in q.iter_mut().zip(block) {
            *x = (*x - s as f64).max(0.0);
        }
    }
    q
}

/// Unfulfilled rate `ψ(l·X·Q/(H·w))` with `ψ(x) = min(max(x, 0), 1)`.
pub fn short_term_alpha(l: f64, population: f64, queue: f64, hours: f64, weight: f64) -> f64 {
    let x = l * population * queue / (hours * weight);
    if x.is_nan() {
        return 0.0;
    }
    x.clamp(0.0, 1.0)
}

/// `[Q + (1 − α*)·l·X − S]^+`.
pub fn short_term_credit_update(
    queue: f64,
    alpha: f64,
    l: f64,
    population: f64,
    served: f64,
) -> f64 {
    credit_update(queue, (1.0 - alpha) * l * population, served)
}

/// How queries are answered.
#[derive(Debug, Clone, PartialEq)]
pub enum CtrPolicy {
    Mwm,
    MwmFast {
        queueing_cycles: usize,
    },
    /// Samples a matching from a fixed policy for every query.
    Opt {
        policy: Policy,
    },
}

impl CtrPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            CtrPolicy::Mwm => "mwm",
            CtrPolicy::MwmFast { .. } => "mwm-fast",
            CtrPolicy::Opt { .. } => "opt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShortTermOutcome {
    pub client: usize,
    pub population: u32,
    pub alpha: f64,
}

/// One requirement cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleServiceOutcome {
    /// Impressions delivered (`S_i`).
    pub impressions: Vec<u32>,
    /// Amount credited this cycle: `m̃_i`, or `(1 − α*)·l·X` for short-term
    /// types.
    pub requirement: Vec<f64>,
    pub over: Vec<f64>,
    pub under: Vec<f64>,
    /// Clicks (`J`).
    pub clicks: u32,
    pub num_queries: u32,
    pub queue_before: Vec<f64>,
    pub queue_after: Vec<f64>,
    pub short_term: Vec<ShortTermOutcome>,
}

impl CycleServiceOutcome {
    pub fn total_queue(&self) -> f64 {
        self.queue_after.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct CtrConfig {
    pub epsilon: f64,
    pub policy: CtrPolicy,
}

/// Expected amount owed per cycle: `m_i` for long-term clients, `l·E[X]` for
/// short-term types.
pub fn nominal_requirement(inst: &ProblemInstance) -> Result<Vec<f64>> {
    let mut m = inst.requirements()?.to_vec();
    for t in inst.short_term.iter().flatten() {
        m[t.client] = t.per_term_requirement * t.population.mean();
    }
    Ok(m)
}

/// Seeded simulator of the online click-through algorithm and the sampled
/// offline policy.
#[derive(Debug, Clone)]
pub struct CtrSimulator<'a> {
    inst: &'a ProblemInstance,
    requirement: Vec<f64>,
    state: CreditState,
    policy: CtrPolicy,
    world: World,
    choice: RngStream,
    population: RngStream,
    matcher: Matcher,
    weights: WeightMatrix,
    per_keyword: Vec<Assignment>,
    active: Vec<bool>,
    draw: SlotDraw,
    cycle: u64,
}

impl<'a> CtrSimulator<'a> {
    pub fn new(inst: &'a ProblemInstance, config: CtrConfig, seed: u64) -> Result<Self> {
        let requirement = inst.requirements()?.to_vec();
        let fast = match &config.policy {
            CtrPolicy::MwmFast { queueing_cycles } => Some(*queueing_cycles),
            CtrPolicy::Opt { policy } => {
                if policy.len() != inst.num_keywords {
                    return Err(Error::InvalidArgument(
                        "policy needs one distribution per keyword".into(),
                    ));
                }
                None
            }
            CtrPolicy::Mwm => None,
        };
        let state = CreditState::new(inst, config.epsilon, fast)?;
        Ok(CtrSimulator {
            inst,
            requirement,
            state,
            policy: config.policy,
            world: World::new(seed, &inst.keyword_prob, inst.num_slots),
            choice: RngStream::new(seed, streams::POLICY),
            population: RngStream::new(seed, streams::POPULATION),
            matcher: Matcher::new(),
            weights: WeightMatrix::new(inst.num_clients, inst.num_slots),
            per_keyword: vec![Assignment::default(); inst.num_keywords],
            active: vec![true; inst.num_clients],
            draw: SlotDraw::default(),
            cycle: 0,
        })
    }

    pub fn with_initial_queues(mut self, queues: Vec<f64>) -> Self {
        assert_eq!(queues.len(), self.inst.num_clients);
        self.state.queues = queues;
        self
    }

    pub fn state(&self) -> &CreditState {
        &self.state
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    fn hours(&self) -> usize {
        self.inst.hourly_arrival_prob.as_ref().map_or(1, Vec::len)
    }

    fn plan(&mut self) {
        for q in 0..self.inst.num_keywords {
            self.state.weights_into(self.inst, q, &mut self.weights);
            for (i, &on) in self.active.iter().enumerate() {
                if !on {
                    for s in 0..self.inst.num_slots {
                        self.weights.set(i, s, INELIGIBLE);
                    }
                }
            }
            self.matcher
                .solve_into(&self.weights, &mut self.per_keyword[q]);
        }
    }

    /// Amounts credited this cycle. Consumes one settlement draw per client
    /// and one population draw per short-term type whatever the policy.
    fn credits(&mut self) -> (Vec<f64>, Vec<ShortTermOutcome>) {
        let mut credit = self.world.integer_draws(&self.requirement);
        self.active.fill(true);
        let mut short = Vec::new();
        let hours = self.hours() as f64;
        for t in self.inst.short_term.iter().flatten() {
            let x = t.population.quantile(self.population.uniform());
            let l = t.per_term_requirement;
            let alpha = short_term_alpha(l, x as f64, self.state.queues[t.client], hours, t.weight);
            credit[t.client] = (1.0 - alpha) * l * x as f64;
            self.active[t.client] = x > 0;
            short.push(ShortTermOutcome {
                client: t.client,
                population: x,
                alpha,
            });
        }
        (credit, short)
    }

    /// Runs one requirement cycle against the seeded world.
    pub fn step(&mut self) -> CycleServiceOutcome {
        let inst = self.inst;
        let n = inst.num_clients;
        let slots = inst.cycle_slots;
        let (credit, short_term) = self.credits();
        let queue_before = self.state.queues.clone();
        let fast = self.state.fast_update;
        if fast.is_some() {
            for (q, c) in self.state.queues.iter_mut().zip(&credit) {
                *q += c;
            }
        }
        let block = fast.map_or(slots, |t| slots / t);
        let period = slots / self.hours();
        let is_opt = matches!(self.policy, CtrPolicy::Opt { .. });

        let mut impressions = vec![0u32; n];
        let mut served = vec![0u32; n];
        let mut clicks = 0u32;
        let mut num_queries = 0u32;
        let mut draw = std::mem::take(&mut self.draw);
        for t in 0..slots {
            if t % block == 0 && !is_opt {
                self.plan();
            }
            let nu = inst
                .hourly_arrival_prob
                .as_ref()
                .map_or(inst.arrival_prob, |h| h[t / period]);
            self.world.next_slot_into(nu, &mut draw);
            if let Some(q) = draw.keyword {
                num_queries += 1;
                let chosen = match &self.policy {
                    CtrPolicy::Opt { policy } => sample_matching(&policy[q], self.choice.uniform()),
                    _ => Some(&self.per_keyword[q]),
                };
                if let Some(m) = chosen {
                    for (i, s) in m.pairs() {
                        impressions[i] += 1;
                        served[i] += 1;
                        if draw.clicked(s, inst.ctr[q][i][s]) {
                            clicks += 1;
                        }
                    }
                }
            }
            if fast.is_some() && (t + 1) % block == 0 {
                for (q, s) in self.state.queues.iter_mut().zip(served.iter_mut()) {
                    *q = (*q - *s as f64).max(0.0);
                    *s = 0;
                }
            }
        }
        self.draw = draw;
        if fast.is_none() {
            for i in 0..n {
                self.state.queues[i] =
                    credit_update(self.state.queues[i], credit[i], impressions[i] as f64);
            }
        }
        let over = (0..n)
            .map(|i| (impressions[i] as f64 - credit[i]).max(0.0))
            .collect();
        let under = (0..n)
            .map(|i| (credit[i] - impressions[i] as f64).max(0.0))
            .collect();
        self.cycle += 1;
        CycleServiceOutcome {
            impressions,
            requirement: credit,
            over,
            under,
            clicks,
            num_queries,
            queue_before,
            queue_after: self.state.queues.clone(),
            short_term,
        }
    }

    pub fn run(&mut self, cycles: usize) -> CtrTrace {
        let outcomes = (0..cycles).map(|_| self.step()).collect();
        CtrTrace {
            cycle_slots: self.inst.cycle_slots,
            nominal_requirement: nominal_requirement(self.inst).expect("checked in new"),
            cycles: outcomes,
        }
    }
}

/// Picks a matching from a sub-distribution with one uniform; `None` is the
/// empty assignment.
fn sample_matching(dist: &[(Assignment, f64)], u: f64) -> Option<&Assignment> {
    let mut acc = 0.0;
    for (m, x) in dist {
        acc += x;
        if u < acc {
            return Some(m);
        }
    }
    None
}

/// The outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtrTrace {
    pub cycle_slots: usize,
    /// Expected amount owed per cycle, per client.
    pub nominal_requirement: Vec<f64>,
    pub cycles: Vec<CycleServiceOutcome>,
}

impl CtrTrace {
    fn requirement_total(&self) -> f64 {
        self.nominal_requirement.iter().sum()
    }

    /// `Σ_i Q_i` after each cycle.
    pub fn total_queue_path(&self) -> Vec<f64> {
        self.cycles
            .iter()
            .map(CycleServiceOutcome::total_queue)
            .collect()
    }

    pub fn time_average_total_queue(&self) -> f64 {
        crate::stats::mean(&self.total_queue_path())
    }

    /// `Σ_i over_i / Σ_i m_i` per cycle.
    pub fn normalized_over(&self) -> Vec<f64> {
        let m = self.requirement_total();
        self.cycles
            .iter()
            .map(|c| c.over.iter().sum::<f64>() / m)
            .collect()
    }

    /// `Σ_i under_i / Σ_i m_i` per cycle.
    pub fn normalized_under(&self) -> Vec<f64> {
        let m = self.requirement_total();
        self.cycles
            .iter()
            .map(|c| c.under.iter().sum::<f64>() / m)
            .collect()
    }

    /// Time-average impressions of client `i` per cycle.
    pub fn average_impressions(&self, i: usize) -> f64 {
        self.cycles
            .iter()
            .map(|c| c.impressions[i] as f64)
            .sum::<f64>()
            / self.cycles.len() as f64
    }

    pub fn impressions_path(&self, i: usize) -> Vec<f64> {
        self.cycles
            .iter()
            .map(|c| c.impressions[i] as f64)
            .collect()
    }

    /// Time-average clicks per slot.
    pub fn clicks_per_slot(&self) -> f64 {
        let clicks: f64 = self.cycles.iter().map(|c| c.clicks as f64).sum();
        clicks / (self.cycles.len() * self.cycle_slots) as f64
    }
}

/// Impressions per cycle each client receives under `p`.
pub fn capacity(inst: &ProblemInstance, p: &Policy) -> Result<Vec<f64>> {
    let zeros = vec![0.0; inst.num_clients];
    Ok(MatchingLp::ctr(inst, &zeros).evaluate(p)?.0)
}

/// Sparse per-keyword mixture of matchings with lazy rescaling, so a convex
/// step costs `O(1)` per new vertex.
#[derive(Debug, Clone)]
struct Mixture {
    raw: Vec<HashMap<Assignment, f64>>,
    scale: f64,
}

impl Mixture {
    fn vertex(chosen: &[Assignment]) -> Self {
        let raw = chosen
            .iter()
            .map(|m| {
                let mut h = HashMap::new();
                if !m.is_empty() {
                    h.insert(m.clone(), 1.0);
                }
                h
            })
            .collect();
        Mixture { raw, scale: 1.0 }
    }

    fn from_policy(p: &Policy) -> Self {
        let raw = p.iter().map(|d| d.iter().cloned().collect()).collect();
        Mixture { raw, scale: 1.0 }
    }

    /// `(1 − γ)·self + γ·vertex`.
    fn step_towards(&mut self, chosen: &[Assignment], gamma: f64) {
        if gamma >= 1.0 {
            *self = Mixture::vertex(chosen);
            return;
        }
        self.scale *= 1.0 - gamma;
        for (h, m) in self.raw.iter_mut().zip(chosen) {
            if !m.is_empty() {
                *h.entry(m.clone()).or_default() += gamma / self.scale;
            }
        }
        if self.scale < 1e-200 {
            for h in &mut self.raw {
                for x in h.values_mut() {
                    *x *= self.scale;
                }
            }
            self.scale = 1.0;
        }
    }

    fn policy(&self) -> Policy {
        self.raw
            .iter()
            .map(|h| {
                let mut d: Vec<(Assignment, f64)> = h
                    .iter()
                    .map(|(m, x)| (m.clone(), x * self.scale))
                    .filter(|(_, x)| *x > 0.0)
                    .collect();
                d.sort_by(|a, b| a.0.slot_of.cmp(&b.0.slot_of));
                d
            })
            .collect()
    }
}

/// Per-keyword matchings maximising `Σ g_i` over matched clients, and the
/// resulting impressions per cycle.
fn impression_oracle(
    inst: &ProblemInstance,
    g: &[f64],
    matcher: &mut Matcher,
    w: &mut WeightMatrix,
) -> (Vec<Assignment>, Vec<f64>) {
    let n = inst.cycle_slots as f64;
    let mut cap = vec![0.0; inst.num_clients];
    let mut chosen = Vec::with_capacity(inst.num_keywords);
    for q in 0..inst.num_keywords {
        for i in 0..inst.num_clients {
            for s in 0..inst.num_slots {
                w.set(
                    i,
                    s,
                    if inst.is_eligible(q, i, s) {
                        g[i]
                    } else {
                        INELIGIBLE
                    },
                );
            }
        }
        let m = matcher.solve(w).0;
        let nu = inst.keyword_rate(q);
        for (i, _) in m.pairs() {
            cap[i] += n * nu;
        }
        chosen.push(m);
    }
    (chosen, cap)
}

/// Best worst-case slack `max_p min_i (capacity_i(p) − m_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxMinSlack {
    /// Slack achieved by `policy`, impressions per cycle.
    pub value: f64,
    /// Upper bound from the best dual point seen.
    pub upper: f64,
    pub policy: Policy,
    pub capacity: Vec<f64>,
    pub iterations: usize,
}

pub const MAX_MIN_ITERATIONS: usize = 50_000;

/// Multiplicative weights over clients against best-response matchings,
/// averaging the primal over all iterations. `start`, when given, is kept
/// if it beats the average.
pub fn max_min_slack(
    inst: &ProblemInstance,
    requirement: &[f64],
    iterations: usize,
    start: Option<&Policy>,
) -> Result<MaxMinSlack> {
    let nc = inst.num_clients;
    if requirement.len() != nc {
        return Err(Error::InvalidArgument(format!(
            "expected {nc} requirements"
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }
    let n = inst.cycle_slots as f64;
    let reach: f64 = (0..inst.num_keywords).map(|q| inst.keyword_rate(q)).sum();
    let spread = reach + requirement.iter().fold(0.0f64, |a, &m| a.max(m)) / n;
    let eta = (8.0 * (nc.max(2) as f64).ln() / iterations as f64).sqrt() / spread.max(1e-12);

    let mut y = vec![1.0 / nc as f64; nc];
    let mut matcher = Matcher::new();
    let mut w = WeightMatrix::new(nc, inst.num_slots);
    let mut counts: Vec<HashMap<Assignment, usize>> = vec![HashMap::new(); inst.num_keywords];
    let mut upper = f64::INFINITY;
    for _ in 0..iterations {
        let (chosen, cap) = impression_oracle(inst, &y, &mut matcher, &mut w);
        let slack: Vec<f64> = (0..nc).map(|i| (cap[i] - requirement[i]) / n).collect();
        upper = upper.min(y.iter().zip(&slack).map(|(a, b)| a * b).sum::<f64>() * n);
        for (q, m) in chosen.into_iter().enumerate() {
            if !m.is_empty() {
                *counts[q].entry(m).or_default() += 1;
            }
        }
        let mut total = 0.0;
        for (yi, si) in y.iter_mut().zip(&slack) {
            *yi *= (-eta * si).exp();
            total += *yi;
        }
        for yi in &mut y {
            *yi = (*yi / total).max(1e-300);
        }
    }
    let k = iterations as f64;
    let mut policy: Policy = counts
        .into_iter()
        .map(|c| {
            let mut d: Vec<(Assignment, f64)> =
                c.into_iter().map(|(m, x)| (m, x as f64 / k)).collect();
            d.sort_by(|a, b| a.0.slot_of.cmp(&b.0.slot_of));
            d
        })
        .collect();
    let worst = |cap: &[f64]| {
        (0..nc)
            .map(|i| cap[i] - requirement[i])
            .fold(f64::INFINITY, f64::min)
    };
    let mut cap = capacity(inst, &policy)?;
    let mut value = worst(&cap);
    if let Some(p) = start {
        let c = capacity(inst, p)?;
        if worst(&c) > value {
            value = worst(&c);
            cap = c;
            policy = p.clone();
        }
    }
    Ok(MaxMinSlack {
        value,
        upper: upper.max(value),
        policy,
        capacity: cap,
        iterations,
    })
}

/// `(D1 + D3/ε) / D2*`.
pub fn credit_queue_bound_value(d1: f64, d3: f64, d2_star: f64, epsilon: f64) -> f64 {
    (d1 + d3 / epsilon) / d2_star
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreditBound {
    pub d1: f64,
    pub d3: f64,
    /// Worst-case slack achieved; any positive value yields a valid bound,
    /// the largest yields the tightest.
    pub d2_star: f64,
    pub d2_upper: f64,
    pub bound: f64,
}

/// Bound on the long-run expected `Σ_i Q_i` of the online algorithm.
pub fn credit_queue_bound(
    inst: &ProblemInstance,
    requirement: &[f64],
    epsilon: f64,
    start: Option<&Policy>,
) -> Result<CreditBound> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mm = max_min_slack(inst, requirement, MAX_MIN_ITERATIONS, start)?;
    if !(mm.value > 0.0) {
        return Err(Error::Infeasible(format!(
            "no policy serves every requirement with positive slack (best found {:.6}, upper bound {:.6})",
            mm.value, mm.upper
        )));
    }
    let d1 = compute_d1(inst, requirement);
    let d3 = compute_d3(inst);
    Ok(CreditBound {
        d1,
        d3,
        d2_star: mm.value,
        d2_upper: mm.upper,
        bound: credit_queue_bound_value(d1, d3, mm.value, epsilon),
    })
}

/// Slack target `(D1 + D3/ε)/Q_max`.
pub fn slack_target(d1: f64, d3: f64, epsilon: f64, q_max: f64) -> f64 {
    (d1 + d3 / epsilon) / q_max
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CustomizeOptions {
    /// Frank-Wolfe iterations per slack target.
    pub iterations: usize,
    /// Stop once the Frank-Wolfe gap on `Σ log m_i` falls below this.
    pub tolerance: f64,
    /// Smallest requirement, as a fraction of `N`.
    pub floor_fraction: f64,
    /// Outer iterations of the slack fixed point.
    pub outer_iterations: usize,
}

impl Default for CustomizeOptions {
    fn default() -> Self {
        CustomizeOptions {
            iterations: 20_000,
            tolerance: 1e-7,
            floor_fraction: 1e-6,
            outer_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Customization {
    pub requirement: Vec<f64>,
    pub xi: f64,
    /// Policy certifying the requirements: `capacity − requirement ≥ ξ`.
    pub policy: Policy,
    pub capacity: Vec<f64>,
    pub slack: Vec<f64>,
    /// Final Frank-Wolfe gap, an upper bound on the suboptimality of
    /// `Σ log m_i`.
    pub gap: f64,
    pub outer_iterations: usize,
}

/// Requirements with log-optimal spread for a fixed slack `xi`: maximises
/// `Σ_i log(capacity_i(p) − ξ)` over policies and sets
/// `m_i = capacity_i(p) − ξ`.
pub fn requirements_for_slack(
    inst: &ProblemInstance,
    xi: f64,
    opts: CustomizeOptions,
) -> Result<Customization> {
    let nc = inst.num_clients;
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "slack must be finite and nonnegative, got {xi}"
        )));
    }
    let start = max_min_slack(inst, &vec![0.0; nc], MAX_MIN_ITERATIONS, None)?;
    if !(start.value > xi) {
        return Err(Error::Infeasible(format!(
            "slack {xi:.6} is too large: the best worst-case capacity found is {:.6} (upper bound {:.6})",
            start.value, start.upper
        )));
    }
    let mut mixture = Mixture::from_policy(&start.policy);
    let mut cap = start.capacity.clone();
    let mut matcher = Matcher::new();
    let mut w = WeightMatrix::new(nc, inst.num_slots);
    let mut gap = f64::INFINITY;
    for _ in 0..opts.iterations {
        let g: Vec<f64> = cap.iter().map(|c| 1.0 / (c - xi)).collect();
        let (chosen, v) = impression_oracle(inst, &g, &mut matcher, &mut w);
        let d: Vec<f64> = v.iter().zip(&cap).map(|(a, b)| a - b).collect();
        gap = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gap <= opts.tolerance {
            break;
        }
        let gamma = line_search(&cap, &d, xi);
        if gamma <= 0.0 {
            break;
        }
        mixture.step_towards(&chosen, gamma);
        for (c, di) in cap.iter_mut().zip(&d) {
            *c += gamma * di;
        }
    }
    let policy = mixture.policy();
    let capacity = capacity(inst, &policy)?;
    let floor = opts.floor_fraction * inst.cycle_slots as f64;
    let requirement: Vec<f64> = capacity.iter().map(|c| (c - xi).max(floor)).collect();
    let slack = capacity
        .iter()
        .zip(&requirement)
        .map(|(c, m)| c - m)
        .collect();
    Ok(Customization {
        requirement,
        xi,
        policy,
        capacity,
        slack,
        gap: gap.max(0.0),
        outer_iterations: 0,
    })
}

/// Exact step maximising `Σ log(c + γd − ξ)` on `[0, 1]` by bisection on the
/// derivative.
fn line_search(cap: &[f64], d: &[f64], xi: f64) -> f64 {
    let deriv = |g: f64| -> f64 {
        cap.iter()
            .zip(d)
            .map(|(c, di)| di / (c - xi + g * di))
            .sum()
    };
    let mut hi = 1.0f64;
    for (c, di) in cap.iter().zip(d) {
        if *di < 0.0 {
            hi = hi.min((c - xi) / -di);
        }
    }
    if hi >= 1.0 && deriv(1.0) >= 0.0 {
        return 1.0;
    }
    let mut lo = 0.0;
    if deriv(lo) <= 0.0 {
        return 0.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Chooses requirements for a target queue level `q_max`. The slack
/// `ξ = (D1 + D3/ε)/Q_max` depends on the requirements through `D1`, so the
/// two are iterated to a fixed point.
pub fn customize_requirements(
    inst: &ProblemInstance,
    q_max: f64,
    epsilon: f64,
) -> Result<Customization> {
    customize_requirements_with(inst, q_max, epsilon, CustomizeOptions::default())
}

pub fn customize_requirements_with(
    inst: &ProblemInstance,
    q_max: f64,
    epsilon: f64,
    opts: CustomizeOptions,
) -> Result<Customization> {
    if !(q_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Q_max must be positive, got {q_max}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let d3 = compute_d3(inst);
    let mut m = vec![0.0; inst.num_clients];
    let mut last: Option<Customization> = None;
    for k in 1..=opts.outer_iterations.max(1) {
        let xi = slack_target(compute_d1(inst, &m), d3, epsilon, q_max);
        if let Some(prev) = &last {
            if (xi - prev.xi).abs() <= 1e-9 * xi.max(1.0) {
                break;
            }
        }
        let mut c = requirements_for_slack(inst, xi, opts)?;
        c.outer_iterations = k;
        m = c.requirement.clone();
        last = Some(c);
    }
    Ok(last.expect("at least one outer iteration"))
}

/// The click-maximising policy for the given requirements, made exactly
/// feasible by mixing with `interior` (typically a customisation policy).
pub fn ctr_optimum(
    inst: &ProblemInstance,
    requirement: &[f64],
    interior: &Policy,
    iterations: usize,
) -> Result<OfflineSolution> {
    let lp = MatchingLp::ctr(inst, requirement);
    let opts = SolveOptions {
        iterations,
        interior: Some(interior),
        ..SolveOptions::default()
    };
    solve_lp(&lp, opts)
}
