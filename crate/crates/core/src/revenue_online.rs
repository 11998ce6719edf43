//! Online revenue maximisation with per-client overdraft queues.
//!
//! Queue levels are frozen for a whole budgeting cycle of `N` slots. Each
//! arriving query is answered with the maximum-weight assignment under
//! weights `c·r·(1/ε - Q_i)`, the revenue charged to each client is summed
//! into `A_i`, and at the end of the cycle the queue absorbs `A_i` minus a
//! randomised integer budget.
//!
//! Two variants change the weights. Under *estimated* click-through rates
//! the weights use a perturbed belief `ĉ` while clicks still follow the true
//! `c`. Under *underdraft* the threshold `1/ε` becomes a per-client `Γ_i`
//! and the queue may fall to `-C_i`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::{Assignment, Matcher, WeightMatrix, INELIGIBLE};
use crate::model::ProblemInstance;
use crate::stochastic::{
    sample_integer_amount, streams, BatchArrivals, RngStream, SlotDraw, World,
};

#[derive(Debug, Clone, PartialEq)]
pub enum RevenueVariant {
    Standard,
    /// Throttling thresholds `gamma` and credit limits `credit`.
    Underdraft {
        gamma: Vec<f64>,
        credit: Vec<f64>,
    },
    /// Belief `ctr_hat[q][i][s]` used in place of the true rates.
    Estimated {
        ctr_hat: Vec<Vec<Vec<f64>>>,
    },
}

impl RevenueVariant {
    pub fn name(&self) -> &'static str {
        match self {
            RevenueVariant::Standard => "standard",
            RevenueVariant::Underdraft { .. } => "underdraft",
            RevenueVariant::Estimated { .. } => "estimated",
        }
    }
}

/// What a posted ad is charged for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Charging {
    #[default]
    PerClick,
    PerImpression,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverdraftState {
    pub queues: Vec<f64>,
    pub epsilon: f64,
    pub variant: RevenueVariant,
}

impl OverdraftState {
    pub fn new(inst: &ProblemInstance, epsilon: f64, variant: RevenueVariant) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let n = inst.num_clients;
        match &variant {
            RevenueVariant::Underdraft { gamma, credit }
                if gamma.len() != n || credit.len() != n =>
            {
                return Err(Error::InvalidArgument(
                    "underdraft thresholds must have one entry per client".into(),
                ));
            }
            RevenueVariant::Estimated { ctr_hat } if ctr_hat.len() != inst.num_keywords => {
                return Err(Error::InvalidArgument(
                    "estimated ctr must have one matrix per keyword".into(),
                ));
            }
            _ => {}
        }
        Ok(OverdraftState {
            queues: vec![0.0; n],
            epsilon,
            variant,
        })
    }

    /// `1/ε` or `Γ_i`.
    #[inline]
    pub fn threshold(&self, i: usize) -> f64 {
        match &self.variant {
            RevenueVariant::Underdraft { gamma, .. } => gamma[i],
            _ => 1.0 / self.epsilon,
        }
    }

    /// Lowest admissible queue level.
    #[inline]
    pub fn floor(&self, i: usize) -> f64 {
        match &self.variant {
            RevenueVariant::Underdraft { credit, .. } => -credit[i],
            _ => 0.0,
        }
    }

    /// Fills `w` with the assignment weights for keyword `q`.
    pub fn weights_into(&self, inst: &ProblemInstance, q: usize, w: &mut WeightMatrix) {
        let ctr = match &self.variant {
            RevenueVariant::Estimated { ctr_hat } => &ctr_hat[q],
            _ => &inst.ctr[q],
        };
        for i in 0..inst.num_clients {
            let margin = self.threshold(i) - self.queues[i];
            for s in 0..inst.num_slots {
                let x = if inst.is_eligible(q, i, s) {
                    ctr[i][s] * inst.bid[q][i] * margin
                } else {
                    INELIGIBLE
                };
                w.set(i, s, x);
            }
        }
    }

    pub fn apply_update(&mut self, revenue: &[f64], realized_budget: &[f64]) {
        for i in 0..self.queues.len() {
            let q = self.queues[i];
            self.queues[i] = match &self.variant {
                RevenueVariant::Underdraft { credit, .. } => {
                    update_underdraft(q, revenue[i], realized_budget[i], credit[i])
                }
                _ => update_overdraft(q, revenue[i], realized_budget[i]),
            };
        }
    }
}

/// Weights `c·r·(1/ε - Q_i)` (or the active variant's analogue) for keyword
/// `q`.
pub fn revenue_weights(inst: &ProblemInstance, state: &OverdraftState, q: usize) -> WeightMatrix {
    let mut w = WeightMatrix::new(inst.num_clients, inst.num_slots);
    state.weights_into(inst, q, &mut w);
    w
}

/// `max(Q + A - b̃, 0)`.
#[inline]
pub fn update_overdraft(q: f64, revenue: f64, realized_budget: f64) -> f64 {
    (q + revenue - realized_budget).max(0.0)
}

/// `max(Q + A - b̃, -C)`.
#[inline]
pub fn update_underdraft(q: f64, revenue: f64, realized_budget: f64, credit: f64) -> f64 {
    (q + revenue - realized_budget).max(-credit)
}

/// Thresholds that keep the overdraft nonpositive:
/// `Γ_i = min(⌊b_i⌋ - N·max_{q,s} r c, 0)` and `C_i = 1/ε - Γ_i`.
pub fn underdraft_thresholds(inst: &ProblemInstance, epsilon: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let budget = inst.budgets()?;
    let n = inst.cycle_slots as f64;
    let gamma: Vec<f64> = budget
        .iter()
        .enumerate()
        .map(|(i, &b)| (b.floor() - n * inst.max_click_value(i)).min(0.0))
        .collect();
    let credit = gamma.iter().map(|g| 1.0 / epsilon - g).collect();
    Ok((gamma, credit))
}

/// Largest amount a single posting can charge client `i`: its top bid over
/// pairs that can be posted (and, per click, clicked).
pub fn max_event_charge(inst: &ProblemInstance, i: usize, charging: Charging) -> f64 {
    let mut charge = 0.0f64;
    for q in 0..inst.num_keywords {
        for s in 0..inst.num_slots {
            let chargeable = inst.is_eligible(q, i, s)
                && (charging == Charging::PerImpression || inst.ctr[q][i][s] > 0.0);
            if chargeable {
                charge = charge.max(inst.bid[q][i]);
            }
        }
    }
    charge
}

/// Per-client bound that holds on every sample path: a throttled client is
/// never posted, and below the threshold a cycle can add at most `N` times
/// the largest per-event charge.
pub fn overdraft_sample_path_bound(
    inst: &ProblemInstance,
    epsilon: f64,
    charging: Charging,
) -> Result<Vec<f64>> {
    let budget = inst.budgets()?;
    let n = inst.cycle_slots as f64;
    Ok(budget
        .iter()
        .enumerate()
        .map(|(i, &b)| 1.0 / epsilon + n * max_event_charge(inst, i, charging) - b.floor())
        .collect())
}

/// Like [`underdraft_thresholds`] but with the per-event charge in place of
/// the expected charge, so that `Q_i <= 0` holds on every sample path.
pub fn sample_path_underdraft_thresholds(
    inst: &ProblemInstance,
    epsilon: f64,
    charging: Charging,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let budget = inst.budgets()?;
    let n = inst.cycle_slots as f64;
    let gamma: Vec<f64> = budget
        .iter()
        .enumerate()
        .map(|(i, &b)| (b.floor() - n * max_event_charge(inst, i, charging)).min(0.0))
        .collect();
    let credit = gamma.iter().map(|g| 1.0 / epsilon - g).collect();
    Ok((gamma, credit))
}

/// Draws `ĉ = c·(1 + Δ·u)` with `u` uniform in `[-1, 1]`, one draw per entry.
pub fn perturb_ctr(inst: &ProblemInstance, delta: f64, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in [0,1), got {delta}"
        )));
    }
    let mut rng = RngStream::new(seed, streams::ESTIMATE);
    Ok(inst
        .ctr
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| {
                    row.iter()
                        .map(|&c| c * (1.0 + delta * rng.symmetric()))
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// One budgeting cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleOutcome {
    /// Revenue charged to each client (`A_i`).
    pub revenue: Vec<f64>,
    pub impressions: Vec<u32>,
    pub realized_budget: Vec<f64>,
    pub queue_before: Vec<f64>,
    pub queue_after: Vec<f64>,
    pub num_queries: u32,
    pub num_clicks: u32,
}

impl CycleOutcome {
    pub fn total_revenue(&self) -> f64 {
        self.revenue.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct RevenueConfig {
    pub epsilon: f64,
    pub variant: RevenueVariant,
    pub charging: Charging,
}

impl RevenueConfig {
    pub fn standard(epsilon: f64) -> Self {
        RevenueConfig {
            epsilon,
            variant: RevenueVariant::Standard,
            charging: Charging::PerClick,
        }
    }
}

/// Seeded simulator of the online revenue algorithm.
#[derive(Debug, Clone)]
pub struct RevenueSimulator<'a> {
    inst: &'a ProblemInstance,
    budget: Vec<f64>,
    state: OverdraftState,
    charging: Charging,
    world: World,
    matcher: Matcher,
    weights: WeightMatrix,
    per_keyword: Vec<Assignment>,
    draw: SlotDraw,
    cycle: u64,
}

impl<'a> RevenueSimulator<'a> {
    pub fn new(inst: &'a ProblemInstance, config: RevenueConfig, seed: u64) -> Result<Self> {
        let budget = inst.budgets()?.to_vec();
        let state = OverdraftState::new(inst, config.epsilon, config.variant)?;
        Ok(RevenueSimulator {
            inst,
            budget,
            state,
            charging: config.charging,
            world: World::new(seed, &inst.keyword_prob, inst.num_slots),
            matcher: Matcher::new(),
            weights: WeightMatrix::new(inst.num_clients, inst.num_slots),
            per_keyword: vec![Assignment::default(); inst.num_keywords],
            draw: SlotDraw {
                keyword: None,
                click_uniform: Vec::with_capacity(inst.num_slots),
            },
            cycle: 0,
        })
    }

    pub fn with_initial_queues(mut self, queues: Vec<f64>) -> Self {
        assert_eq!(queues.len(), self.inst.num_clients);
        self.state.queues = queues;
        self
    }

    pub fn state(&self) -> &OverdraftState {
        &self.state
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// The assignment used for keyword `q` in the current cycle.
    pub fn current_assignment(&self, q: usize) -> &Assignment {
        &self.per_keyword[q]
    }

    /// Recomputes the per-keyword assignments. Weights only depend on the
    /// frozen queues, so one matching per keyword serves the whole cycle.
    fn plan(&mut self) {
        for q in 0..self.inst.num_keywords {
            self.state.weights_into(self.inst, q, &mut self.weights);
            self.matcher
                .solve_into(&self.weights, &mut self.per_keyword[q]);
        }
    }

    /// Serves one slot against the current plan.
    fn serve(&mut self, draw: &SlotDraw, out: &mut CycleOutcome) {
        let Some(q) = draw.keyword else { return };
        out.num_queries += 1;
        for (i, s) in self.per_keyword[q].pairs() {
            out.impressions[i] += 1;
            let clicked = draw.clicked(s, self.inst.ctr[q][i][s]);
            if clicked {
                out.num_clicks += 1;
            }
            if clicked || self.charging == Charging::PerImpression {
                out.revenue[i] += self.inst.bid[q][i];
            }
        }
    }

    fn empty_outcome(&self) -> CycleOutcome {
        let n = self.inst.num_clients;
        CycleOutcome {
            revenue: vec![0.0; n],
            impressions: vec![0; n],
            realized_budget: Vec::new(),
            queue_before: self.state.queues.clone(),
            queue_after: Vec::new(),
            num_queries: 0,
            num_clicks: 0,
        }
    }

    fn settle(&mut self, mut out: CycleOutcome, realized_budget: Vec<f64>) -> CycleOutcome {
        self.state.apply_update(&out.revenue, &realized_budget);
        out.realized_budget = realized_budget;
        out.queue_after = self.state.queues.clone();
        self.cycle += 1;
        out
    }

    /// Runs one cycle against the seeded world.
    pub fn step(&mut self) -> CycleOutcome {
        self.plan();
        let mut out = self.empty_outcome();
        let mut draw = std::mem::take(&mut self.draw);
        for _ in 0..self.inst.cycle_slots {
            self.world.next_slot_into(self.inst.arrival_prob, &mut draw);
            self.serve(&draw, &mut out);
        }
        self.draw = draw;
        let realized = self.world.integer_draws(&self.budget);
        self.settle(out, realized)
    }

    /// Runs one cycle on caller-supplied slot draws and realised budgets.
    pub fn step_with(&mut self, draws: &[SlotDraw], realized_budget: &[f64]) -> CycleOutcome {
        self.plan();
        let mut out = self.empty_outcome();
        for d in draws {
            self.serve(d, &mut out);
        }
        self.settle(out, realized_budget.to_vec())
    }

    pub fn run(&mut self, cycles: usize) -> RevenueTrace {
        let cycles: Vec<CycleOutcome> = (0..cycles).map(|_| self.step()).collect();
        RevenueTrace {
            cycle_slots: self.inst.cycle_slots,
            cycles,
        }
    }
}

/// The outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueTrace {
    pub cycle_slots: usize,
    pub cycles: Vec<CycleOutcome>,
}

impl RevenueTrace {
    /// Revenue per cycle.
    pub fn cycle_revenue(&self) -> Vec<f64> {
        self.cycles
            .iter()
            .map(CycleOutcome::total_revenue)
            .collect()
    }

    /// Time-average revenue per slot.
    pub fn average_revenue_per_slot(&self) -> f64 {
        self.cycle_revenue().iter().sum::<f64>() / (self.cycles.len() * self.cycle_slots) as f64
    }

    /// Time-average revenue charged to client `i` per cycle.
    pub fn average_client_revenue(&self, i: usize) -> f64 {
        self.cycles.iter().map(|c| c.revenue[i]).sum::<f64>() / self.cycles.len() as f64
    }

    /// Queue of client `i` after each cycle.
    pub fn queue_path(&self, i: usize) -> Vec<f64> {
        self.cycles.iter().map(|c| c.queue_after[i]).collect()
    }

    /// Largest queue of client `i`, including the initial level.
    pub fn max_queue(&self, i: usize) -> f64 {
        self.cycles
            .iter()
            .flat_map(|c| [c.queue_before[i], c.queue_after[i]])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of (cycle, client) pairs whose queue exceeded `bound[i]`.
    pub fn bound_violations(&self, bound: &[f64]) -> usize {
        self.cycles
            .iter()
            .map(|c| {
                c.queue_after
                    .iter()
                    .zip(bound)
                    .filter(|(q, b)| q > b)
                    .count()
            })
            .sum()
    }
}

/// Weight paths of the two-client unfairness example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfairnessTrace {
    pub epsilon: f64,
    /// `(w_1, w_2)` at the start of each cycle.
    pub weights: Vec<(f64, f64)>,
}

impl UnfairnessTrace {
    /// First cycle at which client 2 no longer leads by at least `tol`.
    pub fn catch_up_cycle(&self, tol: f64) -> Option<usize> {
        self.weights.iter().position(|(w1, w2)| w2 - w1 < tol)
    }
}

/// Two clients, one keyword, one slot, `N = 1`, `b = 0.6`, `c = 0.5`,
/// `r = 1`, and 2 queries per slot with probability 1/2 (otherwise none).
/// Client 1 starts at its threshold and client 2 at its credit floor.
pub fn unfairness_demo(epsilon: f64, horizon: usize, seed: u64) -> Result<UnfairnessTrace> {
    let inst = unfairness_instance();
    let (gamma, credit) = underdraft_thresholds(&inst, epsilon)?;
    let mut state = OverdraftState::new(
        &inst,
        epsilon,
        RevenueVariant::Underdraft {
            gamma: gamma.clone(),
            credit: credit.clone(),
        },
    )?;
    state.queues = vec![gamma[0], -credit[1]];
    let arrivals = BatchArrivals {
        sizes: vec![2, 0],
        probs: vec![0.5, 0.5],
    };
    let mut arrival_rng = RngStream::new(seed, streams::ARRIVALS);
    let mut click_rng = RngStream::new(seed, streams::CLICKS);
    let mut budget_rng = RngStream::new(seed, streams::SETTLEMENT);
    let budget = inst.budgets()?.to_vec();
    let mut matcher = Matcher::new();
    let mut w = WeightMatrix::new(2, 1);
    let mut weights = Vec::with_capacity(horizon);

    for _ in 0..horizon {
        state.weights_into(&inst, 0, &mut w);
        weights.push((w.get(0, 0), w.get(1, 0)));
        let (assignment, _) = matcher.solve(&w);
        let queries = arrivals.sample(&mut arrival_rng);
        let mut revenue = [0.0; 2];
        for _ in 0..queries {
            let u = click_rng.uniform();
            for (i, s) in assignment.pairs() {
                if u < inst.ctr[0][i][s] {
                    revenue[i] += inst.bid[0][i];
                }
            }
        }
        let realized: Vec<f64> = budget
            .iter()
            .map(|&b| sample_integer_amount(&mut budget_rng, b))
            .collect();
        state.apply_update(&revenue, &realized);
    }
    Ok(UnfairnessTrace { epsilon, weights })
}

fn unfairness_instance() -> ProblemInstance {
    ProblemInstance::new(
        vec![vec![vec![0.5], vec![0.5]]],
        vec![vec![1.0, 1.0]],
        0.5,
        vec![1.0],
        1,
    )
    .with_budget(vec![0.6, 0.6])
}
