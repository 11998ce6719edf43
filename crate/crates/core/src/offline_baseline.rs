//! Offline long-run optimum by projected dual subgradient with primal
//! averaging.
//!
//! The program chooses, for each keyword `q`, a sub-distribution `p_q` over
//! admissible matchings. A pair `(i, s)` used for keyword `q` earns
//! `objective[q][i][s]` per query and consumes `usage[q][i][s]` of client
//! `i`'s constraint. Per budgeting cycle, client `i`'s usage
//! `N Σ_q ν_q Σ_M p_{qM} Σ_s M_is usage` is either capped (`≤ rhs_i`, the
//! revenue model's budgets) or floored (`≥ rhs_i`, the click-through model's
//! impression requirements).
//!
//! The dual decomposes per keyword into a maximum-weight matching, so only
//! matchings the inner maximisation actually returns are ever stored.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matching::{Assignment, Matcher, WeightMatrix, INELIGIBLE};
use crate::model::ProblemInstance;
use crate::par::Execution;

/// Default iteration budget.
pub const DEFAULT_ITERATIONS: usize = 100_000;
/// Default tolerance on the relative residual and relative duality gap.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    AtMost,
    AtLeast,
}

/// A per-keyword matching program.
#[derive(Debug, Clone)]
pub struct MatchingLp<'a> {
    pub inst: &'a ProblemInstance,
    pub objective: Vec<Vec<Vec<f64>>>,
    pub usage: Vec<Vec<Vec<f64>>>,
    pub rhs: Vec<f64>,
    pub sense: Sense,
}

/// Per-keyword sub-distributions over matchings.
pub type Policy = Vec<Vec<(Assignment, f64)>>;

impl<'a> MatchingLp<'a> {
    /// Revenue per slot subject to per-cycle budgets.
    pub fn revenue(inst: &'a ProblemInstance) -> Result<Self> {
        let rhs = inst.budgets()?.to_vec();
        let value = pair_table(inst, |q, i, s| inst.ctr[q][i][s] * inst.bid[q][i]);
        Ok(MatchingLp {
            inst,
            objective: value.clone(),
            usage: value,
            rhs,
            sense: Sense::AtMost,
        })
    }

    /// Clicks per slot subject to per-cycle impression requirements.
    pub fn ctr(inst: &'a ProblemInstance, requirement: &[f64]) -> Self {
        MatchingLp {
            inst,
            objective: pair_table(inst, |q, i, s| inst.ctr[q][i][s]),
            usage: pair_table(inst, |_, _, _| 1.0),
            rhs: requirement.to_vec(),
            sense: Sense::AtLeast,
        }
    }

    fn n(&self) -> f64 {
        self.inst.cycle_slots as f64
    }

    /// Weights `o - δa` (capped) or `o + μa` (floored) for keyword `q`.
    pub fn weights_into(&self, q: usize, duals: &[f64], w: &mut WeightMatrix) {
        let inst = self.inst;
        for i in 0..inst.num_clients {
            for s in 0..inst.num_slots {
                let x = if inst.is_eligible(q, i, s) {
                    let a = self.usage[q][i][s] * duals[i];
                    match self.sense {
                        Sense::AtMost => self.objective[q][i][s] - a,
                        Sense::AtLeast => self.objective[q][i][s] + a,
                    }
                } else {
                    INELIGIBLE
                };
                w.set(i, s, x);
            }
        }
    }

    /// Objective per slot and usage per cycle of a policy, computed exactly.
    pub fn evaluate(&self, p: &Policy) -> Result<(Vec<f64>, f64)> {
        let inst = self.inst;
        if p.len() != inst.num_keywords {
            return Err(Error::InvalidArgument(
                "policy needs one distribution per keyword".into(),
            ));
        }
        let mut usage = vec![0.0; inst.num_clients];
        let mut objective = 0.0;
        for (q, dist) in p.iter().enumerate() {
            let total: f64 = dist.iter().map(|(_, x)| x).sum();
            if dist.iter().any(|(_, x)| !(0.0..=1.0 + 1e-12).contains(x)) || total > 1.0 + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "keyword {q}: not a sub-distribution (total {total})"
                )));
            }
            let nu = inst.keyword_rate(q);
            for (m, x) in dist {
                for (i, s) in m.pairs() {
                    objective += nu * x * self.objective[q][i][s];
                    usage[i] += self.n() * nu * x * self.usage[q][i][s];
                }
            }
        }
        Ok((usage, objective))
    }

    /// Dual function value at `duals`, an upper bound on the optimum for any
    /// nonnegative duals.
    pub fn dual_value(&self, duals: &[f64]) -> f64 {
        let inst = self.inst;
        let mut w = WeightMatrix::new(inst.num_clients, inst.num_slots);
        let mut matcher = Matcher::new();
        let mut value = 0.0;
        for q in 0..inst.num_keywords {
            self.weights_into(q, duals, &mut w);
            value += inst.keyword_rate(q) * matcher.solve(&w).1;
        }
        let offset: f64 = duals.iter().zip(&self.rhs).map(|(d, b)| d * b).sum::<f64>() / self.n();
        match self.sense {
            Sense::AtMost => value + offset,
            Sense::AtLeast => value - offset,
        }
    }

    /// Largest constraint violation per cycle, divided by `max(rhs_i, 1)`.
    pub fn relative_residual(&self, usage: &[f64]) -> f64 {
        usage
            .iter()
            .zip(&self.rhs)
            .map(|(&u, &b)| {
                let v = match self.sense {
                    Sense::AtMost => u - b,
                    Sense::AtLeast => b - u,
                };
                v.max(0.0) / b.max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Largest per-pair usage; sets the automatic step size.
    pub fn max_usage(&self) -> f64 {
        self.usage
            .iter()
            .flatten()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Automatic step: keeps the dual oscillation's effect on the objective
    /// per slot near `1e-5`.
    pub fn auto_step(&self) -> f64 {
        let a = self.max_usage();
        if a == 0.0 {
            1.0
        } else {
            2e-5 / (self.n() * a * a)
        }
    }
}

fn pair_table(
    inst: &ProblemInstance,
    f: impl Fn(usize, usize, usize) -> f64,
) -> Vec<Vec<Vec<f64>>> {
    (0..inst.num_keywords)
        .map(|q| {
            (0..inst.num_clients)
                .map(|i| (0..inst.num_slots).map(|s| f(q, i, s)).collect())
                .collect()
        })
        .collect()
}

/// One projected subgradient step. Returns the per-keyword maximisers.
pub fn dual_gradient_step(lp: &MatchingLp, duals: &mut [f64], step: f64) -> Vec<Assignment> {
    let inst = lp.inst;
    let mut w = WeightMatrix::new(inst.num_clients, inst.num_slots);
    let mut matcher = Matcher::new();
    let mut chosen = Vec::with_capacity(inst.num_keywords);
    for q in 0..inst.num_keywords {
        lp.weights_into(q, duals, &mut w);
        chosen.push(matcher.solve(&w).0);
    }
    let usage = usage_of(lp, &chosen);
    project(lp, duals, &usage, step);
    chosen
}

fn usage_of(lp: &MatchingLp, chosen: &[Assignment]) -> Vec<f64> {
    let mut usage = vec![0.0; lp.inst.num_clients];
    for (q, m) in chosen.iter().enumerate() {
        let nu = lp.inst.keyword_rate(q);
        for (i, s) in m.pairs() {
            usage[i] += lp.n() * nu * lp.usage[q][i][s];
        }
    }
    usage
}

fn project(lp: &MatchingLp, duals: &mut [f64], usage: &[f64], step: f64) {
    for i in 0..duals.len() {
        let g = usage[i] - lp.rhs[i];
        duals[i] = match lp.sense {
            Sense::AtMost => (duals[i] + step * g).max(0.0),
            Sense::AtLeast => (duals[i] - step * g).max(0.0),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineSolution {
    /// Averaged primal, repaired to satisfy the constraints exactly when
    /// possible.
    pub policy: Policy,
    /// Final duals.
    pub duals: Vec<f64>,
    /// Objective per slot of the averaged primal.
    pub r_star: f64,
    /// Per-client usage per cycle under the averaged primal.
    pub lambda: Vec<f64>,
    /// Relative constraint residual of the averaged primal before repair.
    pub raw_residual: f64,
    /// Relative constraint residual of `policy`.
    pub residual: f64,
    /// `(dual_bound - r_star) / max(|dual_bound|, 1e-12)`.
    pub gap: f64,
    /// Smallest dual value seen; an upper bound on the optimum.
    pub dual_bound: f64,
    pub iterations: usize,
    pub step: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<'p> {
    /// `None` picks [`MatchingLp::auto_step`].
    pub step: Option<f64>,
    pub iterations: usize,
    pub tolerance: f64,
    /// Dual starting point shared by all clients.
    pub initial_dual: f64,
    /// A policy meeting every floor, used to repair floored programs.
    pub interior: Option<&'p Policy>,
}

impl Default for SolveOptions<'_> {
    fn default() -> Self {
        SolveOptions {
            step: None,
            iterations: DEFAULT_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            initial_dual: 0.0,
            interior: None,
        }
    }
}

/// Step multiplier during the first half: four equal phases at
/// `10^4, 10^3, 10^2, 10` times the base step, so the duals travel to the
/// right region quickly before the averaged half runs at the base step.
fn warmup_factor(k: usize, start: usize) -> f64 {
    if k >= start || start < 4 {
        return 1.0;
    }
    let phase = 4 * k / start;
    10f64.powi(4 - phase as i32)
}

/// Runs the subgradient iteration and averages the primal over the second
/// half of the iterations, then repairs it (see [`repair`]). Fails with
/// [`Error::NotConverged`], carrying the solution, when either the repaired
/// residual or the relative duality gap exceeds the tolerance.
pub fn solve_lp(lp: &MatchingLp, opts: SolveOptions) -> Result<OfflineSolution> {
    if opts.iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }
    let step = opts.step.unwrap_or_else(|| lp.auto_step());
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {step}"
        )));
    }
    let inst = lp.inst;
    let mut duals = vec![opts.initial_dual; inst.num_clients];
    let mut counts: Vec<HashMap<Assignment, usize>> = vec![HashMap::new(); inst.num_keywords];
    let mut w = WeightMatrix::new(inst.num_clients, inst.num_slots);
    let mut matcher = Matcher::new();
    let mut chosen = vec![Assignment::default(); inst.num_keywords];
    let start = opts.iterations / 2;
    let mut dual_bound = f64::INFINITY;
    let probe_every = (opts.iterations / 200).max(1);

    for k in 0..opts.iterations {
        let mut value = 0.0;
        for q in 0..inst.num_keywords {
            lp.weights_into(q, &duals, &mut w);
            value += inst.keyword_rate(q) * matcher.solve_into(&w, &mut chosen[q]);
        }
        if k % probe_every == 0 || k + 1 == opts.iterations {
            let offset: f64 = duals.iter().zip(&lp.rhs).map(|(d, b)| d * b).sum::<f64>() / lp.n();
            let d = match lp.sense {
                Sense::AtMost => value + offset,
                Sense::AtLeast => value - offset,
            };
            dual_bound = dual_bound.min(d);
        }
        if k >= start {
            for q in 0..inst.num_keywords {
                if !chosen[q].is_empty() {
                    *counts[q].entry(chosen[q].clone()).or_default() += 1;
                }
            }
        }
        let usage = usage_of(lp, &chosen);
        project(lp, &mut duals, &usage, step * warmup_factor(k, start));
    }

    let samples = (opts.iterations - start) as f64;
    let policy: Policy = counts
        .into_iter()
        .map(|c| {
            let mut dist: Vec<(Assignment, f64)> = c
                .into_iter()
                .map(|(m, n)| (m, n as f64 / samples))
                .collect();
            dist.sort_by(|a, b| a.0.slot_of.cmp(&b.0.slot_of));
            dist
        })
        .collect();
    let (raw_lambda, _) = lp.evaluate(&policy)?;
    let raw_residual = lp.relative_residual(&raw_lambda);
    let policy = repair(lp, policy, &raw_lambda, opts.interior)?;
    let (lambda, r_star) = lp.evaluate(&policy)?;
    let residual = lp.relative_residual(&lambda);
    let gap = (dual_bound - r_star) / dual_bound.abs().max(1e-12);
    let sol = OfflineSolution {
        policy,
        duals,
        r_star,
        lambda,
        raw_residual,
        residual,
        gap,
        dual_bound,
        iterations: opts.iterations,
        step,
    };
    let worst = residual.max(gap.max(0.0));
    if worst > opts.tolerance {
        return Err(Error::NotConverged {
            residual: worst,
            tolerance: opts.tolerance,
            solution: Box::new(sol),
        });
    }
    Ok(sol)
}

/// Makes an averaged primal feasible. Capped programs scale every keyword's
/// distribution by the largest factor that fits all budgets. Floored
/// programs mix with `interior`, a policy meeting every floor, using the
/// smallest weight that closes all shortfalls.
pub fn repair(
    lp: &MatchingLp,
    policy: Policy,
    usage: &[f64],
    interior: Option<&Policy>,
) -> Result<Policy> {
    match lp.sense {
        Sense::AtMost => {
            let theta = usage
                .iter()
                .zip(&lp.rhs)
                .filter(|(u, _)| **u > 0.0)
                .map(|(u, b)| b / u)
                .fold(1.0f64, f64::min);
            if theta >= 1.0 {
                return Ok(policy);
            }
            Ok(policy
                .into_iter()
                .map(|d| d.into_iter().map(|(m, x)| (m, x * theta)).collect())
                .collect())
        }
        Sense::AtLeast => {
            let Some(p0) = interior else {
                return Ok(policy);
            };
            let (u0, _) = lp.evaluate(p0)?;
            let mut t = 0.0f64;
            for i in 0..usage.len() {
                if usage[i] < lp.rhs[i] {
                    if u0[i] <= usage[i] {
                        return Err(Error::Infeasible(format!(
                            "interior point does not lift client {i}"
                        )));
                    }
                    t = t.max((lp.rhs[i] - usage[i]) / (u0[i] - usage[i]));
                }
            }
            if t == 0.0 {
                return Ok(policy);
            }
            Ok(mix(&policy, p0, t.min(1.0)))
        }
    }
}

/// `(1 - t)·a + t·b`, merged by matching.
pub fn mix(a: &Policy, b: &Policy, t: f64) -> Policy {
    a.iter()
        .zip(b)
        .map(|(da, db)| {
            let mut acc: HashMap<&Assignment, f64> = HashMap::new();
            for (m, x) in da {
                *acc.entry(m).or_default() += (1.0 - t) * x;
            }
            for (m, x) in db {
                *acc.entry(m).or_default() += t * x;
            }
            let mut out: Vec<(Assignment, f64)> = acc
                .into_iter()
                .filter(|(_, x)| *x > 0.0)
                .map(|(m, x)| (m.clone(), x))
                .collect();
            out.sort_by(|x, y| x.0.slot_of.cmp(&y.0.slot_of));
            out
        })
        .collect()
}

/// Revenue optimum of a budgeted instance.
pub fn solve_offline(
    inst: &ProblemInstance,
    step: Option<f64>,
    iterations: usize,
) -> Result<OfflineSolution> {
    let lp = MatchingLp::revenue(inst)?;
    solve_lp(
        &lp,
        SolveOptions {
            step,
            iterations,
            ..SolveOptions::default()
        },
    )
}

/// As [`solve_offline`] but returns the solution even when the residual is
/// above tolerance.
pub fn solve_offline_lenient(
    inst: &ProblemInstance,
    opts: SolveOptions,
) -> Result<OfflineSolution> {
    let lp = MatchingLp::revenue(inst)?;
    match solve_lp(&lp, opts) {
        Err(Error::NotConverged { solution, .. }) => Ok(*solution),
        other => other,
    }
}

/// Per-client revenue per cycle and revenue per slot of a policy.
pub fn evaluate_rate_vector(inst: &ProblemInstance, p: &Policy) -> Result<(Vec<f64>, f64)> {
    MatchingLp::revenue(inst)?.evaluate(p)
}

/// `min_i (b_i - λ_i)`.
pub fn compute_b2(inst: &ProblemInstance, sol: &OfflineSolution) -> Result<f64> {
    let budget = inst.budgets()?;
    Ok(budget
        .iter()
        .zip(&sol.lambda)
        .map(|(b, l)| b - l)
        .fold(f64::INFINITY, f64::min))
}

/// Nonempty matchings of keyword `q` whose edges all have positive
/// objective.
pub fn useful_matchings(lp: &MatchingLp, q: usize) -> Vec<Assignment> {
    let inst = lp.inst;
    let mut out = Vec::new();
    let mut cur = vec![None; inst.num_clients];
    let mut used = vec![false; inst.num_slots];
    fn go(
        lp: &MatchingLp,
        q: usize,
        i: usize,
        cur: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        out: &mut Vec<Assignment>,
    ) {
        if i == cur.len() {
            if cur.iter().any(Option::is_some) {
                out.push(Assignment {
                    slot_of: cur.clone(),
                });
            }
            return;
        }
        go(lp, q, i + 1, cur, used, out);
        for s in 0..used.len() {
            if !used[s] && lp.inst.is_eligible(q, i, s) && lp.objective[q][i][s] > 0.0 {
                used[s] = true;
                cur[i] = Some(s);
                go(lp, q, i + 1, cur, used, out);
                cur[i] = None;
                used[s] = false;
            }
        }
    }
    go(lp, q, 0, &mut cur, &mut used, &mut out);
    out
}

pub const BRUTE_FORCE_MAX_KEYWORDS: usize = 2;
pub const BRUTE_FORCE_MAX_CANDIDATES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// Best grid objective per slot; never above the true optimum.
    pub r_star: f64,
    /// The true optimum is at most `r_star + tolerance`.
    pub tolerance: f64,
    pub policy: Policy,
}

/// Exhaustive search over the grid `p_{qM} ∈ {0, 1/g, ..., 1}` for the
/// revenue program. Rounding an optimal point down to the grid stays
/// feasible and loses at most `Σ_q ν_q Σ_M value(q, M) / g`, which is the
/// reported tolerance.
pub fn brute_force_offline(
    inst: &ProblemInstance,
    grid: usize,
    exec: Execution,
) -> Result<BruteForce> {
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be at least 1".into()));
    }
    if inst.num_keywords > BRUTE_FORCE_MAX_KEYWORDS {
        return Err(Error::TooLarge {
            what: "keywords for grid search",
            size: inst.num_keywords,
            limit: BRUTE_FORCE_MAX_KEYWORDS,
        });
    }
    let lp = MatchingLp::revenue(inst)?;
    let n = lp.n();
    let candidates: Vec<Vec<Assignment>> = (0..inst.num_keywords)
        .map(|q| useful_matchings(&lp, q))
        .collect();
    for c in &candidates {
        if c.len() > BRUTE_FORCE_MAX_CANDIDATES {
            return Err(Error::TooLarge {
                what: "candidate matchings per keyword",
                size: c.len(),
                limit: BRUTE_FORCE_MAX_CANDIDATES,
            });
        }
    }

    // Every grid point of every keyword, as (weights, objective, usage).
    struct Point {
        weights: Vec<usize>,
        objective: f64,
        usage: Vec<f64>,
    }
    let h = 1.0 / grid as f64;
    let per_keyword: Vec<Vec<Point>> = candidates
        .iter()
        .enumerate()
        .map(|(q, cands)| {
            let nu = inst.keyword_rate(q);
            simplex_grid(cands.len(), grid)
                .into_iter()
                .map(|weights| {
                    let mut usage = vec![0.0; inst.num_clients];
                    let mut objective = 0.0;
                    for (m, &k) in cands.iter().zip(&weights) {
                        let x = k as f64 * h;
                        for (i, s) in m.pairs() {
                            objective += nu * x * lp.objective[q][i][s];
                            usage[i] += n * nu * x * lp.usage[q][i][s];
                        }
                    }
                    Point {
                        weights,
                        objective,
                        usage,
                    }
                })
                .collect()
        })
        .collect();

    let feasible = |usage: &[f64]| usage.iter().zip(&lp.rhs).all(|(u, b)| *u <= b + 1e-12);
    let first = &per_keyword[0];
    let rest: Vec<&Point> = match per_keyword.get(1) {
        Some(points) => points.iter().collect(),
        None => Vec::new(),
    };
    let best = exec
        .map_range(first.len(), |a| {
            let pa = &first[a];
            let mut best: Option<(f64, usize, Option<usize>)> = None;
            let mut consider = |obj: f64, b: Option<usize>| {
                if best.is_none_or(|(v, _, _)| obj > v) {
                    best = Some((obj, a, b));
                }
            };
            if rest.is_empty() {
                if feasible(&pa.usage) {
                    consider(pa.objective, None);
                }
            } else {
                let mut usage = vec![0.0; pa.usage.len()];
                for (b, pb) in rest.iter().enumerate() {
                    for i in 0..usage.len() {
                        usage[i] = pa.usage[i] + pb.usage[i];
                    }
                    if feasible(&usage) {
                        consider(pa.objective + pb.objective, Some(b));
                    }
                }
            }
            best
        })
        .into_iter()
        .flatten()
        .fold(
            None,
            |acc: Option<(f64, usize, Option<usize>)>, x| match acc {
                Some(a) if a.0 >= x.0 => Some(a),
                _ => Some(x),
            },
        )
        .expect("the empty policy is always feasible");

    let mut policy: Policy = vec![Vec::new(); inst.num_keywords];
    let pick = [Some(best.1), best.2];
    for (q, idx) in pick.iter().enumerate().take(inst.num_keywords) {
        if let Some(idx) = idx {
            let point = &per_keyword[q][*idx];
            for (m, &k) in candidates[q].iter().zip(&point.weights) {
                if k > 0 {
                    policy[q].push((m.clone(), k as f64 * h));
                }
            }
        }
    }
    let tolerance: f64 = candidates
        .iter()
        .enumerate()
        .map(|(q, cands)| {
            inst.keyword_rate(q)
                * cands
                    .iter()
                    .map(|m| m.pairs().map(|(i, s)| lp.objective[q][i][s]).sum::<f64>())
                    .sum::<f64>()
        })
        .sum::<f64>()
        * h;
    Ok(BruteForce {
        r_star: best.0,
        tolerance,
        policy,
    })
}

/// All `k ∈ ℕ^dim` with `Σ k ≤ grid`.
fn simplex_grid(dim: usize, grid: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; dim];
    fn go(j: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if j == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[j] = k;
            go(j + 1, left - k, cur, out);
        }
        cur[j] = 0;
    }
    go(0, grid, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(b: f64) -> ProblemInstance {
        ProblemInstance::single(0.9, 0.5, 1.0, 1).with_budget(vec![b])
    }

    #[test]
    fn first_step_from_zero() {
        let inst = single(0.3);
        let lp = MatchingLp::revenue(&inst).unwrap();
        let mut d = vec![0.0];
        let m = dual_gradient_step(&lp, &mut d, 0.1);
        assert_eq!(m[0].slot_of, vec![Some(0)]);
        assert_abs_diff_eq!(d[0], 0.15 * 0.1, epsilon = 1e-12);
    }

    #[test]
    fn throttled_duals_only_shrink() {
        let inst = single(0.3);
        let lp = MatchingLp::revenue(&inst).unwrap();
        let mut d = vec![1.0];
        let m = dual_gradient_step(&lp, &mut d, 0.5);
        assert!(m[0].is_empty());
        assert_abs_diff_eq!(d[0], 1.0 - 0.5 * 0.3, epsilon = 1e-12);
    }

    #[test]
    fn single_client_optima() {
        let sol = solve_offline(&single(0.3), None, DEFAULT_ITERATIONS).unwrap();
        assert_abs_diff_eq!(sol.r_star, 0.3, epsilon = 1e-3);
        assert_abs_diff_eq!(sol.lambda[0], 0.3, epsilon = 1e-3);
        assert_abs_diff_eq!(compute_b2(&single(0.3), &sol).unwrap(), 0.0, epsilon = 1e-3);

        let sol = solve_offline(&single(10.0), None, DEFAULT_ITERATIONS).unwrap();
        assert_abs_diff_eq!(sol.r_star, 0.45, epsilon = 1e-3);
        assert_abs_diff_eq!(
            compute_b2(&single(10.0), &sol).unwrap(),
            9.55,
            epsilon = 1e-3
        );
    }

    #[test]
    fn zero_ctr_is_zero() {
        let inst = ProblemInstance::single(0.9, 0.0, 1.0, 1).with_budget(vec![1.0]);
        let sol = solve_offline(&inst, None, 1000).unwrap();
        assert_eq!(sol.r_star, 0.0);
        assert_eq!(sol.duals, vec![0.0]);
    }

    #[test]
    fn rate_vector() {
        let inst = ProblemInstance::single(0.9, 0.5, 1.0, 4).with_budget(vec![1.0]);
        let (l, r) = evaluate_rate_vector(&inst, &vec![vec![]]).unwrap();
        assert_eq!((l, r), (vec![0.0], 0.0));
        let full = vec![vec![(
            Assignment {
                slot_of: vec![Some(0)],
            },
            1.0,
        )]];
        let (l, r) = evaluate_rate_vector(&inst, &full).unwrap();
        assert_abs_diff_eq!(l[0], 4.0 * 0.45, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.45, epsilon = 1e-12);
        let bad = vec![vec![(
            Assignment {
                slot_of: vec![Some(0)],
            },
            1.5,
        )]];
        assert!(evaluate_rate_vector(&inst, &bad).is_err());
        let empty = compute_b2(
            &inst,
            &OfflineSolution {
                policy: vec![vec![]],
                duals: vec![0.0],
                r_star: 0.0,
                lambda: vec![0.0],
                raw_residual: 0.0,
                residual: 0.0,
                gap: 0.0,
                dual_bound: 0.0,
                iterations: 1,
                step: 1.0,
            },
        )
        .unwrap();
        assert_eq!(empty, 1.0);
    }

    #[test]
    fn weak_duality_and_bracketing() {
        let inst = ProblemInstance::new(
            vec![
                vec![vec![0.6], vec![0.4], vec![0.5]],
                vec![vec![0.3], vec![0.7], vec![0.2]],
            ],
            vec![vec![1.0, 2.0, 1.0], vec![2.0, 1.0, 1.0]],
            0.8,
            vec![0.5, 0.5],
            10,
        )
        .with_budget(vec![1.0, 2.0, 1.5]);
        let lp = MatchingLp::revenue(&inst).unwrap();
        let sol = solve_lp(&lp, SolveOptions::default()).unwrap();
        for d in [0.0, 0.2, 0.5, 1.0, 3.0] {
            assert!(lp.dual_value(&[d, d / 2.0, d]) >= sol.r_star - 1e-4);
        }
        assert!(sol.dual_bound >= sol.r_star - 1e-4);
        let bf = brute_force_offline(&inst, 40, Execution::Parallel).unwrap();
        assert!(sol.r_star >= bf.r_star - 1e-3);
        assert!(sol.r_star <= bf.r_star + bf.tolerance + 1e-3);
    }

    #[test]
    fn brute_force_edge_cases() {
        let inst = ProblemInstance::single(0.9, 0.5, 1.0, 1).with_budget(vec![0.0]);
        assert_eq!(
            brute_force_offline(&inst, 10, Execution::Sequential)
                .unwrap()
                .r_star,
            0.0
        );
        let inst = single(10.0);
        assert_abs_diff_eq!(
            brute_force_offline(&inst, 10, Execution::Sequential)
                .unwrap()
                .r_star,
            0.45,
            epsilon = 1e-12
        );
        let wide = ProblemInstance::new(
            vec![vec![vec![0.5]; 4]],
            vec![vec![1.0; 4]],
            0.5,
            vec![1.0],
            1,
        )
        .with_budget(vec![1.0; 4]);
        assert!(matches!(
            brute_force_offline(&wide, 10, Execution::Sequential),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn simplex_grid_counts() {
        assert_eq!(simplex_grid(3, 4).len(), 35);
        assert_eq!(simplex_grid(1, 4).len(), 5);
    }

    #[test]
    fn ctr_program_meets_requirements() {
        let inst = ProblemInstance::new(
            vec![vec![vec![0.9, 0.1], vec![0.2, 0.05]]],
            vec![vec![1.0, 1.0]],
            0.5,
            vec![1.0],
            10,
        );
        let lp = MatchingLp::ctr(&inst, &[1.0, 4.0]);
        let sol = solve_lp(&lp, SolveOptions::default()).unwrap();
        assert!(sol.lambda[1] >= 4.0 * (1.0 - 1e-4));
        assert!(sol.dual_bound >= sol.r_star - 1e-4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn duals_stay_nonnegative(b in 0.0..2.0f64, c in 0.0..1.0f64, step in 0.001..2.0f64, d0 in 0.0..3.0f64) {
                let inst = ProblemInstance::single(0.9, c, 1.0, 3).with_budget(vec![b]);
                let lp = MatchingLp::revenue(&inst).unwrap();
                let mut d = vec![d0];
                for _ in 0..50 {
                    dual_gradient_step(&lp, &mut d, step);
                    prop_assert!(d[0] >= 0.0);
                }
            }
        }
    }
}
