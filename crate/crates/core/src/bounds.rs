//! Lower bounds on the expected overdraft level of any near-optimal policy,
//! and the threshold policy that shows they are tight up to constants.
//!
//! Logarithms are natural throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

/// Inputs shared by the single- and multi-queue bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundParams {
    pub epsilon: f64,
    /// Probability of no query in a whole budgeting cycle.
    pub phi: f64,
    /// Probability that every realised budget is positive.
    pub p_plus: f64,
}

impl LowerBoundParams {
    pub fn new(epsilon: f64, phi: f64, p_plus: f64) -> Result<Self> {
        let p = LowerBoundParams {
            epsilon,
            phi,
            p_plus,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "phi must lie in (0,1), got {}",
                self.phi
            )));
        }
        if !(self.p_plus > 0.0 && self.p_plus <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p_plus must lie in (0,1], got {}",
                self.p_plus
            )));
        }
        Ok(())
    }

    /// `φ = (1 − ν)^N` and `P₊ = Π_i Pr(b̃_i > 0) = Π_i min(b_i, 1)` under
    /// the two-point budget randomisation.
    pub fn from_instance(inst: &ProblemInstance, epsilon: f64) -> Result<Self> {
        let phi = (1.0 - inst.arrival_prob).powi(inst.cycle_slots as i32);
        let p_plus = inst.budgets()?.iter().map(|&b| b.min(1.0)).product();
        Self::new(epsilon, phi, p_plus)
    }

    fn log_term(&self) -> f64 {
        2.0 * (1.0 - (self.phi * self.p_plus).ln())
    }
}

/// `ln(1/ε) / (2(1 − ln(φP₊))) − 1`.
pub fn single_queue_lower_bound(p: &LowerBoundParams) -> f64 {
    (1.0 / p.epsilon).ln() / p.log_term() - 1.0
}

/// Per-client revenue region `{λ ≥ 0 : Σ_i h_i^(n) λ_i ≤ d^(n)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceRegion {
    pub rows: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl HalfspaceRegion {
    pub fn new(rows: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let r = HalfspaceRegion { rows, offsets };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() || self.rows.len() != self.offsets.len() {
            return Err(Error::InvalidArgument(
                "region needs one offset per nonempty row".into(),
            ));
        }
        let width = self.rows[0].len();
        for (n, row) in self.rows.iter().enumerate() {
            if row.len() != width || row.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "row {n}: coefficients must be finite and nonnegative"
                )));
            }
            if !(self.offsets[n] > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {n}: offset must be positive"
                )));
            }
        }
        if self.max_coefficient() <= 0.0 {
            return Err(Error::InvalidArgument(
                "region has no positive coefficient".into(),
            ));
        }
        Ok(())
    }

    pub fn max_coefficient(&self) -> f64 {
        self.rows.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn contains(&self, lambda: &[f64]) -> bool {
        lambda.iter().all(|&x| x >= 0.0)
            && self
                .rows
                .iter()
                .zip(&self.offsets)
                .all(|(h, d)| h.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>() <= *d)
    }
}

/// `(C1, C2)` with `C1 = 2(1 − ln(φP₊))·max h` and `C2 = max(ln max h, 0)`.
pub fn multi_queue_constants(p: &LowerBoundParams, region: &HalfspaceRegion) -> (f64, f64) {
    let h = region.max_coefficient();
    (p.log_term() * h, h.ln().max(0.0))
}

/// `(ln(1/ε) − C2)/C1 − 1`, a bound on `Σ_i Q̄_i`.
pub fn multi_queue_lower_bound(p: &LowerBoundParams, region: &HalfspaceRegion) -> f64 {
    let (c1, c2) = multi_queue_constants(p, region);
    ((1.0 / p.epsilon).ln() - c2) / c1 - 1.0
}

/// Region of a one-keyword, two-client, one-slot instance. Client `i` alone
/// would earn `cap_i = N ν c_i r_i` per cycle, so the shared slot gives
/// `λ_1/cap_1 + λ_2/cap_2 ≤ 1`, written in units of the larger capacity.
/// The budget rows are `λ_i ≤ b_i`.
pub fn two_client_region(inst: &ProblemInstance) -> Result<HalfspaceRegion> {
    if inst.num_keywords != 1 || inst.num_clients != 2 || inst.num_slots != 1 {
        return Err(Error::InvalidArgument(
            "two_client_region needs 1 keyword, 2 clients and 1 slot".into(),
        ));
    }
    let budget = inst.budgets()?;
    let n = inst.cycle_slots as f64;
    let cap: Vec<f64> = (0..2)
        .map(|i| {
            if inst.is_eligible(0, i, 0) {
                n * inst.arrival_prob * inst.ctr[0][i][0] * inst.bid[0][i]
            } else {
                0.0
            }
        })
        .collect();
    if cap.iter().any(|&c| c <= 0.0) {
        return Err(Error::InvalidArgument(
            "both clients need positive revenue capacity".into(),
        ));
    }
    let top = cap[0].max(cap[1]);
    HalfspaceRegion::new(
        vec![
            vec![top / cap[0], top / cap[1]],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ],
        vec![top, budget[0], budget[1]],
    )
}

/// Admission control on a queue fed by batches of 2 with probability `ν`
/// and served at rate 1: below `threshold` accept everything, at it accept
/// one with probability `p1` or two with probability `p2`, above it reject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub threshold: usize,
    pub p1: f64,
    pub p2: f64,
    pub nu: f64,
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p1 >= 0.0 && self.p2 >= 0.0 && self.p1 + self.p2 <= 1.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "p1, p2 must be probabilities with p1 + p2 <= 1, got {}, {}",
                self.p1, self.p2
            )));
        }
        if !(self.nu > 0.5 && self.nu < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "nu must lie in (1/2, 1), got {}",
                self.nu
            )));
        }
        if 1.0 - (self.p1 + self.p2) * self.nu <= 0.0 {
            return Err(Error::InvalidArgument(
                "1 - (p1 + p2)·nu must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdStationary {
    /// `π_0 … π_{T+1}`.
    pub pi: Vec<f64>,
    /// Accepted arrivals per step.
    pub throughput: f64,
    pub mean_queue: f64,
}

/// Exact stationary law of the threshold policy by the cut equations
/// `π_i ν = π_{i+1}(1 − ν)` for `i ≤ T − 2`,
/// `π_{T−1} ν = π_T (1 − (p1 + p2)ν)` and `π_T p2 ν = π_{T+1}`.
pub fn threshold_policy_stationary(policy: &ThresholdPolicy) -> Result<ThresholdStationary> {
    policy.validate()?;
    let ThresholdPolicy {
        threshold: t,
        p1,
        p2,
        nu,
    } = *policy;
    let mut pi = Vec::with_capacity(t + 2);
    pi.push(1.0);
    for _ in 0..t.saturating_sub(1) {
        let last = *pi.last().unwrap();
        pi.push(last * nu / (1.0 - nu));
    }
    if t >= 1 {
        let last = *pi.last().unwrap();
        pi.push(last * nu / (1.0 - (p1 + p2) * nu));
    }
    let last = *pi.last().unwrap();
    pi.push(last * p2 * nu);
    let total: f64 = pi.iter().sum();
    for x in &mut pi {
        *x /= total;
    }
    let below: f64 = pi[..t].iter().sum();
    let throughput = nu * (2.0 * below + pi[t] * (2.0 * p2 + p1));
    let mean_queue = pi.iter().enumerate().map(|(i, x)| i as f64 * x).sum();
    Ok(ThresholdStationary {
        pi,
        throughput,
        mean_queue,
    })
}

/// `C(ε) = (2ν − 1 + ε)(1 − ν(p1 + p2)) / (ν(2 − 2(1 − ν)p2 − p1))`.
pub fn threshold_constant(nu: f64, p1: f64, p2: f64, epsilon: f64) -> f64 {
    (2.0 * nu - 1.0 + epsilon) * (1.0 - nu * (p1 + p2)) / (nu * (2.0 - 2.0 * (1.0 - nu) * p2 - p1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub epsilon: f64,
    /// Closed-form threshold.
    pub t_real: f64,
    /// `round(t_real)`, at least 0.
    pub t_int: usize,
    pub throughput: f64,
    pub mean_queue: f64,
    /// Exact throughputs at `t_int − 1` (0 when `t_int = 0`) and `t_int + 1`.
    pub bracket: (f64, f64),
}

impl ThresholdChoice {
    /// Whether `1 − ε` lies between the throughputs at the neighbouring
    /// integer thresholds.
    pub fn within_bracket(&self) -> bool {
        let target = 1.0 - self.epsilon;
        self.bracket.0 <= target && target <= self.bracket.1
    }
}

/// Threshold `(ln(1/ε) + ln C(ε)) / ln(ν/(1 − ν))` and its exact check at
/// the nearest integer.
pub fn threshold_for_epsilon(nu: f64, p1: f64, p2: f64, epsilon: f64) -> Result<ThresholdChoice> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    let base = ThresholdPolicy {
        threshold: 0,
        p1,
        p2,
        nu,
    };
    base.validate()?;
    let c = threshold_constant(nu, p1, p2, epsilon);
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C(epsilon) = {c} is not positive"
        )));
    }
    let t_real = ((1.0 / epsilon).ln() + c.ln()) / (nu / (1.0 - nu)).ln();
    let t_int = t_real.round().max(0.0) as usize;
    let at = |t: usize| {
        threshold_policy_stationary(&ThresholdPolicy {
            threshold: t,
            ..base
        })
    };
    let here = at(t_int)?;
    let lo = if t_int == 0 {
        0.0
    } else {
        at(t_int - 1)?.throughput
    };
    let hi = at(t_int + 1)?.throughput;
    Ok(ThresholdChoice {
        epsilon,
        t_real,
        t_int,
        throughput: here.throughput,
        mean_queue: here.mean_queue,
        bracket: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_queue_values() {
        let p = LowerBoundParams::new(0.01, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(
            single_queue_lower_bound(&p),
            100f64.ln() / (2.0 * (1.0 - 0.5f64.ln())) - 1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(single_queue_lower_bound(&p), 0.35996, epsilon = 1e-4);
        let p = LowerBoundParams::new(1.0, 0.5, 1.0).unwrap();
        assert_eq!(single_queue_lower_bound(&p), -1.0);
        let p = LowerBoundParams::new(0.01, 1e-300, 1.0).unwrap();
        assert!((single_queue_lower_bound(&p) + 1.0).abs() < 0.01);
    }

    #[test]
    fn params_validation() {
        assert!(LowerBoundParams::new(0.0, 0.5, 1.0).is_err());
        assert!(LowerBoundParams::new(0.1, 1.0, 1.0).is_err());
        assert!(LowerBoundParams::new(0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn params_from_instance() {
        let inst = ProblemInstance::single(0.2, 0.5, 1.0, 3).with_budget(vec![0.25]);
        let p = LowerBoundParams::from_instance(&inst, 0.1).unwrap();
        assert_abs_diff_eq!(p.phi, 0.512, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p_plus, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn multi_queue_values() {
        let p = LowerBoundParams::new(1e-4, 0.5, 0.9).unwrap();
        let unit = HalfspaceRegion::new(vec![vec![1.0, 1.0]], vec![1.0]).unwrap();
        assert_eq!(
            multi_queue_lower_bound(&p, &unit),
            single_queue_lower_bound(&p)
        );
        let e = HalfspaceRegion::new(vec![vec![std::f64::consts::E, 0.5]], vec![1.0]).unwrap();
        assert_abs_diff_eq!(multi_queue_constants(&p, &e).1, 1.0, epsilon = 1e-15);
        let two = HalfspaceRegion::new(vec![vec![2.0, 1.0]], vec![1.0]).unwrap();
        let (c1, c2) = multi_queue_constants(&p, &two);
        assert_abs_diff_eq!(c1, 7.194, epsilon = 1e-3);
        assert_abs_diff_eq!(c2, 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(multi_queue_lower_bound(&p, &two), 0.184, epsilon = 1e-3);
    }

    #[test]
    fn region_validation() {
        assert!(HalfspaceRegion::new(vec![vec![-1.0]], vec![1.0]).is_err());
        assert!(HalfspaceRegion::new(vec![vec![1.0]], vec![0.0]).is_err());
        assert!(HalfspaceRegion::new(vec![vec![1.0]], vec![]).is_err());
    }

    #[test]
    fn two_client_region_vertices() {
        let inst = ProblemInstance::new(
            vec![vec![vec![0.5], vec![0.25]]],
            vec![vec![1.0, 2.0]],
            0.5,
            vec![1.0],
            8,
        )
        .with_budget(vec![1.0, 3.0]);
        // Both capacities are 2 per cycle.
        let r = two_client_region(&inst).unwrap();
        assert!(r.contains(&[1.0, 1.0]));
        assert!(r.contains(&[0.0, 2.0]));
        assert!(!r.contains(&[1.0, 1.01]));
        assert!(!r.contains(&[1.01, 0.0]));
        assert_eq!(r.max_coefficient(), 1.0);
    }

    #[test]
    fn stationary_basic_invariants() {
        for t in 0..8 {
            let pol = ThresholdPolicy {
                threshold: t,
                p1: 0.5,
                p2: 0.25,
                nu: 0.7,
            };
            let st = threshold_policy_stationary(&pol).unwrap();
            assert_eq!(st.pi.len(), t + 2);
            assert!((st.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(st.pi.iter().all(|&x| x >= 0.0));
            assert!(st.throughput < 1.0);
        }
    }

    #[test]
    fn threshold_zero_two_state_chain() {
        let pol = ThresholdPolicy {
            threshold: 0,
            p1: 0.5,
            p2: 0.25,
            nu: 0.8,
        };
        let st = threshold_policy_stationary(&pol).unwrap();
        let ratio = 0.25 * 0.8;
        assert_abs_diff_eq!(st.pi[0], 1.0 / (1.0 + ratio), epsilon = 1e-15);
        assert_abs_diff_eq!(st.pi[1], ratio / (1.0 + ratio), epsilon = 1e-15);
        assert_abs_diff_eq!(st.throughput, st.pi[0] * 0.8 * 1.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_chain_rejected() {
        let bad = ThresholdPolicy {
            threshold: 2,
            p1: 0.6,
            p2: 0.6,
            nu: 0.7,
        };
        assert!(threshold_policy_stationary(&bad).is_err());
        let bad = ThresholdPolicy {
            threshold: 2,
            p1: 0.5,
            p2: 0.25,
            nu: 0.4,
        };
        assert!(threshold_policy_stationary(&bad).is_err());
    }

    #[test]
    fn threshold_slope_in_epsilon() {
        let a = threshold_for_epsilon(0.7, 0.5, 0.25, 1e-3).unwrap();
        let b = threshold_for_epsilon(0.7, 0.5, 0.25, 5e-4).unwrap();
        let rho = (0.7f64 / 0.3).ln();
        // C(ε) moves slightly with ε, hence the approximate slope.
        assert_abs_diff_eq!(b.t_real - a.t_real, 2f64.ln() / rho, epsilon = 5e-3);
        let drift = (threshold_constant(0.7, 0.5, 0.25, 5e-4)
            / threshold_constant(0.7, 0.5, 0.25, 1e-3))
        .ln();
        assert_abs_diff_eq!(
            b.t_real - a.t_real,
            (2f64.ln() + drift) / rho,
            epsilon = 1e-12
        );
    }

    #[test]
    fn threshold_shrinks_as_nu_grows() {
        let a = threshold_for_epsilon(0.95, 0.5, 0.25, 0.01).unwrap();
        let b = threshold_for_epsilon(0.99, 0.5, 0.25, 0.01).unwrap();
        assert!(b.t_real < a.t_real);
        assert!(b.t_real < 1.5);
    }
}
