use adqueue::bounds::*;
use adqueue::stats::batch_means_se;
use adqueue::stochastic::RngStream;
use proptest::prelude::*;

/// Simulates the admission-controlled queue step by step.
fn simulate(p: &ThresholdPolicy, steps: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = RngStream::new(seed, 0);
    let mut q = 0usize;
    let states = p.threshold + 2;
    let mut indicators = vec![Vec::with_capacity(steps); states];
    let mut accepted = Vec::with_capacity(steps);
    for _ in 0..steps {
        for (s, v) in indicators.iter_mut().enumerate() {
            v.push(if s == q { 1.0 } else { 0.0 });
        }
        let arrived = rng.uniform() < p.nu;
        let u = rng.uniform();
        let a = if !arrived {
            0
        } else if q < p.threshold {
            2
        } else if q == p.threshold {
            if u < p.p1 {
                1
            } else if u < p.p1 + p.p2 {
                2
            } else {
                0
            }
        } else {
            0
        };
        accepted.push(a as f64);
        q = (q + a).saturating_sub(1);
    }
    (indicators, accepted)
}

#[test]
fn stationary_law_matches_monte_carlo() {
    let p = ThresholdPolicy {
        threshold: 3,
        p1: 0.5,
        p2: 0.25,
        nu: 0.7,
    };
    let exact = threshold_policy_stationary(&p).unwrap();
    let (ind, acc) = simulate(&p, 10_000_000, 17);
    for (i, v) in ind.iter().enumerate() {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let se = batch_means_se(v, 100);
        assert!(
            (m - exact.pi[i]).abs() <= 3.0 * se,
            "state {i}: {m} vs {}",
            exact.pi[i]
        );
    }
    let m = acc.iter().sum::<f64>() / acc.len() as f64;
    let se = batch_means_se(&acc, 100);
    assert!(
        (m - exact.throughput).abs() <= 3.0 * se,
        "{m} vs {}",
        exact.throughput
    );
}

#[test]
fn throughput_nondecreasing_in_threshold() {
    let mut last = 0.0;
    for t in 0..=20 {
        let st = threshold_policy_stationary(&ThresholdPolicy {
            threshold: t,
            p1: 0.5,
            p2: 0.25,
            nu: 0.7,
        })
        .unwrap();
        assert!(st.throughput >= last, "T={t}");
        last = st.throughput;
    }
}

#[test]
fn closed_form_threshold_is_bracketed() {
    for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
        let c = threshold_for_epsilon(0.7, 0.5, 0.25, eps).unwrap();
        assert!(c.within_bracket(), "{c:?}");
        let gap = (c.throughput - (1.0 - eps)).abs();
        assert!(gap <= (c.throughput - c.bracket.0).max(c.bracket.1 - c.throughput));
    }
}

fn balance_residual(p: &ThresholdPolicy, pi: &[f64]) -> f64 {
    let t = p.threshold;
    let mut worst: f64 = 0.0;
    for i in 0..t.saturating_sub(1) {
        worst = worst.max((pi[i] * p.nu - pi[i + 1] * (1.0 - p.nu)).abs());
    }
    if t >= 1 {
        worst = worst.max((pi[t - 1] * p.nu - pi[t] * (1.0 - (p.p1 + p.p2) * p.nu)).abs());
    }
    worst.max((pi[t] * p.p2 * p.nu - pi[t + 1]).abs())
}

proptest! {
    #[test]
    fn stationary_law_is_a_balanced_distribution(
        t in 0usize..30,
        nu in 0.51f64..0.99,
        p1 in 0.0f64..1.0,
        frac in 0.0f64..1.0,
    ) {
        let p2 = (1.0 - p1) * frac;
        let p = ThresholdPolicy { threshold: t, p1, p2, nu };
        let st = threshold_policy_stationary(&p).unwrap();
        prop_assert!((st.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(st.pi.iter().all(|&x| x >= 0.0));
        prop_assert!(balance_residual(&p, &st.pi) <= 1e-12);
    }

    #[test]
    fn unit_region_reduces_to_single_queue(
        eps in 1e-8f64..1.0,
        phi in 1e-6f64..0.999,
        p_plus in 1e-3f64..1.0,
        width in 1usize..5,
    ) {
        let params = LowerBoundParams::new(eps, phi, p_plus).unwrap();
        let region = HalfspaceRegion::new(vec![vec![1.0; width]], vec![1.0]).unwrap();
        prop_assert_eq!(multi_queue_lower_bound(&params, &region), single_queue_lower_bound(&params));
    }
}
