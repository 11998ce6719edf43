use adqueue::ctr_online::*;
use adqueue::fixtures;
use adqueue::stochastic::RngStream;

#[test]
fn five_keyword_requirements_are_locally_log_optimal() {
    let inst = fixtures::five_keyword();
    let c = customize_requirements(
        &inst,
        fixtures::FIVE_KEYWORD_Q_MAX,
        fixtures::FIVE_KEYWORD_EPSILON,
    )
    .unwrap();
    for s in &c.slack {
        assert!(*s >= c.xi - 1e-6, "slack {s} below {}", c.xi);
    }
    let objective = |m: &[f64]| m.iter().map(|x| x.ln()).sum::<f64>();
    let base = objective(&c.requirement);
    let mut rng = RngStream::new(5, 0);
    let mut improving = 0;
    for _ in 0..80 {
        let m: Vec<f64> = c
            .requirement
            .iter()
            .map(|x| {
                let u = rng.uniform();
                x * if u < 1.0 / 3.0 {
                    0.99
                } else if u < 2.0 / 3.0 {
                    1.0
                } else {
                    1.01
                }
            })
            .collect();
        if objective(&m) <= base {
            continue;
        }
        improving += 1;
        // Any perturbation that raises the objective must lose the slack.
        let mm = max_min_slack(&inst, &m, MAX_MIN_ITERATIONS, None).unwrap();
        assert!(
            mm.upper < c.xi,
            "feasible improvement: upper {} vs xi {}",
            mm.upper,
            c.xi
        );
    }
    assert!(improving > 10);
}

#[test]
fn customization_rejects_tiny_queue_target() {
    let inst = fixtures::five_keyword();
    assert!(customize_requirements(&inst, 100.0, fixtures::FIVE_KEYWORD_EPSILON).is_err());
}
