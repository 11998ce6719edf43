//! Fixed-seed traces of the bundled five-keyword scenario, compared exactly
//! against files under `tests/golden/`. Set `ADQUEUE_BLESS=1` to regenerate.
//! Every row is also checked against invariants that do not depend on the
//! stored values.

use std::path::PathBuf;

use adqueue::ctr_online::{CtrConfig, CtrPolicy, CtrSimulator};
use adqueue::fixtures;
use adqueue::harness::{read_csv, write_csv, MetricsTable};
use adqueue::revenue_online::{
    overdraft_sample_path_bound, Charging, RevenueConfig, RevenueSimulator,
};

const SEED: u64 = 20_240_601;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_or_bless(name: &str, table: &MetricsTable) {
    let path = golden_path(name);
    if std::env::var_os("ADQUEUE_BLESS").is_some() || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        let prov = vec![("seed".to_string(), SEED.to_string())];
        write_csv(&path, &prov, table).unwrap();
    }
    let (_, stored) = read_csv(&path).unwrap();
    assert_eq!(stored.columns, table.columns, "{name}: columns");
    assert_eq!(stored.rows.len(), table.rows.len(), "{name}: row count");
    for (k, (a, b)) in stored.rows.iter().zip(&table.rows).enumerate() {
        assert_eq!(a, b, "{name}: row {k}");
    }
}

#[test]
fn revenue_trace_matches_golden() {
    let inst = fixtures::five_keyword_budgeted();
    let eps = fixtures::FIVE_KEYWORD_EPSILON;
    let trace = RevenueSimulator::new(&inst, RevenueConfig::standard(eps), SEED)
        .unwrap()
        .run(fixtures::FIVE_KEYWORD_CYCLES);
    let bound = overdraft_sample_path_bound(&inst, eps, Charging::PerClick).unwrap();
    let max_slot_revenue = inst.num_slots as f64;

    let mut rows = Vec::new();
    for (k, c) in trace.cycles.iter().enumerate() {
        let total = c.total_revenue();
        assert!(total >= 0.0 && total <= max_slot_revenue * inst.cycle_slots as f64);
        assert!(total <= c.num_clicks as f64 + 1e-9);
        for (i, &q) in c.queue_after.iter().enumerate() {
            assert!((0.0..=bound[i]).contains(&q), "cycle {k} client {i}: {q}");
        }
        let max_q = c.queue_after.iter().copied().fold(0.0, f64::max);
        rows.push(vec![(k + 1) as f64, total, max_q]);
    }
    // Integer budgets are drawn exactly, and the projection only ever
    // raises a queue, so revenue in excess of the budgets is bounded by
    // the final overdraft.
    let earned: f64 = trace.cycle_revenue().iter().sum();
    let budget_total = fixtures::FIVE_KEYWORD_BUDGET * inst.num_clients as f64;
    let final_q: f64 = trace.cycles.last().unwrap().queue_after.iter().sum();
    assert!(earned <= budget_total * trace.cycles.len() as f64 + final_q + 1e-6);
    assert!(earned > 0.9 * budget_total * trace.cycles.len() as f64);

    let table = MetricsTable {
        columns: vec!["cycle".into(), "revenue".into(), "max_queue".into()],
        rows,
    };
    check_or_bless("revenue_five_keyword.csv", &table);
}

#[test]
fn ctr_trace_matches_golden() {
    let inst = fixtures::five_keyword();
    let cfg = CtrConfig {
        epsilon: fixtures::FIVE_KEYWORD_EPSILON,
        policy: CtrPolicy::Mwm,
    };
    let trace = CtrSimulator::new(&inst, cfg, SEED)
        .unwrap()
        .run(fixtures::FIVE_KEYWORD_CYCLES);
    let capacity = (inst.cycle_slots * inst.num_slots) as f64;

    let mut rows = Vec::new();
    for (k, c) in trace.cycles.iter().enumerate() {
        let served: f64 = c.impressions.iter().map(|&x| x as f64).sum();
        assert!(served <= capacity);
        assert!(c.clicks as f64 <= served);
        for i in 0..inst.num_clients {
            assert!(c.queue_after[i] >= 0.0);
            assert!(c.over[i] >= 0.0 && c.under[i] >= 0.0);
            assert!(c.over[i] == 0.0 || c.under[i] == 0.0);
            let next = (c.queue_before[i] + c.requirement[i] - c.impressions[i] as f64).max(0.0);
            assert_eq!(c.queue_after[i], next, "cycle {k} client {i}");
        }
        rows.push(vec![
            (k + 1) as f64,
            c.clicks as f64,
            served,
            c.total_queue(),
        ]);
    }
    let table = MetricsTable {
        columns: vec![
            "cycle".into(),
            "clicks".into(),
            "served".into(),
            "total_queue".into(),
        ],
        rows,
    };
    check_or_bless("ctr_five_keyword_mwm.csv", &table);
}
