//! Scenario runner: replicas, CSV traces and epsilon sweeps.
//!
//! Every CSV starts with `# key=value` provenance lines (seed, epsilon,
//! variant, build) followed by a header row. Floats are written with Rust's
//! shortest round-trip formatting, so reading a file back yields the exact
//! values that were written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::ctr_online::{
    ctr_optimum, customize_requirements, max_min_slack, CtrConfig, CtrPolicy, CtrSimulator,
    CtrTrace, MAX_MIN_ITERATIONS,
};
use crate::error::{Error, Result};
use crate::model::{compute_b1, validate_instance, ProblemInstance};
use crate::offline_baseline::{solve_offline_lenient, SolveOptions, DEFAULT_ITERATIONS};
use crate::par::Execution;
use crate::revenue_online::{
    perturb_ctr, underdraft_thresholds, Charging, RevenueConfig, RevenueSimulator, RevenueTrace,
    RevenueVariant,
};
use crate::stats::{batch_means_se, mean, std_dev};

/// Build identifier recorded in every CSV.
pub const BUILD: &str = env!("ADQUEUE_GIT_DESCRIBE");

const SE_BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum RevenueKind {
    Standard,
    Underdraft,
    /// Perturbed click-through estimates with relative error up to `delta`.
    Estimated {
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtrKind {
    Mwm,
    MwmFast { queueing_cycles: usize },
    Opt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    Revenue {
        kind: RevenueKind,
        charging: Charging,
    },
    /// `q_max` replaces the instance requirements by customised ones.
    Ctr { kind: CtrKind, q_max: Option<f64> },
}

impl Workload {
    pub fn label(&self) -> String {
        match self {
            Workload::Revenue { kind, charging } => {
                let k = match kind {
                    RevenueKind::Standard => "standard".to_string(),
                    RevenueKind::Underdraft => "underdraft".to_string(),
                    RevenueKind::Estimated { delta } => format!("estimated(delta={delta})"),
                };
                let c = match charging {
                    Charging::PerClick => "per-click",
                    Charging::PerImpression => "per-impression",
                };
                format!("revenue/{k}/{c}")
            }
            Workload::Ctr { kind, q_max } => {
                let mut s = match kind {
                    CtrKind::Mwm => "ctr/mwm".to_string(),
                    CtrKind::MwmFast { queueing_cycles } => {
                        format!("ctr/mwm-fast(T={queueing_cycles})")
                    }
                    CtrKind::Opt => "ctr/opt".to_string(),
                };
                if let Some(q) = q_max {
                    let _ = write!(s, "/customized(q_max={q})");
                }
                s
            }
        }
    }
}

/// One experiment: an instance, an algorithm variant, a horizon in budgeting
/// cycles and one seed per replica.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub instance: ProblemInstance,
    pub workload: Workload,
    pub epsilon: f64,
    pub cycles: usize,
    pub seeds: Vec<u64>,
}

impl Scenario {
    /// Replica `r` uses seed `seed + r`.
    pub fn new(
        name: impl Into<String>,
        instance: ProblemInstance,
        workload: Workload,
        epsilon: f64,
        cycles: usize,
        seed: u64,
        replicas: usize,
    ) -> Self {
        Scenario {
            name: name.into(),
            instance,
            workload,
            epsilon,
            cycles,
            seeds: (0..replicas as u64).map(|r| seed.wrapping_add(r)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_instance(&self.instance);
        if !violations.is_empty() {
            return Err(Error::InvalidInstance(violations));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidArgument(
                "horizon must be at least one cycle".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one replica is required".into(),
            ));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "replica seeds must be distinct".into(),
            ));
        }
        match &self.workload {
            Workload::Revenue { kind, .. } => {
                self.instance.budgets()?;
                if let RevenueKind::Estimated { delta } = kind {
                    if !(0.0..1.0).contains(delta) {
                        return Err(Error::InvalidArgument(format!(
                            "delta must lie in [0, 1), got {delta}"
                        )));
                    }
                }
            }
            Workload::Ctr { kind, q_max } => {
                if q_max.is_none() {
                    self.instance.requirements()?;
                }
                if let Some(q) = q_max {
                    if !(*q > 0.0 && q.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "q_max must be positive, got {q}"
                        )));
                    }
                }
                if let CtrKind::MwmFast { queueing_cycles } = kind {
                    crate::ctr_online::queueing_cycle_len(
                        self.instance.cycle_slots,
                        *queueing_cycles,
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// A numeric table whose first column is `cycle`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MetricsTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Per-replica headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    pub seed: u64,
    /// Revenue or clicks per slot.
    pub objective: f64,
    pub mean_total_queue: f64,
    pub max_queue: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub replica_paths: Vec<PathBuf>,
    pub aggregate_path: PathBuf,
    pub tables: Vec<MetricsTable>,
    pub aggregate: MetricsTable,
    pub summaries: Vec<ReplicaSummary>,
}

/// Instance and policy after requirement customisation and offline solves.
struct Prepared {
    instance: ProblemInstance,
    ctr_policy: Option<CtrPolicy>,
    /// Offline optimum per slot, computed only when asked for.
    optimum: Option<f64>,
}

fn prepare(sc: &Scenario, epsilon: f64, want_optimum: bool) -> Result<Prepared> {
    let mut inst = sc.instance.clone();
    match &sc.workload {
        Workload::Revenue { .. } => {
            let optimum = if want_optimum {
                let sol = solve_offline_lenient(&inst, SolveOptions::default())?;
                Some(sol.r_star)
            } else {
                None
            };
            Ok(Prepared {
                instance: inst,
                ctr_policy: None,
                optimum,
            })
        }
        Workload::Ctr { kind, q_max } => {
            let interior = match q_max {
                Some(q) => {
                    let cust = customize_requirements(&inst, *q, epsilon)?;
                    inst.requirement = Some(cust.requirement);
                    Some(cust.policy)
                }
                None => None,
            };
            let need_lp = want_optimum || *kind == CtrKind::Opt;
            let mut optimum = None;
            let mut opt_policy = None;
            if need_lp {
                let req = inst.requirements()?.to_vec();
                let interior = match interior {
                    Some(p) => p,
                    None => {
                        let mm = max_min_slack(&inst, &req, MAX_MIN_ITERATIONS, None)?;
                        if mm.value < 0.0 {
                            return Err(Error::Infeasible(format!(
                                "requirements exceed every policy's capacity (max-min slack {:.4})",
                                mm.value
                            )));
                        }
                        mm.policy
                    }
                };
                let sol = match ctr_optimum(&inst, &req, &interior, DEFAULT_ITERATIONS) {
                    Ok(s) => s,
                    Err(Error::NotConverged {
                        solution, residual, ..
                    }) => {
                        warn!("offline click optimum not converged (residual {residual:.3e}); using it anyway");
                        *solution
                    }
                    Err(e) => return Err(e),
                };
                optimum = Some(sol.r_star);
                opt_policy = Some(sol.policy);
            }
            let policy = match kind {
                CtrKind::Mwm => CtrPolicy::Mwm,
                CtrKind::MwmFast { queueing_cycles } => CtrPolicy::MwmFast {
                    queueing_cycles: *queueing_cycles,
                },
                CtrKind::Opt => CtrPolicy::Opt {
                    policy: opt_policy.expect("solved above"),
                },
            };
            Ok(Prepared {
                instance: inst,
                ctr_policy: Some(policy),
                optimum,
            })
        }
    }
}

enum Trace {
    Revenue(RevenueTrace),
    Ctr(CtrTrace),
}

fn run_replica(sc: &Scenario, prep: &Prepared, epsilon: f64, seed: u64) -> Result<Trace> {
    let inst = &prep.instance;
    match &sc.workload {
        Workload::Revenue { kind, charging } => {
            let variant = match kind {
                RevenueKind::Standard => RevenueVariant::Standard,
                RevenueKind::Underdraft => {
                    let (gamma, credit) = underdraft_thresholds(inst, epsilon)?;
                    RevenueVariant::Underdraft { gamma, credit }
                }
                RevenueKind::Estimated { delta } => RevenueVariant::Estimated {
                    ctr_hat: perturb_ctr(inst, *delta, seed)?,
                },
            };
            let cfg = RevenueConfig {
                epsilon,
                variant,
                charging: *charging,
            };
            Ok(Trace::Revenue(
                RevenueSimulator::new(inst, cfg, seed)?.run(sc.cycles),
            ))
        }
        Workload::Ctr { .. } => {
            let cfg = CtrConfig {
                epsilon,
                policy: prep.ctr_policy.clone().expect("prepared"),
            };
            Ok(Trace::Ctr(
                CtrSimulator::new(inst, cfg, seed)?.run(sc.cycles),
            ))
        }
    }
}

fn revenue_table(n_clients: usize, trace: &RevenueTrace) -> MetricsTable {
    let mut columns = vec!["cycle".to_string()];
    columns.extend((0..n_clients).map(|i| format!("revenue_{i}")));
    columns.extend((0..n_clients).map(|i| format!("queue_{i}")));
    columns.extend(["revenue".to_string(), "avg_revenue_per_slot".to_string()]);
    let slots = trace.cycle_slots as f64;
    let mut total = 0.0;
    let rows = trace
        .cycles
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let r = c.total_revenue();
            total += r;
            let mut row = Vec::with_capacity(columns.len());
            row.push((k + 1) as f64);
            row.extend_from_slice(&c.revenue);
            row.extend_from_slice(&c.queue_after);
            row.push(r);
            row.push(total / ((k + 1) as f64 * slots));
            row
        })
        .collect();
    MetricsTable { columns, rows }
}

fn ctr_table(inst: &ProblemInstance, trace: &CtrTrace) -> MetricsTable {
    let n = inst.num_clients;
    let mut columns = vec!["cycle".to_string()];
    for prefix in ["served", "over", "under", "queue"] {
        columns.extend((0..n).map(|i| format!("{prefix}_{i}")));
    }
    let short: Vec<usize> = inst
        .short_term
        .as_ref()
        .map(|t| t.iter().map(|s| s.client).collect())
        .unwrap_or_default();
    columns.extend(short.iter().map(|i| format!("alpha_{i}")));
    columns.extend(
        [
            "clicks",
            "total_queue",
            "normalized_over",
            "normalized_under",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let nominal_total: f64 = trace.nominal_requirement.iter().sum();
    let rows = trace
        .cycles
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let mut row = Vec::with_capacity(columns.len());
            row.push((k + 1) as f64);
            row.extend(c.impressions.iter().map(|&x| x as f64));
            row.extend_from_slice(&c.over);
            row.extend_from_slice(&c.under);
            row.extend_from_slice(&c.queue_after);
            for &i in &short {
                let a = c
                    .short_term
                    .iter()
                    .find(|s| s.client == i)
                    .map_or(0.0, |s| s.alpha);
                row.push(a);
            }
            row.push(c.clicks as f64);
            row.push(c.total_queue());
            row.push(c.over.iter().sum::<f64>() / nominal_total);
            row.push(c.under.iter().sum::<f64>() / nominal_total);
            row
        })
        .collect();
    MetricsTable { columns, rows }
}

fn summarize(trace: &Trace, seed: u64) -> ReplicaSummary {
    match trace {
        Trace::Revenue(t) => {
            let totals: Vec<f64> = t
                .cycles
                .iter()
                .map(|c| c.queue_after.iter().sum())
                .collect();
            ReplicaSummary {
                seed,
                objective: t.average_revenue_per_slot(),
                mean_total_queue: mean(&totals),
                max_queue: t
                    .cycles
                    .iter()
                    .flat_map(|c| c.queue_after.iter().copied())
                    .fold(f64::NEG_INFINITY, f64::max),
            }
        }
        Trace::Ctr(t) => ReplicaSummary {
            seed,
            objective: t.clicks_per_slot(),
            mean_total_queue: t.time_average_total_queue(),
            max_queue: t
                .cycles
                .iter()
                .flat_map(|c| c.queue_after.iter().copied())
                .fold(f64::NEG_INFINITY, f64::max),
        },
    }
}

/// Per-cycle objective divided by the cycle length.
fn objective_series(trace: &Trace) -> Vec<f64> {
    match trace {
        Trace::Revenue(t) => t
            .cycle_revenue()
            .iter()
            .map(|r| r / t.cycle_slots as f64)
            .collect(),
        Trace::Ctr(t) => t
            .cycles
            .iter()
            .map(|c| c.clicks as f64 / t.cycle_slots as f64)
            .collect(),
    }
}

/// Column-wise mean and sample standard deviation across replicas.
pub fn aggregate(tables: &[MetricsTable]) -> Result<MetricsTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    if tables
        .iter()
        .any(|t| t.columns != first.columns || t.rows.len() != first.rows.len())
    {
        return Err(Error::InvalidArgument(
            "replica tables differ in shape".into(),
        ));
    }
    let mut columns = vec![first.columns[0].clone()];
    for c in &first.columns[1..] {
        columns.push(format!("{c}_mean"));
        columns.push(format!("{c}_std"));
    }
    let rows = (0..first.rows.len())
        .map(|k| {
            let mut row = vec![first.rows[k][0]];
            for j in 1..first.columns.len() {
                let xs: Vec<f64> = tables.iter().map(|t| t.rows[k][j]).collect();
                row.push(mean(&xs));
                row.push(std_dev(&xs));
            }
            row
        })
        .collect();
    Ok(MetricsTable { columns, rows })
}

/// Writes `# key=value` lines and then the table.
pub fn write_csv(path: &Path, provenance: &[(String, String)], table: &MetricsTable) -> Result<()> {
    let mut text = String::new();
    for (k, v) in provenance {
        let _ = writeln!(text, "# {k}={v}");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::csv(path, e);
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| x.to_string()))
            .map_err(csv_err)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    text.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<(String, String)>, MetricsTable)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let provenance = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("bad number {f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((provenance, MetricsTable { columns, rows }))
}

fn base_provenance(sc: &Scenario, epsilon: f64) -> Vec<(String, String)> {
    vec![
        ("scenario".into(), sc.name.clone()),
        ("variant".into(), sc.workload.label()),
        ("epsilon".into(), epsilon.to_string()),
        ("cycles".into(), sc.cycles.to_string()),
        ("cycle_slots".into(), sc.instance.cycle_slots.to_string()),
        ("build".into(), BUILD.to_string()),
    ]
}

/// Runs every replica (in parallel under `exec`) and writes
/// `replica_{r}.csv` and `aggregate.csv` into `out_dir`.
pub fn run_scenario(sc: &Scenario, out_dir: &Path, exec: Execution) -> Result<ScenarioReport> {
    sc.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let prep = prepare(sc, sc.epsilon, false)?;
    let results = exec.map(sc.seeds.clone(), |seed| {
        run_replica(sc, &prep, sc.epsilon, seed).map(|t| (seed, t))
    });
    let mut tables = Vec::with_capacity(results.len());
    let mut summaries = Vec::with_capacity(results.len());
    let mut replica_paths = Vec::with_capacity(results.len());
    for (r, res) in results.into_iter().enumerate() {
        let (seed, trace) = res?;
        let table = match &trace {
            Trace::Revenue(t) => revenue_table(prep.instance.num_clients, t),
            Trace::Ctr(t) => ctr_table(&prep.instance, t),
        };
        let mut prov = base_provenance(sc, sc.epsilon);
        prov.insert(0, ("seed".into(), seed.to_string()));
        prov.push(("replica".into(), r.to_string()));
        let path = out_dir.join(format!("replica_{r}.csv"));
        write_csv(&path, &prov, &table)?;
        summaries.push(summarize(&trace, seed));
        tables.push(table);
        replica_paths.push(path);
    }
    let agg = aggregate(&tables)?;
    let mut prov = base_provenance(sc, sc.epsilon);
    let seeds: Vec<String> = sc.seeds.iter().map(u64::to_string).collect();
    prov.insert(0, ("seed".into(), seeds.join(";")));
    prov.push(("replicas".into(), sc.seeds.len().to_string()));
    let aggregate_path = out_dir.join("aggregate.csv");
    write_csv(&aggregate_path, &prov, &agg)?;
    Ok(ScenarioReport {
        replica_paths,
        aggregate_path,
        tables,
        aggregate: agg,
        summaries,
    })
}

/// One epsilon of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Time-average revenue or clicks per slot.
    pub objective: f64,
    /// Offline optimum per slot.
    pub optimum: f64,
    pub gap: f64,
    /// Batch-means standard error of `objective`.
    pub std_error: f64,
    /// Optimality-gap bound `B1 epsilon / N` (revenue workloads only).
    pub gap_bound: Option<f64>,
    pub mean_total_queue: f64,
    pub max_queue: f64,
}

/// Runs the scenario once per epsilon on the first replica seed, so every
/// epsilon sees the same arrival and click sample path.
pub fn sweep_epsilon(sc: &Scenario, epsilons: &[f64], exec: Execution) -> Result<Vec<SweepRow>> {
    sc.validate()?;
    if epsilons.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon list".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {e}"
        )));
    }
    let seed = sc.seeds[0];
    let b1 = match sc.workload {
        Workload::Revenue { .. } => Some(compute_b1(&sc.instance)?),
        Workload::Ctr { .. } => None,
    };
    // The revenue optimum does not depend on epsilon; solve it once.
    let shared = match sc.workload {
        Workload::Revenue { .. } => Some(prepare(sc, sc.epsilon, true)?),
        Workload::Ctr { .. } => None,
    };
    let n = sc.instance.cycle_slots as f64;
    exec.map(epsilons.to_vec(), |eps| {
        let own;
        let prep = match &shared {
            Some(p) => p,
            None => {
                own = prepare(sc, eps, true)?;
                &own
            }
        };
        let trace = run_replica(sc, prep, eps, seed)?;
        let series = objective_series(&trace);
        let s = summarize(&trace, seed);
        let optimum = prep.optimum.expect("optimum requested");
        Ok(SweepRow {
            epsilon: eps,
            objective: s.objective,
            optimum,
            gap: optimum - s.objective,
            std_error: batch_means_se(&series, SE_BATCHES),
            gap_bound: b1.map(|b| b * eps / n),
            mean_total_queue: s.mean_total_queue,
            max_queue: s.max_queue,
        })
    })
    .into_iter()
    .collect()
}

/// Writes sweep rows as CSV with provenance; an absent gap bound is written
/// as `NaN`.
pub fn write_sweep(path: &Path, sc: &Scenario, rows: &[SweepRow]) -> Result<()> {
    let columns = [
        "epsilon",
        "objective",
        "optimum",
        "gap",
        "std_error",
        "gap_bound",
        "mean_total_queue",
        "max_queue",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let table = MetricsTable {
        columns,
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.epsilon,
                    r.objective,
                    r.optimum,
                    r.gap,
                    r.std_error,
                    r.gap_bound.unwrap_or(f64::NAN),
                    r.mean_total_queue,
                    r.max_queue,
                ]
            })
            .collect(),
    };
    let mut prov = base_provenance(sc, sc.epsilon);
    prov.retain(|(k, _)| k != "epsilon");
    let eps: Vec<String> = rows.iter().map(|r| r.epsilon.to_string()).collect();
    prov.insert(0, ("seed".into(), sc.seeds[0].to_string()));
    prov.insert(1, ("epsilon".into(), eps.join(";")));
    write_csv(path, &prov, &table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn small(replicas: usize) -> Scenario {
        Scenario::new(
            "small",
            fixtures::revenue_small(),
            Workload::Revenue {
                kind: RevenueKind::Standard,
                charging: Charging::PerClick,
            },
            0.01,
            30,
            7,
            replicas,
        )
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let mut sc = small(2);
        sc.seeds = vec![3, 3];
        assert!(matches!(sc.validate(), Err(Error::InvalidArgument(_))));
        assert!(small(2).validate().is_ok());
    }

    #[test]
    fn bad_parameters_rejected() {
        let mut sc = small(1);
        sc.epsilon = 0.0;
        assert!(sc.validate().is_err());
        let mut sc = small(1);
        sc.cycles = 0;
        assert!(sc.validate().is_err());
        let mut sc = small(1);
        sc.workload = Workload::Revenue {
            kind: RevenueKind::Estimated { delta: 1.5 },
            charging: Charging::PerClick,
        };
        assert!(sc.validate().is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let table = MetricsTable {
            columns: vec!["cycle".into(), "x".into()],
            rows: vec![
                vec![1.0, 0.1 + 0.2],
                vec![2.0, 1.0 / 3.0],
                vec![3.0, 1e-300],
            ],
        };
        let path = dir.path().join("t.csv");
        let prov = vec![("seed".to_string(), "5".to_string())];
        write_csv(&path, &prov, &table).unwrap();
        let (p, t) = read_csv(&path).unwrap();
        assert_eq!(p, prov);
        assert_eq!(t, table);
    }

    #[test]
    fn aggregate_of_one_has_zero_std() {
        let t = MetricsTable {
            columns: vec!["cycle".into(), "x".into()],
            rows: vec![vec![1.0, 4.0]],
        };
        let a = aggregate(&[t]).unwrap();
        assert_eq!(a.columns, vec!["cycle", "x_mean", "x_std"]);
        assert_eq!(a.rows, vec![vec![1.0, 4.0, 0.0]]);
    }

    #[test]
    fn labels_name_the_variant() {
        let w = Workload::Ctr {
            kind: CtrKind::MwmFast {
                queueing_cycles: 24,
            },
            q_max: None,
        };
        assert_eq!(w.label(), "ctr/mwm-fast(T=24)");
    }
}
