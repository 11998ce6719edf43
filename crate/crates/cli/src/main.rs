use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use adqueue::bounds::{
    multi_queue_lower_bound, single_queue_lower_bound, threshold_for_epsilon, HalfspaceRegion,
    LowerBoundParams,
};
use adqueue::ctr_online::{ctr_optimum, max_min_slack, MAX_MIN_ITERATIONS};
use adqueue::fixtures;
use adqueue::harness::{
    run_scenario, sweep_epsilon, write_csv, write_sweep, CtrKind, MetricsTable, RevenueKind,
    Scenario, Workload, BUILD,
};
use adqueue::model::ProblemInstance;
use adqueue::offline_baseline::{solve_lp, MatchingLp, SolveOptions};
use adqueue::par::Execution;
use adqueue::revenue_online::{unfairness_demo, Charging};
use adqueue::Error;

/// Simulators for queue-based online ad assignment.
#[derive(Debug, Parser)]
#[command(name = "adqueue", version, about)]
struct Cli {
    /// Base seed; replica r uses seed + r.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Independent replicas, run in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    replicas: usize,
    /// Directory for per-replica and aggregate CSVs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Run replicas on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the budgeted revenue algorithm.
    SimulateRevenue {
        #[command(flatten)]
        common: SimArgs,
        #[command(flatten)]
        revenue: RevenueArgs,
    },
    /// Run the click-through algorithm with impression requirements.
    SimulateCtr {
        #[command(flatten)]
        common: SimArgs,
        #[command(flatten)]
        ctr: CtrArgs,
    },
    /// Solve the offline optimum and write it as JSON.
    OfflineBaseline {
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum, default_value_t = Objective::Revenue)]
        objective: Objective,
        /// Base subgradient step; chosen from the instance when omitted.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = adqueue::offline_baseline::DEFAULT_ITERATIONS)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold choice and stationary queue of the two-step threshold policy.
    ThresholdPolicy {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
        /// Comma-separated epsilons.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon_sweep: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the single- and multi-queue lower bounds from a JSON file.
    LowerBound {
        #[arg(long)]
        params: PathBuf,
    },
    /// Run one scenario per epsilon on a shared sample path.
    Sweep {
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long)]
        cycles: usize,
        #[command(flatten)]
        revenue: RevenueArgs,
        #[command(flatten)]
        ctr: CtrArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weight paths of the two-client underdraft unfairness example.
    DemoUnfairness {
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Instance file (JSON or TOML) or a bundled fixture name.
    #[arg(long)]
    instance: String,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    cycles: usize,
    /// Also copy the result here: the replica CSV for one replica, the
    /// aggregate otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RevenueArgs {
    #[arg(long, value_enum, default_value_t = Variant::Standard)]
    variant: Variant,
    /// Relative error of estimated click-through rates.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = ChargingArg::PerClick)]
    charging: ChargingArg,
}

#[derive(Debug, Args)]
struct CtrArgs {
    #[arg(long, value_enum, default_value_t = PolicyArg::Mwm)]
    policy: PolicyArg,
    /// Queueing cycles per requirement cycle for mwm-fast.
    #[arg(long = "fast-T", default_value_t = fixtures::FIVE_KEYWORD_QUEUEING_CYCLES)]
    fast_t: usize,
    /// Replace the requirements by customised ones for this queue target.
    #[arg(long)]
    customize_qmax: Option<f64>,
    /// Hourly periods per cycle; a flat profile is used when the instance
    /// has none.
    #[arg(long)]
    hours: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Standard,
    Underdraft,
    Estimated,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChargingArg {
    PerClick,
    PerImpression,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Mwm,
    MwmFast,
    Opt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Objective {
    Revenue,
    Clicks,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Revenue,
    Ctr,
}

#[derive(Debug, Deserialize)]
struct LowerBoundFile {
    #[serde(flatten)]
    params: LowerBoundParams,
    region: Option<HalfspaceRegion>,
}

fn load_instance(spec: &str) -> adqueue::Result<ProblemInstance> {
    if Path::new(spec).exists() {
        ProblemInstance::load(spec)
    } else {
        fixtures::by_name(spec)
    }
}

fn revenue_workload(a: &RevenueArgs) -> adqueue::Result<Workload> {
    let kind = match a.variant {
        Variant::Standard => RevenueKind::Standard,
        Variant::Underdraft => RevenueKind::Underdraft,
        Variant::Estimated => RevenueKind::Estimated {
            delta: a.delta.ok_or_else(|| {
                Error::InvalidArgument("--variant estimated needs --delta".into())
            })?,
        },
    };
    let charging = match a.charging {
        ChargingArg::PerClick => Charging::PerClick,
        ChargingArg::PerImpression => Charging::PerImpression,
    };
    Ok(Workload::Revenue { kind, charging })
}

fn ctr_workload(inst: &mut ProblemInstance, a: &CtrArgs) -> adqueue::Result<Workload> {
    if let Some(h) = a.hours {
        match &inst.hourly_arrival_prob {
            Some(p) if p.len() != h => {
                return Err(Error::InvalidArgument(format!(
                    "--hours {h} disagrees with the instance's {} hourly rates",
                    p.len()
                )))
            }
            Some(_) => {}
            None => {
                if h == 0 || !inst.cycle_slots.is_multiple_of(h) {
                    return Err(Error::InvalidArgument(format!(
                        "--hours {h} must divide the cycle length {}",
                        inst.cycle_slots
                    )));
                }
                inst.hourly_arrival_prob = Some(vec![inst.arrival_prob; h]);
            }
        }
    }
    let kind = match a.policy {
        PolicyArg::Mwm => CtrKind::Mwm,
        PolicyArg::MwmFast => CtrKind::MwmFast {
            queueing_cycles: a.fast_t,
        },
        PolicyArg::Opt => CtrKind::Opt,
    };
    Ok(Workload::Ctr {
        kind,
        q_max: a.customize_qmax,
    })
}

fn exec(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn simulate(
    cli: &Cli,
    name: &str,
    common: &SimArgs,
    inst: ProblemInstance,
    workload: Workload,
) -> anyhow::Result<()> {
    let sc = Scenario::new(
        name,
        inst,
        workload,
        common.epsilon,
        common.cycles,
        cli.seed,
        cli.replicas,
    );
    let report = run_scenario(&sc, &cli.out_dir, exec(cli))?;
    for s in &report.summaries {
        println!(
            "seed {}: objective/slot {:.6}, mean total queue {:.3}, max queue {:.3}",
            s.seed, s.objective, s.mean_total_queue, s.max_queue
        );
    }
    println!("wrote {}", report.aggregate_path.display());
    if let Some(out) = &common.out {
        let src = if report.replica_paths.len() == 1 {
            &report.replica_paths[0]
        } else {
            &report.aggregate_path
        };
        fs::copy(src, out).with_context(|| format!("copying to {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn offline(
    instance: &str,
    objective: Objective,
    step: Option<f64>,
    iters: usize,
    out: &Path,
) -> anyhow::Result<()> {
    let inst = load_instance(instance)?;
    let result = match objective {
        Objective::Revenue => {
            let lp = MatchingLp::revenue(&inst)?;
            solve_lp(
                &lp,
                SolveOptions {
                    step,
                    iterations: iters,
                    ..SolveOptions::default()
                },
            )
        }
        Objective::Clicks => {
            let req = inst.requirements()?.to_vec();
            let mm = max_min_slack(&inst, &req, MAX_MIN_ITERATIONS, None)?;
            if mm.value < 0.0 {
                return Err(Error::Infeasible(format!(
                    "requirements exceed capacity (slack {:.4})",
                    mm.value
                ))
                .into());
            }
            ctr_optimum(&inst, &req, &mm.policy, iters)
        }
    };
    let (sol, err) = match result {
        Ok(s) => (s, None),
        Err(Error::NotConverged {
            solution,
            residual,
            tolerance,
        }) => (
            *solution,
            Some(anyhow::anyhow!(
                "did not converge: residual {residual:.3e} above tolerance {tolerance:.3e}; solution written anyway"
            )),
        ),
        Err(e) => return Err(e.into()),
    };
    let json = serde_json::to_string_pretty(&sol)?;
    fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "R* = {:.8} per slot, residual {:.3e}, gap {:.3e}; wrote {}",
        sol.r_star,
        sol.residual,
        sol.gap,
        out.display()
    );
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn threshold(nu: f64, p1: f64, p2: f64, eps: &[f64], out: Option<&Path>) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    println!("epsilon,t_real,t_int,throughput,mean_queue,within_bracket");
    for &e in eps {
        let ch = threshold_for_epsilon(nu, p1, p2, e)?;
        println!(
            "{e},{},{},{},{},{}",
            ch.t_real,
            ch.t_int,
            ch.throughput,
            ch.mean_queue,
            ch.within_bracket()
        );
        rows.push(vec![
            e,
            ch.t_real,
            ch.t_int as f64,
            ch.throughput,
            ch.mean_queue,
            ch.bracket.0,
            ch.bracket.1,
            f64::from(u8::from(ch.within_bracket())),
        ]);
    }
    if let Some(out) = out {
        let table = MetricsTable {
            columns: [
                "epsilon",
                "t_real",
                "t_int",
                "throughput",
                "mean_queue",
                "bracket_low",
                "bracket_high",
                "within_bracket",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            rows,
        };
        let prov = vec![
            ("nu".to_string(), nu.to_string()),
            ("p1".to_string(), p1.to_string()),
            ("p2".to_string(), p2.to_string()),
            ("build".to_string(), BUILD.to_string()),
        ];
        write_csv(out, &prov, &table)?;
    }
    Ok(())
}

fn lower_bound(path: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let file: LowerBoundFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.params.validate()?;
    println!(
        "single_queue_lower_bound = {}",
        single_queue_lower_bound(&file.params)
    );
    if let Some(region) = file.region {
        region.validate()?;
        println!(
            "multi_queue_lower_bound = {}",
            multi_queue_lower_bound(&file.params, &region)
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::SimulateRevenue { common, revenue } => {
            let inst = load_instance(&common.instance)?;
            simulate(
                cli,
                "simulate-revenue",
                common,
                inst,
                revenue_workload(revenue)?,
            )
        }
        Command::SimulateCtr { common, ctr } => {
            let mut inst = load_instance(&common.instance)?;
            let w = ctr_workload(&mut inst, ctr)?;
            simulate(cli, "simulate-ctr", common, inst, w)
        }
        Command::OfflineBaseline {
            instance,
            objective,
            step,
            iters,
            out,
        } => offline(instance, *objective, *step, *iters, out),
        Command::ThresholdPolicy {
            nu,
            p1,
            p2,
            epsilon_sweep,
            out,
        } => threshold(*nu, *p1, *p2, epsilon_sweep, out.as_deref()),
        Command::LowerBound { params } => lower_bound(params),
        Command::Sweep {
            instance,
            model,
            epsilons,
            cycles,
            revenue,
            ctr,
            out,
        } => {
            let mut inst = load_instance(instance)?;
            let workload = match model {
                Model::Revenue => revenue_workload(revenue)?,
                Model::Ctr => ctr_workload(&mut inst, ctr)?,
            };
            let first = *epsilons.first().unwrap_or(&0.0);
            let sc = Scenario::new("sweep", inst, workload, first, *cycles, cli.seed, 1);
            let rows = sweep_epsilon(&sc, epsilons, exec(cli))?;
            println!(
                "epsilon,objective,optimum,gap,std_error,gap_bound,mean_total_queue,max_queue"
            );
            for r in &rows {
                let gb = r.gap_bound.map_or(String::new(), |g| g.to_string());
                println!(
                    "{},{},{},{},{},{gb},{},{}",
                    r.epsilon,
                    r.objective,
                    r.optimum,
                    r.gap,
                    r.std_error,
                    r.mean_total_queue,
                    r.max_queue
                );
            }
            let path = match out {
                Some(p) => p.clone(),
                None => {
                    fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io {
                        path: cli.out_dir.clone(),
                        source: e,
                    })?;
                    cli.out_dir.join("sweep.csv")
                }
            };
            write_sweep(&path, &sc, &rows)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::DemoUnfairness {
            epsilon,
            horizon,
            out,
        } => {
            let trace = unfairness_demo(*epsilon, *horizon, cli.seed)?;
            match trace.catch_up_cycle(0.01) {
                Some(k) => println!("client 2 stops leading at cycle {k}"),
                None => println!("client 2 still leads after {horizon} cycles"),
            }
            if let Some(out) = out {
                let table = MetricsTable {
                    columns: vec!["cycle".into(), "w1".into(), "w2".into()],
                    rows: trace
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(k, (a, b))| vec![k as f64, *a, *b])
                        .collect(),
                };
                let prov = vec![
                    ("seed".to_string(), cli.seed.to_string()),
                    ("epsilon".to_string(), epsilon.to_string()),
                    ("build".to_string(), BUILD.to_string()),
                ];
                write_csv(out, &prov, &table)?;
            }
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already include their cause in the message.
            match e.downcast_ref::<Error>() {
                Some(inner) => eprintln!("error: {inner}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
