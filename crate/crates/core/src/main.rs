//! `tvqp` — experiment front end for the asynchronous time-varying QP
//! simulator: runs, comparisons, parameter sweeps, bound tables, the
//! nonconvex-aggregate demonstration, and SVG plots.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use tvqp::baselines::{run_consensus, run_sync_bcd, ConsensusConfig};
use tvqp::bcd_engine::{run, GammaPolicy};
use tvqp::config::ExperimentConfig;
use tvqp::error::{Result, TvqpError};
use tvqp::metrics::{compute_metrics, SummaryReport};
use tvqp::oracle::symmetric_part_eigs;
use tvqp::qp_model::{build_aggregate, nonconvex_demo_qp, nonconvex_demo_sample_state};
use tvqp::report;

#[derive(Parser)]
#[command(name = "tvqp", version, about = "Asynchronously sampled time-varying QP simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit trace.csv, intervals.csv, and summary.csv
    Run {
        config: PathBuf,
        /// Also dump the event schedule (k, agent, event_type, counterpart, tau)
        #[arg(long)]
        dump_schedule: Option<PathBuf>,
    },
    /// Run async BCD, dense sync BCD, and the consensus baseline; async BCD
    /// and consensus share one sampled-objective realization
    Compare { config: PathBuf },
    /// Re-run the experiment for each value of one parameter
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated list, e.g. 1,3,10,100
        #[arg(long)]
        values: String,
    },
    /// Per-interval constants, step-size ceilings, and tracking bounds
    Bounds { config: PathBuf },
    /// Reproduce the nonconvex aggregate built from asynchronous samples
    Nonconvexity,
    /// Render selected CSV columns as an SVG polyline chart
    Plot {
        csv: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// First column is the x axis, the rest are series, e.g. k,alpha
        #[arg(long)]
        cols: String,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Ok(v) = std::env::var("TVQP_SEED") {
        let seed: u64 = v
            .parse()
            .map_err(|_| TvqpError::Config(format!("TVQP_SEED must be an integer, got `{v}`")))?;
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_summary(label: &str, s: &SummaryReport) {
    let fmt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.6e}"),
        None => "unavailable".into(),
    };
    println!(
        "{label}: rms_error={} avg_before_sample={} final_alpha={}",
        fmt(s.rms_error),
        fmt(s.avg_before_sample),
        fmt(s.final_alpha.last().map(|&(_, a)| a)),
    );
}

fn cmd_run(config: &Path, dump_schedule: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let qp = cfg.build_problem()?;
    let plan = cfg.build_plan()?;
    let schedule = cfg.build_schedule(&plan, &qp)?;
    let x0 = cfg.build_x0(&qp)?;
    let trace = run(&qp, &plan, &schedule, &cfg.engine_config(), &x0)?;
    let summary = compute_metrics(&trace);

    std::fs::create_dir_all(&cfg.out_dir)?;
    report::write_trace_csv(&cfg.out_dir.join("trace.csv"), &trace, cfg.with_oracle)?;
    report::write_intervals_csv(&cfg.out_dir.join("intervals.csv"), &trace)?;
    report::write_summary_csv(
        &cfg.out_dir.join("summary.csv"),
        &[("async_bcd".to_string(), summary.clone())],
    )?;
    if let Some(path) = dump_schedule {
        report::write_schedule_csv(path, &schedule)?;
    }
    print_summary("async_bcd", &summary);
    println!("wrote {}", cfg.out_dir.join("trace.csv").display());
    Ok(())
}

fn cmd_compare(config: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let qp = cfg.build_problem()?;
    let plan = cfg.build_plan()?;
    let schedule = cfg.build_schedule(&plan, &qp)?;
    let x0 = cfg.build_x0(&qp)?;

    let gamma = match cfg.gamma {
        GammaPolicy::Fixed(g) => g,
        GammaPolicy::Auto { .. } => {
            return Err(TvqpError::Config(
                "compare needs a fixed gamma so all algorithms share it".into(),
            ));
        }
    };
    let kappa: Vec<usize> = if cfg.kappa.len() == 1 {
        vec![cfg.kappa[0]; plan.num_events()]
    } else {
        cfg.kappa.clone()
    };

    let trace_async = run(&qp, &plan, &schedule, &cfg.engine_config(), &x0)?;
    let trace_sync = run_sync_bcd(
        &qp,
        cfg.t_s,
        cfg.horizon,
        kappa[0],
        gamma,
        &x0,
        cfg.with_oracle.then_some(&cfg.oracle),
    )?;
    let consensus_cfg = match cfg.consensus_topology.as_str() {
        "complete" => ConsensusConfig::complete(cfg.agents, cfg.consensus_gamma.unwrap_or(gamma)),
        "ring" => ConsensusConfig::ring(cfg.agents, cfg.consensus_gamma.unwrap_or(gamma)),
        other => {
            return Err(TvqpError::Config(format!(
                "unknown consensus topology `{other}`"
            )));
        }
    };
    let trace_consensus = run_consensus(
        &qp,
        &plan,
        &consensus_cfg,
        &kappa,
        &x0,
        cfg.with_oracle.then_some(&cfg.oracle),
    )?;

    let rows = vec![
        ("async_bcd".to_string(), compute_metrics(&trace_async)),
        ("sync_bcd".to_string(), compute_metrics(&trace_sync)),
        ("consensus".to_string(), compute_metrics(&trace_consensus)),
    ];
    std::fs::create_dir_all(&cfg.out_dir)?;
    report::write_trace_csv(&cfg.out_dir.join("trace_async.csv"), &trace_async, cfg.with_oracle)?;
    report::write_trace_csv(&cfg.out_dir.join("trace_sync.csv"), &trace_sync, cfg.with_oracle)?;
    report::write_trace_csv(
        &cfg.out_dir.join("trace_consensus.csv"),
        &trace_consensus,
        cfg.with_oracle,
    )?;
    report::write_summary_csv(&cfg.out_dir.join("summary.csv"), &rows)?;
    for (label, s) in &rows {
        print_summary(label, s);
    }
    Ok(())
}

fn apply_sweep_value(cfg: &mut ExperimentConfig, param: &str, value: &str) -> Result<()> {
    let bad_num = || TvqpError::Config(format!("bad sweep value `{value}` for `{param}`"));
    match param {
        "B" => {
            cfg.b = value.parse().map_err(|_| bad_num())?;
            if cfg.b == 0 {
                return Err(TvqpError::Config("B must be >= 1".into()));
            }
        }
        "gamma" => {
            let g: f64 = value.parse().map_err(|_| bad_num())?;
            if g <= 0.0 {
                return Err(TvqpError::Config("gamma must be positive".into()));
            }
            cfg.gamma = GammaPolicy::Fixed(g);
        }
        "kappa" => {
            let k: usize = value.parse().map_err(|_| bad_num())?;
            if k == 0 {
                return Err(TvqpError::Config("kappa must be >= 1".into()));
            }
            cfg.kappa = vec![k];
        }
        "p_sample" => {
            let p: f64 = value.parse().map_err(|_| bad_num())?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(TvqpError::Config("p_sample must lie in (0,1]".into()));
            }
            cfg.p_sample = vec![p; cfg.agents];
        }
        "p_update" => {
            let p: f64 = value.parse().map_err(|_| bad_num())?;
            if !(0.0..=1.0).contains(&p) {
                return Err(TvqpError::Config("p_update must lie in [0,1]".into()));
            }
            cfg.p_update = p;
        }
        "p_comm" => {
            let p: f64 = value.parse().map_err(|_| bad_num())?;
            if !(0.0..=1.0).contains(&p) {
                return Err(TvqpError::Config("p_comm must lie in [0,1]".into()));
            }
            cfg.p_comm = p;
        }
        "N" => {
            let n: usize = value.parse().map_err(|_| bad_num())?;
            if n == 0 {
                return Err(TvqpError::Config("N must be >= 1".into()));
            }
            let p = cfg.p_sample[0];
            cfg.agents = n;
            cfg.p_sample = vec![p; n];
            let dim = cfg.n();
            cfg.box_lo = vec![cfg.box_lo[0]; dim];
            cfg.box_hi = vec![cfg.box_hi[0]; dim];
        }
        other => {
            return Err(TvqpError::Config(format!(
                "unknown sweep parameter `{other}` (expected B, gamma, kappa, p_sample, p_update, p_comm, or N)"
            )));
        }
    }
    Ok(())
}

fn cmd_sweep(config: &Path, param: &str, values: &str) -> Result<()> {
    let base = load_config(config)?;
    let mut rows: Vec<(String, SummaryReport)> = Vec::new();
    std::fs::create_dir_all(&base.out_dir)?;
    for value in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut cfg = base.clone();
        apply_sweep_value(&mut cfg, param, value)?;
        let qp = cfg.build_problem()?;
        let plan = cfg.build_plan()?;
        let schedule = cfg.build_schedule(&plan, &qp)?;
        let x0 = cfg.build_x0(&qp)?;
        let trace = run(&qp, &plan, &schedule, &cfg.engine_config(), &x0)?;
        let summary = compute_metrics(&trace);
        let label = format!("{param}={value}");
        report::write_trace_csv(
            &base.out_dir.join(format!("trace_{param}_{value}.csv")),
            &trace,
            cfg.with_oracle,
        )?;
        print_summary(&label, &summary);
        rows.push((label, summary));
    }
    if rows.is_empty() {
        return Err(TvqpError::Config("sweep received no values".into()));
    }
    report::write_summary_csv(&base.out_dir.join("sweep_summary.csv"), &rows)?;
    println!(
        "wrote {}",
        base.out_dir.join("sweep_summary.csv").display()
    );
    Ok(())
}

fn cmd_bounds(config: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let rep = report::bounds_report(&cfg)?;
    print!("{}", report::render_bounds_table(&rep));
    std::fs::create_dir_all(&cfg.out_dir)?;
    report::write_bounds_csv(&cfg.out_dir.join("bounds.csv"), &rep)?;
    println!("wrote {}", cfg.out_dir.join("bounds.csv").display());
    Ok(())
}

fn cmd_nonconvexity() -> Result<()> {
    let qp = nonconvex_demo_qp();
    let state = nonconvex_demo_sample_state();
    let agg = build_aggregate(&qp, &state)?;
    let sym = agg.q_hat.symmetric_part();
    let eigs = symmetric_part_eigs(&agg.q_hat);

    println!("aggregate matrix from asynchronous samples (theta_1 = 5pi/4, theta_2 = 3pi/2):");
    for i in 0..2 {
        println!("  [{:+.6}, {:+.6}]", agg.q_hat[(i, 0)], agg.q_hat[(i, 1)]);
    }
    println!("symmetric part:");
    for i in 0..2 {
        println!("  [{:+.6}, {:+.6}]", sym[(i, 0)], sym[(i, 1)]);
    }
    println!("eigenvalues: {:.6}, {:.6}", eigs[0], eigs[1]);
    let verdict = if eigs[1] < 0.0 {
        "nonconvex aggregate"
    } else {
        "convex aggregate"
    };
    println!("verdict: {verdict} (every synchronous sample is strongly convex)");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Command::Run {
            config,
            dump_schedule,
        } => cmd_run(config, dump_schedule.as_deref()),
        Command::Compare { config } => cmd_compare(config),
        Command::Sweep {
            config,
            param,
            values,
        } => cmd_sweep(config, param, values),
        Command::Bounds { config } => cmd_bounds(config),
        Command::Nonconvexity => cmd_nonconvexity(),
        Command::Plot { csv, output, cols } => {
            let cols: Vec<String> = cols.split(',').map(|s| s.trim().to_string()).collect();
            report::plot_csv(csv, output, &cols)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
