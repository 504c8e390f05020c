use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use alps_core::artifact::ArtifactWriter;
use alps_core::config::{parse_config, RunConfig};
use alps_core::harness::demo::demo_scenario;
use alps_core::harness::{
    acceptance_experiment, bound_sweep, complexity_scan, cross_validation, excursion_experiment,
    occupation_experiment, occupation_time_experiment, simulate_run, transform_run,
    weak_convergence_test, ExperimentReport, Metric, SamplerKind, Tolerance,
};
use alps_core::ladder::Spacing;
use alps_core::seed::{replica_rng, DEFAULT_SEED, SEED_ENV};
use alps_core::sim::Trace;
use alps_core::{skewbm, Error};

/// Vanilla ALPS temperature chain, its skew Brownian motion limit and the
/// checks that tie them together.
#[derive(Debug, Parser)]
#[command(name = "alps", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    /// Worker threads for replica-parallel experiments.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for reports and data files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpacingArg {
    Standard,
    Quanta,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CompareKind {
    All,
    Weak,
    Occupation,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    dimension: Option<usize>,
    #[arg(long)]
    ell0: Option<f64>,
    #[arg(long)]
    betamax: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Resample every coordinate instead of the sufficient statistic.
    #[arg(long)]
    full_coordinate: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the chain and write its trace.
    Simulate(SimulateArgs),
    /// Map a trace through the X, H, Z and W stages.
    Transform {
        /// Trace CSV; defaults to `trace.csv` in the output directory.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Compare transformed ALPS paths with the skew Brownian motion.
    Compare {
        #[arg(long, value_enum, default_value = "all")]
        only: CompareKind,
    },
    /// Round-trip time scan over dimensions.
    Complexity {
        #[arg(long, value_enum)]
        spacing: Option<SpacingArg>,
        /// Exponent for `quanta` spacing.
        #[arg(long)]
        quanta_k: Option<f64>,
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        full_coordinate: bool,
    },
    /// Sign law of macroscopic excursions of the W path.
    Excursions,
    /// Exact reflecting-walk bound sweep and birth-death occupation time.
    AppendixVerify,
    /// Five-dimensional skew-normal example and its figure data.
    Demo {
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        svg: bool,
    },
    /// Interior-rung acceptance against its limit.
    Acceptance,
    /// Sufficient-statistic against full-coordinate simulation.
    CrossValidate,
}

struct Context {
    config: RunConfig,
    seed: u64,
    threads: usize,
    out: PathBuf,
}

fn write_report(ctx: &Context, report: &ExperimentReport) -> Result<ArtifactWriter, Error> {
    let mut w = ArtifactWriter::new(&ctx.out, report)?;
    w.report(report)?;
    Ok(w)
}

fn simulate(ctx: &mut Context, a: SimulateArgs) -> Result<Vec<ExperimentReport>, Error> {
    let c = &mut ctx.config;
    if let Some(v) = a.steps {
        c.simulation.steps = v;
    }
    if let Some(v) = a.dimension {
        c.dimension = v;
    }
    if let Some(v) = a.ell0 {
        c.ladder.ell0 = v;
    }
    if let Some(v) = a.betamax {
        c.ladder.betamax = Some(v);
    }
    if let Some(v) = a.replicas {
        c.simulation.replicas = v;
    }
    if a.full_coordinate {
        c.simulation.sampler = SamplerKind::FullCoordinate;
    }
    c.validate()?;
    let out = simulate_run(c, ctx.seed, ctx.threads)?;
    let mut w = write_report(ctx, &out.report)?;
    w.csv("ladder.csv", &out.ladder.to_csv())?;
    for (i, t) in out.traces.iter().enumerate() {
        let name = if out.traces.len() == 1 {
            "trace.csv".to_string()
        } else {
            format!("trace_{i}.csv")
        };
        w.csv(&name, &t.to_csv())?;
    }
    Ok(vec![out.report])
}

fn transform(
    ctx: &Context,
    trace: Option<PathBuf>,
    svg: bool,
) -> Result<Vec<ExperimentReport>, Error> {
    let path = trace.unwrap_or_else(|| ctx.out.join("trace.csv"));
    let ladder = ctx.config.ladder()?;
    let text = std::fs::read_to_string(&path)?;
    let trace = Trace::from_csv(&text, &ladder)?;
    let out = transform_run(&ctx.config, &trace, ctx.seed)?;
    let mut w = write_report(ctx, &out.report)?;
    for (name, stage) in ["x", "h", "z", "w"].iter().zip(&out.stages) {
        w.csv(&format!("path_{name}.csv"), &stage.to_csv())?;
    }
    if svg {
        let s = &out.stages[3];
        w.svg(
            "path_w.svg",
            &alps_core::svg::line("W path", &s.times, &s.values),
        )?;
    }
    Ok(vec![out.report])
}

fn compare(ctx: &Context, only: CompareKind) -> Result<Vec<ExperimentReport>, Error> {
    let mut reports = Vec::new();
    let e = &ctx.config.experiments;
    if matches!(only, CompareKind::All | CompareKind::Weak) {
        let mut cfg = e.weak.clone();
        cfg.threads = ctx.threads;
        reports.push(weak_convergence_test(&cfg, ctx.seed)?);
    }
    if matches!(only, CompareKind::All | CompareKind::Occupation) {
        let mut cfg = e.occupation.clone();
        cfg.threads = ctx.threads;
        reports.push(occupation_experiment(&cfg, ctx.seed)?);
    }
    for r in &reports {
        write_report(ctx, r)?;
    }
    // reference path of the configured target
    if ctx.config.modes.len() == 2 {
        let sb = ctx.config.skewbm_config()?;
        let start = ctx.config.skewbm.start.unwrap_or(sb.constants.wmax);
        let path = skewbm::simulate(
            &sb,
            start,
            ctx.config.skewbm.record_every,
            &mut replica_rng(ctx.seed, 0),
        );
        let mut meta = ExperimentReport::new("skewbm_path", &sb, ctx.seed);
        meta.push(Metric::new(
            "points",
            path.times.len() as f64,
            0.0,
            1,
            Tolerance::Info,
        ));
        let mut w = write_report(ctx, &meta)?;
        w.csv("skewbm_path.csv", &path.to_csv())?;
        reports.push(meta);
    }
    Ok(reports)
}

fn run_command(ctx: &mut Context, command: Command) -> Result<Vec<ExperimentReport>, Error> {
    let e = ctx.config.experiments.clone();
    let seed = ctx.seed;
    let single = |ctx: &Context, r: ExperimentReport| -> Result<Vec<ExperimentReport>, Error> {
        write_report(ctx, &r)?;
        Ok(vec![r])
    };
    match command {
        Command::Simulate(a) => simulate(ctx, a),
        Command::Transform { trace, svg } => transform(ctx, trace, svg),
        Command::Compare { only } => compare(ctx, only),
        Command::Complexity {
            spacing,
            quanta_k,
            dims,
            full_coordinate,
        } => {
            let mut cfg = e.complexity;
            cfg.threads = ctx.threads;
            let k = quanta_k.unwrap_or(match cfg.spacing {
                Spacing::Quanta { k } => k,
                Spacing::Standard => 3.0,
            });
            match spacing {
                Some(SpacingArg::Standard) => cfg.spacing = Spacing::Standard,
                Some(SpacingArg::Quanta) => cfg.spacing = Spacing::Quanta { k },
                None => {
                    if let (Spacing::Quanta { .. }, Some(k)) = (cfg.spacing, quanta_k) {
                        cfg.spacing = Spacing::Quanta { k };
                    }
                }
            }
            if let Some(d) = dims {
                cfg.dims = d;
            }
            if full_coordinate {
                cfg.sampler = SamplerKind::FullCoordinate;
            }
            single(ctx, complexity_scan(&cfg, seed)?)
        }
        Command::Excursions => single(ctx, excursion_experiment(&e.excursions, seed)?),
        Command::AppendixVerify => {
            let (report, sweep) = bound_sweep(&e.appendix, seed)?;
            let mut w = write_report(ctx, &report)?;
            w.csv("appendix_sweep.csv", &sweep.to_csv())?;
            let occ = occupation_time_experiment(&e.occupation_time, seed)?;
            write_report(ctx, &occ)?;
            Ok(vec![report, occ])
        }
        Command::Demo { steps, svg } => {
            let mut cfg = e.demo;
            if let Some(s) = steps {
                cfg.steps = s;
            }
            let out = demo_scenario(&cfg, seed)?;
            let mut w = write_report(ctx, &out.report)?;
            w.csv("fig1_marginal.csv", &out.marginal_csv)?;
            w.csv("fig2_beta_trace.csv", &out.beta_trace_csv)?;
            w.csv("fig3_transformed_trace.csv", &out.transformed_trace_csv)?;
            if svg {
                w.svg("fig2_beta_trace.svg", &out.beta_trace_svg)?;
                w.svg("fig3_transformed_trace.svg", &out.transformed_trace_svg)?;
            }
            Ok(vec![out.report])
        }
        Command::Acceptance => {
            let mut cfg = e.acceptance;
            cfg.threads = ctx.threads;
            single(ctx, acceptance_experiment(&cfg, seed)?)
        }
        Command::CrossValidate => {
            let mut cfg = e.cross_validation;
            cfg.threads = ctx.threads;
            single(ctx, cross_validation(&cfg, seed)?)
        }
    }
}

fn failure_json(err: &Error) -> serde_json::Value {
    match err {
        Error::Config(problems) => {
            json!({"status": "error", "kind": "config", "problems": problems})
        }
        other => json!({"status": "error", "kind": "runtime", "message": other.to_string()}),
    }
}

fn load(cli: &Cli) -> Result<Context, Error> {
    let config = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::minimal(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let threads = cli.threads.or(config.threads).unwrap_or(1);
    if threads == 0 {
        return Err(Error::Config(vec!["--threads must be at least 1".into()]));
    }
    let out = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| config.output.dir.clone());
    Ok(Context {
        config,
        seed,
        threads,
        out,
    })
}

fn summary(reports: &[ExperimentReport], out: &Path) -> serde_json::Value {
    let passed = reports.iter().all(|r| r.passed());
    let failures: Vec<serde_json::Value> = reports
        .iter()
        .flat_map(|r| {
            r.failures()
                .into_iter()
                .map(move |m| json!({"experiment": r.kind, "metric": m}))
        })
        .collect();
    json!({
        "status": if passed { "pass" } else { "fail" },
        "out_dir": out,
        "reports": reports.iter().map(|r| json!({
            "kind": r.kind, "seed": r.seed, "config_hash": r.config_hash, "passed": r.passed(),
        })).collect::<Vec<_>>(),
        "failures": failures,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut ctx = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", failure_json(&e));
            return ExitCode::from(2);
        }
    };
    match run_command(&mut ctx, cli.command) {
        Ok(reports) => {
            let s = summary(&reports, &ctx.out);
            // a closed pipe on stdout is not a failure of the run
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&s).expect("json")
            );
            if reports.iter().all(|r| r.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", failure_json(&e));
            ExitCode::from(2)
        }
    }
}
