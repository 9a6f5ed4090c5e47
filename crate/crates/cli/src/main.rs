use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use coach_core::harness::experiment::{run_batteries, summarize, write_long_csv, ExperimentReport};
use coach_core::harness::recovery::{run_recovery, RecoveryConfig};
use coach_core::harness::teaching::replay_matches;
use coach_core::harness::{ExperimentConfig, SeedRange, TeacherKind, TeachingTrace};
use coach_core::inference::{InferenceConfig, PriorConfig, QuadratureRule};
use coach_server::ServerOptions;

#[derive(Parser)]
#[command(name = "coach", version, about = "Adaptive teaching experiments and live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured teacher on a seed range and write traces and reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: Option<SeedRange>,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to these teacher kinds (repeatable).
        #[arg(long = "teacher")]
        teachers: Vec<TeacherKind>,
    },
    /// Compare teachers on matched seeds and print the summary.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: Option<SeedRange>,
        /// Also write report.json, report.csv and long.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a trace and check that it replays byte-identically.
    Eval {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Generative-recovery experiment for the MAP estimator.
    Recovery {
        #[arg(long, default_value_t = 100)]
        replications: usize,
        #[arg(long, default_value_t = 50)]
        observations: usize,
        #[arg(long, default_value_t = 0.3)]
        lambda: f64,
    },
    /// Serve live teaching sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Seconds before a silent player's move defaults to the idle action.
        #[arg(long, default_value_t = 30)]
        action_timeout: u64,
    },
}

fn load_config(path: &Path, seeds: Option<SeedRange>, teachers: &[TeacherKind]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    if !teachers.is_empty() {
        cfg.teachers = teachers.to_vec();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_reports(dir: &Path, report: &ExperimentReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("report.json"))?), report)?;
    report.write_csv(BufWriter::new(File::create(dir.join("report.csv"))?))?;
    Ok(())
}

fn print_report(report: &ExperimentReport) {
    println!("config {}", &report.config_hash[..12]);
    println!(
        "{:<16} {:>6} {:>22} {:>8} {:>10}  allocation",
        "teacher", "seeds", "competence [95% CI]", "belief", "regret"
    );
    for s in &report.teachers {
        let regret = s.regret.map_or_else(|| "-".into(), |r| format!("{:.4}", r.mean));
        let alloc: Vec<String> = s.allocation.iter().map(|a| format!("{a:.2}")).collect();
        println!(
            "{:<16} {:>6} {:.4} [{:.4},{:.4}] {:>8.3} {:>10}  {}",
            s.teacher.as_str(),
            s.seeds,
            s.competence.mean,
            s.competence.lo,
            s.competence.hi,
            s.belief_mastery.mean,
            regret,
            alloc.join(" / ")
        );
    }
    for d in &report.pairwise {
        if d.a == TeacherKind::StudentAware {
            println!(
                "student_aware - {:<16} {:+.4} [{:+.4},{:+.4}]",
                d.b.as_str(),
                d.difference.mean,
                d.difference.lo,
                d.difference.hi
            );
        }
    }
    if let Some(rho) = report.belief_truth_spearman {
        println!("belief/competence spearman {rho:.3}");
    }
}

fn run(config: &Path, seeds: Option<SeedRange>, out: &Path, teachers: &[TeacherKind]) -> Result<()> {
    let cfg = load_config(config, seeds, teachers)?;
    let batteries = run_batteries(&cfg)?;
    for b in &batteries {
        let dir = out.join("traces").join(b.teacher.as_str());
        fs::create_dir_all(&dir)?;
        for trace in &b.traces {
            let path = dir.join(format!("seed-{}.jsonl", trace.header.seed));
            trace.write_jsonl(BufWriter::new(File::create(&path)?))?;
        }
    }
    let report = summarize(&cfg, &batteries);
    write_reports(out, &report)?;
    write_long_csv(&batteries, BufWriter::new(File::create(out.join("long.csv"))?))?;
    print_report(&report);
    tracing::info!(out = %out.display(), "wrote traces and reports");
    Ok(())
}

fn compare(config: &Path, seeds: Option<SeedRange>, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(config, seeds, &[])?;
    if cfg.teachers.len() < 2 {
        bail!("compare needs at least two teacher kinds");
    }
    let batteries = run_batteries(&cfg)?;
    let report = summarize(&cfg, &batteries);
    if let Some(dir) = out {
        write_reports(dir, &report)?;
        write_long_csv(&batteries, BufWriter::new(File::create(dir.join("long.csv"))?))?;
    }
    print_report(&report);
    Ok(())
}

fn eval(path: &Path) -> Result<()> {
    let trace = TeachingTrace::read_jsonl(BufReader::new(File::open(path)?))?;
    let m = &trace.final_metrics;
    let mut out = io::stdout().lock();
    writeln!(out, "teacher {} seed {} env {}", trace.header.teacher, trace.header.seed, trace.header.env)?;
    writeln!(
        out,
        "segments {} (calibration {}, adaptive {}), allocation {:?}",
        m.segments, m.calibration_segments, m.adaptive_segments, m.allocation
    )?;
    writeln!(out, "final competence {:?} (mean {:.4})", m.final_competence, m.mean_competence)?;
    writeln!(out, "final belief mastery {:?} (mean {:.4})", m.final_mastery, m.mean_mastery)?;
    writeln!(
        out,
        "total reward {:.6}, distance {:.6} -> {:.6}",
        m.total_reward, m.initial_distance, m.final_distance
    )?;
    let ok = replay_matches(&trace)?;
    writeln!(out, "replay {}", if ok { "identical" } else { "DIFFERS" })?;
    if !ok {
        bail!("trace does not replay identically");
    }
    Ok(())
}

fn recovery(replications: usize, observations: usize, lambda: f64) -> Result<()> {
    let cfg = RecoveryConfig {
        replications,
        observations,
        lambda,
        ..RecoveryConfig::default()
    };
    let report = run_recovery(
        &cfg,
        &PriorConfig::default(),
        &QuadratureRule::default(),
        &InferenceConfig::default(),
    )?;
    println!(
        "endpoint mastery within ±{} in {:.1}% of {} replications",
        cfg.tolerance,
        100.0 * report.hit_rate(),
        replications
    );
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run {
            config,
            seeds,
            out,
            teachers,
        } => run(&config, seeds, &out, &teachers),
        Command::Compare { config, seeds, out } => compare(&config, seeds, out.as_deref()),
        Command::Eval { trace } => eval(&trace),
        Command::Recovery {
            replications,
            observations,
            lambda,
        } => recovery(replications, observations, lambda),
        Command::Serve { addr, action_timeout } => {
            let options = ServerOptions {
                action_timeout: Duration::from_secs(action_timeout),
                ..ServerOptions::default()
            };
            tokio::runtime::Runtime::new()?.block_on(coach_server::serve(addr, options))?;
            Ok(())
        }
    }
}
