use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use pickcell::calibration::{corpus_mean, default_corpus_path, read_corpus};
use pickcell::config::{self, load_score_table, LoadedConfig};
use pickcell::log::RunLog;
use pickcell::longrun::run_longrun;
use pickcell::orchestrator::run_task;
use pickcell::scoring::{compute_metrics, score_run, MetricsReport, ScoreTable};
use pickcell::world::WorldState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TaskKind {
    Stow,
    Pick,
    Finals,
    Longrun,
    /// Evaluate the perception calibration corpus.
    Perception,
}

/// Deterministic pick-and-place work-cell simulator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Task to simulate.
    #[arg(long, value_enum, required_unless_present = "validate")]
    task: Option<TaskKind>,
    /// Base seed; run `i` of a batch uses `seed + i`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of independent runs.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    batch: u64,
    /// Config file; defaults to the one shipped with the crate.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Score table overriding the one named in the config.
    #[arg(long)]
    score_table: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Leave the timestamp header out of event logs.
    #[arg(long)]
    no_timestamp: bool,
    /// Simulated hours for the long-run task.
    #[arg(long)]
    sim_hours: Option<f64>,
    /// Check a config file and print its diagnostics instead of running.
    #[arg(long, value_name = "PATH", conflicts_with = "task")]
    validate: Option<PathBuf>,
}

struct RunArtifacts {
    log: RunLog,
    metrics: MetricsReport,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(path) = &cli.validate {
        let problems = config::validate_config(path).with_context(|| format!("reading {}", path.display()))?;
        for p in &problems {
            println!("{p}");
        }
        return Ok(if problems.is_empty() {
            println!("{}: ok", path.display());
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        });
    }
    let config_path = cli.config.clone().unwrap_or_else(config::default_config_path);
    let mut loaded = config::load(&config_path)?;
    if let Some(p) = &cli.score_table {
        loaded.score_table = load_score_table(p)?;
        let problems = loaded.score_table.validate();
        if !problems.is_empty() {
            bail!("{}: {}", p.display(), problems.join("; "));
        }
    }
    if let Some(h) = cli.sim_hours {
        if !(h > 0.0) {
            bail!("--sim-hours must be positive");
        }
        loaded.config.longrun.sim_hours = h;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let task = cli.task.expect("clap requires --task without --validate");
    if task == TaskKind::Perception {
        return perception(&loaded, &cli.out);
    }

    let runs: Vec<Result<RunArtifacts>> = (0..cli.batch)
        .into_par_iter()
        .map(|i| simulate(&loaded, task, cli.seed.wrapping_add(i)))
        .collect();
    let runs: Vec<RunArtifacts> = runs.into_iter().collect::<Result<_>>()?;
    let header = (!cli.no_timestamp).then(timestamp);
    let table = &loaded.score_table;
    if runs.len() == 1 {
        write_run(&cli.out, &runs[0], table, header.as_deref())?;
    } else {
        let width = (runs.len() - 1).to_string().len();
        for (i, run) in runs.iter().enumerate() {
            let dir = cli.out.join(format!("run_{i:0width$}"));
            fs::create_dir_all(&dir)?;
            write_run(&dir, run, table, header.as_deref())?;
        }
        let aggregate = MetricsReport::merge(runs.iter().map(|r| &r.metrics));
        write_json(&cli.out.join("metrics.json"), &aggregate)?;
    }
    let aggregate = MetricsReport::merge(runs.iter().map(|r| &r.metrics));
    print_summary(&aggregate);
    Ok(ExitCode::SUCCESS)
}

fn simulate(loaded: &LoadedConfig, task: TaskKind, seed: u64) -> Result<RunArtifacts> {
    let params = loaded.run_params();
    let log = match task {
        TaskKind::Longrun => run_longrun(&loaded.longterm_catalog, &loaded.config.longrun, &params, seed)?.log,
        TaskKind::Stow | TaskKind::Pick | TaskKind::Finals => {
            let spec = match task {
                TaskKind::Stow => loaded.stow_task(seed),
                TaskKind::Pick => loaded.pick_task(seed),
                _ => loaded.finals_task(seed),
            };
            let problems = spec.validate(&loaded.catalog);
            if !problems.is_empty() {
                bail!("task for seed {seed}: {}", problems.join("; "));
            }
            let mut world = WorldState::spawn(&spec, &loaded.catalog, &params.world, seed)?;
            run_task(&mut world, &spec, &params, seed)
        }
        TaskKind::Perception => unreachable!("handled before simulation"),
    };
    let metrics = compute_metrics(&log, &loaded.score_table);
    Ok(RunArtifacts { log, metrics })
}

fn write_run(dir: &Path, run: &RunArtifacts, table: &ScoreTable, header: Option<&str>) -> Result<()> {
    let events = dir.join("events.ndjson");
    let mut out = BufWriter::new(File::create(&events).with_context(|| format!("creating {}", events.display()))?);
    run.log.write_ndjson(&mut out, header)?;
    out.flush()?;
    write_json(&dir.join("metrics.json"), &run.metrics)?;
    let trace = score_run(&run.log, table);
    let file = File::create(dir.join("trace.csv"))?;
    trace.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("unix:{secs}")
}

fn perception(loaded: &LoadedConfig, out: &Path) -> Result<ExitCode> {
    let path = default_corpus_path();
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let scenes = read_corpus(BufReader::new(file))?;
    let params = loaded.run_params();
    let mean = corpus_mean(&scenes, &loaded.catalog, &params.world, &params.perception)?;
    write_json(
        &out.join("perception.json"),
        &serde_json::json!({ "scenes": scenes.len(), "mean_f_half": mean }),
    )?;
    println!("scenes: {}  mean F0.5: {mean:.4}", scenes.len());
    Ok(ExitCode::SUCCESS)
}

fn print_summary(m: &MetricsReport) {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"));
    println!("runs: {}", m.runs);
    println!("attempts: {}  successes: {}", m.attempts, m.successes);
    println!("grasp success rate: {}", opt(m.grasp_success_rate));
    println!("avg attempt time: {}", opt(m.avg_attempt_time));
    println!("error rate: {}", opt(m.error_rate));
    println!("score: {:.1}", m.final_score);
    println!("manual interventions: {}/{}", m.runs_with_manual_intervention, m.runs);
    if let Some([p, o, u, g]) = m.failure_histogram.cause_shares() {
        println!(
            "failure causes: grasp_pose {:.1}%  perception {:.1}%  occlusion {:.1}%  unreachable {:.1}%",
            g * 100.0,
            p * 100.0,
            o * 100.0,
            u * 100.0
        );
    }
}
