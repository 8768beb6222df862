use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ccevo::config::RunConfig;
use ccevo::engine::{StepSummary, Stepper};
use ccevo::halting::{evolve_rules, EvolutionMode};
use ccevo::io::{write_frame, write_json, write_jsonl, PatternFile};
use ccevo::metrics::{compute_metrics, CSV_HEADER};
use ccevo::pattern::{evolve_patterns, PatternFitness};
use ccevo::rules::resolve_rule;
use ccevo::{preset_names, seed, Backend, Error, Grid, Result};

/// Continuous cellular automata: simulation, rule evolution, glider search.
#[derive(Debug, Parser)]
#[command(name = "ccevo", version)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Convolution backend: fft, direct or auto.
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Increase diagnostic verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a rule from random noise or a pattern file.
    Simulate(SimulateArgs),
    /// Evolve Glaberish rule parameters.
    EvolveCa(EvolveCaArgs),
    /// Evolve CPPN patterns for motility under a fixed rule.
    EvolvePattern(EvolvePatternArgs),
    /// Fertility and mortality ratios of a rule.
    Metrics(MetricsArgs),
    /// Simulate a pattern file and write PGM frames.
    Render(RenderArgs),
    /// List the shipped rule presets.
    Presets,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Preset name or rule file.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    /// Pattern file to place at the grid center.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Write PGM frames.
    #[arg(long)]
    frames: bool,
    #[arg(long)]
    frame_every: Option<usize>,
}

#[derive(Debug, Args)]
struct EvolveCaArgs {
    /// simple, predictor or random.
    #[arg(long)]
    mode: Option<EvolutionMode>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// Soups per fitness evaluation.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct EvolvePatternArgs {
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// Simulation steps per evaluation.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    grids: Option<usize>,
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Pattern file to render.
    pattern: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    /// Square canvas side; the pattern's own size when unset.
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    frame_every: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out, cli.out.clone());
    if cli.backend.is_some() {
        cfg.backend = cli.backend;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    match &cli.command {
        Command::Simulate(a) => {
            set(&mut cfg.rule, a.rule.clone());
            let s = &mut cfg.simulate;
            set(&mut s.steps, a.steps);
            set(&mut s.side, a.side);
            set(&mut s.patch, a.patch);
            if a.init.is_some() {
                s.init = a.init.clone();
            }
            s.frames |= a.frames;
            set(&mut s.frame_every, a.frame_every);
        }
        Command::EvolveCa(a) => {
            let e = &mut cfg.evolve_ca;
            set(&mut e.mode, a.mode);
            set(&mut e.generations, a.generations);
            if a.population.is_some() {
                e.population = a.population;
            }
            set(&mut e.halting.count, a.count);
            set(&mut e.halting.horizon, a.horizon);
        }
        Command::EvolvePattern(a) => {
            set(&mut cfg.rule, a.rule.clone());
            let e = &mut cfg.evolve_pattern;
            set(&mut e.generations, a.generations);
            set(&mut e.population, a.population);
            set(&mut e.pattern.steps, a.steps);
        }
        Command::Metrics(a) => {
            set(&mut cfg.rule, a.rule.clone());
            let m = &mut cfg.metrics;
            set(&mut m.grids, a.grids);
            set(&mut m.side, a.side);
            set(&mut m.window, a.window);
        }
        Command::Render(a) => {
            let r = &mut cfg.render;
            if a.pattern.is_some() {
                r.pattern = a.pattern.clone();
            }
            set(&mut r.steps, a.steps);
            if a.side.is_some() {
                r.side = a.side;
            }
            set(&mut r.frame_every, a.frame_every);
        }
        Command::Presets => {}
    }
    cfg.apply_backend();
    cfg.validate()?;
    Ok(cfg)
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    rule: &'a str,
    seed: u64,
    steps: usize,
    height: usize,
    width: usize,
    initial: StepSummary,
    summaries: Vec<StepSummary>,
}

/// Steps `grid` under `stepper`, writing frames when `frames_dir` is set.
fn simulate_grid(
    stepper: &mut Stepper,
    grid: &mut Grid,
    steps: usize,
    frames_dir: Option<&Path>,
    every: usize,
) -> Result<Vec<StepSummary>> {
    if let Some(dir) = frames_dir {
        create_out(dir)?;
        write_frame(dir, 0, grid)?;
    }
    let mut summaries = Vec::with_capacity(steps);
    for t in 1..=steps {
        stepper.step_in_place(grid);
        summaries.push(StepSummary {
            mean: grid.mean(),
            max: grid.max(),
        });
        if let Some(dir) = frames_dir {
            if t % every == 0 {
                write_frame(dir, t / every, grid)?;
            }
        }
    }
    Ok(summaries)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let s = &cfg.simulate;
    let rule = resolve_rule(&cfg.rule)?;
    let mut grid = match &s.init {
        Some(path) => {
            let pattern = PatternFile::load(path)?;
            let mut g = Grid::zeros(s.side, s.side)?;
            g.place_centered(&pattern.cells, pattern.height, pattern.width)?;
            g
        }
        None => Grid::random_patch(
            s.side,
            s.side,
            s.patch,
            &mut seed::stream(cfg.seed, "simulate-init", &[]),
        )?,
    };
    let backend = cfg.backend_or(Backend::Auto);
    let mut stepper = Stepper::new(&rule, s.side, s.side, backend)?;
    create_out(&cfg.out)?;
    let initial = StepSummary {
        mean: grid.mean(),
        max: grid.max(),
    };
    let frames_dir = s.frames.then(|| cfg.out.join("frames"));
    let summaries = simulate_grid(
        &mut stepper,
        &mut grid,
        s.steps,
        frames_dir.as_deref(),
        s.frame_every,
    )?;
    write_json(
        &cfg.out.join("summary.json"),
        &SimulateSummary {
            rule: &rule.name,
            seed: cfg.seed,
            steps: s.steps,
            height: s.side,
            width: s.side,
            initial,
            summaries,
        },
    )?;
    PatternFile::new("final", &rule, &grid).save(&cfg.out.join("final.json"))?;
    println!("wrote {}", cfg.out.display());
    Ok(())
}

#[derive(Serialize)]
struct RuleResult {
    best_fitness: f64,
    /// (genesis mu, genesis sigma, persistence mu, persistence sigma)
    best_parameters: [f64; 4],
    evaluations: usize,
    seed: u64,
}

fn cmd_evolve_ca(cfg: &RunConfig) -> Result<()> {
    let out = evolve_rules(&cfg.evolve_ca, cfg.seed)?;
    create_out(&cfg.out)?;
    write_jsonl(&cfg.out.join("history.jsonl"), &out.history)?;
    out.best_rule.save(&cfg.out.join("best_rule.json"))?;
    write_json(
        &cfg.out.join("result.json"),
        &RuleResult {
            best_fitness: out.best_fitness,
            best_parameters: out.best_genome.squash(),
            evaluations: out.evaluations,
            seed: cfg.seed,
        },
    )?;
    println!(
        "best fitness {:.6}; wrote {}",
        out.best_fitness,
        cfg.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PatternResult {
    rule: String,
    fitness: PatternFitness,
    evaluations: usize,
    seed: u64,
}

fn cmd_evolve_pattern(cfg: &RunConfig) -> Result<()> {
    let rule = resolve_rule(&cfg.rule)?;
    let out = evolve_patterns(&rule, &cfg.evolve_pattern, cfg.seed)?;
    create_out(&cfg.out)?;
    write_jsonl(&cfg.out.join("history.jsonl"), &out.history)?;
    write_json(&cfg.out.join("best_genome.json"), &out.best_genome)?;
    let tile = Grid::from_cells(
        out.best_tile.side,
        out.best_tile.side,
        out.best_tile.values.clone(),
    )?;
    PatternFile::new(format!("evolved-{}-{}", rule.name, cfg.seed), &rule, &tile)
        .save(&cfg.out.join("best_pattern.json"))?;
    write_json(
        &cfg.out.join("result.json"),
        &PatternResult {
            rule: rule.name.clone(),
            fitness: out.best_fitness,
            evaluations: out.evaluations,
            seed: cfg.seed,
        },
    )?;
    println!(
        "best fitness {:.4} (motility {:.3}, survived {}); wrote {}",
        out.best_fitness.total,
        out.best_fitness.motility,
        out.best_fitness.survived,
        cfg.out.display()
    );
    Ok(())
}

fn cmd_metrics(cfg: &RunConfig) -> Result<()> {
    let rule = resolve_rule(&cfg.rule)?;
    let report = compute_metrics(&rule, &cfg.metrics, cfg.seed)?;
    create_out(&cfg.out)?;
    write_json(&cfg.out.join("metrics.json"), &report)?;
    write_text(
        &cfg.out.join("metrics.csv"),
        &format!("{CSV_HEADER}\n{}\n", report.csv_row()),
    )?;
    println!("{CSV_HEADER}\n{}", report.csv_row());
    Ok(())
}

fn cmd_render(cfg: &RunConfig) -> Result<()> {
    let r = &cfg.render;
    let path = r
        .pattern
        .as_ref()
        .ok_or_else(|| Error::Usage("render needs a pattern file".into()))?;
    let pattern = PatternFile::load(path)?;
    let rule = pattern.rule.resolve()?;
    let (h, w) = match r.side {
        Some(side) => (side, side),
        None => (pattern.height, pattern.width),
    };
    let mut grid = Grid::zeros(h, w)?;
    grid.place_centered(&pattern.cells, pattern.height, pattern.width)?;
    let mut stepper = Stepper::new(&rule, h, w, cfg.backend_or(Backend::Auto))?;
    let dir = cfg.out.join("frames");
    simulate_grid(&mut stepper, &mut grid, r.steps, Some(&dir), r.frame_every)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
    }
    match cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::EvolveCa(_) => cmd_evolve_ca(&cfg),
        Command::EvolvePattern(_) => cmd_evolve_pattern(&cfg),
        Command::Metrics(_) => cmd_metrics(&cfg),
        Command::Render(_) => cmd_render(&cfg),
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
