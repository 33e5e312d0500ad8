use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use findr::config::RunConfig;
use findr::demo::{write_demo, DemoSpec};
use findr::evaluation::alpha_grid;
use findr::inference::IngestionMode;
use findr::pipeline::{self, Session};
use findr::{FindrError, Result};
use serde_json::{json, Value};

/// Vocabulary-free fine-grained image recognition.
#[derive(Parser)]
#[command(name = "findr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run directory holding every artifact of this run.
    #[arg(long)]
    run: PathBuf,
    /// Configuration file. Defaults to the run directory's config.lock.json.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract meta information and name every discovery image.
    Discover {
        #[command(flatten)]
        run: RunArgs,
        /// Discovery manifest (JSONL).
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        context_size: Option<usize>,
        /// Seed for choosing the context images.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score candidate names against the discovery images and keep the best.
    Refine {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        images: PathBuf,
    },
    /// Pseudo-label the discovery images and build the coupled classifier.
    Build {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        images: PathBuf,
    },
    /// Classify a test manifest.
    Classify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        images: PathBuf,
        /// Skip unreadable images instead of aborting.
        #[arg(long)]
        lenient: bool,
    },
    /// Score predictions against the labels in a manifest.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Manifest carrying ground-truth labels.
        #[arg(long, alias = "images")]
        labels: PathBuf,
    },
    /// Ablation sweeps.
    Ablate {
        #[command(subcommand)]
        kind: Ablation,
    },
    /// Write a synthetic corpus with a recorded chat session and config.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 3)]
        disc_per_class: usize,
        #[arg(long, default_value_t = 10)]
        test_per_class: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
}

#[derive(Subcommand)]
enum Ablation {
    /// Re-couple at each alpha of a grid and evaluate.
    Alpha {
        #[command(flatten)]
        run: RunArgs,
        /// Labelled test manifest.
        #[arg(long)]
        images: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Corrupt the vocabulary at increasing fractions and evaluate.
    Robustness {
        #[command(flatten)]
        run: RunArgs,
        /// Discovery manifest.
        #[arg(long)]
        disc: PathBuf,
        /// Labelled test manifest.
        #[arg(long)]
        images: PathBuf,
    },
}

fn session(args: &RunArgs, adjust: impl FnOnce(&mut RunConfig)) -> Result<Session> {
    Session::open(&args.run, args.config.as_deref(), adjust)
}

fn demo(out: &Path, spec: DemoSpec) -> Result<Value> {
    let corpus = write_demo(&spec, out)?;
    Ok(json!({
        "command": "demo",
        "classes": spec.classes.len(),
        "config": corpus.config_path,
        "disc": corpus.disc_manifest,
        "test": corpus.test_manifest,
    }))
}

fn run(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::Discover { run, images, context_size, seed } => {
            let s = session(&run, |c| {
                if let Some(n) = context_size {
                    c.context_size = n;
                }
                if let Some(seed) = seed {
                    c.seeds.context_seed = seed;
                }
            })?;
            pipeline::discover(&s, &images)
        }
        Command::Refine { run, images } => pipeline::refine_stage(&session(&run, |_| {})?, &images),
        Command::Build { run, images } => pipeline::build(&session(&run, |_| {})?, &images),
        Command::Classify { run, images, lenient } => {
            let mode = lenient.then_some(IngestionMode::Lenient);
            pipeline::classify(&session(&run, |_| {})?, &images, mode)
        }
        Command::Evaluate { run, labels } => pipeline::evaluate_stage(&session(&run, |_| {})?, &labels),
        Command::Ablate { kind: Ablation::Alpha { run, images, from, to, step } } => {
            let grid = alpha_grid(from, to, step)?;
            pipeline::ablate_alpha(&session(&run, |_| {})?, &images, &grid)
        }
        Command::Ablate { kind: Ablation::Robustness { run, disc, images } } => {
            pipeline::ablate_robustness(&session(&run, |_| {})?, &disc, &images)
        }
        Command::Demo { out, classes, disc_per_class, test_per_class, noise } => {
            if classes == 0 || disc_per_class == 0 {
                return Err(FindrError::Config("demo needs at least one class and one discovery image".into()));
            }
            let mut spec = DemoSpec::flowers(classes);
            spec.disc_per_class = disc_per_class;
            spec.test_per_class = test_per_class;
            spec.noise = noise;
            demo(&out, spec)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
