use clap::{Args, Parser, Subcommand};
use fairrec::dataset::synthetic::{generate, write_dataset, SyntheticParams};
use fairrec::dataset::{
    dataset_stats, load_dataset, select_cohort, split_chronological, stats_table, CohortParams, DataError, SplitFractions,
};
use fairrec::gateway::{cache_gc, BiasConfig};
use fairrec::harness::{emit_report, run_experiment, sweep_scope, BackendConfig, ExperimentConfig, HarnessError, ReportFormat};
use fairrec::profiler::{Strategy, SWEEP_SCOPES};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "fairrec", version, about = "Consumer-fairness audits for prompt-based recommenders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset directory and report skipped lines.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        /// Write `skips.jsonl` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dataset statistics.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
    /// Draw the stratified cohort and print its allocation.
    Cohort {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 150)]
        cohort_size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Minimum train history per user.
        #[arg(long, default_value_t = 10)]
        min_train: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment.
    Run(RunArgs),
    /// Run over several profile sizes and write heatmap grids.
    Sweep(RunArgs),
    /// Rebuild report files from a finished run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
    /// Delete cached responses older than the given age.
    CacheGc {
        #[arg(long)]
        cache_dir: PathBuf,
        #[arg(long, default_value_t = 30)]
        max_age_days: u64,
    },
    /// Write a seeded synthetic corpus in MovieLens-1M format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 600)]
        users: u32,
        #[arg(long, default_value_t = 900)]
        items: u32,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cohort_size: Option<usize>,
    /// Comma-separated: random, top-rated, recent.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<Strategy>>,
    /// Comma-separated profile sizes.
    #[arg(long, value_delimiter = ',')]
    scopes: Option<Vec<usize>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = ["live", "mock"])]
    backend: Option<String>,
    /// Mock bias strength in [0, 1].
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write `report/` in this format.
    #[arg(long)]
    format: Option<ReportFormat>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.data {
            c.data_dir = v.clone();
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.cohort_size {
            c.cohort_size = v;
        }
        if let Some(v) = &self.strategies {
            c.strategies = v.clone();
        }
        if let Some(v) = &self.scopes {
            c.scopes = v.clone();
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.threshold {
            c.resolver_threshold = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        match self.backend.as_deref() {
            Some("live") => {
                if self.bias.is_some() {
                    return Err(HarnessError::Config("--bias applies to the mock backend only".into()));
                }
                if !matches!(c.backend, BackendConfig::Live { .. }) {
                    c.backend = BackendConfig::Live { cache_dir: None, requests_per_minute: 60 };
                }
            }
            Some("mock") if !matches!(c.backend, BackendConfig::Mock(_)) => {
                c.backend = BackendConfig::Mock(BiasConfig::default());
            }
            _ => {}
        }
        if let Some(p) = self.bias {
            match &mut c.backend {
                BackendConfig::Mock(b) => b.bias_strength = p,
                BackendConfig::Live { .. } => {
                    return Err(HarnessError::Config("--bias applies to the mock backend only".into()))
                }
            }
        }
        Ok(c)
    }
}

fn data_error(e: DataError) -> HarnessError {
    HarnessError::Data { stage: fairrec::harness::Stage::Ingest, source: e }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Ingest { data, out } => {
            let d = load_dataset(&data).map_err(data_error)?;
            println!(
                "{} movies, {} users, {} ratings, {} skipped lines",
                d.catalog.len(),
                d.users.len(),
                d.interactions.len(),
                d.skips.len()
            );
            if let Some(out) = out {
                std::fs::create_dir_all(&out).map_err(|e| HarnessError::Config(format!("{}: {e}", out.display())))?;
                let path = out.join("skips.jsonl");
                std::fs::write(&path, d.skips.to_jsonl()).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
        }
        Command::Stats { data, format } => {
            let d = load_dataset(&data).map_err(data_error)?;
            let s = dataset_stats(&d.catalog, &d.interactions).map_err(data_error)?;
            match format {
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&s).expect("stats serialize")),
                _ => print!("{}", stats_table(&[(&data.display().to_string(), &s)])),
            }
        }
        Command::Cohort { data, cohort_size, seed, min_train, out } => {
            let d = load_dataset(&data).map_err(data_error)?;
            let split = split_chronological(&d.interactions, SplitFractions::default()).map_err(data_error)?;
            let params = CohortParams { cohort_size, seed, min_train, ..Default::default() };
            let cohort = select_cohort(&d.users, &split, &params).map_err(data_error)?;
            println!("{:<8}{:<8}{:>10}{:>8}{:>10}", "gender", "age", "eligible", "target", "selected");
            for c in &cohort.cells {
                println!("{:<8}{:<8}{:>10}{:>8}{:>10}", c.gender.label(), c.age.label(), c.eligible, c.target, c.selected);
            }
            println!("{} of {} eligible users selected", cohort.user_ids.len(), cohort.eligible);
            if let Some(out) = out {
                std::fs::create_dir_all(&out).map_err(|e| HarnessError::Config(format!("{}: {e}", out.display())))?;
                let body = serde_json::to_string_pretty(&cohort).expect("cohort serializes");
                let path = out.join("cohort.json");
                std::fs::write(&path, body).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            }
        }
        Command::Run(args) => {
            let a = run_experiment(&args.config()?)?;
            println!("{} prompts, {} pair results", a.prompts.len(), a.pairs.len());
            finish(&a.dir, args.format)?;
        }
        Command::Sweep(args) => {
            let c = args.config()?;
            let ns = args.scopes.clone().unwrap_or_else(|| SWEEP_SCOPES.to_vec());
            let a = sweep_scope(&c, &ns)?;
            println!("{} prompts over scopes {:?}", a.prompts.len(), a.config.scopes);
            finish(&a.dir, args.format)?;
        }
        Command::Report { run, format } => {
            for p in emit_report(&run, format)? {
                println!("{}", p.display());
            }
        }
        Command::CacheGc { cache_dir, max_age_days } => {
            let n = cache_gc(&cache_dir, Duration::from_secs(max_age_days * 86_400));
            println!("removed {n} cached responses");
        }
        Command::Synth { out, users, items, seed } => {
            let d = generate(&SyntheticParams { n_users: users, n_items: items, seed, ..Default::default() });
            write_dataset(&d, &out).map_err(|e| HarnessError::Config(format!("{}: {e}", out.display())))?;
            println!("wrote {} users, {} movies, {} ratings to {}", d.users.len(), d.catalog.len(), d.interactions.len(), out.display());
        }
    }
    Ok(())
}

fn finish(dir: &std::path::Path, format: Option<ReportFormat>) -> Result<(), HarnessError> {
    println!("{}", dir.display());
    if let Some(f) = format {
        for p in emit_report(dir, f)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
