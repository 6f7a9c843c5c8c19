use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use retcap_pipeline::ablation::{run_ablation, Axis};
use retcap_pipeline::evaluate::run_evaluate;
use retcap_pipeline::run::{run_caption, run_index, run_prefix_baseline, CaptionRun, RESULTS_FILE};
use retcap_pipeline::{DatasetManifest, Error, Result, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "retcap", version, about = "Zero-shot video captioning with retrieval-guided soft prompts")]
struct Cli {
    /// TOML run configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ManifestArgs {
    /// JSONL manifest, or MSR-VTT style annotation JSON together with --frames-root.
    #[arg(long)]
    manifest: PathBuf,
    /// Frame directories / blobs for MSR-VTT annotations.
    #[arg(long)]
    frames_root: Option<PathBuf>,
    /// Keep only this split of MSR-VTT annotations.
    #[arg(long)]
    split: Option<String>,
}

impl ManifestArgs {
    fn load(&self) -> Result<DatasetManifest> {
        match &self.frames_root {
            Some(root) => DatasetManifest::load_msrvtt(&self.manifest, root, self.split.as_deref()),
            None => DatasetManifest::load_jsonl(&self.manifest),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embed a corpus file and save the index into --out.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Corpus id stored with the index (default: file stem).
        #[arg(long)]
        id: Option<String>,
    },
    /// Caption every video of a manifest.
    Caption {
        #[command(flatten)]
        data: ManifestArgs,
    },
    /// Score a results file against the manifest's references.
    Evaluate {
        #[command(flatten)]
        data: ManifestArgs,
        /// Defaults to <out>/results.json.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Sweep one axis and tabulate/plot the metrics.
    Ablate {
        #[command(flatten)]
        data: ManifestArgs,
        /// K, L, P, corpus, losses, clip_threshold or reanchor.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Caption with retrieved sentences as a textual prefix and no retrieval losses.
    PrefixBaseline {
        #[command(flatten)]
        data: ManifestArgs,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_run(run: &CaptionRun, out: &Path) {
    for r in &run.records {
        println!("{}\t{}", r.video_id, r.best_caption);
    }
    for f in &run.failures {
        eprintln!("{}\tFAILED: {}", f.video_id, f.error);
    }
    println!("fingerprint={} results={}", run.fingerprint, out.join(RESULTS_FILE).display());
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Index { corpus, id } => {
            let id = id.clone().unwrap_or_else(|| {
                corpus.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned())
            });
            let dir = run_index(&cfg, corpus, &id, &cfg.out_dir)?;
            println!("index={}", dir.display());
        }
        Command::Caption { data } => {
            let run = run_caption(&cfg, &data.load()?)?;
            print_run(&run, &cfg.out_dir);
        }
        Command::PrefixBaseline { data } => {
            let run = run_prefix_baseline(&cfg, &data.load()?)?;
            print_run(&run, &cfg.out_dir);
        }
        Command::Evaluate { data, results } => {
            let path = results.clone().unwrap_or_else(|| cfg.out_dir.join(RESULTS_FILE));
            let run = CaptionRun::load(&path)?;
            let report = run_evaluate(&run, &data.load()?, &cfg.out_dir)?;
            print!("{}", report.table());
        }
        Command::Ablate { data, axis, values } => {
            let axis: Axis = axis.parse()?;
            let report = run_ablation(&cfg, &data.load()?, axis, values)?;
            print!("{}", report.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
