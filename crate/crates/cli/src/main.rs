//! `eegrec` command line: end-to-end runs, sweeps, similarity profiling and
//! synthetic data generation.
//!
//! Exit status: 0 success, 2 configuration error, 3 data error, 4 numeric divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eegrec::data::{self, SynthSpec};
use eegrec::pipeline::{self, DataSource, ExperimentConfig, Sweep};
use eegrec::{Error, ErrorKind, NormalizationMethod, Result};

#[derive(Parser)]
#[command(
    name = "eegrec",
    version,
    about = "Autoencoder + boosted-tree EEG intent recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate once, or run a sweep when one is configured.
    Run(CommonArgs),
    /// Inter-class and inter-person correlation analysis with hypothesis checks.
    Similarity(CommonArgs),
    /// Write a synthetic dataset as CSV.
    Generate {
        /// Preset name (`motor-imagery`, `case-study`) or a JSON spec file.
        #[arg(long, default_value = "motor-imagery")]
        synth: String,
        /// Destination CSV.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepAxis {
    Norm,
    Fraction,
    Hidden,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset with header ch_0..ch_{d-1},label,subject.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Synthetic data: preset name or JSON spec file (default: motor-imagery).
    #[arg(long, num_args = 0..=1, default_missing_value = "motor-imagery")]
    synth: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_normalization)]
    normalization: Option<NormalizationMethod>,
    /// Autoencoder hidden width.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Boosting rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Sweep axis with its default value list.
    #[arg(long, value_enum)]
    sweep: Option<SweepAxis>,
}

fn parse_normalization(s: &str) -> std::result::Result<NormalizationMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn synth_spec(arg: &str) -> Result<SynthSpec> {
    match arg {
        "motor-imagery" => Ok(SynthSpec::motor_imagery()),
        "case-study" => Ok(SynthSpec::case_study()),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read synth spec {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{path}: {e}")))
        }
    }
}

fn build_config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let source = match (&args.data, &args.synth) {
        (Some(path), None) => Some(DataSource::Csv(pipeline::CsvSource {
            path: path.clone(),
            num_classes: None,
            num_subjects: None,
        })),
        (None, Some(name)) => Some(DataSource::Synth(synth_spec(name)?)),
        _ => None,
    };
    let mut cfg = match (&args.config, source) {
        (Some(path), source) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(source) = source {
                cfg.data = source;
            }
            cfg
        }
        (None, Some(source)) => ExperimentConfig::new(source),
        (None, None) => {
            return Err(Error::Config(
                "one of --config, --data or --synth is required".into(),
            ));
        }
    };
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(m) = args.normalization {
        cfg.normalization = m;
    }
    if let Some(h) = args.hidden {
        cfg.autoencoder.hidden_dim = h;
    }
    if let Some(f) = args.train_fraction {
        cfg.train_fraction = f;
    }
    if let Some(r) = args.rounds {
        cfg.boost.num_rounds = r;
    }
    if let Some(axis) = args.sweep {
        cfg.sweep = Some(match axis {
            SweepAxis::Norm => Sweep::Normalization,
            SweepAxis::Fraction => Sweep::TrainFraction(pipeline::DEFAULT_TRAIN_FRACTIONS.to_vec()),
            SweepAxis::Hidden => Sweep::HiddenSize(pipeline::default_hidden_sizes()),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &CommonArgs) -> Result<()> {
    let cfg = build_config(args)?;
    if cfg.sweep.is_some() {
        let summary = pipeline::run_sweep(&cfg)?;
        for p in &summary.points {
            let err = p.test_error.map_or("failed".to_string(), |e| format!("{e:.4}"));
            println!(
                "{}={}: test_error {err} ({} failures)",
                summary.axis, p.axis_value, p.failures
            );
        }
        println!("wrote {}", cfg.output_dir.join("sweep_summary.csv").display());
    } else {
        let report = pipeline::run_pipeline(&cfg)?;
        let ev = &report.evaluation;
        println!(
            "accuracy {:.4} (test_error {:.4}, majority baseline {:.4}, macro AUC {})",
            ev.accuracy,
            ev.test_error,
            report.baseline.majority_accuracy,
            ev.macro_average
                .auc
                .map_or("n/a".to_string(), |a| format!("{a:.4}"))
        );
        println!("wrote {}", cfg.output_dir.join("report.json").display());
    }
    Ok(())
}

fn similarity(args: &CommonArgs) -> Result<()> {
    let cfg = build_config(args)?;
    let out = pipeline::run_similarity(&cfg)?;
    let h1 = &out.hypotheses.self_above_cross;
    println!(
        "self-similarity above cross-similarity: {} (inter-class {}, inter-person {})",
        h1.holds,
        h1.inter_class_holds,
        h1.inter_person_holds
            .map_or("not applicable".to_string(), |h| h.to_string())
    );
    for f in &h1.failing {
        println!("  fails: {f}");
    }
    println!(
        "wrote {}",
        cfg.output_dir.join("similarity_report.json").display()
    );
    Ok(())
}

fn generate(synth: &str, out: &std::path::Path, seed: Option<u64>) -> Result<()> {
    let mut spec = synth_spec(synth)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let ds = data::synth_generate(&spec)?;
    data::save_csv(&ds, out)?;
    println!("wrote {} samples to {}", ds.len(), out.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Similarity(args) => similarity(args),
        Command::Generate { synth, out, seed } => generate(synth, out, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
