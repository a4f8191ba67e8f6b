use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use veridict::error::Error;
use veridict::pipeline::{
    cmd_build, cmd_evaluate, cmd_explain, cmd_extract, cmd_run, cmd_select, cmd_train,
    load_config, PipelineConfig,
};

#[derive(Parser)]
#[command(name = "veridict", version, about = "Multimodal deception classification pipeline")]
struct Cli {
    /// Pipeline configuration (flat JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every artifact is a pure function of it
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (also VERIDICT_THREADS); results identical for any N
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract audio feature CSVs from the WAVs in a manifest
    Extract { manifest: PathBuf },
    /// Fuse manifest modalities into a dataset directory
    Build { manifest: PathBuf },
    /// Fit the correlation/KDE feature-selection mask on a dataset
    Select { dataset: PathBuf },
    /// Train one model on a 70/10/20 split of a dataset
    Train {
        dataset: PathBuf,
        /// logreg | random_forest | conv1d
        #[arg(long)]
        model: String,
    },
    /// Score a saved model over a dataset
    Evaluate {
        dataset: PathBuf,
        #[arg(long)]
        model_file: PathBuf,
    },
    /// Full pipeline: balance, select, k-fold model comparison, reports
    Run {
        /// Dataset directory or manifest JSON (defaults to config paths)
        input: Option<PathBuf>,
        /// Comma-separated families: logreg,random_forest,conv1d,gcn
        #[arg(long)]
        models: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// Zero the annotation span before training (ablation)
        #[arg(long)]
        no_annotations: bool,
        /// Enable feature selection
        #[arg(long, overrides_with = "no_select")]
        select: bool,
        /// Disable feature selection
        #[arg(long)]
        no_select: bool,
    },
    /// Emit a local explanation for one sample id
    Explain {
        dataset: PathBuf,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        id: String,
    },
}

/// Exit codes: 0 success, 1 config/usage, 2 input data, 3 runtime.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Io { .. } | Error::Format { .. } | Error::Validation(_) => 2,
        _ => 3,
    }
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    } else if let Ok(env) = std::env::var("VERIDICT_THREADS") {
        config.threads = env
            .parse()
            .map_err(|_| Error::config(format!("VERIDICT_THREADS: bad value '{env}'")))?;
    }
    if let Command::Run {
        models,
        k,
        no_annotations,
        select,
        no_select,
        ..
    } = &cli.command
    {
        if let Some(models) = models {
            config.models = models.split(',').map(|s| s.trim().to_string()).collect();
        }
        if let Some(k) = k {
            config.k = *k;
        }
        if *no_annotations {
            config.no_annotations = true;
        }
        if *select {
            config.select = true;
        }
        if *no_select {
            config.select = false;
        }
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = effective_config(cli)?;
    let out_dir = cli.out.clone().or_else(|| config.out_dir.clone());
    let need_out = || {
        out_dir
            .clone()
            .ok_or_else(|| Error::config("--out DIR is required for this command"))
    };

    match &cli.command {
        Command::Extract { manifest } => cmd_extract(manifest, &need_out()?),
        Command::Build { manifest } => cmd_build(manifest, &need_out()?, &config),
        Command::Select { dataset } => {
            let out = need_out()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
            let mask = cmd_select(dataset, &out.join("selection.csv"), &config)?;
            println!(
                "kept {} of {} features",
                mask.kept_indices().len(),
                mask.keep.len()
            );
            Ok(())
        }
        Command::Train { dataset, model } => {
            let path = cmd_train(dataset, model, &need_out()?, &config)?;
            println!("saved {}", path.display());
            Ok(())
        }
        Command::Evaluate { dataset, model_file } => {
            print!("{}", cmd_evaluate(dataset, model_file)?);
            Ok(())
        }
        Command::Run { input, .. } => {
            let report = cmd_run(&config, input.as_deref(), &need_out()?)?;
            for model in &report.models {
                println!("{}: mean {:.4} std {:.4}", model.model, model.mean, model.std);
            }
            Ok(())
        }
        Command::Explain {
            dataset,
            model_file,
            id,
        } => {
            let out_path = out_dir.as_ref().map(|d| d.join(format!("{id}.explanation.json")));
            if let Some(dir) = out_dir.as_ref() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
            }
            let json = cmd_explain(model_file, dataset, id, config.seed, out_path.as_deref())?;
            println!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version print and exit cleanly; usage errors exit 1
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(items) = &e {
                for item in items {
                    eprintln!("  - {item}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
