//! `pa1smt` command line: synthetic data generation, source-model
//! training, the multi-run adaptation experiment, scoring, and grids.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 solver
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use pa1smt::experiment::{self, ExperimentConfig, GridSpec};
use pa1smt::slmc::SourceModel;
use pa1smt::synth::SyntheticSpec;
use pa1smt::{io, metrics, slmc, synth, Error};

#[derive(Parser)]
#[command(name = "pa1smt", version, about = "Multi-target model-transfer clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-domain benchmark from a spec file.
    Synth {
        /// JSON file holding a synthetic data spec.
        #[arg(long)]
        spec: PathBuf,
        /// Directory for source/target CSVs and label files.
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Train the source model on a labeled dataset.
    TrainSource {
        /// Source samples: CSV with a final label column, unless
        /// --labels is given.
        #[arg(long)]
        data: PathBuf,
        /// Separate single-column label file.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Clustering-term weight lambda.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Output path for the model JSON.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the multi-run adaptation experiment described by a config file.
    Fit(FitArgs),
    /// Score a predicted labeling against ground truth (NMI, Rand index).
    Eval {
        /// Predicted labels, one integer per line.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth labels, one integer per line.
        #[arg(long)]
        truth: PathBuf,
    },
    /// Sweep hyperparameter value lists over the experiment config.
    Grid {
        #[command(flatten)]
        fit: FitArgs,
        /// Comma-separated beta values.
        #[arg(long, value_delimiter = ',')]
        beta: Vec<f64>,
        /// Comma-separated gamma values.
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
        /// Comma-separated eta values.
        #[arg(long, value_delimiter = ',')]
        eta: Vec<f64>,
        /// Comma-separated dictionary sizes.
        #[arg(long, value_delimiter = ',')]
        dict_size: Vec<usize>,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Experiment config JSON; flags below override its fields.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    beta_override: Option<f64>,
    #[arg(long)]
    gamma_override: Option<f64>,
    #[arg(long)]
    eta_override: Option<f64>,
    #[arg(long)]
    dict_size_override: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl FitArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut config = ExperimentConfig::from_json_file(&self.config)?;
        if let Some(v) = self.beta_override {
            config.hyperparams.beta = v;
        }
        if let Some(v) = self.gamma_override {
            config.hyperparams.gamma = v;
        }
        if let Some(v) = self.eta_override {
            config.hyperparams.eta = v;
        }
        if let Some(v) = self.dict_size_override {
            config.hyperparams.dict_size = v;
        }
        if let Some(v) = self.runs {
            config.runs = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = &self.output_dir {
            config.output_dir = v.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

/// On-disk source model: row-major weights plus dimensions.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    feature_dim: usize,
    categories: usize,
    weights: Vec<f64>,
}

impl ModelFile {
    fn from_model(model: &SourceModel) -> Self {
        ModelFile {
            feature_dim: model.feature_dim(),
            categories: model.categories(),
            weights: model.weights().iter().copied().collect(),
        }
    }

    #[allow(dead_code)]
    fn into_model(self) -> Result<SourceModel, Error> {
        let w = Array2::from_shape_vec((self.feature_dim, self.categories), self.weights)
            .map_err(|e| Error::Data(format!("model file: {e}")))?;
        SourceModel::new(w, self.categories)
    }
}

fn cmd_synth(spec_path: &Path, output_dir: &Path) -> Result<(), Error> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    let spec: SyntheticSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    spec.validate()?;
    let data = synth::generate(&spec)?;
    std::fs::create_dir_all(output_dir)?;
    io::save_csv(&output_dir.join("source.csv"), &data.source)?;
    for (j, target) in data.targets.iter().enumerate() {
        io::save_csv(&output_dir.join(format!("target_{j}.csv")), &target.without_labels())?;
        if let Some(labels) = &target.labels {
            io::save_labels(&output_dir.join(format!("target_{j}_labels.txt")), labels)?;
        }
    }
    println!(
        "wrote source ({} samples) and {} targets to {}",
        data.source.num_samples(),
        data.targets.len(),
        output_dir.display()
    );
    Ok(())
}

fn cmd_train_source(
    data: &Path,
    labels: Option<&Path>,
    lambda: f64,
    output: &Path,
) -> Result<(), Error> {
    let mut ds = io::load_csv(data, labels.is_none())?;
    if let Some(lp) = labels {
        ds.labels = Some(io::load_labels(lp)?);
    }
    let y = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::Data("no labels provided".into()))?;
    if y.len() != ds.num_samples() {
        return Err(Error::Data(format!(
            "{} labels for {} samples",
            y.len(),
            ds.num_samples()
        )));
    }
    let categories = y.iter().max().map_or(0, |&m| m + 1);
    let model = slmc::train_source_model(ds.features.view(), y, categories, lambda)?;
    let json = serde_json::to_string_pretty(&ModelFile::from_model(&model))
        .map_err(|e| Error::Config(format!("serializing model: {e}")))?;
    std::fs::write(output, json)?;
    println!(
        "trained source model ({} features, {categories} categories) -> {}",
        model.feature_dim(),
        output.display()
    );
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<(), Error> {
    let config = args.load()?;
    let result = experiment::run_experiment(&config)?;
    for (j, (mean, std)) in result
        .summary
        .mean_nmi
        .iter()
        .zip(&result.summary.std_nmi)
        .enumerate()
    {
        match (mean, std) {
            (Some(m), Some(s)) => println!("target {j}: NMI {m:.4} +/- {s:.4}"),
            _ => println!("target {j}: no ground truth, scores unavailable"),
        }
    }
    println!("results in {}", config.output_dir.display());
    Ok(())
}

fn cmd_eval(pred: &Path, truth: &Path) -> Result<(), Error> {
    let a = io::load_labels(pred)?;
    let b = io::load_labels(truth)?;
    println!("nmi {}", metrics::nmi(&a, &b)?);
    println!("rand_index {}", metrics::rand_index(&a, &b)?);
    Ok(())
}

fn cmd_grid(args: &FitArgs, grid: GridSpec) -> Result<(), Error> {
    let config = args.load()?;
    let cells = experiment::run_grid(&config, &grid)?;
    let mut best: Option<(usize, f64)> = None;
    for cell in &cells {
        let means: Vec<f64> = cell.result.summary.mean_nmi.iter().flatten().copied().collect();
        if means.is_empty() {
            continue;
        }
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        if best.map_or(true, |(_, b)| avg > b) {
            best = Some((cell.index, avg));
        }
    }
    println!("{} grid cells evaluated", cells.len());
    if let Some((index, avg)) = best {
        let h = &cells[index].hyperparams;
        println!(
            "best cell {index}: beta {} gamma {} eta {} r {} (mean NMI {avg:.4})",
            h.beta, h.gamma, h.eta, h.dict_size
        );
    }
    println!("results in {}", config.output_dir.display());
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Data(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth { spec, output_dir } => cmd_synth(spec, output_dir),
        Command::TrainSource {
            data,
            labels,
            lambda,
            output,
        } => cmd_train_source(data, labels.as_deref(), *lambda, output),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval { pred, truth } => cmd_eval(pred, truth),
        Command::Grid {
            fit,
            beta,
            gamma,
            eta,
            dict_size,
        } => cmd_grid(
            fit,
            GridSpec {
                beta: beta.clone(),
                gamma: gamma.clone(),
                eta: eta.clone(),
                dict_size: dict_size.clone(),
            },
        ),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
