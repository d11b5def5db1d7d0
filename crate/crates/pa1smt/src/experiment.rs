//! Experiment orchestration: configuration, the multi-run protocol with
//! seeded averaging, hyperparameter grids, and result emission.
//!
//! Every run is fully determined by the config and its seed: run `i`
//! uses `seed + i`, and each target's initialization seed derives from
//! the run seed and the target's index, so identical configs produce
//! byte-identical summaries.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::adapt::{self, Hyperparams, TargetSpec};
use crate::error::{Error, Result};
use crate::io::{self, Dataset};
use crate::metrics;
use crate::preprocess::{self, KpcaRetention};
use crate::slmc::{self, SourceModel};
use crate::synth::{self, SyntheticSpec};

/// Where the experiment's data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataConfig {
    Files {
        source: SourceFileConfig,
        targets: Vec<TargetFileConfig>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceFileConfig {
    /// CSV with samples as rows and labels in the final column, or a raw
    /// matrix when `labels_path` is given.
    pub path: PathBuf,
    /// Separate single-column label file (required for raw matrices).
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetFileConfig {
    pub path: PathBuf,
    /// Cluster count C_T for this domain.
    pub categories: usize,
    /// Optional ground truth, used only for scoring.
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
}

/// Preprocessing stage options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub zscore: bool,
    /// Kernel PCA retention; `None` disables KPCA. Fitted once on the
    /// pooled source + target samples so all domains share one space.
    pub kpca: Option<KpcaRetention>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            zscore: true,
            kpca: Some(KpcaRetention::Energy(0.98)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

fn default_runs() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        self.hyperparams
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match &self.data {
            DataConfig::Files { source, targets } => {
                if targets.is_empty() {
                    return Err(Error::Config("no target domains".into()));
                }
                if !source.path.exists() {
                    return Err(Error::Config(format!(
                        "source path {} does not exist",
                        source.path.display()
                    )));
                }
                for t in targets {
                    if t.categories < 2 {
                        return Err(Error::Config(format!(
                            "target {} needs categories >= 2",
                            t.path.display()
                        )));
                    }
                    if !t.path.exists() {
                        return Err(Error::Config(format!(
                            "target path {} does not exist",
                            t.path.display()
                        )));
                    }
                    if let Some(lp) = &t.labels_path {
                        if !lp.exists() {
                            return Err(Error::Config(format!(
                                "labels path {} does not exist",
                                lp.display()
                            )));
                        }
                    }
                }
            }
            DataConfig::Synthetic(spec) => {
                spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Scores for one target in one run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TargetScore {
    pub nmi: Option<f64>,
    pub rand_index: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub targets: Vec<TargetScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub feature_dim_after_preprocess: usize,
    pub runs: Vec<RunSummary>,
    pub mean_nmi: Vec<Option<f64>>,
    pub std_nmi: Vec<Option<f64>>,
    pub mean_rand_index: Vec<Option<f64>>,
    pub std_rand_index: Vec<Option<f64>>,
}

/// In-memory result of an experiment (also written to disk by
/// [`run_experiment`]).
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summary: ExperimentSummary,
    /// Objective trace per run.
    pub traces: Vec<Vec<f64>>,
}

/// Domains after loading and preprocessing: a trained-source-ready
/// labeled source plus unlabeled target matrices with optional held-out
/// ground truth.
pub struct PreparedData {
    pub source: Dataset,
    pub target_features: Vec<Array2<f64>>,
    pub target_categories: Vec<usize>,
    pub target_truth: Vec<Option<Vec<usize>>>,
}

fn load_source(config: &SourceFileConfig) -> Result<Dataset> {
    let is_raw = config
        .path
        .extension()
        .map(|e| e == "raw" || e == "bin")
        .unwrap_or(false);
    let mut ds = if is_raw {
        Dataset {
            features: io::load_raw(&config.path)?,
            labels: None,
        }
    } else {
        io::load_csv(&config.path, config.labels_path.is_none())?
    };
    if let Some(lp) = &config.labels_path {
        ds.labels = Some(io::load_labels(lp)?);
    }
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::Data("source dataset has no labels".into()))?;
    if labels.len() != ds.num_samples() {
        return Err(Error::Data(format!(
            "{} labels for {} source samples",
            labels.len(),
            ds.num_samples()
        )));
    }
    Ok(ds)
}

fn load_target(config: &TargetFileConfig) -> Result<Dataset> {
    let is_raw = config
        .path
        .extension()
        .map(|e| e == "raw" || e == "bin")
        .unwrap_or(false);
    let mut ds = if is_raw {
        Dataset {
            features: io::load_raw(&config.path)?,
            labels: None,
        }
    } else {
        io::load_csv(&config.path, false)?
    };
    if let Some(lp) = &config.labels_path {
        let labels = io::load_labels(lp)?;
        if labels.len() != ds.num_samples() {
            return Err(Error::Data(format!(
                "{} labels for {} samples in {}",
                labels.len(),
                ds.num_samples(),
                config.path.display()
            )));
        }
        ds.labels = Some(labels);
    }
    Ok(ds)
}

/// Load or generate all domains, then z-score and project with a single
/// KPCA fitted on the pooled samples so every domain shares one feature
/// space.
pub fn prepare_data(config: &ExperimentConfig) -> Result<PreparedData> {
    let (source, targets, categories) = match &config.data {
        DataConfig::Files { source, targets } => {
            let src = load_source(source)?;
            let mut tgt = Vec::new();
            let mut cats = Vec::new();
            for t in targets {
                tgt.push(load_target(t)?);
                cats.push(t.categories);
            }
            (src, tgt, cats)
        }
        DataConfig::Synthetic(spec) => {
            let data = synth::generate(spec)?;
            let cats = spec
                .targets
                .iter()
                .map(|t| t.categories.len())
                .collect();
            (data.source, data.targets, cats)
        }
    };

    let d = source.feature_dim();
    for (j, t) in targets.iter().enumerate() {
        if t.feature_dim() != d {
            return Err(Error::Data(format!(
                "target {j} has feature dim {}, source has {d}",
                t.feature_dim()
            )));
        }
    }

    // pool columns: source first, then targets in order
    let views: Vec<ArrayView2<'_, f64>> = std::iter::once(source.features.view())
        .chain(targets.iter().map(|t| t.features.view()))
        .collect();
    let pooled = ndarray::concatenate(Axis(1), &views)
        .map_err(|e| Error::Data(format!("pooling domains: {e}")))?;

    let pooled = if config.preprocess.zscore {
        preprocess::zscore(pooled.view())?.0
    } else {
        pooled
    };
    let pooled = match config.preprocess.kpca {
        Some(retention) => {
            let model = preprocess::kpca_fit(pooled.view(), retention)?;
            model.transform(pooled.view())?
        }
        None => pooled,
    };

    let mut offset = source.num_samples();
    let source_out = Dataset {
        features: pooled.slice(ndarray::s![.., ..offset]).to_owned(),
        labels: source.labels.clone(),
    };
    let mut target_features = Vec::with_capacity(targets.len());
    let mut target_truth = Vec::with_capacity(targets.len());
    for t in &targets {
        let n = t.num_samples();
        target_features.push(pooled.slice(ndarray::s![.., offset..offset + n]).to_owned());
        target_truth.push(t.labels.clone());
        offset += n;
    }

    Ok(PreparedData {
        source: source_out,
        target_features,
        target_categories: categories,
        target_truth,
    })
}

/// Train the source model on the prepared source domain.
pub fn train_source(prepared: &PreparedData, lambda: f64) -> Result<SourceModel> {
    let labels = prepared
        .source
        .labels
        .as_ref()
        .ok_or_else(|| Error::Data("source has no labels".into()))?;
    let categories = labels.iter().max().map_or(0, |&m| m + 1);
    slmc::train_source_model(prepared.source.features.view(), labels, categories, lambda)
}

/// One solver invocation for run index `run`; targets are label-free.
pub fn fit_run(
    prepared: &PreparedData,
    source_model: &SourceModel,
    h: &Hyperparams,
    base_seed: u64,
    run: usize,
) -> Result<(adapt::FitReport, u64)> {
    let run_seed = base_seed + run as u64;
    let mut run_h = h.clone();
    run_h.seed = run_seed;
    let targets: Vec<TargetSpec> = prepared
        .target_features
        .iter()
        .zip(&prepared.target_categories)
        .enumerate()
        .map(|(j, (x, &c))| TargetSpec {
            data: x.clone(),
            categories: c,
            init_seed: Some(adapt::derive_target_seed(run_seed, j)),
        })
        .collect();
    let report = adapt::fit(source_model, &targets, &run_h)?;
    Ok((report, run_seed))
}

fn score_targets(
    report: &adapt::FitReport,
    truth: &[Option<Vec<usize>>],
) -> Result<Vec<TargetScore>> {
    report
        .assignments
        .iter()
        .zip(truth)
        .map(|(pred, truth)| match truth {
            Some(y) => Ok(TargetScore {
                nmi: Some(metrics::nmi(pred, y)?),
                rand_index: Some(metrics::rand_index(pred, y)?),
            }),
            None => Ok(TargetScore {
                nmi: None,
                rand_index: None,
            }),
        })
        .collect()
}

fn mean_std(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if present.len() != values.len() || present.is_empty() {
        return (None, None);
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Execute all runs in memory without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let prepared = prepare_data(config)?;
    let source_model = train_source(&prepared, config.hyperparams.lambda)?;
    let mut runs = Vec::with_capacity(config.runs);
    let mut traces = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let (report, run_seed) =
            fit_run(&prepared, &source_model, &config.hyperparams, config.seed, run)?;
        let targets = score_targets(&report, &prepared.target_truth)?;
        runs.push(RunSummary {
            run,
            seed: run_seed,
            final_objective: *report.trace.last().unwrap_or(&f64::NAN),
            iterations: report.iterations,
            converged: report.converged,
            targets,
        });
        traces.push(report.trace);
    }
    let num_targets = prepared.target_features.len();
    let collect = |f: &dyn Fn(&TargetScore) -> Option<f64>, j: usize| -> Vec<Option<f64>> {
        runs.iter().map(|r| f(&r.targets[j])).collect()
    };
    let mut mean_nmi = Vec::new();
    let mut std_nmi = Vec::new();
    let mut mean_ri = Vec::new();
    let mut std_ri = Vec::new();
    for j in 0..num_targets {
        let (m, s) = mean_std(&collect(&|t| t.nmi, j));
        mean_nmi.push(m);
        std_nmi.push(s);
        let (m, s) = mean_std(&collect(&|t| t.rand_index, j));
        mean_ri.push(m);
        std_ri.push(s);
    }
    Ok(ExperimentResult {
        summary: ExperimentSummary {
            config: config.clone(),
            feature_dim_after_preprocess: prepared.source.feature_dim(),
            runs,
            mean_nmi,
            std_nmi,
            mean_rand_index: mean_ri,
            std_rand_index: std_ri,
        },
        traces,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn results_csv(summary: &ExperimentSummary) -> String {
    let mut out = String::from("run,target,nmi,rand_index\n");
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
    for run in &summary.runs {
        for (j, t) in run.targets.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                run.run,
                j,
                fmt(t.nmi),
                fmt(t.rand_index)
            ));
        }
    }
    for j in 0..summary.mean_nmi.len() {
        out.push_str(&format!(
            "mean,{},{},{}\n",
            j,
            fmt(summary.mean_nmi[j]),
            fmt(summary.mean_rand_index[j])
        ));
        out.push_str(&format!(
            "std,{},{},{}\n",
            j,
            fmt(summary.std_nmi[j]),
            fmt(summary.std_rand_index[j])
        ));
    }
    out
}

fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

/// Run the experiment and write `results.csv`, `summary.json`, and
/// `trace_run_<i>.csv` into the configured output directory. Writes are
/// atomic; on failure no partial outputs remain.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let result = execute(config)?;
    fs::create_dir_all(&config.output_dir)?;
    let mut cleanup: Vec<PathBuf> = Vec::new();
    let json = serde_json::to_string_pretty(&result.summary)
        .map_err(|e| Error::Config(format!("serializing summary: {e}")))?;
    let mut write = |name: String, bytes: &[u8]| -> Result<()> {
        let path = config.output_dir.join(name);
        write_atomic(&path, bytes)?;
        cleanup.push(path);
        Ok(())
    };
    let outcome = (|| {
        write("summary.json".into(), json.as_bytes())?;
        write("results.csv".into(), results_csv(&result.summary).as_bytes())?;
        for (i, trace) in result.traces.iter().enumerate() {
            write(format!("trace_run_{i}.csv"), trace_csv(trace).as_bytes())?;
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => {
            cleanup.clear();
            Ok(result)
        }
        Err(e) => {
            for path in &cleanup {
                let _ = fs::remove_file(path);
            }
            Err(e)
        }
    }
}

/// Value lists for a hyperparameter sweep; empty lists fall back to the
/// config's value.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct GridSpec {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
    pub dict_size: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub index: usize,
    pub hyperparams: Hyperparams,
    pub result: ExperimentResult,
}

/// Evaluate the Cartesian product of the grid with shared seeds and emit
/// a long-format CSV (one row per cell per target per run).
pub fn run_grid(config: &ExperimentConfig, grid: &GridSpec) -> Result<Vec<GridCell>> {
    config.validate()?;
    let betas = or_default(&grid.beta, config.hyperparams.beta);
    let gammas = or_default(&grid.gamma, config.hyperparams.gamma);
    let etas = or_default(&grid.eta, config.hyperparams.eta);
    let sizes = or_default(&grid.dict_size, config.hyperparams.dict_size);

    let mut cells = Vec::new();
    let mut index = 0;
    for &beta in &betas {
        for &gamma in &gammas {
            for &eta in &etas {
                for &dict_size in &sizes {
                    let mut cell_config = config.clone();
                    cell_config.hyperparams.beta = beta;
                    cell_config.hyperparams.gamma = gamma;
                    cell_config.hyperparams.eta = eta;
                    cell_config.hyperparams.dict_size = dict_size;
                    cell_config.output_dir =
                        config.output_dir.join(format!("cell_{index:04}"));
                    let result = run_experiment(&cell_config)?;
                    cells.push(GridCell {
                        index,
                        hyperparams: cell_config.hyperparams,
                        result,
                    });
                    index += 1;
                }
            }
        }
    }

    let mut out = String::from("cell,beta,gamma,eta,dict_size,run,target,nmi,rand_index\n");
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
    for cell in &cells {
        let h = &cell.hyperparams;
        for run in &cell.result.summary.runs {
            for (j, t) in run.targets.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    cell.index,
                    h.beta,
                    h.gamma,
                    h.eta,
                    h.dict_size,
                    run.run,
                    j,
                    fmt(t.nmi),
                    fmt(t.rand_index)
                ));
            }
        }
    }
    fs::create_dir_all(&config.output_dir)?;
    write_atomic(&config.output_dir.join("grid_results.csv"), out.as_bytes())?;
    Ok(cells)
}

fn or_default<T: Copy>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ShiftSpec, SyntheticSpec, SyntheticTarget};

    fn small_spec(num_targets: usize) -> SyntheticSpec {
        SyntheticSpec {
            dim: 6,
            source_categories: 4,
            source_samples_per_category: 20,
            source_noise_std: 1.0,
            targets: (0..num_targets)
                .map(|j| SyntheticTarget {
                    categories: vec![0, 1, 2],
                    samples_per_category: 15,
                    shift: ShiftSpec {
                        translation: 0.5 + j as f64 * 0.3,
                        ..ShiftSpec::default()
                    },
                })
                .collect(),
            seed: 7,
        }
    }

    fn small_config(num_targets: usize, output_dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            data: DataConfig::Synthetic(small_spec(num_targets)),
            hyperparams: Hyperparams::default(),
            preprocess: PreprocessConfig {
                zscore: false,
                kpca: None,
            },
            runs: 2,
            seed: 11,
            output_dir,
        }
    }

    #[test]
    fn reduction_single_run_matches_direct_slmc() {
        let mut config = small_config(1, PathBuf::from("unused"));
        config.runs = 1;
        config.hyperparams.beta = 0.0;
        config.hyperparams.gamma = 0.0;
        config.hyperparams.eta = 0.0;
        let result = execute(&config).unwrap();

        let prepared = prepare_data(&config).unwrap();
        let x = &prepared.target_features[0];
        let clusters = prepared.target_categories[0];
        let init = adapt::initial_membership(
            adapt::derive_target_seed(config.seed, 0),
            clusters,
            x.ncols(),
        );
        let direct = slmc::slmc_fit(
            x.view(),
            clusters,
            config.hyperparams.lambda,
            init,
            config.hyperparams.max_outer,
            config.hyperparams.tol_outer,
        )
        .unwrap();
        let pred = slmc::hard_assign(&direct.membership);
        let truth = prepared.target_truth[0].as_ref().unwrap();
        let expected = metrics::nmi(&pred, truth).unwrap();
        let got = result.summary.runs[0].targets[0].nmi.unwrap();
        assert!((got - expected).abs() <= 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn summary_json_is_byte_identical_across_invocations() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(2, dir.path().join("out"));
        run_experiment(&config).unwrap();
        let first = fs::read(config.output_dir.join("summary.json")).unwrap();
        run_experiment(&config).unwrap();
        let second = fs::read(config.output_dir.join("summary.json")).unwrap();
        assert_eq!(first, second);
        assert!(config.output_dir.join("results.csv").exists());
        assert!(config.output_dir.join("trace_run_0.csv").exists());
        assert!(config.output_dir.join("trace_run_1.csv").exists());
    }

    #[test]
    fn one_point_grid_matches_run_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(1, dir.path().join("grid"));
        let cells = run_grid(&config, &GridSpec::default()).unwrap();
        assert_eq!(cells.len(), 1);

        let mut solo = config.clone();
        solo.output_dir = dir.path().join("solo");
        let solo_result = run_experiment(&solo).unwrap();
        assert_eq!(cells[0].result.summary.runs, solo_result.summary.runs);
    }

    #[test]
    fn grid_over_two_dict_sizes_shares_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(1, dir.path().join("grid"));
        let grid = GridSpec {
            dict_size: vec![2, 5],
            ..GridSpec::default()
        };
        let cells = run_grid(&config, &grid).unwrap();
        assert_eq!(cells.len(), 2);
        for (a, b) in cells[0].result.summary.runs.iter().zip(&cells[1].result.summary.runs) {
            assert_eq!(a.seed, b.seed);
        }
        let csv = fs::read_to_string(config.output_dir.join("grid_results.csv")).unwrap();
        // header + 2 cells x 2 runs x 1 target
        assert_eq!(csv.lines().count(), 1 + 4);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = small_config(1, PathBuf::from("unused"));
        config.runs = 0;
        assert!(matches!(config.validate(), Err(Error::Config(_))));

        let mut config = small_config(1, PathBuf::from("unused"));
        config.hyperparams.beta = -1.0;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }
}
