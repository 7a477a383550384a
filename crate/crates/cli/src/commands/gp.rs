use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use phylokern::gp::{
    fit_classifier, fit_classifier_with_scale, fit_regression, gaussian_lpd, lpd_classification, model_select,
    GpClassifier, GpRegressor, ModelScore,
};
use phylokern::rng;
use phylokern::samplekernel::KernelMatrix;
use phylokern::seqkernel::KmerConfig;
use phylokern::Error;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::io::{read_values, write_json, write_rows};
use crate::{CliError, CliResult, Reporter};

/// Version of the GP model JSON layout.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Subcommand)]
pub enum GpCommand {
    /// Fit one model per kernel and keep the best training objective.
    Fit(FitArgs),
    /// Predict held-out samples with a fitted model.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Exact GP regression, objective = log-marginal likelihood.
    #[value(alias = "reg")]
    Regression,
    /// Variational probit GP, objective = ELBO. Values must be 0/1.
    #[value(alias = "class")]
    Classification,
}

#[derive(Args)]
pub struct FitArgs {
    /// Sample kernel matrix; repeat to select among several. A file whose
    /// stem is a k-mer tag (e.g. spectrum_k30) takes part in tie-breaking.
    #[arg(long, required = true)]
    pub kernel: Vec<PathBuf>,
    /// TSV with header: sample id, trait value.
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Fraction of samples used for training; the rest are held out.
    #[arg(long, default_value_t = 1.0)]
    pub split: f64,
    /// Seed of the train/test shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write held-out predictions of the selected model (TSV).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Model JSON from `gp fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Kernel matrix covering the training samples and the samples to predict.
    #[arg(long)]
    pub kernel: PathBuf,
    /// Output predictions (TSV). Every non-training sample is predicted.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub task: Task,
    pub model_id: String,
    pub kernel: PathBuf,
    pub objective: f64,
    pub held_out_lpd: Option<f64>,
    /// Present for regression only.
    pub noise_var: Option<f64>,
    pub signal_scale: f64,
    pub jitter: f64,
    pub train_ids: Vec<String>,
    pub y_train: Vec<f64>,
    pub test_ids: Vec<String>,
    /// Every candidate, best first.
    pub candidates: Vec<ModelScore>,
}

enum Fitted {
    Reg(GpRegressor),
    Class(GpClassifier),
}

impl Fitted {
    fn objective(&self) -> f64 {
        match self {
            Fitted::Reg(m) => m.lml,
            Fitted::Class(m) => m.elbo(),
        }
    }
}

#[derive(Serialize)]
struct RegRow<'a> {
    sample_id: &'a str,
    mean: f64,
    variance: f64,
}

#[derive(Serialize)]
struct ClassRow<'a> {
    sample_id: &'a str,
    probability: f64,
    latent_mean: f64,
    latent_variance: f64,
}

pub fn run(cmd: GpCommand, rep: &Reporter) -> CliResult<()> {
    match cmd {
        GpCommand::Fit(a) => run_fit(a, rep),
        GpCommand::Predict(a) => run_predict(a, rep),
    }
}

fn labels_of(task: Task, y: &[f64]) -> CliResult<Vec<bool>> {
    if task == Task::Regression {
        return Ok(Vec::new());
    }
    y.iter()
        .map(|&v| match v {
            v if v == 0.0 => Ok(false),
            v if v == 1.0 => Ok(true),
            v => Err(Error::InvalidData(format!("classification value {v} is not 0 or 1")).into()),
        })
        .collect()
}

fn fit(task: Task, k: &DMatrix<f64>, y: &[f64]) -> CliResult<Fitted> {
    Ok(match task {
        Task::Regression => Fitted::Reg(fit_regression(k, y)?),
        Task::Classification => Fitted::Class(fit_classifier(k, &labels_of(task, y)?)?),
    })
}

/// Per-sample predictions plus the held-out LPD when targets are known.
fn predict(model: &Fitted, k_cross: &DMatrix<f64>, k_diag: &[f64], y: Option<&[f64]>) -> CliResult<(Vec<[f64; 3]>, Option<f64>)> {
    if k_diag.is_empty() {
        return Ok((Vec::new(), None));
    }
    Ok(match model {
        Fitted::Reg(m) => {
            let p = m.predict(k_cross, k_diag)?;
            let lpd = y.map(|y| gaussian_lpd(&p, y)).transpose()?;
            (p.into_iter().map(|(mu, v)| [mu, v, f64::NAN]).collect(), lpd)
        }
        Fitted::Class(m) => {
            let latent = m.predict_latent(k_cross, k_diag)?;
            let probs = m.predict_proba(k_cross, k_diag)?;
            let lpd = match y {
                Some(y) => Some(lpd_classification(&probs, &labels_of(Task::Classification, y)?)?),
                None => None,
            };
            (probs.iter().zip(&latent).map(|(&p, &(mu, v))| [p, mu, v]).collect(), lpd)
        }
    })
}

fn write_predictions(path: &Path, task: Task, ids: &[String], preds: &[[f64; 3]]) -> CliResult<()> {
    match task {
        Task::Regression => {
            let rows: Vec<RegRow> = ids
                .iter()
                .zip(preds)
                .map(|(id, p)| RegRow { sample_id: id, mean: p[0], variance: p[1] })
                .collect();
            write_rows(path, &rows)
        }
        Task::Classification => {
            let rows: Vec<ClassRow> = ids
                .iter()
                .zip(preds)
                .map(|(id, p)| ClassRow { sample_id: id, probability: p[0], latent_mean: p[1], latent_variance: p[2] })
                .collect();
            write_rows(path, &rows)
        }
    }
}

fn blocks(k: &KernelMatrix, train: &[usize], test: &[usize]) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let ktr = k.block(train, train);
    let kx = k.block(test, train);
    let kd = test.iter().map(|&i| k.values[(i, i)]).collect();
    (ktr, kx, kd)
}

fn model_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn run_fit(a: FitArgs, rep: &Reporter) -> CliResult<()> {
    if !(a.split > 0.0 && a.split <= 1.0) {
        return Err(CliError::Usage("--split must lie in (0, 1]".into()));
    }
    let values: HashMap<String, f64> = read_values(&a.y)?.into_iter().collect();
    let kernels = a.kernel.iter().map(|p| KernelMatrix::read_file(p)).collect::<Result<Vec<_>, _>>()?;
    let ids = kernels[0].sample_ids.clone();
    let y: Vec<f64> = ids
        .iter()
        .map(|id| values.get(id).copied().ok_or_else(|| Error::MissingId { id: id.clone(), component: "trait file" }))
        .collect::<Result<_, _>>()?;
    labels_of(a.task, &y)?;

    let n = ids.len();
    let n_train = ((a.split * n as f64).round() as usize).clamp(1, n);
    if n_train < 2 || (a.split < 1.0 && n_train == n) {
        return Err(CliError::Usage(format!("--split {} leaves no usable train/test partition of {n} samples", a.split)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if n_train < n {
        order.shuffle(&mut rng::stream(a.seed, &[]));
    }
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let train_ids: Vec<String> = train.iter().map(|&i| ids[i].clone()).collect();
    let test_ids: Vec<String> = test.iter().map(|&i| ids[i].clone()).collect();
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();

    let start = Instant::now();
    let mut fitted = Vec::with_capacity(kernels.len());
    let mut scores = Vec::with_capacity(kernels.len());
    for (path, k) in a.kernel.iter().zip(&kernels) {
        // same sample order as the first kernel
        let idx = k.indices_of(&ids)?;
        if k.len() != n {
            return Err(Error::InvalidData(format!("{} has {} samples, expected {n}", path.display(), k.len())).into());
        }
        let k = k.restrict(&idx);
        let (ktr, kx, kd) = blocks(&k, &train, &test);
        let model = fit(a.task, &ktr, &y_train)?;
        let (_, lpd) = predict(&model, &kx, &kd, Some(&y_test))?;
        let id = model_id(path);
        scores.push(ModelScore {
            config: id.parse::<KmerConfig>().ok(),
            model_id: id,
            objective: model.objective(),
            held_out_lpd: lpd,
        });
        fitted.push((path.clone(), k, model));
    }
    let ranked = model_select(scores)?;
    let best = &ranked[0];
    let pos = a.kernel.iter().position(|p| model_id(p) == best.model_id).expect("selected from the inputs");
    let (path, k, model) = &fitted[pos];
    let (noise_var, signal_scale, jitter) = match model {
        Fitted::Reg(m) => (Some(m.noise_var), m.signal_scale, m.jitter),
        Fitted::Class(m) => (None, m.signal_scale, m.jitter),
    };
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        task: a.task,
        model_id: best.model_id.clone(),
        kernel: path.clone(),
        objective: best.objective,
        held_out_lpd: best.held_out_lpd,
        noise_var,
        signal_scale,
        jitter,
        train_ids,
        y_train,
        test_ids: test_ids.clone(),
        candidates: ranked.clone(),
    };
    write_json(&a.out, &file)?;
    if let Some(p) = &a.predictions {
        let (_, kx, kd) = blocks(k, &train, &test);
        let (preds, _) = predict(model, &kx, &kd, None)?;
        write_predictions(p, a.task, &test_ids, &preds)?;
    }
    rep.say(format!(
        "gp fit: {} candidates, best {} (objective {:.4}), {} train / {} test, {:.3} s",
        ranked.len(),
        best.model_id,
        best.objective,
        train.len(),
        test.len(),
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}

fn run_predict(a: PredictArgs, rep: &Reporter) -> CliResult<()> {
    let text = crate::io::read_text(&a.model)?;
    let m: ModelFile = serde_json::from_str(&text).map_err(Error::from)?;
    if m.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::Config(format!("model schema version {} is not supported", m.schema_version)).into());
    }
    let k = KernelMatrix::read_file(&a.kernel)?;
    let train = k.indices_of(&m.train_ids)?;
    let train_set: std::collections::HashSet<&str> = m.train_ids.iter().map(String::as_str).collect();
    let test: Vec<usize> = (0..k.len()).filter(|&i| !train_set.contains(k.sample_ids[i].as_str())).collect();
    let test_ids: Vec<String> = test.iter().map(|&i| k.sample_ids[i].clone()).collect();
    let (ktr, kx, kd) = blocks(&k, &train, &test);
    let start = Instant::now();
    let model = match m.task {
        Task::Regression => {
            let noise = m.noise_var.ok_or_else(|| Error::Config("regression model without noise_var".into()))?;
            Fitted::Reg(GpRegressor::with_hyperparameters(&ktr, &m.y_train, noise, m.signal_scale)?)
        }
        Task::Classification => {
            let labels = labels_of(m.task, &m.y_train)?;
            Fitted::Class(fit_classifier_with_scale(&ktr, &labels, m.signal_scale)?)
        }
    };
    let (preds, _) = predict(&model, &kx, &kd, None)?;
    write_predictions(&a.out, m.task, &test_ids, &preds)?;
    rep.say(format!(
        "gp predict: {} samples with model {}, {:.3} s",
        test_ids.len(),
        m.model_id,
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}
