use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelContext, SampleKernelSpec, CONFIG_SCHEMA_VERSION, FIGURE3};
use crate::bioio::{cophenetic, OtuTable};
use crate::error::{Error, Result};
use crate::gp::{fit_classifier, fit_regression, lpd_classification, model_select, ModelScore};
use crate::rng;
use crate::samplekernel::Transform;
use crate::seqkernel::KmerConfig;
use crate::simgen::{host_trait_scenario, EffectScenario, NbReadModel, PhenotypeSpec, SyntheticConfig, TraitKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TraitKind,
    pub noise_var: f64,
}

/// Paired GP training objectives (and held-out LPDs) for the best string
/// kernel and the linear kernel, under both effect-size scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Figure3Config {
    pub schema_version: u32,
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    pub reads: NbReadModel,
    pub n_train: usize,
    pub n_test: usize,
    pub replicates: usize,
    /// Phylogenetic scale of the Scenario-1 effect clusters.
    pub epsilon: f64,
    pub tasks: Vec<TaskSpec>,
    /// String kernels tried; the one with the best training objective is
    /// reported.
    pub string_kernels: Vec<KmerConfig>,
    /// Count transform applied before both kernels. Relative abundance
    /// matches the covariates of the linear phenotype model.
    pub transform: Transform,
}

impl Default for Figure3Config {
    fn default() -> Self {
        Figure3Config {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 1,
            synthetic: SyntheticConfig {
                n_otus: 200,
                ..SyntheticConfig::default()
            },
            reads: NbReadModel::default(),
            n_train: 160,
            n_test: 40,
            replicates: 40,
            epsilon: 0.1,
            tasks: vec![
                TaskSpec { kind: TraitKind::Regression, noise_var: 0.3 },
                TaskSpec { kind: TraitKind::Regression, noise_var: 1.0 },
                TaskSpec { kind: TraitKind::Classification, noise_var: 0.1 },
            ],
            string_kernels: vec![
                KmerConfig::spectrum(10),
                KmerConfig::spectrum(15),
                KmerConfig::spectrum(20),
                KmerConfig::spectrum(25),
                KmerConfig::spectrum(30),
                KmerConfig::mismatch(10, 1),
                KmerConfig::mismatch(15, 1),
                KmerConfig::gappy_pair(5, 1),
                KmerConfig::gappy_pair(10, 1),
                KmerConfig::gappy_pair(10, 3),
                KmerConfig::gappy_pair(15, 3),
            ],
            transform: Transform::Relative,
        }
    }
}

/// Rows are ordered by task, then scenario (phylogenetic first), then
/// replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure3Row {
    pub scenario: String,
    pub task: String,
    pub noise_var: f64,
    pub replicate: usize,
    pub string_kernel: String,
    pub objective_string: f64,
    pub objective_linear: f64,
    pub lpd_string: f64,
    pub lpd_linear: f64,
    pub string_wins: bool,
}

struct Fitted {
    objective: f64,
    lpd: f64,
}

fn fit_and_score(k: &DMatrix<f64>, y: &[f64], n_train: usize, kind: TraitKind) -> Result<Fitted> {
    let n = y.len();
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..n).collect();
    let ktr = k.select_rows(&train).select_columns(&train);
    let kx = k.select_rows(&test).select_columns(&train);
    let kd: Vec<f64> = test.iter().map(|&i| k[(i, i)]).collect();
    match kind {
        TraitKind::Regression => {
            let m = fit_regression(&ktr, &y[..n_train])?;
            let lpd = if test.is_empty() { f64::NAN } else { m.lpd(&kx, &kd, &y[n_train..])? };
            Ok(Fitted { objective: m.lml, lpd })
        }
        TraitKind::Classification => {
            let labels: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
            let m = fit_classifier(&ktr, &labels[..n_train])?;
            let lpd = if test.is_empty() {
                f64::NAN
            } else {
                lpd_classification(&m.predict_proba(&kx, &kd)?, &labels[n_train..])?
            };
            Ok(Fitted { objective: m.elbo(), lpd })
        }
    }
}

pub fn run_figure3(cfg: &Figure3Config) -> Result<Vec<Figure3Row>> {
    if cfg.replicates == 0 || cfg.tasks.is_empty() || cfg.string_kernels.is_empty() || cfg.n_train < 2 {
        return Err(Error::Config("replicates, tasks, string kernels and n_train >= 2 required".into()));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        return Err(Error::Config(format!("epsilon {} outside (0, 1]", cfg.epsilon)));
    }
    let scenarios = [EffectScenario::PhyloClustered, EffectScenario::RandomClustered];
    let mut specs: Vec<SampleKernelSpec> = cfg.string_kernels.iter().map(|&c| SampleKernelSpec::String(c)).collect();
    specs.push(SampleKernelSpec::Linear);

    // one dataset and set of similarity matrices per replicate, shared by
    // every task and scenario
    let chunks: Vec<Vec<Figure3Row>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<Figure3Row>> {
            let r64 = r as u64;
            let data = crate::simgen::synthetic_dataset(&cfg.synthetic, &mut rng::stream(cfg.seed, &[FIGURE3, 0, r64]))?;
            let coph = cophenetic(&data.tree, &data.otu_ids())?;
            let ctx = KernelContext::for_synthetic(&data, &specs)?;
            let mut rows = Vec::with_capacity(cfg.tasks.len() * 2);
            for (t, task) in cfg.tasks.iter().enumerate() {
                for (s, &scenario) in scenarios.iter().enumerate() {
                    let spec = PhenotypeSpec {
                        kind: task.kind,
                        noise_var: task.noise_var,
                        ..PhenotypeSpec::regression(task.noise_var, scenario)
                    };
                    let mut g = rng::stream(cfg.seed, &[FIGURE3, 1, t as u64, s as u64, r64]);
                    let n = cfg.n_train + cfg.n_test;
                    let sim = host_trait_scenario(&data.alpha, &coph, cfg.epsilon, cfg.reads, n, &spec, &mut g)?;
                    rows.push(score_replicate(cfg, &ctx, &sim.table, &sim.phenotype.y, *task, scenario, r)?);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<Figure3Row> = chunks.into_iter().flatten().collect();
    // task-major order, as documented on the row type
    rows.sort_by_key(|row| (task_index(cfg, row), row.scenario != "phylo_clustered", row.replicate));
    Ok(rows)
}

fn task_index(cfg: &Figure3Config, row: &Figure3Row) -> usize {
    cfg.tasks
        .iter()
        .position(|t| t.noise_var == row.noise_var && task_name(t.kind) == row.task)
        .unwrap_or(usize::MAX)
}

fn task_name(kind: TraitKind) -> &'static str {
    match kind {
        TraitKind::Regression => "regression",
        TraitKind::Classification => "classification",
    }
}

fn score_replicate(
    cfg: &Figure3Config,
    ctx: &KernelContext,
    table: &OtuTable,
    y: &[f64],
    task: TaskSpec,
    scenario: EffectScenario,
    r: usize,
) -> Result<Figure3Row> {
    let mut scores = Vec::with_capacity(cfg.string_kernels.len());
    for &c in &cfg.string_kernels {
        let f = fit_and_score(&ctx.kernel_with(table, SampleKernelSpec::String(c), cfg.transform)?, y, cfg.n_train, task.kind)?;
        scores.push(ModelScore { model_id: c.tag(), config: Some(c), objective: f.objective, held_out_lpd: Some(f.lpd) });
    }
    let best = model_select(scores)?.remove(0);
    let linear = fit_and_score(&ctx.kernel_with(table, SampleKernelSpec::Linear, cfg.transform)?, y, cfg.n_train, task.kind)?;
    Ok(Figure3Row {
        scenario: match scenario {
            EffectScenario::PhyloClustered => "phylo_clustered".into(),
            EffectScenario::RandomClustered => "random_clustered".into(),
        },
        task: task_name(task.kind).into(),
        noise_var: task.noise_var,
        replicate: r,
        lpd_string: best.held_out_lpd.unwrap_or(f64::NAN),
        string_kernel: best.model_id,
        objective_string: best.objective,
        objective_linear: linear.objective,
        lpd_linear: linear.lpd,
        string_wins: best.objective > linear.objective,
    })
}
