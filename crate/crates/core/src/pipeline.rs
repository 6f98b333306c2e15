//! End-to-end selection runs: fold-wise selection, consensus, and evaluation
//! on a held-out split.
//!
//! A run splits the labeled rows into a development part and a holdout.
//! The development part is cut into k folds. For every fold the
//! preprocessor and tree model are fitted on the fold's training rows only,
//! attributions are taken on its validation rows, and the selector picks
//! features. The final set is the intersection of the fold selections. It
//! is scored for redundancy on the development part and for predictability
//! on the holdout, with a logistic model refitted on the selected columns.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{feature_importance, group_importance, select_by_median, tree_shap};
use crate::data::{
    apply_preprocessor, default_groups, fit_preprocessor, holdout_split, kfold_split, Dataset,
    DesignMatrix, Fold, GroupMap, GroupPartition, Preprocessor,
};
use crate::error::{Error, Result};
use crate::gbm::{train_gbm, GbmConfig, TreeEnsemble};
use crate::math::sigmoid;
use crate::metrics::{
    bootstrap_evaluate_many, classification_metrics, consensus_selection, mean_abs_correlation,
    mean_vif, EvalReport, FeatureSet, StabilityScores, VifSummary, REPORT_VERSION,
};
use crate::seed::{self, stream};
use crate::solver::{
    fit_grasp, fit_lasso, group_weights, lambda_heuristic, GroupWeights, LassoConfig,
    SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Grasp,
    Lasso,
    ShapMedian,
}

impl Selector {
    pub const ALL: [Selector; 3] = [Selector::Grasp, Selector::Lasso, Selector::ShapMedian];

    pub fn name(self) -> &'static str {
        match self {
            Selector::Grasp => "grasp",
            Selector::Lasso => "lasso",
            Selector::ShapMedian => "shap_median",
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL
            .into_iter()
            .find(|sel| sel.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown selector {s:?}")))
    }
}

/// How design columns are grouped.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSource {
    /// Columns derived from the same input column form one group.
    #[default]
    BySourceColumn,
    Map(GroupMap),
}

impl GroupSource {
    pub fn partition(&self, prep: &Preprocessor) -> Result<GroupPartition> {
        match self {
            GroupSource::BySourceColumn => Ok(default_groups(prep)),
            GroupSource::Map(map) => map.partition(prep.output_names()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub selector: Selector,
    pub k_folds: usize,
    pub bootstrap: usize,
    pub seed: u64,
    pub holdout_fraction: f64,
    /// Fixed λ instead of the heuristic (GRASP) or cross-validation (LASSO).
    pub lambda: Option<f64>,
    pub tau0: f64,
    pub eps_weight: f64,
    pub solver: SolverConfig,
    pub gbm: GbmConfig,
    pub lasso_grid_points: usize,
    /// Number of bootstrap resamples of the development rows on which the
    /// selector is rerun to measure resampling stability. Zero disables it.
    pub stability_resamples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            selector: Selector::Grasp,
            k_folds: 5,
            bootstrap: 1000,
            seed: 0,
            holdout_fraction: 0.2,
            lambda: None,
            tau0: 1.0,
            eps_weight: 1e-8,
            solver: SolverConfig::default(),
            gbm: GbmConfig::default(),
            lasso_grid_points: 20,
            stability_resamples: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::InvalidArgument("k_folds must be at least 2".into()));
        }
        if self.bootstrap < 1 {
            return Err(Error::InvalidArgument("bootstrap must be at least 1".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "holdout fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {l}")));
            }
        }
        if !(self.tau0 > 0.0 && self.eps_weight > 0.0) {
            return Err(Error::InvalidArgument("tau0 and eps_weight must be positive".into()));
        }
        self.solver.validate()?;
        self.gbm.validate()
    }
}

/// Models fitted on a fold's training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldModels {
    pub preprocessor: Preprocessor,
    pub train: DesignMatrix,
    pub model: Option<TreeEnsemble>,
}

/// Fits the preprocessor and, when `gbm` is given, the tree model using only
/// the rows `train` of `data`.
pub fn fit_fold_models(data: &Dataset, train: &[usize], gbm: Option<&GbmConfig>) -> Result<FoldModels> {
    let train_data = data.subset(train);
    let preprocessor = fit_preprocessor(&train_data)?;
    let train = apply_preprocessor(&preprocessor, &train_data)?;
    let model = gbm.map(|cfg| train_gbm(&train, cfg)).transpose()?;
    Ok(FoldModels {
        preprocessor,
        train,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub lambda_max: f64,
    pub grid: Vec<f64>,
    pub cv_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub selected_features: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_groups: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_weights: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lasso_path: Option<LassoPath>,
    pub warnings: Vec<String>,
}

/// Runs one selector on a single train/validation split of `data`.
pub fn select_on_split(
    data: &Dataset,
    split: &Fold,
    groups: &GroupSource,
    config: &RunConfig,
    fold: usize,
) -> Result<FoldReport> {
    let needs_model = config.selector != Selector::Lasso;
    let models = fit_fold_models(data, &split.train, needs_model.then_some(&config.gbm))?;
    let x = &models.train;
    let names = &x.column_names;

    let phi = match &models.model {
        Some(model) => {
            let val = apply_preprocessor(&models.preprocessor, &data.subset(&split.validation))?;
            Some(feature_importance(&tree_shap(model, val.values.view())?)?)
        }
        None => None,
    };

    let mut report = FoldReport {
        fold,
        n_train: split.train.len(),
        n_validation: split.validation.len(),
        selected_features: Vec::new(),
        selected_groups: None,
        group_weights: None,
        solver: None,
        lasso_path: None,
        warnings: models.preprocessor.warnings().to_vec(),
    };
    let selected: Vec<usize> = match config.selector {
        Selector::Grasp => {
            let partition = groups.partition(&models.preprocessor)?;
            let phi = phi.expect("grasp trains a tree model");
            let s = group_importance(&phi, &partition)?;
            let weights = group_weights(&s, config.tau0, config.eps_weight)?;
            let lambda = match config.lambda {
                Some(l) => l,
                None => lambda_heuristic(x.values.view())?,
            };
            let fit = fit_grasp(
                x.values.view(),
                &x.labels,
                &partition,
                &weights,
                &SolverConfig {
                    lambda,
                    ..config.solver.clone()
                },
            )?;
            if !fit.converged {
                report
                    .warnings
                    .push(format!("solver stopped after {} iterations", fit.iterations));
            }
            report.selected_groups = Some(fit.selected.clone());
            report.group_weights = Some(
                partition
                    .groups()
                    .iter()
                    .map(|g| g.name.clone())
                    .zip(weights.omega.iter().copied())
                    .collect(),
            );
            let cols = fit.selected_features(&partition);
            report.solver = Some(SolverSummary {
                lambda,
                iterations: fit.iterations,
                converged: fit.converged,
                final_objective: fit.final_objective,
                objective_trace: fit.objective_trace,
            });
            cols
        }
        Selector::Lasso => {
            let p = x.n_cols();
            let fit = match config.lambda {
                Some(lambda) => fit_grasp(
                    x.values.view(),
                    &x.labels,
                    &GroupPartition::singletons(names),
                    &GroupWeights::uniform(p),
                    &SolverConfig {
                        lambda,
                        ..config.solver.clone()
                    },
                )?,
                None => {
                    let cv_folds = config.k_folds.min(x.n_rows());
                    let lasso = fit_lasso(
                        x.values.view(),
                        &x.labels,
                        &LassoConfig {
                            solver: config.solver.clone(),
                            grid_points: config.lasso_grid_points,
                            min_ratio: 1e-4,
                            cv_folds,
                            seed: seed::derive(config.seed, stream::LASSO_CV + fold as u64),
                        },
                    )?;
                    report.lasso_path = Some(LassoPath {
                        lambda_max: lasso.lambda_max,
                        grid: lasso.grid,
                        cv_loss: lasso.cv_loss,
                    });
                    lasso.fit
                }
            };
            report.solver = Some(SolverSummary {
                lambda: fit.lambda,
                iterations: fit.iterations,
                converged: fit.converged,
                final_objective: fit.final_objective,
                objective_trace: fit.objective_trace.clone(),
            });
            (0..p).filter(|&j| fit.beta[j] != 0.0).collect()
        }
        Selector::ShapMedian => select_by_median(&phi.expect("shap_median trains a tree model")),
    };
    report.selected_features = selected.iter().map(|&j| names[j].clone()).collect();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub report_version: u32,
    /// Seconds since the Unix epoch; the only field that differs between
    /// repeated runs.
    pub generated_at: u64,
    pub selector: Selector,
    pub config: RunConfig,
    pub n_rows: usize,
    pub n_development: usize,
    pub n_holdout: usize,
    /// Every design column seen in any fold; selection indices refer to it.
    pub columns: Vec<String>,
    pub folds: Vec<FoldReport>,
    pub final_features: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_groups: Option<Vec<String>>,
    pub evaluation: EvalReport,
}

impl SelectReport {
    /// JSON with the timestamp zeroed, for reproducibility comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.generated_at = 0;
        Ok(serde_json::to_string(&copy)?)
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn feature_sets(
    name: &str,
    reports: &[FoldReport],
    universe: &mut Vec<String>,
    index: &mut HashMap<String, usize>,
) -> Vec<FeatureSet> {
    reports
        .iter()
        .map(|r| {
            let indices: BTreeSet<usize> = r
                .selected_features
                .iter()
                .map(|f| {
                    *index.entry(f.clone()).or_insert_with(|| {
                        universe.push(f.clone());
                        universe.len() - 1
                    })
                })
                .collect();
            FeatureSet {
                name: name.to_string(),
                indices,
                group_names: r
                    .selected_groups
                    .as_ref()
                    .map(|g| g.iter().cloned().collect()),
            }
        })
        .collect()
}

/// Runs the full selection protocol for `config.selector`.
pub fn run_select(data: &Dataset, groups: &GroupSource, config: &RunConfig) -> Result<SelectReport> {
    config.validate()?;
    let data = data.labeled();
    let n = data.n_rows();
    let split = holdout_split(n, config.holdout_fraction, seed::derive(config.seed, stream::HOLDOUT))?;
    if split.validation.is_empty() || split.train.len() < config.k_folds {
        return Err(Error::InvalidArgument(format!(
            "{n} labeled rows are too few for a holdout and {} folds",
            config.k_folds
        )));
    }
    let dev = data.subset(&split.train);
    let hold = data.subset(&split.validation);
    let folds = kfold_split(dev.n_rows(), config.k_folds, seed::derive(config.seed, stream::FOLDS))?;

    let fold_reports: Vec<FoldReport> = folds
        .par_iter()
        .enumerate()
        .map(|(k, f)| select_on_split(&dev, f, groups, config, k).map_err(|e| e.in_fold(k)))
        .collect::<Result<_>>()?;

    // design columns can differ between folds (one-hot levels, dropped columns)
    let mut universe: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let dev_models = fit_fold_models(&dev, &(0..dev.n_rows()).collect::<Vec<_>>(), Some(&config.gbm))?;
    for name in &dev_models.train.column_names {
        index.insert(name.clone(), universe.len());
        universe.push(name.clone());
    }
    let sets = feature_sets(config.selector.name(), &fold_reports, &mut universe, &mut index);
    let consensus = consensus_selection(&sets)?;
    let fold_stability = StabilityScores::of(&sets, universe.len())?;

    let bootstrap_stability = if config.stability_resamples > 0 {
        let mut boot_reports = Vec::with_capacity(config.stability_resamples);
        for r in 0..config.stability_resamples {
            let mut rng = seed::rng(seed::derive(config.seed, stream::STABILITY + r as u64));
            let m = dev.n_rows();
            let train: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            let drawn: BTreeSet<usize> = train.iter().copied().collect();
            let validation: Vec<usize> = (0..m).filter(|i| !drawn.contains(i)).collect();
            if validation.is_empty() {
                continue;
            }
            let resample = Fold { train, validation };
            boot_reports.push(select_on_split(&dev, &resample, groups, config, r)?);
        }
        let boot_sets = feature_sets(config.selector.name(), &boot_reports, &mut universe, &mut index);
        Some(StabilityScores::of(&boot_sets, universe.len())?)
    } else {
        None
    };

    let final_features: Vec<String> = consensus.indices.iter().map(|&j| universe[j].clone()).collect();
    let evaluation = evaluate_selection(
        &dev_models,
        &hold,
        &final_features,
        config,
        fold_stability,
        bootstrap_stability,
    )?;

    Ok(SelectReport {
        report_version: REPORT_VERSION,
        generated_at: now_unix(),
        selector: config.selector,
        config: config.clone(),
        n_rows: n,
        n_development: dev.n_rows(),
        n_holdout: hold.n_rows(),
        columns: universe,
        folds: fold_reports,
        final_features,
        final_groups: consensus.group_names.map(|g| g.into_iter().collect()),
        evaluation,
    })
}

fn predict_labels(x: ArrayView2<f64>, beta: ArrayView1<f64>, intercept: f64) -> Vec<u8> {
    x.dot(&beta)
        .iter()
        .map(|&z| u8::from(sigmoid(z + intercept) >= 0.5))
        .collect()
}

fn evaluate_selection(
    dev: &FoldModels,
    hold: &Dataset,
    features: &[String],
    config: &RunConfig,
    fold_stability: StabilityScores,
    bootstrap_stability: Option<StabilityScores>,
) -> Result<EvalReport> {
    let cols: Vec<usize> = features
        .iter()
        .filter_map(|f| dev.train.column_names.iter().position(|c| c == f))
        .collect();
    let x_dev = dev.train.values.select(Axis(1), &cols);
    let x_hold_full = apply_preprocessor(&dev.preprocessor, hold)?;
    let x_hold = x_hold_full.values.select(Axis(1), &cols);

    // downstream predictability: unpenalized logistic refit on the selection,
    // intercept only when nothing was selected
    let (beta, intercept) = if cols.is_empty() {
        let labels = &dev.train.labels;
        let prior = labels.iter().map(|&v| f64::from(v)).sum::<f64>() / labels.len() as f64;
        let prior = prior.clamp(1e-6, 1.0 - 1e-6);
        (Array1::zeros(0), (prior / (1.0 - prior)).ln())
    } else {
        let names: Vec<String> = cols.iter().map(|j| j.to_string()).collect();
        let fit = fit_grasp(
            x_dev.view(),
            &dev.train.labels,
            &GroupPartition::singletons(&names),
            &GroupWeights::uniform(cols.len()),
            &SolverConfig {
                lambda: 0.0,
                ..config.solver.clone()
            },
        )?;
        (Array1::from(fit.beta), fit.intercept)
    };
    let score = |xb: ArrayView2<f64>, yb: &[u8]| {
        let s = classification_metrics(yb, &predict_labels(xb, beta.view(), intercept))
            .expect("matching lengths");
        vec![s.accuracy, s.f1, s.mcc]
    };
    let est = bootstrap_evaluate_many(
        score,
        x_hold.view(),
        &x_hold_full.labels,
        config.bootstrap,
        seed::derive(config.seed, stream::BOOTSTRAP),
    )?;
    let mut ci = BTreeMap::new();
    for (name, e) in ["accuracy", "f1", "mcc"].iter().zip(&est) {
        ci.insert(name.to_string(), (e.low, e.high));
    }

    let mean_vif = mean_vif(x_dev.view())?;
    let mean_abs_shap = match (&dev.model, cols.is_empty()) {
        (Some(model), false) => {
            let phi = feature_importance(&tree_shap(model, x_hold_full.values.view())?)?;
            Some(cols.iter().map(|&j| phi[j]).sum::<f64>() / cols.len() as f64)
        }
        _ => None,
    };

    Ok(EvalReport {
        report_version: REPORT_VERSION,
        n_features: cols.len(),
        accuracy: est[0].point,
        f1: est[1].point,
        mcc: est[2].point,
        mean_vif,
        mean_abs_corr: mean_abs_correlation(x_dev.view()),
        mean_abs_shap,
        jaccard: fold_stability.jaccard,
        asm: fold_stability.asm,
        asm_skipped_pairs: fold_stability.asm_skipped_pairs,
        bootstrap_ci: ci,
        bootstrap_stability,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub selector: Selector,
    pub n_features: usize,
    pub asm: Option<f64>,
    pub jaccard: f64,
    pub mean_abs_shap: Option<f64>,
    pub mean_vif: VifSummary,
    pub mean_abs_corr: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub mcc: f64,
    pub bootstrap_ci: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub report_version: u32,
    pub generated_at: u64,
    pub seed: u64,
    pub rows: Vec<BenchmarkRow>,
    pub runs: Vec<SelectReport>,
}

impl BenchmarkReport {
    /// Plain-text comparison table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>6} {:>7} {:>7} {:>8} {:>14} {:>8} {:>7} {:>7} {:>7}\n",
            "selector", "n", "ASM", "JI", "|SHAP|", "VIF", "|corr|", "acc", "F1", "MCC"
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        for r in &self.rows {
            let vif = match r.mean_vif {
                VifSummary::Mean(v) => format!("{v:.3}"),
                VifSummary::Multicollinear => "multicollinear".into(),
            };
            out.push_str(&format!(
                "{:<12} {:>6} {:>7} {:>7.3} {:>8} {:>14} {:>8.3} {:>7.3} {:>7.3} {:>7.3}\n",
                r.selector.name(),
                r.n_features,
                opt(r.asm),
                r.jaccard,
                opt(r.mean_abs_shap),
                vif,
                r.mean_abs_corr,
                r.accuracy,
                r.f1,
                r.mcc
            ));
        }
        out
    }
}

/// Runs every selector under the same folds and seeds.
pub fn run_benchmark(
    data: &Dataset,
    groups: &GroupSource,
    config: &RunConfig,
    selectors: &[Selector],
) -> Result<BenchmarkReport> {
    if selectors.len() < 2 {
        return Err(Error::InvalidArgument("need ≥2 selectors".into()));
    }
    let runs: Vec<SelectReport> = selectors
        .iter()
        .map(|&selector| {
            run_select(
                data,
                groups,
                &RunConfig {
                    selector,
                    ..config.clone()
                },
            )
        })
        .collect::<Result<_>>()?;
    let rows = runs
        .iter()
        .map(|r| {
            let e = &r.evaluation;
            BenchmarkRow {
                selector: r.selector,
                n_features: e.n_features,
                asm: e.asm,
                jaccard: e.jaccard,
                mean_abs_shap: e.mean_abs_shap,
                mean_vif: e.mean_vif,
                mean_abs_corr: e.mean_abs_corr,
                accuracy: e.accuracy,
                f1: e.f1,
                mcc: e.mcc,
                bootstrap_ci: e.bootstrap_ci.clone(),
            }
        })
        .collect();
    Ok(BenchmarkReport {
        report_version: REPORT_VERSION,
        generated_at: now_unix(),
        seed: config.seed,
        rows,
        runs,
    })
}
