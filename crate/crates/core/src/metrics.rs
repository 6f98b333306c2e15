//! Predictability, redundancy and stability scores for selected feature sets.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{feature_importance, AttributionMatrix};
use crate::error::{Error, Result};
use crate::math::percentile_sorted;
use crate::seed;

pub const REPORT_VERSION: u32 = 1;

/// R² above this marks a selection as multicollinear.
pub const MULTICOLLINEAR_R2: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub name: String,
    pub indices: BTreeSet<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_names: Option<BTreeSet<String>>,
}

impl FeatureSet {
    pub fn new(name: impl Into<String>, indices: impl IntoIterator<Item = usize>) -> Self {
        FeatureSet {
            name: name.into(),
            indices: indices.into_iter().collect(),
            group_names: None,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    pub f1: f64,
    pub mcc: f64,
}

/// Accuracy, F1 (positive class 1) and MCC. Degenerate F1 and MCC
/// denominators score 0.
pub fn classification_metrics(y_true: &[u8], y_pred: &[u8]) -> Result<ClassificationScores> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyData);
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => tp += 1.0,
            (0, 0) => tn += 1.0,
            (0, _) => fp += 1.0,
            _ => fneg += 1.0,
        }
    }
    let n = y_true.len() as f64;
    let f1_den = 2.0 * tp + fp + fneg;
    let f1 = if f1_den > 0.0 { 2.0 * tp / f1_den } else { 0.0 };
    let mcc_den = (tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg);
    let mcc = if mcc_den > 0.0 {
        ((tp * tn - fp * fneg) / mcc_den.sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(ClassificationScores {
        accuracy: (tp + tn) / n,
        f1,
        mcc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VifSummary {
    Mean(f64),
    Multicollinear,
}

impl VifSummary {
    pub fn value(&self) -> Option<f64> {
        match self {
            VifSummary::Mean(v) => Some(*v),
            VifSummary::Multicollinear => None,
        }
    }
}

impl Serialize for VifSummary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            VifSummary::Mean(v) => s.serialize_f64(*v),
            VifSummary::Multicollinear => s.serialize_str("multicollinear"),
        }
    }
}

impl<'de> Deserialize<'de> for VifSummary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Flag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(VifSummary::Mean(v)),
            Raw::Flag(f) if f == "multicollinear" => Ok(VifSummary::Multicollinear),
            Raw::Flag(f) => Err(serde::de::Error::custom(format!("unexpected VIF flag {f:?}"))),
        }
    }
}

/// R² of regressing column `j` on the other columns plus an intercept.
fn r_squared(x: &DMatrix<f64>, j: usize) -> f64 {
    let n = x.nrows();
    let target = x.column(j).into_owned();
    let mean = target.mean();
    let sst: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    if sst <= 0.0 {
        return 1.0;
    }
    let mut design = DMatrix::from_element(n, x.ncols(), 1.0);
    let mut c = 1;
    for k in (0..x.ncols()).filter(|&k| k != j) {
        design.set_column(c, &x.column(k));
        c += 1;
    }
    let svd = design.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max() * n as f64;
    let coef: DVector<f64> = match svd.solve(&target, tol) {
        Ok(c) => c,
        Err(_) => return 1.0,
    };
    let resid = &target - &design * coef;
    1.0 - resid.norm_squared() / sst
}

/// Mean variance inflation factor of the columns of `x`, or the
/// multicollinear flag when some column is (numerically) a linear function of
/// the others. Fewer than two columns score 1.
pub fn mean_vif(x: ArrayView2<f64>) -> Result<VifSummary> {
    let p = x.ncols();
    if p < 2 {
        return Ok(VifSummary::Mean(1.0));
    }
    if x.nrows() <= p {
        return Err(Error::InvalidArgument(format!(
            "VIF needs more rows than columns, got {}x{p}",
            x.nrows()
        )));
    }
    let m = DMatrix::from_fn(x.nrows(), p, |i, j| x[[i, j]]);
    let mut total = 0.0;
    for j in 0..p {
        let r2 = r_squared(&m, j);
        if r2 > MULTICOLLINEAR_R2 {
            return Ok(VifSummary::Multicollinear);
        }
        total += 1.0 / (1.0 - r2.max(0.0));
    }
    Ok(VifSummary::Mean(total / p as f64))
}

/// Mean |Pearson r| over column pairs. Constant columns are skipped.
pub fn mean_abs_correlation(x: ArrayView2<f64>) -> f64 {
    let mut centred: Vec<Vec<f64>> = Vec::new();
    for (j, col) in x.columns().into_iter().enumerate() {
        let m = col.mean().unwrap_or(0.0);
        let c: Vec<f64> = col.iter().map(|v| v - m).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        if ss > 0.0 {
            let norm = ss.sqrt();
            centred.push(c.into_iter().map(|v| v / norm).collect());
        } else {
            tracing::warn!("column {j} has zero variance and is excluded from correlations");
        }
    }
    let k = centred.len();
    if k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            let r: f64 = centred[a].iter().zip(&centred[b]).map(|(u, v)| u * v).sum();
            total += r.abs().min(1.0);
        }
    }
    total / (k * (k - 1) / 2) as f64
}

/// Mean importance (mean |SHAP|) over the selected features.
pub fn mean_abs_shap(attr: &AttributionMatrix, selected: &FeatureSet) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument("empty selection".into()));
    }
    let phi = feature_importance(attr)?;
    if let Some(&j) = selected.indices.iter().find(|&&j| j >= phi.len()) {
        return Err(Error::DimensionMismatch(format!(
            "feature {j} outside {} attributed features",
            phi.len()
        )));
    }
    Ok(selected.indices.iter().map(|&j| phi[j]).sum::<f64>() / selected.len() as f64)
}

fn pairs(sets: &[FeatureSet]) -> Result<impl Iterator<Item = (&FeatureSet, &FeatureSet)>> {
    if sets.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "stability needs at least 2 sets, got {}",
            sets.len()
        )));
    }
    Ok((0..sets.len()).flat_map(move |a| (a + 1..sets.len()).map(move |b| (&sets[a], &sets[b]))))
}

/// Mean pairwise Jaccard index. Two empty sets count as identical.
pub fn jaccard_stability(sets: &[FeatureSet]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, b) in pairs(sets)? {
        let inter = a.indices.intersection(&b.indices).count();
        let union = a.indices.union(&b.indices).count();
        total += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
        count += 1;
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustedStability {
    pub value: f64,
    pub skipped_pairs: usize,
}

/// Mean pairwise chance-corrected overlap
/// `(|A∩B| − |A||B|/p) / (min(|A|,|B|) − max(0, |A|+|B|−p))`.
/// Pairs with a zero denominator are skipped.
pub fn asm_stability(sets: &[FeatureSet], p: usize) -> Result<AdjustedStability> {
    for s in sets {
        if let Some(&j) = s.indices.iter().find(|&&j| j >= p) {
            return Err(Error::DimensionMismatch(format!(
                "set {:?} has feature {j} outside 0..{p}",
                s.name
            )));
        }
    }
    let pf = p as f64;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (a, b) in pairs(sets)? {
        let (ka, kb) = (a.len() as f64, b.len() as f64);
        let den = ka.min(kb) - (ka + kb - pf).max(0.0);
        if den == 0.0 {
            skipped += 1;
            continue;
        }
        let inter = a.indices.intersection(&b.indices).count() as f64;
        total += (inter - ka * kb / pf) / den;
        used += 1;
    }
    if skipped > 0 {
        tracing::warn!("ASM skipped {skipped} pair(s) with an undefined denominator");
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "ASM is undefined for every pair of sets".into(),
        ));
    }
    Ok(AdjustedStability {
        value: total / used as f64,
        skipped_pairs: skipped,
    })
}

/// Features present in every set.
pub fn consensus_selection(per_fold: &[FeatureSet]) -> Result<FeatureSet> {
    let first = per_fold
        .first()
        .ok_or_else(|| Error::InvalidArgument("no fold selections".into()))?;
    let mut indices = first.indices.clone();
    for s in &per_fold[1..] {
        indices.retain(|j| s.indices.contains(j));
    }
    let group_names = per_fold
        .iter()
        .map(|s| s.group_names.clone())
        .collect::<Option<Vec<_>>>()
        .map(|gs| {
            let mut it = gs.into_iter();
            let mut acc = it.next().unwrap_or_default();
            for g in it {
                acc.retain(|n| g.contains(n));
            }
            acc
        });
    if indices.is_empty() {
        tracing::warn!("consensus selection is empty");
    }
    Ok(FeatureSet {
        name: first.name.clone(),
        indices,
        group_names,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub low: f64,
    pub high: f64,
}

const MAX_REDRAWS: usize = 100;

fn resample(n: usize, y: &[u8], seed: u64) -> Result<Vec<usize>> {
    let mut rng = seed::rng(seed);
    for _ in 0..MAX_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect();
        let pos = idx.iter().filter(|&&i| y[i] == 1).count();
        if pos > 0 && pos < n {
            return Ok(idx);
        }
    }
    Err(Error::DegenerateResample(MAX_REDRAWS))
}

/// Bootstrap several metrics at once. Replica `r` draws its rows from a seed
/// derived from `(seed, r)`, so replicas can run in any order.
pub fn bootstrap_evaluate_many<F>(
    metric: F,
    x: ArrayView2<f64>,
    y: &[u8],
    replicas: usize,
    seed: u64,
) -> Result<Vec<Estimate>>
where
    F: Fn(ArrayView2<f64>, &[u8]) -> Vec<f64> + Sync,
{
    if replicas < 1 {
        return Err(Error::InvalidArgument("need at least one bootstrap replica".into()));
    }
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} labels",
            x.nrows(),
            y.len()
        )));
    }
    let point = metric(x, y);
    let n = y.len();
    let draws: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let idx = resample(n, y, seed::derive(seed, r as u64))?;
            let xb: Array2<f64> = x.select(Axis(0), &idx);
            let yb: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            Ok(metric(xb.view(), &yb))
        })
        .collect::<Result<_>>()?;
    Ok(point
        .iter()
        .enumerate()
        .map(|(m, &pt)| {
            let mut vals: Vec<f64> = draws.iter().map(|d| d[m]).collect();
            vals.sort_by(f64::total_cmp);
            Estimate {
                point: pt,
                low: percentile_sorted(&vals, 0.025),
                high: percentile_sorted(&vals, 0.975),
            }
        })
        .collect())
}

pub fn bootstrap_evaluate<F>(
    metric: F,
    x: ArrayView2<f64>,
    y: &[u8],
    replicas: usize,
    seed: u64,
) -> Result<Estimate>
where
    F: Fn(ArrayView2<f64>, &[u8]) -> f64 + Sync,
{
    Ok(bootstrap_evaluate_many(|xb, yb| vec![metric(xb, yb)], x, y, replicas, seed)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScores {
    pub jaccard: f64,
    pub asm: Option<f64>,
    pub asm_skipped_pairs: usize,
    pub n_sets: usize,
}

impl StabilityScores {
    pub fn of(sets: &[FeatureSet], p: usize) -> Result<Self> {
        let jaccard = jaccard_stability(sets)?;
        let asm = asm_stability(sets, p).ok();
        Ok(StabilityScores {
            jaccard,
            asm: asm.map(|a| a.value),
            asm_skipped_pairs: asm.map_or(0, |a| a.skipped_pairs),
            n_sets: sets.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub report_version: u32,
    pub n_features: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub mcc: f64,
    pub mean_vif: VifSummary,
    pub mean_abs_corr: f64,
    pub mean_abs_shap: Option<f64>,
    /// Stability across fold selections.
    pub jaccard: f64,
    pub asm: Option<f64>,
    pub asm_skipped_pairs: usize,
    /// 95% percentile intervals keyed by metric name.
    pub bootstrap_ci: BTreeMap<String, (f64, f64)>,
    /// Stability across bootstrap-resample selections, when computed.
    pub bootstrap_stability: Option<StabilityScores>,
}
