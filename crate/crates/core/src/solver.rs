//! Group-L21 penalized logistic regression.
//!
//! The objective is `J(β) = L(β) + λ Σ_g ω_g ‖β_g‖₂` with `L` the mean
//! logistic loss. It is minimized by proximal gradient: a gradient step on
//! `L`, then group-wise soft thresholding. The step size is found by
//! backtracking until the quadratic upper model of `L` holds at the new
//! point, and restarts from `t_init` at every iteration.
//!
//! An unpenalized intercept is fitted by default. It belongs to no group,
//! takes plain gradient steps and starts at the log-odds of the label mean.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, GroupPartition};
use crate::error::{Error, Result};
use crate::math::{l2_norm, logistic_nll, sigmoid};

/// Normalized group penalty weights derived from group importances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub omega: Vec<f64>,
    pub tau0: f64,
    pub eps_weight: f64,
}

impl GroupWeights {
    /// Equal weights `1/G`.
    pub fn uniform(groups: usize) -> Self {
        GroupWeights {
            omega: vec![1.0 / groups as f64; groups],
            tau0: 1.0,
            eps_weight: 0.0,
        }
    }
}

/// `ω̃_g = exp(−s_g/τ0) + ε`, normalized to sum to one. More important groups
/// get smaller weights.
pub fn group_weights(s: &[f64], tau0: f64, eps_weight: f64) -> Result<GroupWeights> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("no group scores".into()));
    }
    if !(tau0 > 0.0) || !(eps_weight > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau0 and eps_weight must be positive, got {tau0} and {eps_weight}"
        )));
    }
    if let Some(bad) = s.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "group scores must be finite and non-negative, got {bad}"
        )));
    }
    let raw: Vec<f64> = s.iter().map(|v| (-v / tau0).exp() + eps_weight).collect();
    let total: f64 = raw.iter().sum();
    Ok(GroupWeights {
        omega: raw.iter().map(|w| w / total).collect(),
        tau0,
        eps_weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub t_init: f64,
    /// Backtracking shrink factor.
    pub alpha: f64,
    /// Stop once ‖β⁺ − β‖₂ falls below this.
    pub eps_tol: f64,
    pub max_iters: usize,
    pub fit_intercept: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1.0,
            t_init: 1.0,
            alpha: 0.5,
            eps_tol: 1e-6,
            max_iters: 5000,
            fit_intercept: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.t_init > 0.0) {
            return Err(Error::InvalidArgument("t_init must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::InvalidArgument("eps_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub group_norms: Vec<f64>,
    /// Names of groups with a nonzero coefficient block, in partition order.
    pub selected: Vec<String>,
    #[serde(skip)]
    pub selected_index: Vec<usize>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub lambda: f64,
    /// Step size accepted on the last iteration.
    pub final_step: f64,
}

impl FitResult {
    /// Columns belonging to selected groups, ascending.
    pub fn selected_features(&self, partition: &GroupPartition) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .selected_index
            .iter()
            .flat_map(|&g| partition.groups()[g].members.iter().copied())
            .collect();
        cols.sort_unstable();
        cols
    }
}

pub fn selected_groups(result: &FitResult) -> Vec<String> {
    result.selected.clone()
}

fn check_dims(x: &ArrayView2<f64>, y: &[u8], beta_len: usize) -> Result<()> {
    if x.nrows() != y.len() || x.ncols() != beta_len {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{}, y has {} labels, beta has {}",
            x.nrows(),
            x.ncols(),
            y.len(),
            beta_len
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyData);
    }
    Ok(())
}

fn loss_at(x: ArrayView2<f64>, y: &[u8], beta: ArrayView1<f64>, intercept: f64) -> f64 {
    loss_from_margins(x.dot(&beta).view(), y, intercept)
}

/// Mean loss given `z = Xβ` (without the intercept).
fn loss_from_margins(z: ArrayView1<f64>, y: &[u8], intercept: f64) -> f64 {
    z.iter()
        .zip(y)
        .map(|(&m, &yi)| logistic_nll(m + intercept, yi))
        .sum::<f64>()
        / y.len() as f64
}

/// Gradient with respect to `beta` and to the intercept.
fn grad_at(x: ArrayView2<f64>, y: &[u8], beta: ArrayView1<f64>, intercept: f64) -> (Array1<f64>, f64) {
    grad_from_margins(x, x.dot(&beta).view(), y, intercept)
}

fn grad_from_margins(x: ArrayView2<f64>, z: ArrayView1<f64>, y: &[u8], intercept: f64) -> (Array1<f64>, f64) {
    let n = y.len() as f64;
    let r: Array1<f64> = z
        .iter()
        .zip(y)
        .map(|(&m, &yi)| sigmoid(m + intercept) - f64::from(yi))
        .collect();
    (x.t().dot(&r) / n, r.sum() / n)
}

/// Mean logistic loss of `Xβ` against `y`.
pub fn logistic_loss(x: ArrayView2<f64>, y: &[u8], beta: ArrayView1<f64>) -> Result<f64> {
    check_dims(&x, y, beta.len())?;
    Ok(loss_at(x, y, beta, 0.0))
}

/// `(1/n) Xᵀ(σ(Xβ) − y)`.
pub fn logistic_grad(x: ArrayView2<f64>, y: &[u8], beta: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_dims(&x, y, beta.len())?;
    Ok(grad_at(x, y, beta, 0.0).0)
}

/// Group soft thresholding: each block `v_g` shrinks toward zero by
/// `tau·ω_g` in Euclidean norm, and vanishes when its norm is at most that.
pub fn group_prox(
    v: ArrayView1<f64>,
    partition: &GroupPartition,
    tau: f64,
    weights: &GroupWeights,
) -> Array1<f64> {
    let mut out = v.to_owned();
    for (group, &w) in partition.groups().iter().zip(&weights.omega) {
        let level = tau * w;
        let norm = l2_norm(group.members.iter().map(|&j| v[j]));
        let scale = if norm > level { 1.0 - level / norm } else { 0.0 };
        for &j in &group.members {
            out[j] = scale * v[j];
        }
    }
    out
}

/// Sample standard deviation of the column-centred training matrix.
pub fn lambda_heuristic(x_train: ArrayView2<f64>) -> Result<f64> {
    let n = x_train.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "lambda heuristic needs at least 2 rows, got {n}"
        )));
    }
    let means = x_train.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let noise = &x_train - &means;
    let count = noise.len() as f64;
    let mean = noise.sum() / count;
    let ss: f64 = noise.iter().map(|e| (e - mean).powi(2)).sum();
    let lambda = (ss / (count - 1.0)).sqrt();
    if lambda == 0.0 {
        tracing::warn!("training matrix has no spread; lambda heuristic gives 0 (no penalty)");
    }
    Ok(lambda)
}

fn penalty(beta: ArrayView1<f64>, partition: &GroupPartition, weights: &GroupWeights) -> f64 {
    partition
        .groups()
        .iter()
        .zip(&weights.omega)
        .map(|(g, w)| w * l2_norm(g.members.iter().map(|&j| beta[j])))
        .sum()
}

fn null_intercept(y: &[u8]) -> f64 {
    let p = (y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

pub fn fit_grasp(
    x: ArrayView2<f64>,
    y: &[u8],
    partition: &GroupPartition,
    weights: &GroupWeights,
    config: &SolverConfig,
) -> Result<FitResult> {
    fit_grasp_from(x, y, partition, weights, config, None)
}

/// Same as [`fit_grasp`] but starts from `start = (beta, intercept)` instead
/// of the null model. The intercept is ignored when it is not fitted.
pub fn fit_grasp_from(
    x: ArrayView2<f64>,
    y: &[u8],
    partition: &GroupPartition,
    weights: &GroupWeights,
    config: &SolverConfig,
    start: Option<(&[f64], f64)>,
) -> Result<FitResult> {
    config.validate()?;
    let p = x.ncols();
    check_dims(&x, y, p)?;
    if partition.n_features() != p {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} features, X has {p}",
            partition.n_features()
        )));
    }
    if weights.omega.len() != partition.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} groups",
            weights.omega.len(),
            partition.len()
        )));
    }

    let lambda = config.lambda;
    let (mut beta, mut intercept) = match start {
        Some((b, _)) if b.len() != p => {
            return Err(Error::DimensionMismatch(format!(
                "start has {} coefficients, X has {p}",
                b.len()
            )))
        }
        Some((b, b0)) => (Array1::from(b.to_vec()), b0),
        None => (Array1::<f64>::zeros(p), null_intercept(y)),
    };
    if !config.fit_intercept {
        intercept = 0.0;
    }
    let mut z = x.dot(&beta);
    let mut loss = loss_from_margins(z.view(), y, intercept);
    if !loss.is_finite() {
        return Err(Error::NonFiniteObjective(0));
    }
    let mut trace = vec![loss];
    let mut converged = false;
    let mut iterations = 0;
    let mut step = config.t_init;

    while iterations < config.max_iters {
        iterations += 1;
        let (grad, grad_b) = grad_from_margins(x, z.view(), y, intercept);
        let mut t = config.t_init;
        let (next, next_z, next_b, next_loss, moved) = loop {
            let v = &beta - &(&grad * t);
            let cand = group_prox(v.view(), partition, t * lambda, weights);
            let cand_b = if config.fit_intercept {
                intercept - t * grad_b
            } else {
                0.0
            };
            let d = &cand - &beta;
            let db = cand_b - intercept;
            let cand_z = x.dot(&cand);
            let cand_loss = loss_from_margins(cand_z.view(), y, cand_b);
            let sq = d.dot(&d) + db * db;
            let model = loss + grad.dot(&d) + grad_b * db + sq / (2.0 * t);
            // rounding slack so that vanishing steps are not rejected forever
            if cand_loss.is_finite() && cand_loss <= model + 1e-15 * loss.abs().max(1.0) {
                break (cand, cand_z, cand_b, cand_loss, sq.sqrt());
            }
            t *= config.alpha;
            if t < 1e-16 {
                return Err(Error::LineSearchFailed(iterations));
            }
        };
        beta = next;
        z = next_z;
        intercept = next_b;
        loss = next_loss;
        step = t;
        let objective = loss + lambda * penalty(beta.view(), partition, weights);
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective(iterations));
        }
        trace.push(objective);
        if moved < config.eps_tol {
            converged = true;
            break;
        }
    }

    let group_norms: Vec<f64> = partition
        .groups()
        .iter()
        .map(|g| l2_norm(g.members.iter().map(|&j| beta[j])))
        .collect();
    let selected_index: Vec<usize> = (0..group_norms.len()).filter(|&g| group_norms[g] > 0.0).collect();
    Ok(FitResult {
        beta: beta.to_vec(),
        intercept,
        selected: selected_index
            .iter()
            .map(|&g| partition.groups()[g].name.clone())
            .collect(),
        selected_index,
        group_norms,
        final_objective: *trace.last().expect("trace starts with the initial objective"),
        objective_trace: trace,
        iterations,
        converged,
        lambda,
        final_step: step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub solver: SolverConfig,
    pub grid_points: usize,
    /// Smallest grid value as a fraction of `lambda_max`.
    pub min_ratio: f64,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            solver: SolverConfig::default(),
            grid_points: 20,
            min_ratio: 1e-4,
            cv_folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub fit: FitResult,
    pub lambda_max: f64,
    pub grid: Vec<f64>,
    pub cv_loss: Vec<f64>,
}

/// Smallest λ at which β = 0 is optimal for singleton groups with weights `1/p`.
pub fn lasso_lambda_max(x: ArrayView2<f64>, y: &[u8], fit_intercept: bool) -> Result<f64> {
    check_dims(&x, y, x.ncols())?;
    let b0 = if fit_intercept { null_intercept(y) } else { 0.0 };
    let (g, _) = grad_at(x, y, Array1::zeros(x.ncols()).view(), b0);
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // inflate by a few ulps so the threshold test is not decided by rounding
    Ok(gmax * x.ncols() as f64 * (1.0 + 1e-12))
}

fn singleton_partition(p: usize) -> GroupPartition {
    let names: Vec<String> = (0..p).map(|j| j.to_string()).collect();
    GroupPartition::singletons(&names)
}

/// L1-penalized logistic regression with λ chosen by k-fold cross-validated
/// log-loss over a log-spaced grid below `lambda_max`.
pub fn fit_lasso(x: ArrayView2<f64>, y: &[u8], config: &LassoConfig) -> Result<LassoFit> {
    config.solver.validate()?;
    if config.grid_points < 1 {
        return Err(Error::InvalidArgument("grid_points must be at least 1".into()));
    }
    let p = x.ncols();
    let partition = singleton_partition(p);
    let weights = GroupWeights::uniform(p);
    let lambda_max = lasso_lambda_max(x, y, config.solver.fit_intercept)?;
    let grid: Vec<f64> = (0..config.grid_points)
        .map(|k| {
            if config.grid_points == 1 {
                lambda_max
            } else {
                let frac = k as f64 / (config.grid_points - 1) as f64;
                lambda_max * config.min_ratio.powf(frac)
            }
        })
        .collect();

    let folds = kfold_split(y.len(), config.cv_folds, config.seed)?;
    let mut cv_loss = vec![0.0; grid.len()];
    for fold in &folds {
        let xt = x.select(ndarray::Axis(0), &fold.train);
        let yt: Vec<u8> = fold.train.iter().map(|&i| y[i]).collect();
        let xv = x.select(ndarray::Axis(0), &fold.validation);
        let yv: Vec<u8> = fold.validation.iter().map(|&i| y[i]).collect();
        // warm starts down the descending grid
        let mut prev: Option<FitResult> = None;
        for (k, &lambda) in grid.iter().enumerate() {
            let cfg = SolverConfig {
                lambda,
                ..config.solver.clone()
            };
            let start = prev.as_ref().map(|f| (f.beta.as_slice(), f.intercept));
            let fit = fit_grasp_from(xt.view(), &yt, &partition, &weights, &cfg, start)?;
            let loss = loss_at(xv.view(), &yv, ArrayView1::from(&fit.beta), fit.intercept);
            cv_loss[k] += loss / folds.len() as f64;
            prev = Some(fit);
        }
    }
    // grid is descending, so the first minimum is the sparsest among ties
    let best = (0..grid.len())
        .fold(0, |b, k| if cv_loss[k] < cv_loss[b] { k } else { b });
    let cfg = SolverConfig {
        lambda: grid[best],
        ..config.solver.clone()
    };
    let fit = fit_grasp(x, y, &partition, &weights, &cfg)?;
    Ok(LassoFit {
        fit,
        lambda_max,
        grid,
        cv_loss,
    })
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::data::Group;
    use crate::seed;

    fn partition(sizes: &[usize]) -> GroupPartition {
        let mut start = 0;
        let groups = sizes
            .iter()
            .enumerate()
            .map(|(g, &s)| {
                let members = (start..start + s).collect();
                start += s;
                Group {
                    name: format!("g{g}"),
                    members,
                }
            })
            .collect();
        GroupPartition::new(start, groups).unwrap()
    }

    fn problem(seed: u64, n: usize, p: usize) -> (Array2<f64>, Vec<u8>) {
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let y = x
            .rows()
            .into_iter()
            .map(|r| {
                let z = r[0] - 0.5 * r[p - 1];
                u8::from(rng.random::<f64>() < sigmoid(z))
            })
            .collect();
        (x, y)
    }

    #[test]
    fn weight_examples() {
        let w = group_weights(&[0.0, 0.0], 1.0, 1e-8).unwrap();
        assert_eq!(w.omega, vec![0.5, 0.5]);
        let w = group_weights(&[0.0, 2f64.ln()], 1.0, 1e-8).unwrap();
        assert!((w.omega[0] - 2.0 / 3.0).abs() < 1e-8 && (w.omega[1] - 1.0 / 3.0).abs() < 1e-8);
        // e^-1, e^-2, e^-3 normalized, computed by hand
        let w = group_weights(&[1.0, 2.0, 3.0], 1.0, 1e-8).unwrap();
        for (got, want) in w.omega.iter().zip([0.66524, 0.24473, 0.09003]) {
            assert!((got - want).abs() < 5e-6, "{got} vs {want}");
        }
        assert!(group_weights(&[-1.0], 1.0, 1e-8).is_err());
        assert!(group_weights(&[1.0], 0.0, 1e-8).is_err());
    }

    #[test]
    fn loss_examples() {
        let (x, y) = problem(1, 30, 3);
        let l = logistic_loss(x.view(), &y, Array1::zeros(3).view()).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let l = logistic_loss(array![[1.0]].view(), &[1], array![3f64.ln()].view()).unwrap();
        assert!((l + 0.75f64.ln()).abs() < 1e-15);
        let l = logistic_loss(array![[1.0]].view(), &[1], array![40.0].view()).unwrap();
        assert!(l.is_finite() && l < 1e-15);
        assert!(logistic_loss(array![[1.0]].view(), &[1, 0], array![0.0].view()).is_err());
    }

    #[test]
    fn grad_examples() {
        let x = array![[1.0, -1.0], [-1.0, 1.0], [2.0, 0.5], [-2.0, -0.5]];
        let y = [1, 0, 0, 1];
        let g = logistic_grad(x.view(), &y, Array1::zeros(2).view()).unwrap();
        let half: Array1<f64> = y.iter().map(|&v| 0.5 - f64::from(v)).collect();
        let want = x.t().dot(&half) / 4.0;
        assert!((&g - &want).iter().all(|d| d.abs() < 1e-15));
        let z = logistic_grad(Array2::zeros((3, 2)).view(), &[0, 1, 1], array![1.0, 2.0].view()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prox_examples() {
        let part = partition(&[2]);
        let w = GroupWeights {
            omega: vec![1.0],
            tau0: 1.0,
            eps_weight: 0.0,
        };
        let z = group_prox(array![3.0, 4.0].view(), &part, 1.0, &w);
        assert!((z[0] - 2.4).abs() < 1e-15 && (z[1] - 3.2).abs() < 1e-15);
        let z = group_prox(array![0.3, 0.4].view(), &part, 1.0, &w);
        assert_eq!(z.to_vec(), vec![0.0, 0.0]);
        let part = partition(&[1, 2]);
        let v = array![0.1, -3.0, 0.2];
        assert_eq!(group_prox(v.view(), &part, 0.0, &GroupWeights::uniform(2)), v);
    }

    #[test]
    fn heuristic_examples() {
        assert_eq!(lambda_heuristic(Array2::from_elem((4, 3), 2.5).view()).unwrap(), 0.0);
        let (mut x, _) = problem(2, 50, 4);
        for mut c in x.columns_mut() {
            let m = c.mean().unwrap();
            let sd = c.mapv(|v| (v - m).powi(2)).mean().unwrap().sqrt();
            c.mapv_inplace(|v| (v - m) / sd);
        }
        let l = lambda_heuristic(x.view()).unwrap();
        assert!((l - (200.0f64 / 199.0).sqrt()).abs() < 1e-12);
        let l3 = lambda_heuristic((&x * 3.0).view()).unwrap();
        assert!((l3 - 3.0 * l).abs() < 1e-12);
        assert!(lambda_heuristic(Array2::zeros((1, 3)).view()).is_err());
    }

    #[test]
    fn huge_lambda_keeps_everything_out() {
        let (x, y) = problem(3, 100, 6);
        let part = partition(&[2, 2, 2]);
        let cfg = SolverConfig {
            lambda: 100.0,
            ..SolverConfig::default()
        };
        let fit = fit_grasp(x.view(), &y, &part, &GroupWeights::uniform(3), &cfg).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert!(fit.selected.is_empty());
        assert!(selected_groups(&fit).is_empty());
    }

    #[test]
    fn fit_is_monotone_sparse_and_a_fixed_point() {
        let (x, y) = problem(4, 200, 6);
        let part = partition(&[2, 1, 3]);
        let w = group_weights(&[0.4, 0.0, 0.1], 1.0, 1e-8).unwrap();
        let cfg = SolverConfig {
            lambda: 0.3,
            ..SolverConfig::default()
        };
        let fit = fit_grasp(x.view(), &y, &part, &w, &cfg).unwrap();
        assert!(fit.converged);
        for pair in fit.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        for (g, group) in part.groups().iter().enumerate() {
            let zero = group.members.iter().all(|&j| fit.beta[j] == 0.0);
            assert_eq!(zero, fit.group_norms[g] == 0.0);
            assert_eq!(!zero, fit.selected_index.contains(&g));
        }
        let beta = ArrayView1::from(&fit.beta);
        let (g, _) = grad_at(x.view(), &y, beta, fit.intercept);
        let t = fit.final_step;
        let again = group_prox((&beta - &(&g * t)).view(), &part, t * cfg.lambda, &w);
        assert!(l2_norm((&again - &beta).iter().copied()) < cfg.eps_tol);
    }

    #[test]
    fn lasso_at_lambda_max_is_empty() {
        let (x, y) = problem(5, 150, 5);
        let lmax = lasso_lambda_max(x.view(), &y, true).unwrap();
        let cfg = SolverConfig {
            lambda: lmax,
            ..SolverConfig::default()
        };
        let fit = fit_grasp(x.view(), &y, &singleton_partition(5), &GroupWeights::uniform(5), &cfg).unwrap();
        assert!(fit.selected.is_empty());
        let cfg = SolverConfig {
            lambda: lmax * 0.5,
            ..cfg
        };
        let fit = fit_grasp(x.view(), &y, &singleton_partition(5), &GroupWeights::uniform(5), &cfg).unwrap();
        assert!(!fit.selected.is_empty());
    }

    #[test]
    fn lasso_finds_a_dominant_feature() {
        let mut hits = 0;
        for s in 0..20 {
            let mut rng = seed::rng(100 + s);
            let x = Array2::from_shape_fn((200, 6), |_| rng.sample::<f64, _>(StandardNormal));
            let y: Vec<u8> = x
                .column(0)
                .iter()
                .map(|&v| u8::from(rng.random::<f64>() < crate::math::sigmoid(3.0 * v)))
                .collect();
            let cfg = LassoConfig {
                seed: s,
                ..LassoConfig::default()
            };
            let fit = fit_lasso(x.view(), &y, &cfg).unwrap();
            hits += usize::from(fit.fit.beta[0] != 0.0);
        }
        assert!(hits >= 19, "dominant feature selected in {hits}/20 runs");
    }

    #[test]
    fn lasso_on_noise_is_nearly_empty() {
        let mut counts = Vec::new();
        for s in 0..20 {
            let mut rng = seed::rng(200 + s);
            let x = Array2::from_shape_fn((200, 6), |_| rng.sample::<f64, _>(StandardNormal));
            let y: Vec<u8> = (0..200).map(|_| u8::from(rng.random_bool(0.5))).collect();
            let cfg = LassoConfig {
                seed: s,
                ..LassoConfig::default()
            };
            let fit = fit_lasso(x.view(), &y, &cfg).unwrap();
            counts.push(fit.fit.selected.len() as f64);
        }
        assert!(crate::math::median(&counts) <= 2.0, "{counts:?}");
    }

    proptest! {
        #[test]
        fn prox_is_the_minimizer(
            v in prop::collection::vec(-3.0f64..3.0, 1..6),
            tau in 0.0f64..2.0,
            w in 0.05f64..1.0,
            dirs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 50),
        ) {
            let p = v.len();
            let part = partition(&[p]);
            let weights = GroupWeights { omega: vec![w], tau0: 1.0, eps_weight: 0.0 };
            let v = Array1::from(v);
            let z = group_prox(v.view(), &part, tau, &weights);
            let obj = |u: &Array1<f64>| 0.5 * l2_norm((u - &v).iter().copied()).powi(2) + tau * w * l2_norm(u.iter().copied());
            let best = obj(&z);
            for d in dirs {
                let zp = &z + &Array1::from(d[..p].to_vec()) * 0.1;
                prop_assert!(best <= obj(&zp) + 1e-12);
            }
        }

        #[test]
        fn singleton_prox_is_soft_threshold(
            v in prop::collection::vec(-3.0f64..3.0, 1..10),
            tau in 0.0f64..2.0,
        ) {
            let p = v.len();
            let z = group_prox(ArrayView1::from(&v), &singleton_partition(p), tau, &GroupWeights::uniform(p));
            let level = tau / p as f64;
            for (zi, vi) in z.iter().zip(&v) {
                let want = vi.signum() * (vi.abs() - level).max(0.0);
                prop_assert!((zi - want).abs() < 1e-15);
            }
        }

        #[test]
        fn weights_sum_to_one_and_reverse_order(s in prop::collection::vec(0.0f64..5.0, 1..12)) {
            let w = group_weights(&s, 1.0, 1e-8).unwrap();
            prop_assert!((w.omega.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for a in 0..s.len() {
                for b in 0..s.len() {
                    if s[a] > s[b] + 1e-6 {
                        prop_assert!(w.omega[a] < w.omega[b]);
                    }
                }
            }
        }
    }
}
