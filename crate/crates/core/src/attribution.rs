//! Shapley attributions for tree ensembles and their aggregation into feature
//! and group importances.
//!
//! Attributions are path-dependent: a feature absent from a coalition sends
//! the prediction down both branches of every split on it, weighted by the
//! training covers of the children. [`tree_shap`] computes them in polynomial
//! time; [`exact_shapley_oracle`] enumerates all coalitions and exists to check
//! it. Both work on the margin (log-odds) scale.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::data::GroupPartition;
use crate::error::{Error, Result};
use crate::gbm::{predict_margin, Tree, TreeEnsemble, TreeNode};
use crate::math::median;

/// Largest feature count [`exact_shapley_oracle`] accepts.
pub const ORACLE_MAX_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix {
    /// `values[[i, j]]` is the attribution of feature `j` in row `i`.
    pub values: Array2<f64>,
    pub base_value: f64,
    pub sample_margins: Array1<f64>,
}

impl AttributionMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    /// Largest |base + Σ_j values[i, j] − margin_i| over rows.
    pub fn efficiency_gap(&self) -> f64 {
        self.values
            .rows()
            .into_iter()
            .zip(&self.sample_margins)
            .map(|(r, m)| (self.base_value + r.sum() - m).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `#base_value,<v>`, a header of feature names, then one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W, feature_names: &[String]) -> Result<()> {
        if feature_names.len() != self.values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} attribution columns",
                feature_names.len(),
                self.values.ncols()
            )));
        }
        writeln!(out, "#base_value,{:?}", self.base_value).map_err(|e| Error::io("<csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(feature_names)?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads the format of [`AttributionMatrix::write_csv`]. Sample margins are
    /// reconstructed from the efficiency identity.
    pub fn read_csv<R: BufRead>(mut input: R) -> Result<(Self, Vec<String>)> {
        let mut first = String::new();
        input
            .read_line(&mut first)
            .map_err(|e| Error::io("<csv>", e))?;
        let base_value = first
            .trim()
            .strip_prefix("#base_value,")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| {
                Error::InvalidArgument("attribution CSV must start with #base_value,<v>".into())
            })?;
        let mut rdr = csv::Reader::from_reader(input);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut data = Vec::new();
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec?;
            for cell in rec.iter() {
                data.push(cell.trim().parse::<f64>().map_err(|_| Error::NotNumeric {
                    column: "attribution".into(),
                    value: cell.to_string(),
                })?);
            }
            n += 1;
        }
        let values = Array2::from_shape_vec((n, names.len()), data)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        let sample_margins = values.sum_axis(ndarray::Axis(1)) + base_value;
        Ok((
            AttributionMatrix {
                values,
                base_value,
                sample_margins,
            },
            names,
        ))
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

const EMPTY_ELEMENT: PathElement = PathElement {
    feature: None,
    zero_fraction: 0.0,
    one_fraction: 0.0,
    weight: 0.0,
};

fn extend_path(
    path: &mut [PathElement],
    depth: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    path[depth] = PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero_fraction * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * d1 / ((i + 1) as f64 * one);
            next_one = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

/// Total path weight with element `index` removed, without mutating the path.
fn unwound_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    node: usize,
    x: ArrayView1<f64>,
    phi: &mut [f64],
    parent_path: &[PathElement],
    depth: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    let mut path = Vec::with_capacity(depth + 2);
    path.extend_from_slice(&parent_path[..depth]);
    path.resize(depth + 1, EMPTY_ELEMENT);
    extend_path(&mut path, depth, zero_fraction, one_fraction, feature);
    let mut depth = depth;

    match tree.nodes()[node] {
        TreeNode::Leaf { value, .. } => {
            for i in 1..=depth {
                let w = unwound_sum(&path, depth, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
        }
        TreeNode::Split {
            feature: split,
            threshold,
            left,
            right,
            cover,
        } => {
            let (hot, cold) = if x[split] < threshold {
                (left, right)
            } else {
                (right, left)
            };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            // a feature seen higher up the path is merged rather than duplicated
            if let Some(k) = (1..=depth).find(|&k| path[k].feature == Some(split)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, depth, k);
                depth -= 1;
            }
            let nodes = tree.nodes();
            let hot_zero = nodes[hot].cover() / cover;
            let cold_zero = nodes[cold].cover() / cover;
            recurse(
                tree,
                hot,
                x,
                phi,
                &path,
                depth + 1,
                hot_zero * incoming_zero,
                incoming_one,
                Some(split),
            );
            recurse(
                tree,
                cold,
                x,
                phi,
                &path,
                depth + 1,
                cold_zero * incoming_zero,
                0.0,
                Some(split),
            );
        }
    }
}

fn tree_shap_row(model: &TreeEnsemble, x: ArrayView1<f64>) -> Vec<f64> {
    let mut phi = vec![0.0; model.feature_count];
    for tree in &model.trees {
        recurse(tree, 0, x, &mut phi, &[], 0, 1.0, 1.0, None);
    }
    phi
}

/// Expected margin under the training distribution encoded by the covers.
pub fn expected_margin(model: &TreeEnsemble) -> f64 {
    model.base_margin + model.trees.iter().map(Tree::expected_value).sum::<f64>()
}

/// Path-dependent TreeSHAP over every row of `x_val`. Rows are attributed in
/// parallel.
pub fn tree_shap(model: &TreeEnsemble, x_val: ArrayView2<f64>) -> Result<AttributionMatrix> {
    model.validate()?;
    let sample_margins = predict_margin(model, x_val)?;
    let rows: Vec<Vec<f64>> = (0..x_val.nrows())
        .into_par_iter()
        .map(|i| tree_shap_row(model, x_val.row(i)))
        .collect();
    let p = model.feature_count;
    let values = Array2::from_shape_vec((rows.len(), p), rows.into_iter().flatten().collect())
        .expect("each row has p attributions");
    Ok(AttributionMatrix {
        values,
        base_value: expected_margin(model),
        sample_margins,
    })
}

fn coalition_tree_value(tree: &Tree, node: usize, x: ArrayView1<f64>, coalition: u32) -> f64 {
    match tree.nodes()[node] {
        TreeNode::Leaf { value, .. } => value,
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            cover,
        } => {
            if coalition & (1 << feature) != 0 {
                let next = if x[feature] < threshold { left } else { right };
                coalition_tree_value(tree, next, x, coalition)
            } else {
                let nodes = tree.nodes();
                nodes[left].cover() / cover * coalition_tree_value(tree, left, x, coalition)
                    + nodes[right].cover() / cover * coalition_tree_value(tree, right, x, coalition)
            }
        }
    }
}

/// Margin of `x` when only the features in the bit set `coalition` are known.
pub fn coalition_value(model: &TreeEnsemble, x: ArrayView1<f64>, coalition: u32) -> f64 {
    model.base_margin
        + model
            .trees
            .iter()
            .map(|t| coalition_tree_value(t, 0, x, coalition))
            .sum::<f64>()
}

/// Shapley values by enumerating every coalition. Cost is O(2^p · size of
/// the ensemble), so `p` is capped at [`ORACLE_MAX_FEATURES`].
pub fn exact_shapley_oracle(model: &TreeEnsemble, x: ArrayView1<f64>) -> Result<Vec<f64>> {
    let p = model.feature_count;
    if p > ORACLE_MAX_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "exact Shapley enumeration supports at most {ORACLE_MAX_FEATURES} features, got {p}"
        )));
    }
    if x.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "row has {} values, model expects {p}",
            x.len()
        )));
    }
    let values: Vec<f64> = (0..1u32 << p).map(|s| coalition_value(model, x, s)).collect();
    let mut fact = vec![1.0f64; p + 1];
    for k in 1..=p {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut phi = vec![0.0; p];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1u32 << j;
        for s in (0..1u32 << p).filter(|s| s & bit == 0) {
            let size = s.count_ones() as usize;
            let w = fact[size] * fact[p - size - 1] / fact[p];
            *phi_j += w * (values[(s | bit) as usize] - values[s as usize]);
        }
    }
    Ok(phi)
}

/// Mean absolute attribution of each feature.
pub fn feature_importance(attr: &AttributionMatrix) -> Result<Vec<f64>> {
    let n = attr.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    Ok(attr
        .values
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n as f64)
        .collect())
}

/// Mean of member importances for each group.
pub fn group_importance(phi: &[f64], partition: &GroupPartition) -> Result<Vec<f64>> {
    if phi.len() != partition.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "{} importances for a partition of {} features",
            phi.len(),
            partition.n_features()
        )));
    }
    Ok(partition
        .groups()
        .iter()
        .map(|g| g.members.iter().map(|&j| phi[j]).sum::<f64>() / g.members.len() as f64)
        .collect())
}

/// Features whose importance is strictly above the median importance.
pub fn select_by_median(phi: &[f64]) -> Vec<usize> {
    if phi.is_empty() {
        return Vec::new();
    }
    let m = median(phi);
    (0..phi.len()).filter(|&j| phi[j] > m).collect()
}
