//! Synthetic grouped-feature classification data with known support.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Group, GroupPartition};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub group_sizes: Vec<usize>,
    pub informative_groups: usize,
    /// Equicorrelation of features within a group.
    pub rho: f64,
    /// Absolute logistic coefficient of every informative feature.
    pub coefficient: f64,
    /// Probability that a label is flipped after sampling.
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn p(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 || self.group_sizes.is_empty() || self.group_sizes.contains(&0) {
            return bad("need n >= 1 and nonempty groups".into());
        }
        if self.informative_groups > self.group_sizes.len() {
            return bad(format!(
                "{} informative groups but only {} groups",
                self.informative_groups,
                self.group_sizes.len()
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return bad(format!("label noise must lie in [0, 0.5], got {}", self.label_noise));
        }
        if !self.coefficient.is_finite() {
            return bad("coefficient must be finite".into());
        }
        Ok(())
    }
}

/// Group size lists written as `4,4,3` or `10x4` (ten groups of four).
pub fn parse_group_sizes(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot parse group sizes {text:?}"));
    if let Some((count, size)) = text.split_once(['x', 'X']) {
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        let size: usize = size.trim().parse().map_err(|_| bad())?;
        return Ok(vec![size; count]);
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
    pub partition: GroupPartition,
    /// Indices of informative groups, ascending.
    pub informative: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl SyntheticData {
    pub fn informative_names(&self) -> Vec<String> {
        self.informative
            .iter()
            .map(|&g| self.partition.groups()[g].name.clone())
            .collect()
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::from_matrix(&self.feature_names, self.x.view(), &self.y)
    }

    pub fn group_map(&self) -> crate::data::GroupMap {
        crate::data::GroupMap::new(
            self.partition
                .groups()
                .iter()
                .flat_map(|g| {
                    g.members
                        .iter()
                        .map(|&j| (self.feature_names[j].clone(), g.name.clone()))
                })
                .collect(),
        )
    }
}

/// Draws features group-wise as `√ρ·z_g + √(1−ρ)·e_j` with independent
/// standard normals, so columns in a group have correlation ρ and groups are
/// independent. Labels follow a logistic model whose nonzero coefficients sit
/// in the informative groups (one random sign per group), then flip with the
/// noise rate.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = seed::rng(seed::derive(spec.seed, seed::stream::SYNTHETIC));
    let p = spec.p();
    let n_groups = spec.group_sizes.len();

    let mut groups = Vec::with_capacity(n_groups);
    let mut feature_names = Vec::with_capacity(p);
    let mut start = 0;
    for (g, &size) in spec.group_sizes.iter().enumerate() {
        groups.push(Group {
            name: format!("g{g}"),
            members: (start..start + size).collect(),
        });
        feature_names.extend((0..size).map(|k| format!("g{g}_f{k}")));
        start += size;
    }
    let partition = GroupPartition::new(p, groups)?;

    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(&mut rng);
    let mut informative = order[..spec.informative_groups].to_vec();
    informative.sort_unstable();

    let mut coefficients = vec![0.0; p];
    for &g in &informative {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for &j in &partition.groups()[g].members {
            coefficients[j] = sign * spec.coefficient;
        }
    }

    let (shared, own) = (spec.rho.sqrt(), (1.0 - spec.rho).sqrt());
    let mut x = Array2::zeros((spec.n, p));
    for i in 0..spec.n {
        for group in partition.groups() {
            let z: f64 = rng.sample(StandardNormal);
            for &j in &group.members {
                let e: f64 = rng.sample(StandardNormal);
                x[[i, j]] = shared * z + own * e;
            }
        }
    }
    let y = x
        .rows()
        .into_iter()
        .map(|row| {
            let z: f64 = row.iter().zip(&coefficients).map(|(a, b)| a * b).sum();
            let label = rng.random::<f64>() < sigmoid(z);
            let flip = rng.random::<f64>() < spec.label_noise;
            u8::from(label != flip)
        })
        .collect();
    Ok(SyntheticData {
        x,
        y,
        feature_names,
        partition,
        informative,
        coefficients,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub informative_groups: Vec<String>,
    pub coefficients: Vec<(String, f64)>,
    pub spec: SyntheticSpec,
}

#[derive(Debug, Clone)]
pub struct SyntheticFiles {
    pub data: PathBuf,
    pub groups: PathBuf,
    pub truth: PathBuf,
}

pub const LABEL_COLUMN: &str = "y";

/// Writes `data.csv` (features then label `y`), `groups.csv` and `truth.json`
/// into `dir`.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: impl AsRef<Path>) -> Result<SyntheticFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = generate(spec)?;
    let files = SyntheticFiles {
        data: dir.join("data.csv"),
        groups: dir.join("groups.csv"),
        truth: dir.join("truth.json"),
    };

    let mut w = csv::Writer::from_path(&files.data)?;
    w.write_record(data.feature_names.iter().map(String::as_str).chain([LABEL_COLUMN]))?;
    for (row, label) in data.x.rows().into_iter().zip(&data.y) {
        w.write_record(row.iter().map(|v| format!("{v:?}")).chain([label.to_string()]))?;
    }
    w.flush().map_err(|e| Error::io(&files.data, e))?;

    let mut w = csv::Writer::from_path(&files.groups)?;
    w.write_record(["feature", "group"])?;
    for (feature, group) in data.group_map().entries() {
        w.write_record([feature, group])?;
    }
    w.flush().map_err(|e| Error::io(&files.groups, e))?;

    let truth = Truth {
        informative_groups: data.informative_names(),
        coefficients: data
            .feature_names
            .iter()
            .cloned()
            .zip(data.coefficients.iter().copied())
            .collect(),
        spec: spec.clone(),
    };
    std::fs::write(&files.truth, serde_json::to_string_pretty(&truth)?)
        .map_err(|e| Error::io(&files.truth, e))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use ndarray::{ArrayView1, Axis};

    use super::*;
    use crate::metrics::{classification_metrics, mean_abs_correlation};
    use crate::solver::{fit_grasp, GroupWeights, SolverConfig};

    fn spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n: 500,
            group_sizes: vec![3, 3, 2, 4],
            informative_groups: 2,
            rho: 0.5,
            coefficient: 0.5,
            label_noise: 0.05,
            seed,
        }
    }

    #[test]
    fn group_size_syntax() {
        assert_eq!(parse_group_sizes("10x4").unwrap(), vec![4; 10]);
        assert_eq!(parse_group_sizes("4, 4,3").unwrap(), vec![4, 4, 3]);
        assert!(parse_group_sizes("four").is_err());
    }

    #[test]
    fn truth_lies_inside_the_spec() {
        let d = generate(&spec(1)).unwrap();
        assert_eq!(d.informative.len(), 2);
        assert!(d.informative.iter().all(|&g| g < 4));
        for (j, &c) in d.coefficients.iter().enumerate() {
            assert_eq!(c != 0.0, d.informative.contains(&d.partition.group_of(j)));
        }
        assert!(generate(&SyntheticSpec { informative_groups: 5, ..spec(1) }).is_err());
        assert!(generate(&SyntheticSpec { rho: 1.0, ..spec(1) }).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&spec(3)).unwrap();
        let b = generate(&spec(3)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn uncorrelated_when_rho_is_zero() {
        let mut vals = Vec::new();
        for s in 0..20 {
            let d = generate(&SyntheticSpec {
                n: 10_000,
                rho: 0.0,
                ..spec(s)
            })
            .unwrap();
            vals.push(mean_abs_correlation(d.x.view()));
        }
        assert!(crate::math::median(&vals) < 0.05);
    }

    #[test]
    fn strong_signal_is_nearly_deterministic() {
        let d = generate(&SyntheticSpec {
            n: 2000,
            coefficient: 10.0,
            label_noise: 0.0,
            ..spec(4)
        })
        .unwrap();
        let support: Vec<usize> = (0..d.x.ncols()).filter(|&j| d.coefficients[j] != 0.0).collect();
        let xs = d.x.select(Axis(1), &support);
        let (train, test) = (0..1500, 1500..2000);
        let xt = xs.slice(ndarray::s![train.clone(), ..]);
        let names: Vec<String> = support.iter().map(|j| j.to_string()).collect();
        let cfg = SolverConfig {
            lambda: 0.0,
            max_iters: 2000,
            ..SolverConfig::default()
        };
        let fit = fit_grasp(
            xt,
            &d.y[train],
            &GroupPartition::singletons(&names),
            &GroupWeights::uniform(support.len()),
            &cfg,
        )
        .unwrap();
        let xv = xs.slice(ndarray::s![test.clone(), ..]);
        let pred: Vec<u8> = xv
            .dot(&ArrayView1::from(&fit.beta))
            .iter()
            .map(|&z| u8::from(z + fit.intercept >= 0.0))
            .collect();
        let acc = classification_metrics(&d.y[test], &pred).unwrap().accuracy;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = generate_synthetic(&spec(2), dir.path()).unwrap();
        let ds = crate::data::load_csv(&files.data, LABEL_COLUMN, &Default::default()).unwrap();
        assert_eq!(ds.n_rows(), 500);
        assert_eq!(ds.columns().len(), 12);
        let names: Vec<String> = ds.columns().iter().map(|c| c.name.clone()).collect();
        let part = crate::data::parse_groups(&files.groups, &names).unwrap();
        assert_eq!(part.len(), 4);
        let truth: Truth = serde_json::from_str(&std::fs::read_to_string(&files.truth).unwrap()).unwrap();
        assert_eq!(truth.informative_groups.len(), 2);
    }
}
