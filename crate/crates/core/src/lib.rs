//! Group-Shapley feature selection.
//!
//! A boosted tree model is trained on each training fold and attributed on
//! the held-out fold with TreeSHAP. Mean absolute attributions are averaged
//! within feature groups and turned into group penalty weights, and a
//! group-L21 penalized logistic regression solved by proximal gradient with
//! backtracking keeps the groups whose coefficients survive. The crate also
//! carries the LASSO and median-SHAP baselines and the predictability,
//! redundancy and stability metrics used to compare selectors.

pub mod attribution;
pub mod data;
pub mod error;
pub mod gbm;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod solver;
pub mod synthetic;

pub use attribution::{
    exact_shapley_oracle, feature_importance, group_importance, select_by_median, tree_shap,
    AttributionMatrix,
};
pub use data::{
    apply_preprocessor, default_groups, fit_preprocessor, kfold_split, load_csv, parse_groups,
    Dataset, DesignMatrix, GroupPartition, Preprocessor,
};
pub use error::{Error, ErrorKind, Result};
pub use gbm::{predict_margin, predict_proba, train_gbm, GbmConfig, TreeEnsemble};
pub use metrics::{EvalReport, FeatureSet};
pub use pipeline::{RunConfig, Selector};
pub use solver::{fit_grasp, fit_grasp_from, fit_lasso, group_weights, FitResult, GroupWeights, SolverConfig};
pub use synthetic::SyntheticSpec;
