//! Tabular ingestion, leak-safe preprocessing, feature groups and fold splits.

mod dataset;
mod folds;
mod groups;
mod preprocess;

pub use dataset::{load_csv, read_csv, ColumnKind, ColumnSpec, Dataset, Value};
pub use folds::{holdout_split, kfold_split, Fold};
pub use groups::{
    default_groups, load_group_map, parse_groups, read_group_map, read_groups, Group, GroupMap,
    GroupPartition,
};
pub use preprocess::{
    apply_preprocessor, fit_preprocessor, ColumnTransform, DesignMatrix, FittedColumn,
    Preprocessor,
};
