use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::preprocess::Preprocessor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub members: Vec<usize>,
}

/// Disjoint cover of the columns `0..p` by named, nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    groups: Vec<Group>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    pub fn new(p: usize, groups: Vec<Group>) -> Result<Self> {
        let mut group_of = vec![usize::MAX; p];
        for (g, group) in groups.iter().enumerate() {
            if group.members.is_empty() {
                return Err(Error::InvalidPartition(format!(
                    "group {:?} is empty",
                    group.name
                )));
            }
            for &j in &group.members {
                if j >= p {
                    return Err(Error::InvalidPartition(format!(
                        "column {j} out of range for p = {p}"
                    )));
                }
                if group_of[j] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "column {j} belongs to more than one group"
                    )));
                }
                group_of[j] = g;
            }
        }
        if let Some(j) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidPartition(format!("column {j} is uncovered")));
        }
        Ok(GroupPartition { groups, group_of })
    }

    /// One group per column, named after the column.
    pub fn singletons(names: &[String]) -> Self {
        let groups = names
            .iter()
            .enumerate()
            .map(|(j, n)| Group {
                name: n.clone(),
                members: vec![j],
            })
            .collect();
        GroupPartition {
            groups,
            group_of: (0..names.len()).collect(),
        }
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, column: usize) -> usize {
        self.group_of[column]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.name == name)
    }
}

/// Groups output columns by the source column they were derived from.
pub fn default_groups(prep: &Preprocessor) -> GroupPartition {
    let mut groups: Vec<Group> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (j, src) in prep.output_sources().enumerate() {
        let g = *index.entry(src).or_insert_with(|| {
            groups.push(Group {
                name: src.to_string(),
                members: Vec::new(),
            });
            groups.len() - 1
        });
        groups[g].members.push(j);
    }
    GroupPartition::new(prep.n_outputs(), groups).expect("source grouping is a partition")
}

/// Reads a two-column `feature,group` CSV. Groups appear in order of first
/// mention; members keep file order.
pub fn parse_groups(path: impl AsRef<Path>, column_names: &[String]) -> Result<GroupPartition> {
    load_group_map(path)?.partition(column_names)
}

pub fn read_groups<R: Read>(reader: R, column_names: &[String]) -> Result<GroupPartition> {
    read_group_map(reader)?.partition(column_names)
}

/// Raw `feature,group` assignments, not yet checked against a column set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupMap {
    entries: Vec<(String, String)>,
}

impl GroupMap {
    pub fn new(entries: Vec<(String, String)>) -> Self {
        GroupMap { entries }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Builds the partition of `column_names` this map describes.
    pub fn partition(&self, column_names: &[String]) -> Result<GroupPartition> {
        let col_index: HashMap<&str, usize> = column_names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.as_str(), j))
            .collect();
        let mut groups: Vec<Group> = Vec::new();
        let mut assigned = vec![false; column_names.len()];
        for (feature, group) in &self.entries {
            let j = *col_index
                .get(feature.as_str())
                .ok_or_else(|| Error::UnknownFeature(feature.clone()))?;
            if std::mem::replace(&mut assigned[j], true) {
                return Err(Error::DuplicateAssignment(feature.clone()));
            }
            match groups.iter_mut().find(|g| &g.name == group) {
                Some(g) => g.members.push(j),
                None => groups.push(Group {
                    name: group.clone(),
                    members: vec![j],
                }),
            }
        }
        if let Some(j) = assigned.iter().position(|a| !a) {
            return Err(Error::UncoveredColumn(column_names[j].clone()));
        }
        GroupPartition::new(column_names.len(), groups)
    }
}

pub fn load_group_map(path: impl AsRef<Path>) -> Result<GroupMap> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_group_map(file)
}

pub fn read_group_map<R: Read>(reader: R) -> Result<GroupMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut entries = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::RaggedRow {
                row: i,
                expected: 2,
                found: rec.len(),
            });
        }
        if i == 0 && rec[0].eq_ignore_ascii_case("feature") && rec[1].eq_ignore_ascii_case("group") {
            continue;
        }
        entries.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(GroupMap { entries })
}
