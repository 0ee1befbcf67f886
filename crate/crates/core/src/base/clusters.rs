use std::collections::{BTreeMap, HashMap};

use super::ExampleId;
use crate::error::{Error, Result};

/// Partition of a dataset's examples into redundancy clusters.
///
/// Every example belongs to exactly one cluster; singletons are ordinary
/// one-member clusters. Cluster labels are arbitrary positive integers;
/// [`ClusterMap::canonical`] relabels them `1..=K` by smallest member id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterMap {
    assignment: BTreeMap<ExampleId, u64>,
}

impl ClusterMap {
    pub fn singletons(ids: &[ExampleId]) -> Self {
        ClusterMap {
            assignment: ids
                .iter()
                .enumerate()
                .map(|(k, &id)| (id, k as u64 + 1))
                .collect(),
        }
    }

    /// Builds a map from explicit `(id, cluster)` pairs.
    pub fn from_assignment(pairs: impl IntoIterator<Item = (ExampleId, u64)>) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        for (id, c) in pairs {
            if assignment.insert(id, c).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(ClusterMap { assignment })
    }

    /// Completes a partial assignment over `ids`: ids without an entry become
    /// singletons with fresh labels. Entries for ids outside `ids` are rejected.
    pub fn from_partial(ids: &[ExampleId], partial: &[(ExampleId, u64)]) -> Result<Self> {
        let mut assignment: BTreeMap<ExampleId, u64> = BTreeMap::new();
        let known: std::collections::HashSet<_> = ids.iter().copied().collect();
        for &(id, c) in partial {
            if !known.contains(&id) {
                return Err(Error::UnknownId(id));
            }
            if assignment.insert(id, c).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        let mut next = assignment.values().copied().max().unwrap_or(0) + 1;
        for &id in ids {
            assignment.entry(id).or_insert_with(|| {
                next += 1;
                next - 1
            });
        }
        Ok(ClusterMap { assignment }.canonical())
    }

    /// Builds a map from member groups; ids not in any group are singletons.
    pub fn from_groups(ids: &[ExampleId], groups: &[Vec<ExampleId>]) -> Result<Self> {
        let partial: Vec<_> = groups
            .iter()
            .enumerate()
            .flat_map(|(g, members)| members.iter().map(move |&id| (id, g as u64 + 1)))
            .collect();
        Self::from_partial(ids, &partial)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_of(&self, id: ExampleId) -> Option<u64> {
        self.assignment.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ExampleId, u64)> + '_ {
        self.assignment.iter().map(|(&id, &c)| (id, c))
    }

    pub fn ids(&self) -> impl Iterator<Item = ExampleId> + '_ {
        self.assignment.keys().copied()
    }

    /// Member lists keyed by cluster label, members ascending.
    pub fn groups(&self) -> BTreeMap<u64, Vec<ExampleId>> {
        let mut out: BTreeMap<u64, Vec<ExampleId>> = BTreeMap::new();
        for (&id, &c) in &self.assignment {
            out.entry(c).or_default().push(id);
        }
        out
    }

    pub fn n_clusters(&self) -> usize {
        self.groups().len()
    }

    /// Relabels clusters `1..=K` in order of their smallest member id. Two
    /// maps describe the same partition iff their canonical forms are equal.
    pub fn canonical(&self) -> Self {
        let mut relabel: HashMap<u64, u64> = HashMap::new();
        let mut assignment = BTreeMap::new();
        for (&id, &c) in &self.assignment {
            let next = relabel.len() as u64 + 1;
            let label = *relabel.entry(c).or_insert(next);
            assignment.insert(id, label);
        }
        ClusterMap { assignment }
    }

    pub fn same_partition(&self, other: &ClusterMap) -> bool {
        self.canonical() == other.canonical()
    }

    /// Dense view aligned to `ids` (typically score-matrix rows). The map
    /// must cover exactly the ids given.
    pub fn dense(&self, ids: &[ExampleId]) -> Result<DenseClusters> {
        if ids.len() != self.assignment.len() {
            let extra = self
                .assignment
                .keys()
                .find(|id| !ids.contains(id))
                .copied();
            if let Some(id) = extra {
                return Err(Error::invalid(format!(
                    "cluster map covers example {id} which is not being ranked"
                )));
            }
        }
        let mut compact: HashMap<u64, usize> = HashMap::new();
        let mut of_row = Vec::with_capacity(ids.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (row, id) in ids.iter().enumerate() {
            let c = self.cluster_of(*id).ok_or(Error::UnknownId(*id))?;
            let k = *compact.entry(c).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[k].push(row);
            of_row.push(k);
        }
        if members.iter().map(Vec::len).sum::<usize>() != self.assignment.len() {
            return Err(Error::invalid("cluster map and ranked ids disagree"));
        }
        Ok(DenseClusters { of_row, members })
    }
}

/// Cluster structure over row indices `0..n`, clusters numbered `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseClusters {
    pub of_row: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl DenseClusters {
    pub fn all_singletons(n: usize) -> Self {
        DenseClusters {
            of_row: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn size_of_row(&self, row: usize) -> usize {
        self.members[self.of_row[row]].len()
    }
}
