//! Instance model: agents with entitlements, items, additive valuations, and
//! integral allocations.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum InstanceError {
    #[error("instance has no agents")]
    NoAgents,
    #[error("weight of agent {} is not strictly positive", .0 + 1)]
    NonPositiveWeight(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed rational `{0}`")]
    MalformedRational(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("expected {expected} bundles, found {found}")]
    BundleCount { expected: usize, found: usize },
    #[error("item {0} is out of range")]
    ItemOutOfRange(usize),
    #[error("agent {0} is out of range")]
    AgentOutOfRange(usize),
    #[error("item {0} appears in more than one bundle")]
    DuplicateItem(usize),
    #[error("item {0} is not allocated")]
    MissingItem(usize),
}

/// Classification of a single item against the whole valuation profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemKind {
    /// Someone values it positively; `pure` when nobody values it negatively.
    Good { pure: bool },
    /// Maximum value over agents is exactly zero.
    Neutral,
    /// Every agent values it negatively.
    Chore,
}

impl ItemKind {
    pub fn is_good(self) -> bool {
        matches!(self, ItemKind::Good { .. })
    }

    pub fn is_chore(self) -> bool {
        self == ItemKind::Chore
    }

    pub fn is_neutral(self) -> bool {
        self == ItemKind::Neutral
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemKind::Good { pure: true } => f.write_str("pure good"),
            ItemKind::Good { pure: false } => f.write_str("good"),
            ItemKind::Neutral => f.write_str("neutral"),
            ItemKind::Chore => f.write_str("chore"),
        }
    }
}

/// A weighted fair division instance with additive valuations.
///
/// Immutable once built; every constructor validates positivity of weights and
/// the shape of the valuation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    weights: Vec<T>,
    valuations: Vec<Vec<T>>,
    labels: Option<Vec<String>>,
}

impl<T: Scalar> Instance<T> {
    /// Row `i` of `valuations` is agent `i`'s value for each item.
    pub fn new(weights: Vec<T>, valuations: Vec<Vec<T>>) -> Result<Self, Vec<InstanceError>> {
        let mut errors = Vec::new();
        if weights.is_empty() {
            errors.push(InstanceError::NoAgents);
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_positive() {
                errors.push(InstanceError::NonPositiveWeight(i));
            }
        }
        if valuations.len() != weights.len() {
            errors.push(InstanceError::DimensionMismatch(format!(
                "{} weights but {} valuation rows",
                weights.len(),
                valuations.len()
            )));
        }
        if let Some(first) = valuations.first() {
            let m = first.len();
            for (i, row) in valuations.iter().enumerate() {
                if row.len() != m {
                    errors.push(InstanceError::DimensionMismatch(format!(
                        "row {} has {} entries, expected {}",
                        i + 1,
                        row.len(),
                        m
                    )));
                }
            }
        }
        if errors.is_empty() {
            Ok(Instance {
                weights,
                valuations,
                labels: None,
            })
        } else {
            Err(errors)
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, Vec<InstanceError>> {
        if labels.len() != self.m() {
            return Err(vec![InstanceError::DimensionMismatch(format!(
                "{} item labels for {} items",
                labels.len(),
                self.m()
            ))]);
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn m(&self) -> usize {
        self.valuations.first().map_or(0, Vec::len)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &T {
        &self.weights[i]
    }

    pub fn valuations(&self) -> &[Vec<T>] {
        &self.valuations
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.valuations[i]
    }

    pub fn value(&self, i: usize, j: usize) -> &T {
        &self.valuations[i][j]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Item label for reports, falling back to the 1-based index.
    pub fn item_name(&self, j: usize) -> String {
        match &self.labels {
            Some(l) => l[j].clone(),
            None => format!("{}", j + 1),
        }
    }

    /// Classify item `j` as a good, neutral item or chore.
    pub fn classify_item(&self, j: usize) -> ItemKind {
        let column = || self.valuations.iter().map(|row| &row[j]);
        if column().any(|v| v.is_positive()) {
            ItemKind::Good {
                pure: !column().any(|v| v.is_negative()),
            }
        } else if column().any(|v| v.is_zero()) {
            ItemKind::Neutral
        } else {
            ItemKind::Chore
        }
    }

    pub fn kinds(&self) -> Vec<ItemKind> {
        (0..self.m()).map(|j| self.classify_item(j)).collect()
    }

    /// Additive value of `bundle` for agent `i`.
    pub fn bundle_value<'a, I>(&self, i: usize, bundle: I) -> T
    where
        I: IntoIterator<Item = &'a usize>,
    {
        let row = &self.valuations[i];
        bundle
            .into_iter()
            .fold(T::zero(), |acc, &j| acc + row[j].clone())
    }

    /// Sub-instance on `items` (in the given order); labels follow the items.
    pub fn restrict(&self, items: &[usize]) -> Instance<T> {
        Instance {
            weights: self.weights.clone(),
            valuations: self
                .valuations
                .iter()
                .map(|row| items.iter().map(|&j| row[j].clone()).collect())
                .collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| items.iter().map(|&j| l[j].clone()).collect()),
        }
    }

    /// Copy of the instance with agent `i`'s valuation row multiplied by `factor`.
    pub fn scale_agent(&self, i: usize, factor: &T) -> Instance<T> {
        let mut out = self.clone();
        for v in &mut out.valuations[i] {
            *v = v.clone() * factor.clone();
        }
        out
    }

    pub fn with_weights(&self, weights: Vec<T>) -> Result<Instance<T>, Vec<InstanceError>> {
        let built = Instance::new(weights, self.valuations.clone())?;
        Ok(Instance {
            labels: self.labels.clone(),
            ..built
        })
    }
}

/// True iff `u` and `v` order every pair of items the same way and agree on
/// the sign of every item.
pub fn ordinally_compatible<T: Scalar>(u: &[T], v: &[T]) -> bool {
    if u.len() != v.len() {
        return false;
    }
    let signs_agree = u
        .iter()
        .zip(v)
        .all(|(a, b)| a.is_positive() == b.is_positive() && a.is_negative() == b.is_negative());
    if !signs_agree {
        return false;
    }
    (0..u.len()).all(|t1| (0..u.len()).all(|t2| (u[t1] > u[t2]) == (v[t1] > v[t2])))
}

/// Integral allocation stored as an owner vector: item `j` belongs to `owner[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    agents: usize,
    owner: Vec<usize>,
}

impl Allocation {
    pub fn from_owners(agents: usize, owner: Vec<usize>) -> Result<Self, AllocationError> {
        if let Some(&bad) = owner.iter().find(|&&a| a >= agents) {
            return Err(AllocationError::AgentOutOfRange(bad));
        }
        Ok(Allocation { agents, owner })
    }

    /// Build from per-agent bundles that must partition `0..items`.
    pub fn from_bundles(bundles: &[Vec<usize>], items: usize) -> Result<Self, AllocationError> {
        let mut owner = vec![None; items];
        for (i, bundle) in bundles.iter().enumerate() {
            for &j in bundle {
                let slot = owner.get_mut(j).ok_or(AllocationError::ItemOutOfRange(j))?;
                if slot.is_some() {
                    return Err(AllocationError::DuplicateItem(j));
                }
                *slot = Some(i);
            }
        }
        let owner = owner
            .into_iter()
            .enumerate()
            .map(|(j, o)| o.ok_or(AllocationError::MissingItem(j)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Allocation {
            agents: bundles.len(),
            owner,
        })
    }

    /// Everything to one agent.
    pub fn all_to(agents: usize, items: usize, agent: usize) -> Self {
        assert!(agent < agents);
        Allocation {
            agents,
            owner: vec![agent; items],
        }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn items(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, j: usize) -> usize {
        self.owner[j]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    pub fn bundle(&self, i: usize) -> Vec<usize> {
        self.owner
            .iter()
            .enumerate()
            .filter(|&(_, &o)| o == i)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn bundles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.agents];
        for (j, &o) in self.owner.iter().enumerate() {
            out[o].push(j);
        }
        out
    }

    /// New allocation with `item` moved to `to`.
    pub fn with_transfer(&self, item: usize, to: usize) -> Allocation {
        assert!(to < self.agents);
        let mut owner = self.owner.clone();
        owner[item] = to;
        Allocation {
            agents: self.agents,
            owner,
        }
    }

    pub fn check_agents(&self, n: usize) -> Result<(), AllocationError> {
        if self.agents != n {
            return Err(AllocationError::BundleCount {
                expected: n,
                found: self.agents,
            });
        }
        Ok(())
    }
}
