//! JSON file formats for instances, allocations and markets.
//!
//! Rationals are written as canonical strings (`"3"`, `"-9/10"`). Files
//! produced by [`instance_to_json`] parse back to the same instance and
//! re-serialize byte for byte.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::instance::{Allocation, AllocationError, Instance, InstanceError};
use crate::scalar::{format_rational, parse_rational, Rational};

/// Raw, unvalidated instance file contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub weights: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<Vec<String>>,
    pub valuations: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationFile {
    pub bundles: Vec<Vec<usize>>,
}

/// Integral market: bundles plus one price per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub bundles: Vec<Vec<usize>>,
    pub prices: Vec<String>,
}

/// Turn parsed file data into a checked [`Instance`], collecting every problem.
pub fn validate_instance(raw: &InstanceFile) -> Result<Instance<Rational>, Vec<InstanceError>> {
    let mut errors = Vec::new();
    let mut parse = |text: &String| match parse_rational(text) {
        Ok(q) => Some(q),
        Err(e) => {
            errors.push(InstanceError::MalformedRational(e.0));
            None
        }
    };
    let weights: Vec<Option<Rational>> = raw.weights.iter().map(&mut parse).collect();
    let valuations: Vec<Vec<Option<Rational>>> = raw
        .valuations
        .iter()
        .map(|row| row.iter().map(&mut parse).collect())
        .collect();
    if !errors.is_empty() {
        return Err(errors);
    }
    let weights = weights.into_iter().map(Option::unwrap).collect();
    let valuations = valuations
        .into_iter()
        .map(|row| row.into_iter().map(Option::unwrap).collect())
        .collect();
    let inst = Instance::new(weights, valuations)?;
    match &raw.items {
        Some(labels) => inst.with_labels(labels.clone()),
        None => Ok(inst),
    }
}

pub fn instance_to_file(inst: &Instance<Rational>) -> InstanceFile {
    InstanceFile {
        weights: inst.weights().iter().map(format_rational).collect(),
        items: inst.labels().map(<[String]>::to_vec),
        valuations: inst
            .valuations()
            .iter()
            .map(|row| row.iter().map(format_rational).collect())
            .collect(),
    }
}

/// Canonical pretty-printed JSON (with trailing newline).
pub fn instance_to_json(inst: &Instance<Rational>) -> String {
    let mut text = serde_json::to_string_pretty(&instance_to_file(inst)).expect("serializable");
    text.push('\n');
    text
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid instance: {}", join(.0))]
    Instance(Vec<InstanceError>),
    #[error("invalid allocation: {0}")]
    Allocation(#[from] AllocationError),
    #[error("malformed rational `{0}`")]
    Rational(String),
    #[error("{0}")]
    Shape(String),
}

fn join(errors: &[InstanceError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn parse_instance_json(text: &str) -> Result<Instance<Rational>, LoadError> {
    let raw: InstanceFile = serde_json::from_str(text)?;
    validate_instance(&raw).map_err(LoadError::Instance)
}

/// SHA-256 of the compact canonical serialization, hex encoded.
pub fn instance_hash(inst: &Instance<Rational>) -> String {
    let compact = serde_json::to_string(&instance_to_file(inst)).expect("serializable");
    hex::encode(Sha256::digest(compact.as_bytes()))
}

pub fn parse_allocation_json(
    text: &str,
    inst: &Instance<Rational>,
) -> Result<Allocation, LoadError> {
    let raw: AllocationFile = serde_json::from_str(text)?;
    allocation_from_bundles(&raw.bundles, inst)
}

fn allocation_from_bundles(
    bundles: &[Vec<usize>],
    inst: &Instance<Rational>,
) -> Result<Allocation, LoadError> {
    if bundles.len() != inst.n() {
        return Err(AllocationError::BundleCount {
            expected: inst.n(),
            found: bundles.len(),
        }
        .into());
    }
    Ok(Allocation::from_bundles(bundles, inst.m())?)
}

pub fn allocation_to_file(a: &Allocation) -> AllocationFile {
    AllocationFile {
        bundles: a.bundles(),
    }
}

pub fn parse_market_json(
    text: &str,
    inst: &Instance<Rational>,
) -> Result<(Allocation, Vec<Rational>), LoadError> {
    let raw: MarketFile = serde_json::from_str(text)?;
    let alloc = allocation_from_bundles(&raw.bundles, inst)?;
    if raw.prices.len() != inst.m() {
        return Err(LoadError::Shape(format!(
            "{} prices for {} items",
            raw.prices.len(),
            inst.m()
        )));
    }
    let prices = raw
        .prices
        .iter()
        .map(|t| parse_rational(t).map_err(|e| LoadError::Rational(e.0)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((alloc, prices))
}

pub fn market_to_file(a: &Allocation, prices: &[Rational]) -> MarketFile {
    MarketFile {
        bundles: a.bundles(),
        prices: prices.iter().map(format_rational).collect(),
    }
}
