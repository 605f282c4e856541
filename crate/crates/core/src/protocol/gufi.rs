//! Globally unique flight identifiers: `<operator>-<origin>-<dest>-<epoch-seconds>-<seq>`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GufiError {
    #[error("GUFI {0:?} does not have the form OPERATOR-ORIGIN-DEST-EPOCH-SEQ")]
    Malformed(String),
    #[error("GUFI component {0:?} must be non-empty alphanumeric")]
    BadComponent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Gufi(String);

fn component_ok(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric())
}

impl Gufi {
    pub fn new(operator: &str, origin: &str, destination: &str, departure: i64, seq: u32) -> Result<Self, GufiError> {
        for c in [operator, origin, destination] {
            if !component_ok(c) {
                return Err(GufiError::BadComponent(c.into()));
            }
        }
        if departure < 0 {
            return Err(GufiError::BadComponent(departure.to_string()));
        }
        Ok(Gufi(format!("{operator}-{origin}-{destination}-{departure}-{seq:04}")))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Gufi {
    type Error = GufiError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let parts: Vec<&str> = s.split('-').collect();
        let ok = parts.len() == 5
            && parts[..3].iter().all(|p| component_ok(p))
            && parts[3].parse::<u64>().is_ok()
            && parts[4].len() >= 4
            && parts[4].chars().all(|c| c.is_ascii_digit());
        if ok {
            Ok(Gufi(s))
        } else {
            Err(GufiError::Malformed(s))
        }
    }
}

impl From<Gufi> for String {
    fn from(g: Gufi) -> String {
        g.0
    }
}

impl fmt::Display for Gufi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Hands out GUFIs that are unique within one run: the sequence number
/// counts flights sharing operator, city pair and departure time.
#[derive(Debug, Default, Clone)]
pub struct GufiAllocator {
    next: BTreeMap<(String, String, String, i64), u32>,
}

impl GufiAllocator {
    pub fn allocate(&mut self, operator: &str, origin: &str, destination: &str, departure: i64) -> Result<Gufi, GufiError> {
        let seq = self
            .next
            .entry((operator.into(), origin.into(), destination.into(), departure))
            .or_insert(0);
        let g = Gufi::new(operator, origin, destination, departure, *seq)?;
        *seq += 1;
        Ok(g)
    }
}
