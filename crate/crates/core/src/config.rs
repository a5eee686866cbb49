use std::fmt;
use std::str::FromStr;

use crate::copula::MiOptions;
use crate::error::{Error, Result};

/// Ordering algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Globally optimal shortest-path search over the subset lattice.
    Mmi,
    /// Top-down greedy selection, one variable at a time.
    Greedy,
    /// Exhaustive enumeration of all orders (small p only).
    Brute,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mmi => "mmi",
            Method::Greedy => "greedy",
            Method::Brute => "brute",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmi" => Ok(Method::Mmi),
            "greedy" => Ok(Method::Greedy),
            "brute" => Ok(Method::Brute),
            other => Err(Error::InvalidInput(format!(
                "unknown method '{other}' (expected mmi, greedy, or brute)"
            ))),
        }
    }
}

/// Knobs shared by all ordering runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Neighbor count for the entropy estimator.
    pub k: usize,
    /// Clamp negative MI estimates to zero. Required for best-first search;
    /// turning it off switches to exhaustive lattice expansion.
    pub clamp_negative: bool,
    /// Abort after this many node expansions.
    pub max_nodes: u64,
    /// Worker thread cap; `None` leaves the global pool untouched.
    pub threads: Option<usize>,
    /// Seed for every random choice in a run (jitter, simulations).
    pub seed: u64,
    pub method: Method,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k: 3,
            clamp_negative: true,
            max_nodes: 2_000_000,
            threads: None,
            seed: 0,
            method: Method::Mmi,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.max_nodes == 0 {
            return Err(Error::InvalidInput("max_nodes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mi_options(&self) -> MiOptions {
        MiOptions {
            k: self.k,
            clamp_negative: self.clamp_negative,
            seed: self.seed,
        }
    }
}
