//! Enumeration caps.
//!
//! Every operation that walks a full power `D^Σ` (universal relations,
//! complements, censuses, Boolean rank search) checks these limits first.
//! A process installs its caps once (the CLI reads `RELRED_CAPS`); library
//! users that never install anything get [`Caps::default`].

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

pub const ENV_VAR: &str = "RELRED_CAPS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest domain size.
    pub max_domain: usize,
    /// Largest arity of an enumerated power `D^n`.
    pub max_arity: usize,
    /// Largest number of cells `d^n` materialized at once.
    pub max_cells: u64,
    /// Boolean rank search: matrices up to this many cells are searched...
    pub rank_cells: u64,
    /// ...and so are larger ones with at most this many ones.
    pub rank_ones: usize,
    /// Exact census: largest `d^n` (the census enumerates `2^(d^n)` relations).
    pub census_cells: u32,
    /// Sampled census: largest `d^n`.
    pub sample_cells: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_domain: 8,
            max_arity: 8,
            max_cells: 1 << 20,
            rank_cells: 1 << 16,
            rank_ones: 24,
            census_cells: 16,
            sample_cells: 1024,
        }
    }
}

static INSTALLED: OnceLock<Caps> = OnceLock::new();

/// The caps in force for this process.
pub fn current() -> Caps {
    *INSTALLED.get_or_init(Caps::default)
}

/// Installs process-wide caps. Returns false if caps were already fixed.
pub fn install(caps: Caps) -> bool {
    INSTALLED.set(caps).is_ok()
}

impl Caps {
    /// Parses `key=value` pairs separated by commas, starting from the defaults.
    ///
    /// Keys: `domain`, `arity`, `cells`, `rank_cells`, `rank_ones`, `census`, `sample`.
    pub fn parse(spec: &str) -> Result<Caps> {
        let mut caps = Caps::default();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) =
                item.split_once('=').ok_or_else(|| Error::syntax(1, 1, format!("cap `{item}` is not key=value")))?;
            let value: u64 =
                value.trim().parse().map_err(|_| Error::syntax(1, 1, format!("cap `{item}` needs an integer")))?;
            match key.trim() {
                "domain" => caps.max_domain = value as usize,
                "arity" => caps.max_arity = value as usize,
                "cells" => caps.max_cells = value,
                "rank_cells" => caps.rank_cells = value,
                "rank_ones" => caps.rank_ones = value as usize,
                "census" => caps.census_cells = value as u32,
                "sample" => caps.sample_cells = value as u32,
                other => return Err(Error::syntax(1, 1, format!("unknown cap `{other}`"))),
            }
        }
        if caps.max_domain > 255 {
            return Err(Error::CapExceeded { what: "domain cap", value: caps.max_domain as u128, cap: 255 });
        }
        Ok(caps)
    }

    pub fn from_env() -> Result<Caps> {
        match std::env::var(ENV_VAR) {
            Ok(spec) => Caps::parse(&spec),
            Err(_) => Ok(Caps::default()),
        }
    }

    /// Checks that `D^n` may be materialized.
    pub fn check_power(&self, d: usize, n: usize) -> Result<()> {
        if d > self.max_domain {
            return Err(Error::CapExceeded { what: "domain size", value: d as u128, cap: self.max_domain as u128 });
        }
        if n > self.max_arity {
            return Err(Error::CapExceeded { what: "arity", value: n as u128, cap: self.max_arity as u128 });
        }
        let cells = (d as u128).pow(n as u32);
        if cells > self.max_cells as u128 {
            return Err(Error::CapExceeded { what: "cells", value: cells, cap: self.max_cells as u128 });
        }
        Ok(())
    }
}
