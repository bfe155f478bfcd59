//! Process identifiers, message identifiers, and validated parameters.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense process index in `0..n`.
///
/// Correct processes occupy the low indices and Byzantine processes the high
/// ones, so adversaries and tests can enumerate the correct processes in a
/// stable order (see [`SystemConfig::zeta`]).
pub type ProcessId = usize;

/// Message identifier. Broadcast payloads range over `1..=c` where `c` is the
/// number of correct processes; `0` is never a valid message.
pub type Message = u32;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("system must contain at least one process")]
    EmptySystem,
    #[error("byzantine fraction {0} outside [0, 1)")]
    ByzantineFraction(f64),
    #[error("no correct process left: n = {n}, byzantine = {byz}")]
    NoCorrectProcess { n: usize, byz: usize },
    #[error("byzantine id {0} out of range")]
    ByzantineId(ProcessId),
    #[error("sample size {0} must be at least 1")]
    ZeroSample(&'static str),
    #[error("threshold {name} = {hat} exceeds sample size {size}")]
    ThresholdTooLarge {
        name: &'static str,
        hat: usize,
        size: usize,
    },
    #[error("ready threshold ratio {r_hat}/{r} must be below delivery ratio {d_hat}/{d}")]
    ThresholdRatio {
        r_hat: usize,
        r: usize,
        d_hat: usize,
        d: usize,
    },
}

/// A system of `n` processes of which `floor(f * n)` are Byzantine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    n: usize,
    f: f64,
    byzantine: BTreeSet<ProcessId>,
}

impl SystemConfig {
    /// Builds a system with the top `floor(f * n)` ids Byzantine.
    pub fn new(n: usize, f: f64) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        if !(0.0..1.0).contains(&f) {
            return Err(ConfigError::ByzantineFraction(f));
        }
        let byz = (f * n as f64).floor() as usize;
        if byz >= n {
            return Err(ConfigError::NoCorrectProcess { n, byz });
        }
        let byzantine = (n - byz..n).collect();
        Ok(Self { n, f, byzantine })
    }

    /// Builds a system with an explicit Byzantine set.
    pub fn with_byzantine(n: usize, byzantine: BTreeSet<ProcessId>) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::EmptySystem);
        }
        if let Some(&bad) = byzantine.iter().find(|&&b| b >= n) {
            return Err(ConfigError::ByzantineId(bad));
        }
        if byzantine.len() >= n {
            return Err(ConfigError::NoCorrectProcess {
                n,
                byz: byzantine.len(),
            });
        }
        let f = byzantine.len() as f64 / n as f64;
        Ok(Self { n, f, byzantine })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The fraction the system was configured with (not necessarily realized).
    pub fn f(&self) -> f64 {
        self.f
    }

    /// The realized Byzantine fraction `|byzantine| / n`. Security bounds use
    /// this value so they can be compared against simulations of this exact
    /// system.
    pub fn realized_f(&self) -> f64 {
        self.byzantine.len() as f64 / self.n as f64
    }

    pub fn num_byzantine(&self) -> usize {
        self.byzantine.len()
    }

    pub fn num_correct(&self) -> usize {
        self.n - self.byzantine.len()
    }

    pub fn is_byzantine(&self, id: ProcessId) -> bool {
        self.byzantine.contains(&id)
    }

    pub fn byzantine(&self) -> &BTreeSet<ProcessId> {
        &self.byzantine
    }

    pub fn correct(&self) -> impl Iterator<Item = ProcessId> + '_ {
        (0..self.n).filter(move |id| !self.byzantine.contains(id))
    }

    /// The `i`-th correct process (0-based) in id order.
    pub fn zeta(&self, i: usize) -> ProcessId {
        self.correct().nth(i).expect("index within correct count")
    }
}

/// Sample sizes and thresholds for the three protocol layers.
///
/// `g` is the expected gossip sample size; `e`, `r`, `d` are the echo, ready
/// and delivery sample sizes; `e_hat`, `r_hat`, `d_hat` the corresponding
/// delivery thresholds. The ready threshold ratio must sit strictly below the
/// delivery threshold ratio or the feedback between the two samples breaks
/// down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub g: usize,
    pub e: usize,
    pub e_hat: usize,
    pub r: usize,
    pub r_hat: usize,
    pub d: usize,
    pub d_hat: usize,
}

impl ProtocolParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g: usize,
        e: usize,
        e_hat: usize,
        r: usize,
        r_hat: usize,
        d: usize,
        d_hat: usize,
    ) -> Result<Self, ConfigError> {
        let params = Self {
            g,
            e,
            e_hat,
            r,
            r_hat,
            d,
            d_hat,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, size) in [("g", self.g), ("e", self.e), ("r", self.r), ("d", self.d)] {
            if size == 0 {
                return Err(ConfigError::ZeroSample(name));
            }
        }
        let checks = [
            ("e_hat", self.e_hat, self.e),
            ("r_hat", self.r_hat, self.r),
            ("d_hat", self.d_hat, self.d),
        ];
        for (name, hat, size) in checks {
            if hat > size {
                return Err(ConfigError::ThresholdTooLarge { name, hat, size });
            }
        }
        // r_hat / r < d_hat / d, compared exactly in integers.
        if self.r_hat * self.d >= self.d_hat * self.r {
            return Err(ConfigError::ThresholdRatio {
                r_hat: self.r_hat,
                r: self.r,
                d_hat: self.d_hat,
                d: self.d,
            });
        }
        Ok(())
    }
}
