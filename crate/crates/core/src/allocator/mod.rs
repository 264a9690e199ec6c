//! Per-frame eMBB grant allocation.
//!
//! Given cumulative grants `z`, requests `r` and a frame budget `L`, choose
//! grants `x` with `sum x = L` and `0 <= x <= r` that minimize the sample
//! variance of `z + x`. [`water_fill`] solves this exactly; the baselines in
//! [`baseline`] are the heuristics it is compared against.

mod baseline;
mod kkt;
mod oracle;
mod water_fill;

pub use baseline::{allocate_baseline, AllocatorKind};
pub use kkt::{kkt_certificate, ActiveSets, KktCertificate};
pub use oracle::{brute_force_oracle, ORACLE_MAX_USERS};
pub use water_fill::water_fill;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking `L <= sum r`, relative to the total request.
const BUDGET_SLACK: f64 = 1e-12;

/// One frame's allocation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    /// Bits granted to each user so far.
    pub z: Vec<f64>,
    /// Bits each user requests this frame.
    pub r: Vec<f64>,
    /// Bits grantable this frame.
    pub budget: f64,
}

impl AllocationProblem {
    pub fn new(z: Vec<f64>, r: Vec<f64>, budget: f64) -> Result<Self> {
        let problem = AllocationProblem { z, r, budget };
        problem.validate()?;
        Ok(problem)
    }

    pub fn users(&self) -> usize {
        self.z.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.is_empty() {
            return Err(Error::Dimension("need at least one user".into()));
        }
        if self.z.len() != self.r.len() {
            return Err(Error::Dimension(format!(
                "z has {} entries but r has {}",
                self.z.len(),
                self.r.len()
            )));
        }
        let bad = |v: &f64| !v.is_finite() || *v < 0.0;
        if self.z.iter().any(bad) {
            return Err(Error::param(
                "z",
                "cumulative grants must be finite and >= 0",
            ));
        }
        if self.r.iter().any(bad) {
            return Err(Error::param("r", "requests must be finite and >= 0"));
        }
        if bad(&self.budget) {
            return Err(Error::param("budget", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn total_request(&self) -> f64 {
        self.r.iter().sum()
    }

    /// Errors unless `L <= sum r` (up to rounding).
    pub fn check_feasible(&self) -> Result<()> {
        let requested = self.total_request();
        if self.budget > requested * (1.0 + BUDGET_SLACK) + BUDGET_SLACK {
            return Err(Error::InfeasibleBudget {
                budget: self.budget,
                requested,
            });
        }
        Ok(())
    }

    /// Per-user targets `eta_j = (sum z + L)/m - z_j`: the grants that would
    /// equalize everyone exactly.
    pub fn targets(&self) -> Vec<f64> {
        let m = self.users() as f64;
        let level = (self.z.iter().sum::<f64>() + self.budget) / m;
        self.z.iter().map(|z| level - z).collect()
    }
}

/// Granted bits per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub x: Vec<f64>,
}

impl Allocation {
    pub fn total(&self) -> f64 {
        self.x.iter().sum()
    }
}

/// Sample variance of `z + x` written in terms of the targets,
/// `sum (x_j - eta_j)^2 / (m - 1)`. For a single user the divisor is dropped.
pub fn objective(problem: &AllocationProblem, x: &[f64]) -> Result<f64> {
    if x.len() != problem.users() {
        return Err(Error::Dimension(format!(
            "allocation has {} entries for {} users",
            x.len(),
            problem.users()
        )));
    }
    Ok(objective_unchecked(problem, x))
}

pub(crate) fn objective_unchecked(problem: &AllocationProblem, x: &[f64]) -> f64 {
    let m = problem.users();
    let ss: f64 = x
        .iter()
        .zip(problem.targets())
        .map(|(x, eta)| (x - eta) * (x - eta))
        .sum();
    if m == 1 {
        ss
    } else {
        ss / (m - 1) as f64
    }
}
