use serde::{Deserialize, Serialize};

use super::AllocationProblem;
use crate::error::{Error, Result};

/// Relative tolerance for deciding that a bound is active.
const ACTIVE_TOL: f64 = 1e-9;

/// Users with a positive request split by which box constraint binds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveSets {
    /// `0 < x < r`.
    pub interior: Vec<usize>,
    /// `x = 0`.
    pub at_zero: Vec<usize>,
    /// `x = r`.
    pub at_cap: Vec<usize>,
}

/// Lagrange multipliers and residuals witnessing (or refuting) optimality.
///
/// Stationarity reads `2(x_i - eta_i)/(m-1) + lambda - mu_i + omega_i = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    /// Multiplier of the budget constraint. `None` when no user is interior,
    /// in which case the multipliers below use a value picked from the
    /// interval the bound users allow.
    pub lambda: Option<f64>,
    /// Multiplier actually used for `mu` and `omega`.
    pub lambda_used: f64,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    pub active_sets: ActiveSets,
    /// Max-norm violation of stationarity.
    pub stationarity_residual: f64,
    /// Max-norm violation of `mu_i x_i = 0` and `omega_i (r_i - x_i) = 0`.
    pub complementarity_residual: f64,
    /// Max violation of `sum x = L` and `0 <= x <= r`.
    pub primal_residual: f64,
}

impl KktCertificate {
    pub fn certifies(&self, tol: f64) -> bool {
        self.stationarity_residual <= tol
            && self.complementarity_residual <= tol
            && self.primal_residual <= tol
    }
}

/// Builds the KKT multipliers for `x` and measures how far `x` is from
/// satisfying the optimality conditions.
pub fn kkt_certificate(problem: &AllocationProblem, x: &[f64]) -> Result<KktCertificate> {
    problem.validate()?;
    let m = problem.users();
    if x.len() != m {
        return Err(Error::Dimension(format!(
            "allocation has {} entries for {m} users",
            x.len()
        )));
    }
    let r = &problem.r;
    let total: f64 = x.iter().sum();
    let primal_residual = x
        .iter()
        .zip(r)
        .map(|(&xi, &ri)| (-xi).max(xi - ri).max(0.0))
        .fold((total - problem.budget).abs(), f64::max);

    let mut sets = ActiveSets::default();
    for i in (0..m).filter(|&i| r[i] > 0.0) {
        let tol = ACTIVE_TOL * r[i].max(1.0);
        if x[i] <= tol {
            sets.at_zero.push(i);
        } else if x[i] >= r[i] - tol {
            sets.at_cap.push(i);
        } else {
            sets.interior.push(i);
        }
    }

    if m == 1 {
        // The budget constraint fixes x; there is nothing to certify.
        return Ok(KktCertificate {
            lambda: None,
            lambda_used: 0.0,
            mu: vec![0.0],
            omega: vec![0.0],
            active_sets: sets,
            stationarity_residual: 0.0,
            complementarity_residual: 0.0,
            primal_residual,
        });
    }

    let eta = problem.targets();
    let scale = 2.0 / (m - 1) as f64;
    let lambda = if sets.interior.is_empty() {
        None
    } else {
        let numerator: f64 = sets.interior.iter().map(|&i| eta[i]).sum::<f64>()
            + sets.at_cap.iter().map(|&i| r[i]).sum::<f64>()
            - problem.budget;
        Some(numerator / ((m - 1) as f64 * sets.interior.len() as f64 / 2.0))
    };
    let lambda_used = lambda.unwrap_or_else(|| {
        // mu >= 0 on zero-bound users needs lambda >= scale*eta_i; omega >= 0
        // on capped users needs lambda <= scale*(eta_i - r_i).
        let lo = sets
            .at_zero
            .iter()
            .map(|&i| scale * eta[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = sets
            .at_cap
            .iter()
            .map(|&i| scale * (eta[i] - r[i]))
            .fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    });

    let mut mu = vec![0.0; m];
    let mut omega = vec![0.0; m];
    for &i in &sets.at_zero {
        mu[i] = (lambda_used - scale * eta[i]).max(0.0);
    }
    for &i in &sets.at_cap {
        omega[i] = (scale * (eta[i] - r[i]) - lambda_used).max(0.0);
    }
    for i in (0..m).filter(|&i| r[i] == 0.0) {
        // Both bounds bind; either multiplier may absorb the gradient.
        let g = scale * (x[i] - eta[i]) + lambda_used;
        if g >= 0.0 {
            mu[i] = g;
        } else {
            omega[i] = -g;
        }
    }

    let stationarity_residual = (0..m)
        .map(|i| (scale * (x[i] - eta[i]) + lambda_used - mu[i] + omega[i]).abs())
        .fold(0.0, f64::max);
    let complementarity_residual = (0..m)
        .map(|i| (mu[i] * x[i]).abs().max((omega[i] * (r[i] - x[i])).abs()))
        .fold(0.0, f64::max);

    Ok(KktCertificate {
        lambda,
        lambda_used,
        mu,
        omega,
        active_sets: sets,
        stationarity_residual,
        complementarity_residual,
        primal_residual,
    })
}
