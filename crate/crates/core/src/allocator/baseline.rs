use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{water_fill, Allocation, AllocationProblem};
use crate::error::{Error, Result};

/// Grant allocation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocatorKind {
    WaterFill,
    SmallestFirst,
    LargestFirst,
    RandomOrder,
    TwoStep,
    MaxMin,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 6] = [
        AllocatorKind::WaterFill,
        AllocatorKind::SmallestFirst,
        AllocatorKind::LargestFirst,
        AllocatorKind::RandomOrder,
        AllocatorKind::TwoStep,
        AllocatorKind::MaxMin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AllocatorKind::WaterFill => "water_fill",
            AllocatorKind::SmallestFirst => "smallest_first",
            AllocatorKind::LargestFirst => "largest_first",
            AllocatorKind::RandomOrder => "random_order",
            AllocatorKind::TwoStep => "two_step",
            AllocatorKind::MaxMin => "max_min",
        }
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AllocatorKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("allocator", format!("unknown method `{s}`")))
    }
}

/// Runs `method` on `problem`. Only [`AllocatorKind::RandomOrder`] draws
/// from `rng`.
pub fn allocate_baseline<R: Rng + ?Sized>(
    method: AllocatorKind,
    problem: &AllocationProblem,
    rng: &mut R,
) -> Result<Allocation> {
    problem.validate()?;
    problem.check_feasible()?;
    let r = &problem.r;
    let m = problem.users();
    let budget = problem.budget.min(problem.total_request());
    let x = match method {
        AllocatorKind::WaterFill => return water_fill(problem),
        AllocatorKind::SmallestFirst => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| r[i].total_cmp(&r[j]).then(i.cmp(&j)));
            greedy(r, &order, budget)
        }
        AllocatorKind::LargestFirst => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| r[j].total_cmp(&r[i]).then(i.cmp(&j)));
            greedy(r, &order, budget)
        }
        AllocatorKind::RandomOrder => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(rng);
            greedy(r, &order, budget)
        }
        AllocatorKind::TwoStep => two_step(r, budget),
        AllocatorKind::MaxMin => max_min(r, budget),
    };
    Ok(Allocation { x })
}

/// Serves users in `order`, each up to its full request.
fn greedy(r: &[f64], order: &[usize], budget: f64) -> Vec<f64> {
    let mut x = vec![0.0; r.len()];
    let mut left = budget;
    for &i in order {
        if left <= 0.0 {
            break;
        }
        x[i] = r[i].min(left);
        left -= x[i];
    }
    x
}

/// Even share `L/m` capped by each request, then the leftover greedily by
/// descending residual request (ties by user index).
fn two_step(r: &[f64], budget: f64) -> Vec<f64> {
    let m = r.len();
    let share = budget / m as f64;
    let mut x: Vec<f64> = r.iter().map(|&ri| ri.min(share)).collect();
    let mut left = budget - x.iter().sum::<f64>();
    let residual: Vec<f64> = r.iter().zip(&x).map(|(r, x)| r - x).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| residual[j].total_cmp(&residual[i]).then(i.cmp(&j)));
    for i in order {
        if left <= 0.0 {
            break;
        }
        let extra = residual[i].min(left);
        x[i] += extra;
        left -= extra;
    }
    x
}

/// Progressive filling on requests sorted ascending: user `j` (of the `m - j`
/// still unserved) receives `min(r_j, remaining / (m - j))`.
fn max_min(r: &[f64], budget: f64) -> Vec<f64> {
    let m = r.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| r[i].total_cmp(&r[j]).then(i.cmp(&j)));
    let mut x = vec![0.0; m];
    let mut left = budget;
    for (served, &i) in order.iter().enumerate() {
        let share = left / (m - served) as f64;
        x[i] = r[i].min(share);
        left -= x[i];
    }
    x
}
